"""Metric defect of matched families against eps for N = 1..max order."""

from __future__ import annotations

import argparse
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from devshell.geometry import CurveSpec, make_chart
from devshell.io import write_csv
from devshell.isometry import IsometryAB, build_V_from_ab
from devshell.matching import defect_sweep, estimate_order, match_to_order
from devshell.profiles import Profile

T = 2 * np.pi


@dataclass
class SweepConfig:
    cycles: int = 2
    max_order: int = 3
    grid: int = 256
    fd_order: int = 6
    eps: tuple[float, ...] = (0.1, 0.05, 0.025, 0.0125)
    out: Path = Path("out/matching.csv")


def run(cfg: SweepConfig) -> list[tuple]:
    chart = make_chart(CurveSpec.cylinder(), cfg.grid, cfg.grid, cfg.fd_order)
    ab = IsometryAB.from_profiles(Profile.harmonic("cos", 1.0, cfg.cycles, T), 0.0,
                                  chart.grid.t_nodes)
    V = build_V_from_ab(ab, chart)
    rows = []
    for N in range(1, cfg.max_order + 1):
        data = defect_sweep(match_to_order(V, N, chart), cfg.eps)
        est = estimate_order(data)
        rows += [(N, e, d, est.slope) for e, d in data]
        print(f"N = {N}: slope {est.slope:.3f} (expected >= {N + 1 - 0.1:.1f})")
    return rows


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--cycles", type=int, default=2, help="a = cos(cycles 2 pi t / T)")
    p.add_argument("--max-order", type=int, default=3)
    p.add_argument("--grid", type=int, default=256)
    p.add_argument("--fd-order", type=int, default=6)
    p.add_argument("--out", type=Path, default=SweepConfig.out)
    a = p.parse_args(argv)
    cfg = SweepConfig(a.cycles, a.max_order, a.grid, a.fd_order, out=a.out)
    rows = run(cfg)
    cfg.out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(cfg.out, ["N", "eps", "defect", "slope"], rows)


if __name__ == "__main__":
    main()
