"""Rescaled thin-shell energies of the recovery family against the bending limit."""

from __future__ import annotations

import argparse
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from devshell.gammalimit import GammaRow, MaterialModel, ShellSweep, gamma_gap
from devshell.geometry import CurveSpec, make_chart
from devshell.io import write_csv
from devshell.isometry import IsometryAB, build_V_from_ab
from devshell.matching import match_to_order
from devshell.profiles import Profile

T = 2 * np.pi


@dataclass
class GammaConfig:
    amplitude: float = 1.0
    cycles: int = 2
    beta: float = 3.5
    h: tuple[float, ...] = tuple(2.0**-k for k in range(4, 9))
    grid: int = 256
    fd_order: int = 6
    mu: float = 1.0
    lam: float = 1.0
    out: Path = Path("out/gamma.csv")


def run(cfg: GammaConfig) -> list[GammaRow]:
    chart = make_chart(CurveSpec.cylinder(), cfg.grid, cfg.grid, cfg.fd_order)
    ab = IsometryAB.from_profiles(Profile.harmonic("cos", cfg.amplitude, cfg.cycles, T), 0.0,
                                  chart.grid.t_nodes)
    fam = match_to_order(build_V_from_ab(ab, chart), 2, chart)
    rows = gamma_gap(fam, ShellSweep(cfg.h, cfg.beta), MaterialModel(cfg.mu, cfg.lam), chart)
    for r in rows:
        print(f"h {r.h:.6g}  ratio {r.ratio:.6f}  I {r.I:.6f}  gap {r.gap:.3e}  "
              f"Vh error {r.Vh_err:.3e}  strain error {r.strain_err:.3e}")
    return rows


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--cycles", type=int, default=2)
    p.add_argument("--beta", type=float, default=3.5)
    p.add_argument("--grid", type=int, default=256)
    p.add_argument("--out", type=Path, default=GammaConfig.out)
    a = p.parse_args(argv)
    cfg = GammaConfig(a.amplitude, a.cycles, a.beta, grid=a.grid, out=a.out)
    rows = run(cfg)
    cols = [f.name for f in fields(GammaRow)]
    cfg.out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(cfg.out, cols, [[getattr(r, c) for c in cols] for r in rows])


if __name__ == "__main__":
    main()
