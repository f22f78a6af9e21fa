"""Configuration parsing and file output.

Config grammar: one ``key = value`` per line; ``#`` starts a comment; blank lines
are ignored. Keys:

    T            length of the parameter interval (number; ``pi`` allowed, e.g. ``2*pi``)
    R            cylinder radius: sets kappa = 0 and kappa_n = 1/R; T defaults to 2 pi R
    kappa        profile (see below), default 0
    kappa_n      profile, required unless R is given
    s_minus      profile, required
    s_plus       profile, required
    delta        number, default 0.05 / max(s_minus, s_plus)
    grid.nt      integer >= 8, default 128
    grid.ns      integer >= 8, default 64
    grid.order   even integer >= 2, default 4

Profiles: a bare number, ``const c``, ``sin|cos [amp [cycles [phase [offset]]]]``
(``offset + amp sin(2 pi cycles t / T + phase)``), ``poly c0 c1 ...`` or
``table file.csv`` (two columns t, value; relative to the config file).
"""

from __future__ import annotations

import ast
import csv
import json
import math
import operator
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .geometry import CurveSpec
from .profiles import Profile, parse_profile

KEYS = ("T", "R", "kappa", "kappa_n", "s_minus", "s_plus", "delta", "grid.nt", "grid.ns", "grid.order")

_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
        ast.Div: operator.truediv, ast.Pow: operator.pow, ast.USub: operator.neg, ast.UAdd: operator.pos}


def parse_number(text: str) -> float:
    """A float, or arithmetic on numbers and ``pi``."""
    try:
        return float(text)
    except ValueError:
        pass

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        raise ConfigError(f"not a number: {text!r}")

    try:
        return ev(ast.parse(text.strip(), mode="eval"))
    except SyntaxError as exc:
        raise ConfigError(f"not a number: {text!r}") from exc


@dataclass(frozen=True)
class SurfaceConfig:
    """A parsed surface configuration; ``raw`` keeps the key-value text for provenance."""

    spec: CurveSpec
    nt: int = 128
    ns: int = 64
    order: int = 4
    raw: dict = field(default_factory=dict)
    source: str = ""

    def with_grid(self, nt: int | None = None, ns: int | None = None, order: int | None = None):
        nt = self.nt if nt is None else nt
        ns = self.ns if ns is None else ns
        order = self.order if order is None else order
        _check_grid(nt, ns, order)
        return SurfaceConfig(self.spec, nt, ns, order, self.raw, self.source)

    def to_json(self) -> dict:
        return {"source": self.source, "raw": dict(sorted(self.raw.items())),
                "curve": self.spec.to_json(),
                "grid": {"nt": self.nt, "ns": self.ns, "order": self.order}}


def _check_grid(nt, ns, order):
    if nt < 8 or ns < 8:
        raise ConfigError("grid sizes must be >= 8")
    if order < 2 or order % 2:
        raise ConfigError("grid.order must be an even integer >= 2")


def parse_config_text(text: str, base: Path | None = None, source: str = "") -> SurfaceConfig:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if not value:
            raise ConfigError(f"line {lineno}: empty value for {key!r}")
        raw[key] = value

    def profile(key, T):
        text = raw[key]
        if text.split()[0].lower() == "table" and base is not None:
            parts = text.split(maxsplit=1)
            if len(parts) == 2 and not Path(parts[1]).is_absolute():
                text = f"table {base / parts[1]}"
        return parse_profile(text, T)

    if "R" in raw:
        R = parse_number(raw["R"])
        if not R > 0:
            raise ConfigError("R must be positive")
        if "kappa_n" in raw or "kappa" in raw:
            raise ConfigError("give either R or kappa/kappa_n, not both")
        T = parse_number(raw["T"]) if "T" in raw else 2.0 * math.pi * R
        kappa, kappa_n = Profile.const(0.0), Profile.const(1.0 / R)
    else:
        if "T" not in raw:
            raise ConfigError("missing key T")
        if "kappa_n" not in raw:
            raise ConfigError("missing key kappa_n (or R)")
        T = parse_number(raw["T"])
        kappa = profile("kappa", T) if "kappa" in raw else Profile.const(0.0)
        kappa_n = profile("kappa_n", T)
    if not T > 0:
        raise ConfigError("T must be positive")
    for key in ("s_minus", "s_plus"):
        if key not in raw:
            raise ConfigError(f"missing key {key}")
    delta = parse_number(raw["delta"]) if "delta" in raw else None
    try:
        spec = CurveSpec(T, kappa, kappa_n, profile("s_minus", T), profile("s_plus", T), delta)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    def integer(key, default):
        if key not in raw:
            return default
        v = parse_number(raw[key])
        if v != int(v):
            raise ConfigError(f"{key} must be an integer")
        return int(v)

    nt, ns, order = integer("grid.nt", 128), integer("grid.ns", 64), integer("grid.order", 4)
    _check_grid(nt, ns, order)
    return SurfaceConfig(spec, nt, ns, order, raw, source)


def load_config(path) -> SurfaceConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, path.parent, path.name)


def read_profile_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Two numeric columns (t, value); a non-numeric first row is taken as a header."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise ConfigError(f"cannot read profile table {path}: {exc}") from exc
    if rows:
        try:
            float(rows[0][0])
        except ValueError:
            rows = rows[1:]
    try:
        data = np.array([[float(r[0]), float(r[1])] for r in rows])
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"profile table {path} must have two numeric columns") from exc
    if data.size == 0:
        raise ConfigError(f"profile table {path} is empty")
    return data[:, 0], data[:, 1]


# --------------------------------------------------------------------------- writers

def _fmt(x) -> str:
    return repr(float(x))


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, payload: dict) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")
    return path


def write_obj(path, vertices: np.ndarray) -> Path:
    """Triangulated tensor grid; ``vertices`` has shape (nt, ns, 3)."""
    path = Path(path)
    nt, ns, _ = vertices.shape
    idx = np.arange(nt * ns).reshape(nt, ns) + 1
    with open(path, "w", encoding="utf-8") as fh:
        for p in vertices.reshape(-1, 3):
            fh.write(f"v {p[0]!r} {p[1]!r} {p[2]!r}\n")
        for i in range(nt - 1):
            for j in range(ns - 1):
                a, b, c, d = idx[i, j], idx[i + 1, j], idx[i + 1, j + 1], idx[i, j + 1]
                fh.write(f"f {a} {b} {c}\nf {a} {c} {d}\n")
    return path


def write_field_csv(path, chart, columns: dict) -> Path:
    """Nodal table with columns t, sigma, s and the given fields (scalars or vectors)."""
    t = np.broadcast_to(chart.grid.t_nodes[:, None], chart.shape)
    sig = np.broadcast_to(chart.grid.sigma_nodes[None, :], chart.shape)
    header = ["t", "sigma", "s"]
    cols = [t.ravel(), sig.ravel(), chart.s.ravel()]
    for name, arr in columns.items():
        arr = np.asarray(arr)
        flat = arr.reshape(chart.shape[0] * chart.shape[1], -1)
        if flat.shape[1] == 1:
            header.append(name)
            cols.append(flat[:, 0])
        else:
            for k in range(flat.shape[1]):
                header.append(f"{name}_{k}")
                cols.append(flat[:, k])
    return write_csv(path, header, zip(*(map(float, c) for c in cols)))


def write_profile_csv(path, t, values, name="value") -> Path:
    return write_csv(path, ["t", name], zip(map(float, t), map(float, values)))
