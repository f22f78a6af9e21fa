"""One-dimensional profiles on [0, T]: closed-form evaluators or cubic-spline tables.

Every profile can be evaluated together with its first two derivatives, which the
chart geometry needs (kappa', s'' enter the curvilinear second-derivative terms).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConfigError


@dataclass(frozen=True)
class Profile:
    """A scalar function of t with derivatives up to order 2.

    ``func(t, k)`` returns the k-th derivative at the points ``t``.
    """

    func: Callable[[np.ndarray, int], np.ndarray]
    label: str = "profile"
    closed_form: bool = True
    meta: dict = field(default_factory=dict, compare=False)

    def __call__(self, t, deriv: int = 0) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if deriv not in (0, 1, 2, 3):
            raise ValueError("deriv must be 0..3")
        return np.broadcast_to(np.asarray(self.func(t, deriv), dtype=float), t.shape).copy()

    # constructors -----------------------------------------------------------

    @classmethod
    def const(cls, c: float) -> "Profile":
        c = float(c)

        def f(t, k):
            return np.full_like(t, c if k == 0 else 0.0)

        return cls(f, label=f"const {c!r}", meta={"kind": "const", "args": [c]})

    @classmethod
    def harmonic(cls, kind: str, amp: float, cycles: float, T: float,
                 phase: float = 0.0, offset: float = 0.0) -> "Profile":
        """``offset + amp * sin|cos(2 pi cycles t / T + phase)``."""
        if kind not in ("sin", "cos"):
            raise ValueError(kind)
        w = 2.0 * np.pi * cycles / T
        shift = 0.0 if kind == "sin" else np.pi / 2

        def f(t, k):
            val = amp * w**k * np.sin(w * t + phase + shift + k * np.pi / 2)
            return val + offset if k == 0 else val

        return cls(f, label=f"{kind} {amp} {cycles} {phase} {offset}",
                   meta={"kind": kind, "args": [amp, cycles, phase, offset]})

    @classmethod
    def poly(cls, coeffs: Sequence[float]) -> "Profile":
        """Polynomial with ``coeffs`` in increasing degree."""
        p = np.polynomial.Polynomial(np.asarray(coeffs, dtype=float))

        def f(t, k):
            return p.deriv(k)(t) if k else p(t)

        return cls(f, label="poly " + " ".join(map(repr, coeffs)),
                   meta={"kind": "poly", "args": list(map(float, coeffs))})

    @classmethod
    def table(cls, t: Sequence[float], values: Sequence[float]) -> "Profile":
        t = np.asarray(t, dtype=float)
        values = np.asarray(values, dtype=float)
        if t.ndim != 1 or t.shape != values.shape:
            raise ConfigError("profile table needs matching 1D t and value arrays")
        if t.size < 4:
            raise ConfigError("profile table needs at least 4 samples")
        if np.any(np.diff(t) <= 0):
            raise ConfigError("profile table t values must be strictly increasing")
        spline = CubicSpline(t, values)

        def f(tt, k):
            return spline(tt, k)

        return cls(f, label=f"table[{t.size}]", closed_form=False,
                   meta={"kind": "table", "t": t.tolist(), "values": values.tolist()})

    @classmethod
    def from_callable(cls, f0, f1=None, f2=None, label="callable") -> "Profile":
        derivs = [f0, f1, f2]

        def f(t, k):
            if k > 2 or derivs[k] is None:
                raise ValueError(f"derivative {k} not supplied for {label}")
            return derivs[k](t)

        return cls(f, label=label)

    def scaled(self, c: float) -> "Profile":
        return Profile(lambda t, k: c * self.func(t, k), label=f"{c}*({self.label})",
                       closed_form=self.closed_form)

    def to_json(self):
        return dict(self.meta) if self.meta else {"kind": "opaque", "label": self.label}


def parse_profile(text: str, T: float) -> Profile:
    """Parse the config vocabulary: a bare number, ``const c``, ``sin|cos amp cycles
    [phase [offset]]``, ``poly c0 c1 ...`` or ``table path.csv``.
    """
    parts = text.split()
    if not parts:
        raise ConfigError("empty profile specification")
    head = parts[0].lower()
    try:
        if len(parts) == 1 and head not in ("sin", "cos"):
            return Profile.const(float(head))
        args = [float(p) for p in parts[1:]] if head != "table" else []
    except ValueError as exc:
        raise ConfigError(f"bad profile specification {text!r}") from exc
    if head == "const":
        if len(args) != 1:
            raise ConfigError("const takes one value")
        return Profile.const(args[0])
    if head in ("sin", "cos"):
        if len(args) > 4:
            raise ConfigError(f"{head} takes at most 4 numbers")
        defaults = [1.0, 1.0, 0.0, 0.0]
        defaults[: len(args)] = args
        return Profile.harmonic(head, *defaults[:2], T=T, phase=defaults[2], offset=defaults[3])
    if head == "poly":
        if not args:
            raise ConfigError("poly needs coefficients")
        return Profile.poly(args)
    if head == "table":
        if len(parts) != 2:
            raise ConfigError("table takes one path")
        from .io import read_profile_csv

        t, v = read_profile_csv(parts[1])
        return Profile.table(t, v)
    raise ConfigError(f"unknown profile kind {head!r}")
