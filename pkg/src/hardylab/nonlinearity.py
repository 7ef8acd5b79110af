"""Nonlinearities f(u) for the equation -Δu = λ f(u).

Four families are built in:

* ``exponential``  f(t) = a·exp(b t)
* ``power``        f(t) = a·(1 + t)^m
* ``affine``       f(t) = a + b t
* ``tabulated``    monotone-cubic (PCHIP) interpolation of knots (t_i, f_i)

All are immutable and vectorised over numpy arrays.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import RangeError

KINDS = ("exponential", "power", "affine", "tabulated")

_ALIASES = {
    "exp": "exponential",
    "exponential": "exponential",
    "power": "power",
    "pow": "power",
    "affine": "affine",
    "const": "affine",
    "constant": "affine",
    "linear": "affine",
    "tabulated": "tabulated",
    "csv": "tabulated",
}


@dataclass(frozen=True)
class NonlinearitySpec:
    """A C¹ nonlinearity with evaluable f and f'.

    ``params`` holds ``(a, b)`` for exponential/affine and ``(a, m)`` for
    power. Tabulated specs carry ``knots`` and ``values`` instead.
    """

    kind: str
    params: tuple = ()
    knots: tuple = ()
    values: tuple = ()
    _interp: object = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown nonlinearity kind {self.kind!r}")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.kind == "tabulated":
            t = np.asarray(self.knots, dtype=float)
            v = np.asarray(self.values, dtype=float)
            if t.ndim != 1 or t.shape != v.shape or t.size < 2:
                raise ValueError("tabulated nonlinearity needs matching 1-D knots and values")
            if np.any(np.diff(t) <= 0):
                raise ValueError("tabulated knots must be strictly increasing")
            object.__setattr__(self, "knots", tuple(t))
            object.__setattr__(self, "values", tuple(v))
            object.__setattr__(self, "_interp", PchipInterpolator(t, v, extrapolate=False))
        elif len(self.params) != 2:
            raise ValueError(f"{self.kind} nonlinearity takes two parameters")

    # -- constructors -------------------------------------------------------
    @classmethod
    def exponential(cls, a=1.0, b=1.0):
        return cls("exponential", (a, b))

    @classmethod
    def power(cls, a=1.0, m=2.0):
        return cls("power", (a, m))

    @classmethod
    def affine(cls, a=1.0, b=0.0):
        return cls("affine", (a, b))

    @classmethod
    def constant(cls, a=1.0):
        return cls("affine", (a, 0.0))

    @classmethod
    def tabulated(cls, knots, values):
        return cls("tabulated", knots=tuple(knots), values=tuple(values))

    @classmethod
    def from_csv(cls, path):
        """Read a two-column ``t,f`` CSV (an optional header row is skipped)."""
        ts, fs = [], []
        with open(Path(path), newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    t, v = float(row[0]), float(row[1])
                except ValueError:
                    continue  # header
                ts.append(t)
                fs.append(v)
        return cls.tabulated(ts, fs)

    @classmethod
    def parse(cls, text):
        """Parse ``kind[:p1,p2]``, e.g. ``exp``, ``exp:16,1``, ``power:1,3``,
        ``const:6`` or ``csv:path/to/table.csv``."""
        kind, _, rest = text.partition(":")
        kind = kind.strip().lower()
        if kind not in _ALIASES:
            raise ValueError(f"unknown nonlinearity {text!r}")
        if _ALIASES[kind] == "tabulated":
            if not rest:
                raise ValueError("tabulated nonlinearity needs a CSV path: csv:<path>")
            return cls.from_csv(rest)
        nums = [float(x) for x in rest.split(",") if x.strip()] if rest else []
        if kind in ("const", "constant"):
            return cls.constant(*(nums or [1.0]))
        if kind == "linear":
            return cls.affine(0.0, *(nums or [1.0]))
        defaults = {"exponential": [1.0, 1.0], "power": [1.0, 2.0], "affine": [1.0, 0.0]}
        full = nums + defaults[_ALIASES[kind]][len(nums):]
        return cls(_ALIASES[kind], tuple(full))

    def describe(self):
        if self.kind == "tabulated":
            return f"tabulated[{len(self.knots)} knots on {self.knots[0]:g}..{self.knots[-1]:g}]"
        a, b = self.params
        return {
            "exponential": f"{a:g}*exp({b:g}*u)",
            "power": f"{a:g}*(1+u)^{b:g}",
            "affine": f"{a:g}+{b:g}*u",
        }[self.kind]

    # -- evaluation ---------------------------------------------------------
    def _check_range(self, t):
        lo, hi = self.knots[0], self.knots[-1]
        if np.any((t < lo) | (t > hi)):
            raise RangeError(f"t outside tabulated range [{lo}, {hi}]")

    def f(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "exponential":
            a, b = self.params
            return a * np.exp(b * t)
        if self.kind == "power":
            a, m = self.params
            return a * (1.0 + t) ** m
        if self.kind == "affine":
            a, b = self.params
            return a + b * t
        self._check_range(t)
        return self._interp(t)

    def fprime(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "exponential":
            a, b = self.params
            return a * b * np.exp(b * t)
        if self.kind == "power":
            a, m = self.params
            return a * m * (1.0 + t) ** (m - 1.0)
        if self.kind == "affine":
            return np.full_like(t, self.params[1])
        self._check_range(t)
        return self._interp.derivative()(t)

    def __call__(self, t):
        return self.f(t)

    @property
    def is_constant(self):
        return self.kind == "affine" and self.params[1] == 0.0


def evaluate(spec, t):
    """Return ``(f(t), f'(t))``."""
    return spec.f(t), spec.fprime(t)


@dataclass(frozen=True)
class ClassificationReport:
    f0_positive: bool
    nondecreasing: bool
    convex: bool
    superlinear: bool
    tau_limit: float | None
    tau_converged: bool
    t_max: float
    samples: int
    label: str = "sampled"

    def as_dict(self):
        return {
            "f0_positive": self.f0_positive,
            "nondecreasing": self.nondecreasing,
            "convex": self.convex,
            "superlinear": self.superlinear,
            "tau_limit": self.tau_limit,
            "tau_converged": self.tau_converged,
            "t_max": self.t_max,
            "samples": self.samples,
            "label": self.label,
        }


def _tau(spec, t):
    h = 1e-4 * max(1.0, abs(t))
    fp = spec.fprime(t)
    if not np.isfinite(fp) or abs(fp) < 1e-300:
        return None
    if spec.kind == "tabulated" and t + h > spec.knots[-1]:
        # one-sided second-order difference at the right end of the table
        fpp = (3 * fp - 4 * spec.fprime(t - h) + spec.fprime(t - 2 * h)) / (2 * h)
    else:
        fpp = (spec.fprime(t + h) - spec.fprime(t - h)) / (2 * h)
    return float(spec.f(t) * fpp / fp**2)


def classify(spec, t_max, samples=1000):
    """Sampled check of the classical hypotheses on f over ``[0, t_max]``.

    Reports f(0) > 0, monotonicity, convexity, superlinear growth of f(t)/t
    on the tail, and the limit of f f''/f'^2 estimated at ``t_max`` (f'' by
    centred differences of f').  The limit is flagged converged when the
    estimates at 0.9·t_max and t_max agree to 1e-4.
    """
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    t = np.linspace(0.0, t_max, samples)
    fv, fp = spec.f(t), spec.fprime(t)
    scale = max(1.0, float(np.max(np.abs(fv))))
    tol = 1e-12 * scale

    nondecreasing = bool(np.all(fp >= -tol))
    second = fv[2:] - 2 * fv[1:-1] + fv[:-2]
    convex = bool(np.all(second >= -tol) and np.all(np.diff(fp) >= -tol))

    tail = t[samples // 2:]
    ratio = spec.f(tail) / tail
    fp_tail = spec.fprime(tail)
    superlinear = bool(np.all(np.diff(ratio) > 0) and fp_tail[-1] > fp_tail[0])

    tail_start = max(t_max * 0.5, t_max - 1.0)
    tail_fp = spec.fprime(np.linspace(tail_start, t_max, 32))
    if np.any(np.abs(tail_fp) < 1e-300):
        tau, converged = None, False
    else:
        tau = _tau(spec, t_max)
        tau_prev = _tau(spec, 0.9 * t_max)
        converged = tau is not None and tau_prev is not None and abs(tau - tau_prev) < 1e-4

    return ClassificationReport(
        f0_positive=bool(spec.f(0.0) > 0),
        nondecreasing=nondecreasing,
        convex=convex,
        superlinear=superlinear,
        tau_limit=tau,
        tau_converged=bool(converged),
        t_max=float(t_max),
        samples=samples,
    )
