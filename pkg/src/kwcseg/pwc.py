"""Piecewise-constant functions on an interval and exact energy evaluation.

The energy of a step function u against data g is

    energy(u) = sum_jumps K(|jump|)  +  (lam / 2) * integral (u - g)^2,

with K a jump kernel.  Fidelity integrals are closed-form per plateau for
linear and step-list data, adaptive quadrature for sine data, and a
trapezoid sum on the sample grid for sampled data.
"""

import csv
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import ConfigError
from .kernel import JumpKernel

_DOMAIN_TOL = 1e-9


def _check_domain(dom) -> tuple:
    a, b = float(dom[0]), float(dom[1])
    if not a < b:
        raise ValueError(f"domain must satisfy a < b, got ({a}, {b})")
    return (a, b)


@dataclass(frozen=True)
class PiecewiseConstant:
    """Left-continuous step function: values[i] on (breakpoints[i-1], breakpoints[i]].

    Breakpoints are strictly increasing and interior to the domain.
    Zero-size jumps are merged away on construction, so len(values) ==
    len(breakpoints) + 1 always names the true plateau count.
    """

    domain: tuple
    breakpoints: tuple = ()
    values: tuple = (0.0,)

    def __post_init__(self):
        dom = _check_domain(self.domain)
        bp = [float(x) for x in self.breakpoints]
        vals = [float(v) for v in self.values]
        if len(vals) != len(bp) + 1:
            raise ValueError("need exactly one more value than breakpoints")
        if any(not dom[0] < x < dom[1] for x in bp):
            raise ValueError("breakpoints must lie strictly inside the domain")
        if any(x2 <= x1 for x1, x2 in zip(bp, bp[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        merged_bp, merged_vals = [], [vals[0]]
        for x, v in zip(bp, vals[1:]):
            if v == merged_vals[-1]:
                continue
            merged_bp.append(x)
            merged_vals.append(v)
        object.__setattr__(self, "domain", dom)
        object.__setattr__(self, "breakpoints", tuple(merged_bp))
        object.__setattr__(self, "values", tuple(merged_vals))

    def __call__(self, x):
        idx = np.searchsorted(np.asarray(self.breakpoints), x, side="left")
        out = np.asarray(self.values, dtype=float)[idx]
        if np.asarray(x).ndim == 0:
            return float(out)
        return out

    @property
    def jump_sizes(self) -> np.ndarray:
        return np.diff(np.asarray(self.values, dtype=float))

    @property
    def jump_count(self) -> int:
        return len(self.breakpoints)

    def is_non_decreasing(self) -> bool:
        return bool(np.all(self.jump_sizes >= 0))

    def sample(self, n: int) -> "GridSignal":
        x = np.linspace(self.domain[0], self.domain[1], n)
        return GridSignal(self.domain, self(x))

    def to_json_dict(self) -> dict:
        return {
            "domain": list(self.domain),
            "breakpoints": list(self.breakpoints),
            "values": list(self.values),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "PiecewiseConstant":
        try:
            return cls(tuple(d["domain"]), tuple(d["breakpoints"]), tuple(d["values"]))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"bad piecewise-constant object: {exc}") from exc


@dataclass(frozen=True)
class GridSignal:
    """Samples on n >= 2 uniformly spaced nodes spanning the domain."""

    domain: tuple
    samples: np.ndarray

    def __post_init__(self):
        dom = _check_domain(self.domain)
        arr = np.array(self.samples, dtype=float)
        if arr.ndim != 1 or arr.size < 2:
            raise ValueError("need a 1D array of at least two samples")
        arr.setflags(write=False)
        object.__setattr__(self, "domain", dom)
        object.__setattr__(self, "samples", arr)

    @property
    def n(self) -> int:
        return self.samples.size

    @property
    def h(self) -> float:
        return (self.domain[1] - self.domain[0]) / (self.n - 1)

    def x(self) -> np.ndarray:
        return np.linspace(self.domain[0], self.domain[1], self.n)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["x", "value"])
            for xi, vi in zip(self.x(), self.samples):
                w.writerow([repr(float(xi)), repr(float(vi))])

    @classmethod
    def from_csv(cls, path) -> "GridSignal":
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
        if not rows or [c.strip() for c in rows[0]] != ["x", "value"]:
            raise ConfigError(f"{path}: expected header 'x,value'")
        body = [r for r in rows[1:] if r]
        try:
            x = np.array([float(r[0]) for r in body])
            v = np.array([float(r[1]) for r in body])
        except (ValueError, IndexError) as exc:
            raise ConfigError(f"{path}: bad row ({exc})") from exc
        if x.size < 2:
            raise ConfigError(f"{path}: need at least two rows")
        h = np.diff(x)
        if not np.allclose(h, h[0], rtol=1e-6, atol=1e-12):
            raise ConfigError(f"{path}: nodes are not uniformly spaced")
        return cls((float(x[0]), float(x[-1])), v)


# ---------------------------------------------------------------------------
# Data functions: the clean signal g the energy is measured against.


@dataclass(frozen=True)
class LinearData:
    """g(x) = slope * x + intercept."""

    domain: tuple
    slope: float = 1.0
    intercept: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "domain", _check_domain(self.domain))

    def __call__(self, x):
        return self.slope * np.asarray(x, dtype=float) + self.intercept

    def value_range(self) -> tuple:
        va, vb = float(self(self.domain[0])), float(self(self.domain[1]))
        return (min(va, vb), max(va, vb))

    def plateau_misfit(self, x0: float, x1: float, value: float) -> float:
        # integral of (value - g)^2 = [(s x + t - value)^3 / (3 s)]
        s, t = self.slope, self.intercept
        if s == 0.0:
            return (t - value) ** 2 * (x1 - x0)
        e1 = s * x1 + t - value
        e0 = s * x0 + t - value
        return (e1**3 - e0**3) / (3.0 * s)

    def moments(self, x0: float, x1: float) -> tuple:
        s, t = self.slope, self.intercept
        m1 = s * (x1 * x1 - x0 * x0) / 2.0 + t * (x1 - x0)
        m2 = (
            s * s * (x1**3 - x0**3) / 3.0
            + s * t * (x1 * x1 - x0 * x0)
            + t * t * (x1 - x0)
        )
        return m1, m2


@dataclass(frozen=True)
class SineData:
    """g(x) = amplitude * sin(omega * x)."""

    domain: tuple
    amplitude: float = 1.0
    omega: float = 3.0 * np.pi

    def __post_init__(self):
        object.__setattr__(self, "domain", _check_domain(self.domain))

    def __call__(self, x):
        return self.amplitude * np.sin(self.omega * np.asarray(x, dtype=float))

    def value_range(self) -> tuple:
        xs = np.linspace(self.domain[0], self.domain[1], 4097)
        v = self(xs)
        return (float(v.min()), float(v.max()))

    def plateau_misfit(self, x0: float, x1: float, value: float) -> float:
        val, _err = quad(lambda x: (value - self(x)) ** 2, x0, x1, epsabs=1e-10, limit=200)
        return val

    def moments(self, x0: float, x1: float) -> tuple:
        a, w = self.amplitude, self.omega
        m1 = a * (np.cos(w * x0) - np.cos(w * x1)) / w
        m2 = a * a * ((x1 - x0) / 2.0 - (np.sin(2 * w * x1) - np.sin(2 * w * x0)) / (4.0 * w))
        return float(m1), float(m2)


@dataclass(frozen=True)
class StepListData:
    """Piecewise-constant data, e.g. a clean multi-plateau signal."""

    steps: PiecewiseConstant

    @property
    def domain(self) -> tuple:
        return self.steps.domain

    def __call__(self, x):
        return self.steps(x)

    def value_range(self) -> tuple:
        return (min(self.steps.values), max(self.steps.values))

    def _pieces(self, x0: float, x1: float):
        cuts = [x0] + [b for b in self.steps.breakpoints if x0 < b < x1] + [x1]
        for lo, hi in zip(cuts, cuts[1:]):
            yield lo, hi, float(self.steps(0.5 * (lo + hi)))

    def plateau_misfit(self, x0: float, x1: float, value: float) -> float:
        return sum((value - gv) ** 2 * (hi - lo) for lo, hi, gv in self._pieces(x0, x1))

    def moments(self, x0: float, x1: float) -> tuple:
        m1 = sum(gv * (hi - lo) for lo, hi, gv in self._pieces(x0, x1))
        m2 = sum(gv * gv * (hi - lo) for lo, hi, gv in self._pieces(x0, x1))
        return m1, m2


@dataclass(frozen=True)
class SampledData:
    """Data known only through samples; evaluated by linear interpolation."""

    signal: GridSignal

    @property
    def domain(self) -> tuple:
        return self.signal.domain

    def __call__(self, x):
        out = np.interp(np.asarray(x, dtype=float), self.signal.x(), self.signal.samples)
        if np.asarray(x).ndim == 0:
            return float(out)
        return out

    def value_range(self) -> tuple:
        return (float(self.signal.samples.min()), float(self.signal.samples.max()))

    def moments(self, x0: float, x1: float) -> tuple:
        xs = self.signal.x()
        inner = xs[(xs > x0) & (xs < x1)]
        pts = np.concatenate(([x0], inner, [x1]))
        g = self(pts)
        return float(np.trapezoid(g, pts)), float(np.trapezoid(g * g, pts))


ANALYTIC_DATA = (LinearData, SineData, StepListData)


def _require_same_domain(u: PiecewiseConstant, data) -> None:
    if abs(u.domain[0] - data.domain[0]) > _DOMAIN_TOL or abs(u.domain[1] - data.domain[1]) > _DOMAIN_TOL:
        raise ValueError(f"domain mismatch: u on {u.domain}, data on {data.domain}")


# ---------------------------------------------------------------------------
# Energies.


@dataclass(frozen=True)
class EnergyBreakdown:
    tv_k: float
    fidelity: float
    total: float

    @classmethod
    def of(cls, tv_k: float, fidelity: float) -> "EnergyBreakdown":
        return cls(tv_k=tv_k, fidelity=fidelity, total=tv_k + fidelity)

    def to_json_dict(self) -> dict:
        return {"tv_k": self.tv_k, "fidelity": self.fidelity, "total": self.total}


def tv(u: PiecewiseConstant) -> float:
    """Plain total variation: sum of absolute jump sizes."""
    return float(np.sum(np.abs(u.jump_sizes)))


def tv_kernel(u: PiecewiseConstant, kernel: JumpKernel) -> float:
    """Kernel-weighted variation: sum of K(|jump|) over the jumps."""
    sizes = np.abs(u.jump_sizes)
    if sizes.size == 0:
        return 0.0
    return float(np.sum(kernel.eval(sizes)))


def _plateau_edges(u: PiecewiseConstant):
    a, b = u.domain
    cuts = (a,) + u.breakpoints + (b,)
    return zip(cuts, cuts[1:], u.values)


def fidelity(u: PiecewiseConstant, data, lam: float) -> float:
    """(lam / 2) * integral over the domain of (u - g)^2."""
    _require_same_domain(u, data)
    if isinstance(data, SampledData):
        xs = data.signal.x()
        diff = u(xs) - data.signal.samples
        integral = float(np.trapezoid(diff * diff, xs))
    else:
        integral = sum(data.plateau_misfit(lo, hi, val) for lo, hi, val in _plateau_edges(u))
    return 0.5 * lam * integral


def fidelity_by_quadrature(u: PiecewiseConstant, data, lam: float) -> float:
    """Reference fidelity path: adaptive quadrature on every plateau.

    Slow; kept as an independent check of the closed-form integrals.
    """
    _require_same_domain(u, data)
    integral = 0.0
    for lo, hi, val in _plateau_edges(u):
        piece, _err = quad(lambda x: (val - data(x)) ** 2, lo, hi, epsabs=1e-10, limit=200)
        integral += piece
    return 0.5 * lam * integral


def energy(u: PiecewiseConstant, data, kernel: JumpKernel, lam: float) -> EnergyBreakdown:
    return EnergyBreakdown.of(tv_kernel(u, kernel), fidelity(u, data, lam))


# ---------------------------------------------------------------------------
# Constructions.


def clamp(u: PiecewiseConstant, lo: float, hi: float) -> PiecewiseConstant:
    """Clip plateau values to [lo, hi]; collapsed jumps are merged away."""
    if not lo <= hi:
        raise ValueError("need lo <= hi")
    vals = np.clip(np.asarray(u.values, dtype=float), lo, hi)
    return PiecewiseConstant(u.domain, u.breakpoints, tuple(vals))


def _bisect_level(data, x0: float, x1: float, level: float, increasing: bool) -> float:
    """Leftmost crossing of g through ``level`` inside [x0, x1]."""
    lo, hi = x0, x1
    for _ in range(80):
        if hi - lo <= 1e-14 * max(1.0, abs(hi)):
            break
        mid = 0.5 * (lo + hi)
        val = float(data(mid))
        reached = val >= level if increasing else val <= level
        if reached:
            hi = mid
        else:
            lo = mid
    return hi


def quantize(data, eta: float) -> PiecewiseConstant:
    """Round continuous data down to the level grid {k * eta}.

    Returns the step function u(x) = k*eta on {k*eta <= g(x) < (k+1)*eta},
    with crossings located by bisection.  Plateaus whose level is attained
    only at isolated points (grazing contact at an extremum, or the far
    endpoint of the domain) carry no length and are dropped.
    """
    if not eta > 0:
        raise ValueError("eta must be positive")
    if not (callable(data) and hasattr(data, "domain")):
        raise TypeError("quantize needs callable data with a domain")
    if isinstance(data, (StepListData, SampledData)):
        raise TypeError("quantize needs continuous analytic data")
    a, b = data.domain
    n_scan = 4096
    if isinstance(data, SineData):
        cycles = abs(data.omega) * (b - a) / (2 * np.pi)
        n_scan = max(n_scan, int(256 * (cycles + 1)))
    xs = np.linspace(a, b, n_scan + 1)
    lv = np.floor(data(xs) / eta).astype(np.int64)

    bps: list = []
    vals: list = [int(lv[0])]
    for i in np.flatnonzero(np.diff(lv) != 0):
        x0, x1 = float(xs[i]), float(xs[i + 1])
        if lv[i + 1] > lv[i]:
            levels = range(int(lv[i]) + 1, int(lv[i + 1]) + 1)
            for L in levels:
                bps.append(_bisect_level(data, x0, x1, L * eta, increasing=True))
                vals.append(L)
        else:
            levels = range(int(lv[i]) - 1, int(lv[i + 1]) - 1, -1)
            for L in levels:
                bps.append(_bisect_level(data, x0, x1, (L + 1) * eta, increasing=False))
                vals.append(L)

    # Drop crossings that collide with the domain ends (zero-length plateau).
    keep_bp, keep_vals = [], [vals[0]]
    edge_tol = 1e-12 * max(1.0, abs(a), abs(b))
    for x, v in zip(bps, vals[1:]):
        if x - a <= edge_tol:
            keep_vals = [v]
            continue
        if b - x <= edge_tol:
            break
        keep_bp.append(x)
        keep_vals.append(v)
    return PiecewiseConstant((a, b), tuple(keep_bp), tuple(v * eta for v in keep_vals))


def dispersion(u: PiecewiseConstant, rho: float) -> float:
    """How far the jumps of a non-decreasing u are from one jump of size rho.

    With jump sizes r_i and s = sum r_i this is
    s^2 - sum r_i^2 + (rho - s)^2: zero exactly when u has a single jump of
    size rho, and at least 2 * r_i * r_j as soon as two jumps coexist.
    """
    jumps = u.jump_sizes
    if np.any(jumps < 0):
        raise ValueError("dispersion is defined for non-decreasing step functions")
    if rho < 0:
        raise ValueError("rho must be non-negative")
    s = float(jumps.sum())
    return s * s - float(np.sum(jumps * jumps)) + (rho - s) ** 2
