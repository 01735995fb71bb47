"""Closed-form results for linear data: minimizers, energies, jump bounds.

For g(x) = x on (0, L) with the rational kernel the optimal step functions
are uniform ladders, their energies have a two-term closed form, and there is
a critical fidelity weight where one- and two-jump ladders tie exactly.  The
jump-count bounds hold for any data once the kernel constants exist.
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConditionError
from .kernel import JumpKernel, KernelConstants, derive_constants, kwc_kernel, split_cost_derivative
from .pwc import LinearData, PiecewiseConstant, SampledData, energy


def _int_part(r: float) -> int:
    # Guard so exact-integer ratios are not knocked down by float roundoff.
    return int(math.floor(r * (1 + 1e-12) + 1e-12))


def optimal_jump_location(data, alpha: float, beta: float, tol: float = 1e-12) -> float:
    """Where a single jump between plateau heights g(alpha), g(beta) must sit.

    The fidelity-optimal location gamma satisfies
    g(gamma) = (g(alpha) + g(beta)) / 2.  For monotone data the level set is
    an interval; this returns its infimum, found by bisection to ``tol`` in
    x.  Constant data returns alpha by the same convention.  Sampled data
    that is not monotone on [alpha, beta] is rejected.
    """
    if not alpha < beta:
        raise ValueError("need alpha < beta")
    ga, gb = float(data(alpha)), float(data(beta))
    if isinstance(data, SampledData):
        xs = data.signal.x()
        seg = data.signal.samples[(xs >= alpha - 1e-12) & (xs <= beta + 1e-12)]
        d = np.diff(seg)
        if not (np.all(d >= -1e-12) or np.all(d <= 1e-12)):
            raise ValueError("sampled data is not monotone on [alpha, beta]")
    sign = 1.0
    if gb < ga:
        sign = -1.0
    target = sign * 0.5 * (ga + gb)

    def f(x):
        return sign * float(data(x))

    if f(alpha) >= target:
        return alpha
    lo, hi = alpha, beta
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) >= target:
            hi = mid
        else:
            lo = mid
    return hi


def uniform_step_minimizer(L: float, m: int) -> PiecewiseConstant:
    """The m-jump ladder for g(x) = x on (0, L).

    Plateau values k * d for k = 0..m with d = L/m; jumps at (k - 1/2) * d,
    so the first and last plateaus have half width.
    """
    if not L > 0:
        raise ValueError("L must be positive")
    if m < 1:
        raise ValueError("m must be at least 1")
    d = L / m
    bps = tuple((k - 0.5) * d for k in range(1, m + 1))
    vals = tuple(k * d for k in range(m + 1))
    return PiecewiseConstant((0.0, L), bps, vals)


def uniform_step_energy(L: float, m: int, lam: float, kernel: JumpKernel | None = None) -> float:
    """Energy per unit length of the m-jump ladder against g(x) = x.

    Closed form 1/(d+1) + lam * d^2 / 24 with d = L/m for the rational
    kernel with kappa = 1; any other kernel is evaluated exactly through the
    piecewise-constant energy.
    """
    if kernel is None:
        kernel = kwc_kernel(1.0)
    d = L / m
    if kernel.kind == "kwc" and kernel.kappa == 1.0:
        return 1.0 / (d + 1.0) + lam * d * d / 24.0
    u = uniform_step_minimizer(L, m)
    g = LinearData((0.0, L))
    return energy(u, g, kernel, lam).total / L


@dataclass(frozen=True)
class CriticalLambda:
    length: float
    lam: float
    tied_jump_counts: tuple = (1, 2)

    def to_json_dict(self) -> dict:
        return {
            "length": self.length,
            "lambda": self.lam,
            "tied_jump_counts": list(self.tied_jump_counts),
        }


def critical_lambda(L: float) -> CriticalLambda:
    """Fidelity weight at which the 1- and 2-jump ladders tie on (0, L).

    lam = 2^5 / (L (L+1) (L+2)); at that weight
    uniform_step_energy(L, 1) == uniform_step_energy(L, 2).
    """
    if not L > 0:
        raise ValueError("L must be positive")
    return CriticalLambda(length=float(L), lam=32.0 / (L * (L + 1.0) * (L + 2.0)))


def transition_lambda(L: float, m: int) -> float:
    """Weight where the m- and (m+1)-jump ladders tie (kappa = 1 kernel)."""
    if m < 1:
        raise ValueError("m must be at least 1")
    d1, d2 = L / m, L / (m + 1)
    return 24.0 / ((d1 + d2) * (1 + d1) * (1 + d2))


def lambda_for_jump_count(L: float, m: int) -> float:
    """A weight at which the m-jump ladder is the strict energy minimizer."""
    if m == 1:
        return 0.5 * transition_lambda(L, 1)
    return math.sqrt(transition_lambda(L, m - 1) * transition_lambda(L, m))


@dataclass(frozen=True)
class BoundReport:
    """Upper bounds on the jump count of any energy minimizer on (a, b).

    jumps_any_data uses bound_rate; jumps_monotone_data uses 2 * split_gain
    and is valid when the data is monotone.  When the kernel has no unit
    slope at zero (Potts) the bounds only cover step-function competitors,
    flagged by restricted_to_step_functions.  A kernel without a positive
    split gain gets no bounds at all, with the reason in ``failure``.
    """

    jumps_any_data: int | None
    jumps_monotone_data: int | None
    constants: KernelConstants | None
    restricted_to_step_functions: bool = False
    failure: str | None = None

    def to_json_dict(self) -> dict:
        out = {
            "jumps_any_data": self.jumps_any_data,
            "jumps_monotone_data": self.jumps_monotone_data,
            "restricted_to_step_functions": self.restricted_to_step_functions,
            "failure": self.failure,
        }
        if self.constants is not None:
            out["constants"] = {
                "mass_cap": self.constants.mass_cap,
                "split_gain": self.constants.split_gain,
                "linear_floor": self.constants.linear_floor,
                "bound_rate": self.constants.bound_rate,
            }
        return out


def jump_bounds(
    kernel: JumpKernel,
    a: float,
    b: float,
    lam: float,
    mass_cap: float,
    grid_resolution: int = 2000,
) -> BoundReport:
    """Jump-count bounds floor((b-a) lam / rate) + 1 on the interval (a, b).

    mass_cap must dominate the oscillation of the data, since every jump of
    a minimizer (and any partial sum of jumps) stays inside it.
    """
    if not a < b:
        raise ValueError("need a < b")
    if lam < 0:
        raise ValueError("lam must be non-negative")
    try:
        constants = derive_constants(kernel, mass_cap, grid_resolution)
    except ConditionError as exc:
        return BoundReport(None, None, None, failure=str(exc))
    slope = kernel.eval(1e-8) / 1e-8
    restricted = abs(slope - 1.0) > 1e-4
    scale = (b - a) * lam
    return BoundReport(
        jumps_any_data=_int_part(scale / constants.bound_rate) + 1,
        jumps_monotone_data=_int_part(scale / (2.0 * constants.split_gain)) + 1,
        constants=constants,
        restricted_to_step_functions=restricted,
    )


class EqualJumpVerdict(Enum):
    FORCED = "equal_jumps_forced"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class VerdictReport:
    verdict: EqualJumpVerdict
    sign_pattern: str
    grid_points: int

    @property
    def forced(self) -> bool:
        return self.verdict is EqualJumpVerdict.FORCED

    def to_json_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "sign_pattern": self.sign_pattern,
            "grid_points": self.grid_points,
        }


def equal_jump_verdict(kernel: JumpKernel, c: float, lam: float, grid_points: int = 10000) -> VerdictReport:
    """Must two neighboring jumps of combined size 2c be equal at optimum?

    The energy of an uneven split z (jumps c - z and c + z, with the
    half-cell fidelity correction for linear data) has derivative
    E'(z) = (lam / 2) z + split_cost_derivative(c, z).  If its sign on
    (0, c] is all positive, all negative, or positive then negative, the
    only interior minimum is the even split z = 0, so equal jumps are
    forced.  Any other sign pattern is reported inconclusive.
    """
    if not c > 0:
        raise ValueError("c must be positive")
    if lam < 0:
        raise ValueError("lam must be non-negative")
    if grid_points < 100:
        raise ValueError("grid_points must be at least 100")
    z = np.linspace(c / grid_points, c, grid_points)
    deriv = 0.5 * lam * z + split_cost_derivative(kernel, c, z)
    scale = 0.5 * lam * c + float(np.max(np.abs(deriv))) + 1e-300
    tol = 1e-11 * scale
    signs = np.where(deriv > tol, 1, np.where(deriv < -tol, -1, 0))
    pattern = _compress_signs(signs)
    forced = pattern in ("+", "-", "+-")
    return VerdictReport(
        verdict=EqualJumpVerdict.FORCED if forced else EqualJumpVerdict.INCONCLUSIVE,
        sign_pattern=pattern,
        grid_points=grid_points,
    )


def _compress_signs(signs: np.ndarray) -> str:
    out = []
    for s in signs:
        if s == 0:
            continue
        ch = "+" if s > 0 else "-"
        if not out or out[-1] != ch:
            out.append(ch)
    return "".join(out)
