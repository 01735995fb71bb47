"""Exact global minimization over level-quantized step functions.

The continuum energy is restricted to functions that are constant on each of
n_cells uniform cells and take values on a fixed level grid.  Per-cell
fidelity is the exact integral of (u - g)^2 for analytic data (quadratic in
the level value, so only three moments per cell are needed) and the
midpoint-sampled approximation for sampled data.  Within this finite class
dynamic programming over (cell, level) finds the global optimum, which makes
the module usable as ground truth for both the closed-form theory and the
gradient-flow solvers on small instances.

Complexity is O(n_cells * n_levels^2) for the free problem and an extra
factor of the jump budget for the count-constrained variant; sizes are
capped accordingly.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .kernel import JumpKernel
from .pwc import (
    EnergyBreakdown,
    GridSignal,
    PiecewiseConstant,
    SampledData,
)

MAX_CELLS = 2000
MAX_LEVELS = 400
MAX_JUMP_BUDGET = 10


@dataclass(frozen=True)
class OracleProblem:
    """A discretized instance: data, kernel, fidelity weight, level grid.

    ``levels`` defaults to ``n_levels`` uniform values spanning the data
    range.  ``endpoint_pin`` forces the first and last cell to the levels
    nearest the given values (boundary conditions of the continuum problem).
    ``tie_tolerance`` is the relative energy window within which alternative
    minimizers count as ties.
    """

    data: object
    kernel: JumpKernel
    lam: float
    n_cells: int | None = None
    levels: object = None
    n_levels: int = 101
    endpoint_pin: tuple | None = None
    tie_tolerance: float = 1e-9

    def resolved_cells(self) -> int:
        if self.n_cells is not None:
            n = int(self.n_cells)
        elif isinstance(self.data, SampledData):
            n = self.data.signal.n - 1
        else:
            raise ConfigError("n_cells is required for analytic data")
        if n < 1:
            raise ConfigError("need at least one cell")
        if n > MAX_CELLS:
            raise ConfigError(f"n_cells = {n} exceeds the limit {MAX_CELLS}")
        return n

    def resolved_levels(self) -> np.ndarray:
        lo, hi = self.data.value_range()
        if not hi > lo:
            # Degenerate (constant) data: widen symmetrically so a level
            # grid exists and still contains the data value.
            lo, hi = lo - 0.5, hi + 0.5
        if self.levels is not None:
            lv = np.asarray(self.levels, dtype=float)
        else:
            lv = np.linspace(lo, hi, int(self.n_levels))
        if lv.ndim != 1 or lv.size == 0:
            raise ConfigError("levels must be a non-empty 1D array")
        if np.any(np.diff(lv) <= 0):
            raise ConfigError("levels must be strictly increasing")
        if lv.size > MAX_LEVELS:
            raise ConfigError(
                f"{lv.size} levels exceeds the limit {MAX_LEVELS}; use a coarser level grid"
            )
        span = max(hi - lo, 1.0)
        if lv[0] < lo - 1e-9 * span or lv[-1] > hi + 1e-9 * span:
            raise ConfigError("levels must lie within the data range")
        return lv


@dataclass(frozen=True)
class OracleResult:
    minimizer: PiecewiseConstant
    energy: EnergyBreakdown
    jump_count: int
    ties: tuple = ()

    def to_json_dict(self) -> dict:
        return {
            "minimizer": self.minimizer.to_json_dict(),
            "energy": self.energy.to_json_dict(),
            "jump_count": self.jump_count,
            "ties": [t.to_json_dict() for t in self.ties],
        }


@dataclass
class _Tableau:
    """Shared precomputations for one problem instance."""

    edges: np.ndarray
    levels: np.ndarray
    cost: np.ndarray       # (n_cells, n_levels) fidelity cost per cell and level
    kmat: np.ndarray       # (n_levels, n_levels) kernel cost of a level change
    pin: tuple | None      # (first level index, last level index) or None
    mids: np.ndarray = field(init=False)

    def __post_init__(self):
        self.mids = 0.5 * (self.edges[:-1] + self.edges[1:])


def _build_tableau(problem: OracleProblem) -> _Tableau:
    n = problem.resolved_cells()
    levels = problem.resolved_levels()
    a, b = problem.data.domain
    edges = np.linspace(a, b, n + 1)
    h = (b - a) / n

    if isinstance(problem.data, SampledData):
        mids = 0.5 * (edges[:-1] + edges[1:])
        gmid = problem.data(mids)
        # (lam/2) * h * (v - g_mid)^2, expanded in v
        m1 = h * gmid
        m2 = h * gmid * gmid
        m0 = np.full(n, h)
    else:
        m0 = np.full(n, h)
        m1 = np.empty(n)
        m2 = np.empty(n)
        for i in range(n):
            m1[i], m2[i] = problem.data.moments(edges[i], edges[i + 1])
    lv = levels[None, :]
    cost = 0.5 * problem.lam * (m0[:, None] * lv * lv - 2.0 * m1[:, None] * lv + m2[:, None])

    diffs = np.abs(levels[:, None] - levels[None, :])
    kmat = problem.kernel.eval(diffs)

    pin = None
    if problem.endpoint_pin is not None:
        va, vb = problem.endpoint_pin
        pin = (int(np.argmin(np.abs(levels - va))), int(np.argmin(np.abs(levels - vb))))
    return _Tableau(edges=edges, levels=levels, cost=cost, kmat=kmat, pin=pin)


def _result_from_sequence(problem: OracleProblem, tab: _Tableau, seq: np.ndarray) -> OracleResult:
    vals = tab.levels[seq]
    change = np.flatnonzero(np.diff(seq) != 0)
    bps = tuple(tab.edges[i + 1] for i in change)
    u = PiecewiseConstant(tuple(problem.data.domain), bps, tuple(vals[[0, *list(change + 1)]]))
    fid = float(tab.cost[np.arange(seq.size), seq].sum())
    tvk = float(np.sum(problem.kernel.eval(np.abs(np.diff(vals))))) if seq.size > 1 else 0.0
    return OracleResult(
        minimizer=u,
        energy=EnergyBreakdown.of(tvk, fid),
        jump_count=len(bps),
    )


def _solve_free(tab: _Tableau) -> np.ndarray:
    n, L = tab.cost.shape
    big = np.inf
    D = tab.cost[0].copy()
    if tab.pin is not None:
        mask = np.full(L, big)
        mask[tab.pin[0]] = 0.0
        D = D + mask
    parents = np.zeros((n, L), dtype=np.int32)
    cols = np.arange(L)
    for i in range(1, n):
        trans = D[:, None] + tab.kmat
        arg = np.argmin(trans, axis=0)
        parents[i] = arg
        D = trans[arg, cols] + tab.cost[i]
    if tab.pin is not None:
        end = np.full(L, big)
        end[tab.pin[1]] = 0.0
        D = D + end
    seq = np.empty(n, dtype=np.int64)
    seq[-1] = int(np.argmin(D))
    for i in range(n - 1, 0, -1):
        seq[i - 1] = parents[i, seq[i]]
    return seq


def solve(problem: OracleProblem, tie_scan_jumps: int | None = None) -> OracleResult:
    """Global optimum over the level-quantized class.

    With ``tie_scan_jumps`` set, also runs the jump-count-constrained solver
    for every budget m = 0..tie_scan_jumps and returns, as ties, the
    m-optima whose energy is within tie_tolerance (relative) of the global
    optimum and whose jump signature differs from the minimizer's.
    """
    tab = _build_tableau(problem)
    seq = _solve_free(tab)
    best = _result_from_sequence(problem, tab, seq)
    if tie_scan_jumps is None:
        return best

    n = tab.cost.shape[0]
    tol = problem.tie_tolerance * max(1.0, abs(best.energy.total))
    cell = (problem.data.domain[1] - problem.data.domain[0]) / n
    seen = {_signature(best.minimizer, cell)}
    ties = []
    for m in range(0, min(int(tie_scan_jumps), MAX_JUMP_BUDGET, n - 1) + 1):
        try:
            res = best_with_m_jumps(problem, m)
        except ConfigError:
            continue  # no admissible sequence with this jump count (pins)
        if res.energy.total > best.energy.total + tol:
            continue
        sig = _signature(res.minimizer, cell)
        if sig in seen:
            continue
        seen.add(sig)
        ties.append(res)
    return replace(best, ties=tuple(ties))


def _signature(u: PiecewiseConstant, cell: float) -> tuple:
    a = u.domain[0]
    return (u.jump_count, tuple(int(round((b - a) / cell)) for b in u.breakpoints))


def best_with_m_jumps(problem: OracleProblem, m: int) -> OracleResult:
    """Global optimum among sequences with exactly m level changes."""
    if m < 0:
        raise ConfigError("jump count must be non-negative")
    if m > MAX_JUMP_BUDGET:
        raise ConfigError(f"jump budget {m} exceeds the limit {MAX_JUMP_BUDGET}")
    tab = _build_tableau(problem)
    n, L = tab.cost.shape
    if m >= n:
        raise ConfigError(f"cannot place {m} jumps with only {n} cells")

    big = np.inf
    kmat_offdiag = tab.kmat.copy()
    np.fill_diagonal(kmat_offdiag, big)

    D = np.full((m + 1, L), big)
    D[0] = tab.cost[0]
    if tab.pin is not None:
        keep = D[0, tab.pin[0]]
        D[0] = big
        D[0, tab.pin[0]] = keep

    parent_lvl = np.zeros((n, m + 1, L), dtype=np.int32)
    jumped_flag = np.zeros((n, m + 1, L), dtype=bool)
    cols = np.arange(L)
    for i in range(1, n):
        newD = np.empty_like(D)
        for j in range(m, -1, -1):
            stay = D[j]
            take_lvl = cols.astype(np.int32)
            best_here = stay
            if j > 0 and np.isfinite(D[j - 1]).any():
                trans = D[j - 1][:, None] + kmat_offdiag
                arg = np.argmin(trans, axis=0)
                jumped = trans[arg, cols]
                use_jump = jumped < best_here
                take_lvl = np.where(use_jump, arg.astype(np.int32), take_lvl)
                jumped_flag[i, j] = use_jump
                best_here = np.where(use_jump, jumped, best_here)
            parent_lvl[i, j] = take_lvl
            newD[j] = best_here + tab.cost[i]
        D = newD

    final = D[m].copy()
    if tab.pin is not None:
        keep = final[tab.pin[1]]
        final[:] = big
        final[tab.pin[1]] = keep
    if not np.isfinite(final).any():
        raise ConfigError(f"no admissible sequence with exactly {m} jumps")

    seq = np.empty(n, dtype=np.int64)
    seq[-1] = int(np.argmin(final))
    j = m
    for i in range(n - 1, 0, -1):
        lvl = seq[i]
        seq[i - 1] = parent_lvl[i, j, lvl]
        if jumped_flag[i, j, lvl]:
            j -= 1
    return _result_from_sequence(problem, tab, seq)


def sequence_from_result(result: OracleResult, problem: OracleProblem) -> np.ndarray:
    """Cell-value vector of a result, for grid-level comparisons."""
    n = problem.resolved_cells()
    a, b = problem.data.domain
    mids = (np.arange(n) + 0.5) * (b - a) / n + a
    return result.minimizer(mids)


def signal_problem(
    signal: GridSignal,
    kernel: JumpKernel,
    lam: float,
    **kwargs,
) -> OracleProblem:
    """Convenience: wrap a sampled signal as an oracle instance."""
    return OracleProblem(data=SampledData(signal), kernel=kernel, lam=lam, **kwargs)
