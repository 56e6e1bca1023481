"""Exact optimal transport between finite measures.

Two exact routes:

* uniform measures on equally sized supports reduce to a linear assignment
  problem (Hungarian family, via :func:`scipy.optimize.linear_sum_assignment`);
* anything else is scaled to integer supplies over a common denominator and
  solved by successive shortest augmenting paths (:func:`min_cost_flow`).

The pair-set Gromov-Wasserstein distance is a transport problem between
ordered pairs of points, solved with the same machinery.
"""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment, linprog
from scipy.sparse import csr_array, vstack

from .errors import FairspaceError

MARGINAL_TOL = 1e-9
SCALE_CAP = 10**9
MAX_DENOMINATOR = 10**6
DEFAULT_GW_SIZE_CAP = 32
# general instances with more cells than this go to the certified LP route
LP_MIN_CELLS = 4096


@dataclass(frozen=True)
class CouplingVerdict:
    valid: bool
    flags: tuple[str, ...]
    max_row_error: float
    max_col_error: float
    min_entry: float


def validate_coupling(nu, row_marginal, col_marginal, tol: float = MARGINAL_TOL) -> CouplingVerdict:
    """Check that ``nu`` is non-negative with the prescribed marginals."""
    nu = np.asarray(nu, dtype=float)
    row = np.asarray(row_marginal, dtype=float)
    col = np.asarray(col_marginal, dtype=float)
    if nu.shape != (row.size, col.size):
        raise FairspaceError("SHAPE_MISMATCH", f"coupling {nu.shape} vs marginals ({row.size}, {col.size})")
    flags = []
    row_err = float(np.abs(nu.sum(axis=1) - row).max()) if row.size else 0.0
    col_err = float(np.abs(nu.sum(axis=0) - col).max()) if col.size else 0.0
    min_entry = float(nu.min()) if nu.size else 0.0
    if min_entry < 0:
        flags.append("NEGATIVITY")
    if row_err > tol:
        flags.append("ROW_MARGINAL")
    if col_err > tol:
        flags.append("COL_MARGINAL")
    return CouplingVerdict(not flags, tuple(flags), row_err, col_err, min_entry)


@dataclass(frozen=True)
class Coupling:
    matrix: np.ndarray
    row_marginal: np.ndarray
    col_marginal: np.ndarray

    def check(self, tol: float = MARGINAL_TOL) -> CouplingVerdict:
        return validate_coupling(self.matrix, self.row_marginal, self.col_marginal, tol)

    def to_dict(self) -> dict:
        return {
            "matrix": self.matrix.tolist(),
            "row_marginal": self.row_marginal.tolist(),
            "col_marginal": self.col_marginal.tolist(),
        }


@dataclass(frozen=True)
class TransportResult:
    value: float
    coupling: Coupling
    stats: dict = field(default_factory=dict, compare=False)


def solve_assignment(cost) -> tuple[np.ndarray, float]:
    """Minimum-cost perfect matching on a square cost matrix.

    Returns ``(perm, total)`` with row ``i`` assigned to column ``perm[i]``.
    """
    C = np.asarray(cost, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise FairspaceError("NON_SQUARE", f"cost matrix has shape {C.shape}")
    if not np.all(np.isfinite(C)):
        raise FairspaceError("NON_FINITE_COST", "cost matrix has non-finite entries")
    rows, cols = linear_sum_assignment(C)
    perm = np.empty(C.shape[0], dtype=int)
    perm[rows] = cols
    return perm, float(C[rows, cols].sum())


def rational_weights(weights) -> list[Fraction]:
    """Exact rational form of a probability vector, renormalised to sum 1.

    Each entry is snapped to the nearest fraction with denominator at most
    ``MAX_DENOMINATOR``; entries not representable to 1e-12 are rejected.
    """
    out = []
    for w in np.asarray(weights, dtype=float).ravel():
        if not math.isfinite(w) or w < 0:
            raise FairspaceError("BAD_MEASURE", f"invalid mass {w!r}")
        f = Fraction(float(w)).limit_denominator(MAX_DENOMINATOR)
        if abs(float(f) - w) > 1e-12:
            raise FairspaceError(
                "SCALE_OVERFLOW", f"mass {w!r} has no rational form with denominator <= {MAX_DENOMINATOR}"
            )
        out.append(f)
    total = sum(out, Fraction(0))
    if total == 0:
        raise FairspaceError("BAD_MEASURE", "measure has zero total mass")
    return [f / total for f in out]


def integer_marginals(a: Sequence[Fraction], b: Sequence[Fraction], cap: int = SCALE_CAP):
    """Scale two rational probability vectors to integer supplies with a common total."""
    denom = 1
    for f in (*a, *b):
        denom = math.lcm(denom, f.denominator)
        if denom > cap:
            raise FairspaceError("SCALE_OVERFLOW", f"common denominator exceeds {cap}")
    ia = np.array([int(f * denom) for f in a], dtype=np.int64)
    ib = np.array([int(f * denom) for f in b], dtype=np.int64)
    if ia.sum() != ib.sum():
        raise FairspaceError("INFEASIBLE_MARGINALS", "marginals carry different total mass")
    return ia, ib, denom


def min_cost_flow(cost, supply, demand) -> tuple[np.ndarray, int]:
    """Exact transportation problem with integer supplies and real costs.

    Successive shortest augmenting paths with node potentials; each search is
    a dense Dijkstra over the bipartite residual graph. Returns the integer
    flow matrix and the number of augmentations.
    """
    C = np.asarray(cost, dtype=float)
    n, m = C.shape
    supply = np.array(supply, dtype=np.int64)
    demand = np.array(demand, dtype=np.int64)
    if supply.sum() != demand.sum():
        raise FairspaceError("INFEASIBLE_MARGINALS", "total supply differs from total demand")
    flow = np.zeros((n, m), dtype=np.int64)
    ps = np.zeros(n)
    pt = C.min(axis=0) if n else np.zeros(m)
    inf = np.inf
    augmentations = 0
    while supply.sum() > 0:
        ds = np.where(supply > 0, 0.0, inf)
        dt = np.full(m, inf)
        pred_t = np.full(m, -1)
        pred_s = np.full(n, -1)
        done_s = np.zeros(n, dtype=bool)
        done_t = np.zeros(m, dtype=bool)
        while True:
            cs = np.where(done_s, inf, ds)
            ct = np.where(done_t, inf, dt)
            i = int(np.argmin(cs))
            j = int(np.argmin(ct))
            if cs[i] <= ct[j]:
                if cs[i] == inf:
                    raise FairspaceError("INFEASIBLE_MARGINALS", "no augmenting path")
                done_s[i] = True
                cand = ds[i] + np.maximum(C[i] + ps[i] - pt, 0.0)
                better = (cand < dt) & ~done_t
                dt[better] = cand[better]
                pred_t[better] = i
            else:
                done_t[j] = True
                if demand[j] > 0:
                    target, reach = j, dt[j]
                    break
                back = flow[:, j] > 0
                cand = dt[j] + np.maximum(pt[j] - C[:, j] - ps, 0.0)
                better = back & (cand < ds) & ~done_s
                ds[better] = cand[better]
                pred_s[better] = j

        path = []
        j = target
        bottleneck = demand[target]
        while True:
            i = pred_t[j]
            path.append((i, j, +1))
            jb = pred_s[i]
            if jb < 0:
                bottleneck = min(bottleneck, supply[i])
                origin = i
                break
            path.append((i, jb, -1))
            bottleneck = min(bottleneck, flow[i, jb])
            j = jb
        for i, j, sign in path:
            flow[i, j] += sign * bottleneck
        supply[origin] -= bottleneck
        demand[target] -= bottleneck
        ps += np.minimum(ds, reach)
        pt += np.minimum(dt, reach)
        augmentations += 1
    return flow, augmentations


def certified_lp_flow(cost, supply, demand) -> np.ndarray | None:
    """Transportation problem via HiGHS, accepted only with an exact certificate.

    The integer supplies make every vertex solution integral. The LP flow is
    rounded, its margins are checked in integer arithmetic and its optimality
    through the dual reduced costs (complementary slackness within a
    ``1e-9`` relative tolerance). Returns ``None`` if any check fails.
    """
    C = np.asarray(cost, dtype=float)
    n, m = C.shape
    cells = np.arange(n * m)
    A_eq = vstack([
        csr_array((np.ones(n * m), (np.repeat(np.arange(n), m), cells)), shape=(n, n * m)),
        csr_array((np.ones(n * m), (np.tile(np.arange(m), n), cells)), shape=(m, n * m)),
    ])
    b_eq = np.concatenate([supply, demand]).astype(float)
    res = linprog(C.ravel(), A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs-ds",
                  options={"dual_feasibility_tolerance": 1e-10, "primal_feasibility_tolerance": 1e-10})
    if res.status != 0:
        return None
    flow = np.rint(res.x.reshape(n, m)).astype(np.int64)
    if np.any(flow < 0) or not (np.array_equal(flow.sum(axis=1), supply) and np.array_equal(flow.sum(axis=0), demand)):
        return None
    dual = res.eqlin.marginals
    rc = C - dual[:n, None] - dual[None, n:]
    tol = 1e-9 * max(1.0, float(np.abs(C).max()))
    if rc.min() < -tol or np.abs(rc[flow > 0]).max(initial=0.0) > tol:
        return None
    return flow


def _solve_integer(C: np.ndarray, ia: np.ndarray, ib: np.ndarray, total: int, method: str) -> TransportResult:
    start = time.perf_counter()
    n, m = C.shape
    uniform = n == m and n > 0 and np.all(ia == ia[0]) and np.all(ib == ib[0])
    if method == "auto":
        method = "assignment" if uniform else ("lp" if n * m > LP_MIN_CELLS else "flow")
    flow = certified_lp_flow(C, ia, ib) if method == "lp" else None
    if flow is not None:
        nu = flow / float(total)
        iterations = 1
    elif method == "assignment":
        if not uniform:
            raise FairspaceError("BAD_METHOD", "assignment route needs uniform measures of equal size")
        perm, _ = solve_assignment(C)
        nu = np.zeros((n, n))
        nu[np.arange(n), perm] = 1.0 / n
        iterations = n
    elif method in ("flow", "lp"):
        # an uncertified LP answer falls back to the combinatorial solver
        method = "flow"
        flow, iterations = min_cost_flow(C, ia, ib)
        nu = flow / float(total)
    else:
        raise FairspaceError("BAD_METHOD", f"unknown method {method!r}")
    row = ia / float(total)
    col = ib / float(total)
    value = float((nu * C).sum())
    stats = {"method": method, "iterations": int(iterations), "runtime": time.perf_counter() - start}
    return TransportResult(value, Coupling(nu, row, col), stats)


def _check_cost(C: np.ndarray, n: int, m: int) -> None:
    if C.shape != (n, m):
        raise FairspaceError("SHAPE_MISMATCH", f"cost {C.shape} vs measures ({n}, {m})")
    if not np.all(np.isfinite(C)):
        raise FairspaceError("NON_FINITE_COST", "cost matrix has non-finite entries")


def wasserstein(cost, mu, nu, *, method: str = "auto", scale_cap: int = SCALE_CAP) -> TransportResult:
    """Optimal transport cost between two probability vectors under ``cost``.

    Parameters
    ----------
    cost : array_like, shape (n, m)
        Ground cost; for a Wasserstein distance, the ambient distances
        between the two supports.
    mu, nu : array_like
        Probability vectors of length ``n`` and ``m``. Each must sum to 1
        within ``1e-9``.
    method : {"auto", "assignment", "flow"}
    """
    C = np.asarray(cost, dtype=float)
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    _check_cost(C, mu.size, nu.size)
    if abs(mu.sum() - nu.sum()) > MARGINAL_TOL or abs(mu.sum() - 1.0) > MARGINAL_TOL:
        raise FairspaceError("INFEASIBLE_MARGINALS", f"measures sum to {mu.sum()!r} and {nu.sum()!r}")
    ia, ib, total = integer_marginals(rational_weights(mu), rational_weights(nu), scale_cap)
    return _solve_integer(C, ia, ib, total, method)


def subset_wasserstein(space, a, b, *, method: str = "auto") -> TransportResult:
    """Wasserstein distance between two index subsets of one ambient space.

    Each subset carries the ambient measure restricted to it and renormalised.
    """
    a = np.asarray(a, dtype=int)
    b = np.asarray(b, dtype=int)
    if a.size == 0 or b.size == 0:
        raise FairspaceError("EMPTY_SUBSET", "Wasserstein distance needs non-empty subsets")
    rm = space.rational_measure
    fa = [rm[i] for i in a]
    fb = [rm[i] for i in b]
    sa, sb = sum(fa), sum(fb)
    if sa == 0 or sb == 0:
        raise FairspaceError("BAD_MEASURE", "subset carries zero mass")
    ia, ib, total = integer_marginals([f / sa for f in fa], [f / sb for f in fb])
    return _solve_integer(np.asarray(space.dist)[np.ix_(a, b)], ia, ib, total, method)


def gw_size_cap() -> int:
    raw = os.environ.get("FAIRSPACE_SIZE_CAP")
    if raw is None:
        return DEFAULT_GW_SIZE_CAP
    try:
        cap = int(raw)
    except ValueError:
        raise FairspaceError("BAD_CONFIG", f"FAIRSPACE_SIZE_CAP={raw!r} is not an integer")
    if cap < 1:
        raise FairspaceError("BAD_CONFIG", "FAIRSPACE_SIZE_CAP must be positive")
    return cap


@dataclass(frozen=True)
class GWResult:
    """Pair-set Gromov-Wasserstein value and the optimal coupling of ordered pairs.

    Row ``i * n + j`` of ``transport.coupling.matrix`` is the pair ``(x_i, x_j)``.
    """

    value: float
    transport: TransportResult

    @property
    def pair_coupling(self) -> np.ndarray:
        return self.transport.coupling.matrix


def _measure_of(space) -> list[Fraction]:
    rm = getattr(space, "rational_measure", None)
    return list(rm) if rm is not None else rational_weights(space.measure)


def gromov_wasserstein(X, Y, *, size_cap: int | None = None, method: str = "auto") -> GWResult:
    """Half the optimal transport cost between the ordered-pair sets of X and Y.

    Pairs ``(x, x')`` carry mass ``mu(x) mu(x')`` and are moved to pairs
    ``(y, y')`` at cost ``|d_X(x, x') - d_Y(y, y')|``. Self-pairs are included.
    ``X`` and ``Y`` need ``dist`` and ``measure`` attributes.
    """
    cap = gw_size_cap() if size_cap is None else size_cap
    dx = np.asarray(X.dist, dtype=float)
    dy = np.asarray(Y.dist, dtype=float)
    if max(len(dx), len(dy)) > cap:
        raise FairspaceError("SIZE_CAP_EXCEEDED", f"spaces of size {len(dx)} and {len(dy)} exceed cap {cap}")
    fx, fy = _measure_of(X), _measure_of(Y)
    px = [a * b for a in fx for b in fx]
    py = [a * b for a in fy for b in fy]
    C = np.abs(dx.reshape(-1, 1) - dy.reshape(1, -1))
    ia, ib, total = integer_marginals(px, py)
    result = _solve_integer(C, ia, ib, total, method)
    return GWResult(0.5 * result.value, result)
