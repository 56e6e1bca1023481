"""Between-group and within-group distances and the group skew ratio."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import FairspaceError
from .spaces import GroupedMetricSpace, induce_group_space, perturb
from .transport import gromov_wasserstein

MODES = ("additive", "perturb")
SMOOTHING_FRACTION = 1e-3


@dataclass(frozen=True)
class SkewReport:
    rho_b: float
    rho_w: float
    delta: float
    sigma: float
    per_group_rho: tuple[float, ...]
    mode: str

    def to_dict(self) -> dict:
        return {
            "rho_b": self.rho_b,
            "rho_w": self.rho_w,
            "delta": self.delta,
            "sigma": self.sigma,
            "per_group_rho": list(self.per_group_rho),
            "mode": self.mode,
        }


def _check_groups(X: GroupedMetricSpace, Y: GroupedMetricSpace) -> int:
    if X.k != Y.k:
        raise FairspaceError("GROUP_COUNT_MISMATCH", f"{X.k} groups vs {Y.k} groups")
    return X.k


def between_group_distance(X: GroupedMetricSpace, Y: GroupedMetricSpace) -> float:
    """GW distance between the two group-level spaces, divided by ``C(k, 2)``."""
    k = _check_groups(X, Y)
    if k < 2:
        raise FairspaceError("SINGLE_GROUP", "between-group distance needs at least two groups")
    gw = gromov_wasserstein(induce_group_space(X), induce_group_space(Y))
    return gw.value / math.comb(k, 2)


def within_group_distance(X: GroupedMetricSpace, Y: GroupedMetricSpace) -> tuple[float, tuple[float, ...]]:
    """Mean over groups of the GW distance between matching groups."""
    k = _check_groups(X, Y)
    per_group = tuple(
        gromov_wasserstein(X.group_subspace(g), Y.group_subspace(g)).value for g in range(1, k + 1)
    )
    return sum(per_group) / k, per_group


def default_smoothing(X: GroupedMetricSpace, Y: GroupedMetricSpace) -> float:
    """``1e-3`` of the larger diameter (``1e-3`` if both spaces are single points)."""
    diam = max(X.diameter, Y.diameter)
    return SMOOTHING_FRACTION * (diam if diam > 0 else 1.0)


def group_skew(X: GroupedMetricSpace, Y: GroupedMetricSpace, delta: float | None = None,
               mode: str = "additive", seed=None) -> SkewReport:
    """Ratio of between-group to within-group distortion from X to Y.

    ``additive`` adds ``delta`` to numerator and denominator. ``perturb``
    jitters both spaces within a ball of radius ``delta`` and takes the plain
    ratio; it raises ``DEGENERATE_SKEW`` if the within-group term is still 0
    (e.g. every group is a single point).
    """
    if mode not in MODES:
        raise FairspaceError("BAD_MODE", f"smoothing mode must be one of {MODES}")
    if delta is None:
        delta = default_smoothing(X, Y)
    if not delta > 0:
        raise FairspaceError("NONPOSITIVE_DELTA", f"smoothing radius must be > 0, got {delta}")
    if mode == "additive":
        rho_b = between_group_distance(X, Y)
        rho_w, per_group = within_group_distance(X, Y)
        sigma = (rho_b + delta) / (rho_w + delta)
    else:
        sx, sy = np.random.SeedSequence(seed).spawn(2)
        Xp = perturb(X, delta, np.random.default_rng(sx))
        Yp = perturb(Y, delta, np.random.default_rng(sy))
        rho_b = between_group_distance(Xp, Yp)
        rho_w, per_group = within_group_distance(Xp, Yp)
        if rho_w == 0:
            raise FairspaceError("DEGENERATE_SKEW", "within-group distance is zero after perturbation")
        sigma = rho_b / rho_w
    return SkewReport(float(rho_b), float(rho_w), float(delta), float(sigma), per_group, mode)
