"""Checkers for the two worldview axioms and the fairness-style definitions.

Every verdict renders to the common report shape
``{check, params, holds, achieved, witnesses}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .distortion import map_distortion, min_distortion
from .errors import FairspaceError
from .group_geometry import SkewReport, group_skew
from .spaces import GroupedMetricSpace, SpaceMap
from .transport import subset_wasserstein


@dataclass(frozen=True)
class AxiomVerdict:
    check: str
    holds: bool
    epsilon_used: float
    achieved_value: float
    witness: object = None
    extra: dict = field(default_factory=dict)

    def to_report(self) -> dict:
        return {
            "check": self.check,
            "params": {"eps": self.epsilon_used, **self.extra},
            "holds": self.holds,
            "achieved": self.achieved_value,
            "witnesses": [] if self.witness is None else [self.witness],
        }


@dataclass(frozen=True)
class FairnessVerdict:
    fair: bool
    epsilon: float
    epsilon_prime: float
    violations: tuple[tuple[str, str], ...]
    max_close_decision_distance: float

    def to_report(self) -> dict:
        return {
            "check": "fairness",
            "params": {"eps": self.epsilon, "eps_prime": self.epsilon_prime},
            "holds": self.fair,
            "achieved": self.max_close_decision_distance,
            "witnesses": [list(v) for v in self.violations],
        }


@dataclass(frozen=True)
class SkewVerdict:
    """``holds`` is true when the named property holds (bias present, or non-discriminatory)."""

    check: str
    threshold: float
    holds: bool
    skew: SkewReport

    def to_report(self) -> dict:
        return {
            "check": self.check,
            "params": {"t": self.threshold, "delta": self.skew.delta, "mode": self.skew.mode},
            "holds": self.holds,
            "achieved": self.skew.sigma,
            "witnesses": [self.skew.to_dict()],
        }


def check_wysiwyg(CS: GroupedMetricSpace, OS: GroupedMetricSpace, eps: float,
                  g: SpaceMap | None = None) -> AxiomVerdict:
    """Does some map CS -> OS distort distances by at most ``eps``?

    With ``g`` the given map is measured; otherwise the best bijection is
    searched exhaustively and, when small enough, the all-maps bound is
    reported alongside.
    """
    extra = {}
    if g is not None:
        report = map_distortion(g, CS, OS)
        extra["search"] = "given_map"
    else:
        report = min_distortion(CS, OS, "bijections")
        extra["search"] = "bijections"
        try:
            extra["all_maps_rho"] = min_distortion(CS, OS, "all_maps").rho
        except FairspaceError:
            pass
    witness = None if report.witness_pair is None else list(report.witness_pair)
    return AxiomVerdict("wysiwyg", report.rho <= eps, eps, report.rho, witness, extra)


def check_wae(CS: GroupedMetricSpace, eps: float) -> AxiomVerdict:
    """Are all groups pairwise within ``eps`` (strictly) in Wasserstein distance?"""
    if CS.k < 2:
        raise FairspaceError("SINGLE_GROUP", "WAE needs at least two groups")
    worst, witness = -1.0, None
    for a in range(1, CS.k + 1):
        for b in range(a + 1, CS.k + 1):
            w = subset_wasserstein(CS, CS.members(a), CS.members(b)).value
            if w > worst:
                worst, witness = w, [CS.group_names[a - 1], CS.group_names[b - 1]]
    return AxiomVerdict("wae", worst < eps, eps, worst, witness)


def check_fairness(f: SpaceMap, CS: GroupedMetricSpace, DS: GroupedMetricSpace,
                   eps: float, eps_prime: float) -> FairnessVerdict:
    """All pairs with ``d_CS <= eps`` whose decisions are more than ``eps_prime`` apart.

    Violations are listed in lexicographic order of point ids.
    """
    f.check_spaces(CS, DS)
    close = np.triu(CS.dist <= eps, 1)
    decided = DS.dist[np.ix_(f.image, f.image)]
    bad = close & (decided > eps_prime)
    pairs = tuple(sorted(tuple(sorted((CS.ids[i], CS.ids[j]))) for i, j in np.argwhere(bad)))
    worst = float(decided[close].max()) if close.any() else 0.0
    return FairnessVerdict(not pairs, eps, eps_prime, pairs, worst)


def _skew_check(name, X, Y, t, delta, mode, seed, exceeds: bool) -> SkewVerdict:
    report = group_skew(X, Y, delta, mode, seed)
    holds = report.sigma > t if exceeds else report.sigma <= t
    return SkewVerdict(name, t, holds, report)


def check_structural_bias(CS, OS, t, delta=None, mode="additive", seed=None) -> SkewVerdict:
    """t-structural bias: group skew from CS to OS exceeds ``t``."""
    return _skew_check("structural_bias", CS, OS, t, delta, mode, seed, exceeds=True)


def check_direct_discrimination(OS, DS, t, delta=None, mode="additive", seed=None) -> SkewVerdict:
    """t-direct discrimination: group skew from OS to DS exceeds ``t``."""
    return _skew_check("direct_discrimination", OS, DS, t, delta, mode, seed, exceeds=True)


def check_non_discrimination(CS, DS, t, delta=None, mode="additive", seed=None) -> SkewVerdict:
    """t-nondiscrimination: group skew from CS to DS is at most ``t``."""
    return _skew_check("non_discrimination", CS, DS, t, delta, mode, seed, exceeds=False)
