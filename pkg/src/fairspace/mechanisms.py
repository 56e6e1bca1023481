"""Decision mechanisms OS -> DS: richness, the individual and group fairness
mechanisms, and the violation finder for discrete decision spaces."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

from .distortion import map_distortion
from .errors import FairspaceError
from .spaces import GroupedMetricSpace, SpaceMap, from_embedding, pushforward
from .transport import subset_wasserstein

GFM_EXACT_TOL = 1e-9


@dataclass(frozen=True)
class MechanismSpec:
    kind: str
    epsilon: float
    decision_space: GroupedMetricSpace

    def __post_init__(self):
        if self.kind not in ("IFM", "GFM"):
            raise FairspaceError("BAD_MECHANISM", f"kind must be IFM or GFM, got {self.kind!r}")
        if self.epsilon < 0:
            raise FairspaceError("BAD_MECHANISM", "tolerance must be >= 0")


@dataclass(frozen=True)
class MechanismVerdict:
    kind: str
    passes: bool
    rich: bool
    achieved: float
    epsilon: float
    witness: object = None

    def to_report(self) -> dict:
        return {
            "check": self.kind.lower(),
            "params": {"eps": self.epsilon},
            "holds": self.passes,
            "achieved": self.achieved,
            "rich": self.rich,
            "witnesses": [] if self.witness is None else [self.witness],
        }


def is_rich(f: SpaceMap, DS: GroupedMetricSpace | None = None) -> bool:
    """Every decision has at least one preimage."""
    if DS is not None and tuple(DS.ids) != tuple(f.codomain_ids):
        raise FairspaceError("DOMAIN_MISMATCH", "map codomain does not match the decision space")
    return f.rich


def verify_ifm(f: SpaceMap, OS: GroupedMetricSpace, DS: GroupedMetricSpace, eps: float) -> MechanismVerdict:
    rich = is_rich(f, DS)
    report = map_distortion(f, OS, DS)
    witness = None if report.witness_pair is None else list(report.witness_pair)
    return MechanismVerdict("IFM", rich and report.rho <= eps, rich, report.rho, eps, witness)


def max_group_wasserstein(space: GroupedMetricSpace) -> tuple[float, list[str] | None]:
    worst, witness = 0.0, None
    for a in range(1, space.k + 1):
        for b in range(a + 1, space.k + 1):
            w = subset_wasserstein(space, space.members(a), space.members(b)).value
            if witness is None or w > worst:
                worst, witness = w, [space.group_names[a - 1], space.group_names[b - 1]]
    return worst, witness


def verify_gfm(f: SpaceMap, OS: GroupedMetricSpace, DS: GroupedMetricSpace, eps: float) -> MechanismVerdict:
    """Rich, and the decision-space images of all groups pairwise within ``eps``."""
    rich = is_rich(f, DS)
    worst, witness = max_group_wasserstein(pushforward(f, OS, DS))
    return MechanismVerdict("GFM", rich and worst <= eps, rich, worst, eps, witness)


def build_ifm(OS: GroupedMetricSpace) -> tuple[SpaceMap, GroupedMetricSpace]:
    """Zero-distortion mechanism onto a score copy of OS.

    Returns the map and the decision space; groups are carried over since
    the map is a bijection.
    """
    if OS.embedding is None:
        raise FairspaceError("NO_EMBEDDING", "the IFM builder needs observed coordinates")
    DS = from_embedding(OS.embedding, [OS.group_names[g - 1] for g in OS.groups], OS.measure, OS.ids,
                        group_names=OS.group_names, name="DS")
    return SpaceMap.identity(OS, DS), DS


def gfm_tolerance(OS: GroupedMetricSpace) -> float:
    sizes = [OS.members(g).size for g in range(1, OS.k + 1)]
    if len(set(sizes)) == 1:
        return GFM_EXACT_TOL
    return 2.0 * OS.diameter / min(sizes)


def build_gfm(OS: GroupedMetricSpace) -> tuple[SpaceMap, GroupedMetricSpace]:
    """Group-conditional quantile alignment of one-dimensional scores.

    A point of within-group rank ``r`` in a group of size ``n_g`` receives the
    pooled-population quantile at ``(r + 0.5) / n_g``. Ties in score are
    broken by point id. The decision space holds the distinct output
    scores as a single group, since one score may be shared across groups.
    """
    if OS.embedding is None or OS.embedding.shape[1] != 1:
        raise FairspaceError("NOT_ONE_DIMENSIONAL", "the GFM builder needs 1-D scores")
    if OS.k < 2:
        raise FairspaceError("SINGLE_GROUP", "the GFM builder needs at least two groups")
    scores = OS.embedding[:, 0]
    pooled = np.sort(scores)
    id_rank = np.argsort(np.argsort(np.asarray(OS.ids, dtype=object), kind="stable"), kind="stable")
    out = np.empty(OS.n)
    for g in range(1, OS.k + 1):
        idx = OS.members(g)
        if idx.size < 2:
            raise FairspaceError("GROUP_TOO_SMALL", f"group {OS.group_names[g - 1]!r} has fewer than 2 points")
        ranked = idx[np.lexsort((id_rank[idx], scores[idx]))]
        q = (np.arange(idx.size) + 0.5) / idx.size
        out[ranked] = np.quantile(pooled, q)
    values, image = np.unique(out, return_inverse=True)
    DS = from_embedding(values[:, None], ids=[f"q{i}" for i in range(values.size)], name="DS")
    f = SpaceMap(OS.ids, DS.ids, image.astype(int), OS.name, "DS")
    tol = gfm_tolerance(OS)
    verdict = verify_gfm(f, OS, DS, tol)
    if not verdict.passes:
        raise FairspaceError("GFM_CONSTRUCTION_FAILED", f"max group distance {verdict.achieved} > {tol}")
    return f, DS


@dataclass(frozen=True)
class ViolationCertificate:
    """Two observed points within ``delta`` of each other that receive different decisions.

    Under any correspondence with construct space of additive distortion
    ``eps`` their construct-space distance is at most ``cs_distance_bound``.
    """

    p: str
    q: str
    os_distance: float
    decisions: tuple[str, str]
    decision_distance: float
    cs_distance_bound: float
    method: str
    guaranteed: bool = field(default=False)

    def to_dict(self) -> dict:
        return {
            "pair": [self.p, self.q],
            "os_distance": self.os_distance,
            "decisions": list(self.decisions),
            "decision_distance": self.decision_distance,
            "cs_distance_bound": self.cs_distance_bound,
            "method": self.method,
            "guaranteed": self.guaranteed,
        }


def _is_indicator(D: np.ndarray) -> bool:
    off = ~np.eye(len(D), dtype=bool)
    return bool(np.all(D[off] == 1.0))


def _ball_growth(dist: np.ndarray, labels: np.ndarray, delta: float):
    """Grow balls around each centre until one is not monochromatic, then
    look in the shell of width ``delta`` inside the critical radius for a
    non-monochromatic ball of radius ``delta / 2``."""
    n = len(dist)
    for x in range(n):
        other = labels != labels[x]
        if not other.any():
            continue
        critical = dist[x][other].min()
        shell = np.flatnonzero((dist[x] <= critical) & (dist[x] >= critical - delta))
        shell = shell[np.lexsort((shell, dist[x][shell]))]
        for y in shell:
            ball = np.flatnonzero(dist[y] <= delta / 2)
            if np.unique(labels[ball]).size > 1:
                p = ball[0]
                q = ball[np.flatnonzero(labels[ball] != labels[p])[0]]
                return (min(p, q), max(p, q))
    return None


def find_fairness_violation(f: SpaceMap, OS: GroupedMetricSpace, DS: GroupedMetricSpace,
                            delta: float, delta_prime: float, eps: float = 0.0) -> ViolationCertificate | None:
    """Certify that a rich mechanism into a discrete decision space is unfair.

    Returns two observed points at distance at most ``delta`` with decisions
    more than ``delta_prime`` apart, or ``None`` if no such pair exists.

    With the indicator metric on DS the ball-growth argument is tried first;
    an exhaustive pair scan backs it up and is used directly for other
    discrete metrics. ``guaranteed`` reports whether a pair had to exist,
    which is the case when the ``delta``-neighbourhood graph of OS is
    connected.
    """
    f.check_spaces(OS, DS)
    if not is_rich(f, DS):
        raise FairspaceError("NOT_RICH", "mechanism does not reach every decision")
    off = ~np.eye(DS.n, dtype=bool)
    if DS.n < 2 or DS.dist[off].min() <= delta_prime:
        raise FairspaceError("NON_DISCRETE_DS", "distinct decisions must be more than delta' apart")
    labels = f.image
    n_comp, _ = connected_components(OS.dist <= delta, directed=False)
    guaranteed = n_comp == 1

    pair, method = None, "ball_growth"
    if _is_indicator(DS.dist):
        pair = _ball_growth(OS.dist, labels, delta)
    if pair is None:
        method = "pair_scan"
        decided = DS.dist[np.ix_(labels, labels)]
        hits = np.argwhere(np.triu((OS.dist <= delta) & (decided > delta_prime), 1))
        if len(hits):
            pair = tuple(hits[0])
    if pair is None:
        return None
    p, q = (int(v) for v in pair)
    d = float(OS.dist[p, q])
    return ViolationCertificate(
        OS.ids[p], OS.ids[q], d,
        (DS.ids[labels[p]], DS.ids[labels[q]]),
        float(DS.dist[labels[p], labels[q]]),
        d + eps, method, guaranteed,
    )
