"""Finite measured metric spaces with a group partition, and maps between them.

Construct, observed and decision spaces are all represented by
:class:`GroupedMetricSpace`. Points are individuals; the group partition is a
property of individuals and travels with them through every map.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Hashable, Mapping, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .errors import FairspaceError, SpaceValidationError

TRIANGLE_RTOL = 1e-9
MEASURE_TOL = 1e-12
EMBEDDING_TOL = 1e-9


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GroupedMetricSpace:
    """A validated finite metric space with a probability measure and groups.

    Build instances through :func:`validate_space` or :func:`from_embedding`;
    the constructor itself does not check anything.

    Attributes
    ----------
    ids : tuple of str
        Point identifiers, in matrix order.
    dist : ndarray, shape (n, n)
        Pairwise distances (read-only).
    measure : ndarray, shape (n,)
        Probability mass of each point.
    groups : ndarray of int, shape (n,)
        Group index of each point, in ``1..k``.
    group_names : tuple of str
        Name of group ``i`` at position ``i - 1``.
    embedding : ndarray, shape (n, m), optional
        Euclidean coordinates; when present ``dist`` is derived from it.
    """

    ids: tuple[str, ...]
    dist: np.ndarray
    measure: np.ndarray
    groups: np.ndarray
    group_names: tuple[str, ...]
    embedding: np.ndarray | None = None
    name: str = ""
    _index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {pid: i for i, pid in enumerate(self.ids)})

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def k(self) -> int:
        return len(self.group_names)

    @property
    def diameter(self) -> float:
        return float(self.dist.max()) if self.n else 0.0

    @cached_property
    def rational_measure(self) -> tuple[Fraction, ...]:
        from .transport import rational_weights

        return tuple(rational_weights(self.measure))

    def index_of(self, point_id: str) -> int:
        try:
            return self._index[point_id]
        except KeyError:
            raise FairspaceError("UNKNOWN_POINT", f"no point {point_id!r} in space {self.name!r}")

    def members(self, group: int) -> np.ndarray:
        """Indices of the points in group ``group`` (1-based)."""
        return np.flatnonzero(self.groups == group)

    def subspace(self, indices: Sequence[int], name: str | None = None) -> "GroupedMetricSpace":
        """Restriction to ``indices`` with the measure renormalised to 1."""
        idx = np.asarray(indices, dtype=int)
        if idx.size == 0:
            raise FairspaceError("EMPTY_SUBSET", "cannot restrict to an empty subset")
        frac = [self.rational_measure[i] for i in idx]
        total = sum(frac)
        if total == 0:
            raise FairspaceError("BAD_MEASURE", "subset carries zero mass")
        measure = np.array([float(f / total) for f in frac])
        sub_groups = self.groups[idx]
        present = sorted(set(int(g) for g in sub_groups))
        relabel = {g: i + 1 for i, g in enumerate(present)}
        return GroupedMetricSpace(
            ids=tuple(self.ids[i] for i in idx),
            dist=_frozen(self.dist[np.ix_(idx, idx)]),
            measure=_frozen(measure),
            groups=np.array([relabel[int(g)] for g in sub_groups], dtype=int),
            group_names=tuple(self.group_names[g - 1] for g in present),
            embedding=None if self.embedding is None else _frozen(self.embedding[idx]),
            name=self.name if name is None else name,
        )

    def group_subspace(self, group: int) -> "GroupedMetricSpace":
        return self.subspace(self.members(group), name=f"{self.name}[{self.group_names[group - 1]}]")

    def renamed(self, name: str) -> "GroupedMetricSpace":
        return GroupedMetricSpace(
            self.ids, self.dist, self.measure, self.groups, self.group_names, self.embedding, name
        )


@dataclass(frozen=True, eq=False)
class GroupLevelSpace:
    """Groups of a space viewed as points, at mutual Wasserstein distance."""

    group_ids: tuple[str, ...]
    dist: np.ndarray
    measure: np.ndarray
    rational_measure: tuple[Fraction, ...]


def _group_labels(groups, group_names):
    if group_names is None:
        seen = list(dict.fromkeys(groups))
        try:
            ordered = sorted(seen)
        except TypeError:
            ordered = seen
        group_names = ordered
    names = [str(g) for g in group_names]
    lookup = {str(g): i + 1 for i, g in enumerate(group_names)}
    return names, lookup


def validate_space(
    dist,
    measure=None,
    groups: Sequence[Hashable] | None = None,
    ids: Sequence[str] | None = None,
    *,
    embedding=None,
    group_names: Sequence[Hashable] | None = None,
    name: str = "",
) -> GroupedMetricSpace:
    """Check every metric-space invariant and return a frozen space.

    All violations are collected before raising, so one
    :class:`SpaceValidationError` lists everything that is wrong.

    Parameters
    ----------
    dist : array_like, shape (n, n)
    measure : array_like, shape (n,), optional
        Defaults to the uniform measure.
    groups : sequence, length n, optional
        Per-point group labels (any hashables). Defaults to one group.
    ids : sequence of str, optional
        Defaults to ``"0" .. "n-1"``.
    embedding : array_like, shape (n, m), optional
        If given, ``dist`` must match its Euclidean distances.
    group_names : sequence, optional
        Full list of expected groups; a name without members is an error.
    """
    problems: list[tuple[str, str]] = []
    D = np.asarray(dist, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise SpaceValidationError([("BAD_SHAPE", f"distance matrix must be square, got {D.shape}")])
    n = D.shape[0]
    if n == 0:
        raise SpaceValidationError([("BAD_SHAPE", "space has no points")])

    ids = tuple(str(i) for i in range(n)) if ids is None else tuple(str(i) for i in ids)
    if len(ids) != n:
        problems.append(("BAD_SHAPE", f"{len(ids)} ids for {n} points"))
    elif len(set(ids)) != n:
        problems.append(("DUPLICATE_ID", "point ids are not unique"))

    if not np.all(np.isfinite(D)):
        problems.append(("NON_FINITE", "distance matrix has non-finite entries"))
        raise SpaceValidationError(problems)

    scale = float(np.abs(D).max())
    tol = TRIANGLE_RTOL * scale
    if np.any(D < 0):
        i, j = np.argwhere(D < 0)[0]
        problems.append(("NEGATIVE_DISTANCE", f"d[{i},{j}] = {D[i, j]}"))
    if np.any(np.diag(D) != 0):
        i = int(np.flatnonzero(np.diag(D) != 0)[0])
        problems.append(("NONZERO_DIAGONAL", f"d[{i},{i}] = {D[i, i]}"))
    asym = np.abs(D - D.T)
    if np.any(asym > tol):
        i, j = np.unravel_index(int(np.argmax(asym)), asym.shape)
        problems.append(("ASYMMETRY", f"d[{i},{j}] = {D[i, j]} but d[{j},{i}] = {D[j, i]}"))
    for m in range(n):
        bad = D > D[:, m, None] + D[None, m, :] + tol
        if bad.any():
            i, j = np.argwhere(bad)[0]
            problems.append(
                ("TRIANGLE_VIOLATION", f"d[{i},{j}] = {D[i, j]} > d[{i},{m}] + d[{m},{j}] = {D[i, m] + D[m, j]}")
            )
            break

    if measure is None:
        mu = np.full(n, 1.0 / n)
    else:
        mu = np.asarray(measure, dtype=float)
        if mu.shape != (n,):
            problems.append(("BAD_MEASURE", f"measure has shape {mu.shape}, expected ({n},)"))
        elif not np.all(np.isfinite(mu)) or np.any(mu < 0):
            problems.append(("BAD_MEASURE", "measure entries must be finite and non-negative"))
        elif abs(mu.sum() - 1.0) > MEASURE_TOL:
            problems.append(("BAD_MEASURE", f"measure sums to {mu.sum()!r}, not 1"))

    labels = [0] * n if groups is None else list(groups)
    names: list[str] = []
    gidx = np.ones(n, dtype=int)
    if len(labels) != n:
        problems.append(("BAD_SHAPE", f"{len(labels)} group labels for {n} points"))
    else:
        names, lookup = _group_labels(labels, group_names)
        unknown = [g for g in labels if str(g) not in lookup]
        if unknown:
            problems.append(("UNKNOWN_GROUP", f"labels {sorted(set(map(str, unknown)))} not among group names"))
        else:
            gidx = np.array([lookup[str(g)] for g in labels], dtype=int)
            for i, gname in enumerate(names):
                if not np.any(gidx == i + 1):
                    problems.append(("EMPTY_GROUP", f"group {gname!r} has no points"))

    emb = None
    if embedding is not None:
        emb = np.asarray(embedding, dtype=float)
        if emb.ndim == 1:
            emb = emb[:, None]
        if emb.ndim != 2 or emb.shape[0] != n:
            problems.append(("BAD_SHAPE", f"embedding has shape {emb.shape} for {n} points"))
        elif not np.all(np.isfinite(emb)):
            problems.append(("NON_FINITE", "embedding has non-finite coordinates"))
        else:
            err = np.abs(cdist(emb, emb) - D).max()
            if err > EMBEDDING_TOL * max(scale, 1.0):
                problems.append(("EMBEDDING_MISMATCH", f"dist differs from embedding distances by {err}"))

    if problems:
        raise SpaceValidationError(problems)
    return GroupedMetricSpace(
        ids=ids,
        dist=_frozen(D),
        measure=_frozen(mu),
        groups=gidx,
        group_names=tuple(names),
        embedding=None if emb is None else _frozen(emb),
        name=name,
    )


def from_embedding(embedding, groups=None, measure=None, ids=None, *, group_names=None, name="") -> GroupedMetricSpace:
    """Space whose distances are the Euclidean distances between ``embedding`` rows."""
    emb = np.asarray(embedding, dtype=float)
    if emb.ndim == 1:
        emb = emb[:, None]
    return validate_space(
        cdist(emb, emb), measure, groups, ids, embedding=emb, group_names=group_names, name=name
    )


def line_space(points, groups=None, measure=None, ids=None, name="") -> GroupedMetricSpace:
    """Convenience: points on the real line."""
    return from_embedding(np.asarray(points, dtype=float)[:, None], groups, measure, ids, name=name)


def induce_group_space(space: GroupedMetricSpace, transport_solver=None) -> GroupLevelSpace:
    """Group-level space: group ``i`` and ``j`` sit at ``W_d(X_i, X_j)``.

    ``transport_solver`` has the signature of :func:`fairspace.transport.subset_wasserstein`.
    """
    from .transport import subset_wasserstein

    solver = subset_wasserstein if transport_solver is None else transport_solver
    k = space.k
    D = np.zeros((k, k))
    for a in range(1, k + 1):
        for b in range(a + 1, k + 1):
            value = solver(space, space.members(a), space.members(b)).value
            D[a - 1, b - 1] = D[b - 1, a - 1] = value
    mass = [sum((space.rational_measure[i] for i in space.members(g)), Fraction(0)) for g in range(1, k + 1)]
    return GroupLevelSpace(
        group_ids=space.group_names,
        dist=_frozen(D),
        measure=_frozen([float(m) for m in mass]),
        rational_measure=tuple(mass),
    )


def _uniform_ball(rng: np.random.Generator, n: int, dim: int, radius: float) -> np.ndarray:
    direction = rng.standard_normal((n, dim))
    norms = np.linalg.norm(direction, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    r = radius * rng.random((n, 1)) ** (1.0 / dim)
    return direction / norms * r


def shortest_path_closure(D: np.ndarray) -> np.ndarray:
    D = np.array(D, dtype=float, copy=True)
    for m in range(D.shape[0]):
        np.minimum(D, D[:, m, None] + D[None, m, :], out=D)
    return D


def perturb(space: GroupedMetricSpace, radius: float, seed=None) -> GroupedMetricSpace:
    """Shift every point at random within a ball of the given radius.

    With an embedding the offsets are uniform in the Euclidean ball, so no
    distance moves by more than ``2 * radius``. Without one, each distance is
    scaled by ``1 + u`` with ``u`` uniform in ``[-radius/diam, radius/diam]``
    and the result is re-symmetrised and closed under shortest paths.
    """
    if radius < 0:
        raise FairspaceError("NEGATIVE_RADIUS", f"radius must be >= 0, got {radius}")
    if radius == 0:
        return space
    rng = np.random.default_rng(seed)
    if space.embedding is not None:
        emb = space.embedding + _uniform_ball(rng, space.n, space.embedding.shape[1], radius)
        return GroupedMetricSpace(
            space.ids, _frozen(cdist(emb, emb)), space.measure, space.groups,
            space.group_names, _frozen(emb), space.name,
        )
    diam = space.diameter
    if diam == 0:
        return space
    u = rng.uniform(-radius / diam, radius / diam, size=(space.n, space.n))
    upper = np.triu(space.dist * (1.0 + u), 1)
    D = shortest_path_closure(upper + upper.T)
    return GroupedMetricSpace(
        space.ids, _frozen(D), space.measure, space.groups, space.group_names, None, space.name
    )


@dataclass(frozen=True, eq=False)
class SpaceMap:
    """A total map between the point sets of two spaces.

    ``image[i]`` is the codomain index of domain point ``i``.
    """

    domain_ids: tuple[str, ...]
    codomain_ids: tuple[str, ...]
    image: np.ndarray
    domain_name: str = ""
    codomain_name: str = ""

    @classmethod
    def from_assignment(cls, domain: GroupedMetricSpace, codomain: GroupedMetricSpace,
                        assignment: Mapping[str, str]) -> "SpaceMap":
        missing = [pid for pid in domain.ids if pid not in assignment]
        if missing:
            raise FairspaceError("NOT_TOTAL", f"no image for {missing[:5]}")
        extra = set(assignment) - set(domain.ids)
        if extra:
            raise FairspaceError("DOMAIN_MISMATCH", f"assignment mentions unknown points {sorted(extra)[:5]}")
        image = np.array([codomain.index_of(str(assignment[pid])) for pid in domain.ids], dtype=int)
        return cls(domain.ids, codomain.ids, image, domain.name, codomain.name)

    @classmethod
    def identity(cls, space: GroupedMetricSpace, codomain: GroupedMetricSpace | None = None) -> "SpaceMap":
        """Identity on individuals; ``codomain`` must share the point ids."""
        target = space if codomain is None else codomain
        if codomain is None:
            image = np.arange(space.n)
        else:
            image = np.array([target.index_of(pid) for pid in space.ids], dtype=int)
        return cls(space.ids, target.ids, image, space.name, target.name)

    @property
    def assignment(self) -> dict[str, str]:
        return {p: self.codomain_ids[j] for p, j in zip(self.domain_ids, self.image)}

    @property
    def injective(self) -> bool:
        return len(set(self.image.tolist())) == len(self.image)

    @property
    def rich(self) -> bool:
        return len(set(self.image.tolist())) == len(self.codomain_ids)

    def then(self, other: "SpaceMap") -> "SpaceMap":
        """Composition ``other ∘ self``: apply ``self`` first."""
        if tuple(other.domain_ids) != tuple(self.codomain_ids):
            raise FairspaceError("DOMAIN_MISMATCH", "cannot compose: codomain and domain differ")
        return SpaceMap(self.domain_ids, other.codomain_ids, other.image[self.image],
                        self.domain_name, other.codomain_name)

    def check_spaces(self, domain: GroupedMetricSpace, codomain: GroupedMetricSpace) -> None:
        if tuple(domain.ids) != tuple(self.domain_ids):
            raise FairspaceError("DOMAIN_MISMATCH", "map domain does not match the given space")
        if tuple(codomain.ids) != tuple(self.codomain_ids):
            raise FairspaceError("DOMAIN_MISMATCH", "map codomain does not match the given space")


def pushforward(f: SpaceMap, domain: GroupedMetricSpace, codomain: GroupedMetricSpace,
                name: str | None = None) -> GroupedMetricSpace:
    """Individual-level image of ``domain`` under ``f``.

    One point per individual, carrying its own group and mass, at the
    codomain distance of its image. Distinct individuals with the same image
    sit at distance 0, so the result is in general a pseudometric.
    """
    f.check_spaces(domain, codomain)
    img = f.image
    return GroupedMetricSpace(
        ids=domain.ids,
        dist=_frozen(codomain.dist[np.ix_(img, img)]),
        measure=domain.measure,
        groups=domain.groups,
        group_names=domain.group_names,
        embedding=None if codomain.embedding is None else _frozen(codomain.embedding[img]),
        name=codomain.name if name is None else name,
    )
