"""Additive distortion of maps between finite metric spaces."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import FairspaceError
from .spaces import GroupedMetricSpace, SpaceMap

SIZE_CAPS = {"all_maps": 6, "bijections": 8}


@dataclass(frozen=True)
class DistortionReport:
    rho: float
    witness_pair: tuple[str, str] | None
    mapping: SpaceMap | None = None

    def to_dict(self) -> dict:
        out = {"rho": self.rho, "witness_pair": None if self.witness_pair is None else list(self.witness_pair)}
        if self.mapping is not None:
            out["mapping"] = self.mapping.assignment
        return out


def _deviation(dx: np.ndarray, dy: np.ndarray, image: np.ndarray) -> np.ndarray:
    return np.abs(dx - dy[np.ix_(image, image)])


def map_distortion(f: SpaceMap, X: GroupedMetricSpace, Y: GroupedMetricSpace) -> DistortionReport:
    """Largest change ``|d_X(p, q) - d_Y(f(p), f(q))|`` over all pairs.

    The witness is the first maximising pair ``(p, q)``, ``p`` before ``q``
    in the order of ``X``.
    """
    f.check_spaces(X, Y)
    if X.n < 2:
        return DistortionReport(0.0, None, f)
    dev = np.triu(_deviation(X.dist, Y.dist, f.image), 1)
    i, j = np.unravel_index(int(np.argmax(dev)), dev.shape)
    return DistortionReport(float(dev[i, j]), (X.ids[i], X.ids[j]), f)


def _search(dx: np.ndarray, dy: np.ndarray, injective: bool):
    n, m = len(dx), len(dy)
    img = np.zeros(n, dtype=int)
    used = np.zeros(m, dtype=bool)
    best = [math.inf, None]

    def extend(i: int, current: float) -> None:
        if i == n:
            if current < best[0]:
                best[0], best[1] = current, img.copy()
            return
        for y in range(m):
            if injective and used[y]:
                continue
            dev = current
            if i:
                dev = max(dev, float(np.abs(dx[i, :i] - dy[y, img[:i]]).max()))
            # first lexicographic optimum wins ties, so prune on >=
            if dev >= best[0]:
                continue
            img[i] = y
            used[y] = True
            extend(i + 1, dev)
            used[y] = False

    extend(0, 0.0)
    return best[0], best[1]


def min_distortion(X: GroupedMetricSpace, Y: GroupedMetricSpace, mode: str = "bijections",
                   size_cap: int | None = None) -> DistortionReport:
    """Exhaustive minimum of :func:`map_distortion` over a class of maps.

    ``mode="all_maps"`` searches all ``|Y| ** |X|`` functions and
    ``mode="bijections"`` all ``|X|!`` bijections. Branch-and-bound prunes
    partial maps already at least as bad as the incumbent, and ties go to
    the lexicographically first image vector.
    """
    if mode not in SIZE_CAPS:
        raise FairspaceError("BAD_MODE", f"mode must be one of {sorted(SIZE_CAPS)}")
    cap = SIZE_CAPS[mode] if size_cap is None else size_cap
    if X.n > cap:
        raise FairspaceError("SIZE_CAP_EXCEEDED", f"|X| = {X.n} exceeds {mode} cap {cap}")
    if mode == "bijections" and X.n != Y.n:
        raise FairspaceError("SIZE_MISMATCH", f"bijections need |X| = |Y|, got {X.n} and {Y.n}")
    _, image = _search(X.dist, Y.dist, injective=(mode == "bijections"))
    f = SpaceMap(X.ids, Y.ids, image, X.name, Y.name)
    return map_distortion(f, X, Y)
