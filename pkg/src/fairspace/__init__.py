"""Metric-space toolkit for reasoning about fairness across construct,
observed and decision spaces."""

from .distortion import DistortionReport, map_distortion, min_distortion
from .errors import FairspaceError, SpaceValidationError
from .group_geometry import SkewReport, between_group_distance, group_skew, within_group_distance
from .mechanisms import (
    build_gfm, build_ifm, find_fairness_violation, is_rich, verify_gfm, verify_ifm,
)
from .spaces import (
    GroupedMetricSpace, SpaceMap, from_embedding, induce_group_space, line_space, perturb,
    pushforward, validate_space,
)
from .transport import gromov_wasserstein, validate_coupling, wasserstein
from .worldviews import (
    check_direct_discrimination, check_fairness, check_non_discrimination, check_structural_bias,
    check_wae, check_wysiwyg,
)

__all__ = [
    "DistortionReport", "FairspaceError", "GroupedMetricSpace", "SkewReport", "SpaceMap",
    "SpaceValidationError", "between_group_distance", "build_gfm", "build_ifm",
    "check_direct_discrimination", "check_fairness", "check_non_discrimination",
    "check_structural_bias", "check_wae", "check_wysiwyg", "find_fairness_violation",
    "from_embedding", "gromov_wasserstein", "group_skew", "induce_group_space", "is_rich",
    "line_space", "map_distortion", "min_distortion", "perturb", "pushforward",
    "validate_coupling", "validate_space", "verify_gfm", "verify_ifm", "wasserstein",
    "within_group_distance",
]
