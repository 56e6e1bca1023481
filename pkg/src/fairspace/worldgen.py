"""Seeded synthetic construct -> observed -> decision pipelines and the
theorem-reproduction experiments run on them."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .distortion import map_distortion
from .errors import FairspaceError
from .group_geometry import default_smoothing, group_skew
from .mechanisms import build_gfm, build_ifm, find_fairness_violation, verify_gfm, verify_ifm
from .spaces import (
    GroupedMetricSpace, SpaceMap, _uniform_ball, from_embedding, perturb, pushforward, validate_space,
)
from .worldviews import check_fairness, check_wae

OBSERVATION_MODELS = ("faithful", "biased", "noisy_proxy")
CSV_COLUMNS = ("trial", "sigma_cs_os", "sigma_os_ds", "sigma_cs_ds", "violations", "bound", "margin")


@dataclass(frozen=True)
class WorldSpec:
    """Parameters of a synthetic world.

    ``observation`` selects the CS -> OS model:

    * ``faithful``: every point moves by at most ``noise``;
    * ``biased``: group ``i`` is translated rigidly by ``shifts[i]``
      (scalars shift along the first axis);
    * ``noisy_proxy``: coordinates are multiplied by ``mixing`` and moved
      by at most ``noise``.
    """

    n_per_group: int = 10
    k: int = 2
    dim: int = 2
    group_separation: float = 0.0
    within_spread: float = 1.0
    observation: str = "faithful"
    noise: float = 0.0
    shifts: tuple = ()
    mixing: tuple = ()
    mirror_groups: bool = False
    seed: int = 0

    def validate(self) -> "WorldSpec":
        problems = []
        if self.n_per_group < 2:
            problems.append("n_per_group must be >= 2")
        if self.k < 1 or self.dim < 1:
            problems.append("k and dim must be >= 1")
        if min(self.group_separation, self.within_spread, self.noise) < 0:
            problems.append("scale parameters must be >= 0")
        if self.observation not in OBSERVATION_MODELS:
            problems.append(f"observation must be one of {OBSERVATION_MODELS}")
        if self.observation == "biased" and len(self.shifts) != self.k:
            problems.append(f"biased model needs {self.k} shifts, got {len(self.shifts)}")
        if self.observation == "noisy_proxy" and self.mixing:
            if np.asarray(self.mixing, dtype=float).shape != (self.dim, self.dim):
                problems.append(f"mixing must be {self.dim}x{self.dim}")
        if problems:
            raise FairspaceError("BAD_SPEC", "; ".join(problems))
        return self


@dataclass(frozen=True, eq=False)
class PipelineWorld:
    CS: GroupedMetricSpace
    OS: GroupedMetricSpace
    DS: GroupedMetricSpace
    g: SpaceMap
    f: SpaceMap
    composed: SpaceMap
    spec: WorldSpec

    @property
    def decisions(self) -> GroupedMetricSpace:
        """Individual-level image of CS in DS."""
        return pushforward(self.composed, self.CS, self.DS)


def trial_seed(master: int, trial: int) -> int:
    return int(np.random.SeedSequence([master, trial]).generate_state(1)[0])


def _group_labels(k: int, n: int) -> list[str]:
    return [f"g{g}" for g in range(1, k + 1) for _ in range(n)]


def gen_construct_space(spec: WorldSpec) -> GroupedMetricSpace:
    """``k`` clipped Gaussian clusters with centres ``group_separation`` apart on the first axis.

    Offsets are clipped to norm ``3 * within_spread``. With ``mirror_groups``
    every group reuses the same offsets, so groups are exact translates.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n, k, dim = spec.n_per_group, spec.k, spec.dim

    def offsets():
        z = rng.standard_normal((n, dim)) * spec.within_spread
        norms = np.linalg.norm(z, axis=1, keepdims=True)
        limit = 3.0 * spec.within_spread
        scale = np.where(norms > limit, limit / np.where(norms == 0, 1.0, norms), 1.0)
        return z * scale

    shared = offsets() if spec.mirror_groups else None
    blocks = []
    for g in range(k):
        center = np.zeros(dim)
        center[0] = g * spec.group_separation
        blocks.append(center + (shared if shared is not None else offsets()))
    emb = np.vstack(blocks)
    ids = [f"p{i:04d}" for i in range(n * k)]
    names = [f"g{g}" for g in range(1, k + 1)]
    return from_embedding(emb, _group_labels(k, n), ids=ids, group_names=names, name="CS")


def observe(CS: GroupedMetricSpace, spec: WorldSpec, seed=None) -> tuple[GroupedMetricSpace, SpaceMap]:
    """Apply the observation model; individuals keep their ids, so ``g`` is the identity."""
    spec.validate()
    if CS.embedding is None:
        raise FairspaceError("MODEL_MISMATCH", "observation models act on coordinates")
    emb = np.array(CS.embedding, dtype=float)
    dim = emb.shape[1]
    rng = np.random.default_rng(seed)
    if spec.observation == "faithful":
        if spec.noise > 0:
            emb = emb + _uniform_ball(rng, CS.n, dim, spec.noise)
    elif spec.observation == "biased":
        for g, shift in enumerate(spec.shifts, start=1):
            vec = np.zeros(dim)
            s = np.atleast_1d(np.asarray(shift, dtype=float))
            if s.size == 1:
                vec[0] = s[0]
            elif s.size == dim:
                vec = s
            else:
                raise FairspaceError("MODEL_MISMATCH", f"shift {shift!r} does not fit dimension {dim}")
            emb[CS.members(g)] += vec
    else:
        mixing = np.eye(dim) if not spec.mixing else np.asarray(spec.mixing, dtype=float)
        if mixing.shape != (dim, dim):
            raise FairspaceError("MODEL_MISMATCH", f"mixing must be {dim}x{dim}")
        emb = emb @ mixing.T
        if spec.noise > 0:
            emb = emb + _uniform_ball(rng, CS.n, dim, spec.noise)
    OS = from_embedding(emb, [CS.group_names[g - 1] for g in CS.groups], CS.measure, CS.ids,
                        group_names=CS.group_names, name="OS")
    return OS, SpaceMap.identity(CS, OS)


def build_world(spec: WorldSpec, mechanism: str = "ifm") -> PipelineWorld:
    CS = gen_construct_space(spec)
    OS, g = observe(CS, spec, seed=trial_seed(spec.seed, 1))
    if mechanism == "ifm":
        f, DS = build_ifm(OS)
    elif mechanism == "gfm":
        f, DS = build_gfm(OS)
    else:
        raise FairspaceError("BAD_MECHANISM", f"unknown mechanism {mechanism!r}")
    return PipelineWorld(CS, OS, DS, g, f, g.then(f), spec)


def _row(trial, sigma_cs_os=None, sigma_os_ds=None, sigma_cs_ds=None, violations=None, bound=None, margin=None):
    return dict(zip(CSV_COLUMNS, (trial, sigma_cs_os, sigma_os_ds, sigma_cs_ds, violations, bound, margin)))


def _report(name: str, params: dict, rows: list[dict], passed: bool, **summary) -> dict:
    return {"experiment": name, "params": params, "passed": passed, "summary": summary, "trials": rows}


def run_theorem1_experiment(trials: int = 100, seed: int = 0, deltas=(0.01, 0.05, 0.1),
                            delta_primes=(0.01, 0.05, 0.1), eps: float = 0.2, eps_prime: float | None = None,
                            world: WorldSpec | None = None) -> dict:
    """Faithful worlds plus a near-isometric mechanism never break the fairness bound.

    Trial ``i`` takes its ``(delta, delta')`` from the grid in row-major
    order. Observation noise is ``delta / 2`` per point and the mechanism
    jitters an exact score copy by ``delta' / 2``, so the two maps distort
    by at most ``delta`` and ``delta'``. Fairness is checked at
    ``eps' = eps + delta + delta'`` unless ``eps_prime`` pins it.
    """
    base = world or WorldSpec(n_per_group=15, k=2, dim=2, group_separation=1.0, within_spread=0.5)
    grid = [(d, dp) for d in deltas for dp in delta_primes]
    rows, breaches, premise_failures = [], 0, 0
    for t in range(trials):
        delta, delta_p = grid[t % len(grid)]
        s = trial_seed(seed, t)
        spec = replace(base, observation="faithful", noise=delta / 2, seed=s)
        CS = gen_construct_space(spec)
        OS, g = observe(CS, spec, seed=trial_seed(s, 1))
        f0, DS0 = build_ifm(OS)
        DS = perturb(DS0, delta_p / 2, seed=trial_seed(s, 2)).renamed("DS")
        f = SpaceMap(f0.domain_ids, DS.ids, f0.image, "OS", "DS")
        rho_g = map_distortion(g, CS, OS).rho
        mech = verify_ifm(f, OS, DS, delta_p)
        if rho_g > delta or not mech.passes:
            premise_failures += 1
        bound = eps + delta + delta_p if eps_prime is None else eps_prime
        verdict = check_fairness(g.then(f), CS, DS, eps, bound)
        breaches += len(verdict.violations)
        rows.append(_row(t, violations=len(verdict.violations), bound=bound,
                         margin=bound - verdict.max_close_decision_distance))
    params = {"trials": trials, "seed": seed, "deltas": list(deltas), "delta_primes": list(delta_primes),
              "eps": eps, "eps_prime": eps_prime, "world": asdict(base)}
    passed = breaches == 0 and premise_failures == 0
    return _report("theorem1", params, rows, passed, violations=breaches, premise_failures=premise_failures)


def _threshold_mechanism(OS: GroupedMetricSpace, levels: int, rng: np.random.Generator):
    """Random rich threshold rule: project on a random direction and cut the
    ranking at ``levels - 1`` distinct random positions."""
    dim = OS.embedding.shape[1]
    direction = rng.standard_normal(dim)
    direction /= np.linalg.norm(direction)
    score = OS.embedding @ direction
    cuts = np.sort(rng.choice(np.arange(1, OS.n), levels - 1, replace=False))
    rank = np.argsort(np.argsort(score, kind="stable"), kind="stable")
    return np.searchsorted(cuts, rank, side="right")


def run_theorem2_experiment(trials: int = 100, seed: int = 0, delta: float = 0.3, delta_prime: float = 0.5,
                            eps: float = 0.0, levels=(2, 3, 4), world: WorldSpec | None = None) -> dict:
    """Rich mechanisms into a discrete decision set always admit a violating pair.

    Observed spaces are dense clusters; decisions ``{0, .., L-1}`` carry the
    indicator metric. A trial whose ``delta``-graph is disconnected and has
    no pair is a premise failure, not a counterexample.
    """
    base = world or WorldSpec(n_per_group=30, k=2, dim=2, group_separation=0.0, within_spread=0.1)
    rows, certs, found, premise_failures, counterexamples = [], [], 0, 0, 0
    for t in range(trials):
        s = trial_seed(seed, t)
        OS = gen_construct_space(replace(base, seed=s)).renamed("OS")
        rng = np.random.default_rng(trial_seed(s, 1))
        L = int(levels[t % len(levels)])
        DS = validate_space(1.0 - np.eye(L), ids=[str(v) for v in range(L)], name="DS")
        labels = _threshold_mechanism(OS, L, rng)
        f = SpaceMap(OS.ids, DS.ids, labels, "OS", "DS")
        cert = find_fairness_violation(f, OS, DS, delta, delta_prime, eps)
        ok = cert is not None and cert.os_distance <= delta and labels[OS.index_of(cert.p)] != labels[OS.index_of(cert.q)]
        if ok:
            found += 1
        elif cert is None and not _connected(OS, delta):
            premise_failures += 1
        else:
            counterexamples += 1
        rows.append(_row(t, violations=int(ok), bound=delta, margin=None if cert is None else delta - cert.os_distance))
        certs.append(None if cert is None else {"trial": t, "levels": L, **cert.to_dict()})
    params = {"trials": trials, "seed": seed, "delta": delta, "delta_prime": delta_prime, "eps": eps,
              "levels": list(levels), "world": asdict(base)}
    report = _report("theorem2", params, rows, counterexamples == 0, found=found,
                     success_rate=found / trials if trials else 0.0,
                     premise_failures=premise_failures, counterexamples=counterexamples)
    report["certificates"] = certs
    return report


def _connected(space: GroupedMetricSpace, radius: float) -> bool:
    from scipy.sparse.csgraph import connected_components

    return connected_components(space.dist <= radius, directed=False)[0] == 1


def gfm_bound(eps: float, eps_prime: float, delta: float) -> float:
    """Skew bound for GFM under WAE; with both tolerances 0 the additive-mode bound is 1."""
    top = max(eps, eps_prime)
    return top / delta if top > 0 else 1.0


def run_gfm_theorem_experiment(trials: int = 100, seed: int = 0, eps: float = 2.0, eps_prime: float = 1e-9,
                               delta: float | None = None, shift: float = 3.0,
                               world: WorldSpec | None = None, require_wae: bool = True) -> dict:
    """Under WAE a verified GFM keeps the CS -> DS group skew below ``max(eps, eps')/delta``.

    Observation is a rigid shift of the last group by ``shift``. ``delta``
    defaults to ``1e-3`` of the larger diameter of CS and DS, per trial.
    With ``require_wae`` the bound is asserted only on WAE worlds; others
    count as premise failures and are reported.
    """
    base = world or WorldSpec(n_per_group=10, k=2, dim=1, group_separation=0.0, within_spread=1.0)
    rows, breaches, premise_failures = [], 0, 0
    for t in range(trials):
        s = trial_seed(seed, t)
        shifts = tuple([0.0] * (base.k - 1) + [shift])
        spec = replace(base, observation="biased", shifts=shifts, seed=s)
        CS = gen_construct_space(spec)
        OS, g = observe(CS, spec)
        f, DS = build_gfm(OS)
        mech = verify_gfm(f, OS, DS, eps_prime)
        decided = pushforward(g.then(f), CS, DS)
        d = default_smoothing(CS, decided) if delta is None else delta
        wae = check_wae(CS, eps).holds
        sk_cs_os = group_skew(CS, OS, d)
        sk_os_ds = group_skew(OS, pushforward(f, OS, DS), d)
        sk_cs_ds = group_skew(CS, decided, d)
        bound = gfm_bound(eps, eps_prime, d)
        premise = wae and mech.passes
        if not premise:
            premise_failures += 1
        elif sk_cs_ds.sigma > bound:
            breaches += 1
        rows.append(_row(t, sk_cs_os.sigma, sk_os_ds.sigma, sk_cs_ds.sigma, None, bound, bound - sk_cs_ds.sigma))
    margins = [r["margin"] for r in rows]
    params = {"trials": trials, "seed": seed, "eps": eps, "eps_prime": eps_prime, "delta": delta,
              "shift": shift, "world": asdict(base), "smoothing": "additive"}
    passed = breaches == 0 and (premise_failures == 0 or not require_wae)
    summary = {"breaches": breaches, "premise_failures": premise_failures,
               "min_margin": min(margins) if margins else None,
               "median_margin": float(np.median(margins)) if margins else None}
    if max(eps, eps_prime) == 0:
        summary["note"] = "both tolerances are 0; additive smoothing bounds sigma by 1 instead of 0/delta"
    return _report("gfm_theorem", params, rows, passed, **summary)


def run_conflict_experiment(seed: int = 7, separation: float = 3.0, shift: float = 5.0,
                            wysiwyg_separation: float = 5.0, obs_noise: float = 0.01, eps: float = 0.5,
                            n_per_group: int = 8, within_spread: float = 0.5, delta: float | None = None,
                            min_skew_ratio: float = 5.0) -> dict:
    """The two mechanisms fail in opposite worldviews.

    Scenario ``structural_bias``: CS groups ``separation`` apart, OS shifts
    one group by ``shift``. The IFM pipeline's CS -> DS skew should exceed
    the GFM pipeline's by ``min_skew_ratio``.

    Scenario ``wysiwyg``: faithful observation with noise ``obs_noise``. The
    GFM pipeline should produce a certified fairness violation at
    ``eps' = eps + 2 * obs_noise`` while the IFM pipeline produces none.
    """
    base = WorldSpec(n_per_group=n_per_group, k=2, dim=1, within_spread=within_spread)
    s_a, s_b = trial_seed(seed, 0), trial_seed(seed, 1)

    spec_a = replace(base, group_separation=separation, observation="biased", shifts=(0.0, shift), seed=s_a)
    ifm_a, gfm_a = build_world(spec_a, "ifm"), build_world(spec_a, "gfm")
    d_a = delta
    if d_a is None:
        d_a = max(default_smoothing(ifm_a.CS, ifm_a.decisions), default_smoothing(gfm_a.CS, gfm_a.decisions))
    sk_ifm = group_skew(ifm_a.CS, ifm_a.decisions, d_a)
    sk_gfm = group_skew(gfm_a.CS, gfm_a.decisions, d_a)
    ratio = sk_ifm.sigma / sk_gfm.sigma
    bias_conflict = ratio >= min_skew_ratio

    spec_b = replace(base, group_separation=wysiwyg_separation, observation="faithful", noise=obs_noise, seed=s_b)
    ifm_b, gfm_b = build_world(spec_b, "ifm"), build_world(spec_b, "gfm")
    eps_prime = eps + 2 * obs_noise
    fair_ifm = check_fairness(ifm_b.composed, ifm_b.CS, ifm_b.DS, eps, eps_prime)
    fair_gfm = check_fairness(gfm_b.composed, gfm_b.CS, gfm_b.DS, eps, eps_prime)
    wysiwyg_conflict = (not fair_gfm.fair) and fair_ifm.fair

    def sig(world):
        dd = d_a
        return (group_skew(world.CS, world.OS, dd).sigma,
                group_skew(world.OS, pushforward(world.f, world.OS, world.DS), dd).sigma,
                group_skew(world.CS, world.decisions, dd).sigma)

    rows = [
        _row("structural_bias/ifm", *sig(ifm_a)),
        _row("structural_bias/gfm", *sig(gfm_a)),
        _row("wysiwyg/ifm", violations=len(fair_ifm.violations), bound=eps_prime,
             margin=eps_prime - fair_ifm.max_close_decision_distance),
        _row("wysiwyg/gfm", violations=len(fair_gfm.violations), bound=eps_prime,
             margin=eps_prime - fair_gfm.max_close_decision_distance),
    ]
    params = {"seed": seed, "separation": separation, "shift": shift, "wysiwyg_separation": wysiwyg_separation,
              "obs_noise": obs_noise, "eps": eps, "eps_prime": eps_prime, "n_per_group": n_per_group,
              "within_spread": within_spread, "delta": d_a, "min_skew_ratio": min_skew_ratio}
    scenarios = {
        "structural_bias": {
            "ifm_skew": sk_ifm.to_dict(), "gfm_skew": sk_gfm.to_dict(),
            "skew_ratio": ratio, "conflict": bias_conflict,
        },
        "wysiwyg": {
            "ifm_fairness": fair_ifm.to_report(), "gfm_fairness": fair_gfm.to_report(),
            "conflict": wysiwyg_conflict,
        },
    }
    report = _report("conflict", params, rows, bias_conflict and wysiwyg_conflict,
                     structural_bias_conflict=bias_conflict, wysiwyg_conflict=wysiwyg_conflict)
    report["scenarios"] = scenarios
    return report
