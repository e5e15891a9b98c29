"""Distribution comparison and Markov-chain diagnostics.

Covers total variation distance against enumerated exact distributions, the
running Bayesian (CHOG) likelihood ratio between two sample streams, click
two-point correlators, and the burn-in / thinning estimators for MIS chains.
All probability products accumulate in log space.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .clicks import _log_vacuum_prob, click_probability_exact
from .lhaf import lhaf_repeated
from .states import ComplexStateRep, build_reduced_matrix

ENUMERATION_GUARD = 10**6


@dataclass
class DistributionTable:
    """Outcome/probability pairs, renormalized after any conditioning."""

    outcomes: list
    probs: np.ndarray
    kind: str = "empirical"

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float)
        if len(self.outcomes) != len(set(self.outcomes)):
            raise ValueError("duplicate outcomes in distribution table")
        if np.any(self.probs < -1e-12):
            raise ValueError("negative probability in table")

    def as_dict(self):
        return dict(zip(self.outcomes, self.probs))


def _compositions(total, parts, cap):
    """All nonnegative integer vectors of given length summing to total."""
    if parts == 1:
        if total <= cap:
            yield (total,)
        return
    for k in range(min(total, cap) + 1):
        for rest in _compositions(total - k, parts - 1, cap):
            yield (k,) + rest


def pattern_probability(rep: ComplexStateRep, pattern, workers=1):
    """P(n) by the loop-hafnian formula (pure or mixed representation)."""
    mat, _ = build_reduced_matrix(rep, pattern)
    N = mat.shape[0]
    if N == 0:
        lh = 1.0
    else:
        lh = lhaf_repeated(mat, np.diagonal(mat), pattern=[1] * N, workers=workers)
        lh = abs(lh) ** 2 if rep.pure else lh.real
    p = rep.vacuumProb * lh / float(np.prod([math.factorial(int(k)) for k in pattern]))
    if p < -1e-10:
        raise ValueError(f"negative probability {p:.3e} for pattern {pattern}")
    return max(p, 0.0)


def exact_distribution(rep: ComplexStateRep, detector, total, n_cut=None, workers=1):
    """Enumerate the exact distribution restricted to N photons or clicks."""
    M = rep.modes
    if detector == "pnrd":
        cap = total if n_cut is None else min(n_cut, total)
        outcomes = list(_compositions(total, M, cap))
        if len(outcomes) > ENUMERATION_GUARD:
            raise ResourceWarning("outcome enumeration guard exceeded")
        probs = np.array([pattern_probability(rep, n, workers) for n in outcomes])
        kind = "pnrd-exact"
    elif detector == "threshold":
        outcomes = [c for c in itertools.product((0, 1), repeat=M) if sum(c) == total]
        if len(outcomes) > ENUMERATION_GUARD:
            raise ResourceWarning("outcome enumeration guard exceeded")
        probs = np.array([click_probability_exact(rep, c) for c in outcomes])
        kind = "click-exact"
    else:
        raise ValueError(f"unknown detector {detector!r}")
    s = probs.sum()
    if not s > 0:
        raise ValueError("all enumerated outcomes have zero probability")
    return DistributionTable(outcomes, probs / s, kind)


def empirical_distribution(samples, kind="empirical"):
    outcomes, counts = {}, 0
    for s in samples:
        key = tuple(int(v) for v in s)
        outcomes[key] = outcomes.get(key, 0) + 1
        counts += 1
    keys = sorted(outcomes)
    return DistributionTable(keys, np.array([outcomes[k] / counts for k in keys]), kind)


def tvd(p: DistributionTable, q: DistributionTable) -> float:
    """Total variation distance over the union of outcome spaces."""
    pd, qd = p.as_dict(), q.as_dict()
    keys = set(pd) | set(qd)
    return 0.5 * sum(abs(pd.get(k, 0.0) - qd.get(k, 0.0)) for k in keys)


# ---------------------------------------------------------------------------
# CHOG ratio


@dataclass
class ChogTrace:
    per_sample_log_ratios: np.ndarray
    running_ratio: np.ndarray


def chog_ratio(trial_samples, adversary_samples, ideal_rep: ComplexStateRep, workers=1) -> ChogTrace:
    """Running likelihood that the trial stream matches the ideal distribution.

    After j sample pairs the ratio is
    (1 + prod_{i<=j} P_ideal(adv_i)/P_ideal(trial_i))^{-1}, held in log space.
    Click-pattern samples are scored with the exact threshold probability.
    """
    if len(trial_samples) != len(adversary_samples):
        raise ValueError("trial and adversary streams must have equal length")

    def logp(sample):
        c = tuple(int(v) for v in sample)
        p = click_probability_exact(ideal_rep, c)
        if p <= 0:
            raise ValueError(f"ideal probability is zero for sample {c}")
        return math.log(p)

    ratios = np.array([logp(a) - logp(t) for t, a in zip(trial_samples, adversary_samples)])
    cum = np.cumsum(ratios)
    with np.errstate(over="ignore"):
        running = 1.0 / (1.0 + np.exp(np.clip(cum, -700, 700)))
    return ChogTrace(ratios, running)


# ---------------------------------------------------------------------------
# two-point correlators


def two_point_correlators_exact(rep: ComplexStateRep) -> np.ndarray:
    """C_ij = <Pi_i Pi_j> - <Pi_i><Pi_j> from marginal vacuum probabilities."""
    M = rep.modes
    pv = np.array([math.exp(_log_vacuum_prob(rep, [i])) for i in range(M)])
    C = np.zeros((M, M))
    for i in range(M):
        for j in range(i, M):
            if i == j:
                pij = pv[i]
            else:
                pij = math.exp(_log_vacuum_prob(rep, [i, j]))
            C[i, j] = C[j, i] = pij - pv[i] * pv[j]
    return C


def two_point_correlators_empirical(click_samples) -> np.ndarray:
    arr = np.asarray(click_samples, dtype=float)
    mean = arr.mean(axis=0)
    return arr.T @ arr / arr.shape[0] - np.outer(mean, mean)


def two_point_correlators(source) -> np.ndarray:
    if isinstance(source, ComplexStateRep):
        return two_point_correlators_exact(source)
    return two_point_correlators_empirical(source)


# ---------------------------------------------------------------------------
# chain diagnostics


def repeat_probability_vs_thinning(patterns, thinning_grid):
    """Fraction of consecutive kept samples that repeat, per thinning interval."""
    pats = [tuple(np.atleast_1d(p).astype(int).tolist()) for p in patterns]
    if len(pats) < 100:
        raise ValueError("chain too short for repeat-probability estimation")
    out = []
    for tau in thinning_grid:
        kept = pats[:: int(tau)]
        if len(kept) < 2:
            out.append(0.0)
            continue
        rep = sum(a == b for a, b in zip(kept[:-1], kept[1:]))
        out.append(rep / (len(kept) - 1))
    return np.asarray(thinning_grid), np.asarray(out)


def thinning_at_level(grid, repeat_probs, level=0.1):
    """Smallest thinning interval with repeat probability at or below `level`."""
    for tau, p in zip(grid, repeat_probs):
        if p <= level:
            return int(tau)
    return int(grid[-1])


def _smooth_forward(values, window):
    """values[i] replaced by the mean of values[i : i + window]."""
    v = np.asarray(values, dtype=float)
    return np.array([v[i : i + window].mean() for i in range(len(v))])


def likelihood_burnin_test(
    chain_factory,
    max_burn,
    num_chains,
    log_qn_minus_pn=0.0,
    target_likelihood=0.95,
    window=10,
    tail=20,
):
    """Burn-in estimate from the two-hypothesis likelihood of post-selected chains.

    ``chain_factory(rng_stream_index, length)`` must return a fresh chain whose
    states carry cached log-target/log-proposal values; one sample is read per
    chain at each burn-in time.  ``log_qn_minus_pn`` is log Q(N) - log P(N)
    for the post-selected photon number, estimated elsewhere by Monte Carlo.
    Returns (burn_in_estimate, sample_sizes_smoothed, likelihood_curves).
    """
    steps = max_burn + 1
    logr = np.empty((num_chains, steps))
    for c in range(num_chains):
        chain = chain_factory(c, steps)
        logr[c] = [s.log_target - s.log_proposal + log_qn_minus_pn for s in chain[:steps]]
    sizes = np.empty(steps)
    curves = np.empty((steps, num_chains))
    for t in range(steps):
        cum = np.cumsum(logr[:, t])
        like = 1.0 / (1.0 + np.exp(np.clip(-cum, -700, 700)))
        curves[t] = like
        hit = np.flatnonzero(like >= target_likelihood)
        sizes[t] = (hit[0] + 1) if hit.size else num_chains + 1
    smoothed = _smooth_forward(sizes, window)
    floor = smoothed[-tail:].mean()
    ok = np.flatnonzero(smoothed <= 1.05 * floor)
    burn = int(ok[0]) if ok.size else None
    return burn, smoothed, curves


def acceptance_rate_burnin_test(
    chain_factory, max_burn, num_chains, tolerance=0.001, window=10, tail=50
):
    """Burn-in from the decay of the per-step acceptance rate across chains.

    Returns (burn_in_estimate, smoothed_rate_curve).  The estimate is the
    first step whose smoothed acceptance rate is within `tolerance` of the
    minimum estimated from the last `tail` steps.
    """
    steps = max_burn + 1
    acc = np.zeros((num_chains, steps))
    for c in range(num_chains):
        chain = chain_factory(c, steps + 1)
        acc[c] = [1.0 if s.accepted else 0.0 for s in chain[1 : steps + 1]]
    curve = acc.mean(axis=0)
    smoothed = _smooth_forward(curve, window)
    floor = smoothed[-tail:].min() if len(smoothed) >= tail else smoothed.min()
    ok = np.flatnonzero(smoothed <= floor + tolerance)
    burn = int(ok[0]) if ok.size else None
    return burn, smoothed
