"""GBS samplers: probability chain rule and Metropolis independence sampling.

Mixed experiment states are always handled by splitting V = T + W and
drawing a pure-state displacement per sample, so the heavy kernels only ever
see pure states and work with the half-size B matrix.  Threshold detection
expands each mode into a fan-out of sub-detectors with a per-sub-detector
cutoff of one photon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .clicks import ClickSample, click_position_logprob, sample_position_given_count
from .lhaf import BatchedLhaf, lhaf_repeated
from .states import (
    HBAR,
    ComplexStateRep,
    ExperimentConfig,
    GaussianState,
    StateError,
    apply_loss,
    sample_pure_displacement,
    to_complex_rep,
    williamson_decompose,
    _quad_to_complex,
)

POST_SELECT_CAP = 10_000_000


class SamplerError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# pure-state scaffolding


class PureTemplate:
    """Mean-independent pieces of a pure state's complex representation.

    The covariance enters sigmaQ, its inverse and B; displacements only touch
    gamma and the vacuum prefactor, so per-sample work is a couple of
    mat-vecs.
    """

    def __init__(self, cov):
        M = cov.shape[0] // 2
        base = to_complex_rep(GaussianState(np.zeros(2 * M), cov), pure=True)
        self.M = M
        self.cov = cov
        self.B = base.B
        self.sigmaQ = base.sigmaQ
        self.sigmaQ_inv = base.sigmaQ_inv
        _, self.logdetQ = np.linalg.slogdet(base.sigmaQ)
        self.logdetQ = float(self.logdetQ.real)
        self._L = _quad_to_complex(M)
        # per-mode mean photon contribution of the covariance alone
        d = np.diagonal(cov)
        self.cov_photons = (d[:M] + d[M:] - HBAR) / (2 * HBAR)

    def alpha(self, mean):
        return self._L @ mean

    def mean_photons(self, mean):
        return self.cov_photons + (mean[: self.M] ** 2 + mean[self.M :] ** 2) / (2 * HBAR)

    def gamma_half(self, alpha, beta=None):
        d = alpha if beta is None else alpha - beta
        return (d.conj() @ self.sigmaQ_inv)[: self.M]

    def log_vacuum(self, alpha, beta=None):
        d = alpha if beta is None else alpha - beta
        quad = d.conj() @ self.sigmaQ_inv @ d
        return -0.5 * quad.real - 0.5 * self.logdetQ

    def pattern_logprob(self, alpha, pattern, workers=1):
        """log P(n) for the pure state displaced to alpha."""
        pattern = np.asarray(pattern, dtype=int)
        g = self.gamma_half(alpha)
        if pattern.sum() == 0:
            lg = 0.0
        else:
            val = lhaf_repeated(self.B, g, pattern=pattern, workers=workers)
            if val == 0:
                return -math.inf
            lg = 2.0 * math.log(abs(val))
        logfact = sum(math.lgamma(int(n) + 1) for n in pattern)
        return self.log_vacuum(alpha) + lg - logfact

    def rep(self, mean) -> ComplexStateRep:
        return to_complex_rep(GaussianState(mean, self.cov), pure=True)


def _sample_husimi_beta(template: PureTemplate, mean, modes, rng):
    """Coherent-basis amplitudes for a subset of modes, from the Husimi marginal."""
    M = template.M
    modes = np.asarray(modes, dtype=int)
    if modes.size == 0:
        return np.zeros(0, dtype=complex)
    idx = np.concatenate([modes, modes + M])
    cov_h = template.cov[np.ix_(idx, idx)] + (HBAR / 2) * np.eye(2 * modes.size)
    rq = np.linalg.cholesky(cov_h) @ rng.standard_normal(2 * modes.size) + mean[idx]
    return (_quad_to_complex(modes.size) @ rq)[: modes.size]


# ---------------------------------------------------------------------------
# independent pairs and singles


@dataclass
class IpsModel:
    """Poisson emission model: singles ~ |alpha_j|^2, pairs ~ |B_jk|^2.

    Probabilities are loop hafnians of the nonnegative matrix C = |B|^2 with
    |alpha|^2 on the diagonal; the lossy variant reweights C for click
    patterns observed after per-mode loss x.
    """

    B: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        self.B = np.asarray(self.B, dtype=complex)
        self.alpha = np.asarray(self.alpha, dtype=complex)
        self.pair_means = np.abs(self.B) ** 2
        self.single_means = np.abs(self.alpha) ** 2
        M = self.B.shape[0]
        self.log_prefactor = -float(self.single_means.sum()) - 0.5 * float(self.pair_means.sum())

    @property
    def modes(self):
        return self.B.shape[0]

    @classmethod
    def from_template(cls, template: PureTemplate, alpha):
        return cls(template.B, alpha[: template.M])

    def sample(self, rng):
        M = self.modes
        n = rng.poisson(self.single_means)
        n += 2 * rng.poisson(np.diagonal(self.pair_means) / 2)
        iu, ju = np.triu_indices(M, k=1)
        pairs = rng.poisson(self.pair_means[iu, ju])
        np.add.at(n, iu, pairs)
        np.add.at(n, ju, pairs)
        return n

    def log_probability(self, pattern, workers=1):
        pattern = np.asarray(pattern, dtype=int)
        C = self.pair_means.astype(complex)
        loops = self.single_means.astype(complex)
        if pattern.sum() == 0:
            lg = 0.0
        else:
            val = lhaf_repeated(C, loops, pattern=pattern, workers=workers)
            v = val.real
            if v <= 0:
                return -math.inf
            lg = math.log(v)
        logfact = sum(math.lgamma(int(n) + 1) for n in pattern)
        return self.log_prefactor + lg - logfact

    def probability(self, pattern, workers=1):
        return math.exp(self.log_probability(pattern, workers))

    def lossy_click_logprob(self, clicks, x, workers=1):
        """log Q_n(c|x, alpha): single photons at clicked modes after loss x."""
        clicks = np.asarray(clicks, dtype=int)
        x = np.asarray(x, dtype=float)
        t = 1 - x
        pm, sm = self.pair_means, self.single_means
        logpre = -float((t * sm).sum()) - 0.5 * float((pm * (1 - np.outer(x, x))).sum())
        idx = np.flatnonzero(clicks == 1)
        if idx.size == 0:
            return logpre
        C = np.outer(t, t) * pm
        diag = t * (sm + pm @ x)
        Cc = C[np.ix_(idx, idx)].astype(complex)
        val = lhaf_repeated(Cc, diag[idx].astype(complex), pattern=[1] * idx.size, workers=workers)
        v = val.real
        if v <= 0:
            return -math.inf
        return logpre + math.log(v)


def ips_sample(rep_or_model, rng):
    model = rep_or_model
    if isinstance(rep_or_model, ComplexStateRep):
        if not rep_or_model.pure:
            raise SamplerError("IPS needs the pure-state B matrix")
        M = rep_or_model.modes
        model = IpsModel(rep_or_model.B, rep_or_model.alpha[:M])
    return model.sample(rng)


def ips_probability(model: IpsModel, pattern, workers=1):
    return model.probability(pattern, workers)


# ---------------------------------------------------------------------------
# thermal sampling


def thermal_sample(state: GaussianState, rng, detector="pnrd"):
    """Exact sampling for states whose pure part carries no squeezing.

    The Williamson split then leaves coherent states with normally
    distributed amplitudes, so photon counts are conditionally Poisson.
    """
    dec = williamson_decompose(state)
    M = state.modes
    if np.linalg.norm(dec.T - np.eye(2 * M)) > 1e-6:
        raise SamplerError("state's pure part is squeezed; thermal sampling does not apply")
    rmean = sample_pure_displacement(dec, state.mean, rng)
    alpha = _quad_to_complex(M) @ rmean
    n = rng.poisson(np.abs(alpha[:M]) ** 2)
    if detector == "threshold":
        return ClickSample((n > 0).astype(int))
    return n


# ---------------------------------------------------------------------------
# chain-rule sampling


def _fanout_cov(cov, mean, K):
    """Expand M modes into M*K balanced sub-modes (vacuum ancillas)."""
    M = cov.shape[0] // 2
    n = M * K
    # orthogonal K x K block with first column 1/sqrt(K) (Householder)
    v = np.full(K, 1 / math.sqrt(K))
    w = v - np.eye(K)[:, 0]
    H = np.eye(K) - 2 * np.outer(w, w) / (w @ w) if w @ w > 1e-12 else np.eye(K)
    U = np.zeros((n, n))
    for m in range(M):
        U[m * K : (m + 1) * K, m * K : (m + 1) * K] = H
    S = np.block([[U, np.zeros((n, n))], [np.zeros((n, n)), U]])
    big_cov = np.eye(2 * n)
    big_mean = np.zeros(2 * n)
    src = np.arange(M) * K
    idx = np.concatenate([src, src + n])
    orig = np.concatenate([np.arange(M), np.arange(M) + M])
    big_cov[np.ix_(idx, idx)] = cov[np.ix_(orig, orig)]
    big_mean[idx] = mean[orig]
    return S @ big_cov @ S.T, S @ big_mean, S


class ChainRuleSampler:
    """Sequential conditional sampling with unresolved modes held coherent."""

    def __init__(self, state: GaussianState, cfg: ExperimentConfig, workers=1):
        self.cfg = cfg
        self.workers = workers
        self.M = state.modes
        self.dec = williamson_decompose(state)
        self.base_mean = state.mean
        self.template = PureTemplate(self.dec.T)
        self._template_exp = None

    @property
    def template_exp(self):
        if self._template_exp is None:
            K = self.cfg.sub_detectors
            cov_exp, _, self._fan_S = _fanout_cov(self.dec.T, np.zeros(2 * self.M), K)
            self._template_exp = PureTemplate(cov_exp)
        return self._template_exp

    def _pure_mean(self, rng):
        return sample_pure_displacement(self.dec, self.base_mean, rng)

    def sample_pnrd(self, rng):
        tmpl = self.template
        M = self.M
        mean = self._pure_mean(rng)
        order = np.lexsort((np.arange(M), tmpl.mean_photons(mean)))
        alpha = tmpl.alpha(mean)
        beta = np.zeros(2 * M, dtype=complex)
        rest = order[1:]
        bvals = _sample_husimi_beta(tmpl, mean, rest, rng)
        beta[rest] = bvals
        beta[rest + M] = bvals.conj()
        n = np.zeros(M, dtype=int)
        total = 0
        for t, m in enumerate(order):
            bvals = beta.copy()
            bvals[m] = 0.0
            bvals[m + M] = 0.0
            cut = min(self.cfg.n_cut, self.cfg.global_cutoff - total)
            if cut == 0:
                beta[m] = beta[m + M] = 0.0
                continue
            g = tmpl.gamma_half(alpha, bvals)
            batch = BatchedLhaf(tmpl.B, g, n, m, cut)
            vals = batch.values()
            w = np.abs(vals) ** 2 / np.array([math.factorial(k) for k in range(cut + 1)])
            tot = w.sum()
            if not tot > 0:
                raise SamplerError("all conditional weights vanished; raise n_cut")
            n[m] = rng.choice(cut + 1, p=w / tot)
            total += n[m]
            beta[m] = beta[m + M] = 0.0
        return n

    def sample_threshold(self, rng):
        tmpl = self.template_exp
        M, K = self.M, self.cfg.sub_detectors
        n_exp = M * K
        mean_small = self._pure_mean(rng)
        # expand the sampled pure displacement through the fan-out
        big_mean = np.zeros(2 * n_exp)
        src = np.arange(M) * K
        big_mean[src] = mean_small[:M]
        big_mean[src + n_exp] = mean_small[M:]
        mean = self._fan_S @ big_mean
        mode_photons = self.template.mean_photons(mean_small)
        order = np.lexsort((np.arange(M), mode_photons))
        alpha = tmpl.alpha(mean)
        beta = np.zeros(2 * n_exp, dtype=complex)
        first_sub = order[0] * K
        rest = np.setdiff1d(np.arange(n_exp), [first_sub])
        bvals = _sample_husimi_beta(tmpl, mean, rest, rng)
        beta[rest] = bvals
        beta[rest + n_exp] = bvals.conj()
        clicks = np.zeros(M, dtype=int)
        positions = np.zeros(M)
        pattern = np.zeros(n_exp, dtype=int)
        nclicks = 0
        for m in order:
            if nclicks >= self.cfg.global_cutoff:
                break
            subs = m * K + np.arange(K)
            # loop vectors for the successive "no click yet" scenarios
            loop_sets = []
            bwork = beta.copy()
            for j in range(K):
                bwork[subs[j]] = 0.0
                bwork[subs[j] + n_exp] = 0.0
                g = tmpl.gamma_half(alpha, bwork)
                gv = g.copy()
                gv[subs[0]] = g[subs[j]]
                loop_sets.append(gv)
            batch = BatchedLhaf(tmpl.B, loop_sets[0], pattern, subs[0], 1)
            rows = batch.values_multi(loop_sets)
            u = rng.random(K)
            for j in range(K):
                w0, w1 = abs(rows[j][0]) ** 2, abs(rows[j][1]) ** 2
                if not w0 + w1 > 0:
                    raise SamplerError("vanishing sub-detector weights")
                if u[j] < w1 / (w0 + w1):
                    clicks[m] = 1
                    positions[m] = (K - j - 1) / K
                    pattern[subs[j]] = 1
                    nclicks += 1
                    # photon found: zero the resolved sub-modes only
                    beta[subs[: j + 1]] = 0.0
                    beta[subs[: j + 1] + n_exp] = 0.0
                    break
                beta[subs[j]] = 0.0
                beta[subs[j] + n_exp] = 0.0
        return ClickSample(clicks, positions)


def chain_rule_sample_pnrd(state: GaussianState, cfg: ExperimentConfig, rng, workers=1):
    return ChainRuleSampler(state, cfg, workers).sample_pnrd(rng)


def chain_rule_sample_threshold(state: GaussianState, cfg: ExperimentConfig, rng, workers=1):
    return ChainRuleSampler(state, cfg, workers).sample_threshold(rng)


# ---------------------------------------------------------------------------
# Metropolis independence sampling


@dataclass
class MisChainState:
    pattern: object
    alpha_prime: np.ndarray
    log_target: float
    log_proposal: float
    accepted: bool
    alpha_dprime: np.ndarray | None = None
    positions: np.ndarray | None = None


class MisSampler:
    """Markov chains with IPS proposals and exact loop-hafnian targets."""

    def __init__(self, state: GaussianState, cfg: ExperimentConfig, workers=1):
        self.cfg = cfg
        self.workers = workers
        self.M = state.modes
        self.state = state
        self.dec = williamson_decompose(state)
        self.template = PureTemplate(self.dec.T)

    # ---- PNRD

    def _propose_pnrd(self, rng, post_select):
        for _ in range(POST_SELECT_CAP):
            mean = sample_pure_displacement(self.dec, self.state.mean, rng)
            alpha = self.template.alpha(mean)
            model = IpsModel.from_template(self.template, alpha)
            n = model.sample(rng)
            if post_select is None or n.sum() == post_select:
                return n, alpha, model
        raise SamplerError("post-selection cap exceeded; target photon number unreachable")

    def chain_pnrd(self, length, rng, post_select=None):
        chain = []
        n, alpha, model = self._propose_pnrd(rng, post_select)
        logp = self.template.pattern_logprob(alpha, n, self.workers)
        logq = model.log_probability(n, self.workers)
        cur = MisChainState(n, alpha, logp, logq, True)
        chain.append(cur)
        for _ in range(1, length):
            n, alpha, model = self._propose_pnrd(rng, post_select)
            logp = self.template.pattern_logprob(alpha, n, self.workers)
            logq = model.log_probability(n, self.workers)
            loga = (logp + cur.log_proposal) - (cur.log_target + logq)
            if math.log(max(rng.random(), 1e-300)) < loga:
                cur = MisChainState(n, alpha, logp, logq, True)
            else:
                cur = MisChainState(cur.pattern, cur.alpha_prime, cur.log_target, cur.log_proposal, False)
            chain.append(cur)
        return chain

    # ---- threshold

    def _propose_threshold(self, rng, post_select):
        M = self.M
        for _ in range(POST_SELECT_CAP):
            mean = sample_pure_displacement(self.dec, self.state.mean, rng)
            alpha = self.template.alpha(mean)
            model = IpsModel.from_template(self.template, alpha)
            n = model.sample(rng)
            clicks = (n > 0).astype(int)
            if post_select is not None and clicks.sum() != post_select:
                continue
            x = np.zeros(M)
            for m in np.flatnonzero(clicks):
                x[m] = sample_position_given_count(int(n[m]), rng)
            sample = ClickSample(clicks, x)
            logq = model.lossy_click_logprob(clicks, x, self.workers)
            # loss-adjusted pure state and its re-purification
            lossy = apply_loss(GaussianState(mean, self.template.cov), x)
            dec2 = williamson_decompose(lossy)
            tmpl2 = PureTemplate(dec2.T)
            mean2 = sample_pure_displacement(dec2, lossy.mean, rng)
            alpha2 = tmpl2.alpha(mean2)
            # the 1/(1-x) position factors are common to target and proposal
            # densities and cancel in the acceptance ratio, leaving P_n / Q_n
            logp = tmpl2.pattern_logprob(alpha2, clicks, self.workers)
            return sample, alpha, alpha2, logp, logq
        raise SamplerError("post-selection cap exceeded; target click number unreachable")

    def chain_threshold(self, length, rng, post_select=None):
        chain = []
        sample, alpha, alpha2, logp, logq = self._propose_threshold(rng, post_select)
        cur = MisChainState(sample, alpha, logp, logq, True, alpha2, sample.positions)
        chain.append(cur)
        for _ in range(1, length):
            sample, alpha, alpha2, logp, logq = self._propose_threshold(rng, post_select)
            loga = (logp + cur.log_proposal) - (cur.log_target + logq)
            if math.log(max(rng.random(), 1e-300)) < loga:
                cur = MisChainState(sample, alpha, logp, logq, True, alpha2, sample.positions)
            else:
                cur = MisChainState(
                    cur.pattern, cur.alpha_prime, cur.log_target, cur.log_proposal, False, cur.alpha_dprime, cur.positions
                )
            chain.append(cur)
        return chain


def mis_chain_pnrd(state, cfg, chain_length, rng, post_select=None, workers=1):
    return MisSampler(state, cfg, workers).chain_pnrd(chain_length, rng, post_select)


def mis_chain_threshold(state, cfg, chain_length, rng, post_select=None, workers=1):
    return MisSampler(state, cfg, workers).chain_threshold(chain_length, rng, post_select)


def thin_chain(chain, burn_in=0, thin=1):
    """Patterns kept after discarding burn-in and keeping 1 in `thin`."""
    return [s.pattern for s in chain[burn_in::thin]]
