"""Threshold-detector probabilities.

Two routes are provided: the exact 2^{N_c}-term inclusion/exclusion over
vacuum probabilities of reduced states (the validation reference), and the
click-with-position density built on N_c x N_c loop hafnians that the
samplers use, where x_m is the fraction of a mode's sub-detectors ignored
after its first click.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lhaf import lhaf_repeated
from .states import ComplexStateRep, StateError

MAX_CLICKS = 26


@dataclass(frozen=True)
class ClickSample:
    """Binary click vector with per-click positions x in [0, 1)."""

    clicks: np.ndarray
    positions: np.ndarray | None = None

    def __post_init__(self):
        clicks = np.asarray(self.clicks, dtype=int)
        object.__setattr__(self, "clicks", clicks)
        if not np.all((clicks == 0) | (clicks == 1)):
            raise ValueError("clicks must be 0/1")
        if self.positions is None:
            object.__setattr__(self, "positions", np.zeros(clicks.size))
        else:
            pos = np.asarray(self.positions, dtype=float)
            object.__setattr__(self, "positions", pos)
            if pos.shape != clicks.shape:
                raise ValueError("positions length must match clicks")
            if np.any(pos[clicks == 0] != 0):
                raise ValueError("positions must be zero on no-click modes")
            if np.any(pos < 0) or np.any(pos >= 1):
                raise ValueError("positions must lie in [0, 1)")

    @property
    def click_count(self):
        return int(self.clicks.sum())


def _log_vacuum_prob(rep: ComplexStateRep, modes):
    """log P(vacuum) of the marginal state on a subset of modes.

    Marginalizing a Gaussian state is just row/column selection in the
    (a, a^dagger) representation, so the subset's Husimi covariance is a
    submatrix of the full sigmaQ.
    """
    modes = np.asarray(modes, dtype=int)
    if modes.size == 0:
        return 0.0
    idx = np.concatenate([modes, modes + rep.modes])
    sq = rep.sigmaQ[np.ix_(idx, idx)]
    al = rep.alpha[idx]
    sign, logdet = np.linalg.slogdet(sq)
    if sign.real <= 0:
        raise StateError("reduced Husimi covariance is not positive")
    quad = al.conj() @ np.linalg.solve(sq, al)
    return float(-0.5 * quad.real - 0.5 * logdet.real)


def click_probability_exact(rep: ComplexStateRep, clicks) -> float:
    """Exact threshold probability by inclusion/exclusion over vacuum patterns.

    P(c) = sum over subsets Z of the clicked modes of
    (-1)^|Z| P(vacuum on Z and on all unclicked modes).
    """
    clicks = np.asarray(clicks, dtype=int)
    clicked = np.flatnonzero(clicks == 1)
    unclicked = np.flatnonzero(clicks == 0)
    nc = clicked.size
    if nc > MAX_CLICKS:
        raise ResourceWarning(f"click pattern with {nc} clicks exceeds the 2^{MAX_CLICKS}-term guard")
    total = 0.0
    for mask in range(1 << nc):
        sub = clicked[[b for b in range(nc) if mask >> b & 1]]
        modes = np.concatenate([sub, unclicked])
        sign = -1.0 if bin(mask).count("1") % 2 else 1.0
        total += sign * math.exp(_log_vacuum_prob(rep, modes))
    if total < -1e-10:
        raise StateError(f"negative click probability {total:.3e}")
    return max(total, 0.0)


def sample_position_given_count(n: int, rng) -> float:
    """Position of the first click among many sub-detectors: p(x|n) = n x^(n-1)."""
    if n < 1:
        raise ValueError("position is defined only for modes with photons")
    return float(rng.random() ** (1.0 / n))


def click_position_logprob(rep: ComplexStateRep, sample: ClickSample, alpha_dprime=None, workers=1):
    """log of P_n(c|x, alpha'') / prod_m (1 - x_m) for a pure loss-adjusted state.

    ``rep`` must be the pure state obtained by applying the loss vector x
    (sample.positions) to the pre-loss state; ``alpha_dprime`` optionally
    overrides its displacement (doubled length-2M convention).  The result is
    the joint click/position density used as the MIS target.
    """
    if not rep.pure:
        raise StateError("click/position densities need the pure-state representation")
    x = sample.positions
    if np.any(x[sample.clicks == 1] >= 1.0):
        raise StateError("position x = 1 means a fully ignored mode; undefined density")
    M = rep.modes
    if alpha_dprime is None:
        alpha = rep.alpha
        logvac = math.log(rep.vacuumProb)
    else:
        alpha = np.asarray(alpha_dprime, dtype=complex)
        quad = alpha.conj() @ rep.sigmaQ_inv @ alpha
        _, logdet = np.linalg.slogdet(rep.sigmaQ)
        logvac = -0.5 * quad.real - 0.5 * logdet
    gamma = (alpha.conj() @ rep.sigmaQ_inv)[:M]
    clicked = np.flatnonzero(sample.clicks == 1)
    if clicked.size == 0:
        return logvac
    mat = rep.B[np.ix_(clicked, clicked)].astype(complex)
    np.fill_diagonal(mat, gamma[clicked])
    lh = lhaf_repeated(mat, np.diagonal(mat), pattern=[1] * clicked.size, workers=workers)
    mag = abs(lh)
    if mag == 0.0:
        return -math.inf
    return logvac + 2.0 * math.log(mag) - float(np.log1p(-x[clicked]).sum())


def click_position_probability(rep: ComplexStateRep, sample: ClickSample, alpha_dprime=None, workers=1) -> float:
    return math.exp(click_position_logprob(rep, sample, alpha_dprime, workers))
