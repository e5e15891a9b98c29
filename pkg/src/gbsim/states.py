"""Gaussian-state algebra for boson-sampling simulation.

States are held as a real mean vector and covariance matrix over the
quadratures (q_1..q_M, p_1..p_M).  The hbar = 2 convention is fixed
throughout, so the vacuum covariance is the identity.  Conversion to the
complex (a, a^dagger) representation produces the matrices entering the
loop-hafnian probability formulas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import schur, sqrtm

HBAR = 2.0


class StateError(ValueError):
    """Raised for unphysical states or invalid experiment configs."""


def symplectic_form(M):
    """The 2M x 2M form Omega = [[0, I], [-I, 0]] in qqpp ordering."""
    O = np.zeros((2 * M, 2 * M))
    O[:M, M:] = np.eye(M)
    O[M:, :M] = -np.eye(M)
    return O


@dataclass(frozen=True)
class GaussianState:
    """An M-mode Gaussian state: means and covariance of (q_1..q_M, p_1..p_M)."""

    mean: np.ndarray
    cov: np.ndarray
    hbar: float = HBAR

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        if self.hbar != HBAR:
            raise StateError("only the hbar = 2 convention is supported")
        if mean.ndim != 1 or mean.size % 2:
            raise StateError("mean must have even length 2M")
        n = mean.size
        if cov.shape != (n, n):
            raise StateError("covariance shape does not match mean length")
        if np.max(np.abs(cov - cov.T)) > 1e-12:
            raise StateError("covariance is not symmetric")
        M = n // 2
        herm = cov + 1j * (self.hbar / 2) * symplectic_form(M)
        wmin = np.linalg.eigvalsh((herm + herm.conj().T) / 2).min()
        if wmin < -1e-9:
            raise StateError(f"covariance violates the uncertainty bound ({wmin:.3e})")

    @property
    def modes(self):
        return self.mean.size // 2

    def is_pure(self, tol=1e-9):
        M = self.modes
        # purity = (hbar/2)^M / sqrt(det V)
        sign, logdet = np.linalg.slogdet(self.cov)
        return sign > 0 and abs(M * math.log(self.hbar / 2) - logdet / 2) < tol


def vacuum_state(M):
    return GaussianState(np.zeros(2 * M), np.eye(2 * M))


@dataclass(frozen=True)
class ComplexStateRep:
    """The (a, a^dagger)-basis description used by the probability formulas.

    alpha and gamma are length-2M vectors; sigma, sigmaQ, O and A are 2M x 2M.
    For pure states A is block-diagonal with blocks B and conj(B) and the
    M x M half B is stored; it is None for mixed states.
    """

    alpha: np.ndarray
    sigma: np.ndarray
    sigmaQ: np.ndarray
    O: np.ndarray
    A: np.ndarray
    gamma: np.ndarray
    B: np.ndarray | None
    vacuumProb: float
    sigmaQ_inv: np.ndarray = field(repr=False, default=None)

    @property
    def modes(self):
        return self.alpha.size // 2

    @property
    def pure(self):
        return self.B is not None


def _quad_to_complex(M):
    """The linear map L with alpha = L R and sigma = L V L^dagger."""
    eye = np.eye(M)
    L = np.block([[eye, 1j * eye], [eye, -1j * eye]]) / math.sqrt(2 * HBAR)
    return L


def to_complex_rep(state: GaussianState, pure: bool | None = None) -> ComplexStateRep:
    """Convert quadrature means/covariance to the complex representation.

    ``pure`` forces or suppresses extraction of the half-size B matrix;
    by default it is taken from the state's purity.
    """
    M = state.modes
    L = _quad_to_complex(M)
    alpha = L @ state.mean
    sigma = L @ state.cov @ L.conj().T
    sigmaQ = sigma + np.eye(2 * M) / 2
    try:
        sigmaQ_inv = np.linalg.inv(sigmaQ)
    except np.linalg.LinAlgError as exc:
        raise StateError("singular Husimi covariance (unphysical state)") from exc
    O = np.eye(2 * M) - sigmaQ_inv
    X = np.block([[np.zeros((M, M)), np.eye(M)], [np.eye(M), np.zeros((M, M))]])
    A = X @ O
    gamma = alpha.conj() @ sigmaQ_inv
    sign, logdet = np.linalg.slogdet(sigmaQ)
    quad = alpha.conj() @ sigmaQ_inv @ alpha
    if abs(quad.imag) > 1e-8:
        raise StateError("complex-valued vacuum exponent (conversion bug or unphysical state)")
    vac = math.exp(-0.5 * quad.real - 0.5 * logdet)
    if pure is None:
        pure = state.is_pure()
    B = None
    if pure:
        B = A[:M, :M].copy()
        off = np.abs(A[:M, M:]).max() if M else 0.0
        if off > 1e-8:
            raise StateError("state is not pure enough for the half-size representation")
        B = (B + B.T) / 2
    return ComplexStateRep(alpha, sigma, sigmaQ, O, A, gamma, B, vac, sigmaQ_inv)


def build_reduced_matrix(rep: ComplexStateRep, pattern, beta=None):
    """The reduced loop-hafnian input for a photon pattern.

    Pure states give the N x N matrix B_n with the displacement terms
    gamma' = (alpha - beta)^dagger sigmaQ^{-1} on its diagonal; mixed states
    give the 2N x 2N doubled matrix with gamma_n on the diagonal.  Returns
    (matrix, diagonal) with the diagonal also placed in the matrix.
    """
    pattern = np.asarray(pattern, dtype=int)
    if np.any(pattern < 0):
        raise ValueError("photon pattern entries must be nonnegative")
    M = rep.modes
    if pattern.size != M:
        raise ValueError("pattern length does not match mode count")
    if beta is None:
        gamma = rep.gamma
    else:
        beta = np.asarray(beta, dtype=complex)
        gamma = (rep.alpha - beta).conj() @ rep.sigmaQ_inv
    if rep.pure:
        idx = np.repeat(np.arange(M), pattern)
        mat = rep.B[np.ix_(idx, idx)].astype(complex)
        diag = gamma[:M][idx]
    else:
        half = np.repeat(np.arange(M), pattern)
        idx = np.concatenate([half, half + M])
        mat = rep.A[np.ix_(idx, idx)].astype(complex)
        diag = gamma[idx]
    np.fill_diagonal(mat, diag)
    return mat, diag


def haar_random_unitary(dim, seed=None):
    """A Haar-distributed unitary via QR with phase-fixed R diagonal."""
    if dim < 1:
        raise ValueError("dimension must be positive")
    rng = np.random.default_rng(seed)
    Z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / math.sqrt(2)
    Q, R = np.linalg.qr(Z)
    d = np.diagonal(R)
    return Q * (d / np.abs(d))


def interferometer_symplectic(U):
    """The quadrature-basis symplectic of an M-mode linear unitary."""
    U = np.asarray(U, dtype=complex)
    if np.max(np.abs(U @ U.conj().T - np.eye(U.shape[0]))) > 1e-10:
        raise StateError("interferometer matrix is not unitary")
    return np.block([[U.real, -U.imag], [U.imag, U.real]])


def two_mode_squeeze_symplectic(M, a, b, r):
    """Symplectic matrix of a two-mode squeezer on modes (a, b)."""
    S = np.eye(2 * M)
    ch, sh = math.cosh(r), math.sinh(r)
    for i, j, s in ((a, b, sh), (b, a, sh)):
        S[i, i] = ch
        S[i, j] = s
        S[M + i, M + i] = ch
        S[M + i, M + j] = -s
    return S


def apply_symplectic(state: GaussianState, S, displacement=None):
    mean = S @ state.mean
    if displacement is not None:
        mean = mean + displacement
    return GaussianState(mean, S @ state.cov @ S.T)


def apply_loss(state: GaussianState, x):
    """Pure-loss channel: per-mode fraction x of the light is discarded."""
    M = state.modes
    x = np.broadcast_to(np.asarray(x, dtype=float), (M,))
    if np.any(x < 0) or np.any(x > 1):
        raise StateError("loss fractions must lie in [0, 1]")
    g = np.sqrt(1 - x)
    G = np.diag(np.concatenate([g, g]))
    cov = G @ state.cov @ G + (HBAR / 2) * (np.eye(2 * M) - G @ G)
    return GaussianState(G @ state.mean, cov)


@dataclass(frozen=True)
class ExperimentConfig:
    """Squeezers -> Haar interferometer -> uniform loss, plus detector knobs."""

    modes: int
    squeezing: float = 1.55
    transmission: float = 0.3
    sources: int | None = None
    unitary: np.ndarray | None = None
    unitary_seed: int | None = None
    detector: str = "pnrd"
    n_cut: int = 8
    sub_detectors: int = 12
    global_cutoff: int = 40
    rng_seed: int = 0

    def __post_init__(self):
        if self.modes < 1:
            raise StateError("need at least one mode")
        if self.sources is None:
            object.__setattr__(self, "sources", self.modes // 4)
        if 2 * self.sources > self.modes:
            raise StateError("two-mode sources need 2*sources <= modes")
        if not 0 < self.transmission <= 1:
            raise StateError("transmission must lie in (0, 1]")
        if self.detector not in ("pnrd", "threshold"):
            raise StateError(f"unknown detector {self.detector!r}")
        if self.n_cut < 1 or self.sub_detectors < 1:
            raise StateError("n_cut and sub_detectors must be >= 1")

    def resolved_unitary(self):
        if self.unitary is not None:
            U = np.asarray(self.unitary, dtype=complex)
            if U.shape != (self.modes, self.modes):
                raise StateError("unitary has the wrong dimension")
            if np.max(np.abs(U @ U.conj().T - np.eye(self.modes))) > 1e-10:
                raise StateError("supplied matrix is not unitary")
            return U
        seed = self.rng_seed if self.unitary_seed is None else self.unitary_seed
        return haar_random_unitary(self.modes, seed)


def build_experiment_state(cfg: ExperimentConfig) -> GaussianState:
    """Vacuum -> two-mode squeezers on leading pairs -> interferometer -> loss."""
    M = cfg.modes
    state = vacuum_state(M)
    for s in range(cfg.sources):
        S = two_mode_squeeze_symplectic(M, 2 * s, 2 * s + 1, cfg.squeezing)
        state = apply_symplectic(state, S)
    state = apply_symplectic(state, interferometer_symplectic(cfg.resolved_unitary()))
    return apply_loss(state, 1 - cfg.transmission)


@dataclass(frozen=True)
class WilliamsonDecomposition:
    """V = S D S^T, split into pure part T and classical noise W."""

    S: np.ndarray
    D: np.ndarray
    T: np.ndarray
    W: np.ndarray


def williamson_decompose(state: GaussianState) -> WilliamsonDecomposition:
    """Symplectic normal form of the covariance matrix.

    Follows the standard route through the skew-symmetric matrix
    V^{-1/2} Omega V^{-1/2}: its real Schur form supplies both the symplectic
    eigenvalues and, after reordering, the symplectic transformation.
    """
    V = state.cov
    n = V.shape[0]
    M = n // 2
    if np.linalg.eigvalsh(V).min() <= 0:
        raise StateError("covariance must be positive definite for normal-form splitting")
    omega = symplectic_form(M)
    Vhalf = sqrtm(V).real
    inv_half = np.linalg.inv(Vhalf)
    skew = inv_half @ omega @ inv_half
    T_s, Q = schur(skew)
    # Schur blocks [[0, d], [-d, 0]]; swap the block's columns when d < 0,
    # then send pair k to quadrature columns (k, M + k)
    d = np.diagonal(T_s, 1)[::2].copy()
    perm = np.zeros((n, n))
    for k in range(M):
        cols = (k, M + k) if d[k] > 0 else (M + k, k)
        d[k] = abs(d[k])
        perm[2 * k, cols[0]] = 1
        perm[2 * k + 1, cols[1]] = 1
    nu = 1 / d
    S = Vhalf @ Q @ perm * np.sqrt(np.concatenate([d, d]))
    D = np.diag(np.concatenate([nu, nu]))
    T = (HBAR / 2) * S @ S.T
    W = S @ (D - (HBAR / 2) * np.eye(n)) @ S.T
    W = (W + W.T) / 2
    return WilliamsonDecomposition(S=S, D=D, T=(T + T.T) / 2, W=W)


def sample_pure_displacement(dec: WilliamsonDecomposition, mean, rng):
    """Draw R' ~ Normal(mean, W), restricted to W's positive eigenspace."""
    W = dec.W
    vals, vecs = np.linalg.eigh(W)
    if vals.min() < -1e-8:
        raise StateError("classical-noise covariance has a significant negative eigenvalue")
    keep = vals > 1e-10
    z = rng.standard_normal(int(keep.sum()))
    return np.asarray(mean, dtype=float) + vecs[:, keep] @ (np.sqrt(vals[keep]) * z)


def reduce_state(state: GaussianState, modes):
    """Marginal Gaussian state on a subset of modes."""
    modes = np.asarray(modes, dtype=int)
    M = state.modes
    idx = np.concatenate([modes, modes + M])
    return GaussianState(state.mean[idx], state.cov[np.ix_(idx, idx)])


def state_to_text(state: GaussianState) -> str:
    """Fixture dump: header (M, hbar), mean line, covariance rows."""
    lines = [f"{state.modes} {state.hbar}"]
    lines.append(" ".join(f"{v:.17g}" for v in state.mean))
    for row in state.cov:
        lines.append(" ".join(f"{v:.17g}" for v in row))
    return "\n".join(lines) + "\n"


def state_from_text(text: str) -> GaussianState:
    rows = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    M_s, hbar_s = rows[0].split()
    M, hbar = int(M_s), float(hbar_s)
    mean = np.array(rows[1].split(), dtype=float)
    cov = np.array([r.split() for r in rows[2 : 2 + 2 * M]], dtype=float)
    return GaussianState(mean, cov, hbar=hbar)
