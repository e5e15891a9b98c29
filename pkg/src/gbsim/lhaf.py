"""Loop hafnian kernels.

The loop hafnian of an N x N symmetric matrix is the sum over all single-pair
matchings of the index set, with pairs weighted by off-diagonal entries and
singletons ("loops") by diagonal entries.  This module provides:

* ``lhaf_bruteforce`` -- exact enumeration, the oracle for everything else.
* ``lhaf_eigenvalue_trace`` -- inclusion/exclusion over a fixed perfect
  matching, O(N^3 2^(N/2)).
* ``lhaf_fds`` -- finite difference sieve, same cost, much better numerical
  error accumulation; the default kernel.
* ``matched_reps`` / ``lhaf_repeated`` -- greedy pairing of collision patterns
  followed by a merged sum with only prod(eta_h + 1) terms.
* ``BatchedLhaf`` -- all values of one "batched" mode from 0 to a cutoff,
  sharing the cubic-cost eigenvalue work between outcomes (and between loop
  weight vectors, for threshold sub-detector sweeps).

Every kernel works on a "mode-level" description: a symmetric matrix ``B``
of couplings, a vector of loop weights, and a pairing with repetition counts.
Repeating a pair eta times is equivalent to giving it weight z in the fixed
perfect matching and summing z over 0..eta with binomial weights; copies of
the same mode couple through the corresponding entry of ``B`` itself, so the
diagonal of ``B`` carries the copy-copy couplings while loop weights live in
the separate vector.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

_BLOCK = 2048  # terms per reduction block; fixed so results are worker-count independent


MAX_TERMS = 2**30


class KernelError(RuntimeError):
    """Raised when a kernel guard trips or an eigensolve fails."""


# ---------------------------------------------------------------------------
# brute force oracle


def lhaf_bruteforce(A: np.ndarray) -> complex:
    """Exact loop hafnian by recursive enumeration of single-pair matchings.

    Guarded to N <= 14; the number of matchings is the involution number,
    which is super-exponential.
    """
    A = np.asarray(A, dtype=complex)
    n = A.shape[0]
    if n == 0:
        return 1.0 + 0j
    if A.shape != (n, n):
        raise ValueError("matrix must be square")
    if n > 14:
        raise KernelError(f"brute force guard: N={n} > 14")

    def rec(rem: tuple) -> complex:
        if not rem:
            return 1.0 + 0j
        i, rest = rem[0], rem[1:]
        total = A[i, i] * rec(rest)
        for pos, j in enumerate(rest):
            total += A[i, j] * rec(rest[:pos] + rest[pos + 1 :])
        return total

    return rec(tuple(range(n)))


# ---------------------------------------------------------------------------
# pair matchings


@dataclass
class PairMatching:
    """A fixed perfect matching with repetition counts.

    ``pairs[h] = (i, j)`` is repeated ``reps[h]`` times; ``odd_loop`` is the
    leftover unpaired mode when the photon total is odd.
    """

    pairs: list = field(default_factory=list)
    reps: list = field(default_factory=list)
    odd_loop: int | None = None

    @property
    def total(self) -> int:
        return 2 * int(sum(self.reps)) + (1 if self.odd_loop is not None else 0)

    @property
    def term_count(self) -> int:
        # the leftover odd photon is paired with a phantom loop mode, which
        # enters the inclusion/exclusion sum like a pair repeated once
        out = 2 if self.odd_loop is not None else 1
        for e in self.reps:
            out *= e + 1
        return out


def matched_reps(pattern) -> PairMatching:
    """Greedy pairing of a photon pattern to maximise repeated pairs.

    Repeatedly sorts modes by remaining count (ties to the lower mode index),
    self-pairs the top mode when it dominates (n1 >= 2 n2), otherwise pairs
    the top two modes n2 times.  Deterministic.
    """
    n = np.asarray(pattern, dtype=int)
    if np.any(n < 0):
        raise ValueError("pattern entries must be nonnegative")
    counts = {m: int(c) for m, c in enumerate(n) if c > 0}
    pairs, reps = [], []
    while sum(counts.values()) > 1:
        order = sorted(counts, key=lambda m: (-counts[m], m))
        m1 = order[0]
        n1 = counts[m1]
        n2 = counts[order[1]] if len(order) > 1 else 0
        if n1 >= 2 * n2:
            r = n1 // 2
            pairs.append((m1, m1))
            reps.append(r)
            counts[m1] -= 2 * r
        else:
            m2 = order[1]
            pairs.append((m1, m2))
            reps.append(n2)
            counts[m1] -= n2
            counts[m2] -= n2
        counts = {m: c for m, c in counts.items() if c > 0}
    odd = next(iter(counts), None)
    return PairMatching(pairs=pairs, reps=reps, odd_loop=odd)


def expand_pattern(B: np.ndarray, loops: np.ndarray, matching: PairMatching) -> np.ndarray:
    """Materialise the expanded matrix a matching describes (for oracles)."""
    slots = []
    for (i, j), e in zip(matching.pairs, matching.reps):
        for _ in range(e):
            slots.extend((i, j))
    if matching.odd_loop is not None:
        slots.append(matching.odd_loop)
    slots = np.array(slots, dtype=int)
    A = np.asarray(B, dtype=complex)[np.ix_(slots, slots)].copy()
    np.fill_diagonal(A, np.asarray(loops, dtype=complex)[slots])
    return A


# ---------------------------------------------------------------------------
# numba core: one merged term


@njit(cache=True, nogil=True)
def _series_exp(c, R):
    # coefficients of exp(sum_k c[k] lambda^k) up to degree R
    e = np.zeros(R + 1, dtype=np.complex128)
    e[0] = 1.0
    for m in range(1, R + 1):
        s = 0.0 + 0.0j
        kmax = m if m < R else R
        for k in range(1, kmax + 1):
            if c[k] != 0.0:
                s += k * c[k] * e[m - k]
        e[m] = s / m
    return e


@njit(cache=True, nogil=True)
def _f_series(C, v, z, R):
    """Coefficients e[0..R] of exp(sum_k c_k lambda^k) for one merged term.

    c_k = Tr((C Xz)^k)/(2k) + (v Xz (C Xz)^(k-1) v^T)/2, with Xz the weighted
    swap matrix built from z.  The trace part comes from eigenvalues (the only
    cubic step); the loop part only needs iterated row-vector products.
    """
    K = z.shape[0]
    n = 2 * K
    CX = np.empty((n, n), dtype=np.complex128)
    for col in range(n):
        src = col + K if col < K else col - K
        w = z[col] if col < K else z[col - K]
        for row in range(n):
            CX[row, col] = C[row, src] * w
    lam = np.linalg.eigvals(CX)
    c = np.zeros(R + 1, dtype=np.complex128)
    u = np.empty(n, dtype=np.complex128)
    for j in range(n):
        src = j + K if j < K else j - K
        w = z[j] if j < K else z[j - K]
        u[j] = v[src] * w
    p = np.ones(n, dtype=np.complex128)
    for k in range(1, R + 1):
        tr = 0.0 + 0.0j
        for i in range(n):
            p[i] = p[i] * lam[i]
            tr += p[i]
        loop = 0.0 + 0.0j
        for i in range(n):
            loop += u[i] * v[i]
        c[k] = tr / (2.0 * k) + loop / 2.0
        if k < R:
            u = u @ CX
    return _series_exp(c, R)


@njit(cache=True, nogil=True)
def _merged_block(B, loops, pidx, eta, R, fds, start, end):
    """Partial sum of merged terms with mixed-radix indices in [start, end).

    ``pidx`` is (H, 2) mode indices per pair.  For the inclusion/exclusion
    kernel (``fds`` false) digit h is z_h in 0..eta_h with weight
    (-1)^(R - sum z) * prod C(eta_h, z_h).  For the finite difference sieve,
    digit h is u_h with z_h = eta_h - 2 u_h, weight prod (-1)^u C(eta_h, u)
    divided by 2^R; terms whose first nonzero z is negative are skipped and
    their mirror counted twice.
    """
    H = pidx.shape[0]
    digits = np.zeros(H, dtype=np.int64)
    zval = np.zeros(H, dtype=np.float64)
    total = 0.0 + 0.0j
    for t in range(start, end):
        rem = t
        for h in range(H):
            digits[h] = rem % (eta[h] + 1)
            rem //= eta[h] + 1
        mult = 1.0
        if fds:
            skip = False
            seen = False
            for h in range(H):
                zval[h] = eta[h] - 2.0 * digits[h]
                if not seen and zval[h] != 0.0:
                    seen = True
                    if zval[h] < 0.0:
                        skip = True
            if skip:
                continue
            if seen:
                mult = 2.0
        else:
            for h in range(H):
                zval[h] = float(digits[h])
        K = 0
        for h in range(H):
            if zval[h] != 0.0:
                K += 1
        if K == 0:
            continue
        C = np.empty((2 * K, 2 * K), dtype=np.complex128)
        v = np.empty(2 * K, dtype=np.complex128)
        z = np.empty(K, dtype=np.float64)
        s = 0
        for h in range(H):
            if zval[h] != 0.0:
                z[s] = zval[h]
                s += 1
        s = 0
        modes = np.empty(2 * K, dtype=np.int64)
        for h in range(H):
            if zval[h] != 0.0:
                modes[s] = pidx[h, 0]
                modes[s + K] = pidx[h, 1]
                s += 1
        for a in range(2 * K):
            v[a] = loops[modes[a]]
            for b in range(2 * K):
                C[a, b] = B[modes[a], modes[b]]
        e = _f_series(C, v, z, R)
        w = 1.0
        zsum = 0
        for h in range(H):
            d = digits[h]
            zsum += d
            # binomial C(eta_h, d)
            num = 1.0
            for q in range(d):
                num = num * (eta[h] - q) / (q + 1)
            w *= num
        if fds:
            sign = -1.0 if (zsum % 2) else 1.0
        else:
            sign = -1.0 if ((R - zsum) % 2) else 1.0
        total += mult * sign * w * e[R]
    return total


def _tree_sum(values):
    vals = list(values)
    if not vals:
        return 0.0 + 0.0j
    while len(vals) > 1:
        nxt = []
        for i in range(0, len(vals) - 1, 2):
            nxt.append(vals[i] + vals[i + 1])
        if len(vals) % 2:
            nxt.append(vals[-1])
        vals = nxt
    return vals[0]


def _pad_odd(B, loops, pairs, reps, odd_mode):
    """Append a phantom mode (loop weight 1, zero couplings) pairing the odd
    leftover; this leaves the loop hafnian unchanged and makes N even."""
    M = B.shape[0]
    B2 = np.zeros((M + 1, M + 1), dtype=complex)
    B2[:M, :M] = B
    loops2 = np.concatenate([loops, [1.0 + 0j]])
    return B2, loops2, pairs + [(odd_mode, M)], list(reps) + [1]


def _merged_sum(B, loops, pairs, reps, fds, workers=1, max_terms=MAX_TERMS):
    B = np.ascontiguousarray(B, dtype=complex)
    loops = np.ascontiguousarray(loops, dtype=complex)
    if not pairs:
        return 1.0 + 0j
    pidx = np.array(pairs, dtype=np.int64).reshape(len(pairs), 2)
    eta = np.array(reps, dtype=np.int64)
    R = int(eta.sum())
    nterms = int(np.prod(eta + 1.0))
    if nterms > max_terms:
        raise KernelError(f"term guard: {nterms} terms exceeds limit {max_terms}")
    blocks = [(s, min(s + _BLOCK, nterms)) for s in range(0, nterms, _BLOCK)]
    if workers <= 1 or len(blocks) == 1:
        partial = [_merged_block(B, loops, pidx, eta, R, fds, s, e) for s, e in blocks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            partial = list(
                pool.map(lambda be: _merged_block(B, loops, pidx, eta, R, fds, be[0], be[1]), blocks)
            )
    out = _tree_sum(partial)
    if fds:
        out /= 2.0**R
    return out


# ---------------------------------------------------------------------------
# public kernels


def _as_mode_level(A):
    """Treat a plain expanded matrix as mode-level input with unit pattern."""
    A = np.asarray(A, dtype=complex)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("matrix must be square")
    if n and np.max(np.abs(A - A.T)) > 1e-12 * max(1.0, np.max(np.abs(A))):
        raise ValueError("matrix must be symmetric")
    loops = np.diag(A).copy()
    return A, loops


def _plain_matching(n):
    if n % 2:
        pairs = [(i, n // 2 + i) for i in range(n // 2)]
        return pairs, [1] * (n // 2), n - 1  # last index leftover
    pairs = [(i, n // 2 + i) for i in range(n // 2)]
    return pairs, [1] * (n // 2), None


def lhaf_eigenvalue_trace(A: np.ndarray, workers: int = 1) -> complex:
    """Loop hafnian by inclusion/exclusion over pairs (eigenvalue-trace)."""
    A, loops = _as_mode_level(A)
    n = A.shape[0]
    if n == 0:
        return 1.0 + 0j
    if n % 2:
        pairs = [(2 * i, 2 * i + 1) for i in range((n - 1) // 2)]
        B2, l2, pairs, reps = _pad_odd(A, loops, pairs, [1] * len(pairs), n - 1)
        return _merged_sum(B2, l2, pairs, reps, fds=False, workers=workers)
    pairs = [(i, n // 2 + i) for i in range(n // 2)]
    return _merged_sum(A, loops, pairs, [1] * (n // 2), fds=False, workers=workers)


def lhaf_fds(A: np.ndarray, workers: int = 1) -> complex:
    """Loop hafnian by the finite difference sieve; the default kernel."""
    A, loops = _as_mode_level(A)
    n = A.shape[0]
    if n == 0:
        return 1.0 + 0j
    if n % 2:
        pairs = [(2 * i, 2 * i + 1) for i in range((n - 1) // 2)]
        B2, l2, pairs, reps = _pad_odd(A, loops, pairs, [1] * len(pairs), n - 1)
        return _merged_sum(B2, l2, pairs, reps, fds=True, workers=workers)
    pairs = [(i, n // 2 + i) for i in range(n // 2)]
    return _merged_sum(A, loops, pairs, [1] * (n // 2), fds=True, workers=workers)


def lhaf_repeated(
    B: np.ndarray,
    loops: np.ndarray,
    pattern=None,
    matching: PairMatching | None = None,
    method: str = "fds",
    workers: int = 1,
) -> complex:
    """Loop hafnian of the pattern-expanded matrix using the collision speedup.

    ``B`` and ``loops`` are mode-level; either a photon ``pattern`` (greedy
    matching is computed) or an explicit ``matching`` must be given.
    ``method`` selects the merged inclusion/exclusion sum (``"et"``) or the
    finite difference sieve (``"fds"``).
    """
    if matching is None:
        if pattern is None:
            raise ValueError("need a pattern or a matching")
        matching = matched_reps(pattern)
    B = np.asarray(B, dtype=complex)
    loops = np.asarray(loops, dtype=complex)
    pairs, reps = list(matching.pairs), list(matching.reps)
    if matching.odd_loop is not None:
        B, loops, pairs, reps = _pad_odd(B, loops, pairs, reps, matching.odd_loop)
    if not pairs:
        return 1.0 + 0j
    if method not in ("et", "fds"):
        raise ValueError(f"unknown method {method!r}")
    return _merged_sum(B, loops, pairs, reps, fds=(method == "fds"), workers=workers)


def f_coefficient(C: np.ndarray, v: np.ndarray, weights: np.ndarray, degree: int | None = None) -> complex:
    """The lambda^(N/2) coefficient of the trace/loop polynomial for one term.

    ``C`` is the 2K x 2K slot matrix, ``v`` its loop weights and ``weights``
    the K pair weights (inclusion counts or sieve signs).
    """
    C = np.ascontiguousarray(C, dtype=complex)
    v = np.ascontiguousarray(v, dtype=complex)
    z = np.ascontiguousarray(weights, dtype=float)
    K = z.shape[0]
    if C.shape != (2 * K, 2 * K) or v.shape != (2 * K,):
        raise ValueError("C must be 2K x 2K and v length 2K for K weights")
    if K == 0:
        return 0.0 + 0j
    R = K if degree is None else int(degree)
    return complex(_f_series(C, v, z, R)[R])


# ---------------------------------------------------------------------------
# batched evaluation


@njit(cache=True, nogil=True)
def _zs_exp_series(p0, U0V, U0C, DV, DC, vb, t, Rmax):
    """Series e[0..Rmax] for one self-pair weight t, from rank-one identities.

    The self-pair contributes A(t) = A0 + t c d^T (both of its columns are the
    same B[:, b] column), so det(I - xA(t)) = det(I - xA0) (1 - t x G(x)) with
    G(x) = sum_i (d^T A0^i c) x^i, and Sherman-Morrison gives the loop chain.
    p0 holds power sums of A0's eigenvalues; U0V/U0C/DV/DC are the scalar
    chains u0 A0^i v, u0 A0^i c, d A0^i v, d A0^i c.
    """
    R1 = Rmax + 1
    y = np.zeros(R1, dtype=np.complex128)
    for i in range(1, R1):
        y[i] = t * DC[i - 1]
    # -log(1 - y) up to degree Rmax
    neglog = np.zeros(R1, dtype=np.complex128)
    ypow = y.copy()
    for m in range(1, R1):
        allzero = True
        for i in range(R1):
            if ypow[i] != 0:
                allzero = False
            neglog[i] += ypow[i] / m
        if allzero or m == Rmax:
            break
        newp = np.zeros(R1, dtype=np.complex128)
        for i in range(R1):
            if ypow[i] != 0:
                for j in range(1, R1 - i):
                    newp[i + j] += ypow[i] * y[j]
        ypow = newp
    # loop chain L(x) = x (U0V + t vb DV) + t x^2 DV (U0C + t vb G) / (1 - y)
    N2 = np.zeros(R1, dtype=np.complex128)
    for i in range(Rmax - 1):
        a = t * (U0C[i] + t * vb * DC[i])
        if a != 0:
            for j in range(R1 - 2 - i):
                N2[i + j + 2] += a * DV[j]
    L2 = np.zeros(R1, dtype=np.complex128)
    for i in range(R1):
        s = N2[i]
        for j in range(1, i + 1):
            if y[j] != 0:
                s += y[j] * L2[i - j]
        L2[i] = s
    c = np.zeros(R1, dtype=np.complex128)
    for k in range(1, R1):
        pk = p0[k] + k * neglog[k]
        lk = L2[k]
        if k - 1 < R1 - 1:
            lk += U0V[k - 1] + t * vb * DV[k - 1]
        c[k] = pk / (2.0 * k) + lk / 2.0
    return _series_exp(c, Rmax)


@njit(cache=True, nogil=True)
def _batched_core(B, loops_rows, pidx, eta, b, lf, ncut, Nf):
    """Accumulate out[r, k] = lhaf for batched count k, per loop-weight row.

    One eigendecomposition per inclusion configuration of the non-batched
    pairs (and per parity family); the batched self-pair weight sweep and the
    photon-count axis both reuse it through ``_zs_exp_series``.
    """
    Mp = B.shape[0]
    phantom = Mp - 1
    nrows = loops_rows.shape[0]
    H = pidx.shape[0]
    smax = ncut // 2
    base_pairs = 0
    nterms = 1
    for h in range(H):
        base_pairs += eta[h]
        nterms *= eta[h] + 1
    Rmax = base_pairs + smax + 1
    R1 = Rmax + 1
    out = np.zeros((nrows, ncut + 1), dtype=np.complex128)
    nfe = Nf % 2 == 0
    digits = np.zeros(H, dtype=np.int64)
    binom = np.zeros((smax + 1, smax + 1))
    for n_ in range(smax + 1):
        binom[n_, 0] = 1.0
        for k_ in range(1, n_ + 1):
            binom[n_, k_] = binom[n_ - 1, k_ - 1] + (binom[n_ - 1, k_] if k_ <= n_ - 1 else 0.0)
    for term in range(nterms):
        rem = term
        zsum_f = 0
        wf = 1.0
        for h in range(H):
            digits[h] = rem % (eta[h] + 1)
            rem //= eta[h] + 1
            zsum_f += digits[h]
            num = 1.0
            for q in range(digits[h]):
                num = num * (eta[h] - q) / (q + 1)
            wf *= num
        # families: 0 = no extra pair included; 1 = odd-k extra; 2 = even-k
        # extra (only when the fixed total is odd)
        for fam in range(3):
            if fam == 1:
                e0 = b if nfe else lf
                e1 = phantom if nfe else b
            elif fam == 2:
                if nfe:
                    continue
                e0 = lf
                e1 = phantom
            else:
                e0 = -1
                e1 = -1
            K = 1  # the self pair
            for h in range(H):
                if digits[h] > 0:
                    K += 1
            if fam > 0:
                K += 1
            n = 2 * K
            first = np.empty(K, dtype=np.int64)
            second = np.empty(K, dtype=np.int64)
            zval = np.zeros(K, dtype=np.float64)
            s = 0
            for h in range(H):
                if digits[h] > 0:
                    first[s] = pidx[h, 0]
                    second[s] = pidx[h, 1]
                    zval[s] = float(digits[h])
                    s += 1
            if fam > 0:
                first[s] = e0
                second[s] = e1
                zval[s] = 1.0
                s += 1
            first[s] = b
            second[s] = b
            zval[s] = 0.0  # self-pair weight handled by the rank-one sweep
            a1 = K - 1
            a2 = 2 * K - 1
            modes = np.empty(n, dtype=np.int64)
            for i in range(K):
                modes[i] = first[i]
                modes[K + i] = second[i]
            A0 = np.zeros((n, n), dtype=np.complex128)
            for col in range(n):
                src = col + K if col < K else col - K
                w = zval[col] if col < K else zval[col - K]
                if w != 0.0:
                    for row in range(n):
                        A0[row, col] = B[modes[row], modes[src]] * w
            cvec = np.empty(n, dtype=np.complex128)
            for row in range(n):
                cvec[row] = B[modes[row], b]
            lam = np.linalg.eigvals(A0)
            p0 = np.zeros(R1, dtype=np.complex128)
            pw = np.ones(n, dtype=np.complex128)
            for k_ in range(1, R1):
                s_ = 0.0 + 0.0j
                for i in range(n):
                    pw[i] = pw[i] * lam[i]
                    s_ += pw[i]
                p0[k_] = s_
            # shared c-chains
            DC = np.zeros(R1, dtype=np.complex128)
            ychains = np.empty((R1, n), dtype=np.complex128)
            yc = cvec.copy()
            for i in range(R1):
                for j in range(n):
                    ychains[i, j] = yc[j]
                DC[i] = yc[a1] + yc[a2]
                if i < Rmax:
                    yc = A0 @ yc
            for r in range(nrows):
                loops = loops_rows[r]
                v = np.empty(n, dtype=np.complex128)
                u0 = np.zeros(n, dtype=np.complex128)
                for j in range(n):
                    v[j] = loops[modes[j]]
                for j in range(n):
                    src = j + K if j < K else j - K
                    w = zval[j] if j < K else zval[j - K]
                    u0[j] = loops[modes[src]] * w
                vb = loops[b]
                U0V = np.zeros(R1, dtype=np.complex128)
                U0C = np.zeros(R1, dtype=np.complex128)
                DV = np.zeros(R1, dtype=np.complex128)
                xv = v.copy()
                for i in range(R1):
                    sv = 0.0 + 0.0j
                    sc = 0.0 + 0.0j
                    for j in range(n):
                        sv += u0[j] * xv[j]
                        sc += u0[j] * ychains[i, j]
                    U0V[i] = sv
                    U0C[i] = sc
                    DV[i] = xv[a1] + xv[a2]
                    if i < Rmax:
                        xv = A0 @ xv
                for zs in range(smax + 1):
                    e = _zs_exp_series(p0, U0V, U0C, DV, DC, vb, float(zs), Rmax)
                    for k in range(ncut + 1):
                        sk = k // 2
                        if zs > sk:
                            continue
                        if k % 2 == 0:
                            if fam == 1:
                                continue
                            E = 0 if nfe else 1
                            zx = 1 if fam == 2 else 0
                        else:
                            if fam == 2:
                                continue
                            E = 1
                            zx = 1 if fam == 1 else 0
                        Rtot = base_pairs + sk + E
                        sign = -1.0 if (Rtot - (zsum_f + zx + zs)) % 2 else 1.0
                        out[r, k] += sign * wf * binom[sk, zs] * e[Rtot]
    return out


class BatchedLhaf:
    """All loop hafnians for one batched mode taking values 0..n_cut.

    The fixed part of the pattern is paired once with ``matched_reps``; the
    batched mode contributes floor(k/2) copies of a self-pair plus, for odd
    totals, a leftover loop completed with either the fixed pattern's own odd
    leftover or a phantom mode.  Each inclusion configuration's eigenvalue
    step is computed once and reused across every batched value it feeds,
    and across alternative loop-weight vectors (helpful when only detector
    displacements differ, as for threshold sub-detectors).
    """

    def __init__(self, B, loops, fixed_pattern, batched_mode, n_cut):
        self.B0 = np.asarray(B, dtype=complex)
        self.M = self.B0.shape[0]
        self.loops0 = np.asarray(loops, dtype=complex)
        self.b = int(batched_mode)
        self.n_cut = int(n_cut)
        fixed = np.asarray(fixed_pattern, dtype=int)
        if fixed[self.b] != 0:
            raise ValueError("batched mode must be absent from the fixed pattern")
        self.Nf = int(fixed.sum())
        self.match = matched_reps(fixed)
        # Pad with one phantom mode (zero couplings, unit loop); it completes
        # whichever single loop is left over for a given parity of the total.
        M = self.M
        Bp = np.zeros((M + 1, M + 1), dtype=complex)
        Bp[:M, :M] = self.B0
        self.Bp = Bp
        self.phantom = M
        if self.match.pairs:
            self._pidx = np.array(self.match.pairs, dtype=np.int64).reshape(-1, 2)
            self._eta = np.array(self.match.reps, dtype=np.int64)
        else:
            self._pidx = np.zeros((0, 2), dtype=np.int64)
            self._eta = np.zeros(0, dtype=np.int64)
        self._lf = -1 if self.match.odd_loop is None else int(self.match.odd_loop)

    def values(self, loops=None):
        """Array v[k] = lhaf of the expanded matrix with batched count k."""
        return self.values_multi([self.loops0 if loops is None else loops])[0]

    def values_multi(self, loop_sets):
        """One row of batched values per loop-weight vector, sharing all
        eigenvalue work between rows (couplings are identical)."""
        rows = np.zeros((len(loop_sets), self.M + 1), dtype=complex)
        for r, ls in enumerate(loop_sets):
            rows[r, : self.M] = np.asarray(ls, dtype=complex)
            rows[r, self.phantom] = 1.0
        return _batched_core(
            self.Bp, rows, self._pidx, self._eta, self.b, self._lf, self.n_cut, self.Nf
        )


def warmup():
    """Trigger numba compilation on tiny inputs (optional convenience)."""
    a = np.array([[0.1, 0.2], [0.2, 0.3]], dtype=complex)
    lhaf_fds(a)
    lhaf_eigenvalue_trace(a)
    lhaf_repeated(a, np.diag(a), pattern=[1, 1])
