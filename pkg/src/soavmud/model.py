"""Symbol priors, SNR calibration, and synthesis of linear-model realizations.

The received-signal model is ``y = S A b + w`` with ``S`` an M x N real
mixing matrix, ``A = diag(gains)`` the per-user channel gains, ``b`` a
vector of symbols drawn from a finite alphabet, and ``w`` i.i.d. zero-mean
Gaussian noise of variance ``sigma_w2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SymbolPrior",
    "SnrSpec",
    "SystemInstance",
    "bpsk_prior",
    "draw_symbols",
    "sigma_from_snr",
    "gaussian_matrix",
    "synthesize",
    "substream",
]

_PROB_TOL = 1e-12


def _readonly(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SymbolPrior:
    """Finite symbol alphabet r_0 < ... < r_L with occurrence probabilities."""

    alphabet: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        alphabet = _readonly(self.alphabet)
        probs = _readonly(self.probs)
        if alphabet.ndim != 1 or alphabet.size < 2:
            raise ValueError("alphabet must be 1-D with at least two symbols")
        if probs.shape != alphabet.shape:
            raise ValueError("probs must have one entry per symbol")
        if not np.all(np.diff(alphabet) > 0):
            raise ValueError("alphabet must be strictly increasing")
        if np.any(probs <= 0.0):
            raise ValueError("all symbol probabilities must be positive")
        if abs(float(probs.sum()) - 1.0) > _PROB_TOL:
            raise ValueError("symbol probabilities must sum to 1")
        object.__setattr__(self, "alphabet", alphabet)
        object.__setattr__(self, "probs", probs)

    @property
    def n_symbols(self) -> int:
        return int(self.alphabet.size)

    def is_ternary(self) -> bool:
        """True for the on-off BPSK alphabet {-1, 0, +1}."""
        return self.alphabet.size == 3 and np.array_equal(
            self.alphabet, (-1.0, 0.0, 1.0)
        )


def bpsk_prior(rho: float) -> SymbolPrior:
    """On-off BPSK prior: P(0) = rho, P(-1) = P(+1) = (1 - rho) / 2.

    rho is the non-active rate, i.e. the probability that a user transmits
    nothing in the slot. It must lie strictly inside (0, 1) so that every
    symbol keeps positive probability.
    """
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must lie strictly inside (0, 1) for a ternary prior")
    half = 0.5 * (1.0 - rho)
    return SymbolPrior(alphabet=(-1.0, 0.0, 1.0), probs=(half, rho, half))


@dataclass(frozen=True)
class SnrSpec:
    """Operating point: SNR in decibels plus the non-active rate rho."""

    snr_db: float
    rho: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise ValueError("rho must satisfy 0 <= rho < 1")


def sigma_from_snr(spec: SnrSpec, n_users: int, n_meas: int) -> float:
    """Noise variance that realizes the requested SNR.

    SNR is defined as the ratio of total signal power N(1 - rho) to total
    noise power M sigma_w2, so sigma_w2 = N(1 - rho)/M * 10^(-SNR/10).
    """
    if n_users < 1 or n_meas < 1:
        raise ValueError("n_users and n_meas must be at least 1")
    return n_users * (1.0 - spec.rho) / n_meas * 10.0 ** (-spec.snr_db / 10.0)


@dataclass(frozen=True, eq=False)
class SystemInstance:
    """One realization of y = S A b + w."""

    S: np.ndarray        # (M, N) mixing matrix
    gains: np.ndarray    # (N,) diagonal of the channel-gain matrix A
    sigma_w2: float
    b: np.ndarray        # (N,) transmitted symbols
    w: np.ndarray        # (M,) noise actually added
    y: np.ndarray        # (M,) received vector

    def __post_init__(self):
        S = _readonly(self.S)
        if S.ndim != 2:
            raise ValueError("S must be a 2-D matrix")
        m, n = S.shape
        gains = _readonly(self.gains)
        b = _readonly(self.b)
        w = _readonly(self.w)
        y = _readonly(self.y)
        if gains.shape != (n,):
            raise ValueError("gains must have one entry per user")
        if b.shape != (n,):
            raise ValueError("b must have one entry per user")
        if w.shape != (m,) or y.shape != (m,):
            raise ValueError("w and y must have one entry per measurement")
        if self.sigma_w2 <= 0.0:
            raise ValueError("sigma_w2 must be positive")
        for name, arr in (("S", S), ("gains", gains), ("b", b), ("w", w), ("y", y)):
            object.__setattr__(self, name, arr)

    @property
    def n_meas(self) -> int:
        return int(self.S.shape[0])

    @property
    def n_users(self) -> int:
        return int(self.S.shape[1])

    @property
    def mix(self) -> np.ndarray:
        """Effective mixing matrix S A, shape (M, N)."""
        return self.S * self.gains


def draw_symbols(prior: SymbolPrior, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n i.i.d. symbols from the prior."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return rng.choice(prior.alphabet, size=n, p=prior.probs)


def gaussian_matrix(m: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """m x n matrix of i.i.d. standard normal entries."""
    if m < 1 or n < 1:
        raise ValueError("matrix dimensions must be at least 1")
    return rng.standard_normal((m, n))


def _as_gain_vector(A, n: int) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        if A.shape != (n,):
            raise ValueError("gain vector length must match the number of users")
        return A
    if A.ndim == 2:
        if A.shape != (n, n):
            raise ValueError("gain matrix must be N x N")
        diag = np.diagonal(A)
        if np.count_nonzero(A - np.diag(diag)):
            raise ValueError("gain matrix must be diagonal")
        return diag.copy()
    raise ValueError("gains must be a vector or a diagonal matrix")


def synthesize(
    prior: SymbolPrior,
    S,
    A,
    sigma_w2: float,
    rng: np.random.Generator,
    noiseless: bool = False,
) -> SystemInstance:
    """Draw (b, w) and assemble one realization of y = S A b + w.

    ``A`` may be a length-N gain vector or the equivalent diagonal matrix.
    With ``noiseless=True`` the noise is forced to zero (exact-recovery test
    mode); sigma_w2 is still recorded for use in detector objectives.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2:
        raise ValueError("S must be a 2-D matrix")
    m, n = S.shape
    gains = _as_gain_vector(A, n)
    if sigma_w2 <= 0.0:
        raise ValueError("sigma_w2 must be positive")
    b = draw_symbols(prior, n, rng)
    if noiseless:
        w = np.zeros(m)
    else:
        w = rng.normal(0.0, np.sqrt(sigma_w2), size=m)
    y = (S * gains) @ b + w
    return SystemInstance(S=S, gains=gains, sigma_w2=float(sigma_w2), b=b, w=w, y=y)


def substream(master_seed: int, *keys) -> np.random.Generator:
    """Independent random stream keyed by (master_seed, *keys).

    Float keys are folded in through their IEEE-754 bit pattern, so any
    axis value maps to a distinct stream without rounding ambiguity.
    Streams depend only on their keys, never on evaluation order, which is
    what makes parallel sweeps reproduce serial ones bit for bit.
    """
    words = []
    for key in keys:
        if isinstance(key, (bool, int, np.integer)):
            words.append(int(key) & 0xFFFFFFFFFFFFFFFF)
        elif isinstance(key, (float, np.floating)):
            words.append(int(np.float64(key).view(np.uint64)))
        else:
            raise TypeError(f"stream keys must be ints or floats, got {type(key)!r}")
    seq = np.random.SeedSequence(
        entropy=int(master_seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(words)
    )
    return np.random.default_rng(seq)
