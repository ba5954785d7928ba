"""Sampled-waveform filter-bank receiver.

Signature waveforms s_n(t) and receive filters h_m(t) live on [0, T] and are
represented by P samples each. The bank yields the cross-correlation matrix
S_tilde, the filter Gram matrix H, and a whitened mixing matrix S such that
the filter-bank outputs follow y = S A b + w.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "WaveformBank",
    "FrontendModel",
    "SingularGramError",
    "cross_correlate",
    "gram",
    "whiten",
    "build_frontend",
    "load_bank",
]

_ENERGY_TOL = 1e-9
_EIG_TOL = 1e-10
DEFAULT_SAMPLES_PER_SYMBOL = 64


class SingularGramError(ValueError):
    """The filter Gram matrix is not positive definite."""


@dataclass(frozen=True, eq=False)
class WaveformBank:
    """Sampled signature and filter waveforms sharing one sample period."""

    signatures: np.ndarray   # (N, P) user signature samples
    filters: np.ndarray      # (M, P) receive filter samples
    sample_period: float

    def __post_init__(self):
        signatures = np.array(self.signatures, dtype=float)
        filters = np.array(self.filters, dtype=float)
        if signatures.ndim != 2 or filters.ndim != 2:
            raise ValueError("signatures and filters must be 2-D sample arrays")
        if signatures.shape[1] != filters.shape[1]:
            raise ValueError("signatures and filters must share the sample count")
        if signatures.shape[1] < 1:
            raise ValueError("waveforms need at least one sample")
        if self.sample_period <= 0.0:
            raise ValueError("sample_period must be positive")
        energy = self.sample_period * np.sum(signatures**2, axis=1)
        if np.any(np.abs(energy - 1.0) > _ENERGY_TOL):
            raise ValueError("every signature must have unit energy")
        signatures.setflags(write=False)
        filters.setflags(write=False)
        object.__setattr__(self, "signatures", signatures)
        object.__setattr__(self, "filters", filters)

    @property
    def n_users(self) -> int:
        return int(self.signatures.shape[0])

    @property
    def n_filters(self) -> int:
        return int(self.filters.shape[0])

    @property
    def n_samples(self) -> int:
        return int(self.signatures.shape[1])

    @classmethod
    def from_functions(
        cls,
        signature_funcs,
        filter_funcs,
        duration: float,
        samples_per_symbol: int = DEFAULT_SAMPLES_PER_SYMBOL,
        normalize: bool = True,
    ) -> "WaveformBank":
        """Sample continuous waveforms on [0, duration) with a left-point grid."""
        if duration <= 0.0:
            raise ValueError("duration must be positive")
        if samples_per_symbol < 1:
            raise ValueError("samples_per_symbol must be at least 1")
        tau = duration / samples_per_symbol
        grid = tau * np.arange(samples_per_symbol)
        signatures = np.array([[f(t) for t in grid] for f in signature_funcs], float)
        filters = np.array([[f(t) for t in grid] for f in filter_funcs], float)
        if normalize:
            energy = tau * np.sum(signatures**2, axis=1)
            signatures = signatures / np.sqrt(energy)[:, None]
        return cls(signatures=signatures, filters=filters, sample_period=tau)


@dataclass(frozen=True, eq=False)
class FrontendModel:
    """Frontend matrices: raw cross-correlations, Gram matrix, whitened mixing."""

    S_tilde: np.ndarray
    H: np.ndarray
    S: np.ndarray
    noise_transform: np.ndarray
    mode: str


def cross_correlate(bank: WaveformBank) -> np.ndarray:
    """Cross-correlation matrix S_tilde[m, n] = tau * sum_i s_n[i] h_m[P-1-i].

    Left-Riemann approximation of the matched-filter integral of s_n against
    the time-reversed filter h_m.
    """
    reversed_filters = bank.filters[:, ::-1]
    return bank.sample_period * (reversed_filters @ bank.signatures.T)


def gram(bank: WaveformBank) -> np.ndarray:
    """Filter Gram matrix H[i, j] = tau * sum_k h_i[k] h_j[k].

    The accumulation is symmetrized so the result is bitwise symmetric.
    """
    H = bank.sample_period * (bank.filters @ bank.filters.T)
    return 0.5 * (H + H.T)


def whiten(S_tilde: np.ndarray, H: np.ndarray, mode: str = "symmetric"):
    """Whiten the filter-bank model; returns (S, noise_transform).

    mode="paper" applies H^-1 (noise covariance becomes sigma_w2 * H^-1);
    mode="symmetric" applies H^-1/2, which is the transform that actually
    delivers white noise sigma_w2 * I and is therefore the default.
    """
    S_tilde = np.asarray(S_tilde, dtype=float)
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("H must be square")
    if S_tilde.shape[0] != H.shape[0]:
        raise ValueError("S_tilde must have one row per filter")
    if mode not in ("paper", "symmetric"):
        raise ValueError("mode must be 'paper' or 'symmetric'")
    eigvals, eigvecs = np.linalg.eigh(0.5 * (H + H.T))
    if eigvals.min() <= _EIG_TOL:
        raise SingularGramError(
            f"Gram matrix is not positive definite (min eigenvalue {eigvals.min():.3e})"
        )
    power = -1.0 if mode == "paper" else -0.5
    transform = (eigvecs * eigvals**power) @ eigvecs.T
    return transform @ S_tilde, transform


def build_frontend(bank: WaveformBank, mode: str = "symmetric") -> FrontendModel:
    """Assemble the full frontend model from a waveform bank."""
    S_tilde = cross_correlate(bank)
    H = gram(bank)
    S, transform = whiten(S_tilde, H, mode=mode)
    return FrontendModel(
        S_tilde=S_tilde, H=H, S=S, noise_transform=transform, mode=mode
    )


def load_bank(source) -> WaveformBank:
    """Load a waveform bank from a JSON file path or file-like object.

    Expected document: {"sample_period": tau, "signatures": [[...]],
    "filters": [[...]]}.
    """
    if hasattr(source, "read"):
        doc = json.load(source)
    else:
        with open(source, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    try:
        return WaveformBank(
            signatures=doc["signatures"],
            filters=doc["filters"],
            sample_period=float(doc["sample_period"]),
        )
    except KeyError as exc:
        raise ValueError(f"waveform bank document is missing field {exc}") from exc
