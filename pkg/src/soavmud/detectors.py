"""Symbol detectors: LMMSE, LASSO, SOAV-regularized MAP, and exhaustive MAP.

Every detector maps a SystemInstance to a continuous estimate plus a hard
ternary decision. The continuous detectors share the same quantizer
``threshold_map`` so their error ratios are directly comparable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .model import SymbolPrior, SystemInstance
from .optim import (
    QuadraticData,
    SolveReport,
    SolverConfig,
    estimate_lipschitz,
    fista,
    soft_threshold,
)
from .soav import (
    ProxSpec,
    UnsupportedAlphabetError,
    default_offset,
    prox_general_vector,
    prox_vector,
    soav_penalty,
    solve_weights,
)

__all__ = [
    "DETECTOR_KINDS",
    "DetectorConfig",
    "DetectionResult",
    "EnumerationBoundError",
    "threshold_map",
    "lmmse",
    "lasso",
    "map_soav",
    "exhaustive_map",
    "map_lattice_objective",
    "run_detector",
]

DETECTOR_KINDS = ("lmmse", "lasso", "map_soav", "exhaustive_map")

_ENUMERATION_BOUND = 2**24
_ENUMERATION_BLOCK = 2**15


class EnumerationBoundError(ValueError):
    """The candidate lattice is too large to enumerate."""


@dataclass(frozen=True)
class DetectorConfig:
    """Which detector to run and with what parameters."""

    kind: str
    lam: float = 30.0        # weight on the quadratic term of the LASSO objective
    alpha: float = 0.5       # decision threshold of the ternary quantizer
    offset: float = 10.0     # additive margin in the weight-offset rule
    exact_prox: bool = False  # use the exact 1-D prox instead of the closed form
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if self.kind not in DETECTOR_KINDS:
            raise ValueError(f"unknown detector kind {self.kind!r}")
        if self.lam <= 0.0:
            raise ValueError("lam must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie strictly inside (0, 1)")


@dataclass(frozen=True, eq=False)
class DetectionResult:
    """Continuous estimate, hard decision, and solver diagnostics."""

    raw: np.ndarray
    decided: np.ndarray
    diagnostics: Union[SolveReport, str]


def threshold_map(raw, alpha: float) -> np.ndarray:
    """Quantize to {-1, 0, +1}: -1 below -alpha, 0 on [-alpha, alpha), +1 above.

    Both boundaries are half-open: exactly -alpha maps to 0 and exactly
    +alpha maps to +1.
    """
    if alpha <= 0.0:
        raise ValueError("alpha must be positive")
    v = np.asarray(raw, dtype=float)
    out = np.zeros_like(v)
    out[v < -alpha] = -1.0
    out[v >= alpha] = 1.0
    return out


def lmmse(
    instance: SystemInstance, prior: SymbolPrior, alpha: float = 0.5
) -> DetectionResult:
    """Linear MMSE estimate followed by the ternary quantizer.

    With symbol second moment m2 = E[b^2] the weight matrix is
    m2 A S^T (m2 S A^2 S^T + sigma_w2 I)^-1; for the on-off BPSK prior
    m2 = 1 - rho. The M x M system is solved directly, no inverse is formed.
    """
    m2 = float(prior.probs @ prior.alphabet**2)
    B = instance.mix
    G = m2 * (B @ B.T)
    G[np.diag_indices_from(G)] += instance.sigma_w2
    raw = m2 * (B.T @ np.linalg.solve(G, instance.y))
    return DetectionResult(
        raw=raw, decided=threshold_map(raw, alpha), diagnostics="closed-form"
    )


def _resolved_solver(config: DetectorConfig, data: QuadraticData) -> SolverConfig:
    if config.solver.lipschitz is not None:
        return config.solver
    return SolverConfig(
        lipschitz=estimate_lipschitz(data),
        max_iters=config.solver.max_iters,
        rel_tol=config.solver.rel_tol,
        record_trajectory=config.solver.record_trajectory,
    )


def lasso(instance: SystemInstance, config: DetectorConfig) -> DetectionResult:
    """Solve min_x lam * ||y - S A x||^2 + ||x||_1 and quantize."""
    data = QuadraticData(B=instance.mix, y=instance.y, scale=config.lam)
    report = fista(
        data,
        prox=soft_threshold,
        config=_resolved_solver(config, data),
        penalty=lambda x: float(np.abs(x).sum()),
    )
    return DetectionResult(
        raw=report.solution,
        decided=threshold_map(report.solution, config.alpha),
        diagnostics=report,
    )


def map_soav(
    instance: SystemInstance, prior: SymbolPrior, config: DetectorConfig
) -> DetectionResult:
    """SOAV-regularized MAP detector.

    Calibrates the penalty weights from the prior, then minimizes
    ||y - S A x||^2 / (2 sigma_w2) + sum_l q_l ||x - r_l 1||_1 by accelerated
    proximal gradient with the closed-form ternary prox (or the exact 1-D
    prox when config.exact_prox is set), and quantizes the result.
    """
    if not prior.is_ternary():
        raise UnsupportedAlphabetError(
            "map_soav supports the ternary alphabet (-1, 0, 1) only"
        )
    weights = solve_weights(prior, default_offset(prior, config.offset))
    data = QuadraticData(
        B=instance.mix, y=instance.y, scale=1.0 / (2.0 * instance.sigma_w2)
    )
    elementwise = prox_general_vector if config.exact_prox else prox_vector

    def prox(z, gamma):
        spec = ProxSpec(gamma=gamma, weights=weights, alphabet=prior.alphabet)
        return elementwise(z, spec)

    report = fista(
        data,
        prox=prox,
        config=_resolved_solver(config, data),
        penalty=lambda x: soav_penalty(x, weights, prior.alphabet),
    )
    return DetectionResult(
        raw=report.solution,
        decided=threshold_map(report.solution, config.alpha),
        diagnostics=report,
    )


def map_lattice_objective(x, instance: SystemInstance, prior: SymbolPrior) -> float:
    """Exact MAP objective on the lattice:

    ||y - S A x||^2 / (2 sigma_w2) + sum_l (log p_l) ||x - r_l 1||_0.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (instance.n_users,):
        raise ValueError("x must have one entry per user")
    resid = instance.y - instance.mix @ x
    data = float(resid @ resid) / (2.0 * instance.sigma_w2)
    logp = np.log(prior.probs)
    mismatches = np.count_nonzero(x[:, None] != prior.alphabet, axis=0)
    return data + float(logp @ mismatches)


def exhaustive_map(instance: SystemInstance, prior: SymbolPrior) -> DetectionResult:
    """Exact MAP detection by full lattice enumeration.

    Only feasible for small problems; refuses to enumerate more than 2^24
    candidates. Candidates are scanned in lexicographic order of their
    symbol indices and ties keep the earliest candidate, so the result is
    deterministic.
    """
    n = instance.n_users
    k = prior.n_symbols
    total = k**n
    if total > _ENUMERATION_BOUND:
        raise EnumerationBoundError(
            f"{k}^{n} = {total} candidates exceed the enumeration bound {_ENUMERATION_BOUND}"
        )
    B = instance.mix
    r = prior.alphabet
    logp = np.log(prior.probs)
    const = n * float(logp.sum())
    place = k ** np.arange(n - 1, -1, -1, dtype=np.int64)
    best_value = np.inf
    best_x = None
    for start in range(0, total, _ENUMERATION_BLOCK):
        codes = np.arange(start, min(start + _ENUMERATION_BLOCK, total), dtype=np.int64)
        digits = (codes[:, None] // place[None, :]) % k
        X = r[digits]
        resid = instance.y[None, :] - X @ B.T
        values = (
            np.einsum("ij,ij->i", resid, resid) / (2.0 * instance.sigma_w2)
            + const
            - logp[digits].sum(axis=1)
        )
        j = int(np.argmin(values))
        if values[j] < best_value:
            best_value = float(values[j])
            best_x = X[j].copy()
    return DetectionResult(
        raw=best_x,
        decided=best_x.copy(),
        diagnostics=f"exhaustive search over {total} candidates",
    )


def run_detector(
    instance: SystemInstance, prior: SymbolPrior, config: DetectorConfig
) -> DetectionResult:
    """Dispatch on config.kind."""
    if config.kind == "lmmse":
        return lmmse(instance, prior, alpha=config.alpha)
    if config.kind == "lasso":
        return lasso(instance, config)
    if config.kind == "map_soav":
        return map_soav(instance, prior, config)
    return exhaustive_map(instance, prior)
