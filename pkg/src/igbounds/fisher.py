"""Score-based information matrices and PSD-safe inversion.

``fisher_matrix`` is the expected outer product of the score, ``prior_term``
the rank-one outer product of the prior log-gradient, and ``bayesian_metric``
their prior-density-weighted sum

    lambda(theta) * (fisher + prior_term),

which is the metric the divergence module recovers by differentiation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularInformation
from .model import FiniteModel, Prior, eval_pmf, log_grad_prior, score

#: relative eigenvalue cutoff below which an information matrix is rejected
EIG_REL_CUTOFF = 1e-10


@dataclass(frozen=True)
class InfoMatrix:
    """Symmetric PSD k x k matrix with provenance and a condition estimate."""

    values: np.ndarray
    kind: str  # score_fisher | prior_term | bayesian | divergence_based
    eval_point: np.ndarray
    cond_estimate: float

    @classmethod
    def of(cls, values: np.ndarray, kind: str, eval_point: np.ndarray) -> "InfoMatrix":
        v = np.asarray(values, dtype=float)
        v = 0.5 * (v + v.T)
        eigs = np.linalg.eigvalsh(v)  # ascending
        top, bottom = float(eigs[-1]), float(eigs[0])
        cond = float("inf") if bottom <= 0.0 else top / bottom
        return cls(values=v, kind=kind, eval_point=np.asarray(eval_point, dtype=float),
                   cond_estimate=cond)


def fisher_matrix(model: FiniteModel, theta: np.ndarray, h_base: float | None = None) -> InfoMatrix:
    """Expected score outer product ``sum_x p(x) s_i(x) s_j(x)``."""
    t = np.asarray(theta, dtype=float)
    s = score(model, t, h_base)
    p = eval_pmf(model, t)
    g = (s * p) @ s.T
    return InfoMatrix.of(g, kind="score_fisher", eval_point=t)


def prior_term(prior: Prior, theta: np.ndarray, h_base: float | None = None) -> InfoMatrix:
    """Rank-one matrix ``u u^T`` with u the prior log-gradient."""
    t = np.asarray(theta, dtype=float)
    u = log_grad_prior(prior, t, h_base)
    return InfoMatrix.of(np.outer(u, u), kind="prior_term", eval_point=t)


def bayesian_metric(
    model: FiniteModel, prior: Prior, theta: np.ndarray, h_base: float | None = None
) -> InfoMatrix:
    """Prior-weighted information ``lambda(theta) * (fisher + prior_term)``."""
    t = np.asarray(theta, dtype=float)
    lam = float(prior.density(t))
    g = fisher_matrix(model, t, h_base).values + prior_term(prior, t, h_base).values
    return InfoMatrix.of(lam * g, kind="bayesian", eval_point=t)


def psd_inverse(m) -> np.ndarray:
    """Eigendecomposition-based inverse of a symmetric PSD matrix.

    Eigenvalues below ``1e-10 * max_eigenvalue`` are rejected rather than
    pseudo-inverted: a pseudo-inverse would silently understate any bound
    built from the inverse along the null directions.
    """
    values = m.values if isinstance(m, InfoMatrix) else np.asarray(m, dtype=float)
    values = 0.5 * (values + values.T)
    eigs, vecs = np.linalg.eigh(values)
    top = float(eigs.max(initial=0.0))
    if top <= 0.0 or eigs.min() < EIG_REL_CUTOFF * top:
        raise SingularInformation(
            f"information matrix eigenvalues {eigs.tolist()} below relative cutoff"
        )
    return (vecs / eigs) @ vecs.T
