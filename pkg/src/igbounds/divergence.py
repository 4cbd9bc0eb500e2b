"""Unnormalized KL divergence and its induced geometry on prior-weighted families.

The divergence between two positive measures p, q on a finite alphabet is

    I(p || q) = sum p log(p/q) - sum p + sum q,

which reduces to ordinary KL for probability vectors and is nonnegative with
equality iff p = q.  Weighting a model's pmfs by a prior density gives the
family ``p_tilde_theta = pmf(theta) * lambda(theta)`` of unnormalized
measures; the divergence on that family induces

  * a metric       g_ij      = -d_i d'_j I(p_tilde_theta || p_tilde_theta')  at theta' = theta
  * dual symbols   G_ij,k    = -d_i d_j d'_k I(...)                          (primal)
                   G*_ij,k   = -d_k d'_i d'_j I(...)                         (dual)

where unprimed derivatives act on the first slot and primed on the second.
The metric and the two symbol families satisfy the compatibility identity

    d_k g_ij = G_ki,j + G*_kj,i,

which ``check_dualistic_structure`` verifies numerically; the residual is
pure finite-difference error, O(h^2) in the step.

All derivatives are central differences: the 4-point cross stencil for the
mixed second derivative, 6/8-point stencils for the mixed thirds.  Second
derivatives use step ``1e-4 * (1+|theta_i|)`` and thirds use the larger
``1e-3 * (1+|theta_i|)`` since third differences amplify roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NotPsd
from .fisher import InfoMatrix
from .model import FiniteModel, Prior, eval_pmf, fd_step

HC_BASE = 1e-3  # third-derivative step base


def hc_step(theta: np.ndarray, base: float | None = None) -> np.ndarray:
    return fd_step(theta, HC_BASE if base is None else base)


@dataclass(frozen=True)
class UnnormalizedMeasure:
    """Positive measure on the alphabet; total mass is cached at construction."""

    values: np.ndarray
    total_mass: float

    @classmethod
    def of(cls, values) -> "UnnormalizedMeasure":
        v = np.asarray(values, dtype=float)
        if v.ndim != 1 or not np.all(v > 0.0):
            raise ValueError("measure needs a 1-d strictly positive vector")
        return cls(values=v, total_mass=float(v.sum()))


@dataclass(frozen=True)
class ChristoffelTriple:
    """Primal/dual connection symbols, indexed [i, j, k]; symmetric in (i, j)."""

    gamma_primal: np.ndarray
    gamma_dual: np.ndarray
    eval_point: np.ndarray


def _kl_raw(p: np.ndarray, q: np.ndarray) -> float:
    return float(np.dot(p, np.log(p / q)) - p.sum() + q.sum())


def kl_unnormalized(p, q) -> float:
    """Divergence ``sum p log(p/q) - sum p + sum q`` between positive measures."""
    pv = p.values if isinstance(p, UnnormalizedMeasure) else np.asarray(p, dtype=float)
    qv = q.values if isinstance(q, UnnormalizedMeasure) else np.asarray(q, dtype=float)
    if pv.shape != qv.shape:
        raise DimensionMismatch(f"measure dims {pv.shape} vs {qv.shape}")
    return _kl_raw(pv, qv)


def weighted_measure(model: FiniteModel, prior: Prior, theta: np.ndarray) -> UnnormalizedMeasure:
    """The prior-weighted measure ``pmf(theta) * lambda(theta)``."""
    t = np.asarray(theta, dtype=float)
    return UnnormalizedMeasure.of(eval_pmf(model, t) * float(prior.density(t)))


class _DivergenceMap:
    """Two-slot divergence F(t1, t2) with measure caching per evaluation point."""

    def __init__(self, model: FiniteModel, prior: Prior):
        self.model = model
        self.prior = prior
        self._cache: dict[bytes, np.ndarray] = {}

    def measure(self, theta: np.ndarray) -> np.ndarray:
        key = theta.tobytes()
        got = self._cache.get(key)
        if got is None:
            got = eval_pmf(self.model, theta) * float(self.prior.density(theta))
            self._cache[key] = got
        return got

    def __call__(self, t1: np.ndarray, t2: np.ndarray) -> float:
        return _kl_raw(self.measure(t1), self.measure(t2))


def metric_from_divergence(
    model: FiniteModel,
    prior: Prior,
    theta: np.ndarray,
    h_base: float | None = None,
) -> InfoMatrix:
    """Metric of the prior-weighted family by mixed second central differences.

    Equals ``lambda * (fisher + prior_term)`` up to O(h^2); that agreement is
    the cross-module consistency check, not an input here.  The numeric matrix
    is symmetrized before the PSD gate (eigenvalues below -1e-6 raise NotPsd).
    """
    t = np.asarray(theta, dtype=float)
    h = fd_step(t, h_base)
    from .errors import OutOfDomain

    if not model.admissible(t, margin=2.0 * h):
        raise OutOfDomain(f"theta {t.tolist()} lacks the 2h margin for the metric stencil")
    F = _DivergenceMap(model, prior)
    k = model.dim
    g = np.empty((k, k))
    eye = np.eye(k)
    for i in range(k):
        for j in range(k):
            a = h[i] * eye[i]
            b = h[j] * eye[j]
            mixed = (
                F(t + a, t + b) - F(t + a, t - b) - F(t - a, t + b) + F(t - a, t - b)
            ) / (4.0 * h[i] * h[j])
            g[i, j] = -mixed
    g = 0.5 * (g + g.T)
    eigs = np.linalg.eigvalsh(g)
    if eigs.min() < -1e-6:
        raise NotPsd(f"divergence metric has eigenvalue {eigs.min():.3g} at {t.tolist()}")
    return InfoMatrix.of(g, kind="divergence_based", eval_point=t)


def _third_mixed(F, t, pair, single, h, pair_slot_first: bool) -> float:
    """Mixed third derivative with two derivatives on one slot and one on the other.

    ``pair`` = (i, j) indices differentiated on the pair slot, ``single`` = k
    on the other slot.  ``pair_slot_first`` picks which argument of F carries
    the pair.
    """
    i, j = pair
    k = single
    dim = t.size
    eye = np.eye(dim)

    def ev(pair_off, single_off):
        if pair_slot_first:
            return F(t + pair_off, t + single_off)
        return F(t + single_off, t + pair_off)

    ek = h[k] * eye[k]
    if i == j:
        ei = h[i] * eye[i]
        num = (
            ev(ei, ek) - ev(ei, -ek)
            - 2.0 * ev(np.zeros(dim), ek) + 2.0 * ev(np.zeros(dim), -ek)
            + ev(-ei, ek) - ev(-ei, -ek)
        )
        return num / (2.0 * h[i] * h[i] * h[k])
    ei = h[i] * eye[i]
    ej = h[j] * eye[j]
    num = 0.0
    for s1 in (1.0, -1.0):
        for s2 in (1.0, -1.0):
            for s3 in (1.0, -1.0):
                num += s1 * s2 * s3 * ev(s1 * ei + s2 * ej, s3 * ek)
    return num / (8.0 * h[i] * h[j] * h[k])


def christoffel_from_divergence(
    model: FiniteModel,
    prior: Prior,
    theta: np.ndarray,
    step_scale: float = 1.0,
) -> ChristoffelTriple:
    """Primal and dual connection symbols by third-order central differences."""
    t = np.asarray(theta, dtype=float)
    h = step_scale * hc_step(t)
    from .errors import OutOfDomain

    if not model.admissible(t, margin=3.0 * h):
        raise OutOfDomain(f"theta {t.tolist()} lacks the 3h margin for third differences")
    F = _DivergenceMap(model, prior)
    k = model.dim
    gp = np.empty((k, k, k))
    gd = np.empty((k, k, k))
    for i in range(k):
        for j in range(i, k):
            for kk in range(k):
                gp[i, j, kk] = -_third_mixed(F, t, (i, j), kk, h, pair_slot_first=True)
                gp[j, i, kk] = gp[i, j, kk]
                gd[i, j, kk] = -_third_mixed(F, t, (i, j), kk, h, pair_slot_first=False)
                gd[j, i, kk] = gd[i, j, kk]
    return ChristoffelTriple(gamma_primal=gp, gamma_dual=gd, eval_point=t)


def check_dualistic_structure(
    model: FiniteModel,
    prior: Prior,
    theta: np.ndarray,
    step_scale: float = 1.0,
) -> float:
    """Max-abs residual of ``d_k g_ij - G_ki,j - G*_kj,i`` over all index triples.

    The metric derivative uses a central difference with the (scaled) third
    derivative step; the identity holds exactly in the smooth limit, so the
    returned residual measures stencil truncation and should shrink ~4x when
    ``step_scale`` is halved.
    """
    t = np.asarray(theta, dtype=float)
    h = step_scale * hc_step(t)
    trip = christoffel_from_divergence(model, prior, t, step_scale=step_scale)
    k = model.dim
    eye = np.eye(k)
    dg = np.empty((k, k, k))  # dg[kk, i, j] = d_kk g_ij
    for kk in range(k):
        step = h[kk] * eye[kk]
        gp = metric_from_divergence(model, prior, t + step).values
        gm = metric_from_divergence(model, prior, t - step).values
        dg[kk] = (gp - gm) / (2.0 * h[kk])
    resid = 0.0
    for kk in range(k):
        for i in range(k):
            for j in range(k):
                lhs = dg[kk, i, j]
                rhs = trip.gamma_primal[kk, i, j] + trip.gamma_dual[kk, j, i]
                resid = max(resid, abs(lhs - rhs))
    return resid
