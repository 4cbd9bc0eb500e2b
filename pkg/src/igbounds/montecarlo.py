"""Monte Carlo verification: sampling, reference estimators, empirical MSE.

Sampling is driven by a counter-based stream (splitmix64 finalizer of
``(seed, trial, draw)``), so every trial's data is a pure function of the
seed and indices: results are bit-identical across runs, chunkings and
thread counts.  Reductions run over per-trial arrays in fixed index order.

Estimators are named specs so experiment configs stay declarative:

  * ``identity``        first observation's atom index
  * ``const:v``         constant v
  * ``shrink:c``        c times the mean atom index (``shrink:1`` = sample mean)
  * ``mle``             grid argmax of the log-likelihood + golden refinement
  * ``posterior_mean``  grid-quadrature posterior mean (needs a prior)
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._stream import uniforms
from .errors import PosteriorUnderflow
from .model import FiniteModel, Prior, axis_midpoints, eval_pmf, grid_nodes

_CHUNK = 8192  # fixed chunk size: results must not depend on thread count


@dataclass(frozen=True)
class McEstimate:
    """Empirical moments of an estimator over ``trials`` independent trials."""

    mean: np.ndarray
    cov: np.ndarray
    mse: np.ndarray
    trials: int
    ci_halfwidth: np.ndarray  # 3-sigma half-widths on the mse entries
    seed: int
    diagnostics: dict[str, float] = field(default_factory=dict)


def sample(
    model: FiniteModel,
    theta: np.ndarray,
    count: int,
    seed: int,
    trial_index: int = 0,
) -> np.ndarray:
    """``count`` i.i.d. atom indices via inverse CDF on the counter stream."""
    p = eval_pmf(model, np.asarray(theta, dtype=float))
    u = uniforms(seed, trial_index, np.arange(count))
    cdf = np.cumsum(p)
    cdf[-1] = 1.0  # guard the top edge against cumsum roundoff
    return np.searchsorted(cdf, u, side="right").astype(np.int64)


def _sample_matrix(model, theta, trials, obs, seed, trial0=0):
    """(trials, obs) index matrix; row t uses stream (seed, trial0+t, draw)."""
    p = eval_pmf(model, np.asarray(theta, dtype=float))
    cdf = np.cumsum(p)
    cdf[-1] = 1.0
    t_idx = (trial0 + np.arange(trials))[:, None]
    u = uniforms(seed, t_idx, np.arange(obs)[None, :])
    return np.searchsorted(cdf, u, side="right").astype(np.int64)


def _counts(data: np.ndarray, d: int) -> np.ndarray:
    """(trials, d) occurrence counts per trial."""
    return np.stack([(data == j).sum(axis=1) for j in range(d)], axis=1)


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------

class _GridTables:
    """Log-pmf over the estimator grid, computed once per model."""

    def __init__(self, model: FiniteModel):
        nodes, _ = grid_nodes(model.params, model.constraint)
        self.nodes = nodes
        if model.pmf_batch is not None:
            pmf = np.asarray(model.pmf_batch(nodes), dtype=float)
            pmf = np.maximum(pmf, model.floor)
            pmf = pmf / pmf.sum(axis=1, keepdims=True)
        else:
            pmf = np.stack([eval_pmf(model, n) for n in nodes])
        self.log_pmf = np.log(pmf)
        self.model = model

    def loglik(self, counts: np.ndarray) -> np.ndarray:
        return counts @ self.log_pmf.T  # (trials, n_nodes)


def _golden_refine_rows(loglik_fn, brackets, iters=40):
    """Vectorized golden-section maximization of per-row objectives."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = brackets
    for _ in range(iters):
        c = b - invphi * (b - a)
        d = a + invphi * (b - a)
        left = loglik_fn(c) >= loglik_fn(d)
        b = np.where(left, d, b)
        a = np.where(left, a, c)
    mid = 0.5 * (a + b)
    return mid


def mle_grid(model: FiniteModel, data) -> np.ndarray:
    """Grid maximum-likelihood estimate refined by one golden-section pass.

    Ties on the grid break toward the lexicographically smallest point.
    """
    data = np.asarray(data, dtype=np.int64)
    if data.size == 0:
        raise ValueError("mle_grid needs at least one observation")
    tables = _GridTables(model)
    counts = _counts(data[None, :], model.d)
    ll = tables.loglik(counts)[0]
    best = int(np.argmax(ll))  # first max = lexicographically smallest node
    theta = tables.nodes[best].copy()
    if model.dim == 1 and model.pmf_batch is not None:
        theta = _refine_mle_batch(model, tables, counts, np.array([best]))[0]
        return theta
    # coordinate-wise golden pass around the winning node
    from .bounds import _golden_max  # scalar helper

    for i in range(model.dim):
        h = (model.params.upper[i] - model.params.lower[i]) / model.params.grid_points_per_dim
        lo = max(theta[i] - h, model.params.lower[i] + 1e-12)
        hi = min(theta[i] + h, model.params.upper[i] - 1e-12)

        def f(x, i=i):
            cand = theta.copy()
            cand[i] = x
            if not model.admissible(cand):
                return -np.inf
            return float(counts[0] @ np.log(eval_pmf(model, cand)))

        x, _ = _golden_max(f, lo, hi)
        if f(x) >= f(theta[i]):
            theta[i] = x
    return theta


def _refine_mle_batch(model, tables, counts, best_idx):
    """Golden refinement of scalar MLEs for all trials at once."""
    nodes = tables.nodes[:, 0]
    h = (model.params.upper[0] - model.params.lower[0]) / model.params.grid_points_per_dim
    centers = nodes[best_idx]
    lo = np.maximum(centers - h, model.params.lower[0] + 1e-12)
    hi = np.minimum(centers + h, model.params.upper[0] - 1e-12)

    def loglik_at(xs):
        pmf = np.asarray(model.pmf_batch(xs[:, None]), dtype=float)
        pmf = np.maximum(pmf, model.floor)
        pmf = pmf / pmf.sum(axis=1, keepdims=True)
        return np.einsum("td,td->t", counts.astype(float), np.log(pmf))

    xs = _golden_refine_rows(loglik_at, (lo, hi))
    return xs[:, None]


class _Estimator:
    """Per-trial estimator with a vectorized batch path."""

    def __init__(self, spec: str, model: FiniteModel, prior: Prior | None):
        self.spec = spec
        self.model = model
        self.prior = prior
        parts = spec.split(":")
        self.kind = parts[0]
        self.param = float(parts[1]) if len(parts) > 1 else None
        if self.kind not in ("identity", "const", "shrink", "mle", "posterior_mean"):
            raise ValueError(f"unknown estimator '{spec}'")
        if self.kind in ("const", "shrink") and self.param is None:
            raise ValueError(f"estimator '{self.kind}' needs a parameter, e.g. '{self.kind}:0.5'")
        if self.kind == "posterior_mean" and prior is None:
            raise ValueError("posterior_mean estimator needs a prior")
        self._tables = _GridTables(model) if self.kind in ("mle", "posterior_mean") else None
        if self.kind == "posterior_mean":
            self._log_prior = np.array(
                [np.log(prior.density(n)) for n in self._tables.nodes]
            )

    def estimate_batch(self, data: np.ndarray) -> np.ndarray:
        """(trials, k) estimates from a (trials, obs) index matrix."""
        trials = data.shape[0]
        k = self.model.dim
        if self.kind == "identity":
            return data[:, 0].astype(float)[:, None]
        if self.kind == "const":
            return np.full((trials, k), self.param)
        if self.kind == "shrink":
            return (self.param * data.mean(axis=1))[:, None]
        counts = _counts(data, self.model.d)
        ll = self._tables.loglik(counts)
        if self.kind == "mle":
            best = np.argmax(ll, axis=1)
            if self.model.dim == 1 and self.model.pmf_batch is not None:
                return _refine_mle_batch(self.model, self._tables, counts, best)
            return self._tables.nodes[best]
        # posterior mean
        logpost = ll + self._log_prior[None, :]
        top = logpost.max(axis=1)
        # every node but the argmax underflows -> the grid cannot resolve the
        # posterior (grid/model mismatch)
        alive = (logpost >= top[:, None] - 700.0).sum(axis=1)
        if np.any(alive <= 1):
            raise PosteriorUnderflow(
                "grid log-posteriors collapse to a single node (all others below "
                "-700 after max-subtraction)"
            )
        w = np.exp(logpost - top[:, None])
        w /= w.sum(axis=1, keepdims=True)
        return w @ self._tables.nodes


def posterior_mean(model: FiniteModel, prior: Prior, data) -> np.ndarray:
    """Grid-quadrature posterior mean ``E[theta | data]`` under the grid prior."""
    if prior.normalization_mode != "normalized-on-grid":
        raise ValueError("posterior_mean needs a prior normalized on the grid")
    data = np.asarray(data, dtype=np.int64)
    if data.size == 0:
        raise ValueError("posterior_mean needs at least one observation")
    est = _Estimator("posterior_mean", model, prior)
    return est.estimate_batch(data[None, :])[0]


# ---------------------------------------------------------------------------
# Empirical MSE
# ---------------------------------------------------------------------------

def _moments(estimates: np.ndarray, theta_ref: np.ndarray, trials: int, seed: int,
             diagnostics: dict[str, float] | None = None) -> McEstimate:
    err = estimates - theta_ref
    mean = estimates.mean(axis=0)
    dev = estimates - mean
    cov = dev.T @ dev / trials
    mse = err.T @ err / trials
    sq = err[:, :, None] * err[:, None, :]  # (T, k, k) per-trial error products
    m4 = np.einsum("tij,tij->ij", sq, sq) / trials
    ci = 3.0 * np.sqrt(np.maximum(m4 - mse**2, 0.0) / trials)
    return McEstimate(
        mean=mean,
        cov=0.5 * (cov + cov.T),
        mse=0.5 * (mse + mse.T),
        trials=trials,
        ci_halfwidth=ci,
        seed=seed,
        diagnostics=diagnostics or {},
    )


def _run_chunks(trials: int, threads: int, fill):
    """Run ``fill(t0, t1)`` over fixed-size chunks, optionally in threads.

    Chunk boundaries are independent of thread count, and every chunk writes
    a disjoint slice, so the assembled result is bit-identical regardless of
    scheduling.
    """
    spans = [(t0, min(t0 + _CHUNK, trials)) for t0 in range(0, trials, _CHUNK)]
    if threads <= 1 or len(spans) == 1:
        for t0, t1 in spans:
            fill(t0, t1)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda s: fill(*s), spans))


def empirical_mse(
    model: FiniteModel,
    theta_true: np.ndarray,
    estimator: str,
    trials: int,
    obs_per_trial: int,
    seed: int,
    prior: Prior | None = None,
    threads: int = 1,
) -> McEstimate:
    """Empirical mean/cov/MSE of a named estimator over independent trials."""
    if trials < 1:
        raise ValueError("need at least one trial")
    t = np.asarray(theta_true, dtype=float)
    est = _Estimator(estimator, model, prior)
    estimates = np.empty((trials, model.dim))

    def fill(t0, t1):
        data = _sample_matrix(model, t, t1 - t0, obs_per_trial, seed, trial0=t0)
        estimates[t0:t1] = est.estimate_batch(data)

    _run_chunks(trials, threads, fill)
    return _moments(estimates, t, trials, seed)


def empirical_mse_prior_averaged(
    model: FiniteModel,
    prior: Prior,
    estimator: str,
    trials: int,
    obs_per_trial: int,
    seed: int,
    threads: int = 1,
) -> McEstimate:
    """Prior-averaged MSE: theta drawn from the grid prior, then data given theta.

    The MSE is taken about the drawn theta per trial (the conservative choice
    for bound checks); the variance about the estimator's own mean is reported
    in the diagnostics.  The theta draw uses draw index ``obs_per_trial``,
    one past the data stream.
    """
    if prior.normalization_mode != "normalized-on-grid":
        raise ValueError("prior-averaged MSE needs a prior normalized on the grid")
    nodes, cell = grid_nodes(model.params, model.constraint)
    weights = np.array([prior.density(n) for n in nodes]) * cell
    weights = weights / weights.sum()
    wcdf = np.cumsum(weights)
    wcdf[-1] = 1.0
    est = _Estimator(estimator, model, prior)

    estimates = np.empty((trials, model.dim))
    thetas = np.empty((trials, model.dim))

    def fill(t0, t1):
        span = np.arange(t0, t1)
        u_theta = uniforms(seed, span, np.full(t1 - t0, obs_per_trial))
        idx = np.searchsorted(wcdf, u_theta, side="right")
        ths = nodes[idx]
        thetas[t0:t1] = ths
        if model.pmf_batch is not None:
            pmf = np.asarray(model.pmf_batch(ths), dtype=float)
            pmf = np.maximum(pmf, model.floor)
            pmf = pmf / pmf.sum(axis=1, keepdims=True)
        else:
            pmf = np.stack([eval_pmf(model, th) for th in ths])
        cdf = np.cumsum(pmf, axis=1)
        cdf[:, -1] = 1.0
        u = uniforms(seed, span[:, None], np.arange(obs_per_trial)[None, :])
        # per-trial inverse CDF: count how many cdf cells each uniform clears
        data = (u[:, :, None] >= cdf[:, None, :]).sum(axis=2).astype(np.int64)
        estimates[t0:t1] = est.estimate_batch(data)

    _run_chunks(trials, threads, fill)
    err = estimates - thetas
    mse = err.T @ err / trials
    sq = err[:, :, None] * err[:, None, :]
    m4 = np.einsum("tij,tij->ij", sq, sq) / trials
    ci = 3.0 * np.sqrt(np.maximum(m4 - mse**2, 0.0) / trials)
    mean = estimates.mean(axis=0)
    dev = estimates - mean
    var_about_mean = float(np.trace(dev.T @ dev / trials))
    return McEstimate(
        mean=mean,
        cov=0.5 * (mse + mse.T),  # here "cov" tracks the error second moment
        mse=0.5 * (mse + mse.T),
        trials=trials,
        ci_halfwidth=ci,
        seed=seed,
        diagnostics={"var_about_estimator_mean": var_about_mean},
    )
