"""Lower bounds on estimator error: CRLB variants, Bayesian CRLB, Barankin.

Matrix bounds are reported as ``BoundReport`` objects whose ``value`` is the
right-hand side of the corresponding inequality:

  * ``crlb_unbiased``  inverse Fisher matrix (covariance of unbiased estimators)
  * ``crlb_biased``    (1+B') G^{-1} (1+B')^T + b b^T for bias b(theta)
  * ``bayesian_crlb``  inverse of the prior-expected Bayesian information
  * ``barankin_*``     test-point quadratic form (scalar parameter)

Barankin conventions
--------------------
For test points t_1..t_n with likelihood ratios L_l = p_{t_l}/p_theta, the
bound for a coefficient vector a is ``(a.delta)^2 / E[(sum a_l L_l)^2]`` and
the supremum over a is a generalized Rayleigh quotient.  The trivial test
point t = theta (whose ratio is the constant 1) is always admissible and can
only enlarge the span, and with it present the supremum over coefficients
collapses, via the Schur complement, to

    delta^T (S - 1 1^T)^{-1} delta,

the quadratic form of the *centered* Gram S - 1 1^T = E[(L-1)(L-1)^T].  That
centered form is what ``barankin_fixed`` computes; tests verify it against
brute-force maximization of the raw quotient.  The Gram is assembled from pmf
differences ``(p_l - p) / sqrt(p)`` directly, which keeps it accurate for test
points close to theta (computing E[L_l L_m] and subtracting 1 would cancel
catastrophically there, and the small-spacing limit is exactly the CRLB).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._stream import uniforms
from .errors import IllConditionedGram, OutOfDomain
from .fisher import bayesian_metric, fisher_matrix, psd_inverse
from .model import FiniteModel, Prior, eval_pmf, fd_step, grid_nodes

GRAM_COND_LIMIT = 1e12
_COARSE_GRID = 33
_RESTART_SEED = 0x1C0FFEE  # fixed internal seed: restarts stay deterministic


@dataclass(frozen=True)
class BoundReport:
    """A computed lower bound with method metadata and diagnostics."""

    kind: str  # bayesian_crlb | crlb_unbiased | crlb_biased | barankin
    value: np.ndarray  # k x k, scalar bounds are 1 x 1
    eval_point: np.ndarray | str  # theta, or "prior-averaged"
    diagnostics: dict[str, float] = field(default_factory=dict)

    @property
    def scalar(self) -> float:
        return float(self.value[0, 0])


@dataclass(frozen=True)
class TestPointSet:
    """Distinct interior test points for the Barankin quadratic form."""

    points: np.ndarray  # (n, k)

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        object.__setattr__(self, "points", pts)
        for a, b in itertools.combinations(range(len(pts)), 2):
            if np.linalg.norm(pts[a] - pts[b]) <= 1e-9:
                raise ValueError("test points must be pairwise distinct (> 1e-9 apart)")

    @property
    def n(self) -> int:
        return len(self.points)


# ---------------------------------------------------------------------------
# CRLB family
# ---------------------------------------------------------------------------

def crlb_unbiased(model: FiniteModel, theta: np.ndarray) -> BoundReport:
    """Inverse Fisher matrix: covariance bound for unbiased estimators."""
    t = np.asarray(theta, dtype=float)
    g = fisher_matrix(model, t)
    return BoundReport(
        kind="crlb_unbiased",
        value=psd_inverse(g),
        eval_point=t,
        diagnostics={"fisher_cond": g.cond_estimate},
    )


def crlb_biased(
    model: FiniteModel,
    theta: np.ndarray,
    bias_fn: Callable[[np.ndarray], np.ndarray],
    bias_jac_mode: str = "diagonal_per_paper",
) -> BoundReport:
    """MSE bound ``(1+B') G^{-1} (1+B')^T + b b^T`` for an estimator with bias b.

    ``diagonal_per_paper`` keeps only the diagonal bias derivatives
    (off-diagonal entries of 1+B' are zero); ``full_jacobian`` uses
    ``I + db/dtheta`` and is a labeled extension for cross-bias terms.
    """
    if bias_jac_mode not in ("diagonal_per_paper", "full_jacobian"):
        raise ValueError(f"unknown bias_jac_mode '{bias_jac_mode}'")
    t = np.asarray(theta, dtype=float)
    k = t.size
    b = np.asarray(bias_fn(t), dtype=float)
    if b.shape != (k,):
        raise ValueError("bias_fn must return a k-vector")
    h = fd_step(t)
    jac = np.empty((k, k))
    for i in range(k):
        step = np.zeros(k)
        step[i] = h[i]
        jac[:, i] = (np.asarray(bias_fn(t + step)) - np.asarray(bias_fn(t - step))) / (2 * h[i])
    if bias_jac_mode == "diagonal_per_paper":
        m = np.diag(1.0 + np.diag(jac))
    else:
        m = np.eye(k) + jac
    ginv = psd_inverse(fisher_matrix(model, t))
    value = m @ ginv @ m.T + np.outer(b, b)
    return BoundReport(
        kind="crlb_biased",
        value=0.5 * (value + value.T),
        eval_point=t,
        diagnostics={"bias_norm": float(np.linalg.norm(b))},
    )


def _prior_weighted_expectation(model: FiniteModel, prior: Prior, per_node):
    """Prior-weighted average of ``per_node(theta)`` over the interior grid.

    Midpoint quadrature, one cell excluded at each face (the Fisher matrix may
    blow up against the boundary).  Weights are normalized by the prior mass
    on the integration domain so the result is a genuine average; nodes whose
    density underflows to zero carry no mass and are skipped without being
    evaluated.
    """
    nodes, cell = grid_nodes(model.params, model.constraint, exclude_edge_cells=1)
    if len(nodes) == 0:
        raise ValueError("no admissible quadrature nodes")
    total = None
    mass = 0.0
    used = 0
    for node in nodes:
        lam = float(prior.density(node))
        if lam <= 0.0:
            continue
        term = lam * per_node(node)
        total = term if total is None else total + term
        mass += lam
        used += 1
    if total is None or mass <= 0.0:
        raise ValueError("prior carries no mass on the quadrature grid")
    return total / mass, used


def bayesian_crlb(model: FiniteModel, prior: Prior) -> BoundReport:
    """Inverse of the prior-expected Bayesian information matrix.

    The expectation weights the Bayesian metric (itself prior-weighted) by the
    prior once more; the classical variant that weights the unscaled
    information only once is recorded in the diagnostics for reference.
    """
    if prior.normalization_mode != "normalized-on-grid":
        raise ValueError("bayesian_crlb needs a prior normalized on the grid")
    expected, n_nodes = _prior_weighted_expectation(
        model, prior, lambda th: bayesian_metric(model, prior, th).values
    )
    value = psd_inverse(expected)
    diagnostics = {"quadrature_nodes": float(n_nodes)}
    try:
        classical, _ = _prior_weighted_expectation(
            model,
            prior,
            lambda th: bayesian_metric(model, prior, th).values / float(prior.density(th)),
        )
        diagnostics["classical_variant_trace"] = float(np.trace(psd_inverse(classical)))
    except Exception:
        pass  # diagnostic only
    return BoundReport(
        kind="bayesian_crlb", value=value, eval_point="prior-averaged", diagnostics=diagnostics
    )


def groves_rothenberg_gap(model: FiniteModel, prior: Prior) -> np.ndarray:
    """Jensen gap ``E[(G)^{-1}] - (E[G])^{-1}`` of the Bayesian information; PSD."""
    if prior.normalization_mode != "normalized-on-grid":
        raise ValueError("groves_rothenberg_gap needs a prior normalized on the grid")
    mean_of_inv, _ = _prior_weighted_expectation(
        model, prior, lambda th: psd_inverse(bayesian_metric(model, prior, th))
    )
    mean_info, _ = _prior_weighted_expectation(
        model, prior, lambda th: bayesian_metric(model, prior, th).values
    )
    return mean_of_inv - psd_inverse(mean_info)


# ---------------------------------------------------------------------------
# Barankin bound (scalar parameter)
# ---------------------------------------------------------------------------

def _centered_gram(model: FiniteModel, theta: np.ndarray, points: np.ndarray):
    """Centered Gram E[(L-1)(L-1)^T] and offsets for scalar test points."""
    p = eval_pmf(model, theta)
    sqrt_p = np.sqrt(p)
    rows = np.empty((len(points), model.d))
    for i, pt in enumerate(points):
        rows[i] = (eval_pmf(model, pt) - p) / sqrt_p
    gram = rows @ rows.T
    delta = points[:, 0] - theta[0]
    return gram, delta


def _gram_value(gram: np.ndarray, delta: np.ndarray) -> tuple[float, float]:
    """Quadratic form delta^T Gram^{-1} delta and the Gram condition number."""
    eigs = np.linalg.eigvalsh(gram)
    if eigs[0] <= 0.0:
        raise IllConditionedGram("centered Gram is singular (clustered test points?)")
    cond = float(eigs[-1] / eigs[0])
    if cond > GRAM_COND_LIMIT:
        raise IllConditionedGram(
            f"centered Gram condition {cond:.3g} exceeds {GRAM_COND_LIMIT:.0e}; thin the set"
        )
    coeff = np.linalg.solve(gram, delta)
    return float(delta @ coeff), cond


def barankin_fixed(model: FiniteModel, theta: np.ndarray, pts: TestPointSet) -> BoundReport:
    """Barankin quadratic form for an explicit test-point set (scalar parameter)."""
    if model.dim != 1:
        raise ValueError("barankin bounds are implemented for scalar parameters")
    t = np.asarray(theta, dtype=float)
    for pt in pts.points:
        if not model.admissible(pt):
            raise OutOfDomain(f"test point {pt.tolist()} outside the parameter region")
        if abs(pt[0] - t[0]) <= 1e-9:
            raise ValueError("test points must differ from the evaluation point")
    gram, delta = _centered_gram(model, t, pts.points)
    value, cond = _gram_value(gram, delta)
    return BoundReport(
        kind="barankin",
        value=np.array([[value]]),
        eval_point=t,
        diagnostics={"cond_gram": cond, "n_test_points": float(pts.n)},
    )


def _candidate_pool(model: FiniteModel, theta: float) -> np.ndarray:
    lo, hi = model.params.lower[0], model.params.upper[0]
    width = hi - lo
    grid = lo + (np.arange(_COARSE_GRID) + 0.5) * width / _COARSE_GRID
    near = np.array([theta - 1e-3, theta + 1e-3, theta - 1e-5, theta + 1e-5])
    pool = np.concatenate([grid, near])
    pool = pool[(pool > lo + 1e-12 * (1 + abs(lo))) & (pool < hi - 1e-12 * (1 + abs(hi)))]
    pool = pool[np.abs(pool - theta) > 1e-9]
    return np.unique(pool)


def _golden_max(f, lo: float, hi: float, iters: int = 50) -> tuple[float, float]:
    """Golden-section maximization of f on [lo, hi]; returns (x, f(x))."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = c if fc >= fd else d
    return x, max(fc, fd)


def barankin_sup(
    model: FiniteModel, theta: np.ndarray, n_max: int = 3, restarts: int = 2
) -> BoundReport:
    """Lower estimate of the Barankin supremum over test-point sets.

    Deterministic search: all subsets (size <= n_max) of a coarse candidate
    grid augmented with near-theta seeds, golden-section ascent on each
    coordinate of the best subsets, plus seeded random restarts.  Any feasible
    test set yields a valid bound, so undershooting the supremum is safe.
    Ties are broken toward the lexicographically smallest test set.
    """
    if model.dim != 1:
        raise ValueError("barankin bounds are implemented for scalar parameters")
    t = np.asarray(theta, dtype=float)
    th = float(t[0])
    lo, hi = float(model.params.lower[0]), float(model.params.upper[0])
    width = hi - lo
    edge = 1e-9 * (1.0 + abs(lo) + abs(hi))

    pool = _candidate_pool(model, th)
    p_base = eval_pmf(model, t)
    sqrt_p = np.sqrt(p_base)
    rows = np.empty((len(pool), model.d))
    for i, x in enumerate(pool):
        rows[i] = (eval_pmf(model, np.array([x])) - p_base) / sqrt_p
    pool_gram = rows @ rows.T
    pool_delta = pool - th

    def subset_value(idx: tuple[int, ...]) -> float:
        sub = np.ix_(idx, idx)
        try:
            value, _ = _gram_value(pool_gram[sub], pool_delta[list(idx)])
        except IllConditionedGram:
            return -np.inf
        return value

    def exact_value(points: np.ndarray) -> float:
        if np.any(points <= lo + edge) or np.any(points >= hi - edge):
            return -np.inf
        if np.any(np.abs(points - th) <= 1e-9):
            return -np.inf
        if len(points) > 1 and np.min(np.abs(np.diff(np.sort(points)))) <= 1e-9:
            return -np.inf
        gram, delta = _centered_gram(model, t, points[:, None])
        try:
            value, _ = _gram_value(gram, delta)
        except IllConditionedGram:
            return -np.inf
        return value

    def refine(points: np.ndarray, sweeps: int = 2) -> tuple[np.ndarray, float]:
        pts = points.copy()
        best = exact_value(pts)
        span = width / _COARSE_GRID
        for _ in range(sweeps):
            for l in range(len(pts)):
                a = max(lo + edge, pts[l] - span)
                b = min(hi - edge, pts[l] + span)

                def f(x, l=l):
                    trial = pts.copy()
                    trial[l] = x
                    return exact_value(trial)

                # keep the golden bracket clear of the excluded evaluation point
                brackets = [(a, b)]
                if a < th < b:
                    brackets = [(a, th - 1e-9), (th + 1e-9, b)]
                for ba, bb in brackets:
                    if bb <= ba:
                        continue
                    x, val = _golden_max(f, ba, bb)
                    if val > best:
                        best = val
                        pts[l] = x
        return pts, best

    best_val = -np.inf
    best_pts: tuple[float, ...] = ()
    n_pool = len(pool)

    def consider(points: np.ndarray, value: float):
        nonlocal best_val, best_pts
        if not np.isfinite(value):
            return
        key = tuple(sorted(points.tolist()))
        if value > best_val or (value == best_val and key < best_pts):
            best_val, best_pts = value, key

    for n in range(1, n_max + 1):
        if n <= 3:
            idx_seeds = sorted(
                itertools.combinations(range(n_pool), n),
                key=subset_value,
                reverse=True,
            )[:3]
            seeds = [pool[list(s)] for s in idx_seeds]
        else:
            base = list(best_pts)  # greedy extension of the incumbent
            seeds = []
            for j in range(n_pool):
                cand = np.sort(np.append(base, pool[j]))
                if len(np.unique(cand)) == n:
                    seeds.append(cand)
            seeds = sorted(seeds, key=exact_value, reverse=True)[:3]

        for seed in seeds:
            pts, val = refine(np.asarray(seed, dtype=float))
            consider(pts, val)

        # seeded random restarts over the pool, order-independent
        for r in range(restarts):
            u = uniforms(_RESTART_SEED, r, np.arange(n))
            idx = np.unique((u * n_pool).astype(int))
            if len(idx) < n:
                idx = np.unique(np.concatenate([idx, np.arange(n)]))[:n]
            pts, val = refine(pool[idx], sweeps=1)
            consider(pts, val)

    if not np.isfinite(best_val):
        raise IllConditionedGram("no well-conditioned test set found")
    pts_arr = np.asarray(best_pts)
    gram, delta = _centered_gram(model, t, pts_arr[:, None])
    _, cond = _gram_value(gram, delta)
    diagnostics = {
        "n_test_points": float(len(best_pts)),
        "cond_gram": cond,
    }
    for i, x in enumerate(best_pts):
        diagnostics[f"test_point_{i + 1}"] = float(x)
    return BoundReport(
        kind="barankin", value=np.array([[best_val]]), eval_point=t, diagnostics=diagnostics
    )
