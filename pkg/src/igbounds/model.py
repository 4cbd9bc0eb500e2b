"""Finite-alphabet parametric families, priors, and the built-in model zoo.

A model is a smooth map from a parameter box to probability vectors over a
finite alphabet.  Everything downstream (information matrices, divergences,
error bounds, Monte Carlo) consumes the three evaluation surfaces defined
here: ``eval_pmf``, ``score`` and ``log_grad_prior``.

Conventions
-----------
* Parameter boxes are open: operations require strict interiority, and
  derivative-based operations additionally require a margin of one
  finite-difference step from every face.
* Pmfs are clamped below at ``floor`` and renormalized, so logs and
  likelihood ratios stay finite everywhere.
* Finite differences are central, with per-coordinate step
  ``h = base * (1 + |theta_i|)`` (``base`` defaults to 1e-4).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaln

from .errors import ConfigError, DegeneratePmf, OutOfDomain, ScoreInconsistent

FD_BASE = 1e-4
PMF_SUM_TOL = 1e-3  # raw pmf mass may be off by at most this before we call it degenerate


def fd_step(theta: np.ndarray, base: float | None = None) -> np.ndarray:
    """Per-coordinate central-difference step ``base * (1 + |theta_i|)``."""
    b = FD_BASE if base is None else float(base)
    return b * (1.0 + np.abs(np.asarray(theta, dtype=float)))


@dataclass(frozen=True)
class Alphabet:
    """Finite observation alphabet of ``size`` atoms, optionally labeled."""

    size: int
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.size < 2:
            raise ValueError("alphabet needs at least two atoms")
        if self.labels is not None:
            if len(self.labels) != self.size:
                raise ValueError("labels must have one entry per atom")
            if len(set(self.labels)) != self.size:
                raise ValueError("labels must be unique")


@dataclass(frozen=True)
class ParameterSpace:
    """Open box in R^k with a per-dimension grid resolution."""

    dim: int
    lower: np.ndarray
    upper: np.ndarray
    grid_points_per_dim: int = 161

    def __post_init__(self):
        object.__setattr__(self, "lower", np.asarray(self.lower, dtype=float))
        object.__setattr__(self, "upper", np.asarray(self.upper, dtype=float))
        if self.lower.shape != (self.dim,) or self.upper.shape != (self.dim,):
            raise ValueError("bounds must be k-vectors")
        if not np.all(self.lower < self.upper):
            raise ValueError("need lower < upper in every dimension")
        if self.grid_points_per_dim < 3:
            raise ValueError("grid needs at least 3 points per dimension")

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def contains(self, theta: np.ndarray, margin: np.ndarray | float = 0.0) -> bool:
        t = np.asarray(theta, dtype=float)
        if t.shape != (self.dim,):
            return False
        return bool(np.all(t > self.lower + margin) and np.all(t < self.upper - margin))


@dataclass(frozen=True)
class FiniteModel:
    """Parametric family ``theta -> pmf`` over a finite alphabet.

    ``pmf`` maps a k-vector to a d-vector of probabilities.  ``analytic_score``
    (optional) maps a k-vector to the k x d matrix of log-pmf gradients.
    ``constraint`` (optional) marks the admissible region when the box alone
    cannot express it (the categorical simplex); it takes ``(theta, slack)``
    where ``slack`` strengthens the constraint by an absolute margin in
    parameter units.  ``pmf_batch`` (optional) is a vectorized pmf used by
    the Monte Carlo estimators.
    """

    alphabet: Alphabet
    params: ParameterSpace
    pmf: Callable[[np.ndarray], np.ndarray]
    analytic_score: Callable[[np.ndarray], np.ndarray] | None = None
    floor: float = 1e-12
    constraint: Callable[..., bool] | None = None
    pmf_batch: Callable[[np.ndarray], np.ndarray] | None = None
    family: str = "custom"

    @property
    def dim(self) -> int:
        return self.params.dim

    @property
    def d(self) -> int:
        return self.alphabet.size

    def admissible(self, theta: np.ndarray, margin: np.ndarray | float = 0.0) -> bool:
        t = np.asarray(theta, dtype=float)
        if not self.params.contains(t, margin=margin):
            return False
        if self.constraint is None:
            return True
        return bool(self.constraint(t, float(np.max(margin))))


@dataclass(frozen=True)
class Prior:
    """Positive density on the parameter box, with optional analytic log-gradient."""

    density: Callable[[np.ndarray], float]
    analytic_log_grad: Callable[[np.ndarray], np.ndarray] | None = None
    normalization_mode: str = "as-given"  # or "normalized-on-grid"
    name: str = "prior"


# ---------------------------------------------------------------------------
# Evaluation surfaces
# ---------------------------------------------------------------------------

def eval_pmf(model: FiniteModel, theta: np.ndarray) -> np.ndarray:
    """Evaluate the pmf at an interior point, floor-clamped and renormalized.

    Raises OutOfDomain off the admissible region and DegeneratePmf when the
    raw evaluator returns something that is not close to a probability vector
    (sub-floor mass above 1e-3 of the total, or total mass off 1 by 1e-3).
    """
    t = np.asarray(theta, dtype=float)
    if not model.admissible(t):
        raise OutOfDomain(f"theta {t.tolist()} not strictly inside the parameter region")
    raw = np.asarray(model.pmf(t), dtype=float)
    if raw.shape != (model.d,):
        raise DegeneratePmf(f"pmf returned shape {raw.shape}, expected ({model.d},)")
    total = float(raw.sum())
    deficit = float(np.maximum(model.floor - raw, 0.0).sum())
    if deficit > PMF_SUM_TOL * abs(total) or abs(total - 1.0) > PMF_SUM_TOL:
        raise DegeneratePmf(
            f"raw pmf degenerate at theta {t.tolist()}: total={total:.6g}, "
            f"sub-floor deficit={deficit:.3g}"
        )
    clamped = np.maximum(raw, model.floor)
    return clamped / clamped.sum()


def score(model: FiniteModel, theta: np.ndarray, h_base: float | None = None) -> np.ndarray:
    """k x d matrix of log-pmf gradients, analytic when available.

    The finite-difference fallback uses central differences of
    ``log eval_pmf`` per coordinate.  Rows are required to have zero mean
    under the pmf within 5e-6; a larger residual raises ScoreInconsistent
    (analytic/numeric mismatch or an oversized step).
    """
    t = np.asarray(theta, dtype=float)
    h = fd_step(t, h_base)
    if not model.admissible(t, margin=h):
        raise OutOfDomain(
            f"theta {t.tolist()} too close to the boundary for differentiation"
        )
    p = eval_pmf(model, t)
    if model.analytic_score is not None:
        s = np.asarray(model.analytic_score(t), dtype=float)
        if s.shape != (model.dim, model.d):
            raise ScoreInconsistent(f"analytic score has shape {s.shape}")
    else:
        s = np.empty((model.dim, model.d))
        for i in range(model.dim):
            step = np.zeros(model.dim)
            step[i] = h[i]
            lp = np.log(eval_pmf(model, t + step))
            lm = np.log(eval_pmf(model, t - step))
            s[i] = (lp - lm) / (2.0 * h[i])
    mean_resid = np.abs(s @ p)
    if np.any(mean_resid >= 5e-6):
        raise ScoreInconsistent(
            f"score zero-mean residual {mean_resid.max():.3g} at theta {t.tolist()}"
        )
    return s


def log_grad_prior(prior: Prior, theta: np.ndarray, h_base: float | None = None) -> np.ndarray:
    """Gradient of log prior density, analytic when available else central FD."""
    t = np.asarray(theta, dtype=float)
    if prior.analytic_log_grad is not None:
        return np.asarray(prior.analytic_log_grad(t), dtype=float)
    h = fd_step(t, h_base)
    g = np.empty_like(t)
    for i in range(t.size):
        step = np.zeros(t.size)
        step[i] = h[i]
        dp = prior.density(t + step)
        dm = prior.density(t - step)
        if not (dp > 0.0 and dm > 0.0):
            raise OutOfDomain(f"prior density not positive near theta {t.tolist()}")
        g[i] = (math.log(dp) - math.log(dm)) / (2.0 * h[i])
    return g


# ---------------------------------------------------------------------------
# Parameter grids
# ---------------------------------------------------------------------------

def axis_midpoints(space: ParameterSpace, exclude_edge_cells: int = 0) -> list[np.ndarray]:
    """Midpoints of the per-dimension grid cells, optionally dropping edge cells."""
    m = space.grid_points_per_dim
    e = exclude_edge_cells
    out = []
    for i in range(space.dim):
        h = (space.upper[i] - space.lower[i]) / m
        j = np.arange(e, m - e)
        out.append(space.lower[i] + (j + 0.5) * h)
    return out

def grid_nodes(
    space: ParameterSpace,
    constraint: Callable[[np.ndarray], bool] | None = None,
    exclude_edge_cells: int = 0,
) -> tuple[np.ndarray, float]:
    """Product midpoint grid as an (N, k) array plus the cell volume.

    Nodes violating ``constraint`` are dropped; the cell volume is unchanged
    (midpoint quadrature over the remaining cells).
    """
    axes = axis_midpoints(space, exclude_edge_cells)
    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([m.ravel() for m in mesh], axis=1)
    if constraint is not None:
        keep = np.fromiter((bool(constraint(n)) for n in nodes), dtype=bool, count=len(nodes))
        nodes = nodes[keep]
    m = space.grid_points_per_dim
    cell = float(np.prod((space.upper - space.lower) / m))
    return nodes, cell


def random_interior(
    model: FiniteModel,
    rng: np.random.Generator,
    count: int,
    margin_frac: float = 0.1,
) -> np.ndarray:
    """Sample admissible interior points, keeping a relative margin off every face.

    The margin also strengthens the model constraint (e.g. it keeps the
    categorical points away from the simplex face, not just the box faces).
    """
    lo = model.params.lower + margin_frac * model.params.width
    hi = model.params.upper - margin_frac * model.params.width
    slack = margin_frac * float(np.max(model.params.width))
    out = np.empty((count, model.dim))
    got = 0
    while got < count:
        cand = rng.uniform(lo, hi)
        if model.constraint is None or model.constraint(cand, slack):
            out[got] = cand
            got += 1
    return out


# ---------------------------------------------------------------------------
# Model zoo
# ---------------------------------------------------------------------------

def bernoulli_model(
    lower: float = 0.0, upper: float = 1.0, grid_points_per_dim: int = 161
) -> FiniteModel:
    """Bernoulli family ``p_theta = (1-theta, theta)`` on an open sub-interval of (0,1)."""
    if not (0.0 <= lower < upper <= 1.0):
        raise ValueError("bernoulli box must sit inside [0, 1]")
    space = ParameterSpace(1, np.array([lower]), np.array([upper]), grid_points_per_dim)

    def pmf(t):
        return np.array([1.0 - t[0], t[0]])

    def ascore(t):
        return np.array([[-1.0 / (1.0 - t[0]), 1.0 / t[0]]])

    def pmf_batch(ts):
        col = ts[:, 0]
        return np.stack([1.0 - col, col], axis=1)

    return FiniteModel(
        alphabet=Alphabet(2, ("0", "1")),
        params=space,
        pmf=pmf,
        analytic_score=ascore,
        pmf_batch=pmf_batch,
        family="bernoulli",
    )


def categorical_model(d: int = 3, grid_points_per_dim: int = 41) -> FiniteModel:
    """Full simplex family in the chart ``p = (theta_1..theta_{d-1}, 1 - sum)``.

    The box is [0,1]^{d-1}; the simplex constraint ``sum(theta) < 1 - 1e-3``
    marks the admissible region (a box cannot express it).
    """
    if d < 2:
        raise ValueError("categorical needs d >= 2")
    k = d - 1
    space = ParameterSpace(k, np.zeros(k), np.ones(k), grid_points_per_dim)

    def constraint(t, slack=0.0):
        return float(np.sum(t)) < 1.0 - 1e-3 - slack

    def pmf(t):
        return np.concatenate([t, [1.0 - float(np.sum(t))]])

    def ascore(t):
        last = 1.0 - float(np.sum(t))
        s = np.zeros((k, d))
        for i in range(k):
            s[i, i] = 1.0 / t[i]
            s[i, d - 1] = -1.0 / last
        return s

    def pmf_batch(ts):
        last = 1.0 - ts.sum(axis=1, keepdims=True)
        return np.concatenate([ts, last], axis=1)

    return FiniteModel(
        alphabet=Alphabet(d, tuple(str(i) for i in range(d))),
        params=space,
        pmf=pmf,
        analytic_score=ascore,
        constraint=constraint,
        pmf_batch=pmf_batch,
        family="categorical",
    )


def pulse_model(
    d: int = 64,
    sigma: float = 1.0,
    eps_out: float | None = None,
    snr: float | None = None,
    grid_points_per_dim: int = 129,
) -> FiniteModel:
    """Pulse-location family: Gaussian kernel over bins plus a uniform outlier floor.

    ``p_tau(x) = (1 - eps) * K_sigma(x, tau) + eps / d`` with bins x = 0..d-1,
    K the bin-normalized Gaussian kernel centered at tau, and outlier weight
    ``eps = 1 / (1 + snr)``.  tau lives in the open interval (1, d-2).  Low snr
    floods the pmf with outliers, which is what produces the threshold effect
    in the estimation error.
    """
    if (eps_out is None) == (snr is None):
        raise ValueError("give exactly one of eps_out or snr")
    eps = float(eps_out) if eps_out is not None else 1.0 / (1.0 + float(snr))
    if not (0.0 < eps < 1.0):
        raise ValueError("outlier weight must be in (0, 1)")
    if d < 8:
        raise ValueError("pulse model needs at least 8 bins")
    space = ParameterSpace(
        1, np.array([1.0]), np.array([float(d - 2)]), grid_points_per_dim
    )
    bins = np.arange(d, dtype=float)
    inv2s2 = 1.0 / (2.0 * sigma * sigma)

    def kernel(tau):
        w = np.exp(-((bins - tau) ** 2) * inv2s2)
        return w / w.sum()

    def pmf(t):
        return (1.0 - eps) * kernel(t[0]) + eps / d

    def ascore(t):
        tau = t[0]
        w = np.exp(-((bins - tau) ** 2) * inv2s2)
        W = w.sum()
        drift = (bins - tau) / (sigma * sigma)
        dK = (w / W) * (drift - (w @ drift) / W)
        p = (1.0 - eps) * (w / W) + eps / d
        return ((1.0 - eps) * dK / p)[None, :]

    def pmf_batch(ts):
        taus = ts[:, 0][:, None]
        w = np.exp(-((bins[None, :] - taus) ** 2) * inv2s2)
        k = w / w.sum(axis=1, keepdims=True)
        return (1.0 - eps) * k + eps / d

    return FiniteModel(
        alphabet=Alphabet(d, tuple(str(i) for i in range(d))),
        params=space,
        pmf=pmf,
        analytic_score=ascore,
        pmf_batch=pmf_batch,
        family="pulse",
    )


def iid_model(base: FiniteModel, n: int) -> FiniteModel:
    """n-fold i.i.d. product of ``base``.

    A Bernoulli base is compressed to its sufficient statistic (binomial
    counts, alphabet n+1); any other base gets the explicit product alphabet
    of size d^n, capped at 2^20 atoms.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    if base.family == "bernoulli":
        space = base.params

        def pmf(t):
            th = t[0]
            j = np.arange(n + 1, dtype=float)
            logc = gammaln(n + 1) - gammaln(j + 1) - gammaln(n - j + 1)
            return np.exp(logc + j * np.log(th) + (n - j) * np.log(1.0 - th))

        def ascore(t):
            th = t[0]
            j = np.arange(n + 1, dtype=float)
            return (j / th - (n - j) / (1.0 - th))[None, :]

        def pmf_batch(ts):
            th = ts[:, 0][:, None]
            j = np.arange(n + 1, dtype=float)[None, :]
            logc = gammaln(n + 1) - gammaln(j + 1) - gammaln(n - j + 1)
            return np.exp(logc + j * np.log(th) + (n - j) * np.log(1.0 - th))

        return FiniteModel(
            alphabet=Alphabet(n + 1, tuple(str(i) for i in range(n + 1))),
            params=space,
            pmf=pmf,
            analytic_score=ascore,
            pmf_batch=pmf_batch,
            family="binomial",
        )

    d = base.alphabet.size
    if d**n > 2**20:
        raise ValueError(f"product alphabet {d}^{n} too large")
    dn = d**n
    base_score = base.analytic_score

    def pmf(t):
        p = np.asarray(base.pmf(t), dtype=float)
        out = p
        for _ in range(n - 1):
            out = np.multiply.outer(out, p).ravel()
        return out

    ascore = None
    if base_score is not None:

        def ascore(t):
            s = np.asarray(base_score(t), dtype=float)  # (k, d)
            k = s.shape[0]
            total = np.zeros((k, dn))
            for pos in range(n):
                # index of position `pos` cycles with period d^(n-1-pos)
                reps = d ** (n - 1 - pos)
                tile = d**pos
                idx = np.tile(np.repeat(np.arange(d), reps), tile)
                total += s[:, idx]
            return total

    return FiniteModel(
        alphabet=Alphabet(dn),
        params=base.params,
        pmf=pmf,
        analytic_score=ascore,
        floor=base.floor,
        constraint=base.constraint,
        family="iid",
    )


def table_model(
    lower: float,
    upper: float,
    grid_points_per_dim: int,
    pmf_rows: Sequence[Sequence[float]],
) -> FiniteModel:
    """Scalar-parameter model given by an explicit pmf row per grid midpoint.

    No interpolation: evaluation off the grid midpoints raises OutOfDomain,
    so derivative-based operations are unavailable for table models.
    """
    rows = np.asarray(pmf_rows, dtype=float)
    if rows.ndim != 2:
        raise ConfigError("pmf table must be a list of rows")
    m = int(grid_points_per_dim)
    if rows.shape[0] != m:
        raise ConfigError(f"pmf table has {rows.shape[0]} rows, expected {m}")
    d = rows.shape[1]
    space = ParameterSpace(1, np.array([lower]), np.array([upper]), m)
    mids = axis_midpoints(space)[0]

    def pmf(t):
        j = int(np.argmin(np.abs(mids - t[0])))
        if abs(mids[j] - t[0]) > 1e-9:
            raise OutOfDomain(
                f"table models are grid-aligned; {t[0]!r} is not a grid midpoint"
            )
        return rows[j].copy()

    return FiniteModel(
        alphabet=Alphabet(d, tuple(str(i) for i in range(d))),
        params=space,
        pmf=pmf,
        family="table",
    )


_MODEL_KEYS = {
    "bernoulli": {"id", "lower", "upper", "grid_points_per_dim"},
    "categorical": {"id", "d", "grid_points_per_dim"},
    "pulse": {"id", "d", "sigma", "eps_out", "snr", "grid_points_per_dim"},
    "iid": {"id", "base", "n"},
    "table": {"id", "lower", "upper", "grid_points_per_dim", "pmf"},
}


def make_model(spec: dict) -> FiniteModel:
    """Build a zoo model from a JSON-style spec dict.  Unknown ids/keys are errors."""
    if not isinstance(spec, dict) or "id" not in spec:
        raise ConfigError("unknown model: spec must be an object with an 'id'")
    mid = spec["id"]
    if mid not in _MODEL_KEYS:
        raise ConfigError(f"unknown model '{mid}'")
    extra = set(spec) - _MODEL_KEYS[mid]
    if extra:
        raise ConfigError(f"unknown model keys {sorted(extra)} for '{mid}'")
    try:
        if mid == "bernoulli":
            return bernoulli_model(
                lower=spec.get("lower", 0.0),
                upper=spec.get("upper", 1.0),
                grid_points_per_dim=spec.get("grid_points_per_dim", 161),
            )
        if mid == "categorical":
            return categorical_model(
                d=spec.get("d", 3), grid_points_per_dim=spec.get("grid_points_per_dim", 41)
            )
        if mid == "pulse":
            return pulse_model(
                d=spec.get("d", 64),
                sigma=spec.get("sigma", 1.0),
                eps_out=spec.get("eps_out"),
                snr=spec.get("snr"),
                grid_points_per_dim=spec.get("grid_points_per_dim", 129),
            )
        if mid == "iid":
            if "base" not in spec or "n" not in spec:
                raise ConfigError("iid model needs 'base' and 'n'")
            return iid_model(make_model(spec["base"]), int(spec["n"]))
        # table
        for key in ("lower", "upper", "grid_points_per_dim", "pmf"):
            if key not in spec:
                raise ConfigError(f"table model needs '{key}'")
        return table_model(
            spec["lower"], spec["upper"], spec["grid_points_per_dim"], spec["pmf"]
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# Prior factory
# ---------------------------------------------------------------------------

def _grid_normalize(
    raw: Callable[[np.ndarray], float],
    space: ParameterSpace,
    constraint: Callable[[np.ndarray], bool] | None,
) -> float:
    nodes, cell = grid_nodes(space, constraint)
    q = sum(raw(n) for n in nodes) * cell
    if q <= 0.0:
        raise ValueError("prior density has nonpositive grid mass")
    return q


def make_prior(
    model: FiniteModel,
    kind: str,
    *,
    value: float = 1.0,
    sigma_frac: float = 0.25,
    normalized: bool = True,
) -> Prior:
    """Built-in priors on a model's parameter box.

    kinds:
      * ``uniform``    constant density (proper when normalized)
      * ``const``      constant ``value`` taken as-given (improper is fine);
                       the classical non-Bayesian geometry is ``const`` with
                       value 1
      * ``beta22``     product of 6u(1-u) in box-relative coordinates u
      * ``truncgauss`` product Gaussian at the box center, sd = sigma_frac*width

    ``normalized=True`` renormalizes on the full midpoint grid (intersected
    with the model constraint) and tags the prior ``normalized-on-grid``.
    """
    space = model.params
    lo, wid = space.lower.copy(), space.width.copy()

    if kind == "const":
        v = float(value)
        if v <= 0.0:
            raise ValueError("const prior needs a positive value")
        return Prior(
            density=lambda t, v=v: v,
            analytic_log_grad=lambda t: np.zeros(space.dim),
            normalization_mode="as-given",
            name=f"const:{v:g}",
        )

    if kind == "uniform":
        raw = lambda t: 1.0
        log_grad = lambda t: np.zeros(space.dim)
    elif kind == "beta22":

        def raw(t):
            u = (np.asarray(t) - lo) / wid
            return float(np.prod(6.0 * u * (1.0 - u) / wid))

        def log_grad(t):
            u = (np.asarray(t) - lo) / wid
            return (1.0 / u - 1.0 / (1.0 - u)) / wid

    elif kind == "truncgauss":
        mu = lo + 0.5 * wid
        sd = sigma_frac * wid

        def raw(t):
            z = (np.asarray(t) - mu) / sd
            return float(np.prod(np.exp(-0.5 * z * z) / (sd * math.sqrt(2.0 * math.pi))))

        def log_grad(t):
            return -(np.asarray(t) - mu) / (sd * sd)

    else:
        raise ValueError(f"unknown prior kind '{kind}'")

    if normalized:
        q = _grid_normalize(raw, space, model.constraint)
        return Prior(
            density=lambda t, q=q: raw(t) / q,
            analytic_log_grad=log_grad,
            normalization_mode="normalized-on-grid",
            name=kind,
        )
    return Prior(
        density=raw,
        analytic_log_grad=log_grad,
        normalization_mode="as-given",
        name=kind,
    )


_PRIOR_KEYS = {
    "uniform": {"id", "normalized"},
    "const": {"id", "value"},
    "beta22": {"id", "normalized"},
    "truncgauss": {"id", "sigma_frac", "normalized"},
}


def make_prior_from_spec(model: FiniteModel, spec: dict) -> Prior:
    """Prior from a JSON-style spec dict (CLI surface)."""
    if not isinstance(spec, dict) or "id" not in spec:
        raise ConfigError("prior spec must be an object with an 'id'")
    pid = spec["id"]
    if pid not in _PRIOR_KEYS:
        raise ConfigError(f"unknown prior '{pid}'")
    extra = set(spec) - _PRIOR_KEYS[pid]
    if extra:
        raise ConfigError(f"unknown prior keys {sorted(extra)} for '{pid}'")
    try:
        return make_prior(
            model,
            pid,
            value=spec.get("value", 1.0),
            sigma_frac=spec.get("sigma_frac", 0.25),
            normalized=spec.get("normalized", True),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
