"""Command-line front end: fim / bounds / sweep / verify.

Reads a single JSON config, dispatches the computation, and writes CSV/JSON
artifacts.  Outputs are deterministic byte-for-byte given (config, seed):
floats are formatted with 17 significant digits in JSON and 12 in CSV, keys
are emitted sorted, and nothing timestamps.

Exit codes: 0 success, 1 property failure (verify), 2 config error,
3 numerical error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from ._stream import counter_hash
from .bounds import (
    TestPointSet,
    barankin_sup,
    bayesian_crlb,
    crlb_biased,
    crlb_unbiased,
    groves_rothenberg_gap,
)
from .divergence import check_dualistic_structure, kl_unnormalized, metric_from_divergence
from .errors import ConfigError, IgboundsError
from .fisher import bayesian_metric, fisher_matrix, prior_term
from .model import (
    FiniteModel,
    Prior,
    bernoulli_model,
    categorical_model,
    eval_pmf,
    grid_nodes,
    iid_model,
    make_model,
    make_prior,
    make_prior_from_spec,
    pulse_model,
    random_interior,
    score,
)
from .montecarlo import empirical_mse

EXIT_OK = 0
EXIT_PROPERTY = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

_BOUND_IDS = ("crlb_unbiased", "crlb_biased", "bayesian_crlb", "barankin")


# ---------------------------------------------------------------------------
# Deterministic serialization
# ---------------------------------------------------------------------------

def _fmt_json(x: float) -> str:
    return f"{x:.17g}"


def _fmt_csv(x: float) -> str:
    return f"{x:.12g}"


def dump_json(obj) -> str:
    """Deterministic JSON: sorted keys, 17-significant-digit floats."""

    def emit(o):
        if isinstance(o, dict):
            items = ", ".join(f"{json.dumps(str(k))}: {emit(o[k])}" for k in sorted(o))
            return "{" + items + "}"
        if isinstance(o, (list, tuple, np.ndarray)):
            return "[" + ", ".join(emit(v) for v in o) + "]"
        if isinstance(o, bool):
            return "true" if o else "false"
        if isinstance(o, (int, np.integer)):
            return str(int(o))
        if isinstance(o, (float, np.floating)):
            return _fmt_json(float(o))
        if o is None:
            return "null"
        return json.dumps(str(o))

    return emit(obj) + "\n"


def write_csv(path: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = [
                _fmt_csv(c) if isinstance(c, (float, np.floating)) else str(c) for c in row
            ]
            fh.write(",".join(cells) + "\n")


# ---------------------------------------------------------------------------
# Config validation
# ---------------------------------------------------------------------------

def _check_keys(section: dict, allowed: set[str], where: str) -> None:
    if not isinstance(section, dict):
        raise ConfigError(f"{where} must be an object")
    extra = set(section) - allowed
    if extra:
        raise ConfigError(f"unknown {where} keys: {sorted(extra)}")


_COMMON_KEYS = {"model", "prior", "theta", "out", "format", "seed", "h_fd"}
_CMD_KEYS = {
    "fim": _COMMON_KEYS,
    "bounds": _COMMON_KEYS | {"theta_grid", "bounds", "barankin", "bias"},
    "sweep": _COMMON_KEYS | {"sweep"},
    "verify": _COMMON_KEYS | {"trials"},
}


def load_config(path: str, command: str) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    _check_keys(cfg, _CMD_KEYS[command], "config")
    return cfg


def _resolve_model(cfg: dict) -> FiniteModel:
    if "model" not in cfg:
        raise ConfigError("config needs a 'model'")
    return make_model(cfg["model"])


def _resolve_prior(cfg: dict, model: FiniteModel) -> Prior:
    if "prior" not in cfg:
        raise ConfigError("config needs a 'prior'")
    return make_prior_from_spec(model, cfg["prior"])


def _resolve_theta(cfg: dict, model: FiniteModel) -> np.ndarray:
    if "theta" not in cfg:
        raise ConfigError("config needs 'theta'")
    theta = np.asarray(cfg["theta"], dtype=float)
    if theta.shape != (model.dim,):
        raise ConfigError(f"theta must have {model.dim} coordinates")
    return theta


def _theta_list(cfg: dict, model: FiniteModel) -> list[np.ndarray]:
    if "theta_grid" in cfg and "theta" in cfg:
        raise ConfigError("give either 'theta' or 'theta_grid', not both")
    if "theta_grid" in cfg:
        spec = cfg["theta_grid"]
        _check_keys(spec, {"start", "stop", "step"}, "theta_grid")
        for key in ("start", "stop", "step"):
            if key not in spec:
                raise ConfigError(f"theta_grid needs '{key}'")
        if model.dim != 1:
            raise ConfigError("theta_grid is for scalar-parameter models")
        start, stop, step = (float(spec[k]) for k in ("start", "stop", "step"))
        if step <= 0 or stop < start:
            raise ConfigError("theta_grid needs step > 0 and stop >= start")
        n = int(round((stop - start) / step)) + 1
        return [np.array([start + i * step]) for i in range(n)]
    return [_resolve_theta(cfg, model)]


def _out_dir(cfg: dict, args) -> str:
    out = args.out or cfg.get("out") or os.environ.get("IGBOUNDS_OUT") or "."
    os.makedirs(out, exist_ok=True)
    return out


def _bias_fn(spec: dict):
    _check_keys(spec, {"kind", "c", "v"}, "bias")
    kind = spec.get("kind")
    if kind == "shrink":
        if "c" not in spec:
            raise ConfigError("shrink bias needs 'c'")
        c = float(spec["c"])
        return lambda t: (c - 1.0) * t
    if kind == "const":
        if "v" not in spec:
            raise ConfigError("const bias needs 'v'")
        v = float(spec["v"])
        return lambda t: v - t
    raise ConfigError(f"unknown bias kind '{kind}'")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_fim(cfg: dict, args) -> int:
    model = _resolve_model(cfg)
    prior = _resolve_prior(cfg, model)
    theta = _resolve_theta(cfg, model)
    h = cfg.get("h_fd")
    g_e = fisher_matrix(model, theta, h_base=h)
    j_l = prior_term(prior, theta, h_base=h)
    g_b = bayesian_metric(model, prior, theta, h_base=h)
    g_div = metric_from_divergence(model, prior, theta, h_base=h)
    resid = float(
        np.linalg.norm(g_div.values - g_b.values) / max(np.linalg.norm(g_b.values), 1e-300)
    )
    doc = {
        "theta": theta,
        "fisher": g_e.values,
        "prior_term": j_l.values,
        "bayesian_info": g_b.values,
        "divergence_metric": g_div.values,
        "agreement_residual_rel": resid,
        "tolerance_agreement_rel": 1e-3,
    }
    out = _out_dir(cfg, args)
    path = os.path.join(out, "fim.json")
    with open(path, "w") as fh:
        fh.write(dump_json(doc))
    print(path)
    return EXIT_OK


def cmd_bounds(cfg: dict, args) -> int:
    model = _resolve_model(cfg)
    requested = cfg.get("bounds")
    if not requested or not isinstance(requested, list):
        raise ConfigError("config needs a non-empty 'bounds' list")
    for b in requested:
        if b not in _BOUND_IDS:
            raise ConfigError(f"unknown bound '{b}'")
    if "barankin" in requested and model.dim != 1:
        raise ConfigError("barankin bounds need a scalar-parameter model")
    barankin_cfg = cfg.get("barankin", {})
    _check_keys(barankin_cfg, {"n_max", "restarts"}, "barankin")
    thetas = _theta_list(cfg, model)

    rows: list[list] = []

    def add(theta_cells, kind, value):
        for i in range(value.shape[0]):
            for j in range(value.shape[1]):
                rows.append(theta_cells + [kind, i + 1, j + 1, float(value[i, j])])

    prior = None
    if "bayesian_crlb" in requested:
        prior = _resolve_prior(cfg, model)
        add(["prior-averaged"] * model.dim, "bayesian_crlb", bayesian_crlb(model, prior).value)
    for theta in thetas:
        cells = [float(x) for x in theta]
        for kind in requested:
            if kind == "crlb_unbiased":
                add(cells, kind, crlb_unbiased(model, theta).value)
            elif kind == "crlb_biased":
                if "bias" not in cfg:
                    raise ConfigError("crlb_biased needs a 'bias' spec")
                add(cells, kind, crlb_biased(model, theta, _bias_fn(cfg["bias"])).value)
            elif kind == "barankin":
                rep = barankin_sup(
                    model,
                    theta,
                    n_max=int(barankin_cfg.get("n_max", 3)),
                    restarts=int(barankin_cfg.get("restarts", 2)),
                )
                add(cells, kind, rep.value)

    header = [f"theta_{i + 1}" for i in range(model.dim)] + [
        "bound_kind",
        "entry_i",
        "entry_j",
        "value",
    ]
    out = _out_dir(cfg, args)
    if args.format == "json":
        path = os.path.join(out, "bounds.json")
        doc = [dict(zip(header, row)) for row in rows]
        with open(path, "w") as fh:
            fh.write(dump_json(doc))
    else:
        path = os.path.join(out, "bounds.csv")
        write_csv(path, header, rows)
    print(path)
    return EXIT_OK


_SWEEP_KEYS = {
    "eps_out",
    "d",
    "sigma",
    "theta",
    "obs_per_trial",
    "trials",
    "n_max",
    "restarts",
    "grid_points_per_dim",
}

_SWEEP_DEFAULTS = {
    "eps_out": [0.01, 0.05, 0.1, 0.2, 0.4, 0.6],
    "d": 64,
    "sigma": 1.0,
    "theta": 32.0,
    "obs_per_trial": 2,
    "trials": 4000,
    "n_max": 3,
    "restarts": 2,
    "grid_points_per_dim": 129,
}


def cmd_sweep(cfg: dict, args) -> int:
    sweep = dict(_SWEEP_DEFAULTS)
    user = cfg.get("sweep", {})
    _check_keys(user, _SWEEP_KEYS, "sweep")
    sweep.update(user)
    seed = args.seed if args.seed is not None else cfg.get("seed")
    if seed is None:
        raise ConfigError("sweep runs Monte Carlo: a seed is required")
    seed = int(seed)
    theta = np.array([float(sweep["theta"])])
    obs = int(sweep["obs_per_trial"])

    rows = []
    for idx, eps in enumerate(sweep["eps_out"]):
        base = pulse_model(
            d=int(sweep["d"]),
            sigma=float(sweep["sigma"]),
            eps_out=float(eps),
            grid_points_per_dim=int(sweep["grid_points_per_dim"]),
        )
        experiment = iid_model(base, obs) if obs > 1 else base
        crlb = crlb_unbiased(experiment, theta).scalar
        bar = barankin_sup(
            experiment, theta, n_max=int(sweep["n_max"]), restarts=int(sweep["restarts"])
        ).scalar
        row_seed = int(counter_hash(seed, idx, 0))
        mc = empirical_mse(
            base, theta, "mle", int(sweep["trials"]), obs, seed=row_seed, threads=args.threads
        )
        snr = 1.0 / float(eps) - 1.0
        rows.append(
            [snr, float(eps), crlb, bar, float(mc.mse[0, 0]), float(mc.ci_halfwidth[0, 0])]
        )

    header = ["snr", "eps_out", "crlb", "barankin", "mc_mse", "mc_ci"]
    out = _out_dir(cfg, args)
    if args.format == "json":
        path = os.path.join(out, "sweep.json")
        with open(path, "w") as fh:
            fh.write(dump_json([dict(zip(header, row)) for row in rows]))
    else:
        path = os.path.join(out, "sweep.csv")
        write_csv(path, header, rows)
    print(path)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Verify: reduced-scale run of the cross-module property suite
# ---------------------------------------------------------------------------

def _verify_checks(cfg: dict, args):
    h = cfg.get("h_fd")
    trials = int(cfg.get("trials", 2000))
    zoo = {
        "bernoulli": bernoulli_model(),
        "categorical3": categorical_model(d=3),
        "pulse16": pulse_model(d=16, eps_out=0.2),
    }
    extra_model = make_model(cfg["model"]) if "model" in cfg else None

    def pmf_normalization():
        worst = 0.0
        for name, model in zoo.items():
            rng = np.random.default_rng(2024)
            for th in random_interior(model, rng, 20):
                raw = np.asarray(model.pmf(th), dtype=float)
                worst = max(worst, abs(float(raw.sum()) - 1.0))
                eval_pmf(model, th)
        if extra_model is not None:
            nodes, _ = grid_nodes(extra_model.params, extra_model.constraint)
            for th in nodes:
                p = eval_pmf(extra_model, th)
                worst = max(worst, abs(float(p.sum()) - 1.0))
        return worst, 1e-10

    def score_zero_mean():
        worst = 0.0
        for model in zoo.values():
            rng = np.random.default_rng(2025)
            # wide margin: stays differentiable even under large h_fd overrides
            for th in random_interior(model, rng, 5, margin_frac=0.35):
                s = score(model, th, h_base=h)
                worst = max(worst, float(np.abs(s @ eval_pmf(model, th)).max()))
        return worst, 5e-6

    def kl_properties():
        rng = np.random.default_rng(2026)
        worst = 0.0
        for _ in range(200):
            p = rng.uniform(0.05, 2.0, size=6)
            q = rng.uniform(0.05, 2.0, size=6)
            v = kl_unnormalized(p, q)
            worst = min(worst, v)
            if kl_unnormalized(p, p) != 0.0:
                return 1.0, 0.0
        return -worst, 1e-15

    def metric_consistency():
        worst = 0.0
        for model in (zoo["bernoulli"], zoo["pulse16"]):
            rng = np.random.default_rng(2027)
            for kind in ("uniform", "beta22"):
                prior = make_prior(model, kind)
                # wide margin keeps the 2h stencil inside the box under overrides
                for th in random_interior(model, rng, 3, margin_frac=0.35):
                    gd = metric_from_divergence(model, prior, th, h_base=h).values
                    gb = bayesian_metric(model, prior, th, h_base=h).values
                    worst = max(worst, float(np.linalg.norm(gd - gb) / np.linalg.norm(gb)))
        return worst, 1e-3

    def duality_residual():
        worst = 0.0
        for model, kind, th in (
            (zoo["bernoulli"], "beta22", np.array([0.37])),
            (zoo["pulse16"], "uniform", np.array([5.81])),
        ):
            prior = make_prior(model, kind)
            worst = max(worst, check_dualistic_structure(model, prior, th))
        return worst, 1e-2

    def barankin_dominates_crlb():
        worst = -np.inf
        for model, ths in (
            (zoo["bernoulli"], [0.3, 0.62]),
            (zoo["pulse16"], [6.4]),
        ):
            for th in ths:
                t = np.array([th])
                gap = crlb_unbiased(model, t).scalar - barankin_sup(
                    model, t, n_max=2, restarts=1
                ).scalar
                worst = max(worst, gap)
        return worst, 1e-9

    def groves_rothenberg_psd():
        worst = 0.0
        model = bernoulli_model(lower=0.1, upper=0.9)
        for kind in ("uniform", "beta22"):
            gap = groves_rothenberg_gap(model, make_prior(model, kind))
            worst = min(worst, float(np.linalg.eigvalsh(gap).min()))
        return -worst, 1e-8

    def mc_dominates_crlb():
        model = zoo["bernoulli"]
        t = np.array([0.5])
        ten = iid_model(model, 10)
        crlb = crlb_unbiased(ten, t).scalar
        est = empirical_mse(
            model, t, "shrink:1", trials, 10, seed=int(cfg.get("seed", 7)),
            threads=args.threads,
        )
        gap = crlb - float(est.mse[0, 0]) - 3.0 * float(est.ci_halfwidth[0, 0])
        return gap, 0.0

    def mse_decomposition():
        model = zoo["bernoulli"]
        est = empirical_mse(model, np.array([0.4]), "shrink:1", 500, 5, seed=11)
        resid = est.mse - est.cov - np.outer(est.mean - 0.4, est.mean - 0.4)
        return float(np.abs(resid).max()), 1e-10

    return [
        ("pmf_normalization", pmf_normalization),
        ("score_zero_mean", score_zero_mean),
        ("kl_properties", kl_properties),
        ("metric_consistency", metric_consistency),
        ("duality_residual", duality_residual),
        ("barankin_dominates_crlb", barankin_dominates_crlb),
        ("groves_rothenberg_psd", groves_rothenberg_psd),
        ("mc_dominates_crlb", mc_dominates_crlb),
        ("mse_decomposition", mse_decomposition),
    ]


def cmd_verify(cfg: dict, args) -> int:
    report = []
    all_ok = True
    for name, fn in _verify_checks(cfg, args):
        try:
            value, tol = fn()
            passed = bool(value <= tol)
            detail = ""
        except IgboundsError as exc:
            value, tol = float("nan"), float("nan")
            passed = False
            detail = f"{type(exc).__name__}: {exc}"
        all_ok &= passed
        report.append(
            {"name": name, "passed": passed, "value": value, "tolerance": tol, "detail": detail}
        )
    doc = {"all_passed": all_ok, "checks": report}
    out = _out_dir(cfg, args)
    path = os.path.join(out, "verify.json")
    with open(path, "w") as fh:
        fh.write(dump_json(doc))
    print(path)
    if not all_ok:
        failing = [c["name"] + (f" ({c['detail']})" if c["detail"] else "") for c in report
                   if not c["passed"]]
        print("verify failed: " + "; ".join(failing), file=sys.stderr)
        return EXIT_PROPERTY
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="igbounds",
        description="Information-geometric error bounds on finite-alphabet models",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("fim", "information matrices and the divergence-metric agreement"),
        ("bounds", "error bounds at a point or over a parameter grid"),
        ("sweep", "threshold-effect sweep: CRLB vs Barankin vs Monte Carlo"),
        ("verify", "run the cross-module property suite"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="path to the JSON experiment config")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--threads", type=int, default=1,
                       help="Monte Carlo worker threads (never changes outputs)")
    return parser


_DISPATCH = {"fim": cmd_fim, "bounds": cmd_bounds, "sweep": cmd_sweep, "verify": cmd_verify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.command)
        return _DISPATCH[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IgboundsError as exc:
        print(f"numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:  # contract misuse reached the library surface
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
