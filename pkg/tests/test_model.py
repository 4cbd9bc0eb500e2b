"""Model-layer tests: pmf evaluation, scores, priors, zoo invariants."""

import numpy as np
import pytest

from igbounds.errors import ConfigError, DegeneratePmf, OutOfDomain, ScoreInconsistent
from igbounds.model import (
    Alphabet,
    FiniteModel,
    ParameterSpace,
    bernoulli_model,
    categorical_model,
    eval_pmf,
    fd_step,
    iid_model,
    log_grad_prior,
    make_model,
    make_prior,
    pulse_model,
    random_interior,
    score,
    table_model,
)

ALL_MODELS = {
    "bernoulli": bernoulli_model(),
    "categorical3": categorical_model(d=3),
    "pulse16": pulse_model(d=16, eps_out=0.2),
    "binomial10": iid_model(bernoulli_model(), 10),
}


def test_alphabet_validation():
    with pytest.raises(ValueError):
        Alphabet(1)
    with pytest.raises(ValueError):
        Alphabet(2, ("a",))
    with pytest.raises(ValueError):
        Alphabet(2, ("a", "a"))


def test_parameter_space_validation():
    with pytest.raises(ValueError):
        ParameterSpace(1, np.array([1.0]), np.array([0.0]))
    with pytest.raises(ValueError):
        ParameterSpace(1, np.array([0.0]), np.array([1.0]), grid_points_per_dim=2)


def test_eval_pmf_bernoulli_symmetry():
    m = bernoulli_model()
    np.testing.assert_allclose(eval_pmf(m, np.array([0.5])), [0.5, 0.5])
    np.testing.assert_allclose(eval_pmf(m, np.array([0.25])), [0.75, 0.25])


def test_eval_pmf_pulse_matches_definition():
    # direct evaluation of the mixture definition with d=8, tau=3, eps=0.2
    d, tau, eps, sig = 8, 3.0, 0.2, 1.0
    bins = np.arange(d)
    w = np.exp(-((bins - tau) ** 2) / (2 * sig**2))
    expected = (1 - eps) * w / w.sum() + eps / d
    m = pulse_model(d=d, sigma=sig, eps_out=eps)
    np.testing.assert_allclose(eval_pmf(m, np.array([tau])), expected, rtol=1e-12)


def test_eval_pmf_boundary_raises():
    m = bernoulli_model()
    with pytest.raises(OutOfDomain):
        eval_pmf(m, np.array([0.0]))
    with pytest.raises(OutOfDomain):
        eval_pmf(m, np.array([1.5]))


def test_eval_pmf_degenerate_model():
    bad = FiniteModel(
        alphabet=Alphabet(2),
        params=ParameterSpace(1, np.array([0.0]), np.array([1.0])),
        pmf=lambda t: np.array([0.7, 0.2]),  # mass 0.9, clearly broken
    )
    with pytest.raises(DegeneratePmf):
        eval_pmf(bad, np.array([0.5]))
    neg = FiniteModel(
        alphabet=Alphabet(2),
        params=ParameterSpace(1, np.array([0.0]), np.array([1.0])),
        pmf=lambda t: np.array([1.01, -0.01]),
    )
    with pytest.raises(DegeneratePmf):
        eval_pmf(neg, np.array([0.5]))


def test_score_bernoulli_hand_values():
    m = bernoulli_model()
    np.testing.assert_allclose(score(m, np.array([0.5])), [[-2.0, 2.0]], rtol=1e-12)
    np.testing.assert_allclose(score(m, np.array([0.25])), [[-4.0 / 3.0, 4.0]], rtol=1e-12)


def test_score_constant_coordinate_is_zero():
    # pmf ignores theta entirely -> finite-difference score is identically 0
    flat = FiniteModel(
        alphabet=Alphabet(2),
        params=ParameterSpace(1, np.array([0.0]), np.array([1.0])),
        pmf=lambda t: np.array([0.4, 0.6]),
    )
    np.testing.assert_allclose(score(flat, np.array([0.5])), [[0.0, 0.0]], atol=1e-12)


def test_score_boundary_margin():
    m = bernoulli_model()
    h = fd_step(np.array([0.5]))[0]
    with pytest.raises(OutOfDomain):
        score(m, np.array([h * 0.5]))


def test_score_inconsistent_analytic():
    wrong = FiniteModel(
        alphabet=Alphabet(2),
        params=ParameterSpace(1, np.array([0.0]), np.array([1.0])),
        pmf=lambda t: np.array([1.0 - t[0], t[0]]),
        analytic_score=lambda t: np.array([[1.0, 1.0]]),  # not zero-mean
    )
    with pytest.raises(ScoreInconsistent):
        score(wrong, np.array([0.5]))


def test_log_grad_prior_examples():
    m = bernoulli_model()
    uni = make_prior(m, "uniform")
    np.testing.assert_allclose(log_grad_prior(uni, np.array([0.37])), [0.0], atol=1e-12)
    beta = make_prior(m, "beta22", normalized=False)
    np.testing.assert_allclose(log_grad_prior(beta, np.array([0.5])), [0.0], atol=1e-12)
    np.testing.assert_allclose(log_grad_prior(beta, np.array([0.25])), [8.0 / 3.0], rtol=1e-12)


@pytest.mark.parametrize("name", sorted(ALL_MODELS))
def test_pmf_normalization_property(name):
    model = ALL_MODELS[name]
    rng = np.random.default_rng(101)
    for theta in random_interior(model, rng, 100):
        p = eval_pmf(model, theta)
        assert abs(p.sum() - 1.0) < 1e-12
        assert np.all(p >= model.floor)


@pytest.mark.parametrize("name", sorted(ALL_MODELS))
def test_score_zero_mean_property(name):
    model = ALL_MODELS[name]
    rng = np.random.default_rng(202)
    for theta in random_interior(model, rng, 100):
        s = score(model, theta)
        p = eval_pmf(model, theta)
        assert np.max(np.abs(s @ p)) < 5e-6


@pytest.mark.parametrize("name", sorted(ALL_MODELS))
def test_fd_score_matches_analytic(name):
    # central region: FD truncation grows like the cubic log-derivatives,
    # which blow up near the faces where the pmf degenerates
    model = ALL_MODELS[name]
    assert model.analytic_score is not None
    nofd = FiniteModel(
        alphabet=model.alphabet,
        params=model.params,
        pmf=model.pmf,
        constraint=model.constraint,
        family=model.family,
    )
    rng = np.random.default_rng(303)
    for theta in random_interior(model, rng, 100, margin_frac=0.25):
        s_true = score(model, theta)
        s_fd = score(nofd, theta)
        assert np.max(np.abs(s_true - s_fd)) < 1e-5


def test_fd_log_grad_matches_analytic():
    m = bernoulli_model()
    rng = np.random.default_rng(404)
    for kind in ("uniform", "beta22", "truncgauss"):
        known = make_prior(m, kind)
        blind = make_prior(m, kind)
        blind = type(blind)(density=blind.density, analytic_log_grad=None,
                            normalization_mode=blind.normalization_mode, name=blind.name)
        for theta in random_interior(m, rng, 30, margin_frac=0.25):
            g_true = log_grad_prior(known, theta)
            g_fd = log_grad_prior(blind, theta)
            assert np.max(np.abs(g_true - g_fd)) < 1e-6


def test_prior_grid_normalization():
    m = bernoulli_model()
    from igbounds.model import grid_nodes

    for kind in ("uniform", "beta22", "truncgauss"):
        pr = make_prior(m, kind)
        assert pr.normalization_mode == "normalized-on-grid"
        nodes, cell = grid_nodes(m.params, m.constraint)
        q = sum(pr.density(n) for n in nodes) * cell
        assert abs(q - 1.0) < 1e-8


def test_binomial_compression_matches_product():
    # binomial sufficient statistic: pmf of count j equals C(n,j) th^j (1-th)^(n-j)
    from math import comb

    b = iid_model(bernoulli_model(), 10)
    th = 0.37
    p = eval_pmf(b, np.array([th]))
    expected = np.array([comb(10, j) * th**j * (1 - th) ** (10 - j) for j in range(11)])
    np.testing.assert_allclose(p, expected, rtol=1e-10)


def test_iid_product_alphabet_and_score():
    base = categorical_model(d=3)
    prod = iid_model(base, 2)
    assert prod.d == 9
    th = np.array([0.3, 0.45])
    p1 = eval_pmf(base, th)
    np.testing.assert_allclose(eval_pmf(prod, th), np.outer(p1, p1).ravel(), rtol=1e-10)
    s_base = score(base, th)
    s_prod = score(prod, th)
    # product score is the sum of per-position scores
    expected = (s_base[:, :, None] + s_base[:, None, :]).reshape(2, 9)
    np.testing.assert_allclose(s_prod, expected, rtol=1e-10)


def test_table_model_grid_aligned_only():
    rows = [[0.5, 0.5]] * 7
    t = table_model(0.0, 1.0, 7, rows)
    mid = 0.5 / 7 + 0.0  # first midpoint
    np.testing.assert_allclose(eval_pmf(t, np.array([mid])), [0.5, 0.5])
    with pytest.raises(OutOfDomain):
        eval_pmf(t, np.array([mid + 1e-3]))


def test_make_model_registry():
    m = make_model({"id": "bernoulli"})
    assert m.family == "bernoulli"
    m = make_model({"id": "iid", "base": {"id": "bernoulli"}, "n": 3})
    assert m.family == "binomial"
    with pytest.raises(ConfigError):
        make_model({"id": "nope"})
    with pytest.raises(ConfigError):
        make_model({"id": "bernoulli", "typo_key": 1})
    with pytest.raises(ConfigError):
        make_model({"id": "pulse", "eps_out": 0.2, "snr": 10})
