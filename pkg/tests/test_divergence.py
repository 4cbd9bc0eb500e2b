"""Divergence-geometry tests: unnormalized KL, induced metric, duality identity."""

import math

import numpy as np
import pytest

from igbounds.divergence import (
    ChristoffelTriple,
    UnnormalizedMeasure,
    check_dualistic_structure,
    christoffel_from_divergence,
    kl_unnormalized,
    metric_from_divergence,
    weighted_measure,
)
from igbounds.errors import DimensionMismatch
from igbounds.fisher import bayesian_metric, fisher_matrix
from igbounds.model import (
    Alphabet,
    FiniteModel,
    ParameterSpace,
    bernoulli_model,
    categorical_model,
    grid_nodes,
    make_prior,
    pulse_model,
    random_interior,
)

BERN = bernoulli_model()
CAT3 = categorical_model(d=3)
PULSE16 = pulse_model(d=16, eps_out=0.2)


def test_kl_identity_case():
    p = UnnormalizedMeasure.of([0.2, 0.8])
    assert kl_unnormalized(p, p) == 0.0


def test_kl_normalized_pair():
    v = kl_unnormalized([0.5, 0.5], [0.25, 0.75])
    assert v == pytest.approx(0.5 * math.log(2.0) + 0.5 * math.log(2.0 / 3.0), rel=1e-12)
    assert v == pytest.approx(0.14384, abs=1e-5)


def test_kl_scaled_measure_closed_form():
    q = np.array([0.3, 0.7])
    for c in (0.5, 1.0, 2.0, 10.0):
        v = kl_unnormalized(c * q, q)
        assert abs(v - (c * math.log(c) - c + 1.0)) < 1e-12
    assert kl_unnormalized(2.0 * q, q) == pytest.approx(2.0 * math.log(2.0) - 1.0, rel=1e-12)


def test_kl_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        kl_unnormalized([0.5, 0.5], [0.2, 0.3, 0.5])


def test_kl_nonnegativity_property():
    rng = np.random.default_rng(21)
    for _ in range(1000):
        d = rng.integers(2, 9)
        p = rng.uniform(0.05, 3.0, size=d)
        q = rng.uniform(0.05, 3.0, size=d)
        assert kl_unnormalized(p, q) >= 0.0
    # zero only on equal pairs
    p = rng.uniform(0.1, 2.0, size=5)
    assert kl_unnormalized(p, p) == 0.0
    q = p.copy()
    q[0] *= 1.5
    assert kl_unnormalized(p, q) > 1e-4


def test_kl_zero_on_diagonal_for_grid_points():
    pr = make_prior(BERN, "beta22")
    nodes, _ = grid_nodes(BERN.params)
    for th in nodes[:: max(1, len(nodes) // 40)]:
        m = weighted_measure(BERN, pr, th)
        assert kl_unnormalized(m, m) == 0.0


def test_measure_requires_positive_entries():
    with pytest.raises(ValueError):
        UnnormalizedMeasure.of([0.5, 0.0])


def test_metric_bernoulli_flat_prior():
    const1 = make_prior(BERN, "const", value=1.0)
    g = metric_from_divergence(BERN, const1, np.array([0.5]))
    assert g.kind == "divergence_based"
    np.testing.assert_allclose(g.values, [[4.0]], atol=1e-3)


def test_metric_bernoulli_beta_prior():
    beta = make_prior(BERN, "beta22", normalized=False)
    g = metric_from_divergence(BERN, beta, np.array([0.5]))
    np.testing.assert_allclose(g.values, [[6.0]], atol=2e-3)


def test_metric_constant_prior_scales_fisher():
    rng = np.random.default_rng(22)
    for model in (BERN, CAT3, PULSE16):
        for c in (1.0, 2.5):
            pr = make_prior(model, "const", value=c)
            for th in random_interior(model, rng, 5):
                gd = metric_from_divergence(model, pr, th).values
                ge = c * fisher_matrix(model, th).values
                assert np.linalg.norm(gd - ge) / np.linalg.norm(ge) < 1e-3


@pytest.mark.parametrize("model", [BERN, CAT3, PULSE16], ids=["bern", "cat3", "pulse16"])
@pytest.mark.parametrize("prior_kind", ["uniform", "beta22", "truncgauss"])
def test_metric_consistency_property(model, prior_kind):
    # the central identity: divergence metric == lambda * (fisher + prior term)
    prior = make_prior(model, prior_kind)
    rng = np.random.default_rng(23)
    for th in random_interior(model, rng, 20):
        gd = metric_from_divergence(model, prior, th).values
        gb = bayesian_metric(model, prior, th).values
        assert np.linalg.norm(gd - gb) / np.linalg.norm(gb) < 1e-3


def test_christoffel_shapes_and_symmetry():
    pr = make_prior(CAT3, "uniform")
    trip = christoffel_from_divergence(CAT3, pr, np.array([0.3, 0.25]))
    assert isinstance(trip, ChristoffelTriple)
    assert trip.gamma_primal.shape == (2, 2, 2)
    for arr in (trip.gamma_primal, trip.gamma_dual):
        assert np.abs(arr - arr.transpose(1, 0, 2)).max() < 1e-6


def test_christoffel_bernoulli_symmetric_point():
    # at theta=0.5 the Fisher metric 1/(theta(1-theta)) is stationary, so the
    # primal+dual sum (= dg/dtheta by the duality identity) must vanish
    const1 = make_prior(BERN, "const", value=1.0)
    trip = christoffel_from_divergence(BERN, const1, np.array([0.5]))
    total = trip.gamma_primal[0, 0, 0] + trip.gamma_dual[0, 0, 0]
    assert abs(total) < 1e-2


def test_christoffel_constant_coordinate_is_zero():
    # second coordinate never touches the pmf -> all symbols with that index vanish
    flat2 = FiniteModel(
        alphabet=Alphabet(2),
        params=ParameterSpace(2, np.zeros(2), np.ones(2), 41),
        pmf=lambda t: np.array([1.0 - t[0], t[0]]),
    )
    pr = make_prior(flat2, "const", value=1.0)
    trip = christoffel_from_divergence(flat2, pr, np.array([0.5, 0.5]))
    for arr in (trip.gamma_primal, trip.gamma_dual):
        assert np.abs(arr[1, :, :]).max() < 1e-6
        assert np.abs(arr[:, 1, :]).max() < 1e-6
        assert np.abs(arr[:, :, 1]).max() < 1e-6


DUALITY_CASES = [
    (BERN, "const1", np.array([0.5])),
    (CAT3, "uniform", np.array([1.0 / 3.0, 1.0 / 3.0])),
    (BERN, "beta22", np.array([0.4])),
    (PULSE16, "truncgauss", np.array([5.81])),
]


@pytest.mark.parametrize("model,prior_kind,theta", DUALITY_CASES,
                         ids=["bern-flat", "cat3-uni", "bern-beta", "pulse-gauss"])
def test_duality_residual_small(model, prior_kind, theta):
    prior = (make_prior(model, "const", value=1.0) if prior_kind == "const1"
             else make_prior(model, prior_kind))
    assert check_dualistic_structure(model, prior, theta) < 1e-2


@pytest.mark.parametrize(
    "model,theta",
    [(BERN, np.array([0.37])), (CAT3, np.array([0.3, 0.25]))],
    ids=["bern", "cat3"],
)
def test_duality_residual_second_order_decay(model, theta):
    # asymmetric points: the leading O(h^2) coefficient is generic there
    prior = make_prior(model, "beta22")
    r_full = check_dualistic_structure(model, prior, theta, step_scale=1.0)
    r_half = check_dualistic_structure(model, prior, theta, step_scale=0.5)
    assert 3.0 <= r_full / r_half <= 5.0
