import logging
import math

import numpy as np
import pytest

from etacr import (
    CoeffSet,
    DegenerateTruncation,
    InvalidParameter,
    SystemSpec,
    coefficients,
    first_step_coefficient,
    open_loop_coefficients,
    open_loop_variance,
    particle_coefficients,
    quadrature_coefficients,
)
from etacr.coeffs import stack

# frozen from a direct grid-free integration of the truncate/convolve recursion
QUAD_PBAR = (1.0, 0.6826895, 0.5871902, 0.5827089, 0.5824883)


def _erf_open_loop(spec, n):
    """P̄_n for the untriggered error: erf(eta / (sqrt(2) sd_{n-1}))."""
    if n == 1:
        return 1.0
    sd = spec.sigma * math.sqrt(sum(spec.A ** (2 * j) for j in range(n - 1)))
    return math.erf(spec.eta / (math.sqrt(2) * sd))


def test_quadrature_values(default_spec):
    c = quadrature_coefficients(default_spec)
    assert c.method == "quadrature"
    assert c.T == 5
    assert np.allclose(c.pbar, QUAD_PBAR, atol=2e-7)
    assert np.allclose(c.p, np.cumprod(c.pbar))


def test_quadrature_agrees_with_scipy_quad(default_spec):
    from scipy.integrate import quad
    from scipy.stats import norm

    # P̄_3 = int_{-1}^{1} int_{-1}^{1} phi(y - A x) phi(x) / Z dx dy
    Z = 2 * norm.cdf(1) - 1
    inner = lambda y: quad(lambda x: norm.pdf(y - 1.25 * x) * norm.pdf(x), -1, 1)[0] / Z
    val = quad(inner, -1, 1)[0]
    assert quadrature_coefficients(default_spec).pbar[2] == pytest.approx(val, abs=1e-8)


def test_first_coefficient_is_erf(default_spec):
    assert first_step_coefficient(default_spec) == pytest.approx(math.erf(1 / math.sqrt(2)))


def test_single_step_horizon():
    spec = SystemSpec(T=1)
    for method in ("quadrature", "particle", "open-loop", "open-loop-particle"):
        c = coefficients(spec, method, N=500)
        assert c.pbar == (1.0,) and c.p == (1.0,)


@pytest.mark.parametrize("spec", [
    SystemSpec(),
    SystemSpec(A=0.8, sigma=0.5, eta=0.7, T=8),
    SystemSpec(A=-1.1, sigma=2.0, eta=3.0, T=6),
])
def test_open_loop_closed_form(spec):
    c = open_loop_coefficients(spec)
    for n in range(1, spec.T + 1):
        assert c.pbar[n - 1] == pytest.approx(_erf_open_loop(spec, n), abs=1e-14)


def test_open_loop_third_coefficient(default_spec):
    assert open_loop_coefficients(default_spec).pbar[2] == pytest.approx(0.4679, abs=1e-3)


def test_open_loop_variance_values(default_spec):
    assert [open_loop_variance(default_spec, k) for k in range(1, 6)] == pytest.approx(
        [1.0, 2.5625, 5.00390625, 8.818603515625, 14.779067993164062], abs=1e-12
    )


def test_particle_tracks_quadrature(default_spec):
    c = particle_coefficients(default_spec, N=20_000, bandwidth=0.1, seed=3)
    assert np.allclose(c.pbar, QUAD_PBAR, atol=0.015)


def test_open_loop_particle_tracks_closed_form(default_spec):
    c = particle_coefficients(default_spec, N=20_000, bandwidth=0.1, seed=3, open_loop=True)
    assert c.method == "open-loop-particle"
    assert np.allclose(c.pbar, open_loop_coefficients(default_spec).pbar, atol=0.015)


def test_particle_reproducible(default_spec):
    a = particle_coefficients(default_spec, N=2000, seed=11)
    b = particle_coefficients(default_spec, N=2000, seed=11)
    c = particle_coefficients(default_spec, N=2000, seed=12)
    assert a == b
    assert a.pbar != c.pbar


def test_few_particles_warns(default_spec, caplog):
    with caplog.at_level(logging.WARNING, logger="etacr"):
        particle_coefficients(default_spec, N=50)
    assert any("below 100" in r.getMessage() for r in caplog.records)


def test_particles_all_removed():
    spec = SystemSpec(eta=1e-9, T=4)
    with pytest.raises(DegenerateTruncation):
        particle_coefficients(spec, N=200)


def test_bad_particle_arguments(default_spec):
    with pytest.raises(InvalidParameter):
        particle_coefficients(default_spec, N=0)
    with pytest.raises(InvalidParameter):
        particle_coefficients(default_spec, bandwidth=0.0)


def test_stack_and_validation():
    assert stack([1.0, 0.5, 0.5]).tolist() == [1.0, 0.5, 0.25]
    with pytest.raises(InvalidParameter):
        stack([1.0, 1.2])
    with pytest.raises(InvalidParameter):
        CoeffSet.from_pbar([1.0, float("nan")])


def test_unknown_method(default_spec):
    with pytest.raises(InvalidParameter):
        coefficients(default_spec, "bogus")
