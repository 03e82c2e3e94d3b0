import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import checks
import oracles
from marstransfer.astro import (PhysicalConstants, PlanetModel, longitude_rate, planet_models, planet_radius,
                                planet_radius_rate)

angles = st.floats(-20.0, 20.0, allow_nan=False)


def test_constants_reject_nonpositive_and_misordered():
    with pytest.raises(ValueError, match="R_E"):
        PhysicalConstants(R_E=-1.0)
    with pytest.raises(ValueError):
        PhysicalConstants(R_E_SOI=1.0)
    with pytest.raises(ValueError):
        PhysicalConstants(e_M=1.0)


def test_overrides_name_unknown_constant():
    c = PhysicalConstants().with_overrides(mu_E=4.0e14)
    assert c.mu_E == 4.0e14
    with pytest.raises(KeyError, match="mu_X"):
        PhysicalConstants().with_overrides(mu_X=1.0)


@pytest.mark.parametrize("bad", [dict(p=0.0, e=0.1), dict(p=1.0, e=1.0), dict(p=1.0, e=-0.1)])
def test_planet_model_validation(bad):
    with pytest.raises(ValueError):
        PlanetModel(varpi=0.0, mu_central=1.0, **bad)


def test_circular_mode_zeroes_eccentricity():
    c = PhysicalConstants()
    earth, mars = planet_models(c, "circular", c.R_SE, c.mu_S)
    assert earth.e == mars.e == 0.0
    assert earth.p == 1.0
    assert math.isclose(mars.p, c.R_SM / c.R_SE)
    with pytest.raises(ValueError):
        planet_models(c, "hyperbolic", c.R_SE, c.mu_S)


@given(L=angles, e=st.floats(0.0, 0.99), varpi=st.floats(0.0, 2 * math.pi))
def test_equinoctial_weight_matches_true_anomaly_form(L, e, varpi):
    m = PlanetModel(p=1.3, e=e, varpi=varpi, mu_central=1.0)
    assert abs((1 + m.f * math.cos(L) + m.g * math.sin(L)) - (1 + e * math.cos(L - varpi))) < 1e-12


def test_equinoctial_identity_sweep():
    assert checks.equinoctial_identity_error() < 1e-12


def test_radius_extremes_at_apsides():
    m = PlanetModel.from_semi_major_axis(1.5, 0.0935, 0.7, 1.0)
    assert math.isclose(planet_radius(m, m.varpi), 1.5 * (1 - 0.0935), rel_tol=1e-15)
    assert math.isclose(planet_radius(m, m.varpi + math.pi), 1.5 * (1 + 0.0935), rel_tol=1e-15)


@given(L=angles)
@settings(max_examples=50)
def test_radius_rate_is_derivative_along_longitude(L):
    m = PlanetModel.from_semi_major_axis(1.52, 0.0935, 5.86, 1.0)
    h = 1e-5
    dr_dL = (planet_radius(m, L + h) - planet_radius(m, L - h)) / (2 * h)
    L_dot = longitude_rate(m, L)
    assert planet_radius_rate(m, L, L_dot) == pytest.approx(dr_dL * L_dot, rel=1e-8, abs=1e-12)


def test_longitude_rate_obeys_angular_momentum():
    m = PlanetModel.from_semi_major_axis(1.52, 0.0935, 5.86, 1.0)
    L = np.linspace(0, 2 * math.pi, 50)
    h = planet_radius(m, L) ** 2 * longitude_rate(m, L)
    np.testing.assert_allclose(h, math.sqrt(m.p), rtol=1e-14)


def test_kepler_period():
    for name, err in checks.period_errors().items():
        assert err < 1e-6, name
    m = PlanetModel.from_semi_major_axis(2.0, 0.5, 0.0, 3.0)
    assert math.isclose(m.period, oracles.kepler_period(2.0, 3.0))
