import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import checks
import oracles
from marstransfer.astro import PhysicalConstants
from marstransfer.dynamics import DegenerateGeometryError, SpacecraftState
from marstransfer.frames import (HelioState, PlanetKinematics, ScaleSet, conversion, helio_to_planet, make_scales,
                                 planet_to_helio, position_residuals, velocity_residuals)

C = PhysicalConstants()
SOI = C.R_E_SOI / C.R_SE


def test_unit_sets_make_reference_mu_one():
    for s in make_scales(C):
        assert s.mu(s.mu_ref) == 1.0
        assert math.isclose(s.V**2 * s.D, s.mu_ref, rel_tol=1e-15)
        assert math.isclose(s.D / s.T, s.V, rel_tol=1e-15)


def test_conversion_factors_compose_to_identity():
    helio, earth, _, mars = make_scales(C)
    a, b = conversion(earth, helio), conversion(helio, earth)
    assert a.D_ratio * b.D_ratio == pytest.approx(1.0, rel=1e-15)
    assert a.T_ratio * b.T_ratio == pytest.approx(1.0, rel=1e-15)
    assert conversion(mars, helio).V_ratio == pytest.approx(mars.V / helio.V)


planets = st.builds(PlanetKinematics, st.floats(0.9, 1.7), st.floats(-7, 7), st.floats(-0.05, 0.05),
                    st.floats(0.4, 1.1))
locals_ = st.builds(SpacecraftState, st.floats(0.3 * SOI, 1.5 * SOI), st.floats(-7, 7), st.floats(-0.3, 0.3),
                    st.floats(-0.3, 0.3))


@given(planets, locals_)
def test_forward_transform_matches_vector_sum(planet, local):
    got = planet_to_helio(planet, local)
    ref = oracles.helio_from_planet_cartesian(*planet, *local)
    assert got.rho == pytest.approx(ref[0], abs=1e-14)
    assert math.remainder(got.phi - ref[1], 2 * math.pi) == pytest.approx(0.0, abs=1e-14)
    assert got.v_rho == pytest.approx(ref[2], abs=1e-14)
    assert got.v_phi == pytest.approx(ref[3], abs=1e-14)


@given(planets, locals_)
def test_round_trip_and_residuals(planet, local):
    helio = planet_to_helio(planet, local)
    back = helio_to_planet(planet, helio, theta_hint=local.theta)
    np.testing.assert_allclose(back, local, atol=1e-12)
    assert max(map(abs, position_residuals(planet, local, helio))) < 1e-12
    assert max(map(abs, velocity_residuals(planet, local, helio))) < 1e-12


def test_branch_follows_hint():
    planet = PlanetKinematics(1.0, 0.0, 0.0, 1.0)
    local = SpacecraftState(0.005, 0.2, 0.0, 0.0)
    h = planet_to_helio(planet, local, phi_hint=4 * math.pi)
    assert 3 * math.pi < h.phi < 5 * math.pi
    assert helio_to_planet(planet, h, theta_hint=-2 * math.pi).theta == pytest.approx(0.2 - 2 * math.pi)


def test_degenerate_geometry_raises():
    planet = PlanetKinematics(1.0, 0.5, 0.0, 1.0)
    with pytest.raises(DegenerateGeometryError):
        helio_to_planet(planet, HelioState(1.0, 0.5, 0.0, 1.0))
    with pytest.raises(DegenerateGeometryError):
        planet_to_helio(planet, SpacecraftState(1.0, 0.5 + math.pi, 0.0, 0.0))


def test_scale_set_from_reference():
    s = ScaleSet.from_reference(2.0, 8.0)
    assert (s.D, s.V, s.T) == (2.0, 2.0, 1.0)
    assert s.accel == 2.0


def test_frame_sweep():
    errs = checks.frame_errors(n=2_000, seed=17)
    assert max(errs.values()) < 1e-12, errs
