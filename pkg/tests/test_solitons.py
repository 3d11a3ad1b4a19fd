import numpy as np
import pytest
from hypothesis import given, strategies as st

from nlkg.errors import UnderResolved
from nlkg.grid import Grid, Nonlinearity, energy, momentum, translate
from nlkg.solitons import boost_soliton, bracket_p, ground_state, lorentz_image, traveling_wave_residual
from nlkg.spectral import assemble_Lplus


def test_cubic_ground_state(family, grid):
    assert family.Q[grid.center_index] == pytest.approx(np.sqrt(2), abs=1e-7)
    assert family.residual < 1e-10
    assert np.max(np.abs(family.Q - np.sqrt(2) / np.cosh(grid.x))) < 1e-6
    # evenness of Q, oddness of Q'
    i0 = grid.center_index
    assert np.max(np.abs(family.Q[i0 + 1:i0 + 200] - family.Q[i0 - 1:i0 - 200:-1])) < 1e-12
    assert np.max(np.abs(family.Qp[i0 + 1:i0 + 200] + family.Qp[i0 - 1:i0 - 200:-1])) < 1e-10


def test_quintic_ground_state():
    g = Grid(30.0, 1024)
    s = ground_state(Nonlinearity((5.0,), (1.0,)), g)
    assert s.Q[g.center_index] == pytest.approx(3 ** 0.25, abs=1e-6)
    assert s.residual < 1e-10


def test_HQ(family, grid):
    assert family.HQ.shape == (1, 1)
    assert family.HQ[0, 0] == pytest.approx(4.0 / 3.0, abs=1e-6)
    assert family.HQ[0, 0] == pytest.approx(grid.integrate(family.Qp**2), rel=1e-12)


def test_translation_kernel(family):
    L = assemble_Lplus(family)
    h = family.grid.h
    assert np.sqrt(h) * np.linalg.norm(L @ family.Qp) < 1e-7


def test_boost_identity_cases(family):
    u = boost_soliton(family, 0.0, 0.0)
    assert np.array_equal(u.u1, family.Q) and not np.any(u.u2)
    v = boost_soliton(family, 0.0, 2.3)
    w = translate(family.Qvec, 2.3)
    assert np.max(np.abs(v.stack() - w.stack())) < 1e-12


def test_underresolved_boost(family):
    with pytest.raises(UnderResolved):
        boost_soliton(family, 200.0)


@given(st.floats(-1.0, 1.0))
def test_lorentz_energy_momentum(family, p):
    E0 = family.JQ_energy
    assert energy(boost_soliton(family, p), family.nonlin) == pytest.approx(bracket_p(p) * E0, abs=1e-4)
    assert momentum(lorentz_image(family, p))[0] == pytest.approx(E0 * p, abs=1e-4)
    # the boosted family itself carries the opposite momentum under the u2 = -p Q' convention
    assert momentum(boost_soliton(family, p))[0] == pytest.approx(-E0 * p, abs=1e-4)


@given(st.floats(-0.9, 0.9), st.floats(-5.0, 5.0))
def test_boost_translation_equivariant(family, p, q):
    a = boost_soliton(family, p, q)
    b = translate(boost_soliton(family, p, 0.0), q)
    assert np.max(np.abs(a.stack() - b.stack())) < 1e-10


def test_traveling_wave_order_four(family):
    # error against the exact traveling wave shrinks ~16x per halving of dt
    r1 = traveling_wave_residual(family, 0.5, 2.0, dt=0.01, order=4, sample_every=10)
    r2 = traveling_wave_residual(family, 0.5, 2.0, dt=0.005, order=4, sample_every=20)
    assert r2 < 1e-6
    assert 10.0 < r1 / r2 < 20.0


def test_newton_recovers_closed_form_from_perturbed_seed(grid, family):
    seed = 1.3 / np.cosh(0.8 * grid.x)
    s = ground_state(family.nonlin, grid, initial=seed)
    assert s.iterations >= 3
    assert np.max(np.abs(s.Q - np.sqrt(2) / np.cosh(grid.x))) < 1e-6
    assert s.residual < 1e-10


def test_mixed_power_ground_state(grid):
    # no closed form: Newton has to do the work from the cubic seed
    n = Nonlinearity((3.0, 5.0), (1.0, 0.3))
    s = ground_state(n, grid)
    assert s.iterations >= 1 and s.residual < 1e-10
    assert np.all(s.Q > 0) and s.Q[grid.center_index] == s.Q.max()
