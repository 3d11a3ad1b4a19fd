import numpy as np
import pytest
from hypothesis import given, strategies as st

from nlkg.grid import (Field, Grid, Nonlinearity, State, apply_D_power, energy, f_eval, f_prime,
                       f_primitive, gradient, inner_h, inner_h_fourier, laplacian, momentum, norm_h,
                       omega, translate)
from nlkg.rng import SplitMix64, random_state

seeds = st.integers(min_value=0, max_value=2**32)


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(30.0, 1023)
    with pytest.raises(ValueError):
        Grid(-1.0, 64)
    g = Grid(30.0, 1024)
    assert g.h == pytest.approx(60.0 / 1024)
    assert g.x[0] == -30.0 and g.x[-1] < 30.0


def test_field_rejects_nonfinite(grid):
    v = np.zeros(grid.N)
    v[3] = np.nan
    with pytest.raises(ValueError):
        Field(grid, v)
    with pytest.raises(ValueError):
        Field(grid, np.zeros(grid.N + 1))


def test_laplacian_examples(grid):
    c = Field(grid, np.full(grid.N, 2.5))
    assert np.max(np.abs(laplacian(c).values)) < 1e-12
    s = np.sin(np.pi * grid.x / grid.L)
    lap = laplacian(Field(grid, s)).values
    assert np.max(np.abs(lap + (np.pi / grid.L) ** 2 * s)) < 1e-10
    Q = np.sqrt(2) / np.cosh(grid.x)
    assert np.max(np.abs(laplacian(Field(grid, Q)).values - (Q - Q**3))) < 1e-8


def test_D_power_examples(grid):
    x = Field(grid, random_state(SplitMix64(3), grid).u1)
    assert np.max(np.abs(apply_D_power(x, 0.0).values - x.values)) < 1e-14
    c = Field(grid, np.full(grid.N, 1.7))
    assert np.max(np.abs(apply_D_power(c, 2.0).values - 1.7)) < 1e-12
    back = apply_D_power(apply_D_power(x, 1.0), -1.0)
    assert np.max(np.abs(back.values - x.values)) < 1e-12


def test_inner_h_examples(grid, family):
    a = State(grid, np.sin(np.pi * grid.x / grid.L))
    b = State(grid, np.cos(np.pi * grid.x / grid.L))
    assert abs(inner_h(a, b)) < 1e-10
    assert inner_h(family.Qvec, family.Qvec) == pytest.approx(16.0 / 3.0, abs=1e-6)
    assert inner_h(State.zeros(grid), State.zeros(grid)) == 0.0


def test_nonlinearity_examples():
    n = Nonlinearity((3.0,), (1.0,))
    assert f_eval(n, 0.0) == 0.0 and f_prime(n, 0.0) == 0.0
    assert f_eval(n, 2.0) == 8.0 and f_prime(n, 2.0) == 12.0 and f_primitive(n, 2.0) == 4.0
    with pytest.raises(ValueError):
        Nonlinearity((1.5,), (1.0,))
    with pytest.raises(ValueError):
        Nonlinearity((3.0,), (-1.0,))


def test_fprime_central_difference():
    n = Nonlinearity((3.0, 5.0), (1.0, 0.5))
    a = np.linspace(-3, 3, 61)
    errs = []
    for h in (1e-2, 5e-3):
        fd = (n.f(a + h) - n.f(a - h)) / (2 * h)
        errs.append(np.max(np.abs(n.fp(a) - fd)))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


def test_energy_momentum_examples(grid, family):
    z = State.zeros(grid)
    n = family.nonlin
    assert energy(z, n) == 0.0 and momentum(z)[0] == 0.0
    assert momentum(family.Qvec)[0] == 0.0
    assert energy(family.Qvec, n) == pytest.approx(4.0 / 3.0, abs=1e-6)


def test_translate_examples(grid, family):
    Q = family.Qvec
    assert np.allclose(translate(Q, 0.0).u1, Q.u1, atol=1e-14, rtol=0)
    i0 = grid.center_index
    assert translate(Q, 1.0).u1[i0] == pytest.approx(np.sqrt(2) / np.cosh(1.0), abs=1e-10)
    assert translate(Q, 1.0).u1[i0] == pytest.approx(0.916487, abs=1e-6)


@given(seeds, seeds)
def test_omega_antisymmetric(grid, s0, s1):
    x = random_state(SplitMix64(s0), grid)
    y = random_state(SplitMix64(s1), grid)
    assert abs(omega(x, y) + omega(y, x)) <= 1e-12 * max(1.0, abs(omega(x, y)))
    assert abs(omega(x, x)) <= 1e-12


@given(seeds)
def test_parseval(grid, s):
    x = random_state(SplitMix64(s), grid)
    y = random_state(SplitMix64(s + 1), grid)
    assert inner_h(x, y) == pytest.approx(inner_h_fourier(x, y), abs=1e-10)
    assert inner_h(x, x) >= 0


@given(seeds, st.floats(-25.0, 25.0))
def test_translation_group_and_isometry(grid, s, q):
    x = random_state(SplitMix64(s), grid)
    back = translate(translate(x, q), -q)
    assert np.max(np.abs(back.stack() - x.stack())) < 1e-12
    assert norm_h(translate(x, q)) == pytest.approx(norm_h(x), rel=1e-12)


@given(seeds, st.floats(-10.0, 10.0))
def test_energy_translation_invariant(family, grid, s, q):
    u = family.Qvec + random_state(SplitMix64(s), grid, norm=0.2)
    n = family.nonlin
    assert energy(translate(u, q), n) == pytest.approx(energy(u, n), abs=1e-10)
    assert abs(momentum(translate(u, q))[0]) == pytest.approx(abs(momentum(u)[0]), abs=1e-10)


@given(seeds)
def test_gradient_of_translate_commutes(grid, s):
    f = Field(grid, random_state(SplitMix64(s), grid).u1)
    a = gradient(translate(f, 0.7)).values
    b = translate(gradient(f), 0.7).values
    assert np.max(np.abs(a - b)) < 1e-10
