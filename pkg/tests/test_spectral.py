import numpy as np
import pytest
from hypothesis import given, strategies as st

from nlkg.grid import J, omega
from nlkg.rng import SplitMix64, random_state
from nlkg.spectral import JL, SELECTORS, assemble_Lplus, energy_norm, equivalence_ratio, project, project_arr

from conftest import hnorm

seeds = st.integers(min_value=0, max_value=2**32)


def test_spectrum_oracle(frame, family, grid):
    assert frame.K == 1
    assert frame.k[0] == pytest.approx(np.sqrt(3.0), abs=1e-4)
    assert frame.low_eigenvalues[0] == pytest.approx(-3.0, abs=1e-4)
    rho = frame.rho[0]
    sech2 = 1.0 / np.cosh(grid.x) ** 2
    sech2 /= np.sqrt(grid.integrate(sech2**2))
    assert np.max(np.abs(rho - sech2)) < 1e-6
    assert abs(frame.kernel_eigenvalue) < 1e-5 and frame.kernel_angle < 1e-4
    assert frame.kappa / frame.kmin <= 0.01


def test_Lplus_far_field_identity(family, grid):
    L = assemble_Lplus(family)
    c = np.ones(grid.N)
    assert abs((L @ c)[0] - 1.0) < 1e-8


def test_eigenpair_residual(frame, family):
    L = assemble_Lplus(family)
    rho = frame.rho[0]
    assert np.max(np.abs(L @ rho + frame.k[0] ** 2 * rho)) < 1e-6
    assert abs(frame.grid.integrate(rho * family.Qp)) < 1e-8
    assert frame.grid.integrate(rho**2) == pytest.approx(1.0, abs=1e-12)


def test_symplectic_pairings(frame):
    gp, gm = frame.g_plus(), frame.g_minus()
    assert omega(gp, gm) == pytest.approx(1.0, abs=1e-8)
    assert abs(omega(gp, gp)) < 1e-12
    assert abs(omega(gp, frame.gradQ)) < 1e-8 and abs(omega(gm, frame.JgradQ)) < 1e-8


def test_JL_eigenvectors(frame):
    k = frame.k[0]
    for g, sgn in ((frame.g_plus(), 1), (frame.g_minus(), -1)):
        r = JL(frame, g) - sgn * k * g
        assert np.max(np.abs(r.stack())) < 1e-6
    assert np.max(np.abs(JL(frame, frame.gradQ).stack())) < 1e-6
    r = JL(frame, frame.JgradQ) + frame.gradQ
    assert np.max(np.abs(r.stack())) < 1e-6


def test_coordinates_of_frame_vectors(frame):
    c = frame.decompose(frame.g_plus())
    assert c.lambda_plus[0] == pytest.approx(1.0, abs=1e-8)
    assert max(abs(c.lambda_minus[0]), abs(c.mu[0]), abs(c.nu[0])) < 1e-8
    c = frame.decompose(frame.gradQ)
    assert c.mu[0] == pytest.approx(1.0, abs=1e-8)
    assert max(abs(c.lambda_plus[0]), abs(c.lambda_minus[0]), abs(c.nu[0])) < 1e-8
    assert energy_norm(frame, frame.g_plus()) == pytest.approx(1.0, abs=1e-8)
    assert energy_norm(frame, frame.gradQ) == pytest.approx(frame.kappa, abs=1e-8)


def test_projection_examples(frame):
    assert np.max(np.abs(project(frame, frame.g_plus(), "-").stack())) < 1e-9
    gm = frame.g_minus()
    assert np.max(np.abs(project(frame, gm, "-").stack() - gm.stack())) < 1e-9
    assert np.max(np.abs(project(frame, frame.gradQ, "gamma").stack())) < 1e-8
    with pytest.raises(ValueError):
        project_arr(frame, gm.stack(), "bogus")


@given(seeds)
def test_reconstruction_and_complement(frame, grid, s):
    v = random_state(SplitMix64(s), grid, norm=1.0)
    c = frame.decompose(v)
    assert hnorm(frame, frame.reconstruct(c).stack() - v.stack()) < 1e-10
    a = v.stack()
    total = project_arr(frame, a, ">=0") + project_arr(frame, a, "-")
    assert np.max(np.abs(total - a)) < 1e-12


@given(seeds, st.sampled_from(SELECTORS))
def test_projections_idempotent(frame, grid, s, which):
    a = random_state(SplitMix64(s), grid, norm=1.0).stack()
    p = project_arr(frame, a, which)
    assert hnorm(frame, project_arr(frame, p, which) - p) < 1e-9


@given(seeds)
def test_gamma_has_no_discrete_part(frame, grid, s):
    g = frame.decompose(random_state(SplitMix64(s), grid)).gamma
    c = frame.decompose(g)
    assert max(abs(c.lambda_plus[0]), abs(c.lambda_minus[0]), abs(c.mu[0]), abs(c.nu[0])) < 1e-9
    assert frame.lgamma_form(g.stack()) >= 0


def test_norm_equivalence_constants_stable(frame, grid):
    rng = SplitMix64(77)
    ratios = np.array([equivalence_ratio(frame, random_state(rng, grid)) for _ in range(1000)])
    lo, hi = ratios.min(), ratios.max()
    assert 0 < lo <= hi < 10
    # first and second halves see the same range up to 20%
    a, b = ratios[:500], ratios[500:]
    assert a.min() == pytest.approx(b.min(), rel=0.2) and a.max() == pytest.approx(b.max(), rel=0.2)


@given(seeds)
def test_symplectic_form_matches_J(frame, grid, s):
    x = random_state(SplitMix64(s), grid)
    y = random_state(SplitMix64(s + 5), grid)
    assert omega(x, y) == pytest.approx(grid.integrate((J(x).stack() * y.stack()).sum(axis=0)), abs=1e-12)
