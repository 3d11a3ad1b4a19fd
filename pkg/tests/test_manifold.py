import numpy as np
import pytest
from hypothesis import given, strategies as st

from nlkg.grid import State, translate
from nlkg.manifold import (GraphSample, LinearGraph, SampledGraph, ZeroGraph, contraction_rate,
                           energy_expansion_check, eval_Gstar, eval_Gstar_batch, eval_unstable_graph,
                           fit_exit_rate, graph_transform_step, quasi_banach_iterate, reconstruct_solution,
                           reflect, restrict_orthogonal)
from nlkg.rng import SplitMix64, random_state
from nlkg.spectral import project_arr

from conftest import hnorm

seeds = st.integers(min_value=0, max_value=2**32)


def _gamma_state(frame, grid, seed, size):
    a = frame.gamma_arr(random_state(SplitMix64(seed), grid).stack())
    return a * (size / frame.enorm_arr(a))


def test_gstar_at_zero(lab, frame, grid):
    assert np.all(eval_Gstar(np.zeros((2, grid.N)), lab.params, frame) == 0.0)


def test_gstar_lipschitz_bound_on_gamma_mode(lab, frame, grid):
    P = lab.params
    eps = P.delta / 10
    psi = _gamma_state(frame, grid, 21, eps)
    a = eval_Gstar(psi, P, frame)
    assert abs(a[0]) <= P.ell * eps


def test_graph_membership(frame, grid):
    G = LinearGraph(frame, 0.05)
    psi = project_arr(frame, random_state(SplitMix64(2), grid, norm=0.01).stack(), ">=0")
    a = G(psi)
    point = psi + a[0, 0] * frame._gm[0]
    _, lm, _, _ = frame.coords_arr(point)
    assert lm[0] == pytest.approx(a[0, 0], abs=1e-14)
    assert np.allclose(G(point), a, atol=1e-14)  # G = G o P_{>=0}


def test_zero_graph_preserved_off_cutoff(lab, frame, grid):
    P = lab.params
    Psi = np.array([_gamma_state(frame, grid, s, 4 * P.C1 * P.delta) for s in (1, 2)])
    # the residual is pure time-stepping error: fourth order in dt
    coarse, fine = (np.max(np.abs(graph_transform_step(ZeroGraph(frame), Psi, 0.75, P, frame, dt=dt).values))
                    for dt in (0.02, 0.01))
    assert fine < 1e-9
    assert 10 < coarse / fine < 24


def test_transform_keeps_lipschitz_class(lab, frame, grid):
    P = lab.params
    rng = SplitMix64(33)
    Psi = []
    for _ in range(4):
        a = project_arr(frame, random_state(rng, grid).stack(), ">=0")
        Psi.append(a * (0.2 * P.delta / frame.enorm_arr(a)))
    Psi = np.array(Psi)
    G = LinearGraph(frame, P.ell)
    sample = graph_transform_step(G, Psi, 0.5, P, frame)
    assert GraphSample(Psi, G(Psi), P.ell, P.delta).lipschitz_constant(frame, lab.mparams) <= P.ell
    assert sample.lipschitz_constant(frame, lab.mparams) <= P.ell


def test_contraction_of_equal_graphs_is_zero(lab, frame, grid):
    Psi = project_arr(frame, random_state(SplitMix64(4), grid, norm=0.005).stack()[None], ">=0")
    G = LinearGraph(frame, 0.05)
    assert contraction_rate(G, G, Psi, 1.0, lab.params, frame) == 0.0


def test_sampled_graph_interpolates_exactly_at_nodes(lab, frame, grid):
    Psi = np.array([_gamma_state(frame, grid, s, 0.004) for s in range(3)])
    vals = np.array([[1e-5], [-2e-5], [3e-5]])
    G = SampledGraph(GraphSample(Psi, vals, 0.1, 0.02), frame, lab.mparams)
    assert np.allclose(G(Psi), vals, atol=0)
    mid = G(0.5 * (Psi[0] + Psi[1]))[0, 0]
    assert vals.min() <= mid <= vals.max()


def test_bracket_helpers_batch_matches_single(lab, frame, grid):
    P = lab.params
    Psi = np.array([_gamma_state(frame, grid, s, 0.003) for s in (5, 6)])
    batch = eval_Gstar_batch(Psi, P, frame)
    single = np.array([eval_Gstar(p, P, frame) for p in Psi])
    assert np.max(np.abs(batch - single)) <= 2e-9


def test_unstable_graph_at_zero(lab, frame, grid):
    up = eval_unstable_graph([0.0], lab.params, frame)
    assert not np.any(up.v.stack())


def test_restriction_of_zero(lab, frame, grid):
    R = restrict_orthogonal(ZeroGraph(frame), np.zeros((2, grid.N)), lab.params, frame)
    assert R.nu[0] == 0.0 and not np.any(R.point.stack())


def test_reconstruction_of_zero_is_translated_soliton(lab, frame, grid):
    rec = reconstruct_solution(State.zeros(grid), [1.5], 1.0, lab.params, frame, verify=False)
    Qc = translate(frame.family.Qvec, 1.5).stack()
    for u in rec.u:
        assert np.max(np.abs(u - Qc)) < 1e-12
    assert np.all(rec.c == 1.5)


@given(seeds)
def test_reflect_involution_and_mode_swap(frame, grid, s):
    a = random_state(SplitMix64(s), grid).stack()
    assert np.array_equal(reflect(reflect(a)), a)
    lp, lm, _, _ = frame.coords_arr(a)
    rp, rm, _, _ = frame.coords_arr(reflect(a))
    assert rp[0] == pytest.approx(lm[0], abs=1e-12) and rm[0] == pytest.approx(lp[0], abs=1e-12)


@given(st.floats(0.5, 3.0), st.floats(0.1, 10.0))
def test_exit_rate_fit_recovers_rate(r, c):
    etas = np.array([1e-3, 1e-4, 1e-5, 1e-6])
    t = np.log(c / etas) / r
    rr, cc = fit_exit_rate(etas, t)
    assert rr == pytest.approx(r, rel=1e-9) and cc == pytest.approx(c, rel=1e-7)


def test_energy_expansion_zero(frame, grid, family):
    R, calE = energy_expansion_check(State.zeros(grid), frame, family)
    assert abs(R) <= 1e-12 and calE == 0.0


@given(seeds, st.floats(1e-3, 0.1))
def test_energy_identity(frame, grid, family, s, eps):
    a = random_state(SplitMix64(s), grid).stack()
    _, _, mu, nu = frame.coords_arr(a)
    a[0] -= mu[0] * frame.Qp
    a[1] += nu[0] * frame.Qp
    a *= eps / hnorm(frame, a)
    R, _ = energy_expansion_check(State(grid, a[0], a[1]), frame, family)
    assert abs(R) <= 1e-10


@given(st.floats(0.05, 0.45), st.floats(-5.0, 5.0), st.floats(-5.0, 5.0))
def test_quasi_banach_toy(lam, x0, fixed):
    # x -> fixed + lam (x - fixed) in the quasi-distance d(x, y) = (x - y)^2 (C = 2)
    A = lambda x: fixed + lam * (x - fixed)
    d = lambda x, y: (x - y) ** 2
    Lam = lam**2
    xs, m, bound = quasi_banach_iterate(A, x0, d, C=2.0, Lam=Lam, n_iter=12)
    assert 2.0 * Lam**m < 1.0
    for j in range(1, 6):
        for k in range(j + 1, 12):
            assert d(xs[k], xs[j]) <= bound(k, j) * (1 + 1e-9) + 1e-300
    assert abs(xs[-1] - fixed) <= abs(x0 - fixed) * lam ** (m * 12) + 1e-12
