"""Ground state Q, its translates and Lorentz boosts."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import NoConvergence, UnderResolved
from .grid import Grid, Nonlinearity, State, energy, translate


@dataclass(frozen=True, eq=False)
class SolitonFamily:
    grid: Grid
    nonlin: Nonlinearity
    Q: np.ndarray
    Qp: np.ndarray
    Qpp: np.ndarray
    fpQ: np.ndarray
    HQ: np.ndarray
    JQ_energy: float
    residual: float
    iterations: int = 0

    @property
    def Qvec(self) -> State:
        return State(self.grid, self.Q, np.zeros_like(self.Q))

    @property
    def gradQ(self) -> State:
        return State(self.grid, self.Qp, np.zeros_like(self.Q))

    @property
    def JgradQ(self) -> State:
        return State(self.grid, np.zeros_like(self.Q), -self.Qp)

    @cached_property
    def Qhat(self):
        return self.grid.fft(self.Q)

    @cached_property
    def fwhm(self) -> float:
        """Full width at half maximum of Q, by linear interpolation of samples."""
        g = self.grid
        i0 = g.center_index
        half = 0.5 * self.Q[i0]
        right = self.Q[i0:]
        j = int(np.argmax(right < half))
        x0, x1 = g.x[i0 + j - 1], g.x[i0 + j]
        y0, y1 = right[j - 1], right[j]
        xr = x0 + (half - y0) * (x1 - x0) / (y1 - y0)
        return 2.0 * xr


def closed_form_profile(n: Nonlinearity, x):
    """((p+1)/2)^(1/(p-1)) sech^(2/(p-1))((p-1)x/2): exact for a single power
    with unit coefficient in d = 1, a seed otherwise."""
    p = n.p
    lam = n.coeffs[0] if n.coeffs[0] > 0 else 1.0
    amp = ((p + 1.0) / (2.0 * lam)) ** (1.0 / (p - 1.0))
    return amp / np.cosh(0.5 * (p - 1.0) * np.asarray(x)) ** (2.0 / (p - 1.0))


def _even_basis(N):
    """Columns span grid functions with a(x) = a(-x); x = 0 sits at index N/2."""
    m = N // 2 + 1
    E = np.zeros((N, m))
    c = N // 2
    for j in range(m):
        E[(c + j) % N, j] = 1.0
        E[(c - j) % N, j] = 1.0
    return E


def ground_state(n: Nonlinearity, g: Grid, tol: float = 1e-10, maxiter: int = 50,
                 initial=None) -> SolitonFamily:
    """Even positive solution of -Q'' + Q = f(Q) by Newton from the sech seed (or ``initial``)."""
    x = g.x
    Q = closed_form_profile(n, x) if initial is None else np.array(initial, dtype=float)
    D2 = g.laplacian_matrix
    E = _even_basis(g.N)
    it = 0
    res = np.max(np.abs(-g.lap(Q) + Q - n.f(Q)))
    while res >= tol:
        if it >= maxiter:
            raise NoConvergence("ground-state Newton did not converge", res, it)
        R = -g.lap(Q) + Q - n.f(Q)
        Jac = -D2 + np.eye(g.N) - np.diag(n.fp(Q))
        # Galerkin step in the even subspace, where the linearization is invertible
        dr = np.linalg.solve(E.T @ Jac @ E, -(E.T @ R))
        Q = Q + E @ dr
        Q = 0.5 * (Q + g.reflect(Q))
        it += 1
        res = np.max(np.abs(-g.lap(Q) + Q - n.f(Q)))
    Qp = g.deriv(Q)
    Qpp = g.lap(Q)
    H = np.array([[g.integrate(Qp * Qp)]])
    JQ = energy(State(g, Q), n)
    return SolitonFamily(g, n, Q, Qp, Qpp, n.fp(Q), H, JQ, float(res), it)


def _wrap(g: Grid, y):
    return (y + g.L) % (2.0 * g.L) - g.L


def _profile_at(s: SolitonFamily, samples, y):
    g = s.grid
    vals = g.interpolate(samples, y)
    return np.where(np.abs(y) > g.L, 0.0, vals)


def bracket_p(p):
    p = float(np.atleast_1d(p)[0])
    return np.sqrt(1.0 + p * p)


def boost_soliton(s: SolitonFamily, pvec, qvec=0.0) -> State:
    """Q(p,q) = Q(<p>(x - q)) and second slot -(p/<p>) d/dx Q(p,q) in d = 1."""
    g = s.grid
    p = float(np.atleast_1d(pvec)[0])
    q = float(np.atleast_1d(qvec)[0])
    bp = bracket_p(p)
    if s.fwhm / bp < 4.0 * g.h:
        raise UnderResolved(
            f"contracted width {s.fwhm / bp:.3g} is below 4 grid spacings ({4 * g.h:.3g})"
        )
    if p == 0.0:
        return translate(s.Qvec, q) if q != 0.0 else s.Qvec
    y = bp * _wrap(g, g.x - q)
    u1 = _profile_at(s, s.Q, y)
    u2 = -p * _profile_at(s, s.Qp, y)
    return State(g, u1, u2)


def lorentz_image(s: SolitonFamily, p) -> State:
    """Time-zero slice of the Lorentz transform u_p of the static solution.

    u_p(t, x) = Q(<p> x + t p) moves with velocity -p/<p> and carries
    momentum int u2 u1' = E(Q) p.  As a member of the boosted family this is
    boost_soliton(-p, 0).
    """
    return boost_soliton(s, -float(np.atleast_1d(p)[0]), 0.0)


def traveling_wave_residual(s: SolitonFamily, pvec, T: float, dt: float = 0.01,
                            order: int = 2, sample_every: int = 10) -> float:
    """sup_t ||u(t) - Q(p, t p/<p>)||_H along the full NLKG flow from Q(p,0)."""
    from .flow import nlkg_evolve
    from .grid import norm_h

    p = float(np.atleast_1d(pvec)[0])
    vel = p / bracket_p(p)
    u0 = boost_soliton(s, p, 0.0)
    worst = 0.0
    for t, u in nlkg_evolve(u0, s.nonlin, T, dt, order=order, sample_every=sample_every):
        ref = translate(u0, vel * t)
        worst = max(worst, norm_h(u - ref))
    return worst
