"""Mobile quasi-distance and the composite quasi-distance on perturbations.

m_phi(v0, v1)^2 = min over j in {0, 1} and shifts q of
    ||v^{1-j} - v^j(. - q)||_E^2 + q^2 phi(||v^j||_E)^2.

The E-form is not translation invariant (it is built around Q), so the
objective is expanded into pairings that are cross-correlations in q and
evaluated for every grid shift with a handful of FFTs.  The best grid shift
is then refined by golden-section search using exact spectral translation.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .grid import State
from .spectral import SpectralFrame, project_arr

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class MobileParams:
    delta: float = 0.02
    C2: float = 8.0
    scan_width: float | None = None  # default L/2
    scan_points: int | None = None  # default: one shift per grid spacing
    refine_tol: float = 1e-10
    max_refine: int = 80


def phi(a, C2: float = 8.0):
    """1 below C2, identity above 2 C2, cubic Hermite (values 1, 2C2; slopes 0, 1) between."""
    a = np.asarray(a, dtype=float)
    s = np.clip((a - C2) / C2, 0.0, 1.0)
    h00 = 2 * s**3 - 3 * s**2 + 1
    h01 = -2 * s**3 + 3 * s**2
    h11 = s**3 - s**2
    mid = h00 * 1.0 + h01 * (2.0 * C2) + h11 * C2  # slope 1 at the right end, 0 at the left
    return np.where(a <= C2, 1.0, np.where(a >= 2 * C2, a, mid))


def phi_prime(a, C2: float = 8.0):
    a = np.asarray(a, dtype=float)
    s = np.clip((a - C2) / C2, 0.0, 1.0)
    d = ((6 * s**2 - 6 * s) + (-6 * s**2 + 6 * s) * 2.0 * C2 + (3 * s**2 - 2 * s) * C2) / C2
    return np.where(a <= C2, 0.0, np.where(a >= 2 * C2, 1.0, d))


def phi_delta(params: MobileParams, a):
    return phi(np.asarray(a, dtype=float) / params.delta, params.C2)


class EForm:
    """Pairings needed to evaluate ||x - tau_q y||_E^2 for all grid shifts q."""

    def __init__(self, frame: SpectralFrame):
        self.frame = frame
        g = frame.grid
        self.grid = g
        K = frame.K
        # frame vectors e_i and dual functionals d_i with weights w_i
        es = [frame._gp[i] for i in range(K)] + [frame._gm[i] for i in range(K)]
        ds = [frame._dual_plus[i] for i in range(K)] + [frame._dual_minus[i] for i in range(K)]
        ws = [1.0] * (2 * K)
        Qp = frame.Qp
        es.append(np.stack([Qp, 0 * Qp]))
        ds.append(np.stack([Qp / frame.H, 0 * Qp]))
        ws.append(frame.kappa**2)
        es.append(np.stack([0 * Qp, -Qp]))
        ds.append(np.stack([0 * Qp, -Qp / frame.H]))
        ws.append(1.0)
        self.e = np.array(es)
        self.d = np.array(ds)
        self.w = np.array(ws)
        self.r = np.array([self.L(e) for e in self.e])
        self.G = g.h * np.einsum("isn,jsn->ij", self.r, self.e)

    def L(self, a):
        g = self.grid
        fq = self.frame.family.fpQ
        return np.stack([-g.lap(a[0]) + (1.0 - fq) * a[0], a[1]])

    def pair(self, a, b):
        return self.grid.h * np.sum(a * b)

    def value(self, z):
        """||z||_E^2 through the same expansion (used for refinement)."""
        ell = self.grid.h * np.einsum("isn,sn->i", self.d, z)
        Lz = self.L(z)
        rz = self.grid.h * np.einsum("isn,sn->i", self.r, z)
        lg = self.pair(Lz, z) - 2.0 * ell @ rz + ell @ self.G @ ell
        return float(np.sum(self.w * ell**2) + lg)

    @cached_property
    def _dhat(self):
        g = self.grid
        return g.fft(self.d)

    @cached_property
    def _rhat(self):
        return self.grid.fft(self.r)

    @cached_property
    def _fqhat(self):
        return self.grid.fft(self.frame.family.fpQ)

    def corr(self, ah, bh):
        """c_m = int a(x) b(x - m h) dx for all m, consistent with the Nyquist convention."""
        g = self.grid
        X = ah * np.conj(bh)
        nyq = X[..., -1].real.copy()
        X = X.copy()
        X[..., -1] = 0.0
        return g.h * (g.ifft(X) + nyq[..., None] / g.N)

    def scan(self, x, y):
        """||x - tau_{m h} y||_E^2 for all m = 0..N-1 (as an array of length N)."""
        g = self.grid
        xh = g.fft(x)
        yh = g.fft(y)
        ell_x = g.h * np.einsum("isn,sn->i", self.d, x)
        r_x = g.h * np.einsum("isn,sn->i", self.r, x)
        # ell_i(tau y) and <r_i | tau y>
        ell_y = np.sum(self.corr(self._dhat, yh[None]), axis=1)
        r_y = np.sum(self.corr(self._rhat, yh[None]), axis=1)
        Lx = self.L(x)
        lxy = np.sum(self.corr(g.fft(Lx), yh), axis=0)
        # <L tau y | tau y> = ||y||_H^2 - int f'(Q) (tau y1)^2
        y1d = g.deriv(y[0])
        hy = g.integrate(y1d**2 + y[0] ** 2 + y[1] ** 2)
        fy = self.corr(self._fqhat, g.fft(y[0] ** 2))
        lyy = hy - fy
        lxx = self.pair(Lx, x)
        ell = ell_x[:, None] - ell_y
        rz = r_x[:, None] - r_y
        lzz = lxx - 2.0 * lxy + lyy
        lg = lzz - 2.0 * np.sum(ell * rz, axis=0) + np.einsum("im,ij,jm->m", ell, self.G, ell)
        return np.sum(self.w[:, None] * ell**2, axis=0) + lg


_EFORMS: dict[int, EForm] = {}


def eform(frame: SpectralFrame) -> EForm:
    key = id(frame)
    ef = _EFORMS.get(key)
    if ef is None or ef.frame is not frame:
        ef = EForm(frame)
        _EFORMS[key] = ef
    return ef


def _as_arr(v):
    return v.stack() if isinstance(v, State) else np.asarray(v, dtype=float)


def _branch(ef: EForm, params: MobileParams, x, y, penalty_fn):
    """min_q ||x - tau_q y||_E^2 + q^2 phi(||y||_E)^2 for one branch."""
    g = ef.grid
    fee = float(penalty_fn(np.sqrt(max(ef.value(y), 0.0))))
    width = g.L / 2.0 if params.scan_width is None else params.scan_width
    m = np.arange(g.N)
    q = np.where(m <= g.N // 2, m, m - g.N) * g.h
    vals = ef.scan(x, y) + (q * fee) ** 2
    allowed = np.abs(q) <= width + 1e-12
    if params.scan_points is not None and params.scan_points < np.sum(allowed):
        stride = max(1, int(np.ceil(np.sum(allowed) / params.scan_points)))
        allowed &= (np.round(q / g.h).astype(int) % stride) == 0
    cand = np.where(allowed)[0]
    order = np.lexsort((np.abs(q[cand]), vals[cand]))
    i = cand[order[0]]
    q0, f0 = float(q[i]), float(vals[i])

    def obj(s):
        z = x - np.stack([g.shift(y[0], s), g.shift(y[1], s)])
        return ef.value(z) + (s * fee) ** 2

    # golden-section on [q0 - h, q0 + h]
    a, b = q0 - g.h, q0 + g.h
    c1 = b - GOLDEN * (b - a)
    c2 = a + GOLDEN * (b - a)
    f1, f2 = obj(c1), obj(c2)
    best_q, best_f = q0, f0
    prev = best_f
    for _ in range(params.max_refine):
        if f1 < f2:
            b, c2, f2 = c2, c1, f1
            c1 = b - GOLDEN * (b - a)
            f1 = obj(c1)
        else:
            a, c1, f1 = c1, c2, f2
            c2 = a + GOLDEN * (b - a)
            f2 = obj(c2)
        cur_q, cur_f = (c1, f1) if f1 < f2 else (c2, f2)
        if cur_f < best_f:
            best_q, best_f = cur_q, cur_f
        if prev - best_f < params.refine_tol and b - a < g.h * 1e-3:
            break
        prev = best_f
    return max(best_f, 0.0), best_q, fee


def mobile_dist(params: MobileParams, frame: SpectralFrame, v0, v1, penalty=None):
    """(value, argmin q, argmin j) of the mobile distance with cutoff phi_delta.

    ``penalty`` overrides the fee function a -> phi(a); by default phi_delta.
    """
    x0, x1 = _as_arr(v0), _as_arr(v1)
    ef = eform(frame)
    pen = penalty if penalty is not None else (lambda a: phi_delta(params, a))
    if np.array_equal(x0, x1):
        return 0.0, np.zeros(1), 0
    # branch j moves v^j and compares with v^{1-j}
    f0, q0, _ = _branch(ef, params, x1, x0, pen)
    f1, q1, _ = _branch(ef, params, x0, x1, pen)
    if (f0, abs(q0)) <= (f1, abs(q1)):
        return float(np.sqrt(f0)), np.array([q0]), 0
    return float(np.sqrt(f1)), np.array([q1]), 1


def tilde_m(params: MobileParams, frame: SpectralFrame, v0, v1) -> float:
    x0, x1 = _as_arr(v0), _as_arr(v1)
    dz = project_arr(frame, x0 - x1, "d")
    lp, lm, mu, nu = frame.coords_arr(dz)
    disc = float(np.sum(lp**2 + lm**2) + np.sum(nu**2) + frame.kappa**2 * np.sum(mu**2))
    g0 = project_arr(frame, x0, "gamma")
    g1 = project_arr(frame, x1, "gamma")
    m, _, _ = mobile_dist(params, frame, g0, g1)
    return float(np.sqrt(disc + m * m))
