"""Linearized operator L+ = -Delta + 1 - f'(Q), its negative spectrum and the
symplectic frame used to split perturbations of the soliton.

Batch-friendly helpers act on arrays of shape (..., 2, N) holding the two
slots of many states at once; the State-level API wraps them.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .errors import KernelMismatch, NegativeQuadraticForm
from .grid import State
from .solitons import SolitonFamily

TOL_NEG = 1e-6
KERNEL_WINDOW = 1e-5


def assemble_Lplus(s: SolitonFamily) -> np.ndarray:
    g = s.grid
    A = -g.laplacian_matrix + np.diag(1.0 - s.fpQ)
    return 0.5 * (A + A.T)


@dataclass
class Coords:
    lambda_plus: np.ndarray
    lambda_minus: np.ndarray
    mu: np.ndarray
    nu: np.ndarray
    gamma: State


class SpectralFrame:
    """Eigen data of L+ plus the frame {g_k+-, grad Q, J grad Q}."""

    def __init__(self, s: SolitonFamily, evals, evecs, kernel_value, kernel_angle,
                 kappa=None, n_negative=None):
        g = s.grid
        self.family = s
        self.grid = g
        self.low_eigenvalues = np.asarray(evals)
        neg = evals < -TOL_NEG
        self.n_negative = int(np.sum(neg)) if n_negative is None else n_negative
        self.k = np.sqrt(-evals[neg])
        rho = (evecs[:, neg] / np.sqrt(g.h)).T.copy()
        i0 = g.center_index
        for r in rho:
            # reproducible sign: rho(0) > 0, or rho'(0) > 0 for odd modes
            ref = r[i0] if abs(r[i0]) > 1e-8 * np.max(np.abs(r)) else g.deriv(r)[i0]
            if ref < 0:
                r *= -1.0
        self.rho = rho
        self.K = len(self.k)
        self.kmin = float(np.min(self.k)) if self.K else 0.0
        self.kmax = float(np.max(self.k)) if self.K else 0.0
        self.kernel_eigenvalue = float(kernel_value)
        self.kernel_angle = float(kernel_angle)
        self.kappa = float(self.kmin / 100.0 if kappa is None else kappa)
        self.HQ = s.HQ
        self.H = float(s.HQ[0, 0])
        self.Qp = s.Qp

    # ---- frame vectors ----------------------------------------------
    def g_plus(self, i=0) -> State:
        k = self.k[i]
        return State(self.grid, self.rho[i] / np.sqrt(2 * k), k * self.rho[i] / np.sqrt(2 * k))

    def g_minus(self, i=0) -> State:
        k = self.k[i]
        return State(self.grid, self.rho[i] / np.sqrt(2 * k), -k * self.rho[i] / np.sqrt(2 * k))

    @property
    def gradQ(self) -> State:
        return self.family.gradQ

    @property
    def JgradQ(self) -> State:
        return self.family.JgradQ

    @cached_property
    def _gp(self):
        s2k = np.sqrt(2 * self.k)[:, None]
        return np.stack([self.rho / s2k, self.k[:, None] * self.rho / s2k], axis=1)

    @cached_property
    def _gm(self):
        s2k = np.sqrt(2 * self.k)[:, None]
        return np.stack([self.rho / s2k, -self.k[:, None] * self.rho / s2k], axis=1)

    @cached_property
    def _dual_plus(self):
        """lambda_+ = <v, -J g_->, shape (K, 2, N)."""
        gm = self._gm
        return np.stack([-gm[:, 1], gm[:, 0]], axis=1)

    @cached_property
    def _dual_minus(self):
        """lambda_- = <v, J g_+>."""
        gp = self._gp
        return np.stack([gp[:, 1], -gp[:, 0]], axis=1)

    # ---- array level --------------------------------------------------
    def coords_arr(self, a):
        """Spectral coordinates of states stacked as (..., 2, N)."""
        h = self.grid.h
        lp = h * np.einsum("...sn,ksn->...k", a, self._dual_plus)
        lm = h * np.einsum("...sn,ksn->...k", a, self._dual_minus)
        mu = h * (a[..., 0, :] @ self.Qp)[..., None] / self.H
        nu = -h * (a[..., 1, :] @ self.Qp)[..., None] / self.H
        return lp, lm, mu, nu

    def discrete_arr(self, lp, lm, mu, nu):
        out = np.einsum("...k,ksn->...sn", lp, self._gp) + np.einsum("...k,ksn->...sn", lm, self._gm)
        out = np.array(out, dtype=float)
        out[..., 0, :] += mu[..., 0:1] * self.Qp
        out[..., 1, :] -= nu[..., 0:1] * self.Qp
        return out

    def gamma_arr(self, a):
        lp, lm, mu, nu = self.coords_arr(a)
        return a - self.discrete_arr(lp, lm, mu, nu)

    def lgamma_form(self, gam):
        """<L gamma|gamma> = <L+ g1|g1> + ||g2||^2 for arrays (..., 2, N)."""
        g = self.grid
        g1 = gam[..., 0, :]
        d1 = g.deriv(g1)
        dens = d1 * d1 + g1 * g1 * (1.0 - self.family.fpQ) + gam[..., 1, :] ** 2
        return g.integrate(dens)

    def enorm2_arr(self, a, check=True):
        lp, lm, mu, nu = self.coords_arr(a)
        gam = a - self.discrete_arr(lp, lm, mu, nu)
        lg = self.lgamma_form(gam)
        if check and np.any(lg < -1e-9):
            raise NegativeQuadraticForm("<L gamma|gamma> is negative", float(np.min(lg)))
        disc = np.sum(lp**2 + lm**2, axis=-1) + np.sum(nu**2, axis=-1) + self.kappa**2 * np.sum(mu**2, axis=-1)
        return disc + lg

    def enorm_arr(self, a):
        return np.sqrt(np.maximum(self.enorm2_arr(a), 0.0))

    def hnorm2_arr(self, a):
        g = self.grid
        d1 = g.deriv(a[..., 0, :])
        return g.integrate(d1 * d1 + a[..., 0, :] ** 2 + a[..., 1, :] ** 2)

    # ---- modal propagator ----------------------------------------------
    @cached_property
    def full_eigh(self):
        A = assemble_Lplus(self.family)
        return sla.eigh(A)

    def propagate_gamma_arr(self, a, t):
        """Exact e^{JL t} on (..., 2, N) through the modal decomposition of L+."""
        lam, V = self.full_eigh
        c1 = a[..., 0, :] @ V
        c2 = a[..., 1, :] @ V
        r = np.sqrt(np.abs(lam))
        pos = lam > KERNEL_WINDOW
        negm = lam < -KERNEL_WINDOW
        zero = ~(pos | negm)
        cs = np.empty_like(lam)
        sn = np.empty_like(lam)  # sin(rt)/r analogue
        ms = np.empty_like(lam)  # -lam * sin(rt)/r analogue
        cs[pos] = np.cos(r[pos] * t)
        sn[pos] = np.sin(r[pos] * t) / r[pos]
        ms[pos] = -r[pos] * np.sin(r[pos] * t)
        cs[negm] = np.cosh(r[negm] * t)
        sn[negm] = np.sinh(r[negm] * t) / r[negm]
        ms[negm] = r[negm] * np.sinh(r[negm] * t)
        cs[zero] = 1.0
        sn[zero] = t
        ms[zero] = 0.0
        n1 = cs * c1 + sn * c2
        n2 = ms * c1 + cs * c2
        out = np.stack([n1 @ V.T, n2 @ V.T], axis=-2)
        return out

    # ---- State level ------------------------------------------------------
    def decompose(self, v: State) -> Coords:
        a = v.stack()
        lp, lm, mu, nu = self.coords_arr(a)
        gam = a - self.discrete_arr(lp, lm, mu, nu)
        return Coords(lp, lm, mu, nu, State(self.grid, gam[0], gam[1]))

    def reconstruct(self, c: Coords) -> State:
        a = self.discrete_arr(c.lambda_plus, c.lambda_minus, c.mu, c.nu) + c.gamma.stack()
        return State(self.grid, a[0], a[1])


def eigen_negative(Lplus: np.ndarray, s: SolitonFamily, kappa=None, n_eigs: int = 8) -> SpectralFrame:
    g = s.grid
    evals, evecs = sla.eigh(Lplus, subset_by_index=[0, min(n_eigs, g.N) - 1])
    kidx = np.where(np.abs(evals) < KERNEL_WINDOW)[0]
    if len(kidx) != g.d:
        raise KernelMismatch(f"expected {g.d} kernel eigenvalue(s), found {len(kidx)}: {evals[:4]}")
    e = evecs[:, kidx[0]]
    qn = s.Qp / np.linalg.norm(s.Qp)
    angle = float(np.arccos(min(1.0, abs(float(e @ qn)))))
    if angle > 1e-4:
        raise KernelMismatch(f"kernel eigenvector makes angle {angle:.3g} rad with grad Q")
    return SpectralFrame(s, evals, evecs, evals[kidx[0]], angle, kappa=kappa)


def build_frame(s: SolitonFamily, kappa=None) -> SpectralFrame:
    return eigen_negative(assemble_Lplus(s), s, kappa=kappa)


def decompose(frame: SpectralFrame, v: State) -> Coords:
    return frame.decompose(v)


def reconstruct(frame: SpectralFrame, c: Coords) -> State:
    return frame.reconstruct(c)


SELECTORS = ("+", "-", "d", "0", ">=0", "gamma+", "0+-", "gamma", "<=0")


def project_arr(frame: SpectralFrame, a, which: str):
    lp, lm, mu, nu = frame.coords_arr(a)
    z = np.zeros_like
    if which == "+":
        return frame.discrete_arr(lp, z(lm), z(mu), z(nu))
    if which == "-":
        return frame.discrete_arr(z(lp), lm, z(mu), z(nu))
    if which == "0":
        return frame.discrete_arr(z(lp), z(lm), mu, nu)
    if which == "d":
        return frame.discrete_arr(lp, lm, mu, nu)
    if which == "0+-":
        return frame.discrete_arr(lp, lm, mu, nu)
    disc = frame.discrete_arr(lp, lm, mu, nu)
    gam = a - disc
    if which == "gamma":
        return gam
    if which == ">=0":
        return a - frame.discrete_arr(z(lp), lm, z(mu), z(nu))
    if which == "gamma+":
        return gam + frame.discrete_arr(lp, z(lm), z(mu), z(nu))
    if which == "<=0":
        return a - frame.discrete_arr(lp, z(lm), z(mu), z(nu))
    raise ValueError(f"unknown projection selector {which!r}; choose from {SELECTORS}")


def project(frame: SpectralFrame, v: State, which: str) -> State:
    a = project_arr(frame, v.stack(), which)
    return State(v.grid, a[0], a[1])


def energy_norm(frame: SpectralFrame, v: State) -> float:
    return float(np.sqrt(frame.enorm2_arr(v.stack())))


def equivalence_ratio(frame: SpectralFrame, v: State) -> float:
    hn = float(np.sqrt(frame.hnorm2_arr(v.stack())))
    return energy_norm(frame, v) / hn if hn > 0 else float("nan")


def JL(frame: SpectralFrame, v: State) -> State:
    g = frame.grid
    s = frame.family
    L1 = -g.lap(v.u1) + (1.0 - s.fpQ) * v.u1
    return State(g, v.u2, -L1)
