"""Periodic spectral grid, energy-space states and the focusing nonlinearity.

Everything lives on the periodic box [-L, L) with N equispaced samples.
Derivatives are Fourier multipliers and integrals use the periodic
trapezoid rule h * sum, which is spectrally accurate for the smooth,
exponentially decaying fields handled here.

Convention for the Nyquist mode: its wavenumber is set to zero in every
multiplier (derivative, Laplacian, D^s, translation).  With that choice
the discrete Laplacian equals the square of the discrete gradient,
quadratic forms computed in physical and Fourier space agree exactly, and
translation is an isometry for every field.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft as sfft


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on [-L, L) in dimension d (only d = 1)."""

    L: float = 30.0
    N: int = 1024
    d: int = 1

    def __post_init__(self):
        if self.d != 1:
            raise ValueError("only d = 1 is implemented")
        if not (self.L > 0):
            raise ValueError("half-width L must be positive")
        if self.N <= 0 or self.N % 2:
            raise ValueError("N must be a positive even integer")

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.N

    @cached_property
    def x(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.N)

    @cached_property
    def xi(self) -> np.ndarray:
        """Nonnegative rfft wavenumbers, Nyquist entry zeroed."""
        k = 2.0 * np.pi * sfft.rfftfreq(self.N, d=self.h)
        k[-1] = 0.0
        return k

    @cached_property
    def xi_nyquist(self) -> float:
        return np.pi / self.h

    @cached_property
    def omega_kg(self) -> np.ndarray:
        """Free Klein-Gordon dispersion sqrt(1 + xi^2)."""
        return np.sqrt(1.0 + self.xi**2)

    @cached_property
    def wts(self) -> np.ndarray:
        """Parseval weights: int a b dx = sum(wts * Re(conj(a^) b^))."""
        w = np.full(self.N // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        return w * (self.h / self.N)

    @property
    def center_index(self) -> int:
        return self.N // 2

    # ---- transforms -------------------------------------------------
    def fft(self, a):
        return sfft.rfft(a, axis=-1)

    def ifft(self, ah):
        return sfft.irfft(ah, n=self.N, axis=-1)

    def integrate(self, a):
        return self.h * np.sum(a, axis=-1)

    def deriv(self, a):
        return self.ifft(1j * self.xi * self.fft(a))

    def lap(self, a):
        return self.ifft(-(self.xi**2) * self.fft(a))

    def dpow(self, a, s):
        return self.ifft((1.0 + self.xi**2) ** (0.5 * s) * self.fft(a))

    def shift(self, a, q):
        """Samples of a(x - q); q may be an array broadcasting over the batch."""
        q = np.asarray(q, dtype=float)
        phase = np.exp(-1j * self.xi * q[..., None])
        return self.ifft(self.fft(a) * phase)

    def reflect(self, a):
        """Samples of a(-x) (index n -> N - n mod N)."""
        return np.roll(a[..., ::-1], 1, axis=-1)

    def interpolate(self, a, y):
        """Trigonometric interpolant of periodic samples ``a`` evaluated at
        arbitrary points ``y`` (no wrap-around is applied to y)."""
        ah = sfft.fft(a)
        y = np.asarray(y, dtype=float)
        k = 2.0 * np.pi * sfft.fftfreq(self.N, d=self.h)
        nyq = self.N // 2
        k_pos = k[: nyq]
        # modes 1..N/2-1 appear with their conjugate partner, Nyquist as a cosine
        arg = (y[..., None] + self.L)
        vals = ah[0].real + 2.0 * np.real(
            np.exp(1j * k_pos[1:] * arg) @ ah[1:nyq]
        ) + ah[nyq].real * np.cos(np.pi / self.h * (y + self.L))
        return vals / self.N

    @cached_property
    def laplacian_matrix(self) -> np.ndarray:
        """Dense matrix of the spectral Laplacian (symmetric circulant)."""
        e0 = np.zeros(self.N)
        e0[0] = 1.0
        col = self.lap(e0)
        idx = (np.arange(self.N)[:, None] - np.arange(self.N)[None, :]) % self.N
        return col[idx]


@dataclass(frozen=True, eq=False)
class Field:
    """Real samples of a scalar function on a grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.N,):
            raise ValueError(f"expected {self.grid.N} samples, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field samples must be finite")
        object.__setattr__(self, "values", v)

    def __call__(self):
        return self.values


@dataclass(frozen=True, eq=False)
class State:
    """Element (u1, u2) of the energy space H^1 x L^2."""

    grid: Grid
    u1: np.ndarray
    u2: np.ndarray = field(default=None)

    def __post_init__(self):
        u1 = np.asarray(self.u1, dtype=float)
        u2 = np.zeros_like(u1) if self.u2 is None else np.asarray(self.u2, dtype=float)
        n = self.grid.N
        if u1.shape != (n,) or u2.shape != (n,):
            raise ValueError(f"state components must have shape ({n},)")
        if not (np.all(np.isfinite(u1)) and np.all(np.isfinite(u2))):
            raise ValueError("state samples must be finite")
        object.__setattr__(self, "u1", u1)
        object.__setattr__(self, "u2", u2)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.N), np.zeros(grid.N))

    @property
    def first(self) -> Field:
        return Field(self.grid, self.u1)

    @property
    def second(self) -> Field:
        return Field(self.grid, self.u2)

    def stack(self) -> np.ndarray:
        return np.stack([self.u1, self.u2])

    def _check(self, other):
        if not isinstance(other, State):
            return NotImplemented
        if other.grid != self.grid:
            raise ValueError("states live on different grids")
        return other

    def __add__(self, other):
        other = self._check(other)
        return State(self.grid, self.u1 + other.u1, self.u2 + other.u2)

    def __sub__(self, other):
        other = self._check(other)
        return State(self.grid, self.u1 - other.u1, self.u2 - other.u2)

    def __mul__(self, c):
        c = float(c)
        return State(self.grid, c * self.u1, c * self.u2)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self * (1.0 / float(c))

    def __neg__(self):
        return State(self.grid, -self.u1, -self.u2)


@dataclass(frozen=True)
class Nonlinearity:
    """f(a) = sum_k lam_k |a|^(p_k - 1) a with lam_k >= 0 and p_k >= 2."""

    powers: tuple = (3.0,)
    coeffs: tuple = (1.0,)

    def __post_init__(self):
        p = tuple(float(v) for v in np.atleast_1d(self.powers))
        c = tuple(float(v) for v in np.atleast_1d(self.coeffs))
        if len(p) != len(c) or not p:
            raise ValueError("powers and coeffs must be nonempty and of equal length")
        if any(v < 2.0 for v in p):
            raise ValueError("powers must satisfy p >= 2")
        if any(v < 0.0 for v in c):
            raise ValueError("coefficients must be nonnegative")
        object.__setattr__(self, "powers", p)
        object.__setattr__(self, "coeffs", c)

    @property
    def p(self) -> float:
        """Leading (first) power; used for the sech seed of the ground state."""
        return self.powers[0]

    def f(self, a):
        a = np.asarray(a, dtype=float)
        out = np.zeros_like(a)
        for p, lam in zip(self.powers, self.coeffs):
            out = out + lam * (a * a * a if p == 3.0 else np.abs(a) ** (p - 1.0) * a)
        return out

    def fp(self, a):
        a = np.asarray(a, dtype=float)
        out = np.zeros_like(a)
        for p, lam in zip(self.powers, self.coeffs):
            out = out + lam * (3.0 * a * a if p == 3.0 else p * np.abs(a) ** (p - 1.0))
        return out

    def fpp(self, a):
        a = np.asarray(a, dtype=float)
        out = np.zeros_like(a)
        for p, lam in zip(self.powers, self.coeffs):
            out = out + lam * p * (p - 1.0) * np.abs(a) ** (p - 2.0) * np.sign(a)
        return out

    def split(self, q, w):
        """(f'(q) w, f(q + w) - f(q) - f'(q) w), fused for the cubic case."""
        if self.powers == (3.0,):
            lam = self.coeffs[0]
            qw = q * w
            return 3.0 * lam * q * qw, lam * w * w * (3.0 * q + w)
        lin = self.fp(q) * w
        return lin, self.f(q + w) - self.f(q) - lin

    def F(self, a):
        """Primitive vanishing at 0."""
        a = np.asarray(a, dtype=float)
        out = np.zeros_like(a)
        for p, lam in zip(self.powers, self.coeffs):
            out = out + lam * np.abs(a) ** (p + 1.0) / (p + 1.0)
        return out


# ---- operations on fields and states ---------------------------------

def laplacian(x: Field) -> Field:
    return Field(x.grid, x.grid.lap(x.values))


def gradient(x: Field) -> Field:
    return Field(x.grid, x.grid.deriv(x.values))


def apply_D_power(x: Field, s: float) -> Field:
    """Fourier multiplier (1 + xi^2)^(s/2)."""
    return Field(x.grid, x.grid.dpow(x.values, s))


def _same_grid(x, y):
    if x.grid != y.grid:
        raise ValueError("states live on different grids")
    return x.grid


def inner_h(x: State, y: State) -> float:
    g = _same_grid(x, y)
    integrand = g.deriv(x.u1) * g.deriv(y.u1) + x.u1 * y.u1 + x.u2 * y.u2
    return float(g.integrate(integrand))


def inner_h_fourier(x: State, y: State) -> float:
    """Same quantity as inner_h, evaluated through Parseval."""
    g = _same_grid(x, y)
    a1, a2, b1, b2 = g.fft(x.u1), g.fft(x.u2), g.fft(y.u1), g.fft(y.u2)
    s = (1.0 + g.xi**2) * np.real(np.conj(a1) * b1) + np.real(np.conj(a2) * b2)
    return float(np.sum(g.wts * s))


def norm_h(x: State) -> float:
    return float(np.sqrt(max(inner_h(x, x), 0.0)))


def pair_l2(x: State, y: State) -> float:
    g = _same_grid(x, y)
    return float(g.integrate(x.u1 * y.u1 + x.u2 * y.u2))


def J(x: State) -> State:
    """Symplectic matrix J(a, b) = (b, -a)."""
    return State(x.grid, x.u2, -x.u1)


def omega(x: State, y: State) -> float:
    """omega(x, y) = int (x2 y1 - x1 y2) = <J x | y>."""
    g = _same_grid(x, y)
    return float(g.integrate(x.u2 * y.u1 - x.u1 * y.u2))


def grad_state(x: State) -> State:
    g = x.grid
    return State(g, g.deriv(x.u1), g.deriv(x.u2))


def f_eval(n: Nonlinearity, a):
    return n.f(a)


def f_prime(n: Nonlinearity, a):
    return n.fp(a)


def f_second(n: Nonlinearity, a):
    return n.fpp(a)


def f_primitive(n: Nonlinearity, a):
    return n.F(a)


def energy(u: State, n: Nonlinearity) -> float:
    g = u.grid
    du = g.deriv(u.u1)
    dens = 0.5 * (u.u2**2 + du**2 + u.u1**2) - n.F(u.u1)
    return float(g.integrate(dens))


def momentum(u: State) -> np.ndarray:
    """P(u) = int u2 grad u1 as a length-d vector."""
    g = u.grid
    return np.array([g.integrate(u.u2 * g.deriv(u.u1))])


def translate(x, q):
    """Spectral translate x(. - q) of a State or Field."""
    q = float(np.atleast_1d(q)[0])
    g = x.grid
    if isinstance(x, Field):
        return Field(g, g.shift(x.values, q))
    return State(g, g.shift(x.u1, q), g.shift(x.u2, q))


def reflect_time(x: State) -> State:
    """Time inversion (u1, u2) -> (u1, -u2)."""
    return State(x.grid, x.u1, -x.u2)
