"""Time integration: full NLKG, the linearized flow e^{JLt}, and the
localized modulated system for the co-moving pair (w, c).

The (w, c) system is  w' = J D w + F(w, c),  c' = B(w, c)  with
D = diag(1 - Delta, 1), B = chi_delta(w) A_c(w) and
F = (B Q_c', f'(Q_c) w1 + chi_delta(w) N_c(w)).  With chi = 1 the field
u = (Q_c, 0) + w solves NLKG exactly, whatever c does, which is what the
reconstruction of physical solutions relies on.

The integrator is classical RK4 in the interaction picture of the free
Klein-Gordon group (a Lawson scheme): the stiff part J D is propagated
exactly by Fourier rotations, RK4 handles the rest.  States are batched
along a leading axis so many trajectories advance together.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import NonFinite, SingularModulationMatrix, SmallnessWarning
from .grid import Nonlinearity, State
from .solitons import SolitonFamily
from .spectral import SpectralFrame

BLOWUP = 1e6
COND_MAX = 1e8


@dataclass
class FlowParams:
    delta: float = 0.02
    ell: float = 0.1
    dt: float = 0.005
    method: str = "rk4"
    kappa: float | None = None
    C0: float = 2.0
    C1: float = 4.0
    C2: float = 8.0
    order: int = 2  # splitting order for the full NLKG (2 or 4)

    def __post_init__(self):
        if not (self.delta > 0 and self.ell > 0 and self.dt > 0):
            raise ValueError("delta, ell and dt must be positive")
        if not (0 < self.C0 < self.C1 < self.C2):
            raise ValueError("need 0 < C0 < C1 < C2")
        if self.order not in (2, 4):
            raise ValueError("order must be 2 or 4")

    def smallness_report(self, frame: SpectralFrame, margin: float = 10.0) -> list[str]:
        """Violated smallness conditions, each as a human readable line."""
        kmin, kmax = frame.kmin, frame.kmax
        kap = frame.kappa if self.kappa is None else self.kappa
        checks = [
            ("C2*delta << 1", self.C2 * self.delta, 1.0),
            ("kmax*ell^2 + delta << kmin", kmax * self.ell**2 + self.delta, kmin),
            ("delta << ell*kmin", self.delta, self.ell * kmin),
            ("delta << kmin^2", self.delta, kmin**2),
            ("kappa << kmin", kap, kmin),
        ]
        out = []
        for name, small, big in checks:
            if small * margin > big:
                out.append(f"{name}: ratio {big / small:.3g} < {margin:g}")
        return out

    def check(self, frame: SpectralFrame, margin: float = 10.0) -> list[str]:
        msgs = self.smallness_report(frame, margin)
        for m in msgs:
            warnings.warn(m, SmallnessWarning, stacklevel=2)
        return msgs


# ---- cutoff ------------------------------------------------------------

def _bump(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def chi(t):
    """Smooth even cutoff: 1 on |t| <= 1, 0 on |t| >= 2, decreasing in |t|."""
    a = np.abs(np.asarray(t, dtype=float))
    num = _bump(2.0 - a)
    return num / (num + _bump(a - 1.0))


def chi_delta_arr(hn2, delta):
    return chi(hn2 / delta**2)


# ---- full NLKG -----------------------------------------------------------

_YOSHIDA = (
    1.0 / (2.0 - 2.0 ** (1.0 / 3.0)),
    -(2.0 ** (1.0 / 3.0)) / (2.0 - 2.0 ** (1.0 / 3.0)),
    1.0 / (2.0 - 2.0 ** (1.0 / 3.0)),
)


def _rotate(g, U1, U2, t):
    w = g.omega_kg
    c, s = np.cos(w * t), np.sin(w * t)
    return c * U1 + (s / w) * U2, -w * s * U1 + c * U2


def _strang_hat(g, n, U1, U2, dt):
    U1, U2 = _rotate(g, U1, U2, 0.5 * dt)
    u1 = g.ifft(U1)
    if not np.all(np.abs(u1) < BLOWUP):
        raise NonFinite("field left the finite range", float("nan"))
    U2 = U2 + dt * g.fft(n.f(u1))
    return _rotate(g, U1, U2, 0.5 * dt)


def _step_hat(g, n, U1, U2, dt, order):
    if order == 2:
        return _strang_hat(g, n, U1, U2, dt)
    for a in _YOSHIDA:
        U1, U2 = _strang_hat(g, n, U1, U2, a * dt)
    return U1, U2


def nlkg_step(u: State, n: Nonlinearity, dt: float, order: int = 2) -> State:
    """One splitting step: half free KG flow, nonlinear kick, half free flow."""
    g = u.grid
    U1, U2 = _step_hat(g, n, g.fft(u.u1), g.fft(u.u2), dt, order)
    return State(g, g.ifft(U1), g.ifft(U2))


def nlkg_evolve(u0: State, n: Nonlinearity, T: float, dt: float, order: int = 2,
                sample_every: int = 1):
    """Yield (t, u(t)) at t = 0 and every ``sample_every`` steps up to T."""
    g = u0.grid
    nsteps = int(round(abs(T) / dt))
    h = np.sign(T) * abs(T) / nsteps if nsteps else 0.0
    U1, U2 = g.fft(u0.u1), g.fft(u0.u2)
    yield 0.0, u0
    for i in range(1, nsteps + 1):
        try:
            U1, U2 = _step_hat(g, n, U1, U2, h, order)
        except NonFinite as exc:
            raise NonFinite(str(exc), (i - 1) * h) from None
        if i % sample_every == 0 or i == nsteps:
            yield i * h, State(g, g.ifft(U1), g.ifft(U2))


def nlkg_final(u0: State, n: Nonlinearity, T: float, dt: float, order: int = 2) -> State:
    out = u0
    for _, out in nlkg_evolve(u0, n, T, dt, order, sample_every=10**9):
        pass
    return out


# ---- linearized flow -------------------------------------------------------

def linear_prop_arr(frame: SpectralFrame, a, t, method: str = "exact", dt: float = 0.005):
    lp, lm, mu, nu = frame.coords_arr(a)
    gam = a - frame.discrete_arr(lp, lm, mu, nu)
    et = np.exp(frame.k * t)
    disc = frame.discrete_arr(lp * et, lm / et, mu - t * nu, nu)
    if method == "exact":
        gt = frame.propagate_gamma_arr(gam, t)
    elif method == "strang":
        gt = _linear_strang(frame, gam, t, dt)
    else:
        raise ValueError("method must be 'exact' or 'strang'")
    # the discrete content of the gamma evolution is roundoff; drop it
    return disc + frame.gamma_arr(gt)


def _linear_strang(frame, gam, t, dt):
    g = frame.grid
    fq = frame.family.fpQ
    nsteps = max(1, int(round(abs(t) / dt)))
    h = t / nsteps
    U1, U2 = g.fft(gam[..., 0, :]), g.fft(gam[..., 1, :])
    for _ in range(nsteps):
        U1, U2 = _rotate(g, U1, U2, 0.5 * h)
        U2 = U2 + h * g.fft(fq * g.ifft(U1))
        U1, U2 = _rotate(g, U1, U2, 0.5 * h)
    return np.stack([g.ifft(U1), g.ifft(U2)], axis=-2)


def linear_prop(frame: SpectralFrame, v: State, t: float, method: str = "exact") -> State:
    a = linear_prop_arr(frame, v.stack(), t, method)
    return State(v.grid, a[0], a[1])


# ---- modulation ------------------------------------------------------------

def A_of_v(frame: SpectralFrame, v: State) -> np.ndarray:
    """(H(Q) - <Q''|v1>)^{-1} omega(v, grad v)/2, with omega(v, grad v)/2 = int v2 v1'."""
    g = frame.grid
    s = frame.family
    half_om = g.integrate(v.u2 * g.deriv(v.u1))
    M = frame.H - g.integrate(s.Qpp * v.u1)
    if frame.H > COND_MAX * abs(M):
        raise SingularModulationMatrix("modulation matrix is numerically singular", frame.H / max(abs(M), 1e-300))
    return np.array([half_om / M])


@dataclass
class ModState:
    w: State
    c: np.ndarray = field(default_factory=lambda: np.zeros(1))


class ModFlow:
    """Batched Lawson-RK4 integrator for the (w, c) system.

    ``localized=False`` sets chi = 1, which is the exact NLKG written in the
    co-moving frame.
    """

    def __init__(self, frame: SpectralFrame, params: FlowParams, localized: bool = True):
        self.frame = frame
        self.family = frame.family
        self.grid = frame.grid
        self.params = params
        self.localized = localized
        g = self.grid
        self.Qh = g.fft(self.family.Q)
        self.Qph = 1j * g.xi * self.Qh
        self.Qpph = -(g.xi**2) * self.Qh
        self.nl = self.family.nonlin
        self._w_h1 = g.wts * (1.0 + g.xi**2)
        self._w_xi = g.wts * g.xi
        self._rot_cache = {}

    # -- helpers (Fourier arrays W of shape (B, 2, M)) --
    def _rdot(self, a, b, weight=None):
        """sum(wts * Re(conj(a) b)) along the last axis."""
        w = self.grid.wts if weight is None else weight
        return (a.real * b.real + a.imag * b.imag) @ w

    def hnorm2_hat(self, W):
        g = self.grid
        a1 = W[:, 0].real ** 2 + W[:, 0].imag ** 2
        a2 = W[:, 1].real ** 2 + W[:, 1].imag ** 2
        return a1 @ self._w_h1 + a2 @ g.wts

    def rhs(self, W, c):
        g = self.grid
        W1, W2 = W[:, 0], W[:, 1]
        hn2 = self.hnorm2_hat(W)
        ch = chi_delta_arr(hn2, self.params.delta) if self.localized else np.ones_like(hn2)
        phase = np.exp(np.multiply.outer(-1j * c, g.xi))
        w1 = g.ifft(W1)
        Qc = g.ifft(self.Qh * phase)
        # int w2 w1' = sum wts Re(conj(W2) i xi W1)
        half_om = (W2.imag * W1.real - W2.real * W1.imag) @ self._w_xi
        qpp_w = self._rdot(self.Qpph * phase, W1)
        M = self.frame.H - qpp_w
        if np.any(self.frame.H > COND_MAX * np.abs(M)):
            raise SingularModulationMatrix("modulation matrix is numerically singular",
                                           float(self.frame.H / np.min(np.abs(M))))
        Bc = ch * half_om / M
        F1 = (Bc[:, None] * self.Qph) * phase
        lin, Nc = self.nl.split(Qc, w1)
        F2 = g.fft(lin + ch[:, None] * Nc)
        return np.stack([F1, F2], axis=1), Bc

    def rotate(self, W, t):
        cs, sw, ws = self._rot(t)
        W1, W2 = W[:, 0], W[:, 1]
        return np.stack([cs * W1 + sw * W2, cs * W2 - ws * W1], axis=1)

    def _rot(self, t):
        key = float(t)
        hit = self._rot_cache.get(key)
        if hit is None:
            w = self.grid.omega_kg
            cs, sn = np.cos(w * t), np.sin(w * t)
            hit = (cs, sn / w, w * sn)
            if len(self._rot_cache) < 64:
                self._rot_cache[key] = hit
        return hit

    def step(self, W, c, h):
        k1, b1 = self.rhs(W, c)
        Wa = self.rotate(W + 0.5 * h * k1, 0.5 * h)
        k2, b2 = self.rhs(Wa, c + 0.5 * h * b1)
        Wrh = self.rotate(W, 0.5 * h)
        Wb = Wrh + 0.5 * h * k2
        k3, b3 = self.rhs(Wb, c + 0.5 * h * b2)
        Wc = self.rotate(Wrh, 0.5 * h) + h * self.rotate(k3, 0.5 * h)
        k4, b4 = self.rhs(Wc, c + h * b3)
        Wn = (self.rotate(W + (h / 6.0) * k1, h)
              + (h / 3.0) * self.rotate(k2 + k3, 0.5 * h)
              + (h / 6.0) * k4)
        cn = c + (h / 6.0) * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        return Wn, cn

    # -- conversions --
    def to_hat(self, V):
        g = self.grid
        return np.stack([g.fft(V[:, 0]), g.fft(V[:, 1])], axis=1)

    def v_from(self, W, c):
        """v(x) = w(x + c): undo the co-moving shift."""
        g = self.grid
        phase = np.exp(1j * g.xi * c[:, None])
        return np.stack([g.ifft(W[:, 0] * phase), g.ifft(W[:, 1] * phase)], axis=1)

    def w_from(self, W):
        g = self.grid
        return np.stack([g.ifft(W[:, 0]), g.ifft(W[:, 1])], axis=1)

    def run(self, V0, T, dt=None, sample_dt=None, exit_radius=None, c0=None):
        """Integrate a batch V0 (B, 2, N) of initial v's over time T (any sign).

        Returns a FlowResult.  When ``exit_radius`` is given, a member stops at
        the first step where ||v||_H exceeds it, and its state there is kept.
        """
        V0 = np.asarray(V0, dtype=float)
        if V0.ndim == 2:
            V0 = V0[None]
        B = V0.shape[0]
        dt = self.params.dt if dt is None else dt
        nsteps = max(1, int(np.ceil(abs(T) / dt - 1e-9)))
        h = T / nsteps
        W = self.to_hat(V0)
        c = np.zeros(B) if c0 is None else np.array(c0, dtype=float).reshape(B)
        W_start = W.copy()
        active = np.arange(B)
        exit_time = np.full(B, np.nan)
        W_end = W.copy()
        c_end = c.copy()
        samples = []
        every = None
        if sample_dt is not None:
            every = max(1, int(round(abs(sample_dt) / abs(h))))
            samples.append((0.0, self.v_from(W, c), c.copy()))
        r2 = None if exit_radius is None else exit_radius**2
        cross = np.full(B, np.nan)  # exit time interpolated between steps
        n_prev = self.hnorm2_hat(W) if r2 is not None else None
        Wa, ca = W, c
        for i in range(1, nsteps + 1):
            Wa, ca = self.step(Wa, ca, h)
            if not np.all(np.isfinite(Wa)):
                raise NonFinite("localized flow produced non-finite values", i * h)
            if r2 is not None:
                n_now = self.hnorm2_hat(Wa)
                out = n_now > r2
                if np.any(out):
                    idx = active[out]
                    exit_time[idx] = i * h
                    a_, b_ = np.sqrt(n_prev[out]), np.sqrt(n_now[out])
                    frac = np.clip((exit_radius - a_) / np.maximum(b_ - a_, 1e-300), 0.0, 1.0)
                    cross[idx] = (i - 1 + frac) * h
                    W_end[idx] = Wa[out]
                    c_end[idx] = ca[out]
                    keep = ~out
                    active, Wa, ca = active[keep], Wa[keep], ca[keep]
                    n_now = n_now[keep]
                    if len(active) == 0:
                        break
                n_prev = n_now
            if every is not None and (i % every == 0 or i == nsteps):
                full_W = W_end.copy()
                full_c = c_end.copy()
                full_W[active] = Wa
                full_c[active] = ca
                samples.append((i * h, self.v_from(full_W, full_c), full_c.copy()))
        W_end[active] = Wa
        c_end[active] = ca
        return FlowResult(self.v_from(W_end, c_end), self.w_from(W_end), c_end, exit_time,
                          samples, h, cross)


@dataclass
class FlowResult:
    v: np.ndarray
    w: np.ndarray
    c: np.ndarray
    exit_time: np.ndarray
    samples: list
    dt: float
    exit_cross: np.ndarray | None = None

    @property
    def exited(self):
        return np.isfinite(self.exit_time)


def localized_rhs(ms: ModState, params: FlowParams, frame: SpectralFrame, s: SolitonFamily | None = None):
    """Time derivative (w', c') of the localized system, as a ModState."""
    flow = ModFlow(frame, params, localized=True)
    g = frame.grid
    W = flow.to_hat(ms.w.stack()[None])
    c = np.atleast_1d(np.asarray(ms.c, dtype=float))
    F, Bc = flow.rhs(W, c)
    lin1 = W[0, 1]
    lin2 = -(g.omega_kg**2) * W[0, 0]
    dw = State(g, g.ifft(lin1 + F[0, 0]), g.ifft(lin2 + F[0, 1]))
    return ModState(dw, Bc)


def U_prop(v0: State, t: float, params: FlowParams, frame: SpectralFrame, s: SolitonFamily | None = None,
           tol: float = 1e-8, max_halvings: int = 6, localized: bool = True) -> State:
    """v(t) for the localized equation, refining dt until successive runs agree."""
    flow = ModFlow(frame, params, localized=localized)
    V0 = v0.stack()[None]
    dt = params.dt
    prev = flow.run(V0, t, dt=dt).v[0]
    for _ in range(max_halvings):
        dt *= 0.5
        cur = flow.run(V0, t, dt=dt).v[0]
        diff = float(np.sqrt(frame.hnorm2_arr(cur - prev)))
        prev = cur
        if diff < tol:
            break
    return State(v0.grid, prev[0], prev[1])


def gamma_energy(frame: SpectralFrame, V):
    """||gamma||_E^2 = <L gamma|gamma> for the gamma part of each state in V."""
    return frame.lgamma_form(frame.gamma_arr(np.asarray(V)))


def gamma_energy_drift(traj, frame: SpectralFrame) -> float:
    """max_t | ||gamma(t)||_E^2 - ||gamma(0)||_E^2 | along a sampled trajectory."""
    V = np.stack([x.stack() if isinstance(x, State) else np.asarray(x) for x in traj])
    e = gamma_energy(frame, V)
    return float(np.max(np.abs(e - e[0])))
