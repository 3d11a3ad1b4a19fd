"""Invariant graphs of the localized flow and what they say about NLKG.

Conventions.  A center-unstable graph G maps P_{>=0} H into P_- H and is
stored through its coefficients a in R^K on the stable vectors g_{k-}; an
unstable graph maps P_+ H into P_{<=0} H.  Every graph evaluator in this
module is a callable ``G(V) -> (B, K)`` acting on batches of states
(shape (B, 2, N)); evaluators apply P_{>=0} themselves, so G = G o P_{>=0}.

Two independent routes to the fixed graph G_*:

* ``eval_Gstar``: bisection in a on the side to which psi + a g_- leaves
  the ball of radius C0 delta under the backward localized flow.
* ``graph_transform_step`` applied to the zero graph over a long time n T:
  the root a of  lambda_-[U(-nT)(psi + a g_-)] = 0, which is the n-fold
  graph transform of G = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BracketFailure, NoContraction, NoDecay, PreimageNotFound
from .flow import FlowParams, ModFlow
from .grid import State
from .mobile import MobileParams, tilde_m
from .spectral import SpectralFrame, project_arr

MANIFOLD_DT = 0.02


def _batch(V):
    V = np.asarray(V.stack() if isinstance(V, State) else V, dtype=float)
    return V[None] if V.ndim == 2 else V


def _flow(params, frame, dt, localized=True):
    p = params
    if dt is not None and dt != params.dt:
        p = FlowParams(**{**params.__dict__, "dt": dt})
    return ModFlow(frame, p, localized=localized)


# ---- graph evaluators ------------------------------------------------------

class ZeroGraph:
    tag = "cs"

    def __init__(self, frame: SpectralFrame):
        self.K = frame.K

    def __call__(self, V, **_):
        return np.zeros((_batch(V).shape[0], self.K))


class LinearGraph:
    """G(psi) = scale * nu(psi) g_-, a linear graph with ||G||_G = |scale|."""

    tag = "cs"

    def __init__(self, frame: SpectralFrame, scale: float):
        self.frame = frame
        self.scale = float(scale)

    def __call__(self, V, **_):
        V = _batch(V)
        _, _, _, nu = self.frame.coords_arr(project_arr(self.frame, V, ">=0"))
        return self.scale * np.repeat(nu[:, :1], self.frame.K, axis=1)


class GstarGraph:
    """The fixed graph, evaluated pointwise by backward bisection."""

    tag = "cs"

    def __init__(self, params: FlowParams, frame: SpectralFrame, Tmax: float = 20.0,
                 tol: float = 1e-9, dt: float | None = MANIFOLD_DT):
        self.params, self.frame = params, frame
        self.Tmax, self.tol, self.dt = Tmax, tol, dt
        self.calls = 0

    def __call__(self, V, hint=None, hint_width=None):
        self.calls += 1
        V = _batch(V)
        bracket = None
        if hint is not None:
            w = max(hint_width or 0.0, 4 * self.tol)
            hint = np.asarray(hint, dtype=float).reshape(V.shape[0], -1)[:, 0]
            bracket = np.stack([hint - w, hint + w], axis=1)
        return eval_Gstar_batch(V, self.params, self.frame, Tmax=self.Tmax, tol=self.tol,
                                dt=self.dt, bracket=bracket)


class SampledGraph:
    """Sample table with inverse-distance blending in the composite quasi-distance."""

    def __init__(self, sample: "GraphSample", frame: SpectralFrame, mparams: MobileParams | None = None,
                 neighbors: int = 3):
        self.sample, self.frame = sample, frame
        self.mp = mparams or MobileParams(delta=sample.delta)
        self.neighbors = neighbors
        self.tag = sample.tag

    def __call__(self, V, **_):
        V = project_arr(self.frame, _batch(V), ">=0")
        out = np.zeros((V.shape[0], self.sample.values.shape[1]))
        for b, x in enumerate(V):
            d = np.array([tilde_m(self.mp, self.frame, x, p) for p in self.sample.psi])
            i = np.argsort(d)[: self.neighbors]
            if d[i[0]] < 1e-14:
                out[b] = self.sample.values[i[0]]
                continue
            w = 1.0 / d[i] ** 2
            out[b] = (w[:, None] * self.sample.values[i]).sum(0) / w.sum()
        return out


@dataclass
class GraphSample:
    psi: np.ndarray  # (B, 2, N)
    values: np.ndarray  # (B, K)
    ell: float
    delta: float
    tag: str = "cs"
    info: dict = field(default_factory=dict)

    def states(self, frame):
        """Graph points psi_i + G(psi_i) as (B, 2, N)."""
        return self.psi + np.einsum("bk,ksn->bsn", self.values, frame._gm)

    def lipschitz_constant(self, frame, mparams: MobileParams | None = None) -> float:
        mp = mparams or MobileParams(delta=self.delta)
        best = 0.0
        n = len(self.psi)
        for i in range(n):
            for j in range(i + 1, n):
                d = tilde_m(mp, frame, self.psi[i], self.psi[j])
                if d > 0:
                    best = max(best, float(np.linalg.norm(self.values[i] - self.values[j])) / d)
        return best


# ---- G_* by bisection --------------------------------------------------------

def _exit_measure(flow, frame, Psi, a, Tmax, radius):
    """Signed exit measure sign(lambda_-) exp(-k_min |t_exit|) of psi + a g_- under
    the backward flow; 0 when the orbit stays in the ball up to -Tmax.

    Off the graph by d, the orbit leaves at |t| ~ log(R/|d|)/k, so the measure is
    close to linear in a near the root while keeping the sign information used
    for bracketing.
    """
    V = Psi + np.einsum("bk,ksn->bsn", a, frame._gm)
    r = flow.run(V, -Tmax, exit_radius=radius)
    _, lm, _, _ = frame.coords_arr(r.v)
    out = np.sign(lm[:, 0]) * np.exp(-frame.kmin * np.abs(np.nan_to_num(r.exit_cross, nan=Tmax)))
    out[~r.exited] = 0.0
    return out


def eval_Gstar_batch(Psi, params: FlowParams, frame: SpectralFrame, Tmax: float = 20.0,
                     tol: float = 1e-9, dt: float | None = MANIFOLD_DT, bracket=None,
                     method: str = "secant", maxiter: int = 200):
    """G_*(psi) for a batch of psi (coefficients on g_-), shape (B, K).

    The root is bracketed by the side of backward exit.  ``method="bisect"``
    halves the bracket; ``"secant"`` uses false position on the signed exit
    measure (safeguarded by the bracket) and closes the bracket with a probe.
    """
    Psi = project_arr(frame, _batch(Psi), ">=0")
    if frame.K != 1:
        return _eval_Gstar_cyclic(Psi, params, frame, Tmax, tol, dt)
    flow = _flow(params, frame, dt)
    radius = params.C0 * params.delta
    B = Psi.shape[0]
    en = frame.enorm_arr(Psi)
    cls = np.stack([-params.ell * en, params.ell * en], axis=1)
    br = cls.copy() if bracket is None else np.array(bracket, dtype=float)
    result = np.full(B, np.nan)
    trivial = en == 0.0
    result[trivial] = 0.0

    def meas(a, idx):
        return _exit_measure(flow, frame, Psi[idx], a[:, None], Tmax, radius)

    pending = np.where(~trivial)[0]
    lo, hi = br[pending, 0].copy(), br[pending, 1].copy()
    f_lo, f_hi = meas(lo, pending), meas(hi, pending)
    # a hint bracket first widens to the class bracket; the class bracket doubles once
    for attempt in range(2 if bracket is None else 3):
        bad = np.where(np.sign(f_lo) * np.sign(f_hi) > 0)[0]
        if len(bad) == 0:
            break
        if bracket is not None and attempt == 0:
            lo[bad], hi[bad] = cls[pending[bad], 0], cls[pending[bad], 1]
        else:
            c, w = 0.5 * (lo[bad] + hi[bad]), hi[bad] - lo[bad]
            lo[bad], hi[bad] = c - w, c + w
        f_lo[bad], f_hi[bad] = meas(lo[bad], pending[bad]), meas(hi[bad], pending[bad])
    bad = np.sign(f_lo) * np.sign(f_hi) > 0
    if np.any(bad):
        raise BracketFailure("both bracket ends leave on the same side",
                             {"lo": lo[bad].tolist(), "hi": hi[bad].tolist()})
    n = len(pending)
    done = np.zeros(n, dtype=bool)
    val = np.full(n, np.nan)
    # a confined endpoint is already on the graph
    for f_end, end_val in ((f_lo, lo), (f_hi, hi)):
        z = (f_end == 0) & ~done
        val[z], done[z] = end_val[z], True
    # secant state: the last two evaluated points (start from the bracket ends)
    xp, fp = lo.copy(), f_lo.copy()
    xc, fc = hi.copy(), f_hi.copy()
    for _ in range(maxiter):
        act = np.where(~done & (hi - lo >= tol))[0]
        if len(act) == 0:
            break
        l, u = lo[act], hi[act]
        mid = 0.5 * (l + u)
        if method == "secant":
            den = fc[act] - fp[act]
            with np.errstate(divide="ignore", invalid="ignore"):
                x = xc[act] - fc[act] * (xc[act] - xp[act]) / den
            inside = np.isfinite(x) & (x > l) & (x < u)
            x = np.where(inside, x, mid)
            # a settled secant step: probe 0.45 tol inward from the newest end to close the bracket
            tiny = inside & (np.abs(x - xc[act]) < 0.25 * tol)
            x = np.where(tiny, xc[act] + np.sign(x - xc[act]) * 0.45 * tol, x)
        else:
            x = mid
        fx = meas(x, pending[act])
        conf = fx == 0
        val[act[conf]], done[act[conf]] = x[conf], True
        to_hi = (np.sign(fx) == np.sign(f_hi[act])) & ~conf
        to_lo = ~to_hi & ~conf
        hi[act[to_hi]], f_hi[act[to_hi]] = x[to_hi], fx[to_hi]
        lo[act[to_lo]], f_lo[act[to_lo]] = x[to_lo], fx[to_lo]
        xp[act], fp[act] = xc[act], fc[act]
        xc[act], fc[act] = x, fx
    rest = ~done
    val[rest] = 0.5 * (lo[rest] + hi[rest])
    result[pending] = val
    return result[:, None]


def _eval_Gstar_cyclic(Psi, params, frame, Tmax, tol, dt, sweeps: int = 20):
    """K > 1: coordinate-wise bisection, Gauss-Seidel over the components."""
    flow = _flow(params, frame, dt)
    radius = params.C0 * params.delta
    B, K = Psi.shape[0], frame.K
    en = frame.enorm_arr(Psi)
    a = np.zeros((B, K))
    for _ in range(sweeps):
        old = a.copy()
        for i in range(K):
            lo = -params.ell * en
            hi = params.ell * en
            for _ in range(200):
                if np.all(hi - lo < tol):
                    break
                mid = 0.5 * (lo + hi)
                trial = a.copy()
                trial[:, i] = mid
                V = Psi + np.einsum("bk,ksn->bsn", trial, frame._gm)
                r = flow.run(V, -Tmax, exit_radius=radius)
                _, lm, _, _ = frame.coords_arr(r.v)
                up = (lm[:, i] > 0) & r.exited
                hi = np.where(up, mid, hi)
                lo = np.where(up, lo, mid)
            a[:, i] = 0.5 * (lo + hi)
        if np.max(np.abs(a - old)) < tol:
            break
    return a


def eval_Gstar(psi, params: FlowParams, frame: SpectralFrame, s=None, Tmax: float = 20.0,
               tol: float = 1e-9, dt: float | None = MANIFOLD_DT) -> np.ndarray:
    return eval_Gstar_batch(_batch(psi), params, frame, Tmax, tol, dt)[0]


# ---- graph transform -----------------------------------------------------------

def graph_transform_step(G, Psi, T: float, params: FlowParams, frame: SpectralFrame, s=None,
                         tol: float = 1e-11, maxiter: int = 200, initial=None,
                         dt: float | None = MANIFOLD_DT, ell: float | None = None) -> GraphSample:
    """Values of U(T)G at the targets Psi.

    For each target psi the new value a solves the K-dimensional equation
    m(a) = lambda_-[U(-T)(psi + a g_-)] - G(U(-T)(psi + a g_-)) = 0, i.e. the
    point psi + a g_- is the time-T image of a point of gr(G).  Solved by a
    secant iteration started from the linear slope e^{kT}.
    """
    Psi = project_arr(frame, _batch(Psi), ">=0")
    if isinstance(G, GraphSample):
        G = SampledGraph(G, frame)
    flow = _flow(params, frame, dt)
    B, K = Psi.shape[0], frame.K
    if K != 1:
        raise NotImplementedError("graph transform root solve is implemented for K = 1")
    a0 = np.zeros(B) if initial is None else np.asarray(initial, dtype=float).reshape(B)

    def m(a, idx):
        V = Psi[idx] + np.einsum("b,sn->bsn", a, frame._gm[0])
        back = flow.run(V, -T).v
        _, lm, _, _ = frame.coords_arr(back)
        hint = lm[:, 0]
        gv = G(back, hint=hint, hint_width=2e-8)
        return lm[:, 0] - gv[:, 0]

    slope = np.full(B, np.exp(frame.k[0] * T))
    idx = np.arange(B)
    out = np.full(B, np.nan)
    f0 = m(a0, idx)
    cur_a, cur_f = a0.copy(), f0
    resid = np.full(B, np.inf)
    for it in range(maxiter):
        step = -cur_f / slope[idx]
        new_a = cur_a + step
        conv = np.abs(step) < tol
        out[idx[conv]] = new_a[conv]
        resid[idx[conv]] = np.abs(cur_f[conv])
        keep = ~conv
        if not np.any(keep):
            break
        idx, cur_a, cur_f, new_a, step = idx[keep], cur_a[keep], cur_f[keep], new_a[keep], step[keep]
        new_f = m(new_a, idx)
        dfa = new_f - cur_f
        ok = np.abs(dfa) > 0
        slope[idx[ok]] = dfa[ok] / step[ok]
        cur_a, cur_f = new_a, new_f
    else:
        raise PreimageNotFound("graph transform root solve did not converge",
                               float(np.max(np.abs(cur_f))))
    return GraphSample(Psi, out[:, None], params.ell if ell is None else ell, params.delta,
                       info={"T": T, "residual": resid.tolist()})


def iterate_zero_graph(Psi, nT: float, params, frame, dt=MANIFOLD_DT, tol=1e-13) -> np.ndarray:
    """U(nT)0 at Psi: the second, independent construction of G_*."""
    return graph_transform_step(ZeroGraph(frame), Psi, nT, params, frame, tol=tol, dt=dt).values


def graph_norm_ratio(Psi, a, b, frame) -> float:
    """sup_i |a_i - b_i| / ||psi_i||_E (||c g_-||_E = |c|)."""
    en = frame.enorm_arr(project_arr(frame, _batch(Psi), ">=0"))
    d = np.linalg.norm(np.atleast_2d(a) - np.atleast_2d(b), axis=1)
    ok = en > 0
    return float(np.max(d[ok] / en[ok])) if np.any(ok) else 0.0


def contraction_rate(G0, G1, Psi, T: float, params: FlowParams, frame: SpectralFrame, s=None,
                     dt: float | None = MANIFOLD_DT) -> float:
    """Lambda = ||U(T)G0 - U(T)G1||_G / ||G0 - G1||_G measured on the samples Psi."""
    Psi = project_arr(frame, _batch(Psi), ">=0")
    den = graph_norm_ratio(Psi, G0(Psi), G1(Psi), frame)
    if den == 0.0:
        return 0.0
    u0 = graph_transform_step(G0, Psi, T, params, frame, dt=dt).values
    u1 = graph_transform_step(G1, Psi, T, params, frame, dt=dt).values
    return graph_norm_ratio(Psi, u0, u1, frame) / den


# ---- unstable graph ------------------------------------------------------------

@dataclass
class UnstablePoint:
    v: State
    lam_plus: np.ndarray
    T: float
    secant_steps: int
    decay_ratio: float


def eval_unstable_graph(lam_plus, params: FlowParams, frame: SpectralFrame, s=None, T: float | None = None,
                        dt: float | None = MANIFOLD_DT, tol: float = 1e-12, check: bool = True) -> UnstablePoint:
    """Point of the unstable graph with P_+ v = lam_plus, by shooting from ~0."""
    lam = np.atleast_1d(np.asarray(lam_plus, dtype=float))
    g = frame.grid
    if np.all(lam == 0):
        return UnstablePoint(State.zeros(g), lam, 0.0, 0, 0.0)
    if frame.K != 1:
        raise NotImplementedError("unstable graph shooting is implemented for K = 1")
    k = frame.k[0]
    if T is None:
        T = min(20.0, np.log(abs(lam[0]) / 1e-12) / frame.kmin)
    flow = _flow(params, frame, dt)
    amp = lam[0] * np.exp(-k * T)
    steps = 0
    while True:
        steps += 1
        r = flow.run(amp * frame._gp[0][None], T)
        lp = frame.coords_arr(r.v)[0][0, 0]
        if abs(lp - lam[0]) <= tol or steps >= 20:
            break
        amp *= lam[0] / lp
    v = r.v[0]
    ratio = float("nan")
    if check:
        back = flow.run(v[None], -5.0).v[0]
        ratio = float(np.sqrt(frame.hnorm2_arr(back) / frame.hnorm2_arr(v)))
        bound = 2.0 * np.exp(-5.0 * (frame.kmin - 0.1))
        if ratio > bound:
            raise NoDecay("backward orbit does not decay", ratio)
    return UnstablePoint(State(g, v[0], v[1]), lam, T, steps, ratio)


def backward_decay(v0: State, params: FlowParams, frame: SpectralFrame, t: float = 5.0,
                   sample_dt: float = 0.1, dt: float | None = MANIFOLD_DT):
    """Times and ||U(-t)v0||_H along the backward orbit."""
    flow = _flow(params, frame, dt)
    r = flow.run(v0.stack()[None], -t, sample_dt=sample_dt)
    ts = np.array([-s[0] for s in r.samples])
    ns = np.array([float(np.sqrt(frame.hnorm2_arr(s[1][0]))) for s in r.samples])
    return ts, ns


def decay_slope(ts, ns) -> float:
    return float(np.polyfit(ts, np.log(ns), 1)[0])


# ---- orthogonal restriction ------------------------------------------------------

@dataclass
class Restriction:
    nu: np.ndarray
    point: State
    iterations: int
    residuals: tuple
    history: list


def perp_residuals(frame: SpectralFrame, v) -> tuple[float, float]:
    """(omega(v, grad Q) + omega(v, grad v)/2, omega(v, J grad Q))."""
    a = _batch(v)[0]
    g = frame.grid
    Qp = frame.Qp
    om_gq = g.integrate(a[1] * Qp)  # omega(v, (Q', 0)) = int v2 Q'
    half = g.integrate(a[1] * g.deriv(a[0]))
    om_jgq = g.integrate(a[0] * Qp)  # omega(v, (0, -Q')) = int v1 Q'
    return float(om_gq + half), float(om_jgq)


def restrict_orthogonal(G, psi, params: FlowParams, frame: SpectralFrame, s=None,
                        tol: float = 1e-10, maxiter: int = 30) -> Restriction:
    """Fixed point nu = N(nu) = H^{-1} omega(phi, grad phi)/2 with
    phi(nu) = psi + nu J grad Q + G(psi + nu J grad Q) g_-."""
    g = frame.grid
    psi = project_arr(frame, _batch(psi), "gamma+")[0]
    jgq = np.stack([np.zeros(g.N), -frame.Qp])
    gm = frame._gm[0]
    nu = 0.0
    prev = None
    a_prev = None
    history = []
    for it in range(1, maxiter + 1):
        base = psi + nu * jgq
        kw = {}
        if a_prev is not None:
            kw = {"hint": np.array([a_prev]), "hint_width": 4 * params.ell * abs(nu - prev[0]) + 1e-9}
        a = float(G(base[None], **kw)[0, 0])
        phi = base + a * gm
        Nnu = g.integrate(phi[1] * g.deriv(phi[0])) / frame.H
        history.append((nu, Nnu))
        if prev is not None and abs(nu - prev[0]) > 0:
            ratio = abs(Nnu - prev[1]) / abs(nu - prev[0])
            if ratio > 0.9:
                raise NoContraction("restriction map is not contracting", ratio)
        if abs(Nnu - nu) < tol:
            res = perp_residuals(frame, phi)
            return Restriction(np.array([nu]), State(g, phi[0], phi[1]), it, res, history)
        prev = (nu, Nnu)
        a_prev = a
        nu = Nnu
    raise NoContraction("restriction fixed point not reached", float("nan"))


# ---- time reflection, reconstruction, trapping ---------------------------------------------

def reflect(V):
    """(u1, u2) -> (u1, -u2); swaps g_+ and g_-, maps cu objects to cs objects."""
    V = np.array(V, dtype=float, copy=True)
    V[..., 1, :] *= -1.0
    return V


@dataclass
class Reconstruction:
    times: np.ndarray
    u: np.ndarray  # (T, 2, N)
    v: np.ndarray
    c: np.ndarray
    nlkg_diff: float
    momentum: np.ndarray


def reconstruct_solution(v0: State, c0, t_end: float, params: FlowParams, frame: SpectralFrame, s=None,
                         sample_dt: float = 0.25, dt: float | None = 0.005, verify_dt: float = 0.002,
                         verify: bool = True) -> Reconstruction:
    """u(t) = (Q + v(t))(. - c(t)) with c' = A(v), checked against direct NLKG."""
    from .flow import nlkg_evolve
    from .grid import momentum

    g = frame.grid
    fam = frame.family
    flow = _flow(params, frame, dt, localized=False)
    c0 = float(np.atleast_1d(c0)[0])
    r = flow.run(v0.stack()[None], t_end, sample_dt=sample_dt, c0=[c0])
    times = np.array([t for t, _, _ in r.samples])
    vs = np.array([v[0] for _, v, _ in r.samples])
    cs = np.array([c[0] for _, _, c in r.samples])
    us = np.empty_like(vs)
    for i in range(len(times)):
        us[i, 0] = g.shift(fam.Q + vs[i, 0], cs[i])
        us[i, 1] = g.shift(vs[i, 1], cs[i])
    P = np.array([momentum(State(g, u[0], u[1]))[0] for u in us])
    diff = float("nan")
    if verify:
        diff = 0.0
        every = max(1, int(round(sample_dt / verify_dt)))
        for t, u in nlkg_evolve(State(g, us[0, 0], us[0, 1]), fam.nonlin, t_end, verify_dt,
                                order=4, sample_every=every):
            i = int(np.argmin(np.abs(times - t)))
            if abs(times[i] - t) < 1e-9:
                d = u.stack() - us[i]
                diff = max(diff, float(np.sqrt(frame.hnorm2_arr(d))))
    return Reconstruction(times, us, vs, cs, diff, P)


@dataclass
class ExitRecord:
    eta: float
    sign: int
    t_exit: float | None  # None for Trapped
    sup_norm: float
    v0_norm: float
    energy_gap: float
    lambda_plus_at_exit: float = float("nan")
    reprojections: int = 0
    max_correction: float = 0.0

    @property
    def trapped(self) -> bool:
        return self.t_exit is None


def cs_point(restriction: Restriction) -> np.ndarray:
    """Center-stable manifold point obtained from a center-unstable one."""
    return reflect(restriction.point.stack())


def trapping_experiment(etas, signs, base_cu: np.ndarray, params: FlowParams, frame: SpectralFrame, s=None,
                        Tmax: float = 50.0, dt: float | None = MANIFOLD_DT) -> list[ExitRecord]:
    """Forward NLKG from R(phi_cu + sign eta g_-); record the first exit from C0 delta."""
    from .grid import energy

    fam = frame.family
    g = frame.grid
    etas = np.asarray(etas, dtype=float)
    signs = np.asarray(signs, dtype=float)
    V0 = np.array([reflect(base_cu + sg * e * frame._gm[0]) for e, sg in zip(etas, signs)])
    flow = _flow(params, frame, dt, localized=False)
    r = flow.run(V0, Tmax, exit_radius=params.C0 * params.delta, sample_dt=0.5)
    sup = np.max(np.array([np.sqrt(frame.hnorm2_arr(sm[1])) for sm in r.samples]), axis=0)
    lp = frame.coords_arr(r.v)[0][:, 0]
    out = []
    for i in range(len(etas)):
        u = State(g, fam.Q + V0[i, 0], V0[i, 1])
        out.append(ExitRecord(float(etas[i]), int(signs[i]),
                              float(r.exit_time[i]) if r.exited[i] else None,
                              float(sup[i]), float(np.sqrt(frame.hnorm2_arr(V0[i]))),
                              energy(u, fam.nonlin) - fam.JQ_energy, float(lp[i])))
    return out


def project_cs(V, G, frame):
    """Replace the lambda_+ coordinate of V by the value making R V a point of gr(G)."""
    W = reflect(_batch(V))
    lp, lm, mu, nu = frame.coords_arr(W)
    base = W - np.einsum("bk,ksn->bsn", lm, frame._gm)
    a = G(base, hint=lm[:, 0], hint_width=4 * np.max(np.abs(lm)) + 1e-9)
    return reflect(base + np.einsum("bk,ksn->bsn", a, frame._gm)), np.abs(a - lm).max()


def trapped_run(base_cu: np.ndarray, G, params: FlowParams, frame: SpectralFrame, Tmax: float = 50.0,
                chunk: float = 5.0, dt: float | None = MANIFOLD_DT) -> ExitRecord:
    """eta = 0: follow the center-stable orbit forward with periodic re-projection
    onto the manifold (the orbit is a saddle-type solution, so round-off off the
    manifold grows like e^{kt} and is removed every ``chunk`` time units)."""
    from .grid import energy

    fam = frame.family
    g = frame.grid
    flow = _flow(params, frame, dt, localized=False)
    V = reflect(base_cu)[None]
    c = np.zeros(1)
    v0n = float(np.sqrt(frame.hnorm2_arr(V[0])))
    u0 = State(g, fam.Q + V[0, 0], V[0, 1])
    gap = energy(u0, fam.nonlin) - fam.JQ_energy
    t = 0.0
    sup = v0n
    nproj = 0
    maxcorr = 0.0
    radius = params.C0 * params.delta
    while t < Tmax - 1e-12:
        span = min(chunk, Tmax - t)
        r = flow.run(V, span, exit_radius=radius, sample_dt=0.5, c0=c)
        sup = max(sup, max(float(np.sqrt(frame.hnorm2_arr(sm[1][0]))) for sm in r.samples))
        if r.exited[0]:
            return ExitRecord(0.0, 0, t + float(r.exit_time[0]), sup, v0n, gap,
                              float(frame.coords_arr(r.v)[0][0, 0]), nproj, maxcorr)
        t += span
        c = r.c
        V, corr = project_cs(r.v, G, frame)
        nproj += 1
        maxcorr = max(maxcorr, float(corr))
    return ExitRecord(0.0, 0, None, sup, v0n, gap, float("nan"), nproj, maxcorr)


def fit_exit_rate(etas, t_exit) -> tuple[float, float]:
    """Fit T_exit = (1/r) log(c/eta); returns (r, c)."""
    x = np.log(1.0 / np.asarray(etas, dtype=float))
    slope, icpt = np.polyfit(x, np.asarray(t_exit, dtype=float), 1)
    r = 1.0 / slope
    return float(r), float(np.exp(icpt * r))


# ---- energy expansion --------------------------------------------------------------

def cubic_remainder(v: State, s) -> float:
    """C(v) = int [F(Q+v1) - F(Q) - f(Q) v1 - f'(Q) v1^2 / 2]."""
    n = s.nonlin
    Q = s.Q
    dens = n.F(Q + v.u1) - n.F(Q) - n.f(Q) * v.u1 - 0.5 * n.fp(Q) * v.u1**2
    return float(s.grid.integrate(dens))


def energy_expansion_check(v: State, frame: SpectralFrame, s, n=None):
    """(residual R(v), nonlinear energy functional calE(v))."""
    from .grid import energy

    n = s.nonlin if n is None else n
    c = frame.decompose(v)
    lg = float(frame.lgamma_form(c.gamma.stack()))
    Cv = cubic_remainder(v, s)
    kl = float(np.sum(frame.k * c.lambda_plus * c.lambda_minus))
    E = energy(s.Qvec + v, n)
    R = E - s.JQ_energy + kl - 0.5 * lg + Cv
    calE = float(np.sum(0.5 * frame.k * (c.lambda_plus**2 + c.lambda_minus**2))) + 0.5 * lg - Cv
    return float(R), calE


# ---- quasi-metric fixed point ---------------------------------------------------------

def quasi_banach_iterate(A, x0, d, C: float, Lam: float, n_iter: int = 20):
    """Iterate x_n = A^{nm}(x0) with m chosen so C Lam^m < 1.

    Returns (xs, m, bound) where bound(k, j) is the a priori estimate
    C Lam^{mj} / (1 - C Lam^m) d(x1, x0) for d(x_k, x_j), k > j >= 1.
    Telescoping gives sum_{l>j} C^{l-j} Lam^{m(l-1)} d(x1, x0); the leading
    C cannot be dropped (x -> 1 + (x-1)/4 from 0 with d = |x-y|^2 needs it).
    """
    m = 1
    while C * Lam**m >= 1.0:
        m += 1
    xs = [x0]
    x = x0
    for _ in range(n_iter):
        for _ in range(m):
            x = A(x)
        xs.append(x)
    d10 = d(xs[1], xs[0])

    def bound(k, j):
        return C * Lam ** (m * j) / (1.0 - C * Lam**m) * d10

    return xs, m, bound
