"""Counter-based splitmix64 stream and seeded random perturbations.

Draw i of the stream with seed s is mix(s + (i + 1) * 0x9E3779B97F4A7C15)
where mix is the splitmix64 finalizer, all arithmetic mod 2^64.  Uniform
doubles take the top 53 bits; normals use Box-Muller on consecutive pairs.
Any language with 64-bit unsigned integers reproduces the same numbers.
"""

from __future__ import annotations

import numpy as np

from .grid import Grid, State

GAMMA = np.uint64(0x9E3779B97F4A7C15)
M1 = np.uint64(0xBF58476D1CE4E5B9)
M2 = np.uint64(0x94D049BB133111EB)


def mix64(z):
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * M1
        z = (z ^ (z >> np.uint64(27))) * M2
    return z ^ (z >> np.uint64(31))


class SplitMix64:
    def __init__(self, seed: int):
        self.seed = np.uint64(int(seed) % 2**64)
        self.counter = 0

    def next_u64(self, n: int) -> np.ndarray:
        idx = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            return mix64(self.seed + idx * GAMMA)

    def uniform(self, n: int, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
        u = (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return lo + (hi - lo) * u

    def normal(self, n: int) -> np.ndarray:
        m = (n + 1) // 2
        u = self.uniform(2 * m)
        u1 = 1.0 - u[0::2]  # in (0, 1]
        r = np.sqrt(-2.0 * np.log(u1))
        th = 2.0 * np.pi * u[1::2]
        return np.concatenate([r * np.cos(th), r * np.sin(th)])[:n] if n else np.zeros(0)


def smooth_field(rng: SplitMix64, g: Grid, n_bumps: int = 3, spread: float = 4.0,
                 width=(0.5, 2.0), freq=(0.0, 3.0)) -> np.ndarray:
    """Sum of modulated Gaussian bumps centred within +-spread."""
    x = g.x
    out = np.zeros(g.N)
    a = rng.normal(n_bumps)
    c = rng.uniform(n_bumps, -spread, spread)
    s = rng.uniform(n_bumps, *width)
    k = rng.uniform(n_bumps, *freq)
    th = rng.uniform(n_bumps, 0.0, 2 * np.pi)
    for j in range(n_bumps):
        out += a[j] * np.exp(-0.5 * ((x - c[j]) / s[j]) ** 2) * np.cos(k[j] * x + th[j])
    return out


def random_state(rng: SplitMix64, g: Grid, norm: float | None = None, **kw) -> State:
    """Random smooth state, rescaled to the given H-norm when ``norm`` is set."""
    u1 = smooth_field(rng, g, **kw)
    u2 = smooth_field(rng, g, **kw)
    st = State(g, u1, u2)
    if norm is not None:
        from .grid import norm_h

        st = st * (norm / norm_h(st))
    return st
