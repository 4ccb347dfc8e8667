"""Shared constructions for the test suite."""

import math

import numpy as np

from alfmass.geometry import MetricFamily, ModelMetric, Monopole


def smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x**3 * (10.0 - 15.0 * x + 6.0 * x**2)


def interior_window(s, lo0, lo1, hi0, hi1):
    """C^2 plateau equal to 1 on [lo1, hi0], vanishing outside [lo0, hi1]."""
    return smoothstep((s - lo0) / (lo1 - lo0)) * (1.0 - smoothstep((s - hi0) / (hi1 - hi0)))


def wobble_family(fiber_dependent=True, radial_offdiag=True):
    """Hand-built family on the charge-1 monopole model with off-diagonal
    horizontal-fiber components, optionally oscillating along the fiber.

    Decays like 1/r; used to exercise code paths that the closed-form
    (diagonal, fiber-invariant) families never reach.
    """
    L = 2.0 * math.pi
    model = ModelMetric(3, L, Monopole(1))

    def components(xs, ts):
        xs = np.atleast_2d(xs)
        ts = np.zeros(xs.shape[0]) if ts is None else np.asarray(ts, dtype=float)
        r = np.linalg.norm(xs, axis=1)
        g = np.zeros((xs.shape[0], 4, 4))
        v = 1.0 + 0.8 / r
        for i in range(3):
            g[:, i, i] = v
        g[:, 3, 3] = 1.0 - 0.5 / r
        if radial_offdiag:
            prof = xs / r[:, None]
        else:
            prof = np.stack([-xs[:, 1], xs[:, 0], np.zeros_like(r)], axis=1) / r[:, None]
        amp = 0.3 * (1.0 + 0.5 * np.sin(2.0 * math.pi * ts / L)) if fiber_dependent else 0.3
        for i in range(3):
            g[:, i, 3] = amp * prof[:, i] / r
            g[:, 3, i] = g[:, i, 3]
        return g

    return MetricFamily(
        name="synthetic-wobble",
        model=model,
        decay_order=1.0,
        components=components,
    )


def random_interior_profile(rng, grid, n_modes=(2, 6), freq=(0.5, 3.0)):
    """Band-limited oscillation supported well inside the grid."""
    s = grid.s
    k = rng.integers(*n_modes)
    wave = sum(
        rng.normal() * np.sin(w * s + rng.uniform(0, 2 * math.pi))
        for w in rng.uniform(*freq, k)
    )
    win = interior_window(s, s[0] + 1.2, s[0] + 2.2, s[-1] - 2.2, s[-1] - 1.2)
    return win * wave
