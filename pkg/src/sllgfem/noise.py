"""Noise coefficient fields g_i: D -> R^3 with analytic Jacobians.

Each component is a pair of vectorized callbacks: values g_i(x) and the
Jacobian columns dg_i/dx_d for the spatial directions d = 1..dim. Presets
cover the regimes the analysis distinguishes: commuting constants,
non-commuting constants, and spatially varying fields. The homogeneous
Neumann condition on g_i is declared by the model, not checked here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PRESETS = ("zero", "constant-z", "constant-x", "pair-noncommuting",
           "linear-gradient")


@dataclass(frozen=True)
class NoiseComponent:
    """One field g_i; callbacks take (P, dim) points.

    g_fn returns (P, 3); jac_fn returns (P, 3, dim) with jac[:, :, d] the
    directional derivative dg/dx_d.
    """

    g_fn: object
    jac_fn: object


@dataclass(frozen=True)
class NoiseCoefficients:
    components: tuple = field(default_factory=tuple)

    @property
    def q(self):
        return len(self.components)

    def g_at(self, points):
        """Values of all components, shape (q, P, 3)."""
        points = np.asarray(points, dtype=float)
        out = np.stack([np.asarray(c.g_fn(points), dtype=float)
                        for c in self.components])
        if not np.isfinite(out).all():
            raise ValueError("non-finite noise coefficient value")
        return out

    def jac_at(self, points):
        """Jacobians of all components, shape (q, P, 3, dim)."""
        points = np.asarray(points, dtype=float)
        out = np.stack([np.asarray(c.jac_fn(points), dtype=float)
                        for c in self.components])
        if not np.isfinite(out).all():
            raise ValueError("non-finite noise Jacobian value")
        return out


def constant_component(vector):
    """g identically equal to `vector`; Jacobian zero."""
    vec = np.asarray(vector, dtype=float).reshape(3)

    def g_fn(x):
        return np.broadcast_to(vec, (len(x), 3)).copy()

    def jac_fn(x):
        return np.zeros((len(x), 3, x.shape[1]))

    return NoiseComponent(g_fn, jac_fn)


def linear_gradient_component(amplitude=1.0):
    """g(x) = amplitude * (x_1, 0, 1 - x_1), varying along the first axis."""
    amp = float(amplitude)

    def g_fn(x):
        out = np.zeros((len(x), 3))
        out[:, 0] = amp * x[:, 0]
        out[:, 2] = amp * (1.0 - x[:, 0])
        return out

    def jac_fn(x):
        out = np.zeros((len(x), 3, x.shape[1]))
        out[:, 0, 0] = amp
        out[:, 2, 0] = -amp
        return out

    return NoiseComponent(g_fn, jac_fn)


def make_noise(preset, amplitude=1.0, vectors=None):
    """Build NoiseCoefficients from a preset name or explicit constant vectors.

    Presets: "zero" (q=1, g=0), "constant-z" (q=1, amplitude*e3),
    "constant-x" (q=1, amplitude*e1), "pair-noncommuting" (q=2, amplitude*e3
    and amplitude*e1), "linear-gradient" (q=1, spatially varying). Passing
    `vectors` instead builds one constant component per vector.
    """
    amp = float(amplitude)
    if vectors is not None:
        comps = [constant_component(amp * np.asarray(v, dtype=float))
                 for v in vectors]
        if not comps:
            raise ValueError("vectors list is empty")
        return NoiseCoefficients(tuple(comps))
    e1 = np.array([1.0, 0.0, 0.0])
    e3 = np.array([0.0, 0.0, 1.0])
    if preset == "zero":
        comps = [constant_component(np.zeros(3))]
    elif preset == "constant-z":
        comps = [constant_component(amp * e3)]
    elif preset == "constant-x":
        comps = [constant_component(amp * e1)]
    elif preset == "pair-noncommuting":
        comps = [constant_component(amp * e3), constant_component(amp * e1)]
    elif preset == "linear-gradient":
        comps = [linear_gradient_component(amp)]
    else:
        raise ValueError(f"unknown noise preset {preset!r}")
    return NoiseCoefficients(tuple(comps))
