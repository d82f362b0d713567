"""Closed-form critically damped springs and future-trajectory prediction.

The second-order system  s'' + 2*y*s' + y^2*(s - goal) = 0  with damping
y > 0 has the closed-form solution

    s(tau) = exp(-y*tau) * (j0 + tau*j1) + goal,   j0 = s0 - goal,
                                                   j1 = s0' + y*j0,

evaluated here exactly at any horizon (no integration). Future root
positions come from running the spring in velocity space (the spring
"position" is the planar velocity) and integrating the closed form;
future headings come from springing the wrapped heading angle directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import wrap_angle

LN2 = math.log(2.0)


def halflife_to_damping(halflife: float) -> float:
    """Damping y for which the closed form halves in `halflife` seconds
    (first-order factor approximation, the common game-animation rule)."""
    if halflife <= 0:
        raise ValueError("halflife must be > 0")
    return 2.0 * LN2 / halflife


@dataclass
class SpringState:
    """Critically damped spring state over an n-vector (or scalar) channel."""

    value: np.ndarray
    rate: np.ndarray
    goal: np.ndarray
    damping: float

    def __post_init__(self):
        if self.damping <= 0:
            raise ValueError("damping must be > 0")


def spring_coeffs(value, rate, goal, damping):
    j0 = np.asarray(value, dtype=np.float64) - goal
    j1 = np.asarray(rate, dtype=np.float64) + damping * j0
    return j0, j1


def spring_exact(state: SpringState, tau: float):
    """Spring (value, rate) at time tau >= 0, exact per component."""
    if tau < 0:
        raise ValueError("tau must be >= 0")
    j0, j1 = spring_coeffs(state.value, state.rate, state.goal, state.damping)
    y = state.damping
    decay = math.exp(-y * tau)
    value = decay * (j0 + tau * j1) + state.goal
    rate = decay * (j1 - y * j0 - y * tau * j1)
    return value, rate


def spring_batch(value, rate, goal, damping, taus):
    """Vectorized spring evaluation: values/rates at each tau, stacked on axis 0."""
    j0, j1 = spring_coeffs(value, rate, goal, damping)
    taus = np.asarray(taus, dtype=np.float64)[:, None] if np.ndim(value) else np.asarray(
        taus, dtype=np.float64
    )
    decay = np.exp(-damping * taus)
    values = decay * (j0 + taus * j1) + goal
    rates = decay * (j1 - damping * j0 - damping * taus * j1)
    return values, rates


def predict_root_positions(p0, v0, a0, u_cmd, damping, horizons):
    """Future planar root positions under a velocity-space spring toward u_cmd.

    p0, v0, a0, u_cmd: planar 2-vectors; horizons: ascending positive seconds.
    Returns (len(horizons), 2). Integral of the closed-form velocity:

        p(tau) = p0 - (j1/y^2) e^{-y tau} + ((-j0 - tau j1)/y) e^{-y tau}
                 + j1/y^2 + j0/y + u_cmd*tau.
    """
    horizons = _check_horizons(horizons)
    p0 = np.asarray(p0, dtype=np.float64)
    u = np.asarray(u_cmd, dtype=np.float64)
    y = float(damping)
    j0, j1 = spring_coeffs(v0, a0, u, y)
    taus = horizons[:, None]
    decay = np.exp(-y * taus)
    return (
        p0
        - (j1 / y**2) * decay
        + ((-j0 - taus * j1) / y) * decay
        + j1 / y**2
        + j0 / y
        + u * taus
    )


def predict_velocities(v0, a0, u_cmd, damping, horizons):
    """Planar velocity of the same spring at each horizon, shape (H, 2)."""
    horizons = _check_horizons(horizons)
    values, _ = spring_batch(
        np.asarray(v0, dtype=np.float64),
        np.asarray(a0, dtype=np.float64),
        np.asarray(u_cmd, dtype=np.float64),
        float(damping),
        horizons,
    )
    return values


def predict_headings(psi0, omega0, psi_cmd, damping, horizons):
    """Future headings springing psi toward psi_cmd, wrapped to (-pi, pi].

    The target is first moved to the representative nearest psi0 so the
    spring always takes the shortest arc.
    """
    horizons = _check_horizons(horizons)
    psi0 = float(psi0)
    target = psi0 + float(wrap_angle(float(psi_cmd) - psi0))
    values, _ = spring_batch(psi0, float(omega0), target, float(damping), horizons)
    return wrap_angle(values)


def command_heading(u_cmd, previous_target: float, eps: float = 1e-8) -> float:
    """Heading target for a velocity command; holds the previous target when
    the command is (numerically) zero, where atan2 is undefined."""
    u = np.asarray(u_cmd, dtype=np.float64)
    if float(np.hypot(u[0], u[1])) <= eps:
        return float(previous_target)
    return float(math.atan2(u[1], u[0]))


def _check_horizons(horizons) -> np.ndarray:
    horizons = np.asarray(horizons, dtype=np.float64)
    if horizons.ndim != 1 or horizons.size == 0:
        raise ValueError("horizons must be a non-empty 1-d sequence")
    if np.any(horizons <= 0) or np.any(np.diff(horizons) <= 0):
        raise ValueError("horizons must be ascending and positive")
    return horizons
