"""Windowed-sinusoid payload references and the derived quadrotor reference.

The payload follows ``w(t) * A * (1 - cos(omega t + phi))`` per axis, where
``w`` is a smoothstep window that holds hover before ``t_s`` and after ``t_e``.
The quadrotor reference hangs the payload along the tension direction
``q = -(a_P + g e3) / |a_P + g e3|``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from .mathcore import E3, RngStream

G = 9.81
SINGULARITY_EPS = 0.1
PHASES = (0.5 * np.pi, 1.5 * np.pi)


class ReferenceSingularity(ValueError):
    """Payload reference approaches free fall; the tension direction is undefined."""


@dataclass
class ReferenceSpec:
    A: np.ndarray
    freq: np.ndarray
    phase: np.ndarray
    t_s: float | np.ndarray = 5.0
    t_e: float | np.ndarray = 20.0
    Delta: float | np.ndarray = 3.0
    t_f: float | np.ndarray = 25.0
    v_max: float = 4.0
    origin: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        self.freq = np.asarray(self.freq, dtype=float)
        self.phase = np.asarray(self.phase, dtype=float)
        self.origin = np.asarray(self.origin, dtype=float)

    @property
    def omega(self) -> np.ndarray:
        return 2.0 * np.pi * self.freq

    def peak_speed(self) -> np.ndarray:
        return np.max(np.abs(self.A * self.omega), axis=-1)


def hover_spec(t_f: float = 25.0, origin=(0.0, 0.0, 0.0)) -> ReferenceSpec:
    """Zero-amplitude reference: hover at ``origin`` for the whole episode."""
    return ReferenceSpec(A=np.zeros(3), freq=np.zeros(3), phase=np.full(3, PHASES[0]),
                         t_s=5.0, t_e=t_f - 5.0, Delta=3.0, t_f=t_f, origin=origin)


def stack_specs(specs: list[ReferenceSpec]) -> ReferenceSpec:
    kw = {}
    for f in fields(ReferenceSpec):
        vals = [getattr(s, f.name) for s in specs]
        kw[f.name] = vals[0] if f.name == "v_max" else np.stack([np.asarray(v, dtype=float) for v in vals])
    return ReferenceSpec(**kw)


def sample_reference(rng: RngStream, t_f: float = 25.0, origin=(0.0, 0.0, 0.0),
                     v_max: float = 4.0, amp_scale: float = 1.0) -> ReferenceSpec:
    """Draw a reference from the randomized family.

    ``amp_scale`` shrinks the amplitude box (used for easy evaluation tasks).
    Draws whose acceleration gets close to free fall are rejected.
    """
    if t_f <= 16.0:
        raise ValueError("horizon must exceed two hover segments plus two transitions (16 s)")
    while True:
        A = amp_scale * rng.uniform([-2.0, -2.0, -1.0], [2.0, 2.0, 1.0])
        freq = rng.uniform([-0.2, -0.2, -0.1], [0.2, 0.2, 0.1])
        phase = np.asarray(PHASES)[rng.integers(0, 2, size=3)]
        spec = ReferenceSpec(A=A, freq=freq, phase=phase, t_s=5.0, t_e=t_f - 5.0, Delta=3.0, t_f=t_f,
                             v_max=v_max, origin=origin)
        peak = spec.peak_speed()
        if peak > v_max:
            spec.A = spec.A * (v_max / peak)
        if _min_tension_norm(spec) > SINGULARITY_EPS:
            return spec


def _min_tension_norm(spec: ReferenceSpec) -> float:
    ts = np.arange(0.0, float(spec.t_f) + 1e-9, 0.01)
    a = payload_reference(ts, spec)[2]
    return float(np.min(np.linalg.norm(a + G * E3, axis=-1)))


def _smoothstep_derivs(s):
    """Value and first four derivatives of 3s^2 - 2s^3 w.r.t. s."""
    return (3 * s**2 - 2 * s**3, 6 * s - 6 * s**2, 6 - 12 * s, -12.0 * np.ones_like(s), np.zeros_like(s))


def _window_derivs(t, spec: ReferenceSpec):
    t = np.asarray(t, dtype=float)
    t_s, t_e, D = (np.asarray(x, dtype=float) for x in (spec.t_s, spec.t_e, spec.Delta))
    ones = np.ones(np.broadcast_shapes(t.shape, t_s.shape))
    zeros = np.zeros_like(ones)
    rise = (t >= t_s) & (t < t_s + D)
    plateau = (t >= t_s + D) & (t <= t_e - D)
    fall = (t > t_e - D) & (t <= t_e)
    a = np.clip((t - t_s) / D, 0.0, 1.0)
    b = np.clip((t_e - t) / D, 0.0, 1.0)
    sa = _smoothstep_derivs(a)
    sb = _smoothstep_derivs(b)
    out = []
    for k in range(5):
        rise_k = sa[k] / D**k
        fall_k = sb[k] * (-1.0) ** k / D**k
        plateau_k = ones if k == 0 else zeros
        out.append(np.where(rise, rise_k, np.where(plateau, plateau_k, np.where(fall, fall_k, zeros))))
    return out


def smooth_window(t, spec: ReferenceSpec) -> tuple[np.ndarray, np.ndarray]:
    """Window value and its time derivative."""
    w = _window_derivs(t, spec)
    return w[0], w[1]


def payload_reference(t, spec: ReferenceSpec):
    """Payload position, velocity, acceleration, jerk and snap at time ``t``."""
    t = np.asarray(t, dtype=float)
    w = [x[..., None] for x in _window_derivs(t, spec)]
    om = spec.omega
    th = om * t[..., None] + spec.phase
    A = spec.A
    c, s = np.cos(th), np.sin(th)
    osc = [A * (1.0 - c), A * om * s, A * om**2 * c, -A * om**3 * s, -A * om**4 * c]
    binom = [[1], [1, 1], [1, 2, 1], [1, 3, 3, 1], [1, 4, 6, 4, 1]]
    derivs = []
    for n in range(5):
        derivs.append(sum(binom[n][k] * w[k] * osc[n - k] for k in range(n + 1)))
    derivs[0] = derivs[0] + spec.origin
    return tuple(derivs)


@dataclass
class ReferenceSample:
    x_P_d: np.ndarray
    v_P_d: np.ndarray
    a_P_d: np.ndarray
    x_Q_d: np.ndarray
    v_Q_d: np.ndarray
    a_Q_d: np.ndarray
    q_d: np.ndarray
    q_dot_d: np.ndarray
    q_ddot_d: np.ndarray


def tension_direction(a, jerk, snap, g: float = G):
    """Unit tension direction and its first two time derivatives."""
    T = -(a + g * E3)
    Td = -jerk
    Tdd = -snap
    n = np.linalg.norm(T, axis=-1, keepdims=True)
    if np.any(n < SINGULARITY_EPS):
        raise ReferenceSingularity("payload acceleration too close to free fall")
    q = T / n
    qTd = np.sum(q * Td, axis=-1, keepdims=True)
    q_dot = (Td - q * qTd) / n
    q_ddot = (Tdd - 2.0 * q_dot * qTd
              - q * (np.sum(q_dot * Td, axis=-1, keepdims=True) + np.sum(q * Tdd, axis=-1, keepdims=True))) / n
    return q, q_dot, q_ddot


def quadrotor_reference(t, spec: ReferenceSpec, m_P=0.2, l=1.0, g: float = G) -> ReferenceSample:
    """Payload reference plus the quadrotor reference implied by the cable.

    The tension direction does not depend on the payload mass, so ``m_P`` is
    accepted for interface symmetry only.
    """
    x, v, a, j, s = payload_reference(t, spec)
    q, qd, qdd = tension_direction(a, j, s, g)
    l = np.asarray(l, dtype=float)[..., None]
    return ReferenceSample(
        x_P_d=x, v_P_d=v, a_P_d=a,
        x_Q_d=x - l * q, v_Q_d=v - l * qd, a_Q_d=a - l * qdd,
        q_d=q, q_dot_d=qd, q_ddot_d=qdd,
    )


REFERENCE_COLUMNS = (
    ["t"]
    + [f"{c}_P_d" for c in ("x", "y", "z")] + [f"v{c}_P_d" for c in ("x", "y", "z")]
    + [f"a{c}_P_d" for c in ("x", "y", "z")] + [f"q{c}_d" for c in ("x", "y", "z")]
    + [f"{c}_Q_d" for c in ("x", "y", "z")] + [f"v{c}_Q_d" for c in ("x", "y", "z")]
)


def reference_table(spec: ReferenceSpec, m_P: float, l: float, rate: float = 100.0) -> np.ndarray:
    n = int(round(float(spec.t_f) * rate)) + 1
    ts = np.arange(n) / rate
    r = quadrotor_reference(ts, spec, m_P, l)
    return np.column_stack([ts, r.x_P_d, r.v_P_d, r.a_P_d, r.q_d, r.x_Q_d, r.v_Q_d])
