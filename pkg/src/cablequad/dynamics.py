"""Hybrid quadrotor / cable-suspended payload dynamics.

Two cable models share one state container:

* ``"ideal"``: massless inextensible cable. Taut mode integrates the payload
  and the cable direction ``q`` (quadrotor -> payload) with its angular rate,
  and the quadrotor position is tied kinematically as ``x_Q = x_P - l q``.
  Slack mode decouples the bodies. Mode switches happen through a guard check
  after every step; slack -> taut applies a plastic radial impact.
* ``"compliant"``: unilateral spring-damper link. No guards are needed; the
  mode label is read off the tension sign.

Everything broadcasts over a leading batch axis so that many environments
can be stepped in one call.
"""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field, fields
from functools import cached_property

import numpy as np

from . import _kernels as K
from .mathcore import E3, RngStream, cross, dot, hat, matvec, norm

# cable shorter than this is treated as a rigid attachment
L_RIGID = 1e-3
DIVERGENCE_LIMIT = 1e6
GROUND_EFFECT_HEIGHT = 0.5
GROUND_EFFECT_FMAX = 0.3


class SimulationDiverged(RuntimeError):
    pass


class CableMode(enum.IntEnum):
    TAUT = 0
    SLACK = 1
    NO_PAYLOAD = 2


def _nominal_inertia() -> np.ndarray:
    return np.diag([4.01e-3, 3.58e-3, 6.36e-3])


@dataclass
class SystemParams:
    """Physical constants. Fields may carry a leading batch axis."""

    m_Q: float | np.ndarray = 0.835
    J_Q: np.ndarray = field(default_factory=_nominal_inertia)
    m_P: float | np.ndarray = 0.2
    l: float | np.ndarray = 1.0
    f_bar: float | np.ndarray = 30.0
    Omega_bar: float | np.ndarray = 10.0
    g: float = 9.81
    k_c: float | np.ndarray = 500.0
    c_c: float | np.ndarray = 5.0
    arm_length: float | np.ndarray = 0.15
    torque_coeff: float | np.ndarray = 0.016
    rotor_tau_up: float | np.ndarray = 0.030
    rotor_tau_down: float | np.ndarray = 0.060
    delay: float | np.ndarray = 0.020
    com_offset: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gear: np.ndarray = field(default_factory=lambda: np.ones(4))

    def __post_init__(self):
        self.J_Q = np.asarray(self.J_Q, dtype=float)
        self.com_offset = np.asarray(self.com_offset, dtype=float)
        self.gear = np.asarray(self.gear, dtype=float)
        self.validate()

    def validate(self) -> None:
        if np.any(np.asarray(self.m_Q) <= 0):
            raise ValueError("m_Q must be positive")
        if np.any(np.asarray(self.m_P) < 0) or np.any(np.asarray(self.l) < 0):
            raise ValueError("m_P and l must be non-negative")
        if np.any(np.asarray(self.f_bar) <= 0) or np.any(np.asarray(self.k_c) <= 0):
            raise ValueError("f_bar and k_c must be positive")
        J = np.asarray(self.J_Q)
        if np.any(np.diagonal(J, axis1=-2, axis2=-1) <= 0):
            raise ValueError("inertia diagonal must be positive")

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return np.shape(self.m_Q)

    @cached_property
    def J_inv(self) -> np.ndarray:
        return np.linalg.inv(np.asarray(self.J_Q, dtype=float))

    @cached_property
    def has_payload(self) -> np.ndarray:
        return (np.asarray(self.m_P) > 0) & (np.asarray(self.l) > L_RIGID)

    @cached_property
    def m_total(self) -> np.ndarray:
        return np.asarray(self.m_Q, dtype=float) + np.asarray(self.m_P, dtype=float)

    @cached_property
    def m_body(self) -> np.ndarray:
        """Mass moved by the thrust when there is no swinging payload."""
        return np.where(self.has_payload, np.asarray(self.m_Q, dtype=float), self.m_total)

    @property
    def rotor_max(self) -> np.ndarray:
        return np.asarray(self.f_bar, dtype=float) / 4.0

    @cached_property
    def allocation(self) -> np.ndarray:
        return allocation_matrix(self.arm_length, self.torque_coeff)

    @cached_property
    def mixer(self) -> np.ndarray:
        """Inverse allocation: (f, Mx, My, Mz) -> rotor thrusts."""
        return np.linalg.inv(self.allocation)

    def hover_thrust(self) -> np.ndarray:
        return self.m_total * self.g


def stack_params(items: list[SystemParams]) -> SystemParams:
    """Stack per-environment parameters along a new leading axis."""
    kw = {}
    for f in fields(SystemParams):
        vals = [getattr(p, f.name) for p in items]
        kw[f.name] = vals[0] if f.name == "g" else np.stack([np.asarray(v, dtype=float) for v in vals])
    return SystemParams(**kw)


def index_params(p: SystemParams, i) -> SystemParams:
    kw = {}
    for f in fields(SystemParams):
        v = getattr(p, f.name)
        kw[f.name] = v if f.name == "g" else np.asarray(v)[i]
    return SystemParams(**kw)


@dataclass
class SystemState:
    x_Q: np.ndarray
    v_Q: np.ndarray
    R: np.ndarray
    Omega: np.ndarray
    x_P: np.ndarray
    v_P: np.ndarray
    q: np.ndarray
    omega: np.ndarray
    mode: np.ndarray

    def copy(self) -> SystemState:
        return SystemState(**{f.name: np.array(getattr(self, f.name), copy=True) for f in fields(self)})

    def select(self, mask: np.ndarray, other: SystemState) -> SystemState:
        """Per-environment merge: take ``other`` where ``mask`` is true."""
        out = {}
        for f in fields(self):
            a, b = getattr(self, f.name), getattr(other, f.name)
            m = np.reshape(mask, np.shape(mask) + (1,) * (np.ndim(a) - np.ndim(mask)))
            out[f.name] = np.where(m, b, a)
        return SystemState(**out)

    def __getitem__(self, i) -> SystemState:
        return SystemState(**{f.name: np.asarray(getattr(self, f.name))[i] for f in fields(self)})


@dataclass
class Disturbance:
    w_F: np.ndarray = field(default_factory=lambda: np.zeros(3))
    w_M: np.ndarray = field(default_factory=lambda: np.zeros(3))
    t_start: float | np.ndarray = 0.0
    duration: float | np.ndarray = 0.0

    def __post_init__(self):
        if np.any(np.asarray(self.duration) < 0):
            raise ValueError("disturbance duration must be non-negative")

    def active(self, t) -> np.ndarray:
        t0 = np.asarray(self.t_start)
        return (t >= t0) & (t < t0 + np.asarray(self.duration))

    def wrench_at(self, t) -> tuple[np.ndarray, np.ndarray]:
        on = self.active(t)[..., None].astype(float)
        return on * np.asarray(self.w_F, dtype=float), on * np.asarray(self.w_M, dtype=float)


def _col(x) -> np.ndarray:
    return np.asarray(x, dtype=float)[..., None]


# ---------------------------------------------------------------------------
# state construction


_MODEL = {"ideal": K.IDEAL, "compliant": K.COMPLIANT}


def make_state(x_Q, v_Q, R, Omega, x_P, v_P, params: SystemParams, cable_model: str = "ideal") -> SystemState:
    """Build a state from body positions/velocities, labelling the cable mode."""
    x_Q, v_Q, x_P, v_P = (np.asarray(a, dtype=float) for a in (x_Q, v_Q, x_P, v_P))
    R = np.asarray(R, dtype=float)
    Omega = np.asarray(Omega, dtype=float)
    l = np.asarray(params.l, dtype=float)
    shape = np.broadcast_shapes(x_Q.shape, x_P.shape, np.shape(l) + (3,))
    d = norm(x_P - x_Q)
    taut = d >= (l - 1e-9 if cable_model == "ideal" else l)
    mode = np.where(params.has_payload, np.where(taut, CableMode.TAUT, CableMode.SLACK), CableMode.NO_PAYLOAD)
    state = SystemState(
        x_Q=np.broadcast_to(x_Q, shape).copy(),
        v_Q=np.broadcast_to(v_Q, shape).copy(),
        R=np.broadcast_to(R, shape + (3,)).copy(),
        Omega=np.broadcast_to(Omega, shape).copy(),
        x_P=np.broadcast_to(x_P, shape).copy(),
        v_P=np.broadcast_to(v_P, shape).copy(),
        q=np.broadcast_to(-E3, shape).copy(),
        omega=np.zeros(shape),
        mode=np.broadcast_to(mode, shape[:-1]).astype(np.int64),
    )
    Y, Rs, modes, bshape = _flatten(state)
    P, _, _ = _param_rows(params, bshape)
    # q/omega from the body positions first; taut rows then own them
    K.sync_batch(Y, np.full_like(modes, CableMode.SLACK), P, K.IDEAL)
    K.sync_batch(Y, modes, P, _MODEL[cable_model])
    return _unflatten(Y, Rs, modes, bshape)


def hover_state(params: SystemParams, x_P=(0.0, 0.0, 0.0), cable_model: str = "ideal") -> SystemState:
    """Payload at ``x_P`` hanging straight below a level, motionless quadrotor."""
    x_P = np.asarray(x_P, dtype=float)
    l = np.asarray(params.l, dtype=float)
    stretch = 0.0
    if cable_model == "compliant":
        stretch = np.asarray(params.m_P, dtype=float) * params.g / np.asarray(params.k_c, dtype=float)
    length = np.where(params.has_payload, l + stretch, 0.0)
    x_Q = x_P + _col(length) * E3
    zeros = np.zeros_like(x_Q)
    R = np.broadcast_to(np.eye(3), x_Q.shape + (3,))
    return make_state(x_Q, zeros, R, zeros, x_P, zeros, params, cable_model)


def _flatten(s: SystemState):
    bshape = tuple(np.shape(s.mode))
    n = int(np.prod(bshape)) if bshape else 1
    Y = np.concatenate([s.x_Q, s.v_Q, s.x_P, s.v_P, s.q, s.omega, s.Omega], axis=-1).reshape(n, 21)
    Rs = np.array(s.R, dtype=float).reshape(n, 3, 3)
    modes = np.array(s.mode, dtype=np.int64).reshape(n)
    return Y, Rs, modes, bshape


def _unflatten(Y, Rs, modes, bshape) -> SystemState:
    Y = Y.reshape(bshape + (21,))
    return SystemState(
        x_Q=Y[..., 0:3].copy(), v_Q=Y[..., 3:6].copy(), R=Rs.reshape(bshape + (3, 3)),
        Omega=Y[..., 18:21].copy(), x_P=Y[..., 6:9].copy(), v_P=Y[..., 9:12].copy(),
        q=Y[..., 12:15].copy(), omega=Y[..., 15:18].copy(),
        mode=modes.reshape(bshape) if bshape else modes.reshape(()),
    )


def _rows(x, bshape, tail=()):
    n = int(np.prod(bshape)) if bshape else 1
    arr = np.broadcast_to(np.asarray(x, dtype=float), bshape + tail)
    return np.ascontiguousarray(arr.reshape((n,) + tail))


def _param_rows(params: SystemParams, bshape):
    cache = params.__dict__.setdefault("_rows_cache", {})
    if bshape not in cache:
        cols = [params.m_Q, params.m_P, params.l, params.k_c, params.c_c, params.g,
                params.has_payload.astype(float), params.m_body]
        P = np.stack([_rows(c, bshape) for c in cols], axis=-1)
        cache[bshape] = (P, _rows(params.J_Q, bshape, (3, 3)), _rows(params.J_inv, bshape, (3, 3)))
    return cache[bshape]


def _inputs(f, M, w_F, w_M, bshape):
    return (_rows(f, bshape), _rows(M, bshape, (3,)), _rows(w_F, bshape, (3,)), _rows(w_M, bshape, (3,)))


# ---------------------------------------------------------------------------
# forces


def compliant_cable_tension(state: SystemState, params: SystemParams) -> np.ndarray:
    """Cable force on the quadrotor (the payload receives the negative)."""
    rel = state.x_P - state.x_Q
    d = norm(rel)
    l = np.asarray(params.l, dtype=float)
    safe = np.where(d > 0, d, 1.0)
    u = rel / safe[..., None]
    ddot = dot(u, state.v_P - state.v_Q)
    T = np.asarray(params.k_c) * (d - l) + np.asarray(params.c_c) * ddot
    T = np.where((d >= l) & (d > 0) & params.has_payload, np.maximum(T, 0.0), 0.0)
    return T[..., None] * u


def taut_tension(state: SystemState, f, params: SystemParams) -> np.ndarray:
    """Tension magnitude implied by the ideal taut model for thrust ``f``."""
    fRe3 = _col(f) * state.R[..., :, 2]
    qdot = cross(state.omega, state.q)
    m_P = np.asarray(params.m_P, dtype=float)
    return -m_P / params.m_total * (
        dot(state.q, fRe3) - np.asarray(params.m_Q) * np.asarray(params.l) * dot(qdot, qdot)
    )


def ground_effect_force(z, rng: RngStream) -> np.ndarray:
    """Near-ground upwash: zero above 0.5 m, linear growth to 0.3 N at z = 0."""
    z = np.asarray(z, dtype=float)
    mag = GROUND_EFFECT_FMAX * np.clip(1.0 - z / GROUND_EFFECT_HEIGHT, 0.0, 1.0)
    d = rng.normal(size=z.shape + (3,))
    d /= np.linalg.norm(d, axis=-1, keepdims=True)
    d[..., 2] = np.abs(d[..., 2])
    return mag[..., None] * d


# ---------------------------------------------------------------------------
# continuous dynamics


@dataclass
class StateDerivative:
    x_Q: np.ndarray
    v_Q: np.ndarray
    R: np.ndarray
    Omega: np.ndarray
    x_P: np.ndarray
    v_P: np.ndarray
    q: np.ndarray
    omega: np.ndarray


def hybrid_derivative(state: SystemState, f, M, w_F, w_M, params: SystemParams,
                      cable_model: str = "ideal") -> StateDerivative:
    """Time derivative of ``state`` under thrust ``f`` and body moment ``M``.

    Taut rows use the coupled payload/cable equations with the quadrotor
    acceleration recovered from the constraint; slack rows treat the payload
    as ballistic; rows without a payload carry the aggregate rigid body.
    """
    arrays = [f, M, w_F, w_M, state.x_Q, state.v_Q, state.R, state.Omega,
              state.x_P, state.v_P, state.q, state.omega]
    if not all(np.all(np.isfinite(a)) for a in arrays):
        raise ValueError("non-finite input")
    if np.any(np.asarray(f) < 0):
        raise ValueError("negative thrust")
    Y, Rs, modes, bshape = _flatten(state)
    P, J, Jinv = _param_rows(params, bshape)
    D = K.deriv_batch(Y, Rs, modes, *_inputs(f, M, w_F, w_M, bshape), P, J, Jinv, _MODEL[cable_model])
    D = D.reshape(bshape + (21,))
    return StateDerivative(
        x_Q=D[..., 0:3], v_Q=D[..., 3:6], R=state.R @ hat(state.Omega), Omega=D[..., 18:21],
        x_P=D[..., 6:9], v_P=D[..., 9:12], q=D[..., 12:15], omega=D[..., 15:18],
    )


# ---------------------------------------------------------------------------
# mode switching


def guard_and_impact(state: SystemState, params: SystemParams, f=None) -> SystemState:
    """Apply the ideal-model guards and return the post-switch state.

    Slack -> taut fires once the bodies are a cable length apart. The impact
    is plastic along the cable: both bodies share the momentum-weighted radial
    velocity, tangential velocities are untouched, and positions are pulled
    back onto the constraint about the common centre of mass. Taut -> slack
    fires when the implied tension is no longer positive (requires ``f``).
    """
    Y, Rs, modes, bshape = _flatten(state)
    P, _, _ = _param_rows(params, bshape)
    fr = _rows(0.0 if f is None else f, bshape)
    K.guard_batch(Y, Rs, modes, fr, P, f is not None)
    return _unflatten(Y, Rs, modes, bshape)


# ---------------------------------------------------------------------------
# rotor allocation


def allocation_matrix(arm_length, torque_coeff) -> np.ndarray:
    """Forward map from rotor thrusts to (f, Mx, My, Mz) for an X frame.

    Rotor order: front-right, rear-left, front-left, rear-right; the first two
    spin so that their drag torque is positive about body z.
    """
    a = np.asarray(arm_length, dtype=float) / np.sqrt(2.0)
    k = np.asarray(torque_coeff, dtype=float)
    one = np.ones_like(a)
    rows = [
        [one, one, one, one],
        [-a, a, a, -a],
        [-a, a, -a, a],
        [k, k, -k, -k],
    ]
    B = np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)
    return B


def wrench_from_rotors(thrusts: np.ndarray, params: SystemParams) -> tuple[np.ndarray, np.ndarray]:
    thrusts = np.asarray(thrusts, dtype=float) * params.gear
    w = matvec(params.allocation, thrusts)
    f = w[..., 0]
    # thrust acts at the geometric centre, offset from the true CoM:
    # moment (-c) x (f e3) = f * (-c_y, c_x, 0)
    c = params.com_offset
    M = w[..., 1:] + _col(f) * np.stack([-c[..., 1], c[..., 0], np.zeros_like(c[..., 0])], axis=-1)
    return f, M


# ---------------------------------------------------------------------------
# integration


def check_divergence(state: SystemState) -> None:
    for arr in (state.x_Q, state.v_Q, state.Omega, state.x_P, state.v_P):
        if not np.all(np.isfinite(arr)) or np.any(np.abs(arr) > DIVERGENCE_LIMIT):
            raise SimulationDiverged("state magnitude exceeded divergence limit")


def label_compliant_mode(state: SystemState, params: SystemParams) -> np.ndarray:
    T = norm(compliant_cable_tension(state, params))
    mode = np.where(T > 0, CableMode.TAUT, CableMode.SLACK)
    return np.where(params.has_payload, mode, CableMode.NO_PAYLOAD).astype(np.int64)


def integrate_step(state: SystemState, rotor_thrusts, dist: Disturbance | None, params: SystemParams,
                   dt: float = 0.002, t: float = 0.0, cable_model: str = "ideal",
                   extra_force=None, check: bool = True) -> SystemState:
    """Advance one simulation step with rotor thrusts held constant.

    RK4 on the translational and cable coordinates, with the attitude advanced
    through the exponential map. In the ideal model the guards run after the
    step; in the compliant model the mode label follows the tension sign.
    """
    f, M = wrench_from_rotors(rotor_thrusts, params)
    return integrate_wrench(state, f, M, dist, params, dt, t, cable_model, extra_force, check)


def integrate_wrench(state: SystemState, f, M, dist: Disturbance | None, params: SystemParams,
                     dt: float = 0.002, t: float = 0.0, cable_model: str = "ideal",
                     extra_force=None, check: bool = True) -> SystemState:
    """Same as :func:`integrate_step` but driven by the total wrench directly."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    f = np.maximum(np.asarray(f, dtype=float), 0.0)
    if dist is not None:
        w_F, w_M = dist.wrench_at(t)
    else:
        w_F = w_M = 0.0
    if extra_force is not None:
        w_F = w_F + extra_force
    Y, Rs, modes, bshape = _flatten(state)
    P, J, Jinv = _param_rows(params, bshape)
    K.step_batch(Y, Rs, modes, *_inputs(f, M, w_F, w_M, bshape), P, J, Jinv, float(dt), _MODEL[cable_model])
    if check and not (np.abs(Y[:, :12]).max() <= DIVERGENCE_LIMIT and np.abs(Y[:, 18:]).max() <= DIVERGENCE_LIMIT):
        raise SimulationDiverged("state magnitude exceeded divergence limit")
    return _unflatten(Y, Rs, modes, bshape)


# ---------------------------------------------------------------------------
# energy bookkeeping (used by tests and diagnostics)


def kinetic_energy(state: SystemState, params: SystemParams) -> np.ndarray:
    m_Q = np.asarray(params.m_Q, dtype=float)
    m_P = np.asarray(params.m_P, dtype=float)
    J = np.asarray(params.J_Q, dtype=float)
    trans = np.where(
        params.has_payload,
        0.5 * m_Q * dot(state.v_Q, state.v_Q) + 0.5 * m_P * dot(state.v_P, state.v_P),
        0.5 * params.m_total * dot(state.v_Q, state.v_Q),
    )
    rot = 0.5 * dot(state.Omega, matvec(J, state.Omega))
    return trans + rot


def potential_energy(state: SystemState, params: SystemParams) -> np.ndarray:
    m_Q = np.asarray(params.m_Q, dtype=float)
    m_P = np.asarray(params.m_P, dtype=float)
    return params.g * (m_Q * state.x_Q[..., 2] + m_P * state.x_P[..., 2])


# ---------------------------------------------------------------------------
# trajectory log

TRAJECTORY_COLUMNS = (
    ["t", "x_Q", "y_Q", "z_Q", "vx_Q", "vy_Q", "vz_Q"]
    + [f"r{i}{j}" for i in range(1, 4) for j in range(1, 4)]
    + ["wx", "wy", "wz", "x_P", "y_P", "z_P", "vx_P", "vy_P", "vz_P", "mode", "f", "Mx", "My", "Mz"]
)


def trajectory_row(t: float, state: SystemState, f: float, M) -> list:
    """One log row for an unbatched state."""
    return (
        [float(t)]
        + [float(v) for v in state.x_Q] + [float(v) for v in state.v_Q]
        + [float(v) for v in np.asarray(state.R).reshape(9)]
        + [float(v) for v in state.Omega]
        + [float(v) for v in state.x_P] + [float(v) for v in state.v_P]
        + [CableMode(int(state.mode)).name.lower(), float(f)] + [float(v) for v in M]
    )


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


__all__ = [
    "CableMode", "Disturbance", "SimulationDiverged", "StateDerivative", "SystemParams", "SystemState",
    "allocation_matrix", "compliant_cable_tension", "ground_effect_force", "guard_and_impact", "hover_state",
    "hybrid_derivative", "integrate_step", "integrate_wrench", "kinetic_energy", "make_state",
    "potential_energy", "stack_params", "taut_tension", "trajectory_row", "wrench_from_rotors",
]
