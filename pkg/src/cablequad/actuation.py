"""CTBR actuation chain: action map, body-rate PID, mixer, rotor lag and delay."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import SystemParams


def map_action(a: np.ndarray, params: SystemParams) -> tuple[np.ndarray, np.ndarray]:
    """Normalized action -> (collective thrust N, desired body rates rad/s)."""
    a = np.asarray(a, dtype=float)
    f = 0.5 * np.asarray(params.f_bar) * (1.0 + a[..., 0])
    Omega_d = np.asarray(params.Omega_bar)[..., None] * a[..., 1:4]
    return f, Omega_d


def _vec3(x):
    return np.asarray(x, dtype=float)


@dataclass
class RatePidState:
    K_p: np.ndarray = field(default_factory=lambda: _vec3([0.1, 0.1, 0.05]))
    K_i: np.ndarray = field(default_factory=lambda: _vec3([0.05, 0.05, 0.025]))
    K_d: np.ndarray = field(default_factory=lambda: _vec3([0.002, 0.002, 0.001]))
    integral_limit: np.ndarray = field(default_factory=lambda: _vec3([0.5, 0.5, 0.5]))
    M_max: float = 0.1
    M_min: float = -0.1
    integral: np.ndarray = field(default_factory=lambda: np.zeros(3))
    prev_error: np.ndarray = field(default_factory=lambda: np.zeros(3))
    # no derivative term until one error sample exists
    primed: np.ndarray | bool = False

    def reset(self, batch_shape=()) -> RatePidState:
        return replace(self, integral=np.zeros(batch_shape + (3,)), prev_error=np.zeros(batch_shape + (3,)),
                       primed=np.zeros(batch_shape, dtype=bool))


def rate_pid_step(Omega, Omega_d, pid: RatePidState, dt: float) -> tuple[np.ndarray, RatePidState]:
    """Per-axis PID on the body-rate error with clamping anti-windup.

    The integral only accumulates when the output is unsaturated or when the
    error would pull it back out of saturation.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    e = np.asarray(Omega_d, dtype=float) - np.asarray(Omega, dtype=float)
    primed = np.asarray(pid.primed)[..., None]
    e_dot = np.where(primed, (e - pid.prev_error) / dt, 0.0)
    lim = pid.integral_limit
    cand = np.clip(pid.integral + e * dt, -lim, lim)
    u = pid.K_p * e + pid.K_i * cand + pid.K_d * e_dot
    winding = ((u > pid.M_max) & (e > 0)) | ((u < pid.M_min) & (e < 0))
    integral = np.where(winding, np.clip(pid.integral, -lim, lim), cand)
    u = pid.K_p * e + pid.K_i * integral + pid.K_d * e_dot
    M = np.clip(u, pid.M_min, pid.M_max)
    new = replace(pid, integral=integral, prev_error=e, primed=np.ones(np.shape(e)[:-1], dtype=bool))
    return M, new


def mix_to_rotors(f, M, params: SystemParams) -> np.ndarray:
    """Rotor thrusts for a desired wrench, clipped to ``[0, f_bar / 4]`` per rotor."""
    w = np.concatenate([np.asarray(f, dtype=float)[..., None], np.asarray(M, dtype=float)], axis=-1)
    thrusts = np.einsum("...ij,...j->...i", params.mixer, w)
    return np.clip(thrusts, 0.0, np.asarray(params.rotor_max)[..., None])


@dataclass
class MotorState:
    """Rotor thrusts plus a fixed-rate FIFO of past commands.

    ``queue[..., -1, :]`` is the newest command; the command applied at a step
    is the one pushed ``delay_steps`` steps earlier.
    """

    thrust: np.ndarray
    queue: np.ndarray
    delay_steps: np.ndarray


def init_motor(params: SystemParams, dt: float, initial=None, capacity: int | None = None) -> MotorState:
    """Motor state with the queue pre-filled by ``initial`` (default zero thrust)."""
    delay_steps = np.rint(np.asarray(params.delay, dtype=float) / dt).astype(int)
    if capacity is None:
        capacity = int(np.max(delay_steps)) + 1
    bshape = np.shape(params.delay)
    thrust = np.zeros(bshape + (4,)) if initial is None else np.broadcast_to(initial, bshape + (4,)).astype(float)
    queue = np.repeat(thrust[..., None, :], capacity, axis=-2)
    return MotorState(thrust=thrust.copy(), queue=queue, delay_steps=delay_steps)


def motor_and_delay_step(m: MotorState, commanded, dt: float, params: SystemParams) -> tuple[MotorState, np.ndarray]:
    """Push ``commanded``, pop the delayed command, advance the first-order rotor lag."""
    commanded = np.asarray(commanded, dtype=float)
    queue = np.concatenate([m.queue[..., 1:, :], commanded[..., None, :]], axis=-2)
    K = queue.shape[-2]
    idx = (K - 1 - m.delay_steps)[..., None, None]
    cmd = np.take_along_axis(queue, np.broadcast_to(idx, idx.shape[:-2] + (1, 4)), axis=-2)[..., 0, :]
    rising = cmd > m.thrust
    tau = np.where(rising, np.asarray(params.rotor_tau_up)[..., None], np.asarray(params.rotor_tau_down)[..., None])
    thrust = m.thrust + (cmd - m.thrust) * (1.0 - np.exp(-dt / tau))
    return MotorState(thrust=thrust, queue=queue, delay_steps=m.delay_steps), thrust


class Actuator:
    """Stateful rate loop + mixer + motors for a (batch of) vehicle(s)."""

    def __init__(self, params: SystemParams, dt: float, pid: RatePidState | None = None,
                 initial_thrust=None):
        self.params = params
        self.dt = dt
        bshape = np.shape(params.m_Q)
        self.pid = (pid or RatePidState()).reset(bshape)
        self.motor = init_motor(params, dt, initial_thrust)
        self.last_M = np.zeros(bshape + (3,))

    def step_rates(self, Omega, f, Omega_d) -> np.ndarray:
        """Rate loop for one simulation step; returns the applied rotor thrusts."""
        M, self.pid = rate_pid_step(Omega, Omega_d, self.pid, self.dt)
        self.last_M = M
        return self.step_wrench(f, M)

    def step_wrench(self, f, M) -> np.ndarray:
        cmd = mix_to_rotors(f, M, self.params)
        self.motor, applied = motor_and_delay_step(self.motor, cmd, self.dt, self.params)
        return applied
