"""Per-episode domain randomization, initial perturbations and impulse disturbances."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dynamics import Disturbance, SystemParams
from .mathcore import RngStream, so3_exp


@dataclass(frozen=True)
class RandomizationRanges:
    mass_scale: float = 0.10
    inertia_scale: float = 0.10
    inertia_tilt_max: float = np.deg2rad(5.0)
    com_offset_max: float = 0.01
    gear_scale: float = 0.05
    m_P_range: tuple[float, float] = (0.0, 0.2)
    l_range: tuple[float, float] = (0.0, 1.0)
    rotor_tau_scale: float = 0.30
    delay_range: tuple[float, float] = (0.010, 0.030)
    slack_probability: float = 0.2

    def __post_init__(self):
        for lo, hi in (self.m_P_range, self.l_range, self.delay_range):
            if lo > hi or lo < 0:
                raise ValueError("ranges must be ordered and non-negative")
        for name in ("mass_scale", "inertia_scale", "gear_scale", "rotor_tau_scale"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in [0, 1)")
        if not 0.0 <= self.slack_probability <= 1.0:
            raise ValueError("slack_probability must lie in [0, 1]")

    @classmethod
    def none(cls, nominal: SystemParams | None = None) -> RandomizationRanges:
        """Zero-width ranges pinned to the nominal payload, cable and delay."""
        p = nominal or SystemParams()
        m_P, l, d = float(p.m_P), float(p.l), float(p.delay)
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, (m_P, m_P), (l, l), 0.0, (d, d), 0.0)


def _scale(rng: RngStream, width: float, size=None):
    return 1.0 + rng.uniform(-width, width, size=size)


def random_tilt(rng: RngStream, max_angle: float) -> np.ndarray:
    """Rotation about a uniformly distributed axis by an angle in [0, max_angle]."""
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    return so3_exp(axis * rng.uniform(0.0, max_angle))


def randomize_params(nominal: SystemParams, ranges: RandomizationRanges, rng: RngStream) -> SystemParams:
    """One episode's physical parameters (unbatched ``nominal``)."""
    J_diag = np.diagonal(nominal.J_Q) * _scale(rng, ranges.inertia_scale, 3)
    Rj = random_tilt(rng, ranges.inertia_tilt_max)
    return replace(
        nominal,
        m_Q=float(nominal.m_Q) * float(_scale(rng, ranges.mass_scale)),
        J_Q=Rj @ np.diag(J_diag) @ Rj.T,
        com_offset=np.asarray(nominal.com_offset) + rng.uniform(-ranges.com_offset_max, ranges.com_offset_max, 3),
        gear=np.asarray(nominal.gear) * _scale(rng, ranges.gear_scale, 4),
        m_P=float(rng.uniform(*ranges.m_P_range)),
        l=float(rng.uniform(*ranges.l_range)),
        rotor_tau_up=float(nominal.rotor_tau_up) * float(_scale(rng, ranges.rotor_tau_scale)),
        rotor_tau_down=float(nominal.rotor_tau_down) * float(_scale(rng, ranges.rotor_tau_scale)),
        delay=float(rng.uniform(*ranges.delay_range)),
    )


@dataclass
class InitialPerturbation:
    dx: np.ndarray
    dv: np.ndarray
    deuler: np.ndarray
    dOmega: np.ndarray


PERTURB_POS = 0.1
PERTURB_VEL = 0.1
PERTURB_ANG = np.pi / 12


def sample_initial_perturbation(rng: RngStream, scale: float = 1.0) -> InitialPerturbation:
    """Rigid-shift offsets: both bodies get the same position/velocity offset."""
    return InitialPerturbation(
        dx=scale * rng.uniform(-PERTURB_POS, PERTURB_POS, 3),
        dv=scale * rng.uniform(-PERTURB_VEL, PERTURB_VEL, 3),
        deuler=scale * rng.uniform(-PERTURB_ANG, PERTURB_ANG, 3),
        dOmega=scale * rng.uniform(-PERTURB_ANG, PERTURB_ANG, 3),
    )


def sample_impulse_disturbance(rng: RngStream, window=(8.0, 17.0), force_max: float = 0.5,
                               torque_max: float = 0.005, duration_max: float = 0.5) -> Disturbance:
    """Constant force/torque pulse with start time uniform over ``window``."""
    return Disturbance(
        w_F=rng.uniform(-force_max, force_max, 3),
        w_M=rng.uniform(-torque_max, torque_max, 3),
        t_start=float(rng.uniform(*window)),
        duration=float(rng.uniform(0.0, duration_max)),
    )


def sample_slack_gap(rng: RngStream, l: float, ranges: RandomizationRanges, max_gap: float = 0.3) -> float:
    """Initial shortfall of the payload distance below ``l`` (0 means taut)."""
    if l <= 0 or rng.random() >= ranges.slack_probability:
        return 0.0
    return float(rng.uniform(0.0, min(l, max_gap)))
