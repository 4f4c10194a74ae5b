"""
Retain-probability schedules theta(t).

Time t counts gradient updates. Every variant starts at or above its floor
``theta_bar`` and never exceeds 1 on [0, T].
"""

from dataclasses import dataclass, field, replace
from ._compat import StrEnum

import numpy as np

from .exceptions import InputError

# Polynomial curves reach their floor at this fraction of T.
POLYNOMIAL_FLOOR_AT = 0.8
# exp(-10) keeps (1 - theta_bar) * exp(-10) below 1e-4 for any floor.
HEURISTIC_DECAY = 10.0


class Variant(StrEnum):
    CONSTANT = 'constant'
    EXP_CURRICULUM = 'exp_curriculum'
    POLYNOMIAL = 'polynomial'
    POWER_EXPONENT = 'power_exponent'
    SWITCH = 'switch'
    LINEAR_ANTI = 'linear_anti'


class ScheduleKind(StrEnum):
    CURRICULUM = 'curriculum'
    ANTI_CURRICULUM = 'anti_curriculum'
    CONSTANT = 'constant'


@dataclass(frozen=True)
class Schedule:
    """
    A retain-probability curve. ``gamma`` defaults to gamma_heuristic(T).
    """
    variant: Variant
    theta_bar: float
    total_updates: int
    gamma: float | None = None
    delta: int = 2
    alpha: int = 2
    switch_step: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'variant', Variant(self.variant))
        if not 0.0 < self.theta_bar <= 1.0:
            raise InputError(f"theta_bar must lie in (0, 1], got {self.theta_bar}")
        if self.total_updates < 1:
            raise InputError(f"T must be a positive integer, got {self.total_updates}")
        if self.gamma is None:
            object.__setattr__(self, 'gamma', gamma_heuristic(self.total_updates))
        if self.gamma <= 0:
            raise InputError(f"gamma must be positive, got {self.gamma}")
        if self.delta < 1:
            raise InputError(f"delta must be a positive integer, got {self.delta}")
        if self.alpha < 2:
            raise InputError(f"alpha must be at least 2, got {self.alpha}")
        if self.switch_step < 0:
            raise InputError(f"switch_step must be non-negative, got {self.switch_step}")

    def with_floor(self, theta_bar):
        """Same curve shape, different floor (one floor per retain group)."""
        return replace(self, theta_bar=theta_bar)

    def __call__(self, t):
        return retain_probability(self, t)


@dataclass(frozen=True)
class ScheduleClassification:
    kind: ScheduleKind
    evidence: list = field(default_factory=list)


def gamma_heuristic(total_updates):
    """gamma = 10 / T, so that |theta(T) - theta_bar| < 1e-4."""
    if total_updates < 1:
        raise InputError(f"T must be a positive integer, got {total_updates}")
    return HEURISTIC_DECAY / total_updates


def regularization_weight(theta):
    """Scale theta * (1 - theta) of the dropout-induced regulariser."""
    if not 0.0 < theta <= 1.0:
        raise InputError(f"theta must lie in (0, 1], got {theta}")
    return theta * (1.0 - theta)


def schedule_curve(s, ts):
    """Vectorised theta(t) over an array of update counts."""
    t = np.asarray(ts, dtype=np.float64)
    if np.any(t < 0):
        raise InputError("training time t must be non-negative")
    floor = s.theta_bar
    span = 1.0 - floor
    T = float(s.total_updates)

    # (1 - floor) * exp(-x) + floor is written as 1 - (1 - floor) * (1 - exp(-x))
    # so that theta(0) is exactly 1.
    if s.variant is Variant.CONSTANT:
        theta = np.full_like(t, floor)
    elif s.variant is Variant.EXP_CURRICULUM:
        theta = 1.0 + span * np.expm1(-s.gamma * t)
    elif s.variant is Variant.POLYNOMIAL:
        c = span / (POLYNOMIAL_FLOOR_AT * T) ** s.delta
        theta = 1.0 - c * t ** s.delta
    elif s.variant is Variant.POWER_EXPONENT:
        theta = 1.0 + span * np.expm1(-HEURISTIC_DECAY * (t / T) ** s.alpha)
    elif s.variant is Variant.SWITCH:
        theta = np.where(t < s.switch_step, 1.0, floor)
    elif s.variant is Variant.LINEAR_ANTI:
        theta = floor + span * np.minimum(t / T, 1.0)
    else:
        raise InputError(f"unknown schedule variant {s.variant!r}")
    return np.clip(theta, floor, 1.0)


def retain_probability(s, t):
    """theta(t) for a single update count (or an array of them)."""
    theta = schedule_curve(s, t)
    return float(theta) if theta.ndim == 0 else theta


def area_under_curve(s):
    """
    Mean retain probability over [0, T].

    Lower values mean dropout kicks in earlier; the exponential curve sits
    well below the polynomial and power families for the same floor.
    """
    ts = np.arange(s.total_updates + 1, dtype=np.float64)
    return float(np.trapezoid(schedule_curve(s, ts), ts) / s.total_updates)


def steps_per_epoch(train_size, batch_size):
    if train_size < 1 or batch_size < 1:
        raise InputError("train_size and batch_size must be positive")
    return -(-train_size // batch_size)


def switch_step_for_epoch(epoch, train_size, batch_size):
    """Convert a switch epoch to a switch step in gradient updates."""
    return int(epoch) * steps_per_epoch(train_size, batch_size)


def classify_schedule(s, grid):
    """
    Classify a schedule against the curriculum-function definition:
    theta(0) = 1, non-increasing, approaching theta_bar from above.
    """
    ts = np.asarray(grid, dtype=np.float64)
    if ts.size == 0:
        raise InputError("classification grid must be non-empty")
    if np.any(np.diff(ts) < 0):
        raise InputError("classification grid must be sorted ascending")

    theta = schedule_curve(s, ts)
    steps = np.diff(theta)
    tol = 1e-12

    starts_at_one = bool(ts[0] == 0 and abs(theta[0] - 1.0) <= tol)
    non_increasing = bool(np.all(steps <= tol))
    non_decreasing = bool(np.all(steps >= -tol))
    above_floor = bool(np.all(theta >= s.theta_bar - tol))
    approaches_floor = bool(theta[-1] - s.theta_bar < theta[0] - s.theta_bar)
    flat = bool(np.ptp(theta) <= tol)

    evidence = [
        ('theta(0) == 1', starts_at_one),
        ('theta non-increasing', non_increasing),
        ('theta >= theta_bar', above_floor),
        ('theta approaches theta_bar from above', approaches_floor),
    ]

    if flat:
        return ScheduleClassification(ScheduleKind.CONSTANT, evidence)
    if starts_at_one and non_increasing and above_floor and approaches_floor:
        return ScheduleClassification(ScheduleKind.CURRICULUM, evidence)
    if non_decreasing:
        evidence.append(('theta non-decreasing', True))
        return ScheduleClassification(ScheduleKind.ANTI_CURRICULUM, evidence)
    raise InputError(f"schedule {s.variant} is neither monotone nor constant on the grid")
