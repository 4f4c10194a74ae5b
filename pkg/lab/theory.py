"""
Exact corruption distributions induced by Bernoulli masking of the input.

An example z is a pair (z0, i): a clean base example z0 drawn from pi and
the number i of input entries a mask of size d set to zero. Enumerating
(z0, i) instead of whole masks keeps the support at m * (d + 1) atoms.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.stats import entropy

from .exceptions import CapacityError, InputError, UndefinedWeightError
from .regularization import sample_mask
from .schedulers import ScheduleKind, Variant, area_under_curve, classify_schedule, retain_probability

MAX_ENUMERATION_DIM = 20
NORMALIZATION_TOL = 1e-12
TERMINAL_TOL = 1e-15
DEFAULT_GRID_POINTS = 21


@dataclass(frozen=True)
class BaseDistribution:
    support: tuple
    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        object.__setattr__(self, 'support', tuple(self.support))
        object.__setattr__(self, 'probs', probs)
        if probs.shape != (len(self.support),):
            raise InputError("base distribution needs one probability per support element")
        if np.any(probs < 0):
            raise InputError("base probabilities must be non-negative")
        if abs(probs.sum() - 1.0) > NORMALIZATION_TOL:
            raise InputError(f"base probabilities sum to {probs.sum()!r}, not 1")


def uniform_base(m):
    """Uniform pi over m base examples labelled 0..m-1."""
    if m < 1:
        raise InputError("need at least one base example")
    return BaseDistribution(support=tuple(range(m)), probs=np.full(m, 1.0 / m))


@dataclass(frozen=True)
class CorruptionDistribution:
    """
    Q over (z0, i). ``table[k, i]`` holds the mass of (support[k], i).
    """
    base: BaseDistribution
    d: int
    lam: float
    theta: float
    table: np.ndarray = field(repr=False)

    @property
    def atoms(self):
        return {
            (z0, i): float(self.table[k, i])
            for k, z0 in enumerate(self.base.support)
            for i in range(self.d + 1)
        }

    def atom(self, z0, i):
        return float(self.table[self.base.support.index(z0), i])

    def normalization_error(self):
        return abs(float(self.table.sum()) - 1.0)


def _check_theta(theta):
    if not 0.0 < theta <= 1.0:
        raise InputError(f"theta must lie in (0, 1], got {theta}")


def mask_count_probability(d, i, theta):
    """Probability that a size-d Bernoulli(theta) mask has exactly i zeros."""
    if d < 0 or not 0 <= i <= d:
        raise InputError(f"zero count i={i} outside [0, {d}]")
    _check_theta(theta)
    return math.comb(d, i) * (1.0 - theta) ** i * theta ** (d - i)


def _count_probabilities(d, theta):
    return np.array([mask_count_probability(d, i, theta) for i in range(d + 1)])


def _check_dimension(d):
    if d > MAX_ENUMERATION_DIM:
        raise CapacityError(f"d={d} exceeds the enumeration bound {MAX_ENUMERATION_DIM}")
    if d < 1:
        raise InputError("input dimension d must be positive")


def corruption_distribution(pi, d, theta, lam):
    _check_dimension(d)
    if not 0.0 <= lam <= 1.0:
        raise InputError(f"learning time lambda must lie in [0, 1], got {lam}")
    _check_theta(theta)
    table = np.outer(pi.probs, _count_probabilities(d, theta))
    return CorruptionDistribution(base=pi, d=d, lam=float(lam), theta=float(theta), table=table)


def curriculum_at(pi, d, schedule, lam):
    """Q_lambda with theta = theta(lambda * T)."""
    theta = retain_probability(schedule, lam * schedule.total_updates)
    return corruption_distribution(pi, d, theta, lam)


def terminal_retain(schedule):
    """theta(T): the retain probability the target distribution P is built from."""
    return retain_probability(schedule, schedule.total_updates)


def target_distribution(pi, d, theta_target):
    """
    P, built atom by atom from ``theta_target``, independently of the
    grid-wide construction used for Q_lambda.
    """
    _check_dimension(d)
    _check_theta(theta_target)
    table = np.empty((len(pi.support), d + 1))
    for k, weight in enumerate(pi.probs):
        for i in range(d + 1):
            table[k, i] = mask_count_probability(d, i, theta_target) * weight
    return CorruptionDistribution(base=pi, d=d, lam=1.0, theta=float(theta_target), table=table)


def difficulty_weight(pi, d, z0, i, theta_lambda, theta_bar):
    """
    W_lambda(z0, i) = Q_lambda(z0, i) / P(z0, i), evaluated literally.

    ``theta_bar`` is the retain probability of P; for a schedule that is
    ``terminal_retain(schedule)``.
    """
    k = pi.support.index(z0)
    target = mask_count_probability(d, i, theta_bar) * pi.probs[k]
    if target == 0.0:
        raise UndefinedWeightError(f"P({z0!r}, {i}) is zero; the weight is undefined")
    return mask_count_probability(d, i, theta_lambda) * pi.probs[k] / target


def shannon_entropy(q, base=None):
    """Entropy of Q in nats (or in ``base`` units); 0 log 0 counts as 0."""
    return float(entropy(q.table.ravel(), base=base))


def sample_corruptions(pi, d, theta, n, rng):
    """
    Draw n examples by sampling z0 from pi and a fresh mask per example;
    returns a count table shaped like ``CorruptionDistribution.table``.
    """
    counts = np.zeros((len(pi.support), d + 1), dtype=np.int64)
    base_draws = rng.choice(len(pi.support), size=n, p=pi.probs)
    masks = sample_mask((n, d), theta, rng)
    zeros = d - masks.values.sum(axis=1).astype(np.int64)
    np.add.at(counts, (base_draws, zeros), 1)
    return counts


def lambda_grid(points=DEFAULT_GRID_POINTS):
    if points < 2:
        raise InputError("a lambda grid needs at least two points")
    return np.linspace(0.0, 1.0, points)


@dataclass
class GridRow:
    lam: float
    theta: float
    entropy_nats: float
    entropy_bits: float
    normalization_error: float


@dataclass
class CurriculumReport:
    kind: ScheduleKind
    d: int
    rows: list = field(default_factory=list)
    normalized: bool = True
    entropy_checked: bool = True
    entropy_ordered: bool = True
    terminal_matches_target: bool = True
    target_theta: float = 1.0
    area: float = 1.0
    weights_monotone: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    @property
    def passed(self):
        return self.normalized and self.entropy_ordered and self.terminal_matches_target

    def csv_lines(self):
        lines = ['lambda,theta,entropy,normalization_error']
        lines += [
            f"{row.lam!r},{row.theta!r},{row.entropy_nats!r},{row.normalization_error!r}"
            for row in self.rows
        ]
        return lines

    def summary_line(self):
        verdict = 'PASS' if self.passed else 'FAIL'
        first, last = self.rows[0], self.rows[-1]
        parts = [
            f"{verdict} {self.kind} d={self.d} points={len(self.rows)}",
            f"normalized={self.normalized}",
            f"entropy_ordered={self.entropy_ordered if self.entropy_checked else 'skipped'}",
            f"q1_equals_p={self.terminal_matches_target}",
            f"entropy_bits={first.entropy_bits:.6f}->{last.entropy_bits:.6f}",
            f"area={self.area:.6f}",
        ]
        parts += self.flags
        return ' '.join(parts)


def verify_curriculum_properties(pi, d, schedule, grid, target_theta=None):
    """
    Check the curriculum-learning conditions along a lambda grid.

    Asserted: normalisation, entropy ordering (non-decreasing for curriculum
    schedules, non-increasing for anti-curriculum, flat for constant) and
    Q_1 == P. Per-atom monotonicity of the difficulty weights is recorded
    but not asserted.

    P is ``target_distribution`` at ``target_theta`` (default theta(T)); the
    same P divides Q_lambda in the difficulty weights.
    """
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size < 2 or np.any(np.diff(grid) <= 0) or grid[0] < 0 or grid[-1] > 1:
        raise InputError("lambda grid must be strictly ascending within [0, 1]")

    ts = grid * schedule.total_updates
    kind = classify_schedule(schedule, ts).kind
    if target_theta is None:
        target_theta = terminal_retain(schedule)
    target = target_distribution(pi, d, target_theta)
    report = CurriculumReport(kind=kind, d=d, target_theta=float(target_theta), area=area_under_curve(schedule))

    distributions = [curriculum_at(pi, d, schedule, lam) for lam in grid]
    for q in distributions:
        report.rows.append(GridRow(
            lam=q.lam,
            theta=q.theta,
            entropy_nats=shannon_entropy(q),
            entropy_bits=shannon_entropy(q, base=2),
            normalization_error=q.normalization_error(),
        ))
    report.normalized = all(row.normalization_error <= NORMALIZATION_TOL for row in report.rows)

    if schedule.theta_bar < 0.5:
        report.entropy_checked = False
        report.flags.append('entropy-clause-skipped:theta_bar<0.5')
    else:
        entropies = np.array([row.entropy_nats for row in report.rows])
        steps = np.diff(entropies)
        if kind is ScheduleKind.CURRICULUM:
            report.entropy_ordered = bool(np.all(steps >= -NORMALIZATION_TOL))
        elif kind is ScheduleKind.ANTI_CURRICULUM:
            report.entropy_ordered = bool(np.all(steps <= NORMALIZATION_TOL))
        else:
            report.entropy_ordered = bool(np.all(np.abs(steps) <= NORMALIZATION_TOL))

    terminal = distributions[-1] if grid[-1] == 1.0 else curriculum_at(pi, d, schedule, 1.0)
    report.terminal_matches_target = bool(np.max(np.abs(terminal.table - target.table)) <= TERMINAL_TOL)
    if not report.terminal_matches_target:
        report.flags.append(f"q1-theta={terminal.theta!r}:p-theta={target.theta!r}")

    if schedule.variant is not Variant.CONSTANT and target.table.min() > 0:
        weights = np.stack([q.table / target.table for q in distributions])
        rising = np.all(np.diff(weights, axis=0) >= -NORMALIZATION_TOL, axis=0)
        report.weights_monotone = {
            (z0, i): bool(rising[k, i])
            for k, z0 in enumerate(pi.support)
            for i in range(d + 1)
        }
    return report
