"""
Bernoulli dropout masks and their application.

Masks follow the inverted convention by default: retained activations are
divided by the retain probability at train time, so evaluation is the
identity whatever the schedule did. The classic convention keeps training
unscaled and multiplies evaluation activations by the group's floor.
"""

from dataclasses import dataclass
from ._compat import StrEnum
import itertools

import numpy as np

from .exceptions import DimensionError, InputError


class RetainGroup(StrEnum):
    INPUT = 'input'
    CONV = 'conv'
    FC = 'fc'
    HIDDEN = 'hidden'
    NONE = 'none'


DROPPABLE_GROUPS = (RetainGroup.INPUT, RetainGroup.CONV, RetainGroup.FC, RetainGroup.HIDDEN)


class Convention(StrEnum):
    INVERTED = 'inverted'
    CLASSIC = 'classic'


_pass_ids = itertools.count(1)


def next_pass_id():
    """Identifier of a forward pass; masks remember the pass that drew them."""
    return next(_pass_ids)


@dataclass(frozen=True)
class DropoutMask:
    values: np.ndarray
    theta_used: float
    pass_id: int = 0

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True)
class RetainGroupConfig:
    """Floor theta_bar per retain group."""
    input: float = 1.0
    conv: float = 1.0
    fc: float = 1.0
    hidden: float = 1.0

    def __post_init__(self):
        for group in DROPPABLE_GROUPS:
            value = getattr(self, group.value)
            if not 0.0 < value <= 1.0:
                raise InputError(f"retain probability for {group} must lie in (0, 1], got {value}")

    def floor(self, group):
        group = RetainGroup(group)
        if group is RetainGroup.NONE:
            return 1.0
        return getattr(self, group.value)

    def as_dict(self):
        return {group.value: self.floor(group) for group in DROPPABLE_GROUPS}


@dataclass(frozen=True)
class RunStreams:
    """
    Independent random streams of one training run.

    ``init`` draws weights, ``data`` shuffles mini-batches, ``mask`` samples
    dropout. Runs that share a seed share the first two streams whatever
    their schedule.
    """
    init: np.random.Generator
    data: np.random.Generator
    mask: np.random.Generator

    @classmethod
    def from_seed(cls, seed):
        init, data, mask = np.random.SeedSequence(seed).spawn(3)
        return cls(
            init=np.random.default_rng(init),
            data=np.random.default_rng(data),
            mask=np.random.default_rng(mask),
        )


def _check_theta(theta):
    if not 0.0 < theta <= 1.0:
        raise InputError(f"retain probability must lie in (0, 1], got {theta}")


def _check_same_shape(a, b, what):
    if a.shape != b.shape:
        raise DimensionError(f"{what}: shape {a.shape} does not match mask shape {b.shape}")


def sample_mask(shape, theta, rng, pass_id=0):
    """
    Draw i.i.d. Bernoulli(theta) entries.

    Consumes exactly prod(shape) uniform doubles from ``rng`` in row-major
    order, whatever theta is.
    """
    _check_theta(theta)
    values = (rng.random(shape) < theta).astype(np.float64)
    return DropoutMask(values=values, theta_used=float(theta), pass_id=pass_id)


def apply_dropout_train(x, m, convention=Convention.INVERTED):
    _check_same_shape(x, m.values, 'dropout input')
    if convention == Convention.CLASSIC:
        return x * m.values
    return x * m.values / m.theta_used


def apply_dropout_eval(x):
    return x


def apply_dropout_eval_classic(x, theta_bar):
    _check_theta(theta_bar)
    return x * theta_bar


def dropout_backward(dy, m, convention=Convention.INVERTED):
    _check_same_shape(dy, m.values, 'dropout gradient')
    if convention == Convention.CLASSIC:
        return dy * m.values
    return dy * m.values / m.theta_used


def suppression_rate(masks):
    """Fraction of suppressed entries over a collection of masks."""
    total = sum(m.values.size for m in masks)
    if total == 0:
        return 0.0
    kept = sum(float(m.values.sum()) for m in masks)
    return 1.0 - kept / total
