"""
Experiment harness: multi-seed training runs, metrics files, summaries and
the boost metric.

Runs are laid out as ``<output_dir>/<method>/seed_<n>.csv``; every run is
also recorded in the ledger (lab.models.Run).
"""

from dataclasses import dataclass, field, replace
from ._compat import StrEnum
import csv
import logging
import math
from pathlib import Path
import re

from django.conf import settings
from django.utils import timezone
import numpy as np

from .config import format_config
from .datasets import (
    batch_stream, load_mnist_split, subset, synth_double_mnist, synth_gaussian_blobs,
)
from .exceptions import AlignmentError, InputError, TrainingDivergedError, UndefinedBoostError
from .models import Experiment, Run
from .nn import AdamState, Architecture, LayerSizeMode, adam_step, build_network, softmax_cross_entropy
from .regularization import DROPPABLE_GROUPS, Convention, RetainGroupConfig, RunStreams, suppression_rate
from .schedulers import Schedule, Variant, retain_probability, switch_step_for_epoch

logger = logging.getLogger(__name__)

CSV_HEADER = [
    'step', 'train_loss', 'train_acc', 'test_acc',
    'theta_input', 'theta_conv', 'theta_fc', 'theta_hidden',
]
DEFAULT_SWITCH_EPOCH = 10


class DatasetName(StrEnum):
    MNIST = 'mnist'
    DOUBLE_MNIST = 'double_mnist'
    BLOBS = 'blobs'


class Method(StrEnum):
    NONE = 'none'
    CONSTANT = 'constant'
    CURRICULUM = 'curriculum'
    ANTI = 'anti'
    SWITCH = 'switch'
    POLYNOMIAL = 'polynomial'
    POWER = 'power'


METHOD_VARIANTS = {
    Method.CONSTANT: Variant.CONSTANT,
    Method.CURRICULUM: Variant.EXP_CURRICULUM,
    Method.ANTI: Variant.LINEAR_ANTI,
    Method.SWITCH: Variant.SWITCH,
    Method.POLYNOMIAL: Variant.POLYNOMIAL,
    Method.POWER: Variant.POWER_EXPONENT,
}
DEFAULT_METHODS = ('none', 'constant', 'curriculum', 'anti', 'switch')


@dataclass(frozen=True)
class BlobsSpec:
    classes: int = 2
    per_class: int = 200
    test_per_class: int = 100
    dim: int = 2
    separation: float = 10.0


@dataclass(frozen=True)
class RunConfig:
    """
    One experiment definition. ``retain`` holds the per-group floors; the
    schedule supplies the shared curve shape.
    """
    architecture: Architecture
    dataset: DatasetName
    schedule: Schedule
    retain: RetainGroupConfig
    total_updates: int
    name: str = 'experiment'
    method: str = 'curriculum'
    dropout: bool = True
    convention: Convention = Convention.INVERTED
    layer_size_mode: LayerSizeMode = LayerSizeMode.N
    batch_size: int = 128
    learning_rate: float = 1e-4
    seeds: tuple = tuple(range(10))
    eval_every: int = 50
    log_every: int = 1
    train_size: int | None = None
    test_size: int | None = None
    data_seed: int = 0
    switch_epoch: int | None = None
    hidden: tuple = (2000, 2000)
    channels: tuple | None = None
    fc: tuple | None = None
    kernel: int = 5
    blobs: BlobsSpec = field(default_factory=BlobsSpec)
    output_dir: Path = Path('runs')
    data_dir: Path = Path('data')

    def __post_init__(self):
        if self.total_updates != self.schedule.total_updates:
            raise InputError(
                f"total updates {self.total_updates} disagree with schedule T {self.schedule.total_updates}"
            )
        if self.batch_size < 1:
            raise InputError("batch_size must be at least 1")
        if not self.seeds:
            raise InputError("at least one seed is required")
        if self.eval_every < 1 or self.log_every < 1:
            raise InputError("eval_every and log_every must be positive")

    def floor(self, group):
        return self.retain.floor(group) if self.dropout else 1.0

    def effective_retain(self):
        """Floors the trained network actually sees: all 1 without dropout."""
        return self.retain if self.dropout else RetainGroupConfig()

    def as_nested(self):
        """Config-file shaped view, for the ledger and the resolved config dump."""
        return {
            'name': self.name,
            'method': self.method,
            'architecture': str(self.architecture),
            'dataset': str(self.dataset),
            'layer_size_mode': str(self.layer_size_mode),
            'total_updates': self.total_updates,
            'batch_size': self.batch_size,
            'learning_rate': self.learning_rate,
            'seeds': list(self.seeds),
            'eval_every': self.eval_every,
            'log_every': self.log_every,
            'train_size': self.train_size,
            'test_size': self.test_size,
            'data_seed': self.data_seed,
            'output_dir': str(self.output_dir),
            'data_dir': str(self.data_dir),
            'schedule': {
                'variant': str(self.schedule.variant),
                'T': self.schedule.total_updates,
                'gamma': self.schedule.gamma,
                'delta': self.schedule.delta,
                'alpha': self.schedule.alpha,
                'switch_step': self.schedule.switch_step,
                'switch_epoch': self.switch_epoch,
            },
            'dropout': {
                'enabled': self.dropout,
                'convention': str(self.convention),
                'retain': self.retain.as_dict(),
            },
            'mlp': {'hidden': list(self.hidden)},
            'cnn': {
                'channels': list(self.channels) if self.channels else None,
                'fc': list(self.fc) if self.fc else None,
                'kernel': self.kernel,
            },
            'blobs': {
                'classes': self.blobs.classes,
                'per_class': self.blobs.per_class,
                'test_per_class': self.blobs.test_per_class,
                'dim': self.blobs.dim,
                'separation': self.blobs.separation,
            },
        }


@dataclass(frozen=True)
class MetricsRecord:
    step: int
    train_loss: float
    train_accuracy: float
    test_accuracy: float | None
    theta_per_group: dict

    def csv_row(self):
        thetas = [self.theta_per_group.get(group.value) for group in DROPPABLE_GROUPS]
        values = [self.step, self.train_loss, self.train_accuracy, self.test_accuracy, *thetas]
        return ['' if value is None else repr(value) if isinstance(value, float) else str(value)
                for value in values]


# ==================== METHODS ====================

def method_for_variant(variant):
    for method, candidate in METHOD_VARIANTS.items():
        if candidate is Variant(variant):
            return method.value
    raise InputError(f"no method for schedule variant {variant}")


def method_config(base, token):
    """
    The config of one comparison method. ``switch@<step>`` pins the switch
    step; plain ``switch`` keeps the base config's switch setting.
    """
    name, _, argument = token.partition('@')
    try:
        method = Method(name)
    except ValueError:
        raise InputError(f"unknown method {token!r}; choose from {', '.join(m.value for m in Method)}") from None
    if method is Method.NONE:
        schedule = replace(base.schedule, variant=Variant.CONSTANT)
        return replace(base, method=token, dropout=False, schedule=schedule)

    schedule = replace(base.schedule, variant=METHOD_VARIANTS[method])
    switch_epoch = base.switch_epoch
    if method is Method.SWITCH:
        if argument:
            try:
                schedule = replace(schedule, switch_step=int(argument))
            except ValueError:
                raise InputError(f"switch step in {token!r} must be an integer") from None
            switch_epoch = None
        elif switch_epoch is None and base.schedule.switch_step == 0:
            switch_epoch = DEFAULT_SWITCH_EPOCH
    elif argument:
        raise InputError(f"method {name} takes no argument")
    return replace(base, method=token, dropout=True, schedule=schedule, switch_epoch=switch_epoch)


def resolve_switch(cfg, train_size):
    """Turn a switch epoch into a switch step for the loaded training set."""
    if cfg.schedule.variant is not Variant.SWITCH or cfg.switch_epoch is None:
        return cfg
    step = switch_step_for_epoch(cfg.switch_epoch, train_size, cfg.batch_size)
    return replace(cfg, schedule=replace(cfg.schedule, switch_step=step), switch_epoch=None)


# ==================== DATA ====================

def _split_blobs(full, spec):
    per_class = spec.per_class + spec.test_per_class
    offsets = np.arange(len(full)) % per_class
    train = full.take(np.flatnonzero(offsets < spec.per_class), name='blobs-train')
    test = full.take(np.flatnonzero(offsets >= spec.per_class), name='blobs-test')
    return train, test


def load_data(cfg):
    """
    Train and test sets for a config. Subsets and synthesis use a stream
    seeded by ``data_seed`` so every seed and method sees the same data.
    """
    rng = np.random.default_rng(cfg.data_seed)
    dataset = DatasetName(cfg.dataset)
    if dataset is DatasetName.BLOBS:
        spec = cfg.blobs
        full = synth_gaussian_blobs(spec.classes, spec.per_class + spec.test_per_class,
                                    spec.dim, spec.separation, rng)
        return _split_blobs(full, spec)

    train = load_mnist_split(cfg.data_dir, 'train')
    test = load_mnist_split(cfg.data_dir, 'test')
    if dataset is DatasetName.DOUBLE_MNIST:
        train = synth_double_mnist(train, cfg.train_size or len(train), rng, name='double-mnist-train')
        test = synth_double_mnist(test, cfg.test_size or len(test), rng, name='double-mnist-test')
        return train, test
    return subset(train, cfg.train_size, rng), subset(test, cfg.test_size, rng)


# ==================== TRAINING ====================

@dataclass
class SeedResult:
    seed: int
    path: Path
    steps: int
    final_train_loss: float
    peak: float
    suppression: float = 0.0


def peak_metric(test_accuracies, top_k):
    """Mean of the ``top_k`` highest accuracies (all of them if fewer)."""
    values = np.sort(np.asarray(test_accuracies, dtype=np.float64))[::-1]
    if values.size == 0:
        raise InputError("no test accuracies to summarise")
    return float(values[:top_k].mean())


def train_seed(cfg, train, test, seed, path):
    """
    Train one network for T updates and write its metrics CSV.

    Every dropout layer uses theta(t) of the shared schedule shape with its
    group's floor. Layer widths follow the configured floors for every
    method, so runs sharing a seed start from the same weights.
    """
    streams = RunStreams.from_seed(seed)
    network = build_network(
        cfg.architecture, train.example_shape, train.num_classes, streams.init,
        retain=cfg.retain, layer_size_mode=cfg.layer_size_mode, convention=cfg.convention,
        hidden=cfg.hidden, channels=cfg.channels, fc=cfg.fc, kernel=cfg.kernel,
        eval_retain=cfg.effective_retain(),
    )
    state = AdamState.for_params(network.params())
    schedules = {group: cfg.schedule.with_floor(cfg.floor(group)) for group in network.retain_groups()}
    batches = batch_stream(train, cfg.batch_size, streams.data)
    eval_batch = settings.DROPCURVE['EVAL_BATCH']
    accuracies = []
    suppressed = []
    loss = math.nan

    with open(path, 'w', newline='', encoding='utf-8') as fh:
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(CSV_HEADER)
        for t in range(cfg.total_updates):
            batch = next(batches)
            thetas = {group.value: retain_probability(s, t) for group, s in schedules.items()}
            logits = network.forward(
                batch.images, train=True, thetas=thetas if cfg.dropout else None, rng=streams.mask,
            )
            loss, dlogits = softmax_cross_entropy(logits, batch.labels)
            if not math.isfinite(loss):
                network.discard_cache()
                raise TrainingDivergedError(f"seed {seed}: non-finite loss {loss} at step {t}")
            suppressed.append(suppression_rate(network.masks.values()))
            adam_step(network.params(), network.backward(dlogits), state, cfg.learning_rate)

            evaluate = t % cfg.eval_every == 0 or t == cfg.total_updates - 1
            test_accuracy = network.accuracy(test.images, test.labels, eval_batch) if evaluate else None
            if evaluate:
                accuracies.append(test_accuracy)
                logger.debug("seed %d step %d loss %.5f test_acc %.4f suppressed %.4f",
                             seed, t, loss, test_accuracy, suppressed[-1])
            if evaluate or t % cfg.log_every == 0:
                record = MetricsRecord(
                    step=t,
                    train_loss=loss,
                    train_accuracy=float(np.mean(logits.argmax(axis=1) == batch.labels)),
                    test_accuracy=test_accuracy,
                    theta_per_group=thetas,
                )
                writer.writerow(record.csv_row())

    top_k = settings.DROPCURVE['TOP_K']
    return SeedResult(seed, path, cfg.total_updates, loss, peak_metric(accuracies, top_k),
                      suppression=float(np.mean(suppressed)))


def run_experiment(cfg, data=None, experiment=None):
    """
    Train every seed of ``cfg``; returns the metrics file paths in seed order.
    """
    train, test = data if data is not None else load_data(cfg)
    cfg = resolve_switch(cfg, len(train))
    out_dir = Path(cfg.output_dir) / cfg.method
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / 'config.txt').write_text('\n'.join(format_config(cfg.as_nested())) + '\n', encoding='utf-8')

    if experiment is None:
        experiment = Experiment.objects.create(
            name=cfg.name, methods=[cfg.method], config=cfg.as_nested(), output_dir=str(cfg.output_dir),
        )

    paths = []
    for seed in cfg.seeds:
        path = out_dir / f"seed_{seed}.csv"
        run = Run.objects.create(experiment=experiment, method=cfg.method, seed=seed, metrics_path=str(path))
        logger.info("training %s seed %d for %d updates", cfg.method, seed, cfg.total_updates)
        try:
            result = train_seed(cfg, train, test, seed, path)
        except TrainingDivergedError as exc:
            run.status = 'aborted'
            run.diagnostic = str(exc)
            run.finished_at = timezone.now()
            run.save()
            logger.error("run aborted: %s", exc)
            raise
        run.status = 'completed'
        run.steps_completed = result.steps
        run.final_train_loss = result.final_train_loss
        run.peak_test_accuracy = result.peak
        run.mean_suppression = result.suppression
        run.finished_at = timezone.now()
        run.save()
        logger.info("finished %s seed %d: peak test accuracy %.4f", cfg.method, seed, result.peak)
        paths.append(path)
    return paths


# ==================== SUMMARIES ====================

@dataclass
class MetricsTable:
    path: Path
    steps: np.ndarray
    train_loss: np.ndarray
    test_acc: np.ndarray

    @property
    def eval_mask(self):
        return ~np.isnan(self.test_acc)


def read_metrics(path):
    path = Path(path)
    steps, losses, accuracies = [], [], []
    with open(path, newline='', encoding='utf-8') as fh:
        for row in csv.DictReader(fh):
            steps.append(int(row['step']))
            losses.append(float(row['train_loss']))
            accuracies.append(float(row['test_acc']) if row['test_acc'] else math.nan)
    order = np.argsort(steps, kind='stable')
    return MetricsTable(
        path=path,
        steps=np.asarray(steps, dtype=np.int64)[order],
        train_loss=np.asarray(losses)[order],
        test_acc=np.asarray(accuracies)[order],
    )


@dataclass
class MethodSummary:
    method: str
    seeds: int
    files: list
    steps: list
    test_acc_mean: list
    test_acc_std: list
    train_loss_mean: list
    train_loss_std: list
    peak: float
    seed_peaks: list = field(default_factory=list)


@dataclass
class BoostRow:
    method: str
    peak: float
    delta: float
    boost: float | None


@dataclass
class SummaryReport:
    top_k: int
    methods: list = field(default_factory=list)
    boosts: list = field(default_factory=list)

    def method(self, name):
        for summary in self.methods:
            if summary.method == name:
                return summary
        raise KeyError(name)

    def method_names(self):
        return [summary.method for summary in self.methods]


_SEED_FILE = re.compile(r'seed_(-?\d+)\.csv$')


def _seed_key(path):
    match = _SEED_FILE.search(Path(path).name)
    return (int(match.group(1)) if match else math.inf, str(path))


def collect_metrics_files(runs_dir):
    """Every ``<method>/seed_<n>.csv`` under ``runs_dir``."""
    return sorted(Path(runs_dir).glob('*/seed_*.csv'), key=lambda p: (p.parent.name, _seed_key(p)))


def summarize_method(method, files, top_k):
    tables = [read_metrics(path) for path in sorted(files, key=_seed_key)]
    reference = tables[0].steps[tables[0].eval_mask]
    misaligned = [
        table.path for table in tables
        if not np.array_equal(table.steps[table.eval_mask], reference)
    ]
    if misaligned:
        raise AlignmentError(f"evaluation steps of method {method} differ from {tables[0].path}", misaligned)

    accuracy = np.stack([table.test_acc[table.eval_mask] for table in tables])
    loss = np.stack([table.train_loss[table.eval_mask] for table in tables])
    seed_peaks = [peak_metric(row, top_k) for row in accuracy]
    return MethodSummary(
        method=method,
        seeds=len(tables),
        files=[str(table.path) for table in tables],
        steps=reference.tolist(),
        test_acc_mean=accuracy.mean(axis=0).tolist(),
        test_acc_std=accuracy.std(axis=0).tolist(),
        train_loss_mean=loss.mean(axis=0).tolist(),
        train_loss_std=loss.std(axis=0).tolist(),
        peak=float(np.mean(seed_peaks)),
        seed_peaks=seed_peaks,
    )


def summarize(metrics_files, top_k=10):
    """
    Per-method mean and standard deviation curves and the peak metric.

    Files are grouped by their parent directory, which names the method.
    """
    grouped = {}
    for path in metrics_files:
        path = Path(path)
        grouped.setdefault(path.parent.name, []).append(path)
    if not grouped:
        raise InputError("no metrics files to summarise")
    report = SummaryReport(top_k=top_k)
    report.methods = [summarize_method(method, files, top_k) for method, files in grouped.items()]
    report.boosts = boost_rows(report)
    return report


def boost_metric(delta_method, delta_dropout):
    """Relative gain over standard dropout, in percent."""
    if delta_dropout == 0:
        raise UndefinedBoostError("dropout gain is zero; the boost is undefined")
    return 100.0 * (delta_method - delta_dropout) / delta_dropout


def boost_rows(report):
    """
    Gain of each method over ``none`` (percentage points) and its boost over
    ``constant``. Without a ``none`` run the baseline is 0.
    """
    names = report.method_names()
    baseline = report.method(Method.NONE).peak if Method.NONE in names else 0.0
    deltas = {s.method: 100.0 * (s.peak - baseline) for s in report.methods}
    reference = deltas.get(Method.CONSTANT.value)
    rows = []
    for summary in report.methods:
        boost = None
        if reference is not None and reference != 0:
            boost = boost_metric(deltas[summary.method], reference)
        rows.append(BoostRow(summary.method, summary.peak, deltas[summary.method], boost))
    return rows


def compare_methods(base_cfg, methods=DEFAULT_METHODS):
    """
    Run every method with the same seeds and data, then summarise them
    side by side.
    """
    methods = list(methods)
    if not methods:
        raise InputError("at least one method is required")
    configs = [method_config(base_cfg, token) for token in methods]
    data = load_data(base_cfg)
    experiment = Experiment.objects.create(
        name=base_cfg.name, methods=methods, config=base_cfg.as_nested(), output_dir=str(base_cfg.output_dir),
    )
    files = []
    for cfg in configs:
        files += run_experiment(cfg, data=data, experiment=experiment)

    report = summarize(files, top_k=settings.DROPCURVE['TOP_K'])
    reference = report.methods[0]
    misaligned = [s.method for s in report.methods if s.steps != reference.steps]
    if misaligned:
        raise AlignmentError("methods evaluated on different step grids", misaligned)
    return report


# ==================== SWITCH DISCONTINUITY ====================

def detect_switch_jump(losses, switch_step, window=50):
    """
    Loss increase right at the switch divided by the median absolute
    step-to-step change over the ``window`` updates before it.
    """
    losses = np.asarray(losses, dtype=np.float64)
    if not window < switch_step < len(losses):
        raise InputError("the switch step needs a full trailing window and at least one later step")
    trailing = np.abs(np.diff(losses[switch_step - window - 1:switch_step]))
    baseline = float(np.median(trailing))
    jump = float(losses[switch_step] - losses[switch_step - 1])
    if baseline == 0:
        return math.inf if jump > 0 else 0.0
    return jump / baseline


# ==================== PUBLISHED TABLE ====================

@dataclass(frozen=True)
class PublishedRow:
    dataset: str
    architecture: str
    configuration: str
    classes: int
    unregularized: float
    dropout: float
    anti: float
    curriculum: float
    printed_boost: str

    @property
    def boost(self):
        return boost_metric(self.curriculum, self.dropout)


PUBLISHED_TABLE = (
    PublishedRow('MNIST', 'MLP', 'n', 10, 98.67, 0.38, 0.04, 0.36, '-5.3'),
    PublishedRow('MNIST', 'CNN-1', 'n', 10, 99.25, 0.15, -0.05, 0.18, '20.0'),
    PublishedRow('Double MNIST', 'CNN-2', 'n', 55, 92.48, 1.42, 0.73, 2.35, '65.5'),
    PublishedRow('Double MNIST', 'CNN-2', 'n_over_theta', 55, 92.48, 0.87, 0.53, 1.11, '27.6'),
    PublishedRow('SVHN', 'CNN-2', 'n', 10, 84.63, 2.35, 1.17, 2.65, '12.8'),
    PublishedRow('SVHN', 'CNN-2', 'n_over_theta', 10, 84.63, 1.59, 1.51, 2.06, '29.6'),
    PublishedRow('CIFAR-10', 'CNN-1', 'n', 10, 73.06, 0.22, -0.68, 0.62, '182'),
    PublishedRow('CIFAR-100', 'CNN-1', 'n', 100, 39.70, 1.01, 0.01, 1.66, '64.4'),
    PublishedRow('Caltech-101', 'CNN-2', 'n', 101, 28.56, 4.21, 1.57, 4.72, '12.1'),
    PublishedRow('Caltech-256', 'CNN-2', 'n', 256, 14.39, 2.36, -0.22, 3.23, '36.9'),
)


def published_boost_table():
    """(row, recomputed boost rounded to the printed precision) for each published row."""
    rows = []
    for row in PUBLISHED_TABLE:
        decimals = len(row.printed_boost.partition('.')[2])
        rows.append((row, round(row.boost, decimals)))
    return rows
