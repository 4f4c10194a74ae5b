"""
Serializers for the lab: experiment configs, summary files and the run ledger.
"""

from pathlib import Path

from django.conf import settings
from rest_framework import serializers
from rest_framework.exceptions import ParseError
from rest_framework.parsers import JSONParser
from rest_framework.renderers import JSONRenderer

from .exceptions import InputError
from .experiments import (
    DEFAULT_SWITCH_EPOCH, BlobsSpec, BoostRow, DatasetName, MethodSummary, RunConfig, SummaryReport,
    method_for_variant,
)
from .models import Experiment, Run
from .nn import Architecture, LayerSizeMode
from .regularization import DROPPABLE_GROUPS, Convention, RetainGroupConfig
from .schedulers import Schedule, Variant


class IntegerListField(serializers.ListField):
    """
    A list of integers, written in config files as ``1,2,3``.
    """
    child = serializers.IntegerField(min_value=0)

    def to_internal_value(self, data):
        if isinstance(data, str):
            data = [part.strip() for part in data.split(',') if part.strip()]
        return super().to_internal_value(data)


class PositiveListField(IntegerListField):
    """
    Integer list whose entries are at least 1: layer widths and channel counts.
    """
    child = serializers.IntegerField(min_value=1)


def _choices(enum):
    return [member.value for member in enum]


# ==================== CONFIG SERIALIZERS ====================

class RetainSerializer(serializers.Serializer):
    """
    Floor retain probability per group; groups left out never drop.
    """
    input = serializers.FloatField(required=False, min_value=0.0, max_value=1.0)
    conv = serializers.FloatField(required=False, min_value=0.0, max_value=1.0)
    fc = serializers.FloatField(required=False, min_value=0.0, max_value=1.0)
    hidden = serializers.FloatField(required=False, min_value=0.0, max_value=1.0)

    def validate(self, data):
        for group, value in data.items():
            if value <= 0.0:
                raise serializers.ValidationError({group: "retain probability must be greater than 0."})
        return data


class FloorField(serializers.Field):
    """
    ``schedule.theta_bar``: one floor for every group, or one per group.
    """

    def to_internal_value(self, data):
        if isinstance(data, dict):
            nested = RetainSerializer(data=data)
            nested.is_valid(raise_exception=True)
            return dict(nested.validated_data)
        value = serializers.FloatField(min_value=0.0, max_value=1.0).run_validation(data)
        if value <= 0.0:
            raise serializers.ValidationError("retain probability must be greater than 0.")
        return {group.value: value for group in DROPPABLE_GROUPS}

    def to_representation(self, value):
        return value


class ScheduleSerializer(serializers.Serializer):
    """
    Serializer for the ``schedule.*`` keys of a config file
    """
    variant = serializers.ChoiceField(choices=_choices(Variant), required=False)
    theta_bar = FloorField(required=False)
    gamma = serializers.FloatField(required=False, min_value=0.0)
    T = serializers.IntegerField(required=False, min_value=1)
    switch_step = serializers.IntegerField(required=False, min_value=0)
    switch_epoch = serializers.IntegerField(required=False, min_value=0)
    delta = serializers.IntegerField(required=False, min_value=1)
    alpha = serializers.IntegerField(required=False, min_value=2)

    def validate(self, data):
        if 'gamma' in data and data['gamma'] <= 0.0:
            raise serializers.ValidationError({'gamma': "gamma must be positive."})
        if 'switch_step' in data and 'switch_epoch' in data:
            raise serializers.ValidationError("give either switch_step or switch_epoch, not both.")
        return data


class DropoutSerializer(serializers.Serializer):
    """
    Serializer for the ``dropout.*`` keys: on/off switch, convention and floors
    """
    enabled = serializers.BooleanField(required=False, default=True)
    convention = serializers.ChoiceField(choices=_choices(Convention), required=False, default='inverted')
    retain = RetainSerializer(required=False)


class MlpSerializer(serializers.Serializer):
    """
    Serializer for MLP hidden widths
    """
    hidden = PositiveListField(required=False, allow_empty=False)


class CnnSerializer(serializers.Serializer):
    """
    Serializer for CNN channels, fully connected widths and kernel size
    """
    channels = PositiveListField(required=False, allow_empty=False)
    fc = PositiveListField(required=False, allow_empty=False)
    kernel = serializers.IntegerField(required=False, min_value=1)


class BlobsSerializer(serializers.Serializer):
    """
    Serializer for the synthetic Gaussian-blob dataset
    """
    classes = serializers.IntegerField(required=False, min_value=1, default=2)
    per_class = serializers.IntegerField(required=False, min_value=1, default=200)
    test_per_class = serializers.IntegerField(required=False, min_value=1, default=100)
    dim = serializers.IntegerField(required=False, min_value=1, default=2)
    separation = serializers.FloatField(required=False, min_value=0.0, default=10.0)


class RunConfigSerializer(serializers.Serializer):
    """
    Validates a parsed config file; ``save()`` returns a frozen RunConfig.

    Per-group floors may be given as ``dropout.retain.<group>`` or
    ``schedule.theta_bar.<group>``; both spellings must agree.
    """
    name = serializers.CharField(required=False, default='experiment', max_length=100)
    method = serializers.CharField(required=False, max_length=50)
    architecture = serializers.ChoiceField(choices=_choices(Architecture))
    dataset = serializers.ChoiceField(choices=_choices(DatasetName))
    layer_size_mode = serializers.ChoiceField(choices=_choices(LayerSizeMode), required=False, default='n')
    total_updates = serializers.IntegerField(required=False, min_value=1)
    batch_size = serializers.IntegerField(required=False, min_value=1)
    learning_rate = serializers.FloatField(required=False, min_value=0.0)
    seeds = IntegerListField(required=False, allow_empty=False)
    eval_every = serializers.IntegerField(required=False, min_value=1)
    log_every = serializers.IntegerField(required=False, min_value=1)
    train_size = serializers.IntegerField(required=False, min_value=1)
    test_size = serializers.IntegerField(required=False, min_value=1)
    data_seed = serializers.IntegerField(required=False, min_value=0, default=0)
    output_dir = serializers.CharField(required=False)
    data_dir = serializers.CharField(required=False)
    schedule = ScheduleSerializer(required=False)
    dropout = DropoutSerializer(required=False)
    mlp = MlpSerializer(required=False)
    cnn = CnnSerializer(required=False)
    blobs = BlobsSerializer(required=False)

    def validate(self, data):
        schedule = data.get('schedule', {})
        dropout = data.get('dropout', {})
        floors = dict(dropout.get('retain', {}))
        for group, value in schedule.get('theta_bar', {}).items():
            if group in floors and floors[group] != value:
                raise serializers.ValidationError({
                    'schedule': {'theta_bar': {group: f"conflicts with dropout.retain.{group} = {floors[group]}."}},
                })
            floors[group] = value
        data['floors'] = floors
        if dropout.get('enabled', True) and not floors:
            raise serializers.ValidationError({
                'dropout': {'retain': "dropout is enabled but no retain floor is set; set dropout.retain.<group> "
                                       "or schedule.theta_bar, or dropout.enabled = false."},
            })

        total = data.get('total_updates', schedule.get('T'))
        if total is None:
            raise serializers.ValidationError({'total_updates': "set total_updates or schedule.T."})
        if 'total_updates' in data and 'T' in schedule and schedule['T'] != data['total_updates']:
            raise serializers.ValidationError({'schedule': {'T': "disagrees with total_updates."}})
        data['total_updates'] = total

        if data.get('learning_rate', 1.0) <= 0.0:
            raise serializers.ValidationError({'learning_rate': "learning rate must be positive."})
        if data['dataset'] == DatasetName.BLOBS and data['architecture'] != Architecture.MLP:
            raise serializers.ValidationError({'architecture': "blobs examples are flat; use mlp."})
        return data

    def create(self, validated_data):
        defaults = settings.DROPCURVE
        schedule = validated_data.get('schedule', {})
        dropout = validated_data.get('dropout', {})
        retain = RetainGroupConfig(**validated_data['floors'])
        variant = Variant(schedule.get('variant', Variant.EXP_CURRICULUM))
        enabled = dropout.get('enabled', True)
        cnn = validated_data.get('cnn', {})
        switch_epoch = schedule.get('switch_epoch')
        if variant is Variant.SWITCH and 'switch_step' not in schedule and switch_epoch is None:
            switch_epoch = DEFAULT_SWITCH_EPOCH
        try:
            return RunConfig(
                architecture=Architecture(validated_data['architecture']),
                dataset=DatasetName(validated_data['dataset']),
                schedule=Schedule(
                    variant=variant,
                    theta_bar=min(retain.as_dict().values()),
                    total_updates=validated_data['total_updates'],
                    gamma=schedule.get('gamma'),
                    delta=schedule.get('delta', 2),
                    alpha=schedule.get('alpha', 2),
                    switch_step=schedule.get('switch_step', 0),
                ),
                retain=retain,
                total_updates=validated_data['total_updates'],
                name=validated_data['name'],
                method=validated_data.get('method') or ('none' if not enabled else method_for_variant(variant)),
                dropout=enabled,
                convention=Convention(dropout.get('convention', Convention.INVERTED)),
                layer_size_mode=LayerSizeMode(validated_data['layer_size_mode']),
                batch_size=validated_data.get('batch_size', defaults['BATCH_SIZE']),
                learning_rate=validated_data.get('learning_rate', defaults['LEARNING_RATE']),
                seeds=tuple(validated_data.get('seeds', defaults['SEEDS'])),
                eval_every=validated_data.get('eval_every', defaults['EVAL_EVERY']),
                log_every=validated_data.get('log_every', defaults['LOG_EVERY']),
                train_size=validated_data.get('train_size'),
                test_size=validated_data.get('test_size'),
                data_seed=validated_data['data_seed'],
                switch_epoch=switch_epoch,
                hidden=tuple(validated_data.get('mlp', {}).get('hidden', (2000, 2000))),
                channels=tuple(cnn['channels']) if 'channels' in cnn else None,
                fc=tuple(cnn['fc']) if 'fc' in cnn else None,
                kernel=cnn.get('kernel', 5),
                blobs=BlobsSpec(**validated_data['blobs']) if 'blobs' in validated_data else BlobsSpec(),
                output_dir=Path(validated_data.get('output_dir', defaults['OUTPUT_DIR'])),
                data_dir=Path(validated_data.get('data_dir', defaults['DATA_DIR'])),
            )
        except InputError as exc:
            raise serializers.ValidationError(str(exc)) from exc


def load_run_config(nested, **overrides):
    """
    Validate a nested config mapping; ``overrides`` (CLI flags) replace
    top-level keys when not None.
    """
    data = dict(nested)
    data.update({key: value for key, value in overrides.items() if value is not None})
    serializer = RunConfigSerializer(data=data)
    serializer.is_valid(raise_exception=True)
    return serializer.save()


def load_schedule(nested):
    """
    The schedule of a config file on its own. Its floor is the smallest
    configured group floor; T comes from ``schedule.T`` or ``total_updates``.
    """
    schedule = ScheduleSerializer(data=nested.get('schedule', {}))
    schedule.is_valid(raise_exception=True)
    retain = RetainSerializer(data=nested.get('dropout', {}).get('retain', {}))
    retain.is_valid(raise_exception=True)
    data = schedule.validated_data
    floors = {**retain.validated_data, **data.get('theta_bar', {})}
    total = data.get('T', nested.get('total_updates'))
    if total is None:
        raise serializers.ValidationError({'schedule': {'T': "set schedule.T or total_updates."}})
    total = serializers.IntegerField(min_value=1).run_validation(total)
    try:
        return Schedule(
            variant=data.get('variant', Variant.EXP_CURRICULUM),
            theta_bar=min(floors.values(), default=1.0),
            total_updates=total,
            gamma=data.get('gamma'),
            delta=data.get('delta', 2),
            alpha=data.get('alpha', 2),
            switch_step=data.get('switch_step', 0),
        )
    except InputError as exc:
        raise serializers.ValidationError(str(exc)) from exc


# ==================== SUMMARY SERIALIZERS ====================

class MethodSummarySerializer(serializers.Serializer):
    """
    Serializer for one method's seed-averaged curves in summary.json
    """
    method = serializers.CharField()
    seeds = serializers.IntegerField(min_value=1)
    files = serializers.ListField(child=serializers.CharField())
    steps = serializers.ListField(child=serializers.IntegerField(min_value=0))
    test_acc_mean = serializers.ListField(child=serializers.FloatField())
    test_acc_std = serializers.ListField(child=serializers.FloatField())
    train_loss_mean = serializers.ListField(child=serializers.FloatField())
    train_loss_std = serializers.ListField(child=serializers.FloatField())
    peak = serializers.FloatField()
    seed_peaks = serializers.ListField(child=serializers.FloatField(), required=False, default=list)

    def validate(self, data):
        length = len(data['steps'])
        for key in ('test_acc_mean', 'test_acc_std', 'train_loss_mean', 'train_loss_std'):
            if len(data[key]) != length:
                raise serializers.ValidationError({key: f"expected {length} values, one per step."})
        return data


class BoostRowSerializer(serializers.Serializer):
    """
    Serializer for one row of the boost table
    """
    method = serializers.CharField()
    peak = serializers.FloatField()
    delta = serializers.FloatField()
    boost = serializers.FloatField(allow_null=True)


class SummaryReportSerializer(serializers.Serializer):
    """
    summary.json round trip. Serialising takes a SummaryReport;
    ``save()`` on validated data rebuilds one.
    """
    top_k = serializers.IntegerField(min_value=1)
    methods = MethodSummarySerializer(many=True)
    boosts = BoostRowSerializer(many=True, required=False, default=list)

    def validate_methods(self, value):
        if not value:
            raise serializers.ValidationError("a summary needs at least one method.")
        names = [summary['method'] for summary in value]
        if len(set(names)) != len(names):
            raise serializers.ValidationError("method names must be unique.")
        return value

    def create(self, validated_data):
        return SummaryReport(
            top_k=validated_data['top_k'],
            methods=[MethodSummary(**summary) for summary in validated_data['methods']],
            boosts=[BoostRow(**row) for row in validated_data['boosts']],
        )


# ==================== LEDGER SERIALIZERS ====================

class RunSerializer(serializers.ModelSerializer):
    """
    Serializer for Run model
    """
    experiment_name = serializers.CharField(source='experiment.name', read_only=True)

    class Meta:
        model = Run
        fields = [
            'id', 'experiment', 'experiment_name', 'method', 'seed', 'status',
            'metrics_path', 'steps_completed', 'final_train_loss',
            'peak_test_accuracy', 'mean_suppression', 'diagnostic', 'started_at', 'finished_at',
        ]
        read_only_fields = ['started_at']


class ExperimentSerializer(serializers.ModelSerializer):
    """
    Serializer for Experiment model, with its runs nested
    """
    runs = RunSerializer(many=True, read_only=True)
    run_count = serializers.SerializerMethodField()

    class Meta:
        model = Experiment
        fields = ['id', 'name', 'methods', 'config', 'output_dir', 'created_at', 'run_count', 'runs']
        read_only_fields = ['created_at']

    def get_run_count(self, obj):
        return obj.runs.count()


def write_summary(report, path):
    """Write ``report`` as indented summary JSON."""
    data = SummaryReportSerializer(report).data
    Path(path).write_bytes(JSONRenderer().render(data, renderer_context={'indent': 2}) + b'\n')
    return path


def read_summary(path):
    with open(path, 'rb') as fh:
        try:
            data = JSONParser().parse(fh)
        except ParseError as exc:
            raise serializers.ValidationError({str(path): [str(exc.detail)]}) from exc
    serializer = SummaryReportSerializer(data=data)
    serializer.is_valid(raise_exception=True)
    return serializer.save()
