"""
Flat experiment config files.

One ``key = value`` per line, ``#`` starts a comment, dotted keys nest:

    architecture = mlp
    schedule.variant = exp_curriculum
    schedule.theta_bar.hidden = 0.5

Values stay strings here; RunConfigSerializer coerces and validates them.
"""

from pathlib import Path

from rest_framework import serializers


def parse_config_text(text, source='<config>'):
    nested = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition('=')
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise serializers.ValidationError({source: [f"line {number}: expected 'key = value'"]})
        parts = key.split('.')
        node = nested
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise serializers.ValidationError({source: [f"line {number}: {key} conflicts with an earlier value"]})
            node = child
        if isinstance(node.get(parts[-1]), dict):
            raise serializers.ValidationError({source: [f"line {number}: {key} conflicts with earlier nested keys"]})
        node[parts[-1]] = value
    return nested


def read_config(path):
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as exc:
        raise serializers.ValidationError({'config': [f"cannot read {path}: {exc.strerror}"]}) from exc
    return parse_config_text(text, source=str(path))


def format_config(nested, prefix=''):
    """Inverse of parse_config_text for nested dicts of scalars."""
    lines = []
    for key, value in nested.items():
        dotted = f"{prefix}{key}"
        if isinstance(value, dict):
            lines.extend(format_config(value, prefix=f"{dotted}."))
        elif value is not None:
            if isinstance(value, (list, tuple)):
                value = ','.join(str(v) for v in value)
            lines.append(f"{dotted} = {value}")
    return lines
