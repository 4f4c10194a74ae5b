"""
Shared behaviour of the lab's management commands: exit codes and report
formatting.
"""

import sys

from django.core.management.base import BaseCommand, CommandError
from rest_framework import serializers

from lab.exceptions import InputError, LabError

VALIDATION_EXIT = 1
RUNTIME_EXIT = 2


def flatten_errors(detail, prefix=''):
    """DRF error detail as 'dotted.key: message' lines."""
    if isinstance(detail, dict):
        lines = []
        for key, value in detail.items():
            key = '' if key == 'non_field_errors' else str(key)
            dotted = f"{prefix}.{key}" if prefix and key else prefix or key
            lines.extend(flatten_errors(value, dotted))
        return lines
    if isinstance(detail, list):
        return [line for item in detail for line in flatten_errors(item, prefix)]
    return [f"{prefix}: {detail}" if prefix else str(detail)]


class LabCommand(BaseCommand):
    """
    Maps domain failures onto exit codes: 1 for invalid input, 2 for
    runtime failures.
    """

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)

        def error(message):
            if parser.called_from_command_line:
                parser.print_usage(sys.stderr)
                parser.exit(VALIDATION_EXIT, f"{parser.prog}: error: {message}\n")
            raise CommandError(f"Error: {message}", returncode=VALIDATION_EXIT)

        parser.error = error
        return parser

    def execute(self, *args, **options):
        try:
            return super().execute(*args, **options)
        except serializers.ValidationError as exc:
            message = '; '.join(flatten_errors(exc.detail))
            raise CommandError(f"invalid configuration: {message}", returncode=VALIDATION_EXIT) from exc
        except InputError as exc:
            raise CommandError(str(exc), returncode=VALIDATION_EXIT) from exc
        except (LabError, FileNotFoundError) as exc:
            raise CommandError(str(exc), returncode=RUNTIME_EXIT) from exc

    def write_report(self, report):
        self.stdout.write(f"{'method':<16}{'seeds':>6}{'peak %':>10}{'delta pp':>10}{'boost %':>10}")
        summaries = {summary.method: summary for summary in report.methods}
        for row in report.boosts:
            boost = '-' if row.boost is None else f"{row.boost:.1f}"
            self.stdout.write(
                f"{row.method:<16}{summaries[row.method].seeds:>6}{100 * row.peak:>10.2f}"
                f"{row.delta:>10.2f}{boost:>10}"
            )
