from pathlib import Path

from django.core.management.base import CommandError

from lab.config import read_config
from lab.management.base import RUNTIME_EXIT, LabCommand
from lab.serializers import load_schedule
from lab.theory import DEFAULT_GRID_POINTS, lambda_grid, uniform_base, verify_curriculum_properties


class Command(LabCommand):
    help = (
        "Enumerate the corruption distributions of a schedule along a lambda grid "
        "and check the curriculum conditions."
    )

    def add_arguments(self, parser):
        parser.add_argument('--d', type=int, default=8, help="units per mask (at most 20)")
        parser.add_argument('--grid', type=int, default=DEFAULT_GRID_POINTS, help="lambda grid points")
        parser.add_argument('--schedule', required=True, help="config file with schedule keys")
        parser.add_argument('--examples', type=int, default=4, help="size of the uniform base distribution")
        parser.add_argument('--csv', help="write the grid CSV here instead of stdout")

    def handle(self, *args, **options):
        schedule = load_schedule(read_config(options['schedule']))
        report = verify_curriculum_properties(
            uniform_base(options['examples']), options['d'], schedule, lambda_grid(options['grid']),
        )
        lines = report.csv_lines()
        if options['csv']:
            Path(options['csv']).write_text('\n'.join(lines) + '\n', encoding='utf-8')
        else:
            for line in lines:
                self.stdout.write(line)

        summary = report.summary_line()
        if not report.passed:
            raise CommandError(summary, returncode=RUNTIME_EXIT)
        self.stdout.write(self.style.SUCCESS(summary))
