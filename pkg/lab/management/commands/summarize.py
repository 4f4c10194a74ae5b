from pathlib import Path

from django.conf import settings

from lab.exceptions import InputError
from lab.experiments import collect_metrics_files, summarize
from lab.management.base import LabCommand
from lab.serializers import write_summary


class Command(LabCommand):
    help = "Summarise the metrics CSVs under a runs directory into summary.json."

    def add_arguments(self, parser):
        parser.add_argument('--runs', required=True, help="directory holding <method>/seed_<n>.csv files")
        parser.add_argument('--top-k', type=int, default=settings.DROPCURVE['TOP_K'])
        parser.add_argument('--out', help="summary file (default <runs>/summary.json)")

    def handle(self, *args, **options):
        if options['top_k'] < 1:
            raise InputError("--top-k must be at least 1")
        runs = Path(options['runs'])
        files = collect_metrics_files(runs)
        if not files:
            raise InputError(f"no <method>/seed_<n>.csv files under {runs}")
        report = summarize(files, top_k=options['top_k'])
        summary_path = write_summary(report, options['out'] or runs / 'summary.json')
        self.write_report(report)
        self.stdout.write(self.style.SUCCESS(f"summary written to {summary_path}"))
