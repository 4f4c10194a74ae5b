from pathlib import Path

from lab.config import read_config
from lab.experiments import DEFAULT_METHODS, compare_methods
from lab.management.base import LabCommand
from lab.serializers import load_run_config, write_summary


class Command(LabCommand):
    help = "Run several dropout methods on shared seeds and data, then compare their peaks."

    def add_arguments(self, parser):
        parser.add_argument('--config', required=True)
        parser.add_argument(
            '--methods', default=','.join(DEFAULT_METHODS),
            help="comma separated: none, constant, curriculum, anti, switch, switch@<step>, polynomial, power",
        )
        parser.add_argument('--out')
        parser.add_argument('--data-dir')

    def handle(self, *args, **options):
        methods = [token.strip() for token in options['methods'].split(',') if token.strip()]
        cfg = load_run_config(read_config(options['config']), output_dir=options['out'], data_dir=options['data_dir'])
        report = compare_methods(cfg, methods)
        summary_path = write_summary(report, Path(cfg.output_dir) / 'summary.json')
        self.write_report(report)
        self.stdout.write(self.style.SUCCESS(f"summary written to {summary_path}"))
