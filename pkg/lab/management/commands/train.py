from django.conf import settings

from lab.config import read_config
from lab.experiments import run_experiment
from lab.management.base import LabCommand
from lab.serializers import load_run_config


class Command(LabCommand):
    help = "Train every seed of one experiment config and write its metrics CSVs."

    def add_arguments(self, parser):
        parser.add_argument('--config', required=True, help="experiment config file (key = value lines)")
        parser.add_argument('--seed', type=int, help="train this seed only")
        parser.add_argument('--out', help=f"output root (default {settings.DROPCURVE['OUTPUT_DIR']})")
        parser.add_argument('--data-dir', help=f"dataset root (default {settings.DROPCURVE['DATA_DIR']})")

    def handle(self, *args, **options):
        seed = options['seed']
        cfg = load_run_config(
            read_config(options['config']),
            seeds=[seed] if seed is not None else None,
            output_dir=options['out'],
            data_dir=options['data_dir'],
        )
        paths = run_experiment(cfg)
        for path in paths:
            self.stdout.write(str(path))
        self.stdout.write(self.style.SUCCESS(
            f"trained {cfg.method} for {cfg.total_updates} updates on {len(paths)} seed(s)"
        ))
