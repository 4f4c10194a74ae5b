from lab.management.base import LabCommand
from lab.plotting import METRICS, emit_plot
from lab.serializers import read_summary


class Command(LabCommand):
    help = "Draw mean curves with standard deviation bands from a summary file as SVG."

    def add_arguments(self, parser):
        parser.add_argument('--summary', required=True)
        parser.add_argument('--out', required=True)
        parser.add_argument('--metric', choices=sorted(METRICS), default='test_acc')

    def handle(self, *args, **options):
        path = emit_plot(read_summary(options['summary']), options['out'], metric=options['metric'])
        self.stdout.write(self.style.SUCCESS(f"plot written to {path}"))
