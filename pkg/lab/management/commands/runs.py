from rest_framework.renderers import JSONRenderer

from lab.management.base import LabCommand
from lab.models import Run
from lab.serializers import RunSerializer


class Command(LabCommand):
    help = "List recorded training runs."

    def add_arguments(self, parser):
        parser.add_argument('--experiment', type=int, help="only runs of this experiment id")
        parser.add_argument('--status', choices=[choice for choice, _ in Run.STATUS_CHOICES])
        parser.add_argument('--json', action='store_true', help="print the ledger as JSON")

    def handle(self, *args, **options):
        runs = Run.objects.select_related('experiment')
        if options['experiment'] is not None:
            runs = runs.filter(experiment_id=options['experiment'])
        if options['status']:
            runs = runs.filter(status=options['status'])
        data = RunSerializer(runs, many=True).data

        if options['json']:
            self.stdout.write(JSONRenderer().render(data, renderer_context={'indent': 2}).decode())
            return
        if not data:
            self.stdout.write("no runs recorded")
            return
        for run in data:
            peak = '-' if run['peak_test_accuracy'] is None else f"{100 * run['peak_test_accuracy']:.2f}%"
            suppression = '-' if run['mean_suppression'] is None else f"{100 * run['mean_suppression']:.1f}%"
            line = (f"{run['id']:>5}  {run['experiment_name']:<20} {run['method']:<14} "
                    f"seed {run['seed']:<4} {run['status']:<10} {run['steps_completed']:>7} steps  peak {peak}"
                    f"  suppressed {suppression}")
            if run['diagnostic']:
                line += f"  ({run['diagnostic']})"
            self.stdout.write(line)
