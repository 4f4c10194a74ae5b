from django.core.management.base import CommandError

from lab.experiments import published_boost_table
from lab.management.base import RUNTIME_EXIT, LabCommand


class Command(LabCommand):
    help = "Recompute the boost column of the published comparison table."

    def handle(self, *args, **options):
        self.stdout.write(
            f"{'dataset':<14}{'net':<7}{'size':<14}{'unreg':>7}{'drop':>7}{'anti':>7}{'curr':>7}"
            f"{'printed':>9}{'boost':>9}"
        )
        mismatches = []
        for row, boost in published_boost_table():
            self.stdout.write(
                f"{row.dataset:<14}{row.architecture:<7}{row.configuration:<14}{row.unregularized:>7.2f}"
                f"{row.dropout:>7.2f}{row.anti:>7.2f}{row.curriculum:>7.2f}{row.printed_boost:>9}{boost:>9g}"
            )
            if abs(boost - float(row.printed_boost)) > 0.1:
                mismatches.append(f"{row.dataset} {row.architecture} {row.configuration}")
        if mismatches:
            raise CommandError(f"boost differs from the printed value for: {', '.join(mismatches)}",
                               returncode=RUNTIME_EXIT)
        self.stdout.write(self.style.SUCCESS("every boost matches its printed value"))
