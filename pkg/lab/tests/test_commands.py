from io import StringIO
import json
from pathlib import Path
import shutil
import tempfile

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import TestCase

from lab.models import Experiment, Run
from lab.serializers import read_summary

BLOBS_CONFIG = """
name = blobs-smoke
architecture = mlp
dataset = blobs
total_updates = 40
batch_size = 16
learning_rate = 0.01
seeds = 0,1
eval_every = 10
mlp.hidden = 16
blobs.classes = 3
blobs.per_class = 40
blobs.test_per_class = 20
blobs.dim = 6
blobs.separation = 2
dropout.retain.input = 0.8
dropout.retain.hidden = 0.5
"""


class CommandTestCase(TestCase):

    def setUp(self):
        self.tmp = Path(tempfile.mkdtemp())
        self.addCleanup(shutil.rmtree, self.tmp)
        self.config = self.write('blobs.txt', BLOBS_CONFIG)

    def write(self, name, text):
        path = self.tmp / name
        path.write_text(text)
        return path

    def call(self, *args, **options):
        out = StringIO()
        call_command(*args, stdout=out, stderr=StringIO(), **options)
        return out.getvalue()

    def assertExit(self, code, *args, **options):
        with self.assertRaises(CommandError) as caught:
            self.call(*args, **options)
        self.assertEqual(caught.exception.returncode, code)
        return caught.exception


class TableCommandTests(CommandTestCase):

    def test_every_row_matches(self):
        output = self.call('table')
        self.assertIn('every boost matches its printed value', output)
        self.assertIn('Caltech-256', output)
        self.assertIn('-5.3', output)


class TrainCommandTests(CommandTestCase):

    def test_trains_one_seed(self):
        output = self.call('train', config=str(self.config), seed=1, out=str(self.tmp / 'runs'))
        self.assertTrue((self.tmp / 'runs' / 'curriculum' / 'seed_1.csv').exists())
        self.assertFalse((self.tmp / 'runs' / 'curriculum' / 'seed_0.csv').exists())
        self.assertIn('1 seed(s)', output)
        self.assertEqual(Run.objects.get().status, 'completed')

    def test_invalid_config(self):
        path = self.write('bad.txt', BLOBS_CONFIG + "dropout.retain.hidden = 1.5\n")
        error = self.assertExit(1, 'train', config=str(path))
        self.assertIn('invalid configuration', str(error))
        self.assertExit(1, 'train', config=str(self.write('broken.txt', "architecture mlp\n")))

    def test_missing_config(self):
        self.assertExit(1, 'train', config=str(self.tmp / 'absent.txt'))

    def test_missing_dataset(self):
        path = self.write('mnist.txt', "architecture = mlp\ndataset = mnist\ntotal_updates = 10\n"
                                         "dropout.retain.hidden = 0.5\n")
        self.assertExit(2, 'train', config=str(path), data_dir=str(self.tmp / 'no-data'))


class CompareAndSummaryCommandTests(CommandTestCase):

    def test_compare_then_plot(self):
        runs = self.tmp / 'runs'
        output = self.call('compare', config=str(self.config), methods='none,constant,curriculum', out=str(runs))
        self.assertIn('summary written to', output)
        report = read_summary(runs / 'summary.json')
        self.assertEqual(report.method_names(), ['none', 'constant', 'curriculum'])
        self.assertEqual(Experiment.objects.get().runs.count(), 6)

        output = self.call('summarize', runs=str(runs), top_k=3, out=str(self.tmp / 'top3.json'))
        self.assertIn('curriculum', output)
        self.assertEqual(read_summary(self.tmp / 'top3.json').top_k, 3)

        self.call('plot', summary=str(runs / 'summary.json'), out=str(self.tmp / 'curves.svg'))
        self.assertIn(b'<svg', (self.tmp / 'curves.svg').read_bytes())

    def test_unknown_method(self):
        self.assertExit(1, 'compare', config=str(self.config), methods='none,dropconnect', out=str(self.tmp))

    def test_summarize_empty_directory(self):
        self.assertExit(1, 'summarize', runs=str(self.tmp))

    def test_summarize_bad_top_k(self):
        self.assertExit(1, 'summarize', runs=str(self.tmp), top_k=0)

    def test_plot_needs_summary(self):
        self.assertExit(2, 'plot', summary=str(self.tmp / 'absent.json'), out=str(self.tmp / 'x.svg'))

    def test_plot_rejects_unknown_metric(self):
        self.assertExit(1, 'plot', '--metric=f1', summary=str(self.tmp / 's.json'), out=str(self.tmp / 'x.svg'))


class VerifyCurriculumCommandTests(CommandTestCase):

    def setUp(self):
        super().setUp()
        self.schedule = self.write(
            'schedule.txt', "schedule.variant = exp_curriculum\nschedule.theta_bar = 0.5\nschedule.T = 1000\n",
        )

    def test_pass(self):
        output = self.call('verify_curriculum', schedule=str(self.schedule))
        lines = output.splitlines()
        self.assertEqual(lines[0], 'lambda,theta,entropy,normalization_error')
        self.assertEqual(len(lines), 23)
        self.assertIn('PASS curriculum d=8 points=21', lines[-1])
        self.assertIn('area=', lines[-1])

    def test_csv_file(self):
        csv_path = self.tmp / 'grid.csv'
        output = self.call('verify_curriculum', schedule=str(self.schedule), d=4, grid=5, csv=str(csv_path))
        self.assertEqual(len(csv_path.read_text().splitlines()), 6)
        self.assertIn('d=4 points=5', output)

    def test_dimension_too_large(self):
        self.assertExit(2, 'verify_curriculum', schedule=str(self.schedule), d=21)

    def test_schedule_without_length(self):
        path = self.write('short.txt', "schedule.variant = constant\n")
        self.assertExit(1, 'verify_curriculum', schedule=str(path))


class RunsCommandTests(CommandTestCase):

    def test_lists_ledger(self):
        self.assertIn('no runs recorded', self.call('runs'))
        self.call('train', config=str(self.config), out=str(self.tmp / 'runs'))
        listing = json.loads(self.call('runs', json=True, status='completed'))
        self.assertEqual([run['seed'] for run in listing], [0, 1])
        self.assertEqual({run['experiment_name'] for run in listing}, {'blobs-smoke'})
        self.assertTrue(all(0.0 < run['mean_suppression'] < 1.0 for run in listing))
        self.assertIn('suppressed', self.call('runs'))
        self.assertIn('seed 1', self.call('runs'))
        self.assertEqual(json.loads(self.call('runs', json=True, status='aborted')), [])
