"""
Unit tests for the run ledger.
"""
from django.test import TestCase

from blowup.config import format_config, parse_config
from blowup.models import SimulationRun
from blowup.runner import run


class SimulationRunModelTest(TestCase):
    """Test cases for SimulationRun."""

    def test_from_report_drops_infinities(self):
        """Test an unbounded existence time is stored as NULL."""
        config = parse_config("n=8\nm=0.5\np=0.5\nalpha=0\nT=0.01\n")
        text = format_config(config)
        row = SimulationRun.from_report(run(config), text, 'diffusion', output_dir='runs/diffusion')
        row.save()
        row.refresh_from_db()
        self.assertEqual(row.outcome, 'reached_T')
        self.assertIsNone(row.t1)
        self.assertIsNone(row.t_star)
        self.assertIsNone(row.bound_discrete)
        self.assertIsNone(row.within_bound)
        self.assertEqual(row.t_final, 0.01)
        self.assertEqual(row.output_dir, 'runs/diffusion')
        self.assertEqual(row.config_sha256, SimulationRun.fingerprint(text))

    def test_from_error(self):
        """Test an error row keeps the message and no numbers."""
        row = SimulationRun.from_error("n=4\n", 'broken', 'p: p exceeds m')
        row.save()
        self.assertEqual(row.outcome, 'error')
        self.assertEqual(row.steps, 0)
        self.assertEqual(str(row), 'broken (error)')

    def test_within_bound(self):
        """Test the bound check on stored values."""
        row = SimulationRun(t_star=0.03, bound_discrete=0.05)
        self.assertTrue(row.within_bound)
        row.t_star = 0.06
        self.assertFalse(row.within_bound)

    def test_ordering_and_dict(self):
        """Test newest rows come first and serialize to plain values."""
        first = SimulationRun.objects.create(name='first', config_text='a', config_sha256='a', outcome='decayed')
        second = SimulationRun.objects.create(name='second', config_text='b', config_sha256='b', outcome='blew_up')
        self.assertEqual(list(SimulationRun.objects.all()), [second, first])
        data = second.to_dict()
        self.assertEqual(data['name'], 'second')
        self.assertEqual(data['outcome'], 'blew_up')
        self.assertIsNotNone(data['created_at'])
