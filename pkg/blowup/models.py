import hashlib
import math

from django.db import models

from blowup.runner import Outcome


def _finite(value):
    """Database columns hold finite floats only; infinities and NaN become NULL."""
    if value is None or not math.isfinite(value):
        return None
    return float(value)


class SimulationRun(models.Model):
    """
    One invocation of the solver, recorded by `manage.py solve --record`.
    """
    OUTCOME_CHOICES = [
        (Outcome.REACHED_T.value, 'Reached T'),
        (Outcome.BLEW_UP.value, 'Blew up'),
        (Outcome.DECAYED.value, 'Decayed'),
        (Outcome.STEADY.value, 'Steady'),
        (Outcome.ERROR.value, 'Error'),
    ]

    name = models.CharField(max_length=200, help_text="Config file stem or a label given on the command line")
    config_text = models.TextField(help_text="Normalized key=value configuration")
    config_sha256 = models.CharField(max_length=64, db_index=True)
    outcome = models.CharField(max_length=20, choices=OUTCOME_CHOICES)
    t_star = models.FloatField(null=True, blank=True, help_text="Blow-up time, when the run blew up")
    t_final = models.FloatField(null=True, blank=True)
    steps = models.PositiveIntegerField(default=0)
    t1 = models.FloatField(null=True, blank=True, help_text="Guaranteed existence time (empty means unbounded)")
    bound_discrete = models.FloatField(null=True, blank=True, help_text="Upper bound on the numerical blow-up time")
    bound_continuous = models.FloatField(null=True, blank=True)
    theta = models.FloatField(null=True, blank=True, help_text="Limit amplitude in the critical regime")
    sup_u_final = models.FloatField(null=True, blank=True)
    sup_v_final = models.FloatField(null=True, blank=True)
    output_dir = models.CharField(max_length=500, blank=True)
    error_message = models.TextField(blank=True)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-created_at', '-id']
        indexes = [
            models.Index(fields=['outcome', '-created_at'], name='blowup_run_outcome_idx'),
        ]

    def __str__(self):
        return f"{self.name} ({self.outcome})"

    @staticmethod
    def fingerprint(config_text):
        return hashlib.sha256(config_text.encode('utf-8')).hexdigest()

    @property
    def within_bound(self):
        """T* <= discrete bound; None unless the run blew up with a bound available."""
        if self.t_star is None or self.bound_discrete is None:
            return None
        return self.t_star <= self.bound_discrete

    @classmethod
    def from_report(cls, report, config_text, name, output_dir=''):
        """Unsaved row summarizing a finished RunReport."""
        final = report.final_state
        return cls(
            name=name,
            config_text=config_text,
            config_sha256=cls.fingerprint(config_text),
            outcome=str(report.outcome),
            t_star=_finite(report.t_star),
            t_final=_finite(report.t_final),
            steps=report.step_count,
            t1=_finite(report.bounds.t1),
            bound_discrete=_finite(report.bounds.t_upper),
            bound_continuous=_finite(report.bounds.t_continuous),
            theta=_finite(report.theta.theta) if report.theta else None,
            sup_u_final=_finite(final.sup_u),
            sup_v_final=_finite(final.sup_v),
            output_dir=str(output_dir or ''),
        )

    @classmethod
    def from_error(cls, config_text, name, message, output_dir=''):
        return cls(
            name=name,
            config_text=config_text,
            config_sha256=cls.fingerprint(config_text),
            outcome=Outcome.ERROR.value,
            output_dir=str(output_dir or ''),
            error_message=str(message),
        )

    def to_dict(self):
        return {
            'id': self.id,
            'name': self.name,
            'outcome': self.outcome,
            't_star': self.t_star,
            't_final': self.t_final,
            'steps': self.steps,
            't1': self.t1,
            'bound_discrete': self.bound_discrete,
            'bound_continuous': self.bound_continuous,
            'within_bound': self.within_bound,
            'theta': self.theta,
            'sup_u_final': self.sup_u_final,
            'sup_v_final': self.sup_v_final,
            'config_sha256': self.config_sha256,
            'output_dir': self.output_dir,
            'error_message': self.error_message,
            'created_at': self.created_at.isoformat() if self.created_at else None,
        }
