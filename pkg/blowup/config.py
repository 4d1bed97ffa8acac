"""
Run configuration: a plain key=value file, one pair per line, '#' comments.

    # blow-up seed
    n=64
    m=0.5
    p=0.5
    alpha_over_lambda1=2
    initial=eigen
    amplitude=5
    T=1

Keys the file omits fall back to settings.BLOWUP_SOLVER.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
from django.conf import settings
from django.core.exceptions import ValidationError

from blowup.grid import DomainSpec
from blowup.scheme import ModelParams, StepOptions

INITIAL_FAMILIES = ('eigen', 'bump', 'mix', 'random', 'file')

# key -> converter, in the order format_config writes them
_KEYS = {
    'dimension': int,
    'extent': float,
    'extent_y': float,
    'n': int,
    'n_y': int,
    'm': float,
    'p': float,
    'nu': float,
    'mu': float,
    'alpha': float,
    'alpha_over_lambda1': float,
    'initial': str,
    'amplitude': float,
    'amplitude_v': float,
    'bump_amplitude': float,
    'initial_file': str,
    'T': float,
    'dt': float,
    'sigma': float,
    'dt_max': float,
    'dt_min': float,
    'cadence': int,
    'out': str,
    'blowup_threshold': float,
    'decay_floor': float,
    'max_steps': int,
    'steady_tol': float,
    'seed': int,
    'tol_abs': float,
    'tol_rel': float,
    'max_iterations': int,
    'linear_tol': float,
}


@dataclass(frozen=True)
class RunConfig:
    domain: DomainSpec
    m: float
    p: float
    T: float
    alpha: float | None = None
    alpha_over_lambda1: float | None = None
    initial: str = 'eigen'
    amplitude: float = 1.0
    amplitude_v: float | None = None
    bump_amplitude: float = 0.0
    initial_file: str | None = None
    dt: float | None = None
    sigma: float | None = None
    dt_max: float | None = None
    dt_min: float | None = None
    cadence: int = 0
    out: str | None = None
    blowup_threshold: float | None = None
    decay_floor: float | None = None
    max_steps: int | None = None
    steady_tol: float | None = None
    seed: int = 0
    tol_abs: float | None = None
    tol_rel: float | None = None
    max_iterations: int | None = None
    linear_tol: float | None = None

    def __post_init__(self):
        errors = {}
        if (self.alpha is None) == (self.alpha_over_lambda1 is None):
            errors['alpha'] = ["give exactly one of alpha, alpha_over_lambda1"]
        for key in ('alpha', 'alpha_over_lambda1'):
            value = getattr(self, key)
            if value is not None and (not math.isfinite(value) or value < 0):
                errors[key] = [f"{key} must be a finite nonnegative real"]
        if self.dt is not None and self.sigma is not None:
            errors['dt'] = ["give at most one of dt (fixed step) and sigma (adaptive step)"]
        if self.initial not in INITIAL_FAMILIES:
            errors['initial'] = [f"initial must be one of {', '.join(INITIAL_FAMILIES)}"]
        elif self.initial == 'file' and not self.initial_file:
            errors['initial_file'] = ["initial=file needs initial_file"]
        if not self.amplitude > 0:
            errors['amplitude'] = ["amplitude must be positive"]
        if self.amplitude_v is not None and not self.amplitude_v > 0:
            errors['amplitude_v'] = ["amplitude_v must be positive"]
        if self.bump_amplitude < 0:
            errors['bump_amplitude'] = ["bump_amplitude must be nonnegative"]
        if not (math.isfinite(self.T) and self.T > 0):
            errors['T'] = ["T must be a positive real"]
        for key in ('dt', 'decay_floor', 'blowup_threshold', 'steady_tol', 'dt_max', 'dt_min'):
            value = getattr(self, key)
            if value is not None and not value > 0:
                errors[key] = [f"{key} must be positive"]
        if self.cadence < 0:
            errors['cadence'] = ["cadence must be >= 0 (0 keeps only the first and last snapshot)"]
        if errors:
            raise ValidationError(errors)
        ModelParams(m=self.m, p=self.p)

    def model_params(self, op) -> ModelParams:
        """Exponents plus alpha, resolving alpha_over_lambda1 against the built operator."""
        alpha = self.alpha if self.alpha is not None else self.alpha_over_lambda1 * op.lambda1
        return ModelParams(m=self.m, p=self.p, alpha=alpha)

    def step_options(self) -> StepOptions:
        return StepOptions.from_settings(
            tol_abs=self.tol_abs,
            tol_rel=self.tol_rel,
            max_iterations=self.max_iterations,
            linear_tol=self.linear_tol,
            sigma=self.sigma,
            dt_min=self.dt_min,
            dt_max=self.dt_max,
            blowup_threshold=self.blowup_threshold,
        )

    @property
    def decay_threshold(self):
        return self.decay_floor if self.decay_floor is not None else settings.BLOWUP_SOLVER['DECAY_FLOOR']

    @property
    def step_budget(self):
        return self.max_steps if self.max_steps is not None else settings.BLOWUP_SOLVER['MAX_STEPS']


def _convert(key, raw):
    try:
        if _KEYS[key] is int:
            value = float(raw)
            if value != int(value):
                raise ValueError(raw)
            return int(value)
        return _KEYS[key](raw)
    except ValueError:
        raise ValidationError({key: [f"cannot read {raw!r} as {_KEYS[key].__name__}"]})


def parse_config(text) -> RunConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ValidationError({'__all__': [f"line {lineno}: expected key=value, got {line!r}"]})
        key, raw = (part.strip() for part in line.split('=', 1))
        if key not in _KEYS:
            raise ValidationError({key: [f"line {lineno}: unknown key {key!r}"]})
        if key in values:
            raise ValidationError({key: [f"line {lineno}: {key} given twice"]})
        values[key] = _convert(key, raw)

    has_mp = 'm' in values or 'p' in values
    has_numu = 'nu' in values or 'mu' in values
    if has_mp and has_numu:
        raise ValidationError({'m': ["give either m, p or nu, mu, not both"]})
    if has_numu:
        missing = [key for key in ('nu', 'mu') if key not in values]
        if missing:
            raise ValidationError({key: ["this key is required"] for key in missing})
        params = ModelParams.from_original(values.pop('nu'), values.pop('mu'))
        values['m'], values['p'] = params.m, params.p

    missing = [key for key in ('n', 'm', 'p', 'T') if key not in values]
    if missing:
        raise ValidationError({key: ["this key is required"] for key in missing})

    dimension = values.pop('dimension', 1)
    extent = values.pop('extent', 1.0)
    n = values.pop('n')
    extent_y = values.pop('extent_y', extent)
    n_y = values.pop('n_y', n)
    try:
        if dimension == 1:
            domain = DomainSpec.interval(extent, n)
        elif dimension == 2:
            domain = DomainSpec.rectangle(extent, extent_y, n, n_y)
        else:
            raise ValueError(f"dimension must be 1 or 2, got {dimension}")
    except ValueError as exc:
        raise ValidationError({'dimension': [str(exc)]})
    return RunConfig(domain=domain, **values)


def _format_value(value):
    if isinstance(value, float):
        return format(value, '.17g')
    return str(value)


def format_config(config: RunConfig) -> str:
    """Inverse of parse_config: parse_config(format_config(c)) == c."""
    domain = config.domain
    pairs = [('dimension', domain.dimension), ('extent', domain.extents[0]), ('n', domain.points[0])]
    if domain.dimension == 2:
        pairs += [('extent_y', domain.extents[1]), ('n_y', domain.points[1])]
    defaults = {f.name: f.default for f in fields(RunConfig) if f.name != 'domain'}
    for key in _KEYS:
        if key in ('dimension', 'extent', 'n', 'extent_y', 'n_y', 'nu', 'mu'):
            continue
        value = getattr(config, key)
        if value is None or (key not in ('m', 'p', 'T') and value == defaults[key]):
            continue
        pairs.append((key, value))
    return ''.join(f"{key}={_format_value(value)}\n" for key, value in pairs)


def bump(domain: DomainSpec):
    """Product of 4 (x/L)(1 - x/L) over the axes; peaks at 1 in the box centre."""
    profile = np.ones(domain.n_nodes)
    nodes = domain.nodes()
    for axis, extent in enumerate(domain.extents):
        s = nodes[:, axis] / extent
        profile *= 4 * s * (1 - s)
    return profile


def read_initial_file(path, domain: DomainSpec):
    """CSV with header 'u,v' and one row per interior node in field order."""
    path = Path(path)
    try:
        with path.open() as handle:
            header = handle.readline().strip()
            data = np.loadtxt(handle, delimiter=',', ndmin=2)
    except OSError as exc:
        raise ValidationError({'initial_file': [f"cannot read {path}: {exc}"]})
    except ValueError as exc:
        raise ValidationError({'initial_file': [f"{path} is not numeric CSV: {exc}"]})
    if header.replace(' ', '') != 'u,v':
        raise ValidationError({'initial_file': [f"{path} must start with the header 'u,v'"]})
    if data.shape != (domain.n_nodes, 2):
        raise ValidationError(
            {'initial_file': [f"{path} has {data.shape[0]} rows, expected {domain.n_nodes}"]}
        )
    if np.any(data <= 0):
        raise ValidationError({'initial_file': [f"{path} has a nonpositive node"]})
    return data[:, 0].copy(), data[:, 1].copy()


def make_initial(config: RunConfig, op):
    """Strictly positive (u0, v0) for the configured family."""
    c_u = config.amplitude
    c_v = config.amplitude_v if config.amplitude_v is not None else config.amplitude
    family = config.initial
    if family == 'eigen':
        shape_u = shape_v = np.asarray(op.rho1)
    elif family == 'bump':
        shape_u = shape_v = bump(op.spec)
    elif family == 'mix':
        extra = config.bump_amplitude * bump(op.spec)
        return c_u * np.asarray(op.rho1) + extra, c_v * np.asarray(op.rho1) + extra
    elif family == 'random':
        rng = np.random.default_rng(config.seed)
        shape_u = rng.uniform(0.1, 1.0, op.n_nodes)
        shape_v = rng.uniform(0.1, 1.0, op.n_nodes)
    else:
        u0, v0 = read_initial_file(config.initial_file, op.spec)
        return u0, v0
    return c_u * shape_u, c_v * shape_v
