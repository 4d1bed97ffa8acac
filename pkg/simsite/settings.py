"""
Django settings for the simsite project.

Hosts the `blowup` app: an implicit solver for a coupled quasilinear
parabolic system whose solutions may blow up in finite time, its
diagnostics, and a small ledger of recorded runs.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.1/ref/settings/
"""

import os
from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.environ.get(
    'DJANGO_SECRET_KEY',
    'django-insecure-simsite-local-only-6v1q!k7w@2p#x9m0r$z3t8d&',
)

# SECURITY WARNING: don't run with debug turned on in production!
DEBUG = os.environ.get('DJANGO_DEBUG', 'true').lower() == 'true'

ALLOWED_HOSTS = ['localhost', '127.0.0.1']


# Application definition

INSTALLED_APPS = [
    'django.contrib.admin',
    'django.contrib.auth',
    'django.contrib.contenttypes',
    'django.contrib.sessions',
    'django.contrib.messages',
    'django.contrib.staticfiles',
    'blowup',  # solver, diagnostics and run ledger
]

MIDDLEWARE = [
    'django.middleware.security.SecurityMiddleware',
    'django.contrib.sessions.middleware.SessionMiddleware',
    'django.middleware.common.CommonMiddleware',
    'django.middleware.csrf.CsrfViewMiddleware',
    'django.contrib.auth.middleware.AuthenticationMiddleware',
    'django.contrib.messages.middleware.MessageMiddleware',
    'django.middleware.clickjacking.XFrameOptionsMiddleware',
]

ROOT_URLCONF = 'simsite.urls'

TEMPLATES = [
    {
        'BACKEND': 'django.template.backends.django.DjangoTemplates',
        'DIRS': [],
        'APP_DIRS': True,
        'OPTIONS': {
            'context_processors': [
                'django.template.context_processors.debug',
                'django.template.context_processors.request',
                'django.contrib.auth.context_processors.auth',
                'django.contrib.messages.context_processors.messages',
            ],
        },
    },
]

WSGI_APPLICATION = 'simsite.wsgi.application'


# Database
# Priority: USE_POSTGRES=true > local SQLite

USE_POSTGRES = os.environ.get("USE_POSTGRES", "").lower() == "true"

if USE_POSTGRES:
    DATABASES = {
        "default": {
            "ENGINE": "django.db.backends.postgresql",
            "HOST": os.environ.get("DB_HOST", "db"),
            "PORT": os.environ.get("DB_PORT", "5432"),
            "NAME": os.environ.get("DB_NAME", "simsite"),
            "USER": os.environ.get("DB_USER", "simsite"),
            "PASSWORD": os.environ.get("DB_PASSWORD", "simsite"),
        }
    }
else:
    # Local development (default): SQLite next to manage.py
    DATABASES = {
        "default": {
            "ENGINE": "django.db.backends.sqlite3",
            "NAME": BASE_DIR / "db.sqlite3",
        }
    }


# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = True

USE_TZ = True


STATIC_URL = 'static/'

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Solver defaults
# Every key can be overridden from the environment as BLOWUP_<KEY>.
# A run's own key=value config file wins over these.

def _env_number(key, default):
    raw = os.environ.get(f'BLOWUP_{key}')
    if raw is None:
        return default
    return type(default)(raw)


BLOWUP_SOLVER = {
    key: _env_number(key, default)
    for key, default in {
        # Keller iteration stop: sup-norm change <= TOL_ABS + TOL_REL * max(C1, C2)
        'TOL_ABS': 1e-10,
        'TOL_REL': 1e-12,
        'MAX_ITERATIONS': 500,
        'MONOTONE_SLACK': 1e-13,
        'LINEAR_TOL': 1e-12,
        'BISECTION_STEPS': 200,
        # Time step control
        'SIGMA': 0.5,
        'DT_MIN': 1e-12,
        'DT_MAX': 0.1,
        'MAX_STEPS': 200000,
        # Run termination
        'BLOWUP_THRESHOLD': 1e8,
        'DECAY_FLOOR': 1e-3,
        # Principal eigenpair
        'EIGEN_TOL': 1e-12,
        'EIGEN_MAX_ITERATIONS': 500,
        # Newton oracle
        'NEWTON_TOL': 1e-11,
        'NEWTON_MAX_ITERATIONS': 60,
        'NEWTON_DAMPING': 0.5,
    }.items()
}

# Seeds per parameter cell in the slow per-step and oracle test batteries.
BLOWUP_BATTERY_SEEDS = int(os.environ.get('BLOWUP_BATTERY_SEEDS', '50'))


# Logging

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'simple': {
            'format': '{levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': os.environ.get('BLOWUP_LOG_LEVEL', 'WARNING'),
    },
}
