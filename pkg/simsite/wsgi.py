"""
WSGI entry point for the run-ledger API.

Serves the read-only `/api/runs/` endpoints and the admin; the solver
itself is driven from `manage.py solve`.
"""

import os

from django.core.wsgi import get_wsgi_application

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'simsite.settings')

application = get_wsgi_application()
