"""
WSGI config for the LS-RPCA project.

Only the Django admin is served; experiments run through management commands
and the Celery worker.
"""

import os

from django.core.wsgi import get_wsgi_application

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "config.settings.local")

application = get_wsgi_application()
