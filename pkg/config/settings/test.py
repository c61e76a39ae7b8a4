"""
With these settings, tests run faster.
"""

from .base import *  # noqa: F403
from .base import LOGGING
from .base import env

# GENERAL
# ------------------------------------------------------------------------------
# https://docs.djangoproject.com/en/dev/ref/settings/#secret-key
SECRET_KEY = env(
    "DJANGO_SECRET_KEY",
    default="Yp4mW2cQn8sV1xKd6tRb0hLz3fJg9uNa5eTi7oPwCvBqHyXsMrUkDlGjEnAzF",
)
# https://docs.djangoproject.com/en/dev/ref/settings/#test-runner
TEST_RUNNER = "django.test.runner.DiscoverRunner"

# DATABASES
# ------------------------------------------------------------------------------
DATABASES = {"default": {"ENGINE": "django.db.backends.sqlite3", "NAME": ":memory:"}}

# PASSWORDS
# ------------------------------------------------------------------------------
# https://docs.djangoproject.com/en/dev/ref/settings/#password-hashers
PASSWORD_HASHERS = ["django.contrib.auth.hashers.MD5PasswordHasher"]

# Celery
# ------------------------------------------------------------------------------
CELERY_TASK_ALWAYS_EAGER = True
CELERY_TASK_EAGER_PROPAGATES = True
CELERY_BROKER_URL = "memory://"
CELERY_RESULT_BACKEND = "cache+memory://"

# LS-RPCA
# ------------------------------------------------------------------------------
# Redirected per test to tmp_path by lsrpca/conftest.py.
LSRPCA_SLICE_ROWS = 256

# LOGGING
# ------------------------------------------------------------------------------
# Records propagate to the root logger so caplog can capture them.
LOGGING["loggers"]["lsrpca"] = {"level": "WARNING", "propagate": True}
