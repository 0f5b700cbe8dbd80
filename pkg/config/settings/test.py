"""
With these settings, tests run faster.
"""

from .base import *  # noqa
from .base import env

# GENERAL
# ------------------------------------------------------------------------------
# https://docs.djangoproject.com/en/dev/ref/settings/#debug
DEBUG = False
# https://docs.djangoproject.com/en/dev/ref/settings/#secret-key
SECRET_KEY = env("DJANGO_SECRET_KEY", default="Vd3pQ9xLr2KcN7tWb5mYhJ0aS8eG4uFzT1oIkE6nBwCyMqRsXjHgPlUvDiA2fO5Z")
# https://docs.djangoproject.com/en/dev/ref/settings/#test-runner
TEST_RUNNER = "django.test.runner.DiscoverRunner"

# CELERY
CELERY_BROKER_URL = 'memory://'
CELERY_TASK_ALWAYS_EAGER = True

# LATERAL ENGINE
LATERAL_ENGINE_PARALLEL = True
LATERAL_INCLUDE_FACE = True
LATERAL_TRACE_TOP_K = 2
LATERAL_TRACE_DECIMALS = 2

# FEATURES
FEATURE_CACHE_SIZE = 2048
FEATURE_FUSION = 'concatenate'
HOG_MIDDLE_RESIZE = 126

# ADVERSARIAL
ADVERSARIAL_EPSILON_SCALE = 'pixel'

EXPERIMENT_JOBS = 1
EXPERIMENT_FEATURE_DIR = None
