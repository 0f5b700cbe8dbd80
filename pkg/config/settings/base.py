"""
Base settings to build other settings files upon.
"""

import environ

ROOT_DIR = environ.Path(__file__) - 3  # (lateral_vision/config/settings/base.py - 3 = lateral-vision/)
APPS_DIR = ROOT_DIR.path('lateral_vision')

env = environ.Env()

READ_DOT_ENV_FILE = env.bool('DJANGO_READ_DOT_ENV_FILE', default=False)
DOT_ENV_FILE = env('DJANGO_DOT_ENV_FILE', default=None)
if READ_DOT_ENV_FILE or DOT_ENV_FILE:
    DOT_ENV_FILE = DOT_ENV_FILE or '.env'
    # OS environment variables take precedence over variables from .env
    env.read_env(str(ROOT_DIR.path(DOT_ENV_FILE)))

# GENERAL
# ------------------------------------------------------------------------------
# https://docs.djangoproject.com/en/dev/ref/settings/#debug
DEBUG = env.bool('DJANGO_DEBUG', False)
TIME_ZONE = 'UTC'
LANGUAGE_CODE = 'en-us'
USE_I18N = False
USE_TZ = True

# No database is used, experiment artifacts are plain files
DATABASES = {}

# APPS
# ------------------------------------------------------------------------------
THIRD_PARTY_APPS = [
    'rest_framework',
]
LOCAL_APPS = [
    'lateral_vision.classification.apps.ClassificationConfig',
    'lateral_vision.features.apps.FeaturesConfig',
    'lateral_vision.forest.apps.ForestConfig',
    'lateral_vision.predictors.apps.PredictorsConfig',
    'lateral_vision.adversarial.apps.AdversarialConfig',
    'lateral_vision.dataprep.apps.DataprepConfig',
    'lateral_vision.experiments.apps.ExperimentsConfig',
]
# https://docs.djangoproject.com/en/dev/ref/settings/#installed-apps
INSTALLED_APPS = THIRD_PARTY_APPS + LOCAL_APPS

# Celery
# ------------------------------------------------------------------------------
INSTALLED_APPS += [
    'lateral_vision.taskapp.celery.CeleryConfig',
]
# http://docs.celeryproject.org/en/latest/userguide/configuration.html#std:setting-broker_url
CELERY_BROKER_URL = env('CELERY_BROKER_URL', default='memory://')
CELERY_RESULT_BACKEND = env('CELERY_RESULT_BACKEND', default='cache+memory://')
# Folds run in-process unless a real broker is configured
CELERY_TASK_ALWAYS_EAGER = env.bool('CELERY_TASK_ALWAYS_EAGER', default=CELERY_BROKER_URL == 'memory://')
CELERY_TASK_EAGER_PROPAGATES = True
# http://docs.celeryproject.org/en/latest/userguide/configuration.html#std:setting-accept_content
CELERY_ACCEPT_CONTENT = ['json']
CELERY_TASK_SERIALIZER = 'json'
CELERY_RESULT_SERIALIZER = 'json'
# A fold trains for minutes, workers reserve one at a time and acknowledge it when finished
CELERY_WORKER_PREFETCH_MULTIPLIER = 1
CELERY_TASK_ACKS_LATE = True

# LOGGING
# ------------------------------------------------------------------------------
# See: https://docs.djangoproject.com/en/dev/ref/settings/#logging
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '%(asctime)s [%(levelname)s] [%(processName)s] %(message)s',
        },
    },
    'handlers': {
        'console': {
            'level': 'DEBUG',
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        '': {
            'handlers': ['console'],
            'level': 'DEBUG' if DEBUG else 'INFO',
        },
        'celery': {
            'handlers': ['console'],
            'level': 'DEBUG' if DEBUG else 'INFO',
            'propagate': False,  # If not it will be out for the root logger too
        },
        'celery.worker.strategy': {
            'handlers': ['console'],
            'level': 'DEBUG' if DEBUG else 'INFO',
            'propagate': False,  # If not it will be out for the root logger too
        },
    }
}

# Lateral engine
# ------------------------------------------------------------------------------
# Attention phase starts together with the context phase and waits for its signal
LATERAL_ENGINE_PARALLEL = env.bool('LATERAL_ENGINE_PARALLEL', default=True)
# Count the configural Face predictor in the constituent class matrix
LATERAL_INCLUDE_FACE = env.bool('LATERAL_INCLUDE_FACE', default=True)
LATERAL_TRACE_TOP_K = env.int('LATERAL_TRACE_TOP_K', default=2)
# `None` keeps full precision on the class matrices of the traces
LATERAL_TRACE_DECIMALS = env.int('LATERAL_TRACE_DECIMALS', default=2)
GOLDEN_TRACES_FILE = env('GOLDEN_TRACES_FILE',
                         default=str(APPS_DIR.path('classification', 'fixtures', 'golden_traces.json')))

# Features
# ------------------------------------------------------------------------------
FEATURE_CACHE_SIZE = env.int('FEATURE_CACHE_SIZE', default=100000)
# `concatenate` (one forest per part) or `per_variant` (one forest per part and variant)
FEATURE_FUSION = env('FEATURE_FUSION', default='concatenate')
# Printed as 126 next to 64 and 256, 128 is accepted too
HOG_MIDDLE_RESIZE = env.int('HOG_MIDDLE_RESIZE', default=126)

# Adversarial
# ------------------------------------------------------------------------------
# `pixel` reads epsilon/alpha on the 0-255 scale, `unit` on the 0-1 scale
ADVERSARIAL_EPSILON_SCALE = env('ADVERSARIAL_EPSILON_SCALE', default='pixel')

# Experiments
# ------------------------------------------------------------------------------
EXPERIMENT_OUTPUT_DIR = env('EXPERIMENT_OUTPUT_DIR', default=str(ROOT_DIR('runs')))
EXPERIMENT_JOBS = env.int('EXPERIMENT_JOBS', default=1)
# Feature dumps shared by the folds of every run, disabled if not set
EXPERIMENT_FEATURE_DIR = env('EXPERIMENT_FEATURE_DIR', default=None)
