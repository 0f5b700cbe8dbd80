from .base import *  # noqa
from .base import env

# GENERAL
# ------------------------------------------------------------------------------
# https://docs.djangoproject.com/en/dev/ref/settings/#debug
DEBUG = env.bool('DJANGO_DEBUG', default=True)
# https://docs.djangoproject.com/en/dev/ref/settings/#secret-key
SECRET_KEY = env('DJANGO_SECRET_KEY', default='kTq7WxS2oVb0cJ9u1YhN4ePdR6mLfA3gZ8iXtC5sQwEyUrOnBjHaDlKvGpMzIx0F')

# Celery
# ------------------------------------------------------------------------------
# Run `celery -A lateral_vision.taskapp worker` and set CELERY_BROKER_URL to a redis url to spread folds
CELERY_TASK_ALWAYS_EAGER = env.bool('CELERY_TASK_ALWAYS_EAGER',
                                    default=env('CELERY_BROKER_URL', default='memory://') == 'memory://')
