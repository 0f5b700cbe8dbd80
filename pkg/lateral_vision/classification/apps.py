from django.apps import AppConfig


class ClassificationConfig(AppConfig):
    name = 'lateral_vision.classification'
