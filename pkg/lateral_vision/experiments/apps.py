from django.apps import AppConfig


class ExperimentsConfig(AppConfig):
    name = 'lateral_vision.experiments'
