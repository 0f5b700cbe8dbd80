from django.apps import AppConfig


class ForestConfig(AppConfig):
    name = 'lateral_vision.forest'
