from django.apps import AppConfig


class FeaturesConfig(AppConfig):
    name = 'lateral_vision.features'
