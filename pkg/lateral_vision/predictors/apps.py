from django.apps import AppConfig


class PredictorsConfig(AppConfig):
    name = 'lateral_vision.predictors'
