from django.apps import AppConfig


class DataprepConfig(AppConfig):
    name = 'lateral_vision.dataprep'
