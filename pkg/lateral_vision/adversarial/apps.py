from django.apps import AppConfig


class AdversarialConfig(AppConfig):
    name = 'lateral_vision.adversarial'
