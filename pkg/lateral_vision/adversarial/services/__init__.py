# flake8: noqa F401
from .attack_service import AttackService
