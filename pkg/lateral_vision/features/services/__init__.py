# flake8: noqa F401
from .feature_extraction_service import ExtractionCounter, FeatureExtractionService
