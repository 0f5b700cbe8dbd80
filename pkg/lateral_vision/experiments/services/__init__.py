# flake8: noqa F401
from .experiment_service import (ExperimentResult, ExperimentService, ExperimentServiceProvider, FoldData, FoldResult,
                                 load_specimens)
