# flake8: noqa F401
from .lateral_engine import (AttentionOutcome, CancellationToken, ContextOutcome, GroundTruthBoxSource, LateralEngine,
                             PredictorBank, PredictorBoxSource, SignalChannel, analyse)
