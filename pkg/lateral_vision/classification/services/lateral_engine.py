"""
Two phase decision of the lateralized classifier. The context phase runs the part and whole image
predictors and raises Inhibit when its constituent and holistic perceptions agree. Otherwise the
attention phase (part crops -> descriptors -> forests) is let through and the three perceptions
are combined by majority or by the final class matrix.
"""
import threading
from abc import ABC, abstractmethod
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from logging import getLogger
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

from django.conf import settings

import numpy as np

from lateral_vision.dataprep.boxes import boxes_from_keypoints
from lateral_vision.dataprep.types import PartBox, Specimen
from lateral_vision.features.services import ExtractionCounter
from lateral_vision.predictors.base import Predictor

from ..class_matrix import (ClassMatrix, ClassMatrixDimensionMismatch, ClassMatrixScaleError, accumulate,
                            combine_final, constituent_perception, final_prediction, holistic_perception, normalize,
                            top_k_probabilities)
from ..types import (CROPPED_PARTS, ClassLabel, DecisionRule, DecisionTrace, InputDomainError, LateralVisionException,
                     PartKind, PartPrediction, Perception, PhaseSignal, ProbabilityVector, ScoreListing,
                     ScoreScale)

logger = getLogger(__name__)

DEEP_CLP = 'deep_clp'
RF_CLP = 'rf_clp'
HLP = 'hlp'
FINAL = 'final'


class LateralEngineException(LateralVisionException):
    pass


class SignalAlreadyEmitted(LateralEngineException):
    pass


class MissingAttentionOutcome(LateralEngineException, InputDomainError):
    pass


class NotValidPredictorBank(LateralEngineException, InputDomainError):
    pass


class CancellationToken:
    """
    Fired once by the context phase, polled by the attention phase between parts
    """
    def __init__(self):
        self._event = threading.Event()

    def cancel(self):
        self._event.set()

    @property
    def cancelled(self) -> bool:
        return self._event.is_set()


class SignalChannel:
    """
    Carries the only phase signal the context phase emits for an image
    """
    def __init__(self):
        self._lock = threading.Lock()
        self._emitted = threading.Event()
        self._signal: Optional[PhaseSignal] = None

    def emit(self, signal: PhaseSignal):
        with self._lock:
            if self._signal is not None:
                raise SignalAlreadyEmitted(f'Signal {self._signal.value} was already emitted, cannot emit '
                                           f'{signal.value}')
            self._signal = signal
        self._emitted.set()

    def wait(self, timeout: Optional[float] = None) -> Optional[PhaseSignal]:
        """
        :return: The emitted signal, `None` on timeout
        """
        self._emitted.wait(timeout)
        return self._signal

    @property
    def signal(self) -> Optional[PhaseSignal]:
        return self._signal


@dataclass(frozen=True)
class PredictorBank:
    """
    Predictors per cropped part, plus the whole image predictor for the context bank
    """
    parts: Mapping[PartKind, Predictor]
    holistic: Optional[Predictor] = None

    def __post_init__(self):
        for part in self.parts:
            if part not in CROPPED_PARTS:
                raise NotValidPredictorBank(f'Part={part.value} cannot have a part predictor')
        predictors = list(self.parts.values()) + ([self.holistic] if self.holistic is not None else [])
        if not predictors:
            raise NotValidPredictorBank('Predictor bank is empty')
        n_classes = {predictor.n_classes for predictor in predictors}
        if len(n_classes) != 1:
            raise NotValidPredictorBank(f'Predictors disagree on n_classes={sorted(n_classes)}')

    @property
    def n_classes(self) -> int:
        predictor = self.holistic if self.holistic is not None else next(iter(self.parts.values()))
        return predictor.n_classes

    def part_kinds(self, include_face: bool = True) -> List[PartKind]:
        return [part for part in CROPPED_PARTS
                if part in self.parts and (include_face or not part.is_configural)]


@dataclass(frozen=True)
class ContextOutcome:
    image_id: str
    cm_c: ClassMatrix
    holistic: ProbabilityVector
    clp: Perception
    hlp: Perception
    confident: bool
    signal: PhaseSignal
    predictions: Tuple[PartPrediction, ...] = ()

    def __post_init__(self):
        if not self.cm_c.is_normalized:
            raise ClassMatrixScaleError('Context class matrix must be normalized')
        if self.cm_c.n_classes != self.holistic.n_classes:
            raise ClassMatrixDimensionMismatch(f'cm_c has {self.cm_c.n_classes} classes, holistic has '
                                               f'{self.holistic.n_classes}')
        if self.confident != (self.signal is PhaseSignal.INHIBIT):
            raise InputDomainError('Confident flag must match the inhibit signal')

    @classmethod
    def build(cls, image_id: str, cm_c: ClassMatrix, holistic: ProbabilityVector,
              predictions: Sequence[PartPrediction] = ()) -> 'ContextOutcome':
        """
        Perceive a normalized context matrix and the holistic probabilities, confident when both
        perceptions name the same class and the constituent one is not confused. A suppressed
        holistic perception (all zero probabilities) never agrees, its label is only the first index
        """
        clp = constituent_perception(cm_c)
        hlp = holistic_perception(holistic)
        # An empty context matrix ties every class, so a suppressed CLP is always confused
        confident = clp.label == hlp.label and not clp.confused and not hlp.suppressed
        signal = PhaseSignal.INHIBIT if confident else PhaseSignal.EXCITE
        return cls(image_id, cm_c, holistic, clp, hlp, confident, signal, tuple(predictions))


@dataclass(frozen=True)
class AttentionOutcome:
    cm_a: Optional[ClassMatrix]
    clp: Optional[Perception]
    cancelled: bool = False
    extractions: int = 0
    predictions: Tuple[PartPrediction, ...] = field(default=())

    @classmethod
    def build(cls, cm_a: ClassMatrix, extractions: int = 0,
              predictions: Sequence[PartPrediction] = ()) -> 'AttentionOutcome':
        if not cm_a.is_normalized:
            raise ClassMatrixScaleError('Attention class matrix must be normalized')
        return cls(cm_a, constituent_perception(cm_a), extractions=extractions, predictions=tuple(predictions))

    @classmethod
    def cancelled_outcome(cls, extractions: int = 0) -> 'AttentionOutcome':
        return cls(None, None, cancelled=True, extractions=extractions)


class PartBoxSource(ABC):
    @abstractmethod
    def boxes(self, specimen: Specimen) -> Dict[PartKind, PartBox]:
        pass


class GroundTruthBoxSource(PartBoxSource):
    """
    Annotated boxes of the specimen, derived from its keypoints when it has no boxes
    """
    def boxes(self, specimen: Specimen) -> Dict[PartKind, PartBox]:
        if specimen.boxes:
            return dict(specimen.boxes)
        if specimen.keypoints is not None:
            return boxes_from_keypoints(specimen.keypoints, specimen.width, specimen.height)
        logger.warning('Image=%s has no boxes nor keypoints', specimen.image_id)
        return {}


class PredictorBoxSource(PartBoxSource):
    """
    Boxes produced by any callable, for example a part detector
    """
    def __init__(self, predict_boxes: Callable[[Specimen], Mapping[PartKind, PartBox]]):
        self.predict_boxes = predict_boxes

    def boxes(self, specimen: Specimen) -> Dict[PartKind, PartBox]:
        try:
            return dict(self.predict_boxes(specimen))
        except Exception:
            logger.warning('Box predictor failed for image=%s, no part will be cropped', specimen.image_id,
                           exc_info=True)
            return {}


def majority_label(perceptions: Mapping[str, Optional[Perception]]) -> Optional[Tuple[int, int]]:
    """
    Suppressed and missing perceptions do not vote. Confused perceptions vote with their
    tie-broken label
    :return: `(class index, votes)` when two or more perceptions agree, `None` otherwise
    """
    votes = Counter(perception.label.index for perception in perceptions.values()
                    if perception is not None and not perception.suppressed)
    if not votes:
        return None
    index, count = min(votes.items(), key=lambda item: (-item[1], item[0]))
    return (index, count) if count >= 2 else None


def analyse(context: ContextOutcome, attention: Optional[AttentionOutcome] = None, top_k: int = 2) -> DecisionTrace:
    """
    Decision from the phase outcomes alone, no predictor is called
    :param context:
    :param attention: required unless the context phase inhibited the attention phase
    :return: Decision trace
    """
    n_classes = context.cm_c.n_classes
    listings = {
        DEEP_CLP: ScoreListing(tuple(context.cm_c.top_k(top_k)), context.cm_c.scale),
        HLP: ScoreListing(tuple(top_k_probabilities(context.holistic, top_k)), ScoreScale.PROBABILITY),
    }
    notes: List[str] = []
    if context.signal is PhaseSignal.INHIBIT:
        final = Perception(context.clp.label, 2., confused=False, scale=ScoreScale.VOTES)
        return DecisionTrace(context.image_id, n_classes, context.clp, context.hlp, True, PhaseSignal.INHIBIT,
                             context.cm_c, final, DecisionRule.INHIBIT, listings=listings,
                             notes=['Context phase was confident, attention phase inhibited'])

    if attention is None or attention.cancelled:
        raise MissingAttentionOutcome(f'Image={context.image_id} was excited but has no attention outcome')
    listings[RF_CLP] = ScoreListing(tuple(attention.cm_a.top_k(top_k)), attention.cm_a.scale)
    perceptions = {DEEP_CLP: context.clp, RF_CLP: attention.clp, HLP: context.hlp}
    for name, perception in perceptions.items():
        if perception.suppressed:
            notes.append(f'{name} has no evidence and does not vote')
        elif perception.confused:
            notes.append(f'{name} is confused, votes with tie-broken {perception.label}')

    majority = majority_label(perceptions)
    cm_f = None
    if majority is not None:
        index, votes = majority
        final = Perception(ClassLabel(index, n_classes), float(votes), confused=False, scale=ScoreScale.VOTES)
        rule = DecisionRule.MAJORITY
    else:
        cm_f = combine_final(context.cm_c, attention.cm_a, context.holistic)
        final = final_prediction(cm_f)
        rule = DecisionRule.FINAL_MATRIX
        listings[FINAL] = ScoreListing(tuple(cm_f.top_k(top_k)), cm_f.scale)
        notes.append('No majority, final matrix argmax (not normalized, argmax is scale invariant)')
        if final.confused:
            notes.append(f'Final matrix tie, smallest index {final.label} chosen')

    return DecisionTrace(context.image_id, n_classes, context.clp, context.hlp, False, PhaseSignal.EXCITE,
                         context.cm_c, final, rule, attention_clp=attention.clp, cm_a=attention.cm_a,
                         cm_f=cm_f, feature_extractions=attention.extractions, listings=listings, notes=notes)


class LateralEngine:
    def __init__(self, context_bank: PredictorBank, attention_bank: Optional[PredictorBank] = None,
                 box_source: Optional[PartBoxSource] = None, parallel: Optional[bool] = None,
                 include_face: Optional[bool] = None, top_k: Optional[int] = None):
        """
        :param context_bank: part predictors of the context phase plus the whole image predictor
        :param attention_bank: part predictors of the attention phase, no whole image predictor
        :param box_source: ground truth boxes by default
        :param parallel: run attention alongside context, `LATERAL_ENGINE_PARALLEL` by default
        :param include_face: accumulate the face on the constituent matrices, `LATERAL_INCLUDE_FACE` by default
        :param top_k: scores listed per perception on traces, `LATERAL_TRACE_TOP_K` by default
        """
        if context_bank.holistic is None:
            raise NotValidPredictorBank('Context bank needs a whole image predictor')
        if attention_bank is not None:
            if attention_bank.holistic is not None:
                raise NotValidPredictorBank('Attention bank cannot have a whole image predictor')
            if attention_bank.n_classes != context_bank.n_classes:
                raise NotValidPredictorBank(f'Attention bank has {attention_bank.n_classes} classes, context bank '
                                            f'{context_bank.n_classes}')
        self.context_bank = context_bank
        self.attention_bank = attention_bank
        self.box_source = box_source or GroundTruthBoxSource()
        self.parallel = settings.LATERAL_ENGINE_PARALLEL if parallel is None else parallel
        self.include_face = settings.LATERAL_INCLUDE_FACE if include_face is None else include_face
        self.top_k = settings.LATERAL_TRACE_TOP_K if top_k is None else top_k

    @property
    def n_classes(self) -> int:
        return self.context_bank.n_classes

    def _predict(self, predictor: Predictor, specimen: Specimen, part: PartKind, box: Optional[PartBox],
                 counter: Optional[ExtractionCounter] = None) -> PartPrediction:
        try:
            return predictor.predict(specimen, part, box=box, counter=counter)
        except Exception:
            logger.warning('Predictor for part=%s failed on image=%s, using unrecognized', part.value,
                           specimen.image_id, exc_info=True)
            return PartPrediction.unrecognized(part, self.n_classes)

    def _holistic_probabilities(self, specimen: Specimen) -> ProbabilityVector:
        try:
            probabilities = self.context_bank.holistic.predict_proba(specimen, PartKind.WHOLE_IMAGE)
        except Exception:
            logger.warning('Whole image predictor failed on image=%s', specimen.image_id, exc_info=True)
            probabilities = None
        if probabilities is None:
            return ProbabilityVector(np.zeros(self.n_classes))
        return probabilities

    def run_context(self, specimen: Specimen, boxes: Optional[Mapping[PartKind, PartBox]] = None) -> ContextOutcome:
        boxes = self.box_source.boxes(specimen) if boxes is None else boxes
        predictions = [self._predict(self.context_bank.parts[part], specimen, part, boxes.get(part))
                       for part in self.context_bank.part_kinds(self.include_face)]
        cm_c = normalize(accumulate(predictions, self.n_classes))
        outcome = ContextOutcome.build(specimen.image_id, cm_c, self._holistic_probabilities(specimen), predictions)
        logger.debug('Context image=%s clp=%s hlp=%s signal=%s', specimen.image_id, outcome.clp.label,
                     outcome.hlp.label, outcome.signal.value)
        return outcome

    def run_attention(self, specimen: Specimen, boxes: Optional[Mapping[PartKind, PartBox]] = None,
                      cancel: Optional[CancellationToken] = None,
                      signal: Optional[SignalChannel] = None) -> AttentionOutcome:
        """
        :param specimen:
        :param boxes: resolved with the box source if not provided
        :param cancel: polled before every part
        :param signal: if provided, no feature is extracted until the context phase emits its signal
        :return: Normalized CM_a and its perception, or a cancelled outcome
        """
        if self.attention_bank is None:
            raise MissingAttentionOutcome('Engine has no attention bank')
        cancel = cancel or CancellationToken()
        boxes = self.box_source.boxes(specimen) if boxes is None else boxes
        parts = self.attention_bank.part_kinds(self.include_face)
        for part in parts:
            if part not in boxes:
                logger.warning('Image=%s has no box for part=%s', specimen.image_id, part.value)

        if signal is not None and signal.wait() is PhaseSignal.INHIBIT:
            cancel.cancel()
        counter = ExtractionCounter()
        predictions = []
        for part in parts:
            if cancel.cancelled:
                logger.debug('Attention on image=%s cancelled after %d parts', specimen.image_id, len(predictions))
                return AttentionOutcome.cancelled_outcome(counter.value)
            box = boxes.get(part)
            if box is None:
                predictions.append(PartPrediction.unrecognized(part, self.n_classes))
                continue
            predictions.append(self._predict(self.attention_bank.parts[part], specimen, part, box, counter=counter))
        cm_a = normalize(accumulate(predictions, self.n_classes))
        return AttentionOutcome.build(cm_a, extractions=counter.value, predictions=predictions)

    def analyse(self, context: ContextOutcome, attention: Optional[AttentionOutcome] = None) -> DecisionTrace:
        return analyse(context, attention, top_k=self.top_k)

    def _decide_sequential(self, specimen: Specimen,
                           boxes: Mapping[PartKind, PartBox]) -> Tuple[ContextOutcome, Optional[AttentionOutcome]]:
        context = self.run_context(specimen, boxes)
        if context.signal is PhaseSignal.INHIBIT:
            return context, None
        return context, self.run_attention(specimen, boxes)

    def _decide_parallel(self, specimen: Specimen,
                         boxes: Mapping[PartKind, PartBox]) -> Tuple[ContextOutcome, Optional[AttentionOutcome]]:
        cancel = CancellationToken()
        channel = SignalChannel()
        with ThreadPoolExecutor(max_workers=1) as executor:
            future = executor.submit(self.run_attention, specimen, boxes, cancel, channel)
            try:
                context = self.run_context(specimen, boxes)
            except BaseException:
                cancel.cancel()
                channel.emit(PhaseSignal.INHIBIT)
                raise
            if context.signal is PhaseSignal.INHIBIT:
                cancel.cancel()
            channel.emit(context.signal)
            attention = future.result()
        if context.signal is PhaseSignal.INHIBIT:
            if attention.extractions:
                logger.error('Attention on inhibited image=%s extracted %d features', specimen.image_id,
                             attention.extractions)
            return context, None
        return context, attention

    def decide(self, specimen: Specimen) -> DecisionTrace:
        boxes = self.box_source.boxes(specimen)
        if self.attention_bank is None:
            context = self.run_context(specimen, boxes)
            if context.signal is PhaseSignal.EXCITE:
                raise MissingAttentionOutcome(f'Image={specimen.image_id} needs an attention phase but the engine '
                                              f'has no attention bank')
            return self.analyse(context)
        if self.parallel:
            context, attention = self._decide_parallel(specimen, boxes)
        else:
            context, attention = self._decide_sequential(specimen, boxes)
        trace = self.analyse(context, attention)
        logger.debug('Image=%s decided %s by %s', specimen.image_id, trace.final_label, trace.rule.value)
        return trace

    def decide_many(self, specimens: Sequence[Specimen], jobs: int = 1) -> List[DecisionTrace]:
        """
        :return: Traces in the order of `specimens`
        """
        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as executor:
                return list(executor.map(self.decide, specimens))
        return [self.decide(specimen) for specimen in specimens]
