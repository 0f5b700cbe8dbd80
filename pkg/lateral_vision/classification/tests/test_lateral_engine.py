import threading

from django.test import SimpleTestCase

import numpy as np

from ..class_matrix import sparse_matrix
from ..serializers import FULL_PRECISION, trace_to_dict
from ..services import (AttentionOutcome, CancellationToken, ContextOutcome, GroundTruthBoxSource, LateralEngine,
                        PredictorBank, PredictorBoxSource, SignalChannel, analyse)
from ..services.lateral_engine import (MissingAttentionOutcome, NotValidPredictorBank, SignalAlreadyEmitted,
                                       majority_label)
from ..types import DecisionRule, PartKind, Perception, PhaseSignal, ProbabilityVector, ScoreScale
from .factories import (N_CLASSES, CountingTablePredictor, FailingPredictor, make_specimen, make_table, peaked)

PARTS = (PartKind.BACK, PartKind.BEAK, PartKind.TAIL)
WHOLE = PartKind.WHOLE_IMAGE

# agree: context parts and whole image name class 1
# majority: context says 0, whole image 3 and attention 3
# split: context says 0, whole image 3 and attention 2
CONTEXT_ROWS = {
    ('agree', PartKind.BACK): (1, .9), ('agree', PartKind.BEAK): (1, .8), ('agree', PartKind.TAIL): (2, .5),
    ('agree', WHOLE): (1, .7),
    ('majority', PartKind.BACK): (0, .9), ('majority', PartKind.BEAK): (0, .8), ('majority', PartKind.TAIL): (2, .5),
    ('majority', WHOLE): (3, .6),
    ('split', PartKind.BACK): (0, .9), ('split', PartKind.BEAK): (0, .8), ('split', PartKind.TAIL): (2, .5),
    ('split', WHOLE): (3, .6),
}
ATTENTION_ROWS = {
    ('agree', PartKind.BACK): (2, .9), ('agree', PartKind.BEAK): (2, .9), ('agree', PartKind.TAIL): (2, .9),
    ('majority', PartKind.BACK): (3, .9), ('majority', PartKind.BEAK): (3, .4), ('majority', PartKind.TAIL): (0, .5),
    ('split', PartKind.BACK): (2, .9), ('split', PartKind.BEAK): (1, .4), ('split', PartKind.TAIL): (1, .3),
}


def context_bank(table=None) -> PredictorBank:
    table = table or make_table(CONTEXT_ROWS)
    return PredictorBank({part: table for part in PARTS}, table)


def attention_bank(table=None) -> PredictorBank:
    table = table or make_table(ATTENTION_ROWS)
    return PredictorBank({part: table for part in PARTS})


class TestSignalChannel(SimpleTestCase):
    def test_emit_once(self):
        channel = SignalChannel()
        self.assertIsNone(channel.signal)
        self.assertIsNone(channel.wait(timeout=0.01))
        channel.emit(PhaseSignal.EXCITE)
        self.assertEqual(channel.wait(), PhaseSignal.EXCITE)
        self.assertEqual(channel.signal, PhaseSignal.EXCITE)
        with self.assertRaises(SignalAlreadyEmitted):
            channel.emit(PhaseSignal.INHIBIT)
        self.assertEqual(channel.signal, PhaseSignal.EXCITE)

    def test_wait_other_thread(self):
        channel = SignalChannel()
        received = []
        waiter = threading.Thread(target=lambda: received.append(channel.wait(timeout=5)))
        waiter.start()
        channel.emit(PhaseSignal.INHIBIT)
        waiter.join(timeout=5)
        self.assertEqual(received, [PhaseSignal.INHIBIT])

    def test_cancellation_token(self):
        token = CancellationToken()
        self.assertFalse(token.cancelled)
        token.cancel()
        token.cancel()
        self.assertTrue(token.cancelled)


class TestPredictorBank(SimpleTestCase):
    def test_not_valid_banks(self):
        table = make_table(CONTEXT_ROWS)
        with self.assertRaises(NotValidPredictorBank):
            PredictorBank({})
        with self.assertRaises(NotValidPredictorBank):
            PredictorBank({WHOLE: table})
        with self.assertRaises(NotValidPredictorBank):
            PredictorBank({PartKind.BACK: table}, make_table({}, n_classes=N_CLASSES + 1))
        with self.assertRaises(NotValidPredictorBank):
            LateralEngine(PredictorBank({PartKind.BACK: table}))
        with self.assertRaises(NotValidPredictorBank):
            LateralEngine(context_bank(), context_bank())
        with self.assertRaises(NotValidPredictorBank):
            LateralEngine(context_bank(), PredictorBank({PartKind.BACK: make_table({}, n_classes=N_CLASSES + 1)}))

    def test_part_kinds(self):
        table = make_table({})
        bank = PredictorBank({PartKind.FACE: table, PartKind.TAIL: table, PartKind.BACK: table})
        self.assertEqual(bank.part_kinds(), [PartKind.BACK, PartKind.TAIL, PartKind.FACE])
        self.assertEqual(bank.part_kinds(include_face=False), [PartKind.BACK, PartKind.TAIL])
        self.assertEqual(bank.n_classes, N_CLASSES)


class TestAnalyse(SimpleTestCase):
    def test_inhibit(self):
        context = ContextOutcome.build('image', sparse_matrix([(1, 100.)], N_CLASSES), peaked(1, .8))
        self.assertTrue(context.confident)
        trace = analyse(context)
        self.assertEqual(trace.rule, DecisionRule.INHIBIT)
        self.assertEqual(trace.final_label.index, 1)
        self.assertEqual(trace.final.scale, ScoreScale.VOTES)
        self.assertIsNone(trace.cm_a)
        self.assertEqual(trace.feature_extractions, 0)
        self.assertEqual(set(trace.listings), {'deep_clp', 'hlp'})

    def test_excite_needs_attention(self):
        context = ContextOutcome.build('image', sparse_matrix([(1, 100.)], N_CLASSES), peaked(2, .8))
        self.assertEqual(context.signal, PhaseSignal.EXCITE)
        with self.assertRaises(MissingAttentionOutcome):
            analyse(context)
        with self.assertRaises(MissingAttentionOutcome):
            analyse(context, AttentionOutcome.cancelled_outcome())

    def test_confused_context_excites(self):
        context = ContextOutcome.build('image', sparse_matrix([(1, 100.), (2, 100.)], N_CLASSES), peaked(1, .8))
        self.assertTrue(context.clp.confused)
        self.assertEqual(context.signal, PhaseSignal.EXCITE)

    def test_majority_ignores_suppressed(self):
        context = ContextOutcome.build('image', sparse_matrix([], N_CLASSES), peaked(2, .8))
        self.assertTrue(context.clp.suppressed)
        trace = analyse(context, AttentionOutcome.build(sparse_matrix([(2, 100.)], N_CLASSES)))
        self.assertEqual(trace.rule, DecisionRule.MAJORITY)
        self.assertEqual(trace.final_label.index, 2)
        self.assertEqual(trace.final.score, 2.)
        self.assertTrue(any('no evidence' in note for note in trace.notes))

        # Suppressed class-0 perceptions never make a majority on their own
        trace = analyse(context, AttentionOutcome.build(sparse_matrix([], N_CLASSES)))
        self.assertEqual(trace.rule, DecisionRule.FINAL_MATRIX)
        self.assertEqual(trace.final_label.index, 2)

    def test_majority_label(self):
        def perception(index, score=50.):
            return Perception(peaked(index, .9).top()[0], score, False)

        self.assertEqual(majority_label({'a': perception(1), 'b': perception(1), 'c': perception(2)}), (1, 2))
        self.assertEqual(majority_label({'a': perception(1), 'b': perception(1), 'c': perception(1)}), (1, 3))
        self.assertIsNone(majority_label({'a': perception(0), 'b': perception(1), 'c': perception(2)}))
        self.assertIsNone(majority_label({'a': perception(1, 0.), 'b': perception(1), 'c': None}))

    def test_final_matrix(self):
        context = ContextOutcome.build('image', sparse_matrix([(0, 100.), (2, 40.)], N_CLASSES), peaked(3, .7))
        trace = analyse(context, AttentionOutcome.build(sparse_matrix([(1, 100.), (2, 80.)], N_CLASSES)))
        self.assertEqual(trace.rule, DecisionRule.FINAL_MATRIX)
        # 0: 100 + 10, 1: 100 + 10, 2: 40 + 80 + 10, 3: 70
        self.assertEqual(trace.final_label.index, 2)
        self.assertAlmostEqual(trace.cm_f.entries[2], 130.)
        self.assertIn('final', trace.listings)


class TestLateralEngine(SimpleTestCase):
    def setUp(self):
        self.specimens = [make_specimen(image_id) for image_id in ('agree', 'majority', 'split')]

    def test_decide(self):
        engine = LateralEngine(context_bank(), attention_bank(), parallel=False)
        agree, majority, split = engine.decide_many(self.specimens)

        self.assertEqual(agree.signal, PhaseSignal.INHIBIT)
        self.assertEqual(agree.rule, DecisionRule.INHIBIT)
        self.assertEqual(agree.final_label.index, 1)
        np.testing.assert_allclose(agree.cm_c.entries, [0., 100., .5 / 1.7 * 100., 0.])

        self.assertEqual(majority.signal, PhaseSignal.EXCITE)
        self.assertEqual(majority.rule, DecisionRule.MAJORITY)
        self.assertEqual(majority.final_label.index, 3)
        self.assertEqual(majority.attention_clp.label.index, 3)

        self.assertEqual(split.rule, DecisionRule.FINAL_MATRIX)
        self.assertEqual(split.final_label.index, 2)
        self.assertEqual(split.context_clp.label.index, 0)
        self.assertEqual(split.context_hlp.label.index, 3)

    def test_parallel_equals_sequential(self):
        sequential = LateralEngine(context_bank(), attention_bank(), parallel=False).decide_many(self.specimens)
        parallel = LateralEngine(context_bank(), attention_bank(), parallel=True).decide_many(self.specimens, jobs=3)
        self.assertEqual([trace_to_dict(trace, decimals=FULL_PRECISION) for trace in parallel],
                         [trace_to_dict(trace, decimals=FULL_PRECISION) for trace in sequential])

    def test_inhibit_extracts_nothing(self):
        for parallel in (False, True):
            attention_table = CountingTablePredictor(make_table(ATTENTION_ROWS).entries, N_CLASSES)
            engine = LateralEngine(context_bank(), attention_bank(attention_table), parallel=parallel)
            trace = engine.decide(self.specimens[0])
            self.assertEqual(trace.signal, PhaseSignal.INHIBIT)
            self.assertEqual(trace.feature_extractions, 0)
            self.assertEqual(attention_table.calls, [])

            trace = engine.decide(self.specimens[1])
            self.assertEqual(trace.feature_extractions, len(PARTS))
            self.assertEqual(len(attention_table.calls), len(PARTS))

    def test_run_attention_cancelled(self):
        engine = LateralEngine(context_bank(), attention_bank())
        cancel = CancellationToken()
        cancel.cancel()
        outcome = engine.run_attention(self.specimens[1], cancel=cancel)
        self.assertTrue(outcome.cancelled)
        self.assertIsNone(outcome.cm_a)

        channel = SignalChannel()
        channel.emit(PhaseSignal.INHIBIT)
        outcome = engine.run_attention(self.specimens[1], signal=channel)
        self.assertTrue(outcome.cancelled)
        self.assertEqual(outcome.extractions, 0)

        channel = SignalChannel()
        channel.emit(PhaseSignal.EXCITE)
        outcome = engine.run_attention(self.specimens[1], signal=channel)
        self.assertFalse(outcome.cancelled)
        self.assertTrue(outcome.cm_a.is_normalized)

    def test_predictor_failure(self):
        failing = FailingPredictor(make_table(CONTEXT_ROWS).entries, N_CLASSES, [PartKind.BEAK])
        engine = LateralEngine(context_bank(failing), attention_bank(), parallel=True)
        with self.assertLogs('lateral_vision.classification.services.lateral_engine', level='WARNING'):
            trace = engine.decide(self.specimens[0])
        # Back alone still names class 1
        self.assertEqual(trace.rule, DecisionRule.INHIBIT)
        np.testing.assert_allclose(trace.cm_c.entries, [0., 100., .5 / .9 * 100., 0.])

    def test_holistic_failure(self):
        failing = FailingPredictor(make_table(CONTEXT_ROWS).entries, N_CLASSES, [WHOLE])
        engine = LateralEngine(context_bank(failing), attention_bank(), parallel=False)
        trace = engine.decide(self.specimens[0])
        self.assertTrue(trace.context_hlp.suppressed)
        self.assertEqual(trace.signal, PhaseSignal.EXCITE)
        # Context says 1 and attention 2, attention adds 100 to the 29.41 of class 2 on the context matrix
        self.assertEqual(trace.rule, DecisionRule.FINAL_MATRIX)
        self.assertEqual(trace.final_label.index, 2)

    def test_missing_boxes(self):
        engine = LateralEngine(context_bank(), attention_bank(), parallel=False)
        specimen = make_specimen('majority', parts=[PartKind.BACK, PartKind.BEAK])
        outcome = engine.run_attention(specimen)
        self.assertEqual([prediction.recognized for prediction in outcome.predictions], [True, True, False])
        self.assertEqual(outcome.extractions, 0)

    def test_no_attention_bank(self):
        engine = LateralEngine(context_bank())
        self.assertEqual(engine.decide(self.specimens[0]).rule, DecisionRule.INHIBIT)
        with self.assertRaises(MissingAttentionOutcome):
            engine.decide(self.specimens[1])

    def test_include_face(self):
        rows = dict(CONTEXT_ROWS)
        rows[('agree', PartKind.FACE)] = (2, 1.)
        rows[('agree', PartKind.TAIL)] = (2, .9)
        table = make_table(rows)
        bank = PredictorBank({part: table for part in PARTS + (PartKind.FACE,)}, table)
        with_face = LateralEngine(bank, attention_bank(), parallel=False).run_context(self.specimens[0])
        without_face = LateralEngine(bank, attention_bank(), parallel=False,
                                     include_face=False).run_context(self.specimens[0])
        self.assertEqual(with_face.clp.label.index, 2)
        self.assertEqual(with_face.signal, PhaseSignal.EXCITE)
        self.assertEqual(without_face.clp.label.index, 1)
        self.assertEqual(without_face.signal, PhaseSignal.INHIBIT)

    def test_box_sources(self):
        specimen = make_specimen('agree', parts=[PartKind.BACK])
        self.assertEqual(list(GroundTruthBoxSource().boxes(specimen)), [PartKind.BACK])

        def crash(_):
            raise RuntimeError('Detector crashed')

        self.assertEqual(PredictorBoxSource(crash).boxes(specimen), {})
        self.assertEqual(PredictorBoxSource(lambda s: s.boxes).boxes(specimen), specimen.boxes)


class TestContextOutcome(SimpleTestCase):
    def test_zero_holistic(self):
        context = ContextOutcome.build('image', sparse_matrix([(0, 100.)], N_CLASSES),
                                       ProbabilityVector(np.zeros(N_CLASSES)))
        self.assertTrue(context.hlp.suppressed)
        # Argmax of the zero vector is class 0, it does not count as agreement
        self.assertEqual(context.clp.label, context.hlp.label)
        self.assertFalse(context.confident)

    def test_empty_context_is_confused(self):
        # Both perceptions name class 0, but no part voted for it
        context = ContextOutcome.build('image', sparse_matrix([], N_CLASSES), peaked(0, .8))
        self.assertTrue(context.clp.suppressed)
        self.assertTrue(context.clp.confused)
        self.assertEqual(context.clp.label, context.hlp.label)
        self.assertFalse(context.confident)
        self.assertEqual(context.signal, PhaseSignal.EXCITE)
