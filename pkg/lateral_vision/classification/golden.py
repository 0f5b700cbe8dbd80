"""
Recorded perceptions of interpreted decisions, replayed through the analysis stage of the engine
"""
import json
from logging import getLogger
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Optional, Union

from django.conf import settings

import numpy as np

from .class_matrix import sparse_matrix
from .services.lateral_engine import AttentionOutcome, ContextOutcome, analyse
from .types import ClassLabel, DecisionRule, DecisionTrace, LateralVisionException, ProbabilityVector

logger = getLogger(__name__)

GOLDEN_FORMAT_VERSION = '1.0.0'
# Final matrix scores are stored with two decimals
SCORE_TOLERANCE = 1e-6


class GoldenFormatException(LateralVisionException):
    pass


class GoldenCase(NamedTuple):
    name: str
    description: str
    expected: ClassLabel
    expected_rule: Optional[DecisionRule]
    expected_final_score: Optional[float]
    context: ContextOutcome
    attention: AttentionOutcome


class ReplayResult(NamedTuple):
    case: GoldenCase
    trace: DecisionTrace

    @property
    def final_score(self) -> Optional[float]:
        if self.trace.cm_f is None:
            return None
        return float(self.trace.cm_f.entries[self.trace.final_label.index])

    @property
    def failures(self) -> List[str]:
        failures = []
        if self.trace.final_label != self.case.expected:
            failures.append(f'final {self.trace.final_label} != expected {self.case.expected}')
        if self.case.expected_rule is not None and self.trace.rule is not self.case.expected_rule:
            failures.append(f'rule {self.trace.rule.value} != expected {self.case.expected_rule.value}')
        if self.case.expected_final_score is not None and (
                self.final_score is None or abs(self.final_score - self.case.expected_final_score) > SCORE_TOLERANCE):
            failures.append(f'final score {self.final_score} != expected {self.case.expected_final_score}')
        return failures

    @property
    def passed(self) -> bool:
        return not self.failures


def _sparse_scores(scores: Dict[str, float], n_classes: int) -> List[tuple]:
    return [(ClassLabel.from_species_id(int(species_id), n_classes).index, float(score))
            for species_id, score in scores.items()]


def _parse_case(data: Dict[str, Any], n_classes: int) -> GoldenCase:
    try:
        name = data['name']
        holistic = np.zeros(n_classes)
        for index, score in _sparse_scores(data['holistic'], n_classes):
            holistic[index] = score
        context = ContextOutcome.build(name, sparse_matrix(_sparse_scores(data['cm_c'], n_classes), n_classes),
                                       ProbabilityVector(holistic))
        attention = AttentionOutcome.build(sparse_matrix(_sparse_scores(data['cm_a'], n_classes), n_classes))
        expected_rule = DecisionRule(data['expected_rule']) if data.get('expected_rule') else None
        return GoldenCase(name, f'{data.get("species", "")}: {data.get("pattern", "")}',
                          ClassLabel.from_species_id(data['expected_species_id'], n_classes), expected_rule,
                          data.get('expected_final_score'), context, attention)
    except (KeyError, ValueError, TypeError) as exc:
        raise GoldenFormatException(f'Not valid golden case {data.get("name", data)}: {exc}') from exc


def load_golden(path: Optional[Union[str, Path]] = None) -> List[GoldenCase]:
    """
    :param path: `GOLDEN_TRACES_FILE` by default
    """
    path = Path(path or settings.GOLDEN_TRACES_FILE)
    with open(path) as golden_file:
        data = json.load(golden_file)
    if str(data.get('version', '')).split('.')[0] != GOLDEN_FORMAT_VERSION.split('.')[0]:
        raise GoldenFormatException(f'Golden file version={data.get("version")} not supported')
    n_classes = data['n_classes']
    return [_parse_case(case, n_classes) for case in data['cases']]


def replay_traces(path: Optional[Union[str, Path]] = None, top_k: int = 2) -> List[ReplayResult]:
    results = []
    for case in load_golden(path):
        result = ReplayResult(case, analyse(case.context, case.attention, top_k=top_k))
        if result.passed:
            logger.debug('Golden case %s reproduced %s', case.name, result.trace.final_label)
        else:
            logger.warning('Golden case %s failed: %s', case.name, '; '.join(result.failures))
        results.append(result)
    return results
