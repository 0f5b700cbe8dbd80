"""
Accuracy of the holistic-only baseline and the lateralized system per condition, mean and
standard deviation over folds
"""
import csv
import io
from collections import defaultdict
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Sequence, Tuple

import numpy as np

from .types import BASELINE, CONDITIONS, LATERAL, SYSTEMS

SYSTEM_TITLES = {BASELINE: 'Holistic only', LATERAL: 'Lateralized'}


class ReportException(Exception):
    pass


def accuracy(outcomes: Sequence[Dict[str, Any]], system: str) -> float:
    """
    :return: Percentage of outcomes where `system` predicted the label
    """
    if not outcomes:
        raise ReportException('Cannot compute the accuracy of no outcomes')
    correct = sum(1 for outcome in outcomes if outcome[system] == outcome['label'])
    return 100. * correct / len(outcomes)


@dataclass(frozen=True)
class AccuracyReport:
    conditions: Tuple[str, ...]
    folds: Tuple[int, ...]
    # condition -> system -> accuracy of every fold, in `folds` order
    per_fold: Dict[str, Dict[str, Tuple[float, ...]]]

    def __post_init__(self):
        for condition in self.conditions:
            for system in SYSTEMS:
                values = self.per_fold[condition][system]
                if len(values) != len(self.folds):
                    raise ReportException(f'{condition}/{system} has {len(values)} folds, expected '
                                          f'{len(self.folds)}')
                if any(not 0. <= value <= 100. for value in values):
                    raise ReportException(f'{condition}/{system} accuracies out of [0, 100]')

    @classmethod
    def from_outcomes(cls, outcomes: Iterable[Dict[str, Any]]) -> 'AccuracyReport':
        """
        Recount the report from per image outcomes
        """
        grouped = defaultdict(list)
        for outcome in outcomes:
            grouped[(outcome['condition'], outcome['fold'])].append(outcome)
        if not grouped:
            raise ReportException('No outcomes to report')
        conditions = tuple(condition for condition in CONDITIONS if any(key[0] == condition for key in grouped))
        folds = tuple(sorted({fold for _, fold in grouped}))
        per_fold = {condition: {system: tuple(accuracy(grouped[(condition, fold)], system) for fold in folds)
                                for system in SYSTEMS}
                    for condition in conditions}
        return cls(conditions, folds, per_fold)

    def mean(self, condition: str, system: str) -> float:
        return float(np.mean(self.per_fold[condition][system]))

    def std(self, condition: str, system: str) -> float:
        """
        Population standard deviation over folds
        """
        return float(np.std(self.per_fold[condition][system]))

    def damage(self, condition: str, system: str, reference: str = CONDITIONS[0]) -> float:
        """
        :return: Accuracy points lost under `condition` compared with `reference`
        """
        return self.mean(reference, system) - self.mean(condition, system)

    def rows(self) -> List[List[str]]:
        return [[condition] + [f'{self.mean(condition, system):.2f} ± {self.std(condition, system):.2f}'
                               for system in SYSTEMS]
                for condition in self.conditions]

    def to_text(self) -> str:
        header = ['Condition'] + [SYSTEM_TITLES[system] for system in SYSTEMS]
        table = [header] + self.rows()
        widths = [max(len(row[column]) for row in table) for column in range(len(header))]
        lines = ['  '.join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip() for row in table]
        lines.insert(1, '  '.join('-' * width for width in widths))
        return '\n'.join(lines + [f'Classification accuracy (%) over {len(self.folds)} folds']) + '\n'

    def to_csv(self) -> str:
        output = io.StringIO()
        writer = csv.writer(output, lineterminator='\n')
        writer.writerow(['condition'] + [f'{system}_{stat}' for system in SYSTEMS for stat in ('mean', 'std')])
        for condition in self.conditions:
            writer.writerow([condition] + [f'{value:.4f}' for system in SYSTEMS
                                           for value in (self.mean(condition, system), self.std(condition, system))])
        return output.getvalue()

    def to_dict(self) -> Dict[str, Any]:
        return {
            'conditions': list(self.conditions),
            'folds': list(self.folds),
            'per_fold': {condition: {system: list(values) for system, values in systems.items()}
                         for condition, systems in self.per_fold.items()},
            'summary': {condition: {system: {'mean': self.mean(condition, system), 'std': self.std(condition, system)}
                                    for system in SYSTEMS}
                        for condition in self.conditions},
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'AccuracyReport':
        try:
            return cls(tuple(data['conditions']), tuple(data['folds']),
                       {condition: {system: tuple(values) for system, values in systems.items()}
                        for condition, systems in data['per_fold'].items()})
        except KeyError as exc:
            raise ReportException(f'Not valid report, missing {exc}') from exc
