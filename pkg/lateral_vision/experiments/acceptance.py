"""
Desk-scale checks of a finished run: robustness under the iterative attack, clean parity with the
holistic baseline, attack ordering and inhibit efficiency
"""
from typing import Any, Dict, List, NamedTuple, Sequence

from .report import AccuracyReport
from .types import BASELINE, LATERAL, ORIGINAL, SYSTEMS

ROBUSTNESS_MARGIN = 10.  # Accuracy points of the lateralized system over the baseline under Itr-M
CLEAN_PARITY = 5.  # Max accuracy points between both systems on clean images
INHIBIT_FRACTION = .5  # Min fraction of clean test images decided on the context phase only


class AcceptanceCheck(NamedTuple):
    name: str
    passed: bool
    detail: str

    def to_dict(self) -> Dict[str, Any]:
        return self._asdict()


def _missing(name: str, *conditions: str) -> AcceptanceCheck:
    return AcceptanceCheck(name, False, f'Run has no {" / ".join(conditions)} condition')


def check_robustness(report: AccuracyReport, condition: str = 'Itr-M') -> AcceptanceCheck:
    name = 'robustness_margin'
    if condition not in report.conditions:
        return _missing(name, condition)
    margin = report.mean(condition, LATERAL) - report.mean(condition, BASELINE)
    return AcceptanceCheck(name, margin >= ROBUSTNESS_MARGIN,
                           f'{condition} lateralized - holistic = {margin:.2f} points, needs >= {ROBUSTNESS_MARGIN}')


def check_clean_parity(report: AccuracyReport) -> AcceptanceCheck:
    name = 'clean_parity'
    if ORIGINAL not in report.conditions:
        return _missing(name, ORIGINAL)
    gap = abs(report.mean(ORIGINAL, LATERAL) - report.mean(ORIGINAL, BASELINE))
    return AcceptanceCheck(name, gap <= CLEAN_PARITY,
                           f'{ORIGINAL} |lateralized - holistic| = {gap:.2f} points, needs <= {CLEAN_PARITY}')


def check_attack_ordering(report: AccuracyReport, weaker: str = 'Itr-M', stronger: str = 'Itr-S') -> AcceptanceCheck:
    name = 'attack_ordering'
    if not {ORIGINAL, weaker, stronger} <= set(report.conditions):
        return _missing(name, ORIGINAL, weaker, stronger)
    details, passed = [], True
    for system in SYSTEMS:
        weaker_damage, stronger_damage = report.damage(weaker, system), report.damage(stronger, system)
        passed &= stronger_damage >= weaker_damage
        details.append(f'{system} damage {stronger}={stronger_damage:.2f} {weaker}={weaker_damage:.2f}')
    return AcceptanceCheck(name, passed, ', '.join(details))


def check_inhibit_efficiency(outcomes: Sequence[Dict[str, Any]]) -> AcceptanceCheck:
    name = 'inhibit_efficiency'
    clean = [outcome for outcome in outcomes if outcome['condition'] == ORIGINAL]
    if not clean:
        return _missing(name, ORIGINAL)
    inhibited = [outcome for outcome in clean if outcome['signal'] == 'inhibit']
    leaking = [outcome['image_id'] for outcome in inhibited if outcome['feature_extractions']]
    fraction = len(inhibited) / len(clean)
    detail = f'{len(inhibited)}/{len(clean)} clean images inhibited ({fraction:.2%}), needs >= {INHIBIT_FRACTION:.0%}'
    if leaking:
        detail += f', inhibited images with extractions {leaking[:5]}'
    return AcceptanceCheck(name, fraction >= INHIBIT_FRACTION and not leaking, detail)


def check_acceptance(report: AccuracyReport, outcomes: Sequence[Dict[str, Any]]) -> List[AcceptanceCheck]:
    return [
        check_robustness(report),
        check_clean_parity(report),
        check_attack_ordering(report),
        check_inhibit_efficiency(outcomes),
    ]
