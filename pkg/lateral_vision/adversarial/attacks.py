"""
Gradient sign attacks on models differentiable with respect to the image pixels (0-255 scale)
"""
from dataclasses import dataclass, replace
from enum import Enum
from logging import getLogger
from typing import Dict, Optional

import numpy as np

from lateral_vision.classification.types import InputDomainError
from lateral_vision.predictors.base import DifferentiablePredictor, UnsupportedModel

logger = getLogger(__name__)

PIXEL_MIN = 0.
PIXEL_MAX = 255.
EPSILON_SCALES = ('pixel', 'unit')


class AttackKind(Enum):
    FGSM = 'fgsm'
    ITERATIVE = 'iterative'


class NotValidAttackParams(InputDomainError):
    pass


@dataclass(frozen=True)
class AttackParams:
    kind: AttackKind
    epsilon: float
    alpha: Optional[float] = None
    iterations: Optional[int] = None
    name: str = ''

    def __post_init__(self):
        if not self.epsilon > 0:
            raise NotValidAttackParams(f'Epsilon must be positive, epsilon={self.epsilon}')
        if self.kind is AttackKind.ITERATIVE:
            if self.alpha is None or not self.alpha > 0:
                raise NotValidAttackParams(f'Iterative attack needs a positive alpha, alpha={self.alpha}')
            if self.iterations is None or self.iterations < 1:
                raise NotValidAttackParams(f'Iterative attack needs iterations >= 1, '
                                           f'iterations={self.iterations}')

    @property
    def budget(self) -> float:
        """
        :return: Max L∞ distance an adversarial image can reach from its source
        """
        if self.kind is AttackKind.ITERATIVE:
            return min(self.epsilon, self.alpha * self.iterations)
        return self.epsilon

    def to_pixel_scale(self, epsilon_scale: str = 'pixel') -> 'AttackParams':
        """
        :param epsilon_scale: `pixel` if epsilon and alpha are on the 0-255 scale, `unit` if on 0-1
        """
        if epsilon_scale not in EPSILON_SCALES:
            raise NotValidAttackParams(f'Not valid epsilon scale={epsilon_scale}, use one of {EPSILON_SCALES}')
        if epsilon_scale == 'pixel':
            return self
        return replace(self, epsilon=self.epsilon * PIXEL_MAX,
                       alpha=None if self.alpha is None else self.alpha * PIXEL_MAX)

    def on_scale(self, epsilon_scale: str) -> 'AttackParams':
        """
        Inverse of `to_pixel_scale`, for params given on the 0-255 scale
        """
        if epsilon_scale not in EPSILON_SCALES:
            raise NotValidAttackParams(f'Not valid epsilon scale={epsilon_scale}, use one of {EPSILON_SCALES}')
        if epsilon_scale == 'pixel':
            return self
        return replace(self, epsilon=self.epsilon / PIXEL_MAX,
                       alpha=None if self.alpha is None else self.alpha / PIXEL_MAX)

    def to_dict(self) -> Dict:
        return {'name': self.name, 'kind': self.kind.value, 'epsilon': self.epsilon, 'alpha': self.alpha,
                'iterations': self.iterations}


PRESETS: Dict[str, AttackParams] = {
    'FGSM-M': AttackParams(AttackKind.FGSM, 50., name='FGSM-M'),
    'FGSM-S': AttackParams(AttackKind.FGSM, 150., name='FGSM-S'),
    'Itr-M': AttackParams(AttackKind.ITERATIVE, 18., alpha=1., iterations=10, name='Itr-M'),
    'Itr-S': AttackParams(AttackKind.ITERATIVE, 50., alpha=1., iterations=10, name='Itr-S'),
}


def get_preset(name: str, epsilon_scale: str = 'pixel') -> AttackParams:
    """
    :param epsilon_scale: scale of the returned epsilon and alpha, presets are defined on the 0-255 scale
    """
    try:
        preset = PRESETS[name]
    except KeyError:
        raise NotValidAttackParams(f'Unknown attack preset={name}, use one of {list(PRESETS)}')
    return preset.on_scale(epsilon_scale)


def _check_model(model: DifferentiablePredictor):
    if not getattr(model, 'differentiable', False):
        raise UnsupportedModel(f'Model {model.__class__.__name__} is not differentiable wrt the image')


def _check_image(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if np.any(x < PIXEL_MIN) or np.any(x > PIXEL_MAX):
        raise InputDomainError('Image pixels must be on the [0, 255] scale')
    return x


def fgsm(x: np.ndarray, label: int, model: DifferentiablePredictor, epsilon: float) -> np.ndarray:
    """
    One step of size `epsilon` along the sign of the loss gradient. Pixels with a zero
    gradient are not changed
    :return: `clip(x + epsilon * sign(∇x L(x, label)), 0, 255)`
    """
    _check_model(model)
    x = _check_image(x)
    gradient = model.input_gradient(x, label)
    return np.clip(x + epsilon * np.sign(gradient), PIXEL_MIN, PIXEL_MAX)


def iterative_attack(x: np.ndarray, label: int, model: DifferentiablePredictor, epsilon: float, alpha: float,
                     iterations: int) -> np.ndarray:
    """
    `iterations` steps of size `alpha`, every step clipped to the pixel range and projected into the
    L∞ ball of radius `epsilon` around `x`
    """
    _check_model(model)
    x = _check_image(x)
    lower, upper = x - epsilon, x + epsilon
    adversarial = x.copy()
    for _ in range(iterations):
        gradient = model.input_gradient(adversarial, label)
        stepped = np.clip(adversarial + alpha * np.sign(gradient), PIXEL_MIN, PIXEL_MAX)
        adversarial = np.clip(stepped, lower, upper)
    return adversarial


def attack(x: np.ndarray, label: int, model: DifferentiablePredictor, params: AttackParams) -> np.ndarray:
    """
    :param params: on the pixel scale
    """
    if params.kind is AttackKind.FGSM:
        return fgsm(x, label, model, params.epsilon)
    return iterative_attack(x, label, model, params.epsilon, params.alpha, params.iterations)
