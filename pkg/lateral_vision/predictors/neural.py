from logging import getLogger
from typing import List, Optional, Sequence

import numpy as np

from lateral_vision.classification.types import PartKind, ProbabilityVector
from lateral_vision.dataprep.boxes import crop_pixels
from lateral_vision.dataprep.types import PartBox, Specimen
from lateral_vision.features.images import GrayImage, resize_square
from lateral_vision.features.services import ExtractionCounter

from .base import DifferentiablePredictor, UnsupportedModel
from .toynet import ToyNet

logger = getLogger(__name__)

PIXEL_SCALE = 255.
DEFAULT_PART_SIDE = 12


def part_input(pixels: np.ndarray, box: Optional[PartBox], side: int) -> Optional[np.ndarray]:
    """
    :return: Part crop resized to `side` square and flattened on the 0-1 scale, `None` if it cannot be cropped
    """
    if box is None:
        return None
    cropped = crop_pixels(pixels, box)
    if cropped is None:
        return None
    return resize_square(GrayImage(cropped / PIXEL_SCALE), side).pixels.ravel()


def whole_image_input(pixels: np.ndarray) -> np.ndarray:
    return np.asarray(pixels, dtype=np.float64).ravel() / PIXEL_SCALE


class ToyNetPredictor(DifferentiablePredictor):
    """
    ToyNet fed with the whole image or with one part crop. Only the whole image mode is
    differentiable with respect to the image pixels
    """
    def __init__(self, net: ToyNet, part: PartKind = PartKind.WHOLE_IMAGE, side: int = DEFAULT_PART_SIDE):
        self.net = net
        self.part = part
        self.side = side
        self.n_classes = net.n_classes

    @property
    def differentiable(self) -> bool:
        return self.part.is_holistic

    @property
    def checksum(self) -> str:
        return self.net.checksum

    def inputs(self, specimen: Specimen, box: Optional[PartBox] = None) -> Optional[np.ndarray]:
        if self.part.is_holistic:
            return whole_image_input(specimen.pixels)
        return part_input(specimen.pixels, box if box is not None else specimen.boxes.get(self.part), self.side)

    def training_matrix(self, specimens: Sequence[Specimen]):
        """
        :return: `(X, y)` of the specimens that can be fed to the net
        """
        rows: List[np.ndarray] = []
        labels: List[int] = []
        for specimen in specimens:
            x = self.inputs(specimen)
            if x is None:
                logger.warning('Image=%s has no usable %s for training', specimen.image_id, self.part.value)
                continue
            rows.append(x)
            labels.append(specimen.label)
        return np.array(rows).reshape(len(rows), -1), np.array(labels, dtype=np.int64)

    def predict_proba(self, specimen: Specimen, part: PartKind, box: Optional[PartBox] = None,
                      counter: Optional[ExtractionCounter] = None) -> Optional[ProbabilityVector]:
        x = self.inputs(specimen, box)
        if x is None:
            return None
        return self.net.forward(x)

    def _check_differentiable(self):
        if not self.differentiable:
            raise UnsupportedModel(f'ToyNet for part={self.part.value} is not differentiable wrt the image')

    def loss(self, pixels: np.ndarray, label: int) -> float:
        self._check_differentiable()
        return self.net.loss(whole_image_input(pixels), label)

    def input_gradient(self, pixels: np.ndarray, label: int) -> np.ndarray:
        """
        :return: `∂L/∂pixels` on the 0-255 scale
        """
        self._check_differentiable()
        pixels = np.asarray(pixels, dtype=np.float64)
        return (self.net.input_gradient(whole_image_input(pixels), label) / PIXEL_SCALE).reshape(pixels.shape)
