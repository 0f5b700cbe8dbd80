from typing import NamedTuple

import numpy as np

from .images import GrayImage

TWO_PI = 2 * np.pi


class Gradients(NamedTuple):
    magnitude: np.ndarray
    orientation: np.ndarray  # Radians


def image_derivatives(image: GrayImage):
    """
    Central differences in the interior, one-sided differences on the borders
    :return: `(dx, dy)`
    """
    dy, dx = np.gradient(image.pixels)
    return dx, dy


def gradients(image: GrayImage, signed: bool = False) -> Gradients:
    """
    :param image:
    :param signed: orientation in [0, 2π) if `True` (SIFT), in [0, π) otherwise (HOG)
    :return: Per pixel magnitude and orientation
    """
    dx, dy = image_derivatives(image)
    magnitude = np.hypot(dx, dy)
    period = TWO_PI if signed else np.pi
    orientation = np.mod(np.arctan2(dy, dx), period)
    # `mod` can return `period` itself for tiny negative angles
    orientation[orientation >= period] = 0.
    return Gradients(magnitude, orientation)
