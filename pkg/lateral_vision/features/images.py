from dataclasses import dataclass
from hashlib import sha1

import numpy as np
from scipy import ndimage

from lateral_vision.classification.types import InputDomainError

# ITU-R 601 luma
LUMINANCE_WEIGHTS = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True, eq=False)
class GrayImage:
    """
    Grayscale image with pixels in [0, 1], indexed `pixels[y, x]`
    """
    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.array(self.pixels, dtype=np.float64)
        if pixels.ndim != 2:
            raise InputDomainError(f'Gray image must be 2-D, shape={pixels.shape}')
        height, width = pixels.shape
        if width < 2 or height < 2:
            raise InputDomainError(f'Gray image must be at least 2x2, shape={pixels.shape}')
        if not np.all(np.isfinite(pixels)):
            raise InputDomainError('Gray image contains non finite values')
        pixels.setflags(write=False)
        object.__setattr__(self, 'pixels', pixels)

    @classmethod
    def from_uint8(cls, array: np.ndarray) -> 'GrayImage':
        """
        :param array: `(h, w)` gray or `(h, w, 3)` RGB image on the 0-255 scale
        """
        array = np.asarray(array, dtype=np.float64)
        if array.ndim == 3:
            array = to_grayscale(array)
        return cls(array / 255.)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def checksum(self) -> str:
        return sha1(self.pixels.tobytes() + np.array(self.pixels.shape).tobytes()).hexdigest()

    def __eq__(self, other):
        return isinstance(other, GrayImage) and np.array_equal(self.pixels, other.pixels)

    def __hash__(self):
        return hash(self.checksum)


def to_grayscale(rgb: np.ndarray) -> np.ndarray:
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise InputDomainError(f'Expected a RGB image, shape={rgb.shape}')
    return rgb @ LUMINANCE_WEIGHTS


def resize(image: GrayImage, height: int, width: int) -> GrayImage:
    """
    Bilinear resize, aspect ratio is not kept. Pixel centers are aligned and samples falling
    outside the source are clamped to the border
    """
    if height < 2 or width < 2:
        raise InputDomainError(f'Cannot resize to {height}x{width}')
    if (height, width) == image.pixels.shape:
        return image
    scale_y = image.height / height
    scale_x = image.width / width
    ys = np.clip((np.arange(height) + 0.5) * scale_y - 0.5, 0, image.height - 1)
    xs = np.clip((np.arange(width) + 0.5) * scale_x - 0.5, 0, image.width - 1)
    grid_y, grid_x = np.meshgrid(ys, xs, indexing='ij')
    resized = ndimage.map_coordinates(image.pixels, [grid_y, grid_x], order=1, mode='nearest')
    return GrayImage(resized)


def resize_square(image: GrayImage, side: int) -> GrayImage:
    return resize(image, side, side)
