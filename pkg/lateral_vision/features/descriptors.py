"""
Fixed-length descriptors computed on part crops: dense SIFT and HOG
"""
from dataclasses import dataclass
from logging import getLogger
from typing import NamedTuple, Optional

import numpy as np

from lateral_vision.classification.types import InputDomainError, PartKind

from .gradients import gradients
from .images import GrayImage, resize, resize_square

logger = getLogger(__name__)

# Norms below this are treated as zero vectors
ZERO_NORM = 1e-9


class FeatureProvenance(NamedTuple):
    part: Optional[PartKind]
    descriptor: str
    variant: str


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray
    provenance: FeatureProvenance

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64).ravel()
        if not np.all(np.isfinite(values)):
            raise InputDomainError(f'Feature vector {self.provenance} contains non finite values')
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    def __len__(self):
        return self.values.size

    def __eq__(self, other):
        return (isinstance(other, FeatureVector) and self.provenance == other.provenance
                and np.array_equal(self.values, other.values))

    def __hash__(self):
        return hash((self.values.tobytes(), self.provenance))


@dataclass(frozen=True)
class SiftParams:
    patch_size: int
    max_bin_value: float = 0.2
    orientation_bins: int = 8
    spatial_bins: int = 2

    def __post_init__(self):
        if self.patch_size < 2:
            raise InputDomainError(f'Not valid patch_size={self.patch_size}')
        if self.spatial_bins < 1 or self.orientation_bins < 1 or not 0 < self.max_bin_value <= 1:
            raise InputDomainError(f'Not valid sift params {self}')

    @property
    def variant(self) -> str:
        return f'sift-{self.patch_size}'

    @property
    def patch_length(self) -> int:
        return self.spatial_bins ** 2 * self.orientation_bins


@dataclass(frozen=True)
class HogParams:
    resize_to: int
    cell_size: int
    orientation_bins: int = 9
    block_cells: int = 2
    clip: float = 0.2

    def __post_init__(self):
        if self.resize_to < 2 or self.cell_size < 1:
            raise InputDomainError(f'Not valid hog params {self}')
        if self.orientation_bins < 1 or self.block_cells < 1 or not 0 < self.clip <= 1:
            raise InputDomainError(f'Not valid hog params {self}')

    @property
    def variant(self) -> str:
        return f'hog-{self.resize_to}-{self.cell_size}'

    @property
    def cells_per_side(self) -> int:
        """
        :return: Number of full cells per side, 1 in degenerate mode (cell larger than image)
        """
        return max(self.resize_to // self.cell_size, 1)

    @property
    def length(self) -> int:
        cells = self.cells_per_side
        block = min(self.block_cells, cells)
        return (cells - block + 1) ** 2 * block ** 2 * self.orientation_bins


def l2_normalize(vector: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(vector)
    if norm < ZERO_NORM:
        return np.zeros_like(vector)
    return vector / norm


def clamp_renormalize(vector: np.ndarray, max_bin_value: float) -> np.ndarray:
    """
    Normalize, clamp every bin at `max_bin_value` and renormalize. The final division never
    lets a bin grow over `max_bin_value`
    """
    clamped = np.minimum(l2_normalize(vector), max_bin_value)
    norm = np.linalg.norm(clamped)
    if norm < ZERO_NORM:
        return np.zeros_like(vector)
    return clamped / max(norm, clamped.max() / max_bin_value)


def l2_hys(vector: np.ndarray, clip: float) -> np.ndarray:
    return l2_normalize(np.minimum(l2_normalize(vector), clip))


def _orientation_weights(orientation: np.ndarray, bins: int, period: float, centered: bool) -> np.ndarray:
    """
    Linear interpolation of every pixel orientation between its two closest bins
    :param centered: bin centers at `(k + 0.5) * width` if `True`, at `k * width` otherwise
    :return: `(bins, h, w)` weights, summing to 1 on the first axis
    """
    position = orientation / (period / bins) - (0.5 if centered else 0.)
    lower = np.floor(position)
    fraction = position - lower
    lower = np.mod(lower.astype(int), bins)
    upper = np.mod(lower + 1, bins)
    bin_ids = np.arange(bins).reshape((bins,) + (1,) * orientation.ndim)
    return (lower == bin_ids) * (1. - fraction) + (upper == bin_ids) * fraction


def _spatial_weights(patch_size: int, spatial_bins: int) -> np.ndarray:
    """
    :return: `(spatial_bins, patch_size)` bilinear weight of every pixel row/column to every bin center
    """
    bin_width = patch_size / spatial_bins
    centers = (np.arange(spatial_bins) + 0.5) * bin_width - 0.5
    distances = np.abs(np.arange(patch_size)[np.newaxis, :] - centers[:, np.newaxis]) / bin_width
    return np.maximum(1. - distances, 0.)


def sift_grid_shape(height: int, width: int, patch_size: int):
    """
    :return: `(patches_y, patches_x)` of the dense grid, at least one patch per axis
    """
    return max(int(round(height / patch_size)), 1), max(int(round(width / patch_size)), 1)


def sift_descriptor(image: GrayImage, params: SiftParams, part: Optional[PartKind] = None) -> FeatureVector:
    """
    Dense SIFT: the image is resized so an integer grid of `patch_size` patches tiles it, every
    patch gets a `spatial_bins x spatial_bins x orientation_bins` histogram of gradient magnitude
    with bilinear spatial and orientation interpolation, normalized on its own. Patches are
    concatenated row-major
    """
    patch = params.patch_size
    patches_y, patches_x = sift_grid_shape(image.height, image.width, patch)
    image = resize(image, patches_y * patch, patches_x * patch)
    grads = gradients(image, signed=True)
    orientation_weights = _orientation_weights(grads.orientation, params.orientation_bins, 2 * np.pi,
                                               centered=False)
    weighted = orientation_weights * grads.magnitude  # (o, y, x)
    spatial = _spatial_weights(patch, params.spatial_bins)

    descriptors = []
    for row in range(patches_y):
        for col in range(patches_x):
            window = weighted[:, row * patch:(row + 1) * patch, col * patch:(col + 1) * patch]
            histogram = np.einsum('ay,bx,oyx->abo', spatial, spatial, window)
            descriptors.append(clamp_renormalize(histogram.ravel(), params.max_bin_value))
    return FeatureVector(np.concatenate(descriptors), FeatureProvenance(part, 'sift', params.variant))


def hog_descriptor(image: GrayImage, params: HogParams, part: Optional[PartKind] = None) -> FeatureVector:
    """
    HOG on the image resized to `resize_to` square. Cells are aligned top-left and only full cells
    are used, a cell larger than the image degenerates to a single cell covering it. Blocks of
    `block_cells x block_cells` cells slide with stride one cell and are L2-Hys normalized
    """
    image = resize_square(image, params.resize_to)
    grads = gradients(image, signed=False)
    orientation_weights = _orientation_weights(grads.orientation, params.orientation_bins, np.pi,
                                               centered=True)
    weighted = orientation_weights * grads.magnitude

    cells = params.cells_per_side
    cell = params.cell_size if params.resize_to >= params.cell_size else params.resize_to
    histograms = np.zeros((cells, cells, params.orientation_bins))
    for row in range(cells):
        for col in range(cells):
            window = weighted[:, row * cell:(row + 1) * cell, col * cell:(col + 1) * cell]
            histograms[row, col] = window.sum(axis=(1, 2))

    block = min(params.block_cells, cells)
    blocks = []
    for row in range(cells - block + 1):
        for col in range(cells - block + 1):
            blocks.append(l2_hys(histograms[row:row + block, col:col + block].ravel(), params.clip))
    return FeatureVector(np.concatenate(blocks), FeatureProvenance(part, 'hog', params.variant))
