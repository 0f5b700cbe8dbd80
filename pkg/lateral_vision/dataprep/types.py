from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, NamedTuple, Optional, Tuple

import numpy as np

from lateral_vision.classification.types import InputDomainError, PartKind

# Order of the part ids 1..15 of the bird annotations
KEYPOINT_NAMES: Tuple[str, ...] = ('back', 'beak', 'belly', 'breast', 'crown', 'forehead', 'left eye', 'left leg',
                                   'left wing', 'nape', 'right eye', 'right leg', 'right wing', 'tail', 'throat')

KEYPOINT_PARTS: Dict[str, PartKind] = {
    'back': PartKind.BACK,
    'beak': PartKind.BEAK,
    'belly': PartKind.BELLY,
    'breast': PartKind.BREAST,
    'crown': PartKind.CROWN,
    'forehead': PartKind.FOREHEAD,
    'left eye': PartKind.EYE,
    'right eye': PartKind.EYE,
    'left wing': PartKind.WING,
    'right wing': PartKind.WING,
    'nape': PartKind.NAPE,
    'tail': PartKind.TAIL,
    'throat': PartKind.THROAT,
}  # Legs are not used

FACE_KEYPOINTS: Tuple[str, ...] = ('left eye', 'right eye', 'beak', 'crown')


class BoxSource(Enum):
    GROUND_TRUTH = 'ground_truth'
    PREDICTED = 'predicted'
    SYNTHETIC = 'synthetic'


class Keypoint(NamedTuple):
    name: str
    x: float
    y: float
    visible: bool


@dataclass(frozen=True)
class KeypointAnnotation:
    image_id: str
    keypoints: Tuple[Keypoint, ...]

    def __post_init__(self):
        names = [keypoint.name for keypoint in self.keypoints]
        unknown = set(names) - set(KEYPOINT_NAMES)
        if unknown:
            raise InputDomainError(f'Image={self.image_id} has unknown keypoints {sorted(unknown)}')
        if len(set(names)) != len(names):
            raise InputDomainError(f'Image={self.image_id} has duplicated keypoints')

    @property
    def visible(self) -> Tuple[Keypoint, ...]:
        return tuple(keypoint for keypoint in self.keypoints if keypoint.visible)

    def get(self, name: str) -> Optional[Keypoint]:
        for keypoint in self.keypoints:
            if keypoint.name == name:
                return keypoint
        return None

    def check_bounds(self, width: int, height: int):
        for keypoint in self.visible:
            if not (0 <= keypoint.x <= width and 0 <= keypoint.y <= height):
                raise InputDomainError(f'Image={self.image_id} keypoint {keypoint.name} at ({keypoint.x}, '
                                       f'{keypoint.y}) out of {width}x{height}')


@dataclass(frozen=True)
class PartBox:
    part: PartKind
    x0: float
    y0: float
    x1: float
    y1: float
    source: BoxSource = BoxSource.GROUND_TRUTH

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise InputDomainError(f'Degenerate box for part={self.part.value} '
                                   f'({self.x0}, {self.y0}, {self.x1}, {self.y1})')

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def center(self) -> Tuple[float, float]:
        return (self.x0 + self.x1) / 2., (self.y0 + self.y1) / 2.

    def shifted(self, dx: float, dy: float) -> 'PartBox':
        return PartBox(self.part, self.x0 + dx, self.y0 + dy, self.x1 + dx, self.y1 + dy, self.source)

    def clipped(self, width: int, height: int) -> Optional['PartBox']:
        """
        :return: Intersection with the image, `None` if empty
        """
        x0, y0 = max(self.x0, 0.), max(self.y0, 0.)
        x1, y1 = min(self.x1, float(width)), min(self.y1, float(height))
        if x0 >= x1 or y0 >= y1:
            return None
        return PartBox(self.part, x0, y0, x1, y1, self.source)

    def within(self, width: int, height: int) -> bool:
        return self.x0 >= 0 and self.y0 >= 0 and self.x1 <= width and self.y1 <= height


@dataclass(frozen=True, eq=False)
class Specimen:
    """
    One image of a dataset, gray pixels on the 0-255 scale indexed `pixels[y, x]`
    """
    image_id: str
    pixels: np.ndarray
    label: Optional[int] = None
    boxes: Dict[PartKind, PartBox] = field(default_factory=dict)
    keypoints: Optional[KeypointAnnotation] = None

    def __post_init__(self):
        pixels = np.array(self.pixels, dtype=np.float64)
        if pixels.ndim != 2 or min(pixels.shape) < 2:
            raise InputDomainError(f'Image={self.image_id} must be a 2-D gray image, shape={pixels.shape}')
        if np.any(pixels < 0.) or np.any(pixels > 255.):
            raise InputDomainError(f'Image={self.image_id} pixels out of [0, 255]')
        pixels.setflags(write=False)
        object.__setattr__(self, 'pixels', pixels)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def with_pixels(self, pixels: np.ndarray) -> 'Specimen':
        """
        :return: Same specimen with other pixels, used for adversarial copies
        """
        return Specimen(self.image_id, pixels, self.label, dict(self.boxes), self.keypoints)

    def __eq__(self, other):
        return (isinstance(other, Specimen) and self.image_id == other.image_id and self.label == other.label
                and self.boxes == other.boxes and np.array_equal(self.pixels, other.pixels))

    def __hash__(self):
        return hash((self.image_id, self.pixels.tobytes()))
