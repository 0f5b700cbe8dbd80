"""
Desk-scale stand-in of a fine-grained bird dataset: every class is defined by the shape and intensity
of four parts placed on the quadrants of a small gray image.
"""
import csv
from dataclasses import dataclass
from logging import getLogger
from pathlib import Path
from typing import Callable, Dict, List, Tuple, Union

import numpy as np
from PIL import Image

from lateral_vision.classification.types import InputDomainError, PartKind

from .types import (KEYPOINT_NAMES, BoxSource, Keypoint, KeypointAnnotation,
                    PartBox, Specimen)

logger = getLogger(__name__)

# Synthetic part -> (part kind, keypoint name, quadrant (row, col))
SYNTHETIC_PARTS: Dict[str, Tuple[PartKind, str, Tuple[int, int]]] = {
    'head': (PartKind.CROWN, 'crown', (0, 0)),
    'wing': (PartKind.WING, 'left wing', (0, 1)),
    'body': (PartKind.BREAST, 'breast', (1, 0)),
    'tail': (PartKind.TAIL, 'tail', (1, 1)),
}
SYNTHETIC_PART_KINDS: Tuple[PartKind, ...] = tuple(part for part, _, _ in SYNTHETIC_PARTS.values())


def _disk(yy, xx, r):
    return yy ** 2 + xx ** 2 <= r ** 2


def _square(yy, xx, r):
    return (np.abs(yy) <= r * 0.8) & (np.abs(xx) <= r * 0.8)


def _triangle(yy, xx, r):
    return (yy <= r * 0.9) & (yy >= -r * 0.9) & (np.abs(xx) <= (yy + r * 0.9) / 2.)


def _ring(yy, xx, r):
    distance = yy ** 2 + xx ** 2
    return (distance <= r ** 2) & (distance >= (r * 0.5) ** 2)


def _cross(yy, xx, r):
    return ((np.abs(yy) <= r * 0.3) | (np.abs(xx) <= r * 0.3)) & (np.abs(yy) <= r) & (np.abs(xx) <= r)


def _diamond(yy, xx, r):
    return np.abs(yy) + np.abs(xx) <= r


def _hbar(yy, xx, r):
    return (np.abs(yy) <= r * 0.35) & (np.abs(xx) <= r)


def _vbar(yy, xx, r):
    return (np.abs(xx) <= r * 0.35) & (np.abs(yy) <= r)


SHAPES: Dict[str, Callable] = {
    'disk': _disk,
    'square': _square,
    'triangle': _triangle,
    'ring': _ring,
    'cross': _cross,
    'diamond': _diamond,
    'hbar': _hbar,
    'vbar': _vbar,
}
SHAPE_NAMES: Tuple[str, ...] = tuple(SHAPES)


@dataclass(frozen=True)
class SyntheticSpec:
    n_classes: int = 8
    image_size: int = 32
    part_size: int = 10
    jitter: int = 2
    noise: float = 8.  # Std of the gaussian noise, 0-255 scale
    background: float = 30.
    seed: int = 0

    def __post_init__(self):
        if self.n_classes < 1:
            raise InputDomainError(f'Not valid n_classes={self.n_classes}')
        quadrant = self.image_size // 2
        if self.part_size + 2 * self.jitter + 2 > quadrant:
            raise InputDomainError(f'Parts of {self.part_size}px with jitter {self.jitter} do not fit '
                                   f'a {self.image_size}px image')
        if self.noise < 0:
            raise InputDomainError(f'Not valid noise={self.noise}')


def class_appearances(spec: SyntheticSpec) -> Dict[Tuple[int, str], Tuple[str, float]]:
    """
    :return: `(class, part) -> (shape, intensity)`. Shapes of one part are all different while there
    are not more classes than shapes
    """
    rng = np.random.default_rng([spec.seed, 0])
    appearances = {}
    for part in SYNTHETIC_PARTS:
        permutation = rng.permutation(len(SHAPE_NAMES))
        intensities = rng.uniform(120., 255., size=spec.n_classes)
        for label in range(spec.n_classes):
            appearances[(label, part)] = (SHAPE_NAMES[permutation[label % len(SHAPE_NAMES)]],
                                          float(intensities[label]))
    return appearances


def render_part(canvas: np.ndarray, shape: str, intensity: float, center_y: float, center_x: float, radius: float):
    height, width = canvas.shape
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    mask = SHAPES[shape](yy - center_y, xx - center_x, radius)
    canvas[mask] = intensity
    return mask


def generate_synthetic(spec: SyntheticSpec, n_images: int) -> List[Specimen]:
    """
    Images with the class parts at jittered positions, exact part boxes and keypoints at the part
    centers. Labels are balanced within one image per class
    """
    if n_images < 0:
        raise InputDomainError(f'Not valid n_images={n_images}')
    appearances = class_appearances(spec)
    rng = np.random.default_rng([spec.seed, 1])
    labels = rng.permutation(np.arange(n_images) % spec.n_classes)
    quadrant = spec.image_size // 2
    radius = (spec.part_size - 1) / 2.
    half_box = spec.part_size / 2. + 1.

    specimens = []
    for index, label in enumerate(labels):
        label = int(label)
        canvas = np.full((spec.image_size, spec.image_size), spec.background)
        boxes = {}
        keypoints = []
        for part, (part_kind, keypoint_name, (row, col)) in SYNTHETIC_PARTS.items():
            jitter_y, jitter_x = (int(value) for value in rng.integers(-spec.jitter, spec.jitter + 1, size=2))
            center_y = row * quadrant + quadrant / 2. - 0.5 + jitter_y
            center_x = col * quadrant + quadrant / 2. - 0.5 + jitter_x
            shape, intensity = appearances[(label, part)]
            render_part(canvas, shape, intensity, center_y, center_x, radius)
            # Pixel `i` covers [i, i + 1)
            boxes[part_kind] = PartBox(part_kind, center_x + 0.5 - half_box, center_y + 0.5 - half_box,
                                       center_x + 0.5 + half_box, center_y + 0.5 + half_box, BoxSource.SYNTHETIC)
            keypoints.append(Keypoint(keypoint_name, center_x + 0.5, center_y + 0.5, True))

        if spec.noise:
            canvas = canvas + rng.normal(0., spec.noise, size=canvas.shape)
        pixels = np.clip(np.rint(canvas), 0, 255)
        image_id = f'synth-{index:05d}'
        visible = {keypoint.name for keypoint in keypoints}
        keypoints += [Keypoint(name, 0., 0., False) for name in KEYPOINT_NAMES if name not in visible]
        specimens.append(Specimen(image_id, pixels, label, boxes, KeypointAnnotation(image_id, tuple(keypoints))))
    logger.info('Generated %d synthetic images of %d classes', n_images, spec.n_classes)
    return specimens


def write_dataset(directory: Union[str, Path], specimens: List[Specimen]) -> Path:
    """
    Store images as PNG files plus `labels.csv`, `parts.csv` and `keypoints.csv`
    """
    directory = Path(directory)
    images_directory = directory / 'images'
    images_directory.mkdir(parents=True, exist_ok=True)

    with open(directory / 'labels.csv', 'w', newline='') as labels_file, \
            open(directory / 'parts.csv', 'w', newline='') as parts_file, \
            open(directory / 'keypoints.csv', 'w', newline='') as keypoints_file:
        labels_writer = csv.writer(labels_file)
        parts_writer = csv.writer(parts_file)
        keypoints_writer = csv.writer(keypoints_file)
        labels_writer.writerow(['image_id', 'label'])
        parts_writer.writerow(['image_id', 'part', 'x0', 'y0', 'x1', 'y1', 'source'])
        keypoints_writer.writerow(['image_id', 'keypoint', 'x', 'y', 'visible'])
        for specimen in specimens:
            save_png(images_directory / f'{specimen.image_id}.png', specimen.pixels)
            labels_writer.writerow([specimen.image_id, '' if specimen.label is None else specimen.label])
            for part, box in specimen.boxes.items():
                coordinates = [repr(float(value)) for value in (box.x0, box.y0, box.x1, box.y1)]
                parts_writer.writerow([specimen.image_id, part.value] + coordinates + [box.source.value])
            for keypoint in (specimen.keypoints.keypoints if specimen.keypoints else ()):
                keypoints_writer.writerow([specimen.image_id, keypoint.name, repr(float(keypoint.x)),
                                           repr(float(keypoint.y)), int(keypoint.visible)])
    logger.info('Stored %d images on %s', len(specimens), directory)
    return directory


def read_dataset(directory: Union[str, Path]) -> List[Specimen]:
    directory = Path(directory)
    boxes: Dict[str, Dict[PartKind, PartBox]] = {}
    keypoints: Dict[str, List[Keypoint]] = {}
    with open(directory / 'parts.csv', newline='') as parts_file:
        for row in csv.DictReader(parts_file):
            part = PartKind(row['part'])
            boxes.setdefault(row['image_id'], {})[part] = PartBox(part, float(row['x0']), float(row['y0']),
                                                                  float(row['x1']), float(row['y1']),
                                                                  BoxSource(row['source']))
    keypoints_path = directory / 'keypoints.csv'
    if keypoints_path.exists():
        with open(keypoints_path, newline='') as keypoints_file:
            for row in csv.DictReader(keypoints_file):
                keypoints.setdefault(row['image_id'], []).append(
                    Keypoint(row['keypoint'], float(row['x']), float(row['y']), bool(int(row['visible']))))

    specimens = []
    with open(directory / 'labels.csv', newline='') as labels_file:
        for row in csv.DictReader(labels_file):
            image_id = row['image_id']
            annotation = (KeypointAnnotation(image_id, tuple(keypoints[image_id]))
                          if image_id in keypoints else None)
            specimens.append(Specimen(image_id, load_gray_image(directory / 'images' / f'{image_id}.png'),
                                      int(row['label']) if row['label'] else None,
                                      boxes.get(image_id, {}), annotation))
    return specimens


def save_png(path: Union[str, Path], pixels: np.ndarray):
    Image.fromarray(np.clip(np.rint(pixels), 0, 255).astype(np.uint8)).save(path, format='PNG')


def load_gray_image(path: Union[str, Path]) -> np.ndarray:
    with Image.open(path) as image:
        return np.asarray(image.convert('L'), dtype=np.float64)
