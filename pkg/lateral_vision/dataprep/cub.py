"""
Readers for the annotation files of the bird dataset layout:
`images.txt`, `image_class_labels.txt` and `parts/part_locs.txt`
"""
from logging import getLogger
from pathlib import Path
from typing import Dict, List, Optional, Union

from .boxes import boxes_from_keypoints
from .synthetic import load_gray_image
from .types import KEYPOINT_NAMES, Keypoint, KeypointAnnotation, Specimen

logger = getLogger(__name__)


class CubFormatException(Exception):
    pass


def _rows(path: Union[str, Path], columns: int):
    with open(path) as text_file:
        for line_number, line in enumerate(text_file, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(maxsplit=columns - 1)
            if len(fields) != columns:
                raise CubFormatException(f'{path}:{line_number} expected {columns} fields, got "{line}"')
            yield fields


def read_images(path: Union[str, Path]) -> Dict[str, str]:
    """
    :return: image id -> relative image path
    """
    return {image_id: name for image_id, name in _rows(path, 2)}


def read_class_labels(path: Union[str, Path]) -> Dict[str, int]:
    """
    :return: image id -> 0-based class index (files use 1-based ids)
    """
    return {image_id: int(class_id) - 1 for image_id, class_id in _rows(path, 2)}


def read_part_locs(path: Union[str, Path]) -> Dict[str, KeypointAnnotation]:
    keypoints: Dict[str, List[Keypoint]] = {}
    for image_id, part_id, x, y, visible in _rows(path, 5):
        part_index = int(part_id) - 1
        if not 0 <= part_index < len(KEYPOINT_NAMES):
            raise CubFormatException(f'Not valid part id={part_id} for image={image_id}')
        keypoints.setdefault(image_id, []).append(Keypoint(KEYPOINT_NAMES[part_index], float(x), float(y),
                                                           bool(int(float(visible)))))
    return {image_id: KeypointAnnotation(image_id, tuple(points)) for image_id, points in keypoints.items()}


def load_cub_dataset(root: Union[str, Path], limit: Optional[int] = None) -> List[Specimen]:
    """
    Load gray images with labels, keypoints and keypoint derived part boxes
    :param root: directory holding `images/`, `images.txt`, `image_class_labels.txt` and `parts/`
    :param limit: load only the first images
    """
    root = Path(root)
    images = read_images(root / 'images.txt')
    labels = read_class_labels(root / 'image_class_labels.txt')
    annotations = read_part_locs(root / 'parts' / 'part_locs.txt')

    specimens = []
    for image_id, name in list(images.items())[:limit]:
        pixels = load_gray_image(root / 'images' / name)
        annotation = annotations.get(image_id)
        boxes = {}
        if annotation is not None:
            height, width = pixels.shape
            boxes = boxes_from_keypoints(annotation, width, height)
        else:
            logger.warning('Image=%s has no keypoint annotation', image_id)
        specimens.append(Specimen(image_id, pixels, labels.get(image_id), boxes, annotation))
    logger.info('Loaded %d images from %s', len(specimens), root)
    return specimens
