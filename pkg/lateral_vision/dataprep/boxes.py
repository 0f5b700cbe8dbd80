from itertools import combinations
from logging import getLogger
from typing import Dict, Mapping, Optional

import numpy as np

from lateral_vision.classification.types import PartKind
from lateral_vision.features.images import GrayImage, resize

from .types import (FACE_KEYPOINTS, KEYPOINT_NAMES, KEYPOINT_PARTS, BoxSource, Keypoint,
                    KeypointAnnotation, PartBox, Specimen)

logger = getLogger(__name__)

DEFAULT_BOX_RATIO = 0.25
FACE_PADDING = 0.2
# Smallest crop, in pixels per side, that can still be described
MIN_CROP_SIDE = 2


def bird_extent(annotation: KeypointAnnotation) -> Optional[float]:
    """
    :return: Max distance between two visible keypoints, `None` with less than 2 of them
    """
    points = [(keypoint.x, keypoint.y) for keypoint in annotation.visible]
    if len(points) < 2:
        return None
    return max(float(np.hypot(a[0] - b[0], a[1] - b[1])) for a, b in combinations(points, 2))


def _square_box(part: PartKind, x: float, y: float, side: float, source: BoxSource) -> PartBox:
    half = side / 2.
    return PartBox(part, x - half, y - half, x + half, y + half, source)


def boxes_from_keypoints(annotation: KeypointAnnotation, width: int, height: int,
                         ratios: Optional[Mapping[PartKind, float]] = None,
                         face_padding: float = FACE_PADDING,
                         source: BoxSource = BoxSource.GROUND_TRUTH,
                         clip: bool = True) -> Dict[PartKind, PartBox]:
    """
    Every visible keypoint gets a square box centered on it with side `ratio * bird extent`. Left
    and right eyes and wings collapse to one box, the visible instance wins and the left one on ties.
    The face box spans the visible eyes, beak and crown, padded `face_padding` and never smaller
    than a regular box
    :param annotation:
    :param width: image width
    :param height: image height
    :param ratios: per part box ratio, `DEFAULT_BOX_RATIO` for missing parts
    :param face_padding:
    :param source:
    :param clip: clip boxes to the image, boxes left empty are dropped
    :return: Boxes per part, empty if the extent is not defined
    """
    annotation.check_bounds(width, height)
    ratios = ratios or {}
    extent = bird_extent(annotation)
    if extent is None:
        logger.warning('Image=%s has less than 2 visible keypoints, no part box generated', annotation.image_id)
        return {}

    boxes: Dict[PartKind, PartBox] = {}
    for keypoint in sorted(annotation.visible, key=lambda k: KEYPOINT_NAMES.index(k.name)):  # Left before right
        part = KEYPOINT_PARTS.get(keypoint.name)
        if part is None or part in boxes:
            continue
        side = ratios.get(part, DEFAULT_BOX_RATIO) * extent
        if side > 0:
            boxes[part] = _square_box(part, keypoint.x, keypoint.y, side, source)

    face_points = [annotation.get(name) for name in FACE_KEYPOINTS]
    face_points = [keypoint for keypoint in face_points if keypoint is not None and keypoint.visible]
    if face_points:
        xs = [keypoint.x for keypoint in face_points]
        ys = [keypoint.y for keypoint in face_points]
        minimum_side = ratios.get(PartKind.FACE, DEFAULT_BOX_RATIO) * extent
        face_width = max((max(xs) - min(xs)) * (1. + face_padding), minimum_side)
        face_height = max((max(ys) - min(ys)) * (1. + face_padding), minimum_side)
        center_x, center_y = (max(xs) + min(xs)) / 2., (max(ys) + min(ys)) / 2.
        if face_width > 0 and face_height > 0:
            boxes[PartKind.FACE] = PartBox(PartKind.FACE, center_x - face_width / 2., center_y - face_height / 2.,
                                           center_x + face_width / 2., center_y + face_height / 2., source)

    if not clip:
        return boxes

    clipped = {}
    for part, box in boxes.items():
        clipped_box = box.clipped(width, height)
        if clipped_box is None:
            logger.warning('Image=%s box for part=%s falls outside the image', annotation.image_id, part.value)
        else:
            clipped[part] = clipped_box
    return clipped


def pixel_bounds(box: PartBox, width: int, height: int):
    """
    :return: Integer `(x0, y0, x1, y1)` covering the box, clipped to the image
    """
    x0 = max(int(np.floor(box.x0)), 0)
    y0 = max(int(np.floor(box.y0)), 0)
    x1 = min(int(np.ceil(box.x1)), width)
    y1 = min(int(np.ceil(box.y1)), height)
    return x0, y0, x1, y1


def crop_pixels(pixels: np.ndarray, box: PartBox) -> Optional[np.ndarray]:
    """
    :return: Sub-array of the intersection of the box and the image, `None` if it is not at least 2x2
    """
    height, width = pixels.shape[:2]
    x0, y0, x1, y1 = pixel_bounds(box, width, height)
    if x1 - x0 < MIN_CROP_SIDE or y1 - y0 < MIN_CROP_SIDE:
        return None
    return pixels[y0:y1, x0:x1]


def crop(image: GrayImage, box: PartBox) -> Optional[GrayImage]:
    """
    Segment a part, resizing is left to the descriptors
    :return: Cropped image, `None` for a missing part (degenerate box)
    """
    cropped = crop_pixels(image.pixels, box)
    if cropped is None:
        logger.debug('Degenerate crop for part=%s %s', box.part.value, box)
        return None
    return GrayImage(cropped)


def resize_specimen(specimen: Specimen, side: int) -> Specimen:
    """
    Bilinear resize of the image to a `side` square, boxes and keypoints follow
    """
    scale_x, scale_y = side / specimen.width, side / specimen.height
    pixels = np.clip(resize(GrayImage(specimen.pixels), side, side).pixels, 0., 255.)
    boxes = {part: PartBox(part, box.x0 * scale_x, box.y0 * scale_y, box.x1 * scale_x, box.y1 * scale_y, box.source)
             for part, box in specimen.boxes.items()}
    keypoints = None
    if specimen.keypoints is not None:
        keypoints = KeypointAnnotation(specimen.image_id, tuple(
            Keypoint(keypoint.name, keypoint.x * scale_x, keypoint.y * scale_y, keypoint.visible)
            for keypoint in specimen.keypoints.keypoints))
    return Specimen(specimen.image_id, pixels, specimen.label, boxes, keypoints)
