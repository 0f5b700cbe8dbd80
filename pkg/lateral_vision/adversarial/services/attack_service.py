import json
from concurrent.futures import ThreadPoolExecutor
from hashlib import sha1
from logging import getLogger
from pathlib import Path
from typing import Any, Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from lateral_vision.dataprep.synthetic import save_png
from lateral_vision.dataprep.types import Specimen
from lateral_vision.predictors.base import DifferentiablePredictor

from ..attacks import AttackParams, attack

logger = getLogger(__name__)

MANIFEST_VERSION = '1.0.0'


class AttackServiceException(Exception):
    pass


class SplitLeakage(AttackServiceException):
    pass


class ImageRecord(NamedTuple):
    image_id: str
    label: int
    linf: float
    loss_before: float
    loss_after: float

    @property
    def loss_increased(self) -> bool:
        return self.loss_after > self.loss_before

    def to_dict(self) -> Dict[str, Any]:
        return dict(self._asdict(), loss_increased=self.loss_increased)


class AttackResult(NamedTuple):
    specimens: List[Specimen]
    manifest: Dict[str, Any]


def pixels_checksum(pixels: np.ndarray) -> str:
    return sha1(np.ascontiguousarray(pixels, dtype=np.float64).tobytes()).hexdigest()


class AttackService:
    def __init__(self, epsilon_scale: str = 'pixel', jobs: int = 1):
        self.epsilon_scale = epsilon_scale
        self.jobs = jobs

    def check_leakage(self, test_split: Sequence[Specimen], train_split: Iterable[Specimen]):
        """
        :raises SplitLeakage: an image id or the exact pixels of a test image are on the training split
        """
        train_split = list(train_split)
        shared_ids = {specimen.image_id for specimen in test_split} & {specimen.image_id for specimen in train_split}
        if shared_ids:
            raise SplitLeakage(f'{len(shared_ids)} test images are on the training split, '
                               f'for example {sorted(shared_ids)[:5]}')
        train_checksums = {pixels_checksum(specimen.pixels) for specimen in train_split}
        shared_pixels = [specimen.image_id for specimen in test_split
                         if pixels_checksum(specimen.pixels) in train_checksums]
        if shared_pixels:
            raise SplitLeakage(f'Test images {shared_pixels[:5]} have the same pixels as training images')

    def attack_specimen(self, specimen: Specimen, model: DifferentiablePredictor,
                        params: AttackParams) -> Tuple[Specimen, ImageRecord]:
        adversarial = attack(specimen.pixels, specimen.label, model, params)
        record = ImageRecord(specimen.image_id, specimen.label,
                             float(np.max(np.abs(adversarial - specimen.pixels), initial=0.)),
                             model.loss(specimen.pixels, specimen.label), model.loss(adversarial, specimen.label))
        if not record.loss_increased:
            logger.debug('Attack %s did not increase the loss of image=%s', params.name, specimen.image_id)
        return specimen.with_pixels(adversarial), record

    def attack_dataset(self, test_split: Sequence[Specimen], model: DifferentiablePredictor, params: AttackParams,
                       seed: int = 0, train_split: Optional[Iterable[Specimen]] = None) -> AttackResult:
        """
        Replace every test image by its adversarial version, labels and part boxes are kept
        :param test_split:
        :param model: attacked white-box model
        :param params: epsilon and alpha on the configured epsilon scale
        :param seed: recorded on the manifest, attacks are deterministic
        :param train_split: checked for leakage if provided
        :return: Attacked split and its manifest
        """
        if train_split is not None:
            self.check_leakage(test_split, train_split)
        pixel_params = params.to_pixel_scale(self.epsilon_scale)

        if self.jobs > 1:
            with ThreadPoolExecutor(max_workers=self.jobs) as executor:
                attacked = list(executor.map(lambda s: self.attack_specimen(s, model, pixel_params), test_split))
        else:
            attacked = [self.attack_specimen(specimen, model, pixel_params) for specimen in test_split]

        records = [record for _, record in attacked]
        manifest = {
            'version': MANIFEST_VERSION,
            'params': params.to_dict(),
            'pixel_params': pixel_params.to_dict(),
            'epsilon_scale': self.epsilon_scale,
            'budget': pixel_params.budget,
            'seed': seed,
            'model_checksum': model.checksum,
            'n_images': len(records),
            'loss_increased': sum(record.loss_increased for record in records),
            'images': [record.to_dict() for record in records],
        }
        if records:
            logger.info('Attack %s on %d images, max linf=%.2f, loss increased on %d', params.name or
                        params.kind.value, len(records), max(record.linf for record in records),
                        manifest['loss_increased'])
        return AttackResult([specimen for specimen, _ in attacked], manifest)

    def write_split(self, directory: Union[str, Path], result: AttackResult) -> Path:
        """
        Store the adversarial images as PNG files plus `manifest.json`
        """
        directory = Path(directory)
        (directory / 'images').mkdir(parents=True, exist_ok=True)
        for specimen in result.specimens:
            save_png(directory / 'images' / f'{specimen.image_id}.png', specimen.pixels)
        manifest_path = directory / 'manifest.json'
        with open(manifest_path, 'w') as manifest_file:
            json.dump(result.manifest, manifest_file, indent=2, sort_keys=True)
        return manifest_path

