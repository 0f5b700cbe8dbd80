"""
Training of the predictors of one fold: whole image and part networks for the context phase,
part forests for the attention phase
"""
import json
from dataclasses import dataclass, field, replace
from logging import getLogger
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

from django.conf import settings

import numpy as np

from lateral_vision.classification.services import LateralEngine, PredictorBank
from lateral_vision.classification.types import CROPPED_PARTS, InputDomainError, PartKind
from lateral_vision.dataprep.types import Specimen
from lateral_vision.features.descriptors import HogParams, SiftParams
from lateral_vision.features.services import FeatureExtractionService
from lateral_vision.forest.forest import RandomForest
from lateral_vision.predictors.forest import ForestPredictor, part_crop
from lateral_vision.predictors.neural import ToyNetPredictor
from lateral_vision.predictors.toynet import ToyNet

from .types import FeatureConfig, RunManifest

logger = getLogger(__name__)

HOLISTIC_CHECKPOINT = 'holistic.toynet'
MODELS_FILE = 'models.json'

# Keys of the seeds derived for every model of a fold
HOLISTIC_INIT, HOLISTIC_TRAIN, PART_INIT, PART_TRAIN, PART_FOREST = range(5)


def derive_seed(*keys: int) -> int:
    return int(np.random.SeedSequence([int(key) for key in keys]).generate_state(1)[0])


def extraction_service_for(features: FeatureConfig, cache_size: Optional[int] = None) -> FeatureExtractionService:
    return FeatureExtractionService(
        sift_variants=[SiftParams(patch_size) for patch_size in features.sift_patch_sizes],
        hog_variants=[HogParams(resize_to, cell_size) for resize_to, cell_size in features.hog_variants],
        fusion=features.fusion,
        sift_resize=features.sift_resize,
        cache_size=settings.FEATURE_CACHE_SIZE if cache_size is None else cache_size,
    )


def fold_directory(base: Union[str, Path], fold: int) -> Path:
    return Path(base) / f'fold-{fold:02d}'


def dataset_parts(specimens: Sequence[Specimen]) -> List[PartKind]:
    """
    :return: Cropped parts with a box on some specimen, in accumulation order
    """
    present = {part for specimen in specimens for part in specimen.boxes}
    return [part for part in CROPPED_PARTS if part in present]


def dataset_classes(specimens: Sequence[Specimen]) -> int:
    labels = [specimen.label for specimen in specimens if specimen.label is not None]
    if not labels:
        raise InputDomainError('Dataset has no labeled images')
    return max(max(labels) + 1, 2)


@dataclass
class FoldModels:
    holistic: ToyNetPredictor
    context_parts: Dict[PartKind, ToyNetPredictor]
    attention_parts: Dict[PartKind, ForestPredictor]
    train_accuracy: Dict[str, float] = field(default_factory=dict)

    @property
    def n_classes(self) -> int:
        return self.holistic.n_classes

    def engine(self, parallel: Optional[bool] = None, include_face: Optional[bool] = None) -> LateralEngine:
        return LateralEngine(PredictorBank(self.context_parts, self.holistic), PredictorBank(self.attention_parts),
                             parallel=parallel, include_face=include_face)

    def save(self, directory: Union[str, Path]) -> Path:
        """
        ToyNet checkpoints, one JSON file per forest and `models.json` describing them
        """
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        self.holistic.net.save(directory / HOLISTIC_CHECKPOINT)
        parts = {}
        for part, predictor in self.context_parts.items():
            predictor.net.save(directory / f'{part.value}.toynet')
            parts.setdefault(part.value, {})['side'] = predictor.side
        for part, predictor in self.attention_parts.items():
            forest_files = []
            for i, forest in enumerate(predictor.forests):
                forest_files.append(f'{part.value}-forest-{i}.json')
                forest.save(directory / forest_files[-1])
            parts.setdefault(part.value, {})['forests'] = forest_files
        with open(directory / MODELS_FILE, 'w') as models_file:
            json.dump({'n_classes': self.n_classes, 'parts': parts, 'train_accuracy': self.train_accuracy},
                      models_file, indent=2, sort_keys=True)
        return directory

    @classmethod
    def load(cls, directory: Union[str, Path], extraction_service: FeatureExtractionService) -> 'FoldModels':
        directory = Path(directory)
        with open(directory / MODELS_FILE) as models_file:
            description = json.load(models_file)
        holistic = ToyNetPredictor(ToyNet.load(directory / HOLISTIC_CHECKPOINT))
        context_parts, attention_parts = {}, {}
        for part_value, files in description['parts'].items():
            part = PartKind(part_value)
            if 'side' in files:
                context_parts[part] = ToyNetPredictor(ToyNet.load(directory / f'{part_value}.toynet'), part,
                                                      files['side'])
            if 'forests' in files:
                forests = [RandomForest.load(directory / name) for name in files['forests']]
                attention_parts[part] = ForestPredictor(forests, extraction_service, part)
        return cls(holistic, context_parts, attention_parts, description.get('train_accuracy', {}))


def _train_net(predictor: ToyNetPredictor, specimens: Sequence[Specimen], epochs: int, learning_rate: float,
               batch_size: int, seed: int) -> float:
    X, y = predictor.training_matrix(specimens)
    if X.shape[0] == 0:
        raise InputDomainError(f'No training image can be fed to the {predictor.part.value} network')
    report = predictor.net.train(X, y, epochs=epochs, learning_rate=learning_rate, batch_size=batch_size, seed=seed)
    logger.info('Trained %s network on %d images, loss=%.4f accuracy=%.4f', predictor.part.value, X.shape[0],
                report.final_loss, report.final_accuracy)
    return report.final_accuracy


def train_fold(train: Sequence[Specimen], manifest: RunManifest, fold: int, n_classes: int,
               extraction_service: FeatureExtractionService) -> FoldModels:
    """
    :param train: training split, images of the same size
    :param manifest: network, forest and seed settings
    :param fold: index of the fold, part of every derived seed
    :param n_classes:
    :param extraction_service: shared by the forests of every part
    """
    toynet = manifest.toynet
    sizes = {specimen.pixels.shape for specimen in train}
    if len(sizes) != 1:
        raise InputDomainError(f'Training images have different sizes {sorted(sizes)}, set a dataset resize')
    height, width = sizes.pop()

    holistic = ToyNetPredictor(ToyNet.initialize(height * width, toynet.hidden_dim, n_classes,
                                                 seed=derive_seed(manifest.seed, fold, HOLISTIC_INIT)))
    train_accuracy = {PartKind.WHOLE_IMAGE.value: _train_net(
        holistic, train, toynet.epochs, toynet.learning_rate, toynet.batch_size,
        derive_seed(manifest.seed, fold, HOLISTIC_TRAIN))}

    context_parts, attention_parts = {}, {}
    for part in dataset_parts(train):
        part_index = CROPPED_PARTS.index(part)
        predictor = ToyNetPredictor(ToyNet.initialize(toynet.part_side ** 2, toynet.part_hidden_dim, n_classes,
                                                      seed=derive_seed(manifest.seed, fold, PART_INIT, part_index)),
                                    part, toynet.part_side)
        train_accuracy[part.value] = _train_net(predictor, train, toynet.part_epochs, toynet.learning_rate,
                                                toynet.batch_size,
                                                derive_seed(manifest.seed, fold, PART_TRAIN, part_index))
        context_parts[part] = predictor
        forest_params = replace(manifest.forest, seed=derive_seed(manifest.seed, fold, PART_FOREST, part_index))
        attention_parts[part] = ForestPredictor.fit(extraction_service, train, part, forest_params, n_classes)
    return FoldModels(holistic, context_parts, attention_parts, train_accuracy)


def write_fold_features(directory: Union[str, Path], specimens: Sequence[Specimen], parts: Iterable[PartKind],
                        extraction_service: FeatureExtractionService) -> List[Path]:
    """
    Dump the attention features of the part crops of `specimens`, read back by
    `FeatureExtractionService.load_dumps` on later folds and runs
    """
    crops = []
    for part in parts:
        for specimen in specimens:
            part_image = part_crop(specimen, specimen.boxes.get(part))
            if part_image is not None:
                crops.append((specimen.image_id, part, part_image))
    return extraction_service.dump_features(directory, crops)
