from dataclasses import dataclass, field
from typing import Optional, Tuple

from django.conf import settings

from lateral_vision.adversarial.attacks import AttackParams
from lateral_vision.dataprep.synthetic import SyntheticSpec
from lateral_vision.forest.forest import ForestParams

ORIGINAL = 'OrigImgs'
CONDITIONS: Tuple[str, ...] = (ORIGINAL, 'FGSM-M', 'FGSM-S', 'Itr-M', 'Itr-S')

BASELINE = 'holistic'
LATERAL = 'lateral'
SYSTEMS: Tuple[str, ...] = (BASELINE, LATERAL)

DATASET_SYNTHETIC = 'synthetic'
DATASET_DIRECTORY = 'directory'
DATASET_CUB = 'cub'
DATASET_SOURCES = (DATASET_SYNTHETIC, DATASET_DIRECTORY, DATASET_CUB)


@dataclass(frozen=True)
class DatasetConfig:
    source: str = DATASET_SYNTHETIC
    path: Optional[str] = None
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)
    n_images: int = 1600
    limit: Optional[int] = None  # Images read from `path`, all if `None`
    resize: Optional[int] = None  # Side of the square every image is resized to, needed for mixed sizes


@dataclass(frozen=True)
class ToyNetConfig:
    hidden_dim: int = 64
    epochs: int = 60
    learning_rate: float = 0.05
    batch_size: int = 32
    # Context phase part networks, fed with part crops resized to `part_side`
    part_hidden_dim: int = 16
    part_epochs: int = 40
    part_side: int = 12


@dataclass(frozen=True)
class FeatureConfig:
    sift_patch_sizes: Tuple[int, ...] = (64, 128, 256)
    # Defaults follow `HOG_MIDDLE_RESIZE` and `FEATURE_FUSION` settings
    hog_variants: Tuple[Tuple[int, int], ...] = field(
        default_factory=lambda: ((64, 32), (settings.HOG_MIDDLE_RESIZE, 64), (256, 128)))
    fusion: str = field(default_factory=lambda: settings.FEATURE_FUSION)
    sift_resize: int = 256  # Crops are resized to this square before dense SIFT


@dataclass(frozen=True)
class RunManifest:
    """
    Everything a run depends on. Two runs of equal manifests produce the same outputs
    """
    name: str = 'run'
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    folds: int = 10
    max_folds: Optional[int] = None  # Evaluate only the first folds of the plan
    seed: int = 0
    conditions: Tuple[str, ...] = CONDITIONS
    # Scale of `attacks` epsilon and alpha, `ADVERSARIAL_EPSILON_SCALE` by default
    epsilon_scale: str = field(default_factory=lambda: settings.ADVERSARIAL_EPSILON_SCALE)
    attacks: Tuple[AttackParams, ...] = ()  # Replace the presets of the same name
    forest: ForestParams = field(default_factory=lambda: ForestParams(n_trees=30))
    toynet: ToyNetConfig = field(default_factory=ToyNetConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    parallel: bool = True
    include_face: bool = True
    jobs: int = 1

    @property
    def evaluated_folds(self) -> int:
        return min(self.max_folds or self.folds, self.folds)
