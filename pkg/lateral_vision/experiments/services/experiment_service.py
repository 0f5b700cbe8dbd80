import json
from concurrent.futures import ThreadPoolExecutor
from logging import getLogger
from pathlib import Path
from threading import Lock
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

from django.conf import settings

from cachetools import LRUCache, cached
from celery import group

from lateral_vision.adversarial.attacks import AttackParams, get_preset
from lateral_vision.adversarial.services import AttackService
from lateral_vision.adversarial.services.attack_service import AttackResult
from lateral_vision.classification.serializers import trace_to_dict
from lateral_vision.classification.services import GroundTruthBoxSource
from lateral_vision.classification.types import InputDomainError, LateralVisionException
from lateral_vision.dataprep.boxes import resize_specimen
from lateral_vision.dataprep.cub import load_cub_dataset
from lateral_vision.dataprep.synthetic import generate_synthetic, read_dataset
from lateral_vision.dataprep.types import Specimen
from lateral_vision.features.services import FeatureExtractionService

from ..acceptance import AcceptanceCheck, check_acceptance
from ..folds import FoldPlan, make_folds
from ..report import AccuracyReport, accuracy
from ..serializers import manifest_to_dict
from ..training import (FoldModels, dataset_classes, derive_seed, extraction_service_for, fold_directory, train_fold,
                        write_fold_features)
from ..types import (BASELINE, CONDITIONS, DATASET_CUB, DATASET_DIRECTORY, DATASET_SYNTHETIC, LATERAL, ORIGINAL,
                     DatasetConfig, FeatureConfig, RunManifest)

logger = getLogger(__name__)

# Key of the seeds recorded on attack manifests, after the fold training keys
ATTACK_SEED = 5


class ExperimentServiceException(LateralVisionException):
    pass


class UnknownDatasetSource(ExperimentServiceException, InputDomainError):
    pass


class UnlabeledDataset(ExperimentServiceException, InputDomainError):
    pass


@cached(LRUCache(maxsize=4), lock=Lock())
def load_specimens(dataset: DatasetConfig) -> Tuple[Specimen, ...]:
    """
    Images of a run with their part boxes, boxes are derived from keypoints when not annotated
    """
    if dataset.source == DATASET_SYNTHETIC:
        specimens = generate_synthetic(dataset.synthetic, dataset.n_images)
    elif dataset.source == DATASET_DIRECTORY:
        specimens = read_dataset(dataset.path)[:dataset.limit]
    elif dataset.source == DATASET_CUB:
        specimens = load_cub_dataset(dataset.path, limit=dataset.limit)
    else:
        raise UnknownDatasetSource(f'Unknown dataset source={dataset.source}')

    if dataset.resize:
        specimens = [resize_specimen(specimen, dataset.resize) for specimen in specimens]
    box_source = GroundTruthBoxSource()
    specimens = [specimen if specimen.boxes else
                 Specimen(specimen.image_id, specimen.pixels, specimen.label, box_source.boxes(specimen),
                          specimen.keypoints)
                 for specimen in specimens]
    unlabeled = [specimen.image_id for specimen in specimens if specimen.label is None]
    if unlabeled:
        raise UnlabeledDataset(f'{len(unlabeled)} images have no label, for example {unlabeled[:5]}')
    logger.info('Loaded %d images from %s dataset', len(specimens), dataset.source)
    return tuple(specimens)


@cached(LRUCache(maxsize=4), lock=Lock())
def shared_extraction_service(features: FeatureConfig) -> FeatureExtractionService:
    """
    One extraction service per feature configuration, its cache is shared by every fold of the process
    """
    return extraction_service_for(features)


class FoldData(NamedTuple):
    plan: FoldPlan
    train: List[Specimen]
    test: List[Specimen]
    n_classes: int


class FoldResult(NamedTuple):
    fold: int
    n_train: int
    n_test: int
    train_accuracy: Dict[str, float]
    outcomes: List[Dict[str, Any]]  # One per test image and condition
    traces: List[Dict[str, Any]]
    attacks: Dict[str, Dict[str, Any]]  # Attack summary per condition

    def accuracy(self, condition: str, system: str) -> float:
        return accuracy([outcome for outcome in self.outcomes if outcome['condition'] == condition], system)

    def to_dict(self) -> Dict[str, Any]:
        return self._asdict()

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'FoldResult':
        return cls(**data)


class ExperimentResult(NamedTuple):
    manifest: RunManifest
    plan: FoldPlan
    report: AccuracyReport
    fold_results: List[FoldResult]
    acceptance: List[AcceptanceCheck]

    @property
    def outcomes(self) -> List[Dict[str, Any]]:
        return [outcome for fold_result in self.fold_results for outcome in fold_result.outcomes]

    @property
    def traces(self) -> List[Dict[str, Any]]:
        return [trace for fold_result in self.fold_results for trace in fold_result.traces]

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.acceptance)


class ExperimentServiceProvider:
    def __new__(cls):
        if not hasattr(cls, 'instance'):
            cls.instance = ExperimentService(settings.EXPERIMENT_OUTPUT_DIR, settings.EXPERIMENT_JOBS,
                                             features_dir=settings.EXPERIMENT_FEATURE_DIR)
        return cls.instance

    @classmethod
    def del_singleton(cls):
        if hasattr(cls, "instance"):
            del cls.instance


class ExperimentService:
    def __init__(self, output_dir: Union[str, Path], jobs: int = 1,
                 features_dir: Optional[Union[str, Path]] = None):
        """
        :param output_dir: directory of the run outputs
        :param jobs: folds evaluated at the same time. Images of a fold use the manifest `jobs`
        :param features_dir: feature dumps read before training a fold and written after it, none if `None`
        """
        self.output_dir = Path(output_dir)
        self.jobs = jobs
        self.features_dir = Path(features_dir) if features_dir else None

    def fold_plan(self, manifest: RunManifest) -> FoldPlan:
        specimens = load_specimens(manifest.dataset)
        return make_folds([specimen.image_id for specimen in specimens], k=manifest.folds, seed=manifest.seed,
                          labels=[specimen.label for specimen in specimens])

    def fold_data(self, manifest: RunManifest, fold: int) -> FoldData:
        specimens = load_specimens(manifest.dataset)
        plan = self.fold_plan(manifest)
        if not 0 <= fold < plan.k:
            raise InputDomainError(f'Fold {fold} out of the {plan.k} folds of the plan')
        by_id = {specimen.image_id: specimen for specimen in specimens}
        train = [by_id[image_id] for image_id in plan.train_ids(fold)]
        test = [by_id[image_id] for image_id in plan.test_ids(fold)]
        AttackService().check_leakage(test, train)
        return FoldData(plan, train, test, dataset_classes(specimens))

    def train_fold(self, manifest: RunManifest, fold: int, data: Optional[FoldData] = None) -> FoldModels:
        data = data or self.fold_data(manifest, fold)
        extraction_service = shared_extraction_service(manifest.features)
        if self.features_dir and self.features_dir.exists():
            extraction_service.load_dumps(self.features_dir)
        logger.info('Training fold %d on %d images', fold, len(data.train))
        models = train_fold(data.train, manifest, fold, data.n_classes, extraction_service)
        if self.features_dir:
            write_fold_features(fold_directory(self.features_dir, fold), data.train, models.attention_parts,
                                extraction_service)
        return models

    def load_fold_models(self, manifest: RunManifest, directory: Union[str, Path]) -> FoldModels:
        return FoldModels.load(directory, shared_extraction_service(manifest.features))

    def attack_params(self, manifest: RunManifest, condition: str) -> AttackParams:
        """
        :return: Params of an attacked condition on the manifest `epsilon_scale`, the preset unless the
        manifest replaces it
        """
        for params in manifest.attacks:
            if params.name == condition:
                return params
        return get_preset(condition, manifest.epsilon_scale)

    def attack_fold(self, manifest: RunManifest, fold: int, models: FoldModels, condition: str,
                    data: Optional[FoldData] = None) -> AttackResult:
        """
        Attack the test split of the fold with the white-box holistic model of the fold
        """
        data = data or self.fold_data(manifest, fold)
        attack_service = AttackService(manifest.epsilon_scale, jobs=manifest.jobs)
        return attack_service.attack_dataset(data.test, models.holistic, self.attack_params(manifest, condition),
                                             seed=derive_seed(manifest.seed, fold, ATTACK_SEED,
                                                              CONDITIONS.index(condition)),
                                             train_split=data.train)

    def evaluate(self, manifest: RunManifest, fold: int, condition: str, models: FoldModels,
                 specimens: Sequence[Specimen]) -> Tuple[List[Dict[str, Any]], List[Dict[str, Any]]]:
        """
        :return: Outcomes and traces of the lateralized system on `specimens`, the baseline is the
        holistic perception of the same traces
        """
        engine = models.engine(parallel=manifest.parallel, include_face=manifest.include_face)
        outcomes, traces = [], []
        for specimen, trace in zip(specimens, engine.decide_many(specimens, jobs=manifest.jobs)):
            outcomes.append({
                'fold': fold,
                'condition': condition,
                'image_id': specimen.image_id,
                'label': specimen.label,
                BASELINE: trace.context_hlp.label.index,
                LATERAL: trace.final_label.index,
                'rule': trace.rule.value,
                'signal': trace.signal.value,
                'feature_extractions': trace.feature_extractions,
            })
            traces.append({'fold': fold, 'condition': condition, 'trace': trace_to_dict(trace)})
        return outcomes, traces

    def run_fold(self, manifest: RunManifest, fold: int) -> FoldResult:
        data = self.fold_data(manifest, fold)
        models = self.train_fold(manifest, fold, data)
        outcomes, traces, attacks = [], [], {}
        for condition in manifest.conditions:
            if condition == ORIGINAL:
                specimens = data.test
            else:
                result = self.attack_fold(manifest, fold, models, condition, data)
                specimens = result.specimens
                attacks[condition] = {key: value for key, value in result.manifest.items() if key != 'images'}
                attacks[condition]['max_linf'] = max((image['linf'] for image in result.manifest['images']),
                                                     default=0.)
            condition_outcomes, condition_traces = self.evaluate(manifest, fold, condition, models, specimens)
            outcomes.extend(condition_outcomes)
            traces.extend(condition_traces)
            logger.info('Fold %d %s holistic=%.2f%% lateral=%.2f%%', fold, condition,
                        accuracy(condition_outcomes, BASELINE), accuracy(condition_outcomes, LATERAL))
        return FoldResult(fold, len(data.train), len(data.test), models.train_accuracy, outcomes, traces, attacks)

    def _run_folds(self, manifest: RunManifest, folds: Sequence[int]) -> List[FoldResult]:
        from ..tasks import run_fold_task

        manifest_data = manifest_to_dict(manifest)
        if settings.CELERY_TASK_ALWAYS_EAGER:
            def run(fold: int) -> Dict[str, Any]:
                return run_fold_task.delay(manifest_data, fold).get()

            if self.jobs > 1:
                with ThreadPoolExecutor(max_workers=self.jobs) as executor:
                    results = list(executor.map(run, folds))
            else:
                results = [run(fold) for fold in folds]
        else:
            results = group(run_fold_task.s(manifest_data, fold) for fold in folds).apply_async().get()
        return sorted((FoldResult.from_dict(result) for result in results), key=lambda result: result.fold)

    def run_experiment(self, manifest: RunManifest) -> ExperimentResult:
        plan = self.fold_plan(manifest)
        folds = list(range(manifest.evaluated_folds))
        logger.info('Running %s on %d of %d folds, conditions %s', manifest.name, len(folds), plan.k,
                    list(manifest.conditions))
        fold_results = self._run_folds(manifest, folds)
        outcomes = [outcome for fold_result in fold_results for outcome in fold_result.outcomes]
        report = AccuracyReport.from_outcomes(outcomes)
        return ExperimentResult(manifest, plan, report, fold_results, check_acceptance(report, outcomes))

    def write_outputs(self, result: ExperimentResult, directory: Optional[Union[str, Path]] = None) -> Path:
        """
        Outputs depend only on the manifest, so equal runs write equal files
        """
        directory = Path(directory) if directory else self.output_dir / result.manifest.name
        directory.mkdir(parents=True, exist_ok=True)

        def dump(name: str, data: Any):
            with open(directory / name, 'w') as output_file:
                json.dump(data, output_file, indent=2, sort_keys=True)

        dump('manifest.json', manifest_to_dict(result.manifest))
        dump('folds.json', result.plan.to_dict())
        dump('report.json', dict(result.report.to_dict(),
                                 acceptance=[check.to_dict() for check in result.acceptance],
                                 training={str(fold_result.fold): fold_result.train_accuracy
                                           for fold_result in result.fold_results}))
        dump('outcomes.json', result.outcomes)
        dump('attacks.json', {str(fold_result.fold): fold_result.attacks for fold_result in result.fold_results})
        (directory / 'report.txt').write_text(result.report.to_text())
        (directory / 'report.csv').write_text(result.report.to_csv())
        with open(directory / 'traces.jsonl', 'w') as traces_file:
            for trace in result.traces:
                traces_file.write(json.dumps(trace, sort_keys=True) + '\n')
        logger.info('Run %s written to %s', result.manifest.name, directory)
        return directory
