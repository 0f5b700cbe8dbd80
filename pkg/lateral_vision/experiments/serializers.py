import json
from logging import getLogger
from pathlib import Path
from typing import Any, Dict, Union

from rest_framework import serializers
from rest_framework.exceptions import ValidationError

from lateral_vision.adversarial.attacks import EPSILON_SCALES, PRESETS, AttackKind, AttackParams
from lateral_vision.classification.serializers import EnumField
from lateral_vision.classification.types import InputDomainError
from lateral_vision.dataprep.synthetic import SyntheticSpec
from lateral_vision.features.services.feature_extraction_service import FUSION_MODES
from lateral_vision.forest.forest import ForestParams

from .types import (CONDITIONS, DATASET_SOURCES, DATASET_SYNTHETIC, DatasetConfig, FeatureConfig, RunManifest,
                    ToyNetConfig)

logger = getLogger(__name__)


class ManifestException(InputDomainError):
    pass


class DataclassSerializer(serializers.Serializer):
    """
    Validated data is an instance of `model_class`, missing fields take the dataclass defaults
    """
    model_class = None

    def validate(self, data):
        try:
            return self.model_class(**data)
        except InputDomainError as exc:
            raise ValidationError(str(exc))


class SyntheticSpecSerializer(DataclassSerializer):
    model_class = SyntheticSpec

    n_classes = serializers.IntegerField(min_value=1, required=False)
    image_size = serializers.IntegerField(min_value=8, required=False)
    part_size = serializers.IntegerField(min_value=2, required=False)
    jitter = serializers.IntegerField(min_value=0, required=False)
    noise = serializers.FloatField(min_value=0., required=False)
    background = serializers.FloatField(min_value=0., max_value=255., required=False)
    seed = serializers.IntegerField(min_value=0, required=False)


class DatasetSerializer(DataclassSerializer):
    model_class = DatasetConfig

    source = serializers.ChoiceField(choices=DATASET_SOURCES, required=False)
    path = serializers.CharField(allow_null=True, required=False)
    synthetic = SyntheticSpecSerializer(required=False)
    n_images = serializers.IntegerField(min_value=1, required=False)
    limit = serializers.IntegerField(min_value=1, allow_null=True, required=False)
    resize = serializers.IntegerField(min_value=8, allow_null=True, required=False)

    def validate(self, data):
        if data.get('source', DATASET_SYNTHETIC) != DATASET_SYNTHETIC and not data.get('path'):
            raise ValidationError(f'Dataset source={data["source"]} needs a path')
        return super().validate(data)


class ForestParamsSerializer(DataclassSerializer):
    model_class = ForestParams

    n_trees = serializers.IntegerField(min_value=1, default=30)
    max_features = serializers.IntegerField(min_value=1, allow_null=True, required=False)
    max_depth = serializers.IntegerField(min_value=0, allow_null=True, required=False)
    min_samples_split = serializers.IntegerField(min_value=2, required=False)
    n_jobs = serializers.IntegerField(min_value=1, required=False)


class ToyNetConfigSerializer(DataclassSerializer):
    model_class = ToyNetConfig

    hidden_dim = serializers.IntegerField(min_value=0, required=False)
    epochs = serializers.IntegerField(min_value=1, required=False)
    learning_rate = serializers.FloatField(min_value=0., required=False)
    batch_size = serializers.IntegerField(min_value=1, required=False)
    part_hidden_dim = serializers.IntegerField(min_value=0, required=False)
    part_epochs = serializers.IntegerField(min_value=1, required=False)
    part_side = serializers.IntegerField(min_value=2, required=False)


class FeatureConfigSerializer(DataclassSerializer):
    model_class = FeatureConfig

    sift_patch_sizes = serializers.ListField(child=serializers.IntegerField(min_value=2), min_length=1,
                                             required=False)
    hog_variants = serializers.ListField(child=serializers.ListField(child=serializers.IntegerField(min_value=1),
                                                                     min_length=2, max_length=2),
                                         min_length=1, required=False)
    fusion = serializers.ChoiceField(choices=FUSION_MODES, required=False)
    sift_resize = serializers.IntegerField(min_value=2, required=False)

    def validate(self, data):
        if 'sift_patch_sizes' in data:
            data['sift_patch_sizes'] = tuple(data['sift_patch_sizes'])
        if 'hog_variants' in data:
            data['hog_variants'] = tuple(tuple(variant) for variant in data['hog_variants'])
        return super().validate(data)


class AttackParamsSerializer(DataclassSerializer):
    model_class = AttackParams

    name = serializers.ChoiceField(choices=list(PRESETS))
    kind = EnumField(AttackKind)
    epsilon = serializers.FloatField()
    alpha = serializers.FloatField(allow_null=True, required=False)
    iterations = serializers.IntegerField(allow_null=True, required=False)


class RunManifestSerializer(DataclassSerializer):
    model_class = RunManifest

    name = serializers.RegexField(r'^[\w.-]+$', max_length=100, required=False)
    dataset = DatasetSerializer(required=False)
    folds = serializers.IntegerField(min_value=2, required=False)
    max_folds = serializers.IntegerField(min_value=1, allow_null=True, required=False)
    seed = serializers.IntegerField(min_value=0, required=False)
    conditions = serializers.ListField(child=serializers.ChoiceField(choices=CONDITIONS), min_length=1,
                                       required=False)
    epsilon_scale = serializers.ChoiceField(choices=EPSILON_SCALES, required=False)
    attacks = AttackParamsSerializer(many=True, required=False)
    forest = ForestParamsSerializer(required=False)
    toynet = ToyNetConfigSerializer(required=False)
    features = FeatureConfigSerializer(required=False)
    parallel = serializers.BooleanField(required=False)
    include_face = serializers.BooleanField(required=False)
    jobs = serializers.IntegerField(min_value=1, required=False)

    def validate_conditions(self, conditions):
        if len(set(conditions)) != len(conditions):
            raise ValidationError('Conditions are repeated')
        # Report rows always follow the canonical order
        return tuple(condition for condition in CONDITIONS if condition in conditions)

    def validate_attacks(self, attacks):
        names = [params.name for params in attacks]
        if len(set(names)) != len(names):
            raise ValidationError('Attacks are repeated')
        return tuple(attacks)


def load_manifest(data: Union[Dict[str, Any], str, Path]) -> RunManifest:
    """
    :param data: manifest dictionary or path of a JSON manifest
    :raises ManifestException: field-level validation errors
    """
    if not isinstance(data, dict):
        with open(data) as manifest_file:
            data = json.load(manifest_file)
    serializer = RunManifestSerializer(data=data)
    if not serializer.is_valid():
        raise ManifestException(f'Not valid run manifest: {json.dumps(serializer.errors, sort_keys=True)}')
    return serializer.validated_data


def manifest_to_dict(manifest: RunManifest) -> Dict[str, Any]:
    return json.loads(json.dumps(RunManifestSerializer(manifest).data))
