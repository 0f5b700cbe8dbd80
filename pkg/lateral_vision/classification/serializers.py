import json
from logging import getLogger
from typing import Any, Dict, Optional

from django.conf import settings

from rest_framework import serializers
from rest_framework.exceptions import ValidationError

from .class_matrix import ClassMatrix
from .types import (ClassLabel, DecisionRule, DecisionTrace, InputDomainError, Perception, PhaseSignal, ScoreListing,
                    ScoreScale)

logger = getLogger(__name__)

TRACE_FORMAT_VERSION = '1.0.0'
# Pass as `decimals` on the serializer context to keep full precision
FULL_PRECISION = None


class NotValidTrace(InputDomainError):
    pass


class EnumField(serializers.ChoiceField):
    def __init__(self, enum, **kwargs):
        self.enum = enum
        super().__init__(choices=[member.value for member in enum], **kwargs)

    def to_representation(self, value):
        return value.value

    def to_internal_value(self, data):
        return self.enum(super().to_internal_value(data))


class RoundedFloatField(serializers.FloatField):
    """
    Rounded to the `decimals` of the serializer context, `LATERAL_TRACE_DECIMALS` by default
    """
    def to_representation(self, value):
        value = float(value)
        decimals = self.context.get('decimals', settings.LATERAL_TRACE_DECIMALS)
        return value if decimals is None else round(value, decimals)


class PerceptionSerializer(serializers.Serializer):
    label = serializers.IntegerField(source='label.index', min_value=0)
    species = serializers.CharField(source='label.species', read_only=True)
    score = RoundedFloatField(min_value=0.)
    confused = serializers.BooleanField()
    scale = EnumField(ScoreScale)


class ClassMatrixSerializer(serializers.Serializer):
    scale = EnumField(ScoreScale)
    entries = serializers.ListField(child=RoundedFloatField(min_value=0.), min_length=2)


class ScoreEntrySerializer(serializers.Serializer):
    label = serializers.IntegerField(min_value=0)
    species = serializers.CharField(read_only=True)
    score = RoundedFloatField(min_value=0.)

    def to_representation(self, instance):
        label, score = instance
        return {'label': label.index, 'species': label.species, 'score': self.fields['score'].to_representation(score)}


class ScoreListingSerializer(serializers.Serializer):
    entries = ScoreEntrySerializer(many=True)
    scale = EnumField(ScoreScale)


class DecisionTraceSerializer(serializers.Serializer):
    image_id = serializers.CharField()
    n_classes = serializers.IntegerField(min_value=2)
    context_clp = PerceptionSerializer()
    context_hlp = PerceptionSerializer()
    confident = serializers.BooleanField()
    signal = EnumField(PhaseSignal)
    attention_clp = PerceptionSerializer(allow_null=True, required=False)
    cm_c = ClassMatrixSerializer()
    cm_a = ClassMatrixSerializer(allow_null=True, required=False)
    cm_f = ClassMatrixSerializer(allow_null=True, required=False)
    final = PerceptionSerializer()
    final_label = serializers.IntegerField(source='final_label.index', read_only=True)
    final_species = serializers.CharField(source='final_label.species', read_only=True)
    rule = EnumField(DecisionRule)
    feature_extractions = serializers.IntegerField(min_value=0)
    listings = serializers.DictField(child=ScoreListingSerializer())
    notes = serializers.ListField(child=serializers.CharField(), allow_empty=True)

    def to_representation(self, instance):
        data = super().to_representation(instance)
        data['version'] = TRACE_FORMAT_VERSION
        return data

    def validate(self, data):
        version = str(self.initial_data.get('version', TRACE_FORMAT_VERSION))
        if version.split('.')[0] != TRACE_FORMAT_VERSION.split('.')[0]:
            raise ValidationError(f'Trace format version={version} not supported')
        return data

    @staticmethod
    def _perception(data: Optional[Dict[str, Any]], n_classes: int) -> Optional[Perception]:
        if data is None:
            return None
        return Perception(ClassLabel(data['label']['index'], n_classes), data['score'], data['confused'],
                          data['scale'])

    @staticmethod
    def _matrix(data: Optional[Dict[str, Any]]) -> Optional[ClassMatrix]:
        if data is None:
            return None
        return ClassMatrix(data['entries'], data['scale'])

    def create(self, validated_data):
        n_classes = validated_data['n_classes']
        listings = {
            name: ScoreListing(tuple((ClassLabel(entry['label'], n_classes), entry['score'])
                                     for entry in listing['entries']), listing['scale'])
            for name, listing in validated_data['listings'].items()
        }
        return DecisionTrace(
            image_id=validated_data['image_id'],
            n_classes=n_classes,
            context_clp=self._perception(validated_data['context_clp'], n_classes),
            context_hlp=self._perception(validated_data['context_hlp'], n_classes),
            confident=validated_data['confident'],
            signal=validated_data['signal'],
            cm_c=self._matrix(validated_data['cm_c']),
            final=self._perception(validated_data['final'], n_classes),
            rule=validated_data['rule'],
            attention_clp=self._perception(validated_data.get('attention_clp'), n_classes),
            cm_a=self._matrix(validated_data.get('cm_a')),
            cm_f=self._matrix(validated_data.get('cm_f')),
            feature_extractions=validated_data['feature_extractions'],
            listings=listings,
            notes=list(validated_data['notes']),
        )


def trace_to_dict(trace: DecisionTrace, decimals: Optional[int] = -1) -> Dict[str, Any]:
    """
    :param decimals: `-1` for `LATERAL_TRACE_DECIMALS`, `None` (`FULL_PRECISION`) for lossless output
    """
    context = {} if decimals == -1 else {'decimals': decimals}
    return DecisionTraceSerializer(trace, context=context).data


def trace_to_json(trace: DecisionTrace, decimals: Optional[int] = -1, indent: Optional[int] = 2) -> str:
    """
    Canonical JSON: sorted keys, so equal traces are equal byte by byte
    """
    return json.dumps(trace_to_dict(trace, decimals=decimals), sort_keys=True, indent=indent)


def trace_from_dict(data: Dict[str, Any]) -> DecisionTrace:
    serializer = DecisionTraceSerializer(data=data)
    try:
        serializer.is_valid(raise_exception=True)
        return serializer.save()
    except ValidationError as exc:
        raise NotValidTrace(f'Not valid trace: {exc.detail}') from exc
    except InputDomainError as exc:
        raise NotValidTrace(f'Not valid trace: {exc}') from exc


def trace_from_json(text: str) -> DecisionTrace:
    return trace_from_dict(json.loads(text))
