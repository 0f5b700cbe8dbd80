import csv
import json
import threading
from dataclasses import asdict
from collections import defaultdict
from logging import getLogger
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from cachetools import LRUCache

from lateral_vision.classification.types import InputDomainError, PartKind

from ..descriptors import (FeatureProvenance, FeatureVector, HogParams, SiftParams, hog_descriptor, sift_descriptor,
                           sift_grid_shape)
from ..images import GrayImage, resize_square

logger = getLogger(__name__)

FUSION_CONCATENATE = 'concatenate'
FUSION_PER_VARIANT = 'per_variant'
FUSION_MODES = (FUSION_CONCATENATE, FUSION_PER_VARIANT)
FEATURE_DUMP_VERSION = '1.0.0'

DescriptorParams = Union[SiftParams, HogParams]


class FeatureServiceException(Exception):
    pass


class UnknownFusionMode(FeatureServiceException, InputDomainError):
    pass


class FeatureDumpException(FeatureServiceException):
    pass


def default_sift_variants() -> Tuple[SiftParams, ...]:
    return SiftParams(64), SiftParams(128), SiftParams(256)


def default_hog_variants() -> Tuple[HogParams, ...]:
    return HogParams(64, 32), HogParams(126, 64), HogParams(256, 128)


class ExtractionCounter:
    """
    Counts descriptor computations requested by the attention phase
    """
    def __init__(self):
        self._lock = threading.Lock()
        self._value = 0

    def increment(self, amount: int = 1) -> int:
        with self._lock:
            self._value += amount
            return self._value

    @property
    def value(self) -> int:
        with self._lock:
            return self._value


class FeatureExtractionService:
    def __init__(self, sift_variants: Optional[Sequence[SiftParams]] = None,
                 hog_variants: Optional[Sequence[HogParams]] = None,
                 fusion: str = FUSION_CONCATENATE, cache_size: int = 100000, sift_resize: int = 256):
        """
        :param sift_resize: side of the square every crop is resized to before dense SIFT, so the
        patch grid and the vector length of every SIFT variant are fixed
        """
        if fusion not in FUSION_MODES:
            raise UnknownFusionMode(f'Not valid fusion={fusion}, use one of {FUSION_MODES}')
        self.sift_variants = tuple(sift_variants or default_sift_variants())
        self.hog_variants = tuple(hog_variants or default_hog_variants())
        self.fusion = fusion
        self.sift_resize = sift_resize
        self.cache = LRUCache(maxsize=cache_size) if cache_size else None
        self._cache_lock = threading.Lock()

    @property
    def variants(self) -> Tuple[DescriptorParams, ...]:
        return self.sift_variants + self.hog_variants

    @property
    def variant_names(self) -> List[str]:
        return [params.variant for params in self.variants]

    @property
    def vectors_per_crop(self) -> int:
        return len(self.variants) if self.fusion == FUSION_PER_VARIANT else 1

    @property
    def vector_length(self) -> int:
        """
        :return: Length of the concatenation of every variant for one crop
        """
        return sum(self.variant_length(params) for params in self.variants)

    def variant_length(self, params: DescriptorParams) -> int:
        if isinstance(params, SiftParams):
            patches_y, patches_x = sift_grid_shape(self.sift_resize, self.sift_resize, params.patch_size)
            return patches_y * patches_x * params.patch_length
        return params.length

    def dump_params(self, params: DescriptorParams) -> Dict[str, Any]:
        """
        :return: Everything the vectors of a variant depend on, recorded on its dumps
        """
        data = asdict(params)
        if isinstance(params, SiftParams):
            data['resize'] = self.sift_resize
        return data

    def _compute(self, crop: GrayImage, params: DescriptorParams, part: Optional[PartKind]) -> FeatureVector:
        if isinstance(params, SiftParams):
            return sift_descriptor(resize_square(crop, self.sift_resize), params, part=part)
        return hog_descriptor(crop, params, part=part)

    def extract_variant(self, crop: GrayImage, params: DescriptorParams,
                        part: Optional[PartKind] = None) -> FeatureVector:
        if self.cache is None:
            return self._compute(crop, params, part)

        key = (crop.checksum, params, part)
        with self._cache_lock:
            feature = self.cache.get(key)
        if feature is None:
            feature = self._compute(crop, params, part)
            with self._cache_lock:
                self.cache[key] = feature
        return feature

    def extract(self, crop: GrayImage, part: Optional[PartKind] = None,
                counter: Optional[ExtractionCounter] = None) -> List[FeatureVector]:
        """
        :return: One feature vector per variant, SIFT variants first
        """
        features = [self.extract_variant(crop, params, part) for params in self.variants]
        if counter is not None:
            counter.increment(len(features))
        return features

    def fuse(self, features: Sequence[FeatureVector]) -> List[FeatureVector]:
        """
        :return: A single concatenated vector for `concatenate` fusion, the variants untouched for `per_variant`
        """
        if self.fusion == FUSION_PER_VARIANT:
            return list(features)
        part = features[0].provenance.part if features else None
        return [FeatureVector(np.concatenate([feature.values for feature in features]),
                              FeatureProvenance(part, 'fused', '+'.join(f.provenance.variant for f in features)))]

    def extract_fused(self, crop: GrayImage, part: Optional[PartKind] = None,
                      counter: Optional[ExtractionCounter] = None) -> List[FeatureVector]:
        return self.fuse(self.extract(crop, part=part, counter=counter))

    def clear_cache(self):
        if self.cache is not None:
            with self._cache_lock:
                self.cache.clear()

    def dump_features(self, directory: Union[str, Path],
                      crops: Iterable[Tuple[str, PartKind, GrayImage]]) -> List[Path]:
        """
        Write the features of every `(image_id, part, crop)`, one dump per part and variant under
        `directory/<part>/<variant>.csv`. Rows keep the crop checksum so `load_dumps` can fill the
        cache of another process or run
        :return: Paths of the sidecars
        """
        directory = Path(directory)
        by_part: Dict[PartKind, List[Tuple[str, GrayImage]]] = defaultdict(list)
        for image_id, part, crop in crops:
            by_part[part].append((image_id, crop))

        sidecars = []
        for part, part_crops in by_part.items():
            (directory / part.value).mkdir(parents=True, exist_ok=True)
            checksums = [crop.checksum for _, crop in part_crops]
            for params in self.variants:
                rows = [(image_id, self.extract_variant(crop, params, part)) for image_id, crop in part_crops]
                sidecars.append(write_feature_dump(directory / part.value / f'{params.variant}.csv', rows,
                                                   checksums=checksums, params=self.dump_params(params)))
        return sidecars

    def load_dumps(self, directory: Union[str, Path]) -> int:
        """
        Fill the cache with the dumps found under `directory`. Dumps written with other params, or
        without crop checksums, are skipped
        :return: Number of vectors loaded
        """
        if self.cache is None:
            return 0
        params_by_variant = {params.variant: params for params in self.variants}
        loaded = 0
        for path in sorted(Path(directory).glob('**/*.csv')):
            metadata = read_dump_sidecar(path)
            params = params_by_variant.get(metadata['variant'])
            if (params is None or not metadata.get('checksums')
                    or metadata.get('params') != self.dump_params(params)):
                continue
            rows = read_feature_dump(path)
            with self._cache_lock:
                for checksum, (_, vector) in zip(metadata['checksums'], rows):
                    self.cache[(checksum, params, vector.provenance.part)] = vector
            loaded += len(rows)
        logger.info('Loaded %d feature vectors from %s', loaded, directory)
        return loaded


def write_feature_dump(path: Union[str, Path], rows: Iterable[Tuple[str, FeatureVector]],
                       checksums: Optional[Sequence[str]] = None, params: Optional[Dict[str, Any]] = None) -> Path:
    """
    Write features as CSV, one row per `(image_id, vector)`, plus a JSON sidecar describing them.
    All the vectors must share their provenance descriptor/variant and length
    :param checksums: checksum of the crop of every row, recorded on the sidecar
    :param params: descriptor params of the vectors, recorded on the sidecar
    :return: Path of the sidecar
    """
    path = Path(path)
    rows = list(rows)
    provenances = {(vector.provenance.descriptor, vector.provenance.variant, len(vector)) for _, vector in rows}
    if len(provenances) > 1:
        raise FeatureDumpException(f'Cannot mix descriptors on the same dump {sorted(provenances)}')
    if checksums is not None and len(checksums) != len(rows):
        raise FeatureDumpException(f'{len(checksums)} checksums for {len(rows)} rows')

    with open(path, 'w', newline='') as csv_file:
        writer = csv.writer(csv_file)
        for image_id, vector in rows:
            part = vector.provenance.part.value if vector.provenance.part else ''
            writer.writerow([image_id, part] + [repr(float(value)) for value in vector.values])

    descriptor, variant, length = provenances.pop() if provenances else (None, None, 0)
    sidecar = path.with_suffix(path.suffix + '.json')
    with open(sidecar, 'w') as json_file:
        json.dump({'version': FEATURE_DUMP_VERSION, 'descriptor': descriptor, 'variant': variant,
                   'params': params, 'length': length, 'rows': len(rows),
                   'image_ids': [image_id for image_id, _ in rows],
                   'checksums': list(checksums) if checksums is not None else None},
                  json_file, indent=2, sort_keys=True)
    logger.info('Stored %d %s feature vectors on %s', len(rows), variant, path)
    return sidecar


def read_dump_sidecar(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    sidecar = path.with_suffix(path.suffix + '.json')
    try:
        with open(sidecar) as json_file:
            return json.load(json_file)
    except FileNotFoundError as exc:
        raise FeatureDumpException(f'Missing sidecar {sidecar} for dump {path}') from exc


def read_feature_dump(path: Union[str, Path]) -> List[Tuple[str, FeatureVector]]:
    path = Path(path)
    metadata = read_dump_sidecar(path)
    rows = []
    with open(path, newline='') as csv_file:
        for row in csv.reader(csv_file):
            image_id, part, values = row[0], row[1], np.array(row[2:], dtype=np.float64)
            if values.size != metadata['length']:
                raise FeatureDumpException(f'Row for image={image_id} has {values.size} values, '
                                           f'expected {metadata["length"]}')
            provenance = FeatureProvenance(PartKind(part) if part else None, metadata['descriptor'],
                                           metadata['variant'])
            rows.append((image_id, FeatureVector(values, provenance)))
    if len(rows) != metadata['rows']:
        raise FeatureDumpException(f'Dump {path} has {len(rows)} rows, sidecar says {metadata["rows"]}')
    return rows
