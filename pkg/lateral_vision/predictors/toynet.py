"""
Small fully connected softmax classifier with hand derived backpropagation. With `hidden_dim=0`
it is a linear softmax model.
"""
import json
import struct
from hashlib import sha1
from logging import getLogger
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Optional, Union

import numpy as np
from packaging.version import Version

from lateral_vision.classification.types import InputDomainError, ProbabilityVector

from .base import PredictorException

logger = getLogger(__name__)

CHECKPOINT_MAGIC = b'TOYNET\x00\x00'
CHECKPOINT_VERSION = '1.0.0'


class ToyNetException(PredictorException):
    pass


class ToyNetDimensionMismatch(ToyNetException, InputDomainError):
    pass


class ToyNetDivergence(ToyNetException):
    pass


class NotValidCheckpoint(ToyNetException):
    pass


class TrainingReport(NamedTuple):
    epochs: int
    losses: List[float]
    accuracies: List[float]

    @property
    def final_loss(self) -> float:
        return self.losses[-1] if self.losses else float('nan')

    @property
    def final_accuracy(self) -> float:
        return self.accuracies[-1] if self.accuracies else 0.


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exponentials = np.exp(shifted)
    return exponentials / exponentials.sum(axis=-1, keepdims=True)


def cross_entropy(probabilities: np.ndarray, labels: np.ndarray) -> np.ndarray:
    picked = probabilities[np.arange(labels.size), labels]
    return -np.log(np.maximum(picked, np.finfo(np.float64).tiny))


class ToyNet:
    def __init__(self, W1: np.ndarray, b1: np.ndarray, W2: np.ndarray, b2: np.ndarray,
                 seed: Optional[int] = None, manifest: Optional[Dict[str, Any]] = None):
        """
        :param W1: `(hidden_dim, input_dim)`, `(0, input_dim)` in linear mode
        :param b1: `(hidden_dim,)`
        :param W2: `(n_classes, hidden_dim)` or `(n_classes, input_dim)` in linear mode
        :param b2: `(n_classes,)`
        """
        self.W1 = np.array(W1, dtype=np.float64)
        self.b1 = np.array(b1, dtype=np.float64)
        self.W2 = np.array(W2, dtype=np.float64)
        self.b2 = np.array(b2, dtype=np.float64)
        self.seed = seed
        self.manifest = manifest or {}
        hidden_dim, input_dim = self.W1.shape
        expected_inner = hidden_dim or input_dim
        if (self.b1.shape != (hidden_dim,) or self.W2.shape[1] != expected_inner
                or self.b2.shape != (self.W2.shape[0],)):
            raise ToyNetDimensionMismatch(f'Not consistent layer shapes W1={self.W1.shape} b1={self.b1.shape} '
                                          f'W2={self.W2.shape} b2={self.b2.shape}')
        if self.n_classes < 2:
            raise ToyNetDimensionMismatch(f'At least 2 classes are required, n_classes={self.n_classes}')
        if not all(np.all(np.isfinite(parameter)) for parameter in self.parameters):
            raise ToyNetException('Parameters must be finite')

    @classmethod
    def initialize(cls, input_dim: int, hidden_dim: int, n_classes: int, seed: int = 0) -> 'ToyNet':
        """
        He initialization for the hidden layer, zero biases
        """
        rng = np.random.default_rng(seed)
        if hidden_dim:
            W1 = rng.normal(0., np.sqrt(2. / input_dim), size=(hidden_dim, input_dim))
            W2 = rng.normal(0., np.sqrt(1. / hidden_dim), size=(n_classes, hidden_dim))
        else:
            W1 = np.zeros((0, input_dim))
            W2 = rng.normal(0., np.sqrt(1. / input_dim), size=(n_classes, input_dim))
        return cls(W1, np.zeros(hidden_dim), W2, np.zeros(n_classes), seed=seed)

    @classmethod
    def zeros(cls, input_dim: int, hidden_dim: int, n_classes: int) -> 'ToyNet':
        return cls(np.zeros((hidden_dim, input_dim)), np.zeros(hidden_dim),
                   np.zeros((n_classes, hidden_dim or input_dim)), np.zeros(n_classes))

    @property
    def input_dim(self) -> int:
        return self.W1.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.W1.shape[0]

    @property
    def n_classes(self) -> int:
        return self.W2.shape[0]

    @property
    def is_linear(self) -> bool:
        return self.hidden_dim == 0

    @property
    def parameters(self) -> List[np.ndarray]:
        return [self.W1, self.b1, self.W2, self.b2]

    @property
    def checksum(self) -> str:
        return sha1(self._payload()).hexdigest()

    def _check_input(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.input_dim:
            raise ToyNetDimensionMismatch(f'Expected inputs of {self.input_dim} values, got shape={X.shape}')
        return X

    def _forward(self, X: np.ndarray):
        """
        :return: `(z1, hidden, probabilities)`
        """
        if self.is_linear:
            return None, X, softmax(X @ self.W2.T + self.b2)
        z1 = X @ self.W1.T + self.b1
        hidden = np.maximum(z1, 0.)
        return z1, hidden, softmax(hidden @ self.W2.T + self.b2)

    def logits(self, x: np.ndarray) -> np.ndarray:
        x = self._check_input(x)
        hidden = x if self.is_linear else np.maximum(x @ self.W1.T + self.b1, 0.)
        return hidden @ self.W2.T + self.b2

    def forward_many(self, X: np.ndarray) -> np.ndarray:
        """
        :return: `(n_samples, n_classes)` softmax outputs
        """
        return self._forward(np.atleast_2d(self._check_input(X)))[2]

    def forward(self, x: np.ndarray) -> ProbabilityVector:
        x = self._check_input(x)
        if x.ndim != 1:
            raise ToyNetDimensionMismatch(f'Expected a single flattened input, shape={x.shape}')
        return ProbabilityVector.from_softmax(self.forward_many(x)[0])

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.forward_many(X), axis=1)

    def loss(self, x: np.ndarray, label: int) -> float:
        probabilities = self.forward_many(x)
        return float(cross_entropy(probabilities, np.array([label]))[0])

    def input_gradient(self, x: np.ndarray, label: int) -> np.ndarray:
        """
        Backpropagate the cross-entropy of `label` through softmax, linear and ReLU layers
        :return: `∂L/∂x`, same shape as `x`
        """
        x = self._check_input(x)
        if x.ndim != 1:
            raise ToyNetDimensionMismatch(f'Expected a single flattened input, shape={x.shape}')
        if not 0 <= label < self.n_classes:
            raise InputDomainError(f'Label={label} out of range [0, {self.n_classes})')
        z1, _, probabilities = self._forward(x[np.newaxis, :])
        delta = probabilities[0].copy()
        delta[label] -= 1.  # ∂L/∂logits
        if self.is_linear:
            return delta @ self.W2
        hidden_delta = (delta @ self.W2) * (z1[0] > 0.)
        return hidden_delta @ self.W1

    def parameter_gradients(self, X: np.ndarray, labels: np.ndarray) -> List[np.ndarray]:
        """
        :return: Mean gradients of the batch loss for `[W1, b1, W2, b2]`
        """
        n_samples = X.shape[0]
        z1, hidden, probabilities = self._forward(X)
        delta = probabilities.copy()
        delta[np.arange(n_samples), labels] -= 1.
        delta /= n_samples
        grad_W2 = delta.T @ hidden
        grad_b2 = delta.sum(axis=0)
        if self.is_linear:
            return [np.zeros_like(self.W1), np.zeros_like(self.b1), grad_W2, grad_b2]
        hidden_delta = (delta @ self.W2) * (z1 > 0.)
        return [hidden_delta.T @ X, hidden_delta.sum(axis=0), grad_W2, grad_b2]

    def accuracy(self, X: np.ndarray, labels: np.ndarray) -> float:
        labels = np.asarray(labels)
        if labels.size == 0:
            return 0.
        return float(np.mean(self.predict(X) == labels))

    def train(self, X: np.ndarray, labels: np.ndarray, epochs: int = 100, learning_rate: float = 0.1,
              batch_size: int = 32, seed: int = 0) -> TrainingReport:
        """
        Mini-batch gradient descent, in place. The sample order of every epoch only depends on `seed`
        :raises ToyNetDivergence: the loss stopped being finite
        """
        X = np.atleast_2d(self._check_input(X))
        labels = np.asarray(labels, dtype=np.int64)
        if labels.shape != (X.shape[0],):
            raise InputDomainError(f'Expected {X.shape[0]} labels, got shape={labels.shape}')
        if X.shape[0] == 0:
            raise InputDomainError('Cannot train on an empty dataset')
        if labels.min() < 0 or labels.max() >= self.n_classes:
            raise InputDomainError(f'Labels out of range [0, {self.n_classes})')

        rng = np.random.default_rng(seed)
        losses, accuracies = [], []
        for epoch in range(epochs):
            order = rng.permutation(X.shape[0])
            for start in range(0, X.shape[0], batch_size):
                batch = order[start:start + batch_size]
                gradients = self.parameter_gradients(X[batch], labels[batch])
                for parameter, gradient in zip(self.parameters, gradients):
                    parameter -= learning_rate * gradient

            probabilities = self.forward_many(X)
            loss = float(np.mean(cross_entropy(probabilities, labels)))
            if not np.isfinite(loss) or not all(np.all(np.isfinite(p)) for p in self.parameters):
                largest = max(float(np.abs(parameter).max(initial=0.)) for parameter in self.parameters)
                raise ToyNetDivergence(f'Training diverged on epoch={epoch} with learning_rate={learning_rate}, '
                                       f'loss={loss}, largest parameter={largest}')
            losses.append(loss)
            accuracies.append(float(np.mean(np.argmax(probabilities, axis=1) == labels)))
            logger.debug('Epoch %d loss=%.6f accuracy=%.4f', epoch, loss, accuracies[-1])

        self.manifest = dict(self.manifest, epochs=epochs, learning_rate=learning_rate, batch_size=batch_size,
                             train_seed=seed, n_samples=int(X.shape[0]))
        return TrainingReport(epochs, losses, accuracies)

    def _payload(self) -> bytes:
        return b''.join(np.ascontiguousarray(parameter, dtype='<f8').tobytes() for parameter in self.parameters)

    def to_bytes(self) -> bytes:
        """
        Magic, little endian header length, JSON header and float64 parameters `W1, b1, W2, b2`
        """
        header = json.dumps({
            'version': CHECKPOINT_VERSION,
            'input_dim': self.input_dim,
            'hidden_dim': self.hidden_dim,
            'n_classes': self.n_classes,
            'seed': self.seed,
            'manifest': self.manifest,
            'checksum': self.checksum,
        }, sort_keys=True).encode()
        return CHECKPOINT_MAGIC + struct.pack('<I', len(header)) + header + self._payload()

    @classmethod
    def from_bytes(cls, data: bytes) -> 'ToyNet':
        if not data.startswith(CHECKPOINT_MAGIC):
            raise NotValidCheckpoint('Not a ToyNet checkpoint')
        offset = len(CHECKPOINT_MAGIC)
        (header_length,) = struct.unpack_from('<I', data, offset)
        offset += 4
        header = json.loads(data[offset:offset + header_length].decode())
        offset += header_length
        if Version(header['version']).major != Version(CHECKPOINT_VERSION).major:
            raise NotValidCheckpoint(f'Checkpoint version={header["version"]} not supported')

        input_dim, hidden_dim, n_classes = header['input_dim'], header['hidden_dim'], header['n_classes']
        shapes = [(hidden_dim, input_dim), (hidden_dim,), (n_classes, hidden_dim or input_dim), (n_classes,)]
        payload = np.frombuffer(data, dtype='<f8', offset=offset)
        expected = sum(int(np.prod(shape)) for shape in shapes)
        if payload.size != expected:
            raise NotValidCheckpoint(f'Checkpoint has {payload.size} parameters, expected {expected}')
        parameters, position = [], 0
        for shape in shapes:
            size = int(np.prod(shape))
            parameters.append(payload[position:position + size].reshape(shape).copy())
            position += size
        net = cls(*parameters, seed=header['seed'], manifest=header['manifest'])
        if net.checksum != header['checksum']:
            raise NotValidCheckpoint('Checkpoint checksum does not match its parameters')
        return net

    def save(self, path: Union[str, Path]):
        with open(path, 'wb') as checkpoint:
            checkpoint.write(self.to_bytes())

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'ToyNet':
        with open(path, 'rb') as checkpoint:
            return cls.from_bytes(checkpoint.read())

    def copy(self) -> 'ToyNet':
        return ToyNet(*[parameter.copy() for parameter in self.parameters], seed=self.seed,
                      manifest=dict(self.manifest))
