'''
Dense complex matrices and the random ensembles they are drawn from.

Matrices are immutable values. Sampling is a pure function of (seed, trial index):
each trial owns a counter-based stream, so trials can run in any order or process.
'''

from dataclasses import dataclass
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from permlab.common import rng


@dataclass(frozen=True, eq=False)
class ComplexMatrix:
    '''
    n x n complex matrix held as a read-only numpy array.
    '''
    n: int
    entries: np.ndarray

    def __post_init__(self) -> None:
        entries = np.array(self.entries, dtype=np.complex128).reshape(-1)
        if self.n < 1:
            raise ValueError(f"dimension must be positive, got {self.n}")
        if entries.size != self.n * self.n:
            raise ValueError(f"expected {self.n * self.n} entries, got {entries.size}")
        if not np.all(np.isfinite(entries)):
            raise ValueError("matrix entries must be finite")
        entries = entries.reshape(self.n, self.n)
        entries.flags.writeable = False
        object.__setattr__(self, "entries", entries)

    @classmethod
    def from_rows(cls, rows) -> "ComplexMatrix":
        array = np.asarray(rows, dtype=np.complex128)
        if array.ndim != 2 or array.shape[0] != array.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {array.shape}")
        return cls(array.shape[0], array)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ComplexMatrix):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.entries, other.entries)

    def __hash__(self) -> int:
        return hash((self.n, self.entries.tobytes()))


class EnsembleKind(str, Enum):
    GaussianComplex = "gaussian"
    BernoulliBiased = "bernoulli"


class EnsembleSpec(BaseModel):
    '''
    Random ensemble: i.i.d. entries with mean parameter mu.

    gaussian:  mu + complex Gaussian with E|X - mu|^2 = 1
    bernoulli: -1 + mu or 1, each with probability 1/2
    '''
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: EnsembleKind = EnsembleKind.GaussianComplex
    mu: float = 0.0
    n: int = Field(ge=1)
    seed: int = Field(default=0, ge=0, lt=2**64)


def sample(spec: EnsembleSpec, trial_index: int) -> ComplexMatrix:
    '''Draw trial ``trial_index`` of the ensemble; bit-identical across calls'''
    if trial_index < 0:
        raise ValueError(f"trial index must be non-negative, got {trial_index}")
    gen = rng.stream(spec.seed, trial_index)
    size = spec.n * spec.n
    if spec.kind == EnsembleKind.GaussianComplex:
        entries = spec.mu + rng.complex_box_muller(gen, size)
    else:
        heads = gen.random(size) < 0.5
        entries = np.where(heads, -1.0 + spec.mu, 1.0).astype(np.complex128)
    return ComplexMatrix(spec.n, entries)


def all_ones(n: int) -> ComplexMatrix:
    '''The all-ones matrix J'''
    return ComplexMatrix(n, np.ones(n * n, dtype=np.complex128))


def affine_combine(j_scale: complex, a: ComplexMatrix, z: complex) -> ComplexMatrix:
    '''Return j_scale * J + z * A'''
    return ComplexMatrix(a.n, j_scale + z * a.entries)
