"""Layered parameter vectors and the fixed diagonal Gaussian they are sampled from."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Layer",
    "LayerPartition",
    "Genotype",
    "SamplingDistribution",
    "derive_variance",
    "sample",
    "average",
]

DEFAULT_SIGMA_FLOOR = 0.01


@dataclass(frozen=True)
class Layer:
    name: str
    start: int
    length: int


@dataclass(frozen=True)
class LayerPartition:
    """Contiguous named segments covering ``[0, total_len)``."""

    layers: tuple[Layer, ...]

    def __post_init__(self):
        if not self.layers:
            raise ValueError("partition needs at least one layer")
        names = set()
        cursor = 0
        for layer in self.layers:
            if layer.length < 1:
                raise ValueError(f"layer {layer.name!r} has non-positive length {layer.length}")
            if layer.start != cursor:
                raise ValueError(
                    f"layer {layer.name!r} starts at {layer.start}, expected {cursor}"
                )
            if layer.name in names:
                raise ValueError(f"duplicate layer name {layer.name!r}")
            names.add(layer.name)
            cursor += layer.length

    @classmethod
    def from_lengths(cls, named_lengths: Iterable[tuple[str, int]]) -> "LayerPartition":
        layers = []
        start = 0
        for name, length in named_lengths:
            layers.append(Layer(str(name), start, int(length)))
            start += int(length)
        return cls(tuple(layers))

    @classmethod
    def single(cls, length: int, name: str = "params") -> "LayerPartition":
        return cls.from_lengths([(name, length)])

    @property
    def total_len(self) -> int:
        last = self.layers[-1]
        return last.start + last.length

    def slices(self) -> list[slice]:
        return [slice(l.start, l.start + l.length) for l in self.layers]

    def to_list(self) -> list[list]:
        return [[l.name, l.start, l.length] for l in self.layers]

    @classmethod
    def from_list(cls, rows: Sequence[Sequence]) -> "LayerPartition":
        return cls(tuple(Layer(str(n), int(s), int(k)) for n, s, k in rows))


@dataclass(frozen=True, eq=False)
class Genotype:
    """A finite float64 parameter vector tied to a layer partition.

    The stored array is a private read-only copy, so instances can be
    shared freely between threads.
    """

    values: np.ndarray
    partition: LayerPartition

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True).reshape(-1)
        if values.shape[0] != self.partition.total_len:
            raise ValueError(
                f"genotype has {values.shape[0]} values but partition covers "
                f"{self.partition.total_len}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("genotype contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, partition: LayerPartition) -> "Genotype":
        return cls(np.zeros(partition.total_len), partition)

    def __len__(self) -> int:
        return self.values.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Genotype):
            return NotImplemented
        return self.partition == other.partition and np.array_equal(self.values, other.values)

    def identical(self, other: "Genotype") -> bool:
        """Bitwise equality, distinguishing -0.0 from 0.0."""
        return self.partition == other.partition and self.values.tobytes() == other.values.tobytes()


def derive_variance(base: Genotype, epsilon: float, sigma_floor: float = DEFAULT_SIGMA_FLOOR) -> np.ndarray:
    """Per-parameter variance from layer-wise magnitudes of ``base``.

    Every entry of layer ``L`` gets
    ``max(sigma_floor, epsilon * mean(|base[L]|))``. The absolute value
    keeps the result a valid variance; the floor stops all-zero layers
    from being frozen.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    if not (sigma_floor >= 0.0 and np.isfinite(sigma_floor)):
        raise ValueError(f"sigma_floor must be a finite non-negative number, got {sigma_floor}")
    variance = np.empty(len(base), dtype=np.float64)
    for segment in base.partition.slices():
        scale = epsilon * float(np.mean(np.abs(base.values[segment])))
        variance[segment] = max(sigma_floor, scale)
    variance.setflags(write=False)
    return variance


@dataclass(frozen=True, eq=False)
class SamplingDistribution:
    mean: Genotype
    variance: np.ndarray
    epsilon: float
    sigma_floor: float

    def __post_init__(self):
        variance = np.array(self.variance, dtype=np.float64, copy=True).reshape(-1)
        if variance.shape[0] != len(self.mean):
            raise ValueError("variance length does not match the mean genotype")
        if not np.all(np.isfinite(variance)) or np.any(variance < 0):
            raise ValueError("variance entries must be finite and non-negative")
        for segment in self.mean.partition.slices():
            part = variance[segment]
            if np.any(part != part[0]):
                raise ValueError("variance must be constant within each layer")
        variance.setflags(write=False)
        object.__setattr__(self, "variance", variance)

    @classmethod
    def from_base(
        cls, base: Genotype, epsilon: float, sigma_floor: float = DEFAULT_SIGMA_FLOOR
    ) -> "SamplingDistribution":
        return cls(base, derive_variance(base, epsilon, sigma_floor), epsilon, sigma_floor)

    def with_mean(self, mean: Genotype) -> "SamplingDistribution":
        """Same (fixed) variance, new centre."""
        if mean.partition != self.mean.partition:
            raise ValueError("new mean has a different partition")
        return SamplingDistribution(mean, self.variance, self.epsilon, self.sigma_floor)


def sample(dist: SamplingDistribution, rng: np.random.Generator) -> Genotype:
    """Draw one genotype from ``N(dist.mean, diag(dist.variance))``.

    Exactly ``len(mean)`` standard normals are consumed from ``rng``
    regardless of the variance, and zero-variance entries are copied
    from the mean bit for bit.
    """
    noise = rng.standard_normal(len(dist.mean))
    std = np.sqrt(dist.variance)
    values = np.where(std > 0.0, dist.mean.values + std * noise, dist.mean.values)
    return Genotype(values, dist.mean.partition)


def average(genotypes: Sequence[Genotype]) -> Genotype:
    """Elementwise mean, summed in list order.

    Entries on which all inputs agree bitwise are returned unchanged
    (``(v + v + v) / 3`` need not round back to ``v``), so averaging
    copies of one genotype is exact.
    """
    if len(genotypes) == 0:
        raise ValueError("cannot average an empty list of genotypes")
    first = genotypes[0]
    partition = first.partition
    total = np.zeros(partition.total_len, dtype=np.float64)
    first_bits = first.values.view(np.uint64)
    agree = np.ones(partition.total_len, dtype=bool)
    for g in genotypes:
        if g.partition != partition:
            raise ValueError("genotypes have mismatched partitions")
        total += g.values
        agree &= g.values.view(np.uint64) == first_bits
    return Genotype(np.where(agree, first.values, total / len(genotypes)), partition)
