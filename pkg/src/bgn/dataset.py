"""Tabular regression data: CSV loading, seeded splits, feature standardization.

Randomness
----------
Every stochastic step takes an explicit integer seed and draws from
``numpy.random.Generator(numpy.random.PCG64(SeedSequence(seed, spawn_key=(stream,))))``
where ``stream`` separates the split (0), training (1) and explanation (2)
draws of one run. PCG64 is a 128-bit-state permuted congruential generator whose
output for a given seed is fixed by NumPy's stream-compatibility policy, so
results are reproducible across platforms. There is no module-level RNG state.

Split rule: the row indices are shuffled with ``Generator.permutation``; the first
``floor(train_fraction * m)`` shuffled rows form the training set, the next
``floor(valid_fraction * m)`` the validation set, and the remainder the test set.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from bgn.errors import (
    DataError,
    EmptyFileError,
    EmptySplitError,
    MissingColumnError,
    MissingFileError,
    ParseError,
)

STD_FLOOR = 1e-12
SPLIT_STREAM, TRAIN_STREAM, EXPLAIN_STREAM = 0, 1, 2


def make_rng(seed, stream=SPLIT_STREAM):
    """PCG64 generator for one named stream of a run seed."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(stream,))))


@dataclass(frozen=True)
class Standardization:
    mean: np.ndarray
    std: np.ndarray

    def apply(self, X):
        return (np.asarray(X, dtype=float) - self.mean) / self.std

    def invert(self, Z):
        return np.asarray(Z, dtype=float) * self.std + self.mean

    def to_list(self):
        return [{"mean": float(m), "std": float(s)} for m, s in zip(self.mean, self.std)]

    @classmethod
    def from_list(cls, items):
        return cls(
            mean=np.array([float(it["mean"]) for it in items]),
            std=np.array([float(it["std"]) for it in items]),
        )

    def __eq__(self, other):
        if not isinstance(other, Standardization):
            return NotImplemented
        return np.array_equal(self.mean, other.mean) and np.array_equal(self.std, other.std)

    __hash__ = None


@dataclass(frozen=True)
class Dataset:
    """Feature matrix, labels and feature names.

    When ``standardization`` is set, ``features`` hold z-scores computed with
    those statistics; labels are always in their original units.
    """

    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple
    standardization: Standardization | None = None
    name: str = ""
    indices: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        X = np.array(self.features, dtype=float)
        y = np.array(self.labels, dtype=float).reshape(-1)
        if X.ndim != 2:
            raise DataError(f"features must be a 2-D matrix, got shape {X.shape}")
        if X.shape[0] != y.shape[0]:
            raise DataError(f"{X.shape[0]} feature rows but {y.shape[0]} labels")
        if len(self.feature_names) != X.shape[1]:
            raise DataError(f"{len(self.feature_names)} names for {X.shape[1]} features")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise DataError("features and labels must be finite")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def m(self):
        return self.features.shape[0]

    @property
    def d(self):
        return self.features.shape[1]

    def raw_features(self):
        """Features in original units."""
        if self.standardization is None:
            return self.features
        return self.standardization.invert(self.features)

    def unstandardize(self):
        return replace(self, features=self.raw_features(), standardization=None)

    def subset(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        base = self.indices if self.indices is not None else np.arange(self.m)
        return replace(self, features=self.features[idx], labels=self.labels[idx], indices=base[idx])


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.70
    valid_fraction: float = 0.15
    seed: int = 0

    def __post_init__(self):
        for name in ("train_fraction", "valid_fraction"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        if self.train_fraction + self.valid_fraction >= 1.0:
            raise ValueError("train_fraction + valid_fraction must be < 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def _parse_cell(text, row, column):
    try:
        value = float(text)
    except ValueError:
        raise ParseError(row, column, text) from None
    if not math.isfinite(value):
        raise ParseError(row, column, text)
    return value


def load_csv(path, target_column, name=None):
    """Read a header-first, comma-separated numeric table.

    Row numbers in parse errors count the header as row 1.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or not any(h.strip() for h in header):
            raise EmptyFileError(f"{path} is empty")
        header = [h.strip() for h in header]
        if target_column not in header:
            raise MissingColumnError(f"target column {target_column!r} not in header {header}")
        t = header.index(target_column)
        rows = []
        for lineno, record in enumerate(reader, start=2):
            if not record or (len(record) == 1 and not record[0].strip()):
                continue
            if len(record) != len(header):
                raise DataError(f"row {lineno}: expected {len(header)} cells, found {len(record)}")
            rows.append([_parse_cell(cell.strip(), lineno, header[j]) for j, cell in enumerate(record)])
    if not rows:
        raise EmptyFileError(f"{path} has a header but no data rows")
    table = np.array(rows, dtype=float)
    keep = [j for j in range(len(header)) if j != t]
    return Dataset(
        features=table[:, keep],
        labels=table[:, t],
        feature_names=tuple(header[j] for j in keep),
        name=name if name is not None else path.stem,
    )


def split_sizes(m, spec):
    n_train = math.floor(spec.train_fraction * m + 1e-9)
    n_valid = math.floor(spec.valid_fraction * m + 1e-9)
    return n_train, n_valid, m - n_train - n_valid


def split(data, spec):
    n_train, n_valid, n_test = split_sizes(data.m, spec)
    if min(n_train, n_valid, n_test) < 1:
        raise EmptySplitError(
            f"m={data.m} with fractions ({spec.train_fraction}, {spec.valid_fraction}) "
            f"gives split sizes ({n_train}, {n_valid}, {n_test})"
        )
    perm = make_rng(spec.seed).permutation(data.m)
    return (
        data.subset(perm[:n_train]),
        data.subset(perm[n_train : n_train + n_valid]),
        data.subset(perm[n_train + n_valid :]),
    )


def fit_standardization(X):
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std < STD_FLOOR, 1.0, std)
    return Standardization(mean=mean, std=std)


def standardize(train, others=()):
    """Z-score every dataset with statistics of ``train`` (population std)."""
    if train.m == 0:
        raise DataError("cannot standardize an empty training set")
    stats = fit_standardization(train.raw_features())

    def _apply(ds):
        return replace(ds, features=stats.apply(ds.raw_features()), standardization=stats)

    return _apply(train), [_apply(ds) for ds in others]
