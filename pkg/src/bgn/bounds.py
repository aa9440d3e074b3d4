"""Within-region label variance lower bounds on a BANN's training MSE.

A network's prediction is constant on each region of input space sharing an
activation pattern, so its training MSE can never beat predicting each region's
mean label. The bound at hidden layer k weights each region's label variance by
its share of examples; deeper layers merge regions, so bounds can only grow
with depth, and the final bound (regions of equal output) sits below the MSE.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from bgn.bann import layer_outputs, model_inputs, mse

SLACK = 1e-9


@dataclass(frozen=True)
class RegionStats:
    pattern: tuple
    count: int
    label_mean: float
    label_variance: float


@dataclass(frozen=True)
class BoundChain:
    bounds: tuple
    region_counts: tuple
    train_mse: float

    @property
    def holds(self):
        chain = list(self.bounds) + [self.train_mse]
        return all(a <= b + SLACK for a, b in zip(chain, chain[1:]))

    def table(self, precision=6):
        rows = [f"{'layer':>6} {'regions':>8} {'bound':>14}"]
        for k, (n, b) in enumerate(zip(self.region_counts, self.bounds), start=1):
            label = str(k) if k < len(self.bounds) else f"{k} (out)"
            rows.append(f"{label:>6} {n:>8} {b:>14.{precision}g}")
        rows.append(f"{'loss':>6} {'':>8} {self.train_mse:>14.{precision}g}")
        rows.append(f"chain holds: {self.holds}")
        return "\n".join(rows)


def group_stats(keys, y):
    """Per-group (key, count, mean, population variance), groups ordered by key."""
    keys = np.asarray(keys)
    if keys.ndim == 1:
        keys = keys[:, None]
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    counts = np.bincount(inverse)
    means = np.bincount(inverse, weights=y) / counts
    dev = y - means[inverse]
    variances = np.bincount(inverse, weights=dev * dev) / counts
    return uniq, counts, means, variances


def _regions(keys, y):
    uniq, counts, means, variances = group_stats(keys, y)
    return [
        RegionStats(tuple(float(v) for v in u), int(c), float(mu), float(var))
        for u, c, mu, var in zip(uniq, counts, means, variances)
    ]


def partition_regions(model, data, layer):
    """Training examples grouped by their activation pattern at hidden layer ``layer``."""
    if not 1 <= layer <= model.depth:
        raise ValueError(f"layer {layer} outside 1..{model.depth}")
    codes = model.hidden_outputs(model_inputs(model, data), upto=layer)
    return _regions(codes, np.asarray(data.labels, dtype=float))


def output_regions(model, data):
    """Training examples grouped by identical network output."""
    pred = model.predict_standardized(model_inputs(model, data))
    return _regions(pred, np.asarray(data.labels, dtype=float))


def bound_value(regions, m):
    return float(sum(r.count * r.label_variance for r in regions) / m)


def bound_chain(model, data):
    y = np.asarray(data.labels, dtype=float)
    m = y.shape[0]
    levels = [partition_regions(model, data, k) for k in range(1, model.depth + 1)]
    levels.append(output_regions(model, data))
    loss = mse(model.predict_standardized(model_inputs(model, data)), y)
    return BoundChain(
        bounds=tuple(bound_value(lv, m) for lv in levels),
        region_counts=tuple(len(lv) for lv in levels),
        train_mse=loss,
    )


def pooled_bound(model, data, layer):
    """Bound at level ``layer + 1`` rebuilt from the layer-``layer`` regions alone.

    Each finer region is mapped to its coarser region by pushing its pattern
    through the next layer (or the output unit), and the coarser variances are
    recovered with the law of total variance. Level ``model.depth + 1`` is the
    output level.
    """
    fine = partition_regions(model, data, layer)
    patterns = np.array([r.pattern for r in fine], dtype=float)
    if layer < model.depth:
        coarse_keys = layer_outputs(model.hidden_layers[layer], patterns)
    else:
        coarse_keys = (patterns @ model.output_weights + model.output_bias)[:, None]
    _, inverse = np.unique(coarse_keys, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    counts = np.array([r.count for r in fine], dtype=float)
    means = np.array([r.label_mean for r in fine])
    variances = np.array([r.label_variance for r in fine])
    group_n = np.bincount(inverse, weights=counts)
    group_mean = np.bincount(inverse, weights=counts * means) / group_n
    within = np.bincount(inverse, weights=counts * variances)
    between = np.bincount(inverse, weights=counts * (means - group_mean[inverse]) ** 2)
    return float((within + between).sum() / counts.sum())
