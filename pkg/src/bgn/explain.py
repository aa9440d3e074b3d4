"""Exact interventional Shapley values and relative importances for BANNs.

The value of a coalition S for an example x is the mean, over background rows z,
of f evaluated on the composite input that takes x on S and z elsewhere.
Players outside the explained feature set F always take x's value, so v(F) is
exactly f(x). Shapley values are computed by enumerating every subset of F.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from bgn.bann import layer_outputs, model_inputs
from bgn.dataset import EXPLAIN_STREAM, make_rng
from bgn.errors import BGNError, EnumerationLimitError

MAX_PLAYERS = 20
_ROW_BUDGET = 1 << 16


@dataclass
class ShapExplanation:
    example: np.ndarray
    phi: np.ndarray
    base_value: float
    model_output: float


@dataclass
class ImportanceReport:
    feature_names: tuple
    feature_si: np.ndarray
    feature_rsi: np.ndarray
    neuron_si: np.ndarray
    neuron_rsi: np.ndarray
    # neuron_level[k][j] maps input index -> rSI for neuron j of hidden layer k+1
    neuron_level: list = field(default_factory=list)
    n_explained: int = 0
    n_background: int = 0

    def to_dict(self):
        return {
            "feature_names": list(self.feature_names),
            "feature_si": self.feature_si.tolist(),
            "feature_rsi": self.feature_rsi.tolist(),
            "neuron_si": self.neuron_si.tolist(),
            "neuron_rsi": self.neuron_rsi.tolist(),
            "neuron_level": [
                [{str(i): v for i, v in neuron.items()} for neuron in layer] for layer in self.neuron_level
            ],
            "n_explained": self.n_explained,
            "n_background": self.n_background,
        }


def relative(si):
    si = np.asarray(si, dtype=float)
    total = si.sum()
    return si / total if total > 0 else np.zeros_like(si)


def _composites(x, background, features, masks):
    B = background.shape[0]
    rows = np.repeat(background[None, :, :], len(masks), axis=0)
    outside = np.ones(x.shape[0], dtype=bool)
    outside[features] = False
    rows[:, :, outside] = x[outside]
    for c, mask in enumerate(masks):
        on = [f for b, f in enumerate(features) if mask >> b & 1]
        if on:
            rows[c, :, on] = x[on][:, None]
    return rows.reshape(len(masks) * B, x.shape[0])


def _coalition_values(f, x, background, features):
    n = len(features)
    B = background.shape[0]
    values = np.empty(1 << n)
    chunk = max(1, _ROW_BUDGET // B)
    for start in range(0, 1 << n, chunk):
        masks = list(range(start, min(1 << n, start + chunk)))
        out = np.asarray(f(_composites(x, background, features, masks)), dtype=float)
        values[start : start + len(masks)] = out.reshape(len(masks), B).mean(axis=1)
    return values


def coalition_value(f, x, S, background, features=None):
    """Interventional value of coalition ``S`` (feature indices) for example ``x``."""
    x = np.asarray(x, dtype=float)
    background = np.atleast_2d(np.asarray(background, dtype=float))
    if background.shape[0] == 0:
        raise BGNError("background set is empty")
    features = list(range(x.shape[0])) if features is None else list(features)
    S = set(int(i) for i in S)
    mask = sum(1 << b for b, f_ in enumerate(features) if f_ in S)
    rows = _composites(x, background, features, [mask])
    return float(np.mean(f(rows)))


def shapley_exact(f, x, background, features=None):
    """Exact Shapley values of ``f`` at ``x`` over players ``features``.

    ``f`` maps a matrix of inputs to a vector of outputs. Returns one value per
    input column; columns outside ``features`` get 0.
    """
    x = np.asarray(x, dtype=float)
    background = np.atleast_2d(np.asarray(background, dtype=float))
    if background.shape[0] == 0:
        raise BGNError("background set is empty")
    features = list(range(x.shape[0])) if features is None else [int(i) for i in features]
    n = len(features)
    if n > MAX_PLAYERS:
        raise EnumerationLimitError(f"{n} players exceeds the enumeration limit of {MAX_PLAYERS}")
    phi = np.zeros(x.shape[0])
    output = float(np.asarray(f(x[None, :]), dtype=float)[0])
    if n == 0:
        return ShapExplanation(x, phi, output, output)
    v = _coalition_values(f, x, background, features)
    weights = [math.factorial(s) * math.factorial(n - s - 1) / math.factorial(n) for s in range(n)]
    sizes = np.array([bin(mask).count("1") for mask in range(1 << n)])
    for b, feat in enumerate(features):
        bit = 1 << b
        without = np.array([mask for mask in range(1 << n) if not mask & bit])
        w = np.array([weights[s] for s in sizes[without]])
        phi[feat] = float(np.sum(w * (v[without | bit] - v[without])))
    return ShapExplanation(example=x, phi=phi, base_value=float(v[0]), model_output=float(v[-1]))


def linear_shapley(coefs, x, background):
    """Closed-form interventional Shapley values of a linear function."""
    return np.asarray(coefs) * (np.asarray(x) - np.asarray(background).mean(axis=0))


def sample_background(data_or_matrix, size=64, seed=0):
    """Seeded subsample of at most ``size`` rows (rows kept in original order)."""
    X = getattr(data_or_matrix, "features", data_or_matrix)
    X = np.asarray(X)
    if X.shape[0] <= size:
        return X.copy()
    idx = np.sort(make_rng(seed, EXPLAIN_STREAM).choice(X.shape[0], size=size, replace=False))
    return X[idx]


def _mean_abs_phi(f, X, background, players, d):
    si = np.zeros(d)
    for x in X:
        si += np.abs(shapley_exact(f, x, background, players).phi)
    return si / X.shape[0]


def _mean_abs_linear(coefs, X, background):
    # exact for linear games: phi_i = c_i (x_i - mean background_i)
    return np.abs(linear_shapley(coefs, X, background)).mean(axis=0)


def importance_report(model, explain_set, background):
    """Predictor-level and neuron-level SHAP importances of a trained model.

    ``explain_set`` is a Dataset; ``background`` is a Dataset or a matrix of
    rows already in the model's input space.
    """
    Xe = model_inputs(model, explain_set)
    if Xe.shape[0] == 0:
        raise BGNError("explain set is empty")
    Xb = model_inputs(model, background) if hasattr(background, "features") else np.asarray(background, dtype=float)

    feature_si = _mean_abs_phi(model.predict_standardized, Xe, Xb, model.retained_features(), model.d)

    # inputs of every hidden layer for explained and background rows
    inputs_e, inputs_b = [Xe], [Xb]
    for layer in model.hidden_layers:
        inputs_e.append(layer_outputs(layer, inputs_e[-1]))
        inputs_b.append(layer_outputs(layer, inputs_b[-1]))

    neuron_si = _mean_abs_linear(model.output_weights, inputs_e[-1], inputs_b[-1])

    neuron_level = []
    for k, layer in enumerate(model.hidden_layers):
        per_neuron = []
        for neuron in layer.neurons:
            support = [int(i) for i in neuron.support]
            si = _mean_abs_linear(neuron.weights, inputs_e[k], inputs_b[k])
            rsi = relative(si[support]) if support else np.zeros(0)
            per_neuron.append({i: float(v) for i, v in zip(support, rsi)})
        neuron_level.append(per_neuron)

    return ImportanceReport(
        feature_names=model.feature_names,
        feature_si=feature_si,
        feature_rsi=relative(feature_si),
        neuron_si=neuron_si,
        neuron_rsi=relative(neuron_si),
        neuron_level=neuron_level,
        n_explained=int(Xe.shape[0]),
        n_background=int(Xb.shape[0]),
    )


def report_table(report, precision=4):
    lines = ["feature importances (predictor level)"]
    order = np.argsort(-report.feature_rsi, kind="stable")
    for i in order:
        lines.append(f"  {report.feature_names[i]:<16} SI={report.feature_si[i]:.{precision}g}  rSI={report.feature_rsi[i]:.{precision}g}")
    lines.append("hidden neuron importances (predictor level, last hidden layer)")
    for j in np.argsort(-report.neuron_rsi, kind="stable"):
        lines.append(f"  h{j + 1:<15} SI={report.neuron_si[j]:.{precision}g}  rSI={report.neuron_rsi[j]:.{precision}g}")
    lines.append("neuron-level input importances")
    for k, layer in enumerate(report.neuron_level, start=1):
        def name(i):
            return report.feature_names[i] if k == 1 else f"h{k - 1}_{i + 1}"

        for j, neuron in enumerate(layer, start=1):
            parts = ", ".join(f"{name(i)}={v:.{precision}g}" for i, v in neuron.items())
            lines.append(f"  h{k}_{j}: {parts or '(no inputs)'}")
    return "\n".join(lines)


def _pct(v):
    return f"{100.0 * v:.0f}%"


def _gray(rsi):
    # rSI 1 -> black, rSI 0 -> gray90 (lightest stroke that stays visible)
    return f"gray{int(round(90 * (1.0 - min(max(rsi, 0.0), 1.0))))}"


def report_to_dot(report, model):
    """Graphviz DOT drawing of a one-hidden-layer model annotated with rSI values."""
    if model.depth != 1:
        return report_table(report)
    features = sorted(model.retained_features(), key=lambda i: -report.feature_rsi[i])
    neurons = sorted(range(model.hidden_layers[0].width), key=lambda j: -report.neuron_rsi[j])
    lines = [
        "digraph bann {",
        "  rankdir=LR;",
        "  node [shape=box];",
    ]
    for i in features:
        name = report.feature_names[i]
        lines.append(f'  x{i} [label="{name}\\n{_pct(report.feature_rsi[i])}"];')
    for j in neurons:
        lines.append(f'  h{j} [label="h{j + 1}\\n{_pct(report.neuron_rsi[j])}", shape=circle];')
    lines.append('  out [label="Σ"];')
    for j in neurons:
        for i, rsi in report.neuron_level[0][j].items():
            lines.append(f'  x{i} -> h{j} [color="{_gray(rsi)}", penwidth=2];')
    for j in neurons:
        lines.append(f"  h{j} -> out;")
    lines.append("}")
    return "\n".join(lines) + "\n"
