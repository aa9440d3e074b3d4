"""Binary-activated neural networks: evaluation, serialization, equation rendering.

Hidden units output ``sgn(w . x + b)`` in {-1, +1} with ``sgn(0) = +1``. The
output unit is linear. Weights are stored in the standardized feature space of
the training data; ``standardization`` (when present) maps raw inputs there.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from bgn.dataset import Standardization
from bgn.errors import DimensionError, SchemaError, UnsupportedVersionError

FORMAT_VERSION = 1


def sign_pm(z):
    """Elementwise sign with the tie rule sgn(0) = +1."""
    return np.where(np.asarray(z) >= 0.0, 1.0, -1.0)


def preactivation(X, weights, bias):
    return np.asarray(X, dtype=float) @ weights + bias


@dataclass
class Neuron:
    weights: np.ndarray
    bias: float

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        self.bias = float(self.bias)
        if not (np.all(np.isfinite(self.weights)) and math.isfinite(self.bias)):
            raise ValueError("neuron parameters must be finite")

    @property
    def support(self):
        return np.flatnonzero(self.weights)

    def activate(self, X):
        return sign_pm(preactivation(X, self.weights, self.bias))

    def copy(self):
        return Neuron(self.weights.copy(), self.bias)


@dataclass
class BinaryLayer:
    neurons: list
    d_in: int

    def __post_init__(self):
        self.d_in = int(self.d_in)
        for j, n in enumerate(self.neurons):
            if n.weights.shape[0] != self.d_in:
                raise DimensionError(f"neuron {j} has {n.weights.shape[0]} weights, layer input is {self.d_in}")

    @property
    def width(self):
        return len(self.neurons)

    def copy(self):
        return BinaryLayer([n.copy() for n in self.neurons], self.d_in)


@dataclass
class BannModel:
    hidden_layers: list
    output_weights: np.ndarray
    output_bias: float
    feature_names: tuple
    standardization: Standardization | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.output_weights = np.asarray(self.output_weights, dtype=float).reshape(-1)
        self.output_bias = float(self.output_bias)
        self.feature_names = tuple(self.feature_names)
        if not self.hidden_layers:
            raise DimensionError("a BANN needs at least one hidden layer")
        d_prev = len(self.feature_names)
        for k, layer in enumerate(self.hidden_layers):
            if layer.d_in != d_prev:
                raise DimensionError(f"hidden layer {k + 1} expects {layer.d_in} inputs, previous width is {d_prev}")
            d_prev = layer.width
        if self.output_weights.shape[0] != d_prev:
            raise DimensionError(f"{self.output_weights.shape[0]} output weights for last hidden width {d_prev}")
        if self.standardization is not None and self.standardization.mean.shape[0] != self.d:
            raise DimensionError("standardization does not match the feature count")

    @property
    def d(self):
        return len(self.feature_names)

    @property
    def depth(self):
        """Number of hidden layers."""
        return len(self.hidden_layers)

    @property
    def widths(self):
        return [layer.width for layer in self.hidden_layers]

    def retained_features(self):
        """Indices of input features with a non-zero weight in the first hidden layer."""
        used = set()
        for n in self.hidden_layers[0].neurons:
            used.update(int(i) for i in n.support)
        return sorted(used)

    def to_model_space(self, X):
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.d:
            raise DimensionError(f"model expects {self.d} features, got {X.shape[-1]}")
        return self.standardization.apply(X) if self.standardization is not None else X

    def hidden_outputs(self, Z, upto=None):
        """Activation patterns of hidden layer ``upto`` (default: last) for standardized inputs."""
        A = np.atleast_2d(np.asarray(Z, dtype=float))
        upto = self.depth if upto is None else upto
        for layer in self.hidden_layers[:upto]:
            A = layer_outputs(layer, A)
        return A

    def predict_standardized(self, Z):
        Z = np.asarray(Z, dtype=float)
        out = self.hidden_outputs(Z) @ self.output_weights + self.output_bias
        return out if Z.ndim == 2 else float(out[0])

    def predict(self, X):
        """Prediction for raw-unit input(s); 1-D input gives a float."""
        return self.predict_standardized(self.to_model_space(X))

    def copy(self):
        return BannModel(
            [layer.copy() for layer in self.hidden_layers],
            self.output_weights.copy(),
            self.output_bias,
            self.feature_names,
            self.standardization,
            dict(self.metadata),
        )


def layer_outputs(layer, A):
    """Column-stacked neuron activations of ``layer`` for rows of ``A``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[1] != layer.d_in:
        raise DimensionError(f"layer expects {layer.d_in} inputs, got {A.shape[1]}")
    out = np.empty((A.shape[0], layer.width))
    for j, n in enumerate(layer.neurons):
        out[:, j] = n.activate(A)
    return out


def layer_forward(layer, x):
    """Activation pattern of a single input vector (or of each row of a matrix)."""
    x = np.asarray(x, dtype=float)
    out = layer_outputs(layer, x)
    return out[0] if x.ndim == 1 else out


def predict(model, x):
    return model.predict(x)


def model_inputs(model, data):
    """Rows of ``data`` expressed in the model's (standardized) input space."""
    if data.standardization is not None and data.standardization == model.standardization:
        return data.features
    return model.to_model_space(data.raw_features())


def predict_dataset(model, data):
    """Predictions for every row of ``data``, whichever space its features are in."""
    return model.predict_standardized(model_inputs(model, data))


def mse(pred, y):
    resid = np.asarray(pred, dtype=float) - np.asarray(y, dtype=float)
    return float(resid @ resid) / resid.shape[0]


def region_code(model, x, upto_layer):
    """Pattern of hidden layer ``upto_layer`` (1-based) for raw input(s) ``x``."""
    if not 1 <= upto_layer <= model.depth:
        raise ValueError(f"layer index {upto_layer} outside 1..{model.depth}")
    x = np.asarray(x, dtype=float)
    out = model.hidden_outputs(model.to_model_space(x), upto=upto_layer)
    return out[0] if x.ndim == 1 else out


# ---------------------------------------------------------------------------
# equation rendering


def _fmt(v, precision):
    v = float(v)
    if precision is None:
        return repr(v)
    return f"{v:.{precision}g}"


_FLIP = {"≥": "≤", "≤": "≥", ">": "<", "<": ">"}


def neuron_inequality(neuron, feature_names, standardization, positive_side, precision=6):
    """Inequality text, in raw feature units, describing one side of a hyperplane.

    ``positive_side`` selects the +1 side (w.z + b >= 0) or the -1 side.
    Coefficients are divided by the largest absolute coefficient so the leading
    feature reads with coefficient 1.
    """
    if standardization is not None:
        a = neuron.weights / standardization.std
        const = neuron.bias - float(a @ standardization.mean)
    else:
        a = neuron.weights.copy()
        const = neuron.bias
    rel = "≥" if positive_side else "<"
    support = np.flatnonzero(a)
    lead = support[np.argmax(np.abs(a[support]))]
    scale = abs(a[lead])
    if a[lead] < 0:
        scale = -scale
        rel = _FLIP[rel]
    coefs = a / scale
    rhs = -const / scale
    parts = []
    for i in support:
        c = coefs[i]
        name = feature_names[i]
        term = name if i == lead else f"{_fmt(abs(c), precision)} · {name}"
        if not parts:
            parts.append(term if c > 0 else f"-{term}")
        else:
            parts.append(f"{'+' if c > 0 else '-'} {term}")
    return f"{' '.join(parts)} {rel} {_fmt(rhs, precision)}"


def render_equation(model, precision=6):
    """Additive indicator form of a one-hidden-layer model.

    Each hidden unit contributes ``c * sgn(.) = 2|c| * 1{side} - |c|`` where the
    side is the +1 half-space for c >= 0 and the -1 half-space otherwise; the
    constants are folded into the leading base value. Deeper models get a
    layer-by-layer dump instead.
    """
    if model.depth != 1:
        return layered_dump(model, precision)
    names = model.feature_names
    retained = model.retained_features()
    base = model.output_bias
    terms = []
    for c, neuron in zip(model.output_weights, model.hidden_layers[0].neurons):
        if neuron.support.size == 0:
            base += c * (1.0 if neuron.bias >= 0 else -1.0)
            continue
        base -= abs(c)
        if c == 0.0:
            continue
        ineq = neuron_inequality(neuron, names, model.standardization, positive_side=c > 0, precision=precision)
        terms.append((2.0 * abs(c), ineq))
    terms.sort(key=lambda t: -t[0])
    args = ", ".join(names[i] for i in retained)
    text = f"B({args}) = {_fmt(base, precision)}"
    for coef, ineq in terms:
        text += f" + {_fmt(coef, precision)} · 𝟙{{{ineq}}}"
    return text


def layered_dump(model, precision=6):
    lines = [f"BANN with {model.depth} hidden layers, widths {model.widths}"]
    names = list(model.feature_names)
    for k, layer in enumerate(model.hidden_layers, start=1):
        lines.append(f"layer {k}:")
        for j, n in enumerate(layer.neurons, start=1):
            lin = " + ".join(f"{_fmt(w, precision)}·{names[i]}" for i, w in enumerate(n.weights) if w != 0.0)
            lines.append(f"  h{k}_{j} = sgn({lin or '0'} + {_fmt(n.bias, precision)})")
        names = [f"h{k}_{j}" for j in range(1, layer.width + 1)]
    out = " + ".join(f"{_fmt(c, precision)}·{names[j]}" for j, c in enumerate(model.output_weights))
    lines.append(f"output = {out or '0'} + {_fmt(model.output_bias, precision)}")
    if model.standardization is not None:
        lines.append("inputs are standardized: x' = (x - mean) / std")
        for name, mu, sd in zip(model.feature_names, model.standardization.mean, model.standardization.std):
            lines.append(f"  {name}: mean={_fmt(mu, precision)} std={_fmt(sd, precision)}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# serialization


def model_to_dict(model):
    return {
        "format_version": FORMAT_VERSION,
        "feature_names": list(model.feature_names),
        "standardization": None if model.standardization is None else model.standardization.to_list(),
        "hidden_layers": [
            [{"weights": [float(w) for w in n.weights], "bias": float(n.bias)} for n in layer.neurons]
            for layer in model.hidden_layers
        ],
        "output_weights": [float(w) for w in model.output_weights],
        "output_bias": float(model.output_bias),
        "metadata": {
            "seed": model.metadata.get("seed"),
            "dataset_name": model.metadata.get("dataset_name"),
            "train_mse": model.metadata.get("train_mse"),
            "valid_mse": model.metadata.get("valid_mse"),
        },
    }


def serialize(model):
    return json.dumps(model_to_dict(model), indent=2, ensure_ascii=False) + "\n"


def _require(obj, key, path):
    if not isinstance(obj, dict):
        raise SchemaError(path or "<root>", "expected an object")
    if key not in obj:
        raise SchemaError(f"{path}.{key}" if path else key, "missing required field")
    return obj[key]


def _real(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise SchemaError(path, f"expected a finite number, got {value!r}")
    return float(value)


def _reals(value, path):
    if not isinstance(value, list):
        raise SchemaError(path, "expected a list of numbers")
    return [_real(v, f"{path}[{i}]") for i, v in enumerate(value)]


def model_from_dict(doc):
    version = _require(doc, "format_version", "")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError("format_version", f"unsupported version {version!r} (expected {FORMAT_VERSION})")
    names = _require(doc, "feature_names", "")
    if not isinstance(names, list) or not all(isinstance(s, str) for s in names):
        raise SchemaError("feature_names", "expected a list of strings")
    std_doc = _require(doc, "standardization", "")
    stats = None
    if std_doc is not None:
        if not isinstance(std_doc, list) or len(std_doc) != len(names):
            raise SchemaError("standardization", "expected one {mean, std} entry per feature")
        means = [_real(_require(s, "mean", f"standardization[{i}]"), f"standardization[{i}].mean") for i, s in enumerate(std_doc)]
        stds = [_real(_require(s, "std", f"standardization[{i}]"), f"standardization[{i}].std") for i, s in enumerate(std_doc)]
        stats = Standardization(np.array(means), np.array(stds))
    layers_doc = _require(doc, "hidden_layers", "")
    if not isinstance(layers_doc, list) or not layers_doc:
        raise SchemaError("hidden_layers", "expected a non-empty list of layers")
    layers = []
    d_in = len(names)
    for k, layer_doc in enumerate(layers_doc):
        path = f"hidden_layers[{k}]"
        if not isinstance(layer_doc, list):
            raise SchemaError(path, "expected a list of neurons")
        neurons = []
        for j, nd in enumerate(layer_doc):
            npath = f"{path}[{j}]"
            w = _reals(_require(nd, "weights", npath), f"{npath}.weights")
            if len(w) != d_in:
                raise SchemaError(f"{npath}.weights", f"expected {d_in} weights, got {len(w)}")
            b = _real(_require(nd, "bias", npath), f"{npath}.bias")
            neurons.append(Neuron(np.array(w), b))
        layers.append(BinaryLayer(neurons, d_in))
        d_in = len(neurons)
    out_w = _reals(_require(doc, "output_weights", ""), "output_weights")
    if len(out_w) != d_in:
        raise SchemaError("output_weights", f"expected {d_in} weights, got {len(out_w)}")
    out_b = _real(_require(doc, "output_bias", ""), "output_bias")
    meta = doc.get("metadata") or {}
    if not isinstance(meta, dict):
        raise SchemaError("metadata", "expected an object")
    return BannModel(layers, np.array(out_w), out_b, tuple(names), stats, dict(meta))


def deserialize(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("<root>", f"not valid JSON: {exc}") from None
    return model_from_dict(doc)


def save_model(model, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize(model))


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return deserialize(fh.read())
