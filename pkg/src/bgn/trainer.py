"""Greedy construction of binary-activated networks, one hidden neuron at a time.

Each iteration fits a sparse Lasso direction to the current residuals, places the
hyperplane at the split of projected examples with the smallest within-side
residual variance, fits the output weight and bias correction in closed form
and subtracts the new neuron's contribution from the residuals. Optionally,
earlier neurons are refit on the residuals they leave behind and kept only if
the training MSE drops. Once a layer stops improving on validation data it is
frozen and the next layer is grown on its +/-1 outputs.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from bgn.bann import BannModel, BinaryLayer, Neuron, layer_outputs, mse
from bgn.dataset import TRAIN_STREAM, make_rng
from bgn.errors import DegenerateDirectionError, EmptySideError
from bgn.lasso import DEFAULT_MAX_ITERS, DEFAULT_TOL, SparsityTarget, fit_with_sparsity

log = logging.getLogger(__name__)

TRACE_FORMAT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    max_width: int = 1000
    max_hidden_layers: int = 3
    sparsity: SparsityTarget = SparsityTarget(2)
    patience: int = 10
    seed: int = 0
    improvement1_enabled: bool = True
    lasso_tol: float = DEFAULT_TOL
    lasso_max_iters: int = DEFAULT_MAX_ITERS
    # recompute residuals from scratch after every update and compare
    check_residuals: bool = False

    def __post_init__(self):
        for name in ("max_width", "max_hidden_layers", "patience"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


@dataclass(frozen=True)
class SplitObjective:
    value: float
    left_count: int
    right_count: int
    margin: float
    threshold: float


@dataclass(frozen=True)
class OutputFit:
    w_out: float
    b_out: float
    rho_plus: float
    rho_minus: float
    m_plus: int
    m_minus: int


def _tie_tolerance(values):
    return 1e-12 * max(1.0, float(np.max(np.abs(values))))


def search_bias(w, X, r):
    """Best bias for direction ``w`` under the weighted within-side variance objective.

    Examples are sorted by projection ``w . x``; every cut between two
    consecutive distinct projections is scored with prefix sums. Among
    minimizers (up to a 1e-12 relative tolerance) the widest gap wins, then
    the leftmost cut. The returned threshold is minus the midpoint of the gap,
    so the left block maps to -1 and the right block to +1.
    """
    w = np.asarray(w, dtype=float)
    if not np.any(w != 0.0):
        raise DegenerateDirectionError("direction has no non-zero weight")
    r = np.asarray(r, dtype=float)
    m = r.shape[0]
    s = np.asarray(X, dtype=float) @ w
    order = np.argsort(s, kind="stable")
    ss = s[order]
    rr = r[order] - r.mean()
    cuts = np.flatnonzero(ss[1:] > ss[:-1])
    if cuts.size == 0:
        raise DegenerateDirectionError("all projections are identical")
    cs = np.cumsum(rr)
    cs2 = np.cumsum(rr * rr)
    tot, tot2 = cs[-1], cs2[-1]
    n_left = (cuts + 1).astype(float)
    n_right = m - n_left
    sl, sl2 = cs[cuts], cs2[cuts]
    sse_left = sl2 - sl * sl / n_left
    sse_right = (tot2 - sl2) - (tot - sl) ** 2 / n_right
    values = (sse_left + sse_right) / m
    best = values.min()
    tied = np.flatnonzero(values <= best + _tie_tolerance(values))
    gaps = ss[cuts[tied] + 1] - ss[cuts[tied]]
    pick = tied[int(np.argmax(gaps))]
    k = cuts[pick]
    return SplitObjective(
        value=float(max(values[pick], 0.0)),
        left_count=int(k + 1),
        right_count=int(m - k - 1),
        margin=float(ss[k + 1] - ss[k]),
        threshold=float(-(ss[k] + ss[k + 1]) / 2.0),
    )


def fit_output(r, side):
    """Least-squares output weight and bias correction for one +/-1 feature."""
    r = np.asarray(r, dtype=float)
    plus = np.asarray(side) > 0
    m_plus = int(plus.sum())
    m_minus = r.shape[0] - m_plus
    if m_plus == 0 or m_minus == 0:
        raise EmptySideError(f"split leaves an empty side ({m_plus} / {m_minus})")
    rho_plus = float(r[plus].mean())
    rho_minus = float(r[~plus].mean())
    return OutputFit(
        w_out=0.5 * (rho_plus - rho_minus),
        b_out=0.5 * (rho_plus + rho_minus),
        rho_plus=rho_plus,
        rho_minus=rho_minus,
        m_plus=m_plus,
        m_minus=m_minus,
    )


def _mean_sq(r):
    return float(r @ r) / r.shape[0]


@dataclass
class _Candidate:
    neuron: Neuron
    fit: OutputFit
    split: SplitObjective
    side: np.ndarray
    nnz: int

    @property
    def contribution(self):
        return self.fit.w_out * self.side + self.fit.b_out


class LayerState:
    """Mutable state while one hidden layer grows.

    ``X``/``Xv`` are the layer inputs for training/validation rows; ``r`` the
    current training residuals.
    """

    def __init__(self, X, y, Xv, yv, config):
        self.X = X
        self.y = y
        self.Xv = Xv
        self.yv = yv
        self.config = config
        self.neurons = []
        self.w_out = []
        self.b_out = []
        self.sides = []
        self.valid_sides = []
        self.r = np.array(y, dtype=float)

    @property
    def width(self):
        return len(self.neurons)

    @property
    def output_bias(self):
        return math.fsum(self.b_out)

    def train_mse(self):
        return _mean_sq(self.r)

    def valid_predictions(self):
        if not self.neurons:
            return np.zeros(self.Xv.shape[0])
        S = np.column_stack(self.valid_sides)
        return S @ np.array(self.w_out) + self.output_bias

    def valid_mse(self):
        return mse(self.valid_predictions(), self.yv)

    def recomputed_residuals(self):
        if not self.neurons:
            return np.array(self.y, dtype=float)
        S = np.column_stack(self.sides)
        return self.y - (S @ np.array(self.w_out) + self.output_bias)

    def fit_candidate(self, r):
        cfg = self.config
        sol = fit_with_sparsity(self.X, r, cfg.sparsity, tol=cfg.lasso_tol, max_iters=cfg.lasso_max_iters)
        if sol.nnz == 0:
            raise DegenerateDirectionError("Lasso direction is all-zero")
        split = search_bias(sol.weights, self.X, r)
        neuron = Neuron(sol.weights.copy(), split.threshold)
        side = neuron.activate(self.X)
        try:
            fit = fit_output(r, side)
        except EmptySideError as exc:
            raise DegenerateDirectionError(str(exc)) from None
        return _Candidate(neuron, fit, split, side, sol.nnz)

    def append(self, cand):
        self.neurons.append(cand.neuron)
        self.w_out.append(cand.fit.w_out)
        self.b_out.append(cand.fit.b_out)
        self.sides.append(cand.side)
        self.valid_sides.append(cand.neuron.activate(self.Xv))

    def set(self, p, cand):
        self.neurons[p] = cand.neuron
        self.w_out[p] = cand.fit.w_out
        self.b_out[p] = cand.fit.b_out
        self.sides[p] = cand.side
        self.valid_sides[p] = cand.neuron.activate(self.Xv)

    def check(self):
        if self.config.check_residuals:
            np.testing.assert_allclose(self.r, self.recomputed_residuals(), rtol=0, atol=1e-8 * max(1.0, float(np.abs(self.y).max())))

    def snapshot(self):
        return BinaryLayer([n.copy() for n in self.neurons], self.X.shape[1]), list(self.w_out), self.output_bias


def add_neuron(state):
    """Grow ``state`` by one neuron fit to the current residuals.

    Returns the iteration record. Raises DegenerateDirectionError when no
    neuron can be fit or the fitted one would not lower the training MSE;
    ``state`` is left untouched in that case.
    """
    if state.width >= state.config.max_width:
        raise ValueError("layer already at max_width")
    before = state.train_mse()
    cand = state.fit_candidate(state.r)
    r_new = state.r - cand.contribution
    after = _mean_sq(r_new)
    if not after < before:
        raise DegenerateDirectionError(f"new neuron does not lower training MSE ({before!r} -> {after!r})")
    state.append(cand)
    state.r = r_new
    state.check()
    return {
        "t": state.width,
        "train_mse_before": before,
        "train_mse_after": after,
        "rho_plus": cand.fit.rho_plus,
        "rho_minus": cand.fit.rho_minus,
        "m_plus": cand.fit.m_plus,
        "m_minus": cand.fit.m_minus,
        "w_out": cand.fit.w_out,
        "b_out": cand.fit.b_out,
        "margin": cand.split.margin,
        "threshold": cand.split.threshold,
        "split_objective": cand.split.value,
        "nnz": cand.nnz,
    }


def replace_neuron(state, p):
    """Refit neuron ``p`` (0-based) on the residuals it leaves; keep only a strict improvement."""
    before = state.train_mse()
    r_without = state.r + (state.w_out[p] * state.sides[p] + state.b_out[p])
    try:
        cand = state.fit_candidate(r_without)
    except DegenerateDirectionError:
        return {"p": p + 1, "accepted": False, "train_mse_before": before, "train_mse_after": before}
    r_new = r_without - cand.contribution
    after = _mean_sq(r_new)
    accepted = after < before
    if accepted:
        state.set(p, cand)
        state.r = r_new
        state.check()
    return {"p": p + 1, "accepted": bool(accepted), "train_mse_before": before, "train_mse_after": after if accepted else before,
            "candidate_mse": after}


def replace_random_neuron(state, rng):
    """One replacement attempt on a uniformly drawn neuron."""
    p = int(rng.integers(0, state.width))
    return replace_neuron(state, p)


@dataclass
class TrainTrace:
    iterations: list = field(default_factory=list)
    layers: list = field(default_factory=list)
    best: dict = field(default_factory=dict)

    def to_dict(self):
        return {"format_version": TRACE_FORMAT_VERSION, "iterations": self.iterations, "layers": self.layers, "best": self.best}


def _build_model(frozen, layer_snapshot, train, metadata):
    layer, w_out, b = layer_snapshot
    return BannModel(
        hidden_layers=[lay.copy() for lay in frozen] + [layer],
        output_weights=np.array(w_out, dtype=float),
        output_bias=b,
        feature_names=train.feature_names,
        standardization=train.standardization,
        metadata=dict(metadata),
    )


def train(train_data, valid_data, config=TrainConfig()):
    """Run the full greedy procedure and return the best-validation model and the trace."""
    rng = make_rng(config.seed, TRAIN_STREAM)
    y, yv = train_data.labels, valid_data.labels
    trace = TrainTrace()
    frozen = []
    X, Xv = train_data.features, valid_data.features
    best_valid = math.inf
    best_snapshot = None
    best_info = {}

    for z in range(1, config.max_hidden_layers + 1):
        state = LayerState(X, y, Xv, yv, config)
        layer_best_valid = math.inf
        layer_best = None
        stale = 0
        stop_reason = "max_width"
        while state.width < config.max_width:
            try:
                rec = add_neuron(state)
            except DegenerateDirectionError as exc:
                stop_reason = f"degenerate: {exc}"
                break
            rec["layer"] = z
            t = state.width
            attempts = []
            if config.improvement1_enabled and t > 1:
                for _ in range(t):
                    attempts.append(replace_random_neuron(state, rng))
            rec["replacements"] = attempts
            rec["train_mse_final"] = state.train_mse()
            valid = state.valid_mse()
            rec["valid_mse"] = valid
            trace.iterations.append(rec)
            log.debug("layer %d width %d train %.6g valid %.6g", z, t, rec["train_mse_final"], valid)
            if valid < layer_best_valid:
                layer_best_valid = valid
                layer_best = state.snapshot()
                stale = 0
            else:
                stale += 1
            if valid < best_valid:
                best_valid = valid
                best_snapshot = (list(frozen), state.snapshot())
                best_info = {"depth": z, "width": t, "valid_mse": valid}
            if stale >= config.patience:
                stop_reason = "patience"
                break
        trace.layers.append({
            "layer": z,
            "iterations": state.width,
            "best_width": 0 if layer_best is None else layer_best[0].width,
            "best_valid_mse": None if layer_best is None else layer_best_valid,
            "stop_reason": stop_reason,
        })
        log.info("layer %d stopped (%s) with best width %s", z, stop_reason, trace.layers[-1]["best_width"])
        if layer_best is None:
            break
        frozen_layer = layer_best[0]
        frozen.append(frozen_layer)
        X = layer_outputs(frozen_layer, X)
        Xv = layer_outputs(frozen_layer, Xv)

    metadata = {"seed": config.seed, "dataset_name": train_data.name}
    if best_snapshot is None:
        empty = BinaryLayer([], train_data.d)
        model = _build_model([], (empty, [], float(np.mean(y))), train_data, metadata)
        best_info = {"depth": 1, "width": 0, "valid_mse": None, "degenerate": True}
    else:
        model = _build_model(best_snapshot[0], best_snapshot[1], train_data, metadata)
    model.metadata["train_mse"] = mse(model.predict_standardized(train_data.features), y)
    model.metadata["valid_mse"] = mse(model.predict_standardized(valid_data.features), yv)
    best_info["train_mse"] = model.metadata["train_mse"]
    trace.best = best_info
    return model, trace

