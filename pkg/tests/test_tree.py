import numpy as np
import pytest

from bgn.dataset import Dataset
from bgn.errors import DimensionError
from bgn.tree import TreeConfig, TreeNode, best_split, fit_tree, predict_tree, render_tree


def ds(X, y):
    X = np.asarray(X, float)
    return Dataset(X, y, [f"x{i}" for i in range(X.shape[1])])


def slow_predict(node, x):
    """Recursive oracle evaluator."""
    if node.feature is None:
        return node.prediction
    return slow_predict(node.left if x[node.feature] <= node.threshold else node.right, x)


def routed_labels(node, X, y):
    """Check every leaf stores the exact mean of the labels routed to it."""
    if node.is_leaf:
        assert node.count == len(y)
        assert node.prediction == pytest.approx(y.mean(), abs=1e-12)
        return
    go = X[:, node.feature] <= node.threshold
    parent = np.sum((y - y.mean()) ** 2)
    child = np.sum((y[go] - y[go].mean()) ** 2) + np.sum((y[~go] - y[~go].mean()) ** 2)
    assert child < parent
    routed_labels(node.left, X[go], y[go])
    routed_labels(node.right, X[~go], y[~go])


def test_step_function_single_split():
    x = np.array([[-2.0], [-1.0], [1.0], [2.0]])
    y = 10.0 * (x[:, 0] > 0)
    tree = fit_tree(ds(x, y), TreeConfig(max_depth=1))
    assert tree.feature == 0 and tree.threshold == 0.0
    pred = predict_tree(tree, x)
    assert np.mean((pred - y) ** 2) == 0.0


def test_constant_labels_single_leaf():
    tree = fit_tree(ds(np.arange(10.0)[:, None], np.full(10, 4.0)), TreeConfig(max_depth=3))
    assert tree.is_leaf and tree.prediction == 4.0
    assert predict_tree(tree, np.array([100.0])) == 4.0


def test_threshold_tie_goes_left():
    node = TreeNode(0.0, 2, feature=0, threshold=1.5, left=TreeNode(-1.0, 1), right=TreeNode(1.0, 1))
    assert predict_tree(node, np.array([1.5])) == -1.0
    assert predict_tree(node, np.array([1.5000001])) == 1.0


def test_predict_dimension_mismatch():
    node = TreeNode(0.0, 2, feature=3, threshold=0.0, left=TreeNode(-1.0, 1), right=TreeNode(1.0, 1))
    with pytest.raises(DimensionError):
        predict_tree(node, np.zeros(2))


@pytest.mark.parametrize("seed", range(8))
def test_random_trees_match_recursive_oracle(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(120, 4))
    y = np.sin(X[:, 0]) + (X[:, 1] > 0) + 0.1 * rng.normal(size=120)
    tree = fit_tree(ds(X, y), TreeConfig(max_depth=4))
    assert tree.depth() <= 4
    Z = rng.normal(size=(200, 4))
    np.testing.assert_array_equal(predict_tree(tree, Z), [slow_predict(tree, z) for z in Z])
    routed_labels(tree, X, y)


def test_best_split_matches_exhaustive_search():
    rng = np.random.default_rng(9)
    X = rng.integers(0, 6, size=(40, 3)).astype(float)
    y = rng.normal(size=40)
    f, thr, sse = best_split(X, y, 1)
    best = None
    for j in range(3):
        vals = np.unique(X[:, j])
        for a, b in zip(vals[:-1], vals[1:]):
            go = X[:, j] <= (a + b) / 2
            s = np.sum((y[go] - y[go].mean()) ** 2) + np.sum((y[~go] - y[~go].mean()) ** 2)
            if best is None or s < best[2] - 1e-12:
                best = (j, (a + b) / 2, s)
    assert (f, thr) == best[:2]
    assert sse == pytest.approx(best[2], abs=1e-9)


def test_min_samples_leaf():
    rng = np.random.default_rng(10)
    X = rng.normal(size=(60, 2))
    y = rng.normal(size=60)
    tree = fit_tree(ds(X, y), TreeConfig(max_depth=5, min_samples_leaf=7))
    assert min(leaf.count for leaf in tree.leaves()) >= 7


def test_render_lists_every_leaf():
    rng = np.random.default_rng(11)
    X = rng.normal(size=(50, 2))
    tree = fit_tree(ds(X, X[:, 0] + X[:, 1]), TreeConfig(max_depth=2))
    text = render_tree(tree, ["a", "b"])
    assert text.count("predict") == len(tree.leaves())
    assert text.startswith("if ")


def test_config_validation():
    with pytest.raises(ValueError):
        TreeConfig(max_depth=0)
