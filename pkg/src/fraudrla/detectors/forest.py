"""Random forest of Gini-impurity CART trees, stored as flat node arrays."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..core import LabeledDataset
from ..numkit import make_rng

LEAF = -1


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int | None = None
    min_leaf: int = 1
    max_features: str | int = "sqrt"

    def features_per_split(self, n_features: int) -> int:
        if self.max_features == "sqrt":
            return max(1, int(np.sqrt(n_features)))
        if self.max_features == "all":
            return n_features
        return max(1, min(n_features, int(self.max_features)))


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # fraud probability at each node
    seed: int

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            np.asarray(d["feature"], np.int64),
            np.asarray(d["threshold"], float),
            np.asarray(d["left"], np.int64),
            np.asarray(d["right"], np.int64),
            np.asarray(d["value"], float),
            int(d["seed"]),
        )


def _best_split(x, y, feats, min_leaf):
    """Lowest weighted-Gini threshold split among ``feats``; None if no valid split."""
    m = len(y)
    sub = x[:, feats]
    order = np.argsort(sub, axis=0, kind="stable")
    xs = np.take_along_axis(sub, order, axis=0)
    ys = y[order]
    n_left = np.arange(1, m, dtype=float)[:, None]
    n_right = m - n_left
    pos_left = np.cumsum(ys, axis=0)[:-1]
    pos_right = ys.sum(axis=0) - pos_left
    # n * gini = 2 * pos * (n - pos) / n, summed over both children
    cost = 2 * pos_left * (n_left - pos_left) / n_left + 2 * pos_right * (n_right - pos_right) / n_right
    valid = xs[1:] > xs[:-1]
    valid &= (n_left >= min_leaf) & (n_right >= min_leaf)
    if not valid.any():
        return None
    cost = np.where(valid, cost, np.inf)
    flat = int(np.argmin(cost))
    i, j = divmod(flat, len(feats))
    return feats[j], 0.5 * (xs[i, j] + xs[i + 1, j])


def fit_tree(x: np.ndarray, y: np.ndarray, params: ForestParams, rng: np.random.Generator, seed: int = 0) -> Tree:
    n_features = x.shape[1]
    k = params.features_per_split(n_features)
    max_depth = np.inf if params.max_depth is None else params.max_depth
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(idx):
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(float(y[idx].mean()))
        return len(feature) - 1

    stack = [(new_node(np.arange(len(y))), np.arange(len(y)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        yn = y[idx]
        pos = yn.sum()
        if depth >= max_depth or pos == 0 or pos == len(yn) or len(yn) < 2 * params.min_leaf:
            continue
        order = rng.permutation(n_features)
        xn = x[idx]
        found = _best_split(xn, yn, order[:k], params.min_leaf)
        if found is None and k < n_features:
            # sampled features were all constant here; fall back to the rest
            found = _best_split(xn, yn, order[k:], params.min_leaf)
        if found is None:
            continue
        f, thr = found
        go_left = xn[:, f] <= thr
        li, ri = idx[go_left], idx[~go_left]
        feature[node] = int(f)
        threshold[node] = float(thr)
        left[node] = new_node(li)
        right[node] = new_node(ri)
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))
    return Tree(
        np.asarray(feature, np.int64),
        np.asarray(threshold, float),
        np.asarray(left, np.int64),
        np.asarray(right, np.int64),
        np.asarray(value, float),
        seed,
    )


@dataclass
class RandomForestModel:
    trees: list[Tree]
    params: ForestParams
    n_features: int

    def __post_init__(self):
        self._pack()

    def _pack(self):
        offsets = np.cumsum([0] + [t.n_nodes for t in self.trees])
        self._roots = offsets[:-1]
        self._feat = np.concatenate([t.feature for t in self.trees])
        self._thr = np.concatenate([t.threshold for t in self.trees])
        self._left = np.concatenate([np.where(t.left >= 0, t.left + o, LEAF) for t, o in zip(self.trees, offsets)])
        self._right = np.concatenate([np.where(t.right >= 0, t.right + o, LEAF) for t, o in zip(self.trees, offsets)])
        self._value = np.concatenate([t.value for t in self.trees])

    def predict_proba(self, rows) -> np.ndarray | float:
        x = np.asarray(rows, dtype=float)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[1] != self.n_features:
            raise ValueError("feature count does not match the forest")
        node = np.repeat(self._roots[:, None], len(x), axis=1)
        cols = np.broadcast_to(np.arange(len(x)), node.shape)
        while True:
            f = self._feat[node]
            internal = f != LEAF
            if not internal.any():
                break
            go_left = x[cols, np.where(internal, f, 0)] <= self._thr[node]
            node = np.where(internal, np.where(go_left, self._left[node], self._right[node]), node)
        proba = self._value[node].mean(axis=0)
        return float(proba[0]) if single else proba

    def to_dict(self) -> dict:
        return {"params": asdict(self.params), "n_features": self.n_features,
                "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, d: dict) -> "RandomForestModel":
        return cls([Tree.from_dict(t) for t in d["trees"]], ForestParams(**d["params"]), d["n_features"])


def forest_fit(train: LabeledDataset, params: ForestParams, seed: int) -> RandomForestModel:
    """Bootstrap-aggregated Gini trees; tree ``i`` uses its own child seed."""
    x, y = train.rows, train.labels.astype(float)
    if len(np.unique(y)) < 2:
        raise ValueError("forest training needs both classes present")
    child_seeds = np.random.SeedSequence(seed).generate_state(params.n_trees, dtype=np.uint64)
    trees = []
    for s in child_seeds:
        rng = make_rng(int(s))
        boot = rng.integers(0, len(y), size=len(y))
        trees.append(fit_tree(x[boot], y[boot], params, rng, seed=int(s)))
    return RandomForestModel(trees, params, x.shape[1])
