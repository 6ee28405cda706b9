"""Gradient-boosted regression trees with L1 loss.

Boosted regression trees under L1 loss: the boosting gradient is
sign(residual) and each leaf's value is the median residual of the rows it
holds, the exact minimizer of sum |r - c|, so every boosting step is a
guaranteed non-increase of training L1 loss whatever partition the tree
picked. Trees are grown by variance reduction on the residuals themselves
rather than on their signs: sign-response growth leaves nearly-fit rows
stranded in large-residual leaves (their sign is noise, so no split
separates them, and min_leaf blocks rescue splits for small pockets), and
the shared median then drags them away from their fit every iteration.
Splits are exact greedy over at most 64 quantile bins per feature.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import BadParams, FeatureMismatch

FORMAT_NAME = "tree-ensemble"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class Tree:
    """Flat-array binary tree. feature[i] == -1 marks a leaf; cover[i] is the
    number of training rows that passed through node i (needed by the SHAP
    path algorithm). Split rule: x[feature] <= threshold goes left."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    cover: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        n = X.shape[0]
        node = np.zeros(n, dtype=np.int64)
        while True:
            feat = self.feature[node]
            active = feat >= 0
            if not active.any():
                break
            rows = np.nonzero(active)[0]
            anodes = node[rows]
            go_left = X[rows, feat[rows]] <= self.threshold[anodes]
            node[rows] = np.where(go_left, self.left[anodes], self.right[anodes])
        return self.value[node].copy()

    def max_feature(self) -> int:
        used = self.feature[self.feature >= 0]
        return int(used.max()) if used.size else -1

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "cover": self.cover.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            feature=np.asarray(d["feature"], dtype=np.int64),
            threshold=np.asarray(d["threshold"], dtype=np.float64),
            left=np.asarray(d["left"], dtype=np.int64),
            right=np.asarray(d["right"], dtype=np.int64),
            value=np.asarray(d["value"], dtype=np.float64),
            cover=np.asarray(d["cover"], dtype=np.float64),
        )


@dataclass(frozen=True)
class TreeEnsemble:
    trees: tuple[Tree, ...]
    learning_rate: float
    base_score: float
    n_features: int
    feature_names: tuple[str, ...] = ()
    loss: str = "l1"
    loss_checkpoints: tuple[float, ...] = ()

    def __post_init__(self):
        for t in self.trees:
            if t.max_feature() >= self.n_features:
                raise FeatureMismatch(
                    f"tree splits on feature {t.max_feature()} "
                    f"but ensemble has {self.n_features}"
                )
            if not np.all(np.isfinite(t.value)):
                raise BadParams("non-finite leaf value")

    @property
    def n_estimators(self) -> int:
        return len(self.trees)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise FeatureMismatch(
                f"expected {self.n_features} features, got {X.shape[1]}"
            )
        out = np.full(X.shape[0], self.base_score, dtype=np.float64)
        for t in self.trees:
            out += self.learning_rate * t.predict(X)
        return out

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "learning_rate": self.learning_rate,
            "base_score": self.base_score,
            "n_features": self.n_features,
            "feature_names": list(self.feature_names),
            "loss": self.loss,
            "loss_checkpoints": list(self.loss_checkpoints),
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TreeEnsemble":
        if d.get("format") != FORMAT_NAME:
            raise BadParams(f"not a {FORMAT_NAME} document")
        if d.get("version") != FORMAT_VERSION:
            raise BadParams(f"unsupported {FORMAT_NAME} version {d.get('version')}")
        return cls(
            trees=tuple(Tree.from_dict(td) for td in d["trees"]),
            learning_rate=float(d["learning_rate"]),
            base_score=float(d["base_score"]),
            n_features=int(d["n_features"]),
            feature_names=tuple(d.get("feature_names", ())),
            loss=d.get("loss", "l1"),
            loss_checkpoints=tuple(d.get("loss_checkpoints", ())),
        )


def _bin_features(X: np.ndarray, n_bins: int) -> tuple[np.ndarray, list[np.ndarray]]:
    """Quantize each column; returns (codes, cuts). Column j with code k
    satisfies cuts[j][k-1] < x <= cuts[j][k], so a split after bin k is the
    exact rule x <= cuts[j][k]."""
    n, m = X.shape
    codes = np.zeros((n, m), dtype=np.int32)
    cuts: list[np.ndarray] = []
    for j in range(m):
        col = X[:, j]
        uniq = np.unique(col)
        if uniq.size <= n_bins:
            cut = (uniq[1:] + uniq[:-1]) / 2.0
        else:
            qs = np.quantile(col, np.linspace(0.0, 1.0, n_bins + 1)[1:-1])
            cut = np.unique(qs)
        codes[:, j] = np.searchsorted(cut, col, side="left")
        cuts.append(cut)
    return codes, cuts


def _grow_tree(
    codes: np.ndarray,
    cuts: list[np.ndarray],
    residual: np.ndarray,
    max_depth: int,
    min_leaf: int,
) -> tuple[Tree, np.ndarray]:
    """One variance-reduction tree on `residual`, leaves valued with the
    median of `residual`. Also returns the per-row training prediction so the
    boosting loop avoids a second traversal."""
    n, m = codes.shape
    feature, threshold, left, right, value, cover = [], [], [], [], [], []
    train_pred = np.empty(n, dtype=np.float64)

    def best_split(g: np.ndarray, idx: np.ndarray):
        total = float(g.sum())
        base = total * total / idx.size
        # relative floor: an absolute one would freeze boosting once the
        # residuals shrink below its scale; cancellation dust on constant
        # nodes stays far under 1e-12 of the second moment
        best_gain = 1e-12 * float(g @ g) + 1e-300
        best = None
        for j in range(m):
            nb = cuts[j].size + 1
            if nb < 2:
                continue
            c = codes[idx, j]
            cnt = np.bincount(c, minlength=nb).astype(np.float64)
            sm = np.bincount(c, weights=g, minlength=nb)
            cl = np.cumsum(cnt)[:-1]
            sl = np.cumsum(sm)[:-1]
            cr = idx.size - cl
            sr = total - sl
            ok = (cl >= min_leaf) & (cr >= min_leaf)
            if not ok.any():
                continue
            with np.errstate(divide="ignore", invalid="ignore"):
                gain = np.where(ok, sl * sl / cl + sr * sr / cr - base, -np.inf)
            k = int(np.argmax(gain))
            if gain[k] > best_gain:
                best_gain = float(gain[k])
                best = (j, k)
        return best

    def new_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        cover.append(0.0)
        return len(feature) - 1

    root = new_node()
    stack = [(root, np.arange(n, dtype=np.int64), 0)]
    while stack:
        node, idx, depth = stack.pop()
        cover[node] = float(idx.size)
        best = None
        if depth < max_depth and idx.size >= 2 * min_leaf:
            best = best_split(residual[idx], idx)
        if best is None:
            leaf_value = float(np.median(residual[idx]))
            value[node] = leaf_value
            train_pred[idx] = leaf_value
            continue
        j, k = best
        feature[node] = j
        threshold[node] = float(cuts[j][k])
        mask = codes[idx, j] <= k
        lid, rid = new_node(), new_node()
        left[node], right[node] = lid, rid
        # depth-first, left pushed last so siblings come out left-first
        stack.append((rid, idx[~mask], depth + 1))
        stack.append((lid, idx[mask], depth + 1))

    tree = Tree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        value=np.asarray(value, dtype=np.float64),
        cover=np.asarray(cover, dtype=np.float64),
    )
    return tree, train_pred


def gbdt_fit(
    fm,
    n_estimators: int = 500,
    learning_rate: float = 0.05,
    max_depth: int = 6,
    min_leaf: int = 20,
    n_bins: int = 64,
    checkpoint_every: int = 50,
) -> TreeEnsemble:
    """Boost L1 loss on a FeatureMatrix: gradient = sign(residual), leaf
    value = median residual. A constant target short-circuits to a base-only
    model. loss_checkpoints records train MAE at the base model and then
    every checkpoint_every trees."""
    X = fm.rows
    y = fm.target
    if y.size == 0:
        raise BadParams("empty feature matrix")
    if n_estimators < 0 or not (0.0 < learning_rate <= 1.0):
        raise BadParams("need n_estimators >= 0 and learning_rate in (0, 1]")
    base = float(np.median(y))
    names = tuple(fm.names)
    if float(np.ptp(y)) == 0.0:
        # degenerate target: the base score alone is exact
        return TreeEnsemble(
            trees=(),
            learning_rate=learning_rate,
            base_score=base,
            n_features=X.shape[1],
            feature_names=names,
            loss_checkpoints=(0.0,),
        )
    codes, cuts = _bin_features(X, n_bins)
    F = np.full(y.size, base, dtype=np.float64)
    checkpoints = [float(np.abs(y - F).mean())]
    trees: list[Tree] = []
    for m_i in range(1, n_estimators + 1):
        resid = y - F
        tree, pred = _grow_tree(codes, cuts, resid, max_depth, min_leaf)
        trees.append(tree)
        F += learning_rate * pred
        if m_i % checkpoint_every == 0 or m_i == n_estimators:
            checkpoints.append(float(np.abs(y - F).mean()))
    return TreeEnsemble(
        trees=tuple(trees),
        learning_rate=learning_rate,
        base_score=base,
        n_features=X.shape[1],
        feature_names=names,
        loss_checkpoints=tuple(checkpoints),
    )
