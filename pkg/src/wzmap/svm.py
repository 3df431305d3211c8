"""RBF-kernel support vector machines trained by sequential minimal optimization.

The dual problem

    min  0.5 * a' Q a - sum(a)   s.t.  y' a = 0,  0 <= a <= C,   Q_ij = y_i y_j K_ij

is solved two variables at a time using maximal-violating-pair selection.
Multiclass is one-vs-one with majority voting. Inputs are min-max scaled to
[0, 1] using ranges fitted on the training set and stored in the model.

The inner loop is compiled with numba when available; the pure-Python path
is identical but slow, so it only serves as a fallback.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import (InsufficientClassSamples, MixedLabels, SingleClassData,
                     SolverNonConvergence)
from .features import N_FEATURES, fit_normalization, normalize
from .labels import POI_LABELS, BehaviorLabel, is_poi_label, parse_label
from .textio import atomic_write_text

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    def njit(*a, **k):
        def deco(f):
            return f
        return deco

DEFAULT_C = 1.0
DEFAULT_GAMMA = 4.0
DEFAULT_TOL = 1e-3
DEFAULT_MAX_ITER = 100_000

# 2^-5 .. 2^15 and 2^-15 .. 2^3, both in steps of 2^2.
DEFAULT_C_GRID = tuple(float(2.0 ** e) for e in range(-5, 16, 2))
DEFAULT_GAMMA_GRID = tuple(float(2.0 ** e) for e in range(-15, 4, 2))

_MODEL_MAGIC = "wzmap-svm-model v1"


def rbf_kernel(a, b, gamma: float) -> np.ndarray:
    """Gram matrix exp(-gamma * ||a_i - b_j||^2), shape (len(a), len(b))."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    d2 = (np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :]
          - 2.0 * (a @ b.T))
    np.maximum(d2, 0.0, out=d2)
    return np.exp(-gamma * d2)


def dual_objective(kernel: np.ndarray, y: np.ndarray, alpha: np.ndarray) -> float:
    """Value of the dual objective 0.5 a'Qa - sum(a)."""
    qa = y * (kernel @ (y * alpha))
    return float(0.5 * np.dot(alpha, qa) - np.sum(alpha))


@njit(cache=True)
def _smo_core(kernel, y, c, tol, max_iter):
    """Two-variable descent until the maximal KKT violation m - M <= tol.

    Returns (alpha, bias, iterations, converged). The comparison value of
    sample t is v_t = -y_t * grad_t; b lies between the extremes of v over
    the ascent-feasible and descent-feasible sets.
    """
    n = kernel.shape[0]
    alpha = np.zeros(n)
    grad = -np.ones(n)
    it = 0
    m = -np.inf
    big_m = np.inf
    converged = False
    while True:
        m = -np.inf
        big_m = np.inf
        i = -1
        j = -1
        for t in range(n):
            v = -y[t] * grad[t]
            up = (y[t] > 0.0 and alpha[t] < c) or (y[t] < 0.0 and alpha[t] > 0.0)
            low = (y[t] > 0.0 and alpha[t] > 0.0) or (y[t] < 0.0 and alpha[t] < c)
            if up and v > m:
                m = v
                i = t
            if low and v < big_m:
                big_m = v
                j = t
        if m - big_m <= tol:
            converged = True
            break
        if it >= max_iter:
            break
        eta = kernel[i, i] + kernel[j, j] - 2.0 * kernel[i, j]
        if eta <= 0.0:
            # K not strictly PD along this pair; any positive step length
            # denominator keeps the box clipping in charge.
            eta = 1e-12
        lam = (m - big_m) / eta
        room_i = c - alpha[i] if y[i] > 0.0 else alpha[i]
        room_j = alpha[j] if y[j] > 0.0 else c - alpha[j]
        if room_i < lam:
            lam = room_i
        if room_j < lam:
            lam = room_j
        alpha[i] += y[i] * lam
        alpha[j] -= y[j] * lam
        for t in range(n):
            grad[t] += lam * y[t] * (kernel[t, i] - kernel[t, j])
        it += 1
    if m == -np.inf:
        bias = big_m
    elif big_m == np.inf:
        bias = m
    else:
        bias = 0.5 * (m + big_m)
    return alpha, bias, it, converged


@dataclass(frozen=True)
class SmoResult:
    alpha: np.ndarray
    bias: float
    iterations: int


def smo_solve(kernel: np.ndarray, y: np.ndarray, c: float,
              tol: float = DEFAULT_TOL,
              max_iter: int = DEFAULT_MAX_ITER) -> SmoResult:
    """Solve one binary dual problem. y must be +-1, kernel square."""
    kernel = np.ascontiguousarray(kernel, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    if kernel.ndim != 2 or kernel.shape[0] != kernel.shape[1]:
        raise ValueError(f"kernel must be square, got shape {kernel.shape}")
    if y.shape != (kernel.shape[0],):
        raise ValueError(f"label vector shape {y.shape} does not match kernel")
    if not np.all(np.abs(y) == 1.0):
        raise ValueError("labels must be +1 or -1")
    if c <= 0:
        raise ValueError(f"c must be positive, got {c}")
    alpha, bias, iters, ok = _smo_core(kernel, y, float(c), float(tol),
                                       int(max_iter))
    if not ok:
        raise SolverNonConvergence(
            f"no convergence after {max_iter} iterations (c={c})")
    return SmoResult(alpha=alpha, bias=float(bias), iterations=int(iters))


@dataclass(frozen=True)
class BinarySvm:
    """One trained pair classifier: decision > 0 votes for ``pos``."""

    pos: BehaviorLabel
    neg: BehaviorLabel
    support_vectors: np.ndarray  # (n_sv, 5), already min-max scaled
    coef: np.ndarray             # alpha_i * y_i for each support vector
    bias: float

    def decision(self, scaled: np.ndarray, gamma: float) -> np.ndarray:
        return rbf_kernel(scaled, self.support_vectors, gamma) @ self.coef + self.bias


@dataclass
class SvmModel:
    """One-vs-one multiclass model plus the scaling fitted at training time."""

    classes: tuple[BehaviorLabel, ...]
    gamma: float
    c: float
    feat_lo: np.ndarray
    feat_hi: np.ndarray
    binaries: list[BinarySvm] = field(default_factory=list)

    def votes(self, features) -> np.ndarray:
        """Vote counts per class, shape (n_samples, n_classes)."""
        features = np.atleast_2d(np.asarray(features, dtype=float))
        scaled = normalize(features, self.feat_lo, self.feat_hi)
        out = np.zeros((scaled.shape[0], len(self.classes)), dtype=int)
        index = {lbl: k for k, lbl in enumerate(self.classes)}
        for b in self.binaries:
            dec = b.decision(scaled, self.gamma)
            out[dec > 0.0, index[b.pos]] += 1
            out[dec <= 0.0, index[b.neg]] += 1
        return out

    def predict(self, features) -> list[BehaviorLabel]:
        """Majority vote; ties resolve to the earliest class in the list."""
        v = self.votes(features)
        return [self.classes[k] for k in np.argmax(v, axis=1)]

    def predict_one(self, feature_vector) -> BehaviorLabel:
        return self.predict(np.asarray(feature_vector, dtype=float)[None, :])[0]


def _canonical_classes(labels) -> tuple[BehaviorLabel, ...]:
    present = set()
    for lbl in labels:
        parsed = parse_label(lbl)
        if not is_poi_label(parsed):
            raise MixedLabels(
                f"{parsed.value} is assigned by rule, not trainable")
        present.add(parsed)
    return tuple(lbl for lbl in POI_LABELS if lbl in present)


def train_svm(features, labels, c: float = DEFAULT_C, gamma: float = DEFAULT_GAMMA,
              tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> SvmModel:
    """Fit scaling plus all one-vs-one pair classifiers on labeled features."""
    features = np.asarray(features, dtype=float)
    labels = [parse_label(lbl) for lbl in labels]
    if features.ndim != 2 or features.shape[1] != N_FEATURES:
        raise ValueError(f"expected (n, {N_FEATURES}) features, got {features.shape}")
    if features.shape[0] != len(labels):
        raise ValueError("feature/label count mismatch")
    classes = _canonical_classes(labels)
    if len(classes) < 2:
        raise SingleClassData(
            f"need at least 2 classes, got {[c.value for c in classes]}")
    lo, hi = fit_normalization(features)
    scaled = normalize(features, lo, hi)
    label_arr = np.array([lbl.value for lbl in labels])
    model = SvmModel(classes=classes, gamma=float(gamma), c=float(c),
                     feat_lo=lo, feat_hi=hi)
    for pos, neg in itertools.combinations(classes, 2):
        sel = np.flatnonzero((label_arr == pos.value) | (label_arr == neg.value))
        x_pair = scaled[sel]
        y_pair = np.where(label_arr[sel] == pos.value, 1.0, -1.0)
        kernel = rbf_kernel(x_pair, x_pair, gamma)
        res = smo_solve(kernel, y_pair, c, tol=tol, max_iter=max_iter)
        sv = np.flatnonzero(res.alpha > 0.0)
        model.binaries.append(BinarySvm(
            pos=pos, neg=neg,
            support_vectors=x_pair[sv].copy(),
            coef=(res.alpha * y_pair)[sv].copy(),
            bias=res.bias))
    return model


# ---------------------------------------------------------------------------
# cross-validated grid search


@dataclass(frozen=True)
class GridSearchResult:
    best_c: float
    best_gamma: float
    best_accuracy: float
    c_grid: tuple[float, ...]
    gamma_grid: tuple[float, ...]
    table: np.ndarray  # (len(c_grid), len(gamma_grid)) mean fold accuracy
    folds: int
    seed: int


def stratified_folds(labels, k: int, seed: int = 0) -> np.ndarray:
    """Fold id per sample: each class shuffled once, then dealt round-robin."""
    labels = np.asarray([parse_label(lbl).value for lbl in labels])
    rng = np.random.default_rng(seed)
    fold = np.full(labels.size, -1, dtype=int)
    for cls in POI_LABELS:
        idx = np.flatnonzero(labels == cls.value)
        if idx.size == 0:
            continue
        if idx.size < k:
            raise InsufficientClassSamples(
                f"class {cls.value} has {idx.size} samples, need >= {k} "
                f"for {k}-fold validation")
        rng.shuffle(idx)
        fold[idx] = np.arange(idx.size) % k
    return fold


def grid_search(features, labels, c_grid=DEFAULT_C_GRID,
                gamma_grid=DEFAULT_GAMMA_GRID, k: int = 5, seed: int = 0,
                tol: float = DEFAULT_TOL,
                max_iter: int = DEFAULT_MAX_ITER) -> GridSearchResult:
    """Mean k-fold accuracy for every (c, gamma); ties prefer small values.

    A cell whose solver fails to converge on any fold scores 0.0. The kernel
    of each (fold, gamma) combination is computed once and sliced per class
    pair, since it does not depend on c.
    """
    features = np.asarray(features, dtype=float)
    labels = [parse_label(lbl) for lbl in labels]
    classes = _canonical_classes(labels)
    if len(classes) < 2:
        raise SingleClassData("grid search needs at least 2 classes")
    label_arr = np.array([lbl.value for lbl in labels])
    class_idx = {cls.value: ci for ci, cls in enumerate(classes)}
    true_idx = np.array([class_idx[s] for s in label_arr])
    fold = stratified_folds(labels, k, seed)
    pairs = list(itertools.combinations(range(len(classes)), 2))

    c_grid = tuple(float(v) for v in c_grid)
    gamma_grid = tuple(float(v) for v in gamma_grid)
    acc_sum = np.zeros((len(c_grid), len(gamma_grid)))
    failed = np.zeros_like(acc_sum, dtype=bool)

    for f in range(k):
        val = np.flatnonzero(fold == f)
        trn = np.flatnonzero(fold != f)
        lo, hi = fit_normalization(features[trn])
        x_trn = normalize(features[trn], lo, hi)
        x_val = normalize(features[val], lo, hi)
        y_true = true_idx[val]
        pair_sel = []
        for ci, cj in pairs:
            sel = np.flatnonzero((true_idx[trn] == ci) | (true_idx[trn] == cj))
            y_pair = np.where(true_idx[trn][sel] == ci, 1.0, -1.0)
            pair_sel.append((sel, y_pair))
        for gi, gamma in enumerate(gamma_grid):
            k_trn = rbf_kernel(x_trn, x_trn, gamma)
            k_val = rbf_kernel(x_val, x_trn, gamma)
            pair_kernels = [
                (np.ascontiguousarray(k_trn[np.ix_(sel, sel)]), k_val[:, sel])
                for sel, _ in pair_sel]
            for ci_idx, c in enumerate(c_grid):
                if failed[ci_idx, gi]:
                    continue
                votes = np.zeros((val.size, len(classes)), dtype=int)
                for (sel, y_pair), (k_pair, k_cross), (ca, cb) in zip(
                        pair_sel, pair_kernels, pairs):
                    alpha, bias, _, ok = _smo_core(
                        k_pair, y_pair, float(c), float(tol), int(max_iter))
                    if not ok:
                        failed[ci_idx, gi] = True
                        break
                    dec = k_cross @ (alpha * y_pair) + bias
                    votes[dec > 0.0, ca] += 1
                    votes[dec <= 0.0, cb] += 1
                else:
                    pred = np.argmax(votes, axis=1)
                    acc_sum[ci_idx, gi] += float(np.mean(pred == y_true))

    table = acc_sum / k
    table[failed] = 0.0
    best_c_i, best_g_i = 0, 0
    for ci_idx in range(len(c_grid)):
        for gi in range(len(gamma_grid)):
            if table[ci_idx, gi] > table[best_c_i, best_g_i]:
                best_c_i, best_g_i = ci_idx, gi
    return GridSearchResult(
        best_c=c_grid[best_c_i], best_gamma=gamma_grid[best_g_i],
        best_accuracy=float(table[best_c_i, best_g_i]),
        c_grid=c_grid, gamma_grid=gamma_grid, table=table, folds=k, seed=seed)


# ---------------------------------------------------------------------------
# model persistence (plain text, repr round-trip)


def save_model(model: SvmModel, path) -> None:
    lines = [_MODEL_MAGIC,
             "classes " + " ".join(c.value for c in model.classes),
             f"gamma {model.gamma!r}",
             f"c {model.c!r}",
             "feat_lo " + " ".join(repr(v) for v in model.feat_lo),
             "feat_hi " + " ".join(repr(v) for v in model.feat_hi),
             f"pairs {len(model.binaries)}"]
    for b in model.binaries:
        lines.append(f"pair {b.pos.value} {b.neg.value} {len(b.coef)}")
        lines.append(f"bias {b.bias!r}")
        for coef, sv in zip(b.coef, b.support_vectors):
            lines.append(" ".join(repr(v) for v in (coef, *sv)))
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_model(path) -> SvmModel:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    it = iter(lines)

    def take(prefix: str) -> str:
        try:
            line = next(it)
        except StopIteration:
            raise ValueError(f"model file truncated, expected {prefix!r}") from None
        if not line.startswith(prefix):
            raise ValueError(f"expected {prefix!r}, got {line!r}")
        return line[len(prefix):].strip()

    if next(it, None) != _MODEL_MAGIC:
        raise ValueError(f"{path} is not a model file")
    classes = tuple(parse_label(tok) for tok in take("classes").split())
    gamma = float(take("gamma"))
    c = float(take("c"))
    lo = np.array([float(v) for v in take("feat_lo").split()])
    hi = np.array([float(v) for v in take("feat_hi").split()])
    n_pairs = int(take("pairs"))
    model = SvmModel(classes=classes, gamma=gamma, c=c, feat_lo=lo, feat_hi=hi)
    for _ in range(n_pairs):
        pos_s, neg_s, n_sv_s = take("pair").split()
        bias = float(take("bias"))
        rows = np.array([[float(v) for v in next(it).split()]
                         for _ in range(int(n_sv_s))])
        rows = rows.reshape(int(n_sv_s), 1 + N_FEATURES)
        model.binaries.append(BinarySvm(
            pos=parse_label(pos_s), neg=parse_label(neg_s),
            support_vectors=rows[:, 1:].copy(), coef=rows[:, 0].copy(),
            bias=bias))
    return model
