"""Linear epsilon-insensitive support vector regression.

Minimizes the convex primal

    F(w, b) = 0.5 * ||w||^2 + C * sum_i max(0, |y_i - (w.x_i + b)| - eps)

with a pairwise coordinate-descent solver on the dual (the classic SMO
scheme with maximal-violating-pair selection). The solver keeps the best
primal iterate seen so far, so the recorded objective trace is
non-increasing by construction and the returned model never loses to the
trivial point (w=0, b=mean(y)).

The dual uses 2n box variables z (alpha stacked on alpha*), sign sigma_s
(+1 for alpha, -1 for alpha*), subject to sum(sigma * z) = 0. The primal
intercept is recovered exactly for the current w by minimizing the
piecewise-linear loss in b over its breakpoints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, UntrainedModel, ZeroVariance
from .stats import StandardizationParams, kfold
from .tabledata import FeatureTable

try:  # The solver kernel runs unchanged, just slower, without numba.
    from numba import njit
except ImportError:  # pragma: no cover
    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap

DEFAULT_GRID_C = (0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0)
DEFAULT_GRID_EPSILON = (0.01, 0.05, 0.1, 0.2)

ITERATION_CAP = 200_000
IMPROVEMENT_TOL = 1e-8
NONCONVERGENCE_TOL = 1e-4


@dataclass(frozen=True)
class Hyperparams:
    C: float
    epsilon: float

    def __post_init__(self):
        if self.C <= 0:
            raise ValueError("C must be positive")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")


@dataclass(frozen=True)
class FitMetrics:
    rmse: float
    r2: float


@dataclass(frozen=True)
class LinearSvrModel:
    w: tuple[float, ...]
    b: float
    hyper: Hyperparams
    objective: float
    features: tuple[str, ...]
    standardization: StandardizationParams | None = None
    converged: bool = True
    iterations: int = 0
    trace: tuple[float, ...] = ()

    def predict(self, x_std: np.ndarray) -> np.ndarray:
        """Predict from feature vectors already in standardized space."""
        x = np.atleast_2d(np.asarray(x_std, dtype=float))
        if x.shape[1] != len(self.w):
            raise DimensionMismatch(
                f"expected {len(self.w)} features, got {x.shape[1]}"
            )
        return x @ np.array(self.w) + self.b

    def predict_raw(self, x_raw: np.ndarray) -> np.ndarray:
        """Predict from raw-scale feature vectors via the stored params."""
        if self.standardization is None:
            raise UntrainedModel("model carries no standardization parameters")
        x = np.atleast_2d(np.asarray(x_raw, dtype=float))
        return self.predict(self.standardization.transform(x))


@dataclass(frozen=True)
class ModelReport:
    model: LinearSvrModel
    train: FitMetrics
    test: FitMetrics
    cv_table: tuple[tuple[Hyperparams, float], ...]
    importance: dict[str, float]
    importance_mode: str


def primal_objective(X: np.ndarray, y: np.ndarray, w: np.ndarray, b: float, hyper: Hyperparams) -> float:
    resid = np.abs(y - (X @ w + b)) - hyper.epsilon
    loss = np.maximum(resid, 0.0).sum()
    return 0.5 * float(w @ w) + hyper.C * float(loss)


@njit(cache=True)
def _smo_span(K, y, z, beta, grad, C, eps, steps, kkt_tol):
    """Run up to ``steps`` maximal-violating-pair updates in place.

    Dual variables z (alpha stacked on alpha*), beta = alpha - alpha*, and
    the gradient are updated together. Returns (updates done, last KKT
    violation); stopping short of ``steps`` means the violation dropped to
    the tolerance (or no feasible pair remained).
    """
    n = y.shape[0]
    violation = 0.0
    for it in range(steps):
        best_i = -1
        best_i_val = -1e300
        best_j = -1
        best_j_val = 1e300
        for s in range(2 * n):
            sig = 1.0 if s < n else -1.0
            v = -sig * grad[s]
            zs = z[s]
            in_up = zs < C if sig > 0 else zs > 0.0
            in_low = zs > 0.0 if sig > 0 else zs < C
            if in_up and v > best_i_val:
                best_i_val = v
                best_i = s
            if in_low and v < best_j_val:
                best_j_val = v
                best_j = s
        if best_i < 0 or best_j < 0:
            return it, 0.0
        violation = best_i_val - best_j_val
        if violation <= kkt_tol:
            return it, violation
        si = best_i % n
        sj = best_j % n
        a = K[si, si] + K[sj, sj] - 2.0 * K[si, sj]
        if a <= 1e-12:
            a = 1e-12
        delta = violation / a
        sig_i = 1.0 if best_i < n else -1.0
        sig_j = 1.0 if best_j < n else -1.0
        hi = C - z[best_i] if sig_i > 0 else z[best_i]
        hj = z[best_j] if sig_j > 0 else C - z[best_j]
        if hi < delta:
            delta = hi
        if hj < delta:
            delta = hj
        if delta <= 0.0:
            return it, violation
        z[best_i] += sig_i * delta
        z[best_j] -= sig_j * delta
        beta[si] += delta
        beta[sj] -= delta
        for t in range(n):
            u = delta * (K[si, t] - K[sj, t])
            grad[t] += u
            grad[n + t] -= u
    return steps, violation


def _optimal_intercept(r: np.ndarray, epsilon: float) -> float:
    """Exact minimizer of sum_i max(0, |r_i - b| - eps) over b.

    The loss is convex piecewise linear with breakpoints at r_i +/- eps, so
    the minimum is attained on an interval bounded by breakpoints. Within
    that interval the value closest to mean(r) is returned, which makes the
    zero-loss case resolve to the mean-of-residuals tie-break.
    """
    points = np.concatenate([r - epsilon, r + epsilon])
    points.sort()
    vals = np.maximum(np.abs(r[None, :] - points[:, None]) - epsilon, 0.0).sum(axis=1)
    best = vals.min()
    at_best = points[vals <= best + 1e-12 * (1.0 + best)]
    lo, hi = float(at_best[0]), float(at_best[-1])
    return min(max(float(r.mean()), lo), hi)


def train_svr(
    X,
    y,
    hyper: Hyperparams,
    max_iter: int = ITERATION_CAP,
    log=None,
) -> LinearSvrModel:
    """Fit the linear epsilon-SVR primal.

    Terminates when the relative improvement of the best primal objective
    between checkpoints drops below 1e-8, when the dual KKT violation
    vanishes, or at the iteration cap. If the cap is hit while the
    objective is still improving faster than 1e-4 relative, the model is
    returned with ``converged=False``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != len(y):
        raise DimensionMismatch(f"X is {X.shape}, y has length {len(y)}")
    n, d = X.shape
    if n < 2:
        raise DimensionMismatch("need at least 2 rows")

    C, eps = hyper.C, hyper.epsilon
    K = np.ascontiguousarray(X @ X.T)

    # 2n dual variables: z[:n] = alpha, z[n:] = alpha*.
    z = np.zeros(2 * n)
    beta = np.zeros(n)  # alpha - alpha*
    grad = np.concatenate([eps - y, eps + y])  # at beta = 0

    def current_model() -> tuple[np.ndarray, float, float]:
        w = X.T @ beta
        b = _optimal_intercept(y - X @ w, eps)
        return w, b, primal_objective(X, y, w, b, hyper)

    def dual_objective() -> float:
        return float(0.5 * beta @ K @ beta + eps * z.sum() - y @ beta)

    # The trivial point is the first recorded iterate, so the returned model
    # can never be worse than (w=0, b=mean(y)).
    best_w, best_b, best_f = current_model()
    trace = [best_f]
    if log is not None:
        log(0, best_f)

    yscale = max(1.0, float(np.max(np.abs(y))))
    kkt_tol = 1e-10 * yscale
    checkpoint = max(64, 2 * n)
    iterations = 0
    converged = False
    last_rel = math.inf
    prev_dual = dual_objective()

    while iterations < max_iter:
        span = min(checkpoint, max_iter - iterations)
        done, _violation = _smo_span(K, y, z, beta, grad, C, eps, span, kkt_tol)
        iterations += done
        w, b, f = current_model()
        if f < best_f:
            best_w, best_b, best_f = w, b, f
        trace.append(best_f)
        if log is not None:
            log(iterations, best_f)
        if done < span:
            # The KKT violation dropped to tolerance mid-span.
            converged = True
            break
        # The dual decreases monotonically every step, so a vanishing
        # relative improvement between checkpoints means the solver has
        # converged; the recovered primal tracks it by strong duality.
        cur_dual = dual_objective()
        last_rel = (prev_dual - cur_dual) / max(abs(cur_dual), 1e-12)
        prev_dual = cur_dual
        if last_rel < IMPROVEMENT_TOL:
            converged = True
            break

    w, b, f = current_model()
    if f < best_f:
        best_w, best_b, best_f = w, b, f
    if trace[-1] != best_f:
        trace.append(best_f)
        if log is not None:
            log(iterations, best_f)
    if not converged and last_rel > NONCONVERGENCE_TOL:
        converged = False
    else:
        converged = True

    return LinearSvrModel(
        w=tuple(float(v) for v in best_w),
        b=float(best_b),
        hyper=hyper,
        objective=float(best_f),
        features=tuple(f"x{i}" for i in range(d)),
        converged=converged,
        iterations=iterations,
        trace=tuple(trace),
    )


def evaluate(model: LinearSvrModel, X, y, r2_mode: str = "coefficient") -> FitMetrics:
    """RMSE and R-squared of predictions on standardized features.

    ``coefficient`` is 1 - SSE/SST about the mean of the evaluated y;
    ``correlation`` is the squared Pearson correlation of predictions
    with y.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.shape[0] != len(y):
        raise DimensionMismatch(f"X has {X.shape[0]} rows, y has {len(y)}")
    pred = model.predict(X)
    err = y - pred
    rmse = math.sqrt(float((err**2).mean()))
    sst = float(((y - y.mean()) ** 2).sum())
    if sst == 0.0:
        raise ZeroVariance("evaluated target has zero variance")
    if r2_mode == "correlation":
        dp = pred - pred.mean()
        dy = y - y.mean()
        denom = math.sqrt(float(dp @ dp) * float(dy @ dy))
        r2 = 0.0 if denom == 0.0 else (float(dp @ dy) / denom) ** 2
    elif r2_mode == "coefficient":
        r2 = 1.0 - float((err**2).sum()) / sst
    else:
        raise ValueError(f"unknown r2 mode {r2_mode!r}")
    return FitMetrics(rmse=rmse, r2=r2)


def grid_search(
    X,
    y,
    grid: list[Hyperparams],
    k: int,
    seed: int,
    max_iter: int = ITERATION_CAP,
) -> tuple[Hyperparams, tuple[tuple[Hyperparams, float], ...]]:
    """Pick the grid point with minimal mean k-fold validation RMSE.

    Ties break toward smaller C, then smaller epsilon. Fold assignments are
    computed once and shared across grid points.
    """
    if not grid:
        raise ValueError("hyperparameter grid is empty")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    folds = kfold(len(y), k, seed)
    table = []
    for hp in grid:
        rmses = []
        for fit_idx, val_idx in folds:
            fit_idx, val_idx = list(fit_idx), list(val_idx)
            model = train_svr(X[fit_idx], y[fit_idx], hp, max_iter=max_iter)
            pred = model.predict(X[val_idx])
            rmses.append(math.sqrt(float(((y[val_idx] - pred) ** 2).mean())))
        table.append((hp, sum(rmses) / len(rmses)))
    best = min(table, key=lambda row: (row[1], row[0].C, row[0].epsilon))
    return best[0], tuple(table)


def importance(
    model: LinearSvrModel,
    table: FeatureTable | None = None,
    mode: str = "coef",
    target: str | None = None,
) -> dict[str, float]:
    """Feature importance on a 0-100 scale.

    ``coef`` scores each feature by |w_j| in standardized space.
    ``univariate_r2`` scores by the R-squared of a quadratic least-squares
    fit of the target on the feature alone (requires table and target).
    Raw scores are min-max scaled; a single feature scores 100 by
    convention, as do all features when the raw scores are identical.
    """
    if not model.features:
        raise UntrainedModel("model has no features")
    if mode == "coef":
        raw = {name: abs(wj) for name, wj in zip(model.features, model.w)}
    elif mode == "univariate_r2":
        if table is None or target is None:
            raise ValueError("univariate_r2 mode needs a table and target column")
        yv = np.array(table.column(target), dtype=float)
        raw = {}
        for name in model.features:
            xv = np.array(table.column(name), dtype=float)
            a = np.column_stack([np.ones(len(xv)), xv, xv**2])
            coef, *_ = np.linalg.lstsq(a, yv, rcond=None)
            resid = yv - a @ coef
            sst = float(((yv - yv.mean()) ** 2).sum())
            raw[name] = 0.0 if sst == 0.0 else 1.0 - float((resid**2).sum()) / sst
    else:
        raise ValueError(f"unknown importance mode {mode!r}")

    values = list(raw.values())
    lo, hi = min(values), max(values)
    if len(raw) == 1 or hi == lo:
        return {name: 100.0 for name in raw}
    return {name: 100.0 * (s - lo) / (hi - lo) for name, s in raw.items()}
