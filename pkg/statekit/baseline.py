"""
The classical sliding-window baseline: every timestep is described by the
flattened window of the last *w* samples of all channels, and a one-vs-rest
ridge classifier with cross-validated regularization strength labels it.
"""

import logging as _logging
import warnings as _warnings
import numpy as _np
from .series import LabelSequence as _LabelSequence
from .series import _values_of, _states_of

_logger = _logging.getLogger(__name__)

WINDOW_GRID = (3, 5, 10, 15, 20)
ALPHA_GRID = tuple(10.0**k for k in range(-6, 7))


class WindowedFeatures:
    """
    Feature matrix built by `window_features()`: one row per timestep at
    which a full window fits, the label of that timestep (if known), and
    the timestep index of every row.
    """

    def __init__(self, matrix, labels, w: int, timesteps):
        matrix = _np.asarray(matrix, dtype=float)
        timesteps = _np.asarray(timesteps, dtype=int)
        if matrix.ndim != 2 or timesteps.shape != (matrix.shape[0],):
            raise ValueError("matrix must be 2D with one timestep index per row.")
        if labels is not None:
            labels = _np.asarray(labels, dtype=int)
            if labels.shape != timesteps.shape:
                raise ValueError("labels must have one entry per row.")
        self._matrix = matrix
        self._labels = labels
        self._w = int(w)
        self._timesteps = timesteps

    def __repr__(self):
        return f"WindowedFeatures[{self._matrix.shape[0]}×{self._matrix.shape[1]}, w={self._w}]"

    def __len__(self):
        return self._matrix.shape[0]

    @property
    def matrix(self):
        """`rows × (n·w)` feature matrix."""
        return self._matrix

    @property
    def labels(self):
        """State id of every row, or `None` for unlabeled series."""
        return self._labels

    @property
    def w(self) -> int:
        """Window width."""
        return self._w

    @property
    def timesteps(self):
        """Timestep index of every row (the last sample of its window)."""
        return self._timesteps

    @property
    def width(self) -> int:
        """Number of features per row."""
        return self._matrix.shape[1]

    def subsample(self, max_rows: int, seed: int = 0):
        """
        Returns at most `max_rows` rows drawn without replacement with a
        fixed seed, kept in their original order.
        """
        if len(self) <= max_rows:
            return self
        keep = _np.sort(_np.random.default_rng(seed).choice(len(self), max_rows, replace=False))
        labels = None if self._labels is None else self._labels[keep]
        return WindowedFeatures(self._matrix[keep], labels, self._w, self._timesteps[keep])

    @classmethod
    def concatenate(cls, features: list):
        """
        Stack the rows of several feature sets with the same window width.
        """
        if not features:
            raise ValueError("Nothing to concatenate.")
        widths = {f.w for f in features}
        if len(widths) > 1:
            raise ValueError(f"Cannot concatenate windows of widths {sorted(widths)}.")
        labels = None
        if all(f.labels is not None for f in features):
            labels = _np.concatenate([f.labels for f in features])
        return cls(
            _np.concatenate([f.matrix for f in features]),
            labels,
            features[0].w,
            _np.concatenate([f.timesteps for f in features]),
        )


class RidgeModel:
    """
    A fitted one-vs-rest ridge classifier. `weights` has one row per feature
    plus a final intercept row, and one column per state.
    """

    def __init__(self, weights, chosen_alpha: float, alpha_grid, *, w: int = None, cv_scores=None):
        weights = _np.asarray(weights, dtype=float)
        alpha_grid = [float(a) for a in alpha_grid]
        if weights.ndim != 2 or weights.shape[0] < 2:
            raise ValueError("weights must be a (features + 1) × N_s matrix.")
        if float(chosen_alpha) not in alpha_grid:
            raise ValueError(f"chosen_alpha {chosen_alpha} is not in the alpha grid.")
        weights.flags.writeable = False
        self._weights = weights
        self._chosen_alpha = float(chosen_alpha)
        self._alpha_grid = alpha_grid
        self._w = w
        self._cv_scores = None if cv_scores is None else [float(s) for s in cv_scores]

    def __repr__(self):
        return f"RidgeModel[alpha={self._chosen_alpha:g}, width={self.width}]"

    @property
    def weights(self):
        """`(features + 1) × N_s` weights; the last row is the intercept."""
        return self._weights

    @property
    def coefficients(self):
        """Weights without the intercept row."""
        return self._weights[:-1]

    @property
    def intercept(self):
        """Per-state intercept."""
        return self._weights[-1]

    @property
    def chosen_alpha(self) -> float:
        """Regularization strength picked by cross-validation."""
        return self._chosen_alpha

    @property
    def alpha_grid(self) -> list:
        """Candidate regularization strengths."""
        return list(self._alpha_grid)

    @property
    def cv_scores(self) -> list:
        """Cross-validated accuracy of every alpha in the grid."""
        return None if self._cv_scores is None else list(self._cv_scores)

    @property
    def w(self) -> int:
        """Window width the model was trained on, if known."""
        return self._w

    @property
    def width(self) -> int:
        """Expected number of features per row."""
        return self._weights.shape[0] - 1

    @property
    def num_states(self) -> int:
        """Number of states scored."""
        return self._weights.shape[1]

    def scores(self, matrix):
        """
        Affine scores `X W + b` of every row.
        """
        return matrix @ self.coefficients + self.intercept

    def serialize(self) -> dict:
        """
        Returns representation of the model as a dictionary for
        serialization.
        """
        return {
            "weights": self._weights.tolist(),
            "chosen_alpha": self._chosen_alpha,
            "alpha_grid": self._alpha_grid,
            "w": self._w,
            "cv_scores": self._cv_scores,
        }


def window_features(series, labels, w: int, mask=None) -> WindowedFeatures:
    """
    Build one row per timestep *t ≥ w - 1*: the samples
    `x[t - w + 1], ..., x[t]` of all channels, flattened sample by sample,
    labeled with the state at *t*. If `mask` is given, only unmasked
    timesteps produce rows. `labels` may be `None` for unlabeled series.
    """
    values = _values_of(series)
    length, n_channels = values.shape
    w = int(w)
    if w < 1:
        raise ValueError(f"The window width must be at least 1, got {w}.")
    if mask is not None:
        mask = _np.asarray(mask).astype(bool)
        if mask.shape != (length,):
            raise ValueError(f"mask has length {mask.shape[0]}, series has length {length}.")
        length = int(mask.sum())
        values = values[:length]
    if length < w:
        raise ValueError(f"Series of length {length} is shorter than the window width {w}.")
    windows = _np.lib.stride_tricks.sliding_window_view(values, w, axis=0)
    matrix = windows.transpose(0, 2, 1).reshape(length - w + 1, w * n_channels)
    timesteps = _np.arange(w - 1, length)
    row_labels = None
    if labels is not None:
        states = _states_of(labels)
        if states.shape[0] < length:
            raise ValueError(f"Got {states.shape[0]} labels for a series of length {length}.")
        row_labels = states[timesteps]
    return WindowedFeatures(matrix, row_labels, w, timesteps)


def ridge_fit(
    features,
    alpha_grid=ALPHA_GRID,
    folds: int = 5,
    *,
    labels=None,
    num_states: int = None,
    seed: int = 0,
    fold_ids=None,
) -> RidgeModel:
    """
    Fit a one-vs-rest ridge classifier against one-hot targets. The
    regularization strength is chosen from `alpha_grid` by k-fold
    cross-validated accuracy (ties go to the earliest alpha in the grid) and
    the model is refitted on all rows with that alpha. The intercept is not
    regularized. Folds are assigned by a seeded permutation unless
    `fold_ids` gives the fold of every row.
    """
    from scipy.linalg import eigh

    matrix, labels = _features_and_labels(features, labels)
    if labels is None:
        raise ValueError("ridge_fit() needs labeled rows.")
    alpha_grid = [float(a) for a in alpha_grid]
    if not alpha_grid or any(a < 0 for a in alpha_grid):
        raise ValueError("alpha_grid must hold non-negative values.")
    classes = _np.unique(labels)
    if classes.shape[0] < 2:
        raise ValueError(
            f"ridge_fit() needs at least two classes, got only state {classes[0]}."
        )
    if num_states is None:
        num_states = int(labels.max()) + 1
    if labels.min() < 0 or labels.max() >= num_states:
        raise ValueError(f"Labels must lie in [0, {num_states}).")
    n_rows = matrix.shape[0]
    folds = int(folds)
    if not 2 <= folds <= n_rows:
        raise ValueError(f"folds must lie in [2, {n_rows}], got {folds}.")
    if _np.all(matrix == matrix[0]):
        _warnings.warn("All feature rows are identical; the classifier can only learn the intercept.")
    targets = _np.eye(num_states)[labels]
    if fold_ids is None:
        fold_ids = _np.random.default_rng(seed).permutation(n_rows) % folds
    else:
        fold_ids = _np.asarray(fold_ids, dtype=int)
        if fold_ids.shape != (n_rows,):
            raise ValueError("fold_ids must give one fold per row.")
    correct = _np.zeros(len(alpha_grid))
    for fold in range(folds):
        held_out = fold_ids == fold
        if not held_out.any() or held_out.all():
            continue
        solver = _CenteredRidge(matrix[~held_out], targets[~held_out], eigh)
        for i, alpha in enumerate(alpha_grid):
            predicted = _argmax(solver.scores(matrix[held_out], alpha))
            correct[i] += (predicted == labels[held_out]).sum()
    cv_scores = correct / n_rows
    best = int(_np.argmax(cv_scores))
    chosen_alpha = alpha_grid[best]
    solver = _CenteredRidge(matrix, targets, eigh)
    coefficients, intercept = solver.weights(chosen_alpha)
    weights = _np.vstack([coefficients, intercept])
    _logger.debug("ridge_fit: alpha=%g cv_accuracy=%.4f", chosen_alpha, cv_scores[best])
    w = features.w if isinstance(features, WindowedFeatures) else None
    return RidgeModel(weights, chosen_alpha, alpha_grid, w=w, cv_scores=cv_scores)


def ridge_predict(model: RidgeModel, features):
    """
    Label every row with the argmax of its affine scores; ties go to the
    lowest state id.
    """
    if not isinstance(model, RidgeModel):
        raise TypeError(f"Expected RidgeModel, got {model.__class__.__name__}")
    matrix, _ = _features_and_labels(features, None)
    if matrix.shape[1] != model.width:
        raise ValueError(
            f"The model expects {model.width} features per row, got {matrix.shape[1]}."
        )
    return _argmax(model.scores(matrix))


def predict_series(model: RidgeModel, series, w: int = None):
    """
    Label a series with a fitted model. Returns the `LabelSequence` of the
    timesteps `w - 1, ..., l - 1` and the first covered timestep `w - 1`.
    """
    w = model.w if w is None else int(w)
    if w is None:
        raise ValueError("The window width is unknown; pass w.")
    features = window_features(series, None, w)
    return _LabelSequence(ridge_predict(model, features)), w - 1


class _CenteredRidge:
    """
    Ridge regression on centered data through one eigendecomposition of the
    Gram matrix, so that many alphas can be solved cheaply.
    """

    def __init__(self, matrix, targets, eigh):
        self.x_mean = matrix.mean(axis=0)
        self.y_mean = targets.mean(axis=0)
        centered = matrix - self.x_mean
        self.eigenvalues, self.eigenvectors = eigh(centered.T @ centered)
        self.eigenvalues = _np.clip(self.eigenvalues, 0.0, None)
        self.projected = self.eigenvectors.T @ (centered.T @ (targets - self.y_mean))

    def weights(self, alpha):
        denominator = self.eigenvalues + alpha
        inverse = _np.divide(
            1.0, denominator, out=_np.zeros_like(denominator), where=denominator > 0
        )
        coefficients = self.eigenvectors @ (inverse[:, None] * self.projected)
        intercept = self.y_mean - self.x_mean @ coefficients
        return coefficients, intercept[None, :]

    def scores(self, matrix, alpha):
        coefficients, intercept = self.weights(alpha)
        return matrix @ coefficients + intercept


def _features_and_labels(features, labels):
    if isinstance(features, WindowedFeatures):
        matrix = features.matrix
        if labels is None:
            labels = features.labels
    else:
        matrix = _np.asarray(features, dtype=float)
        if matrix.ndim == 1:
            matrix = matrix[:, None]
    if matrix.ndim != 2 or matrix.shape[0] == 0:
        raise ValueError("Features must be a nonempty rows × features matrix.")
    if labels is not None:
        labels = _states_of(labels)
        if labels.shape != (matrix.shape[0],):
            raise ValueError(f"Got {labels.shape[0]} labels for {matrix.shape[0]} rows.")
    return matrix, labels


def _argmax(scores):
    return _np.asarray(scores).argmax(axis=1)
