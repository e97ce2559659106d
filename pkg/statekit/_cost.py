"""
Segment cost functions for the classical change point detectors. Each cost
is fitted to a whole `l × n` signal once and then evaluated on half-open
segments `[a, b)`; only the samples inside a segment enter its cost, except
for the rank cost, whose ranks and covariance are taken over the full
signal. Every cost implements the `ruptures` cost interface (`fit`,
`error`, `min_size`, `model`), so it can also be handed to a `ruptures`
search as a custom cost. The l1, l2 and rank costs are computed by
`ruptures` itself; the others are kept here because their free parameters
are pinned down differently: the normal cost takes a configurable ridge,
the linear cost regresses several responses with an intercept, the RBF
cost never materializes the full Gram matrix, and the autoregressive cost
is multichannel and uses only lags inside the segment.
"""

import numpy as _np
from ruptures import costs as _rpt_costs
from ruptures.base import BaseCost as _BaseCost


class SegmentCost(_BaseCost):
    """
    Base class: subclasses implement `error(a, b)` and set `min_size`.
    """

    name = None

    def __init__(self):
        self.signal = None

    def __repr__(self):
        return f"{self.__class__.__name__}({self.name})"

    @property
    def model(self) -> str:
        return self.name

    @property
    def min_size(self) -> int:
        return 1

    def fit(self, signal):
        signal = _np.asarray(signal, dtype=float)
        if signal.ndim == 1:
            signal = signal[:, None]
        if signal.ndim != 2:
            raise ValueError("The signal must be an l × n array.")
        self.signal = signal
        return self

    def cost(self, a: int, b: int) -> float:
        if self.signal is None:
            raise ValueError("The cost must be fitted to a signal first.")
        if not 0 <= a < b <= self.signal.shape[0]:
            raise ValueError(
                f"Invalid segment [{a}, {b}) for a signal of length {self.signal.shape[0]}."
            )
        if b - a < self.min_size:
            raise ValueError(
                f"Segment [{a}, {b}) is too short for the {self.name} cost (min_size={self.min_size})."
            )
        return float(_np.squeeze(self.error(a, b)))

    def error(self, a, b):
        raise NotImplementedError


class _LibraryCost(SegmentCost):
    """
    A cost computed by a `ruptures` cost class, fitted to the validated
    float signal.
    """

    backend = None

    def fit(self, signal):
        super().fit(signal)
        self.backend_ = self.backend().fit(self.signal)
        return self

    def error(self, a, b):
        return self.backend_.error(a, b)


class CostL1(_LibraryCost):
    """
    Least absolute deviation: sum of absolute deviations from the per-channel
    median.
    """

    name = "l1"
    backend = _rpt_costs.CostL1

    def error(self, a, b):
        # ruptures refuses single samples, whose deviation is zero
        if b - a == 1:
            return 0.0
        return super().error(a, b)


class CostL2(_LibraryCost):
    """
    Least squared deviation: sum of squared deviations from the per-channel
    mean.
    """

    name = "l2"
    backend = _rpt_costs.CostL2


class CostNormal(SegmentCost):
    """
    Gaussian likelihood change: `(b - a) · log det(Σ + εI)` with the
    population covariance Σ of the segment. The ridge ε keeps degenerate
    segments finite.
    """

    name = "normal"

    def __init__(self, epsilon: float = 1e-6):
        super().__init__()
        if not epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {epsilon}.")
        self.epsilon = float(epsilon)

    @property
    def min_size(self):
        return 2

    def error(self, a, b):
        segment = self.signal[a:b]
        centered = segment - segment.mean(axis=0)
        covariance = centered.T @ centered / (b - a)
        covariance += self.epsilon * _np.eye(covariance.shape[0])
        _, logdet = _np.linalg.slogdet(covariance)
        return (b - a) * logdet


class CostLinear(SegmentCost):
    """
    Linear model change: residual sum of squares of the least-squares
    regression (with intercept) of the response channels on the covariate
    channels. By default the first half of the channels are covariates (the
    system inputs) and the rest are responses (the outputs).
    """

    name = "linear"

    def __init__(self, covariates: int = None):
        super().__init__()
        self.covariates = covariates

    @property
    def n_covariates(self):
        if self.covariates is not None:
            return int(self.covariates)
        if self.signal is None:
            return 1
        return max(1, self.signal.shape[1] // 2)

    @property
    def min_size(self):
        return self.n_covariates + 2

    def fit(self, signal):
        super().fit(signal)
        if not 1 <= self.n_covariates < self.signal.shape[1]:
            raise ValueError(
                f"The linear cost needs between 1 and {self.signal.shape[1] - 1} covariates, got {self.n_covariates}."
            )
        return self

    def error(self, a, b):
        from scipy.linalg import lstsq

        segment = self.signal[a:b]
        k = self.n_covariates
        design = _np.column_stack([segment[:, :k], _np.ones(b - a)])
        response = segment[:, k:]
        coefficients, _, _, _ = lstsq(design, response)
        return ((response - design @ coefficients) ** 2).sum()


class CostRbf(SegmentCost):
    """
    Kernelized mean change with the Gaussian kernel
    `k(x, y) = exp(-γ ||x - y||²)`:
    `Σ_t k(x_t, x_t) - (1 / (b - a)) Σ_{t,u} k(x_t, x_u)`. If `gamma` is
    `None`, γ is the inverse median squared distance over up to 1000 pairs
    of samples drawn with a fixed seed.
    """

    name = "rbf"
    block_size = 1024

    def __init__(self, gamma: float = None, seed: int = 0, max_pairs: int = 1000):
        super().__init__()
        self.gamma = gamma
        self.seed = seed
        self.max_pairs = max_pairs

    @property
    def min_size(self):
        return 2

    def fit(self, signal):
        super().fit(signal)
        if self.gamma is None:
            self.gamma_ = median_heuristic(self.signal, self.max_pairs, self.seed)
        else:
            self.gamma_ = float(self.gamma)
        return self

    def error(self, a, b):
        from scipy.spatial.distance import cdist

        segment = self.signal[a:b]
        total = 0.0
        for start in range(0, b - a, self.block_size):
            block = segment[start : start + self.block_size]
            total += _np.exp(-self.gamma_ * cdist(block, segment, "sqeuclidean")).sum()
        return (b - a) - total / (b - a)


class CostRank(_LibraryCost):
    """
    Rank-based cost. Every channel is replaced by its centered ranks over the
    full signal; a segment costs `-(b - a) · m̄ᵀ Σ⁺ m̄`, where m̄ is the mean
    rank vector of the segment and Σ⁺ is the pseudo-inverse of the full-signal
    rank covariance. Costs are non-positive: a segment whose ranks sit far
    from the global center lowers the total.
    """

    name = "rank"
    backend = _rpt_costs.CostRank

    @property
    def min_size(self):
        return 2


class CostAr(SegmentCost):
    """
    Autoregressive model change: summed residual sum of squares of a
    per-channel order-`order` autoregressive least-squares fit, using only
    lags that fall inside the segment.
    """

    name = "ar"

    def __init__(self, order: int = 4):
        super().__init__()
        if int(order) < 1:
            raise ValueError(f"The autoregressive order must be at least 1, got {order}.")
        self.order = int(order)

    @property
    def min_size(self):
        return self.order + 2

    def error(self, a, b):
        from scipy.linalg import lstsq

        p = self.order
        segment = self.signal[a:b]
        total = 0.0
        for channel in segment.T:
            lags = _np.lib.stride_tricks.sliding_window_view(channel[:-1], p)
            target = channel[p:]
            coefficients, _, _, _ = lstsq(lags, target)
            total += ((target - lags @ coefficients) ** 2).sum()
        return total


def median_heuristic(signal, max_pairs=1000, seed=0):
    """
    Inverse of the median squared distance between sample pairs, or 1 if
    the median is zero.
    """
    length = signal.shape[0]
    if length < 2:
        return 1.0
    rng = _np.random.default_rng(seed)
    n_pairs = min(max_pairs, length * (length - 1) // 2)
    first = rng.integers(0, length, n_pairs)
    offset = rng.integers(1, length, n_pairs)
    second = (first + offset) % length
    distances = ((signal[first] - signal[second]) ** 2).sum(axis=1)
    median = _np.median(distances)
    if median <= 0:
        return 1.0
    return 1.0 / median


costs = {
    "l1": CostL1,
    "l2": CostL2,
    "normal": CostNormal,
    "linear": CostLinear,
    "rbf": CostRbf,
    "rank": CostRank,
    "ar": CostAr,
}
