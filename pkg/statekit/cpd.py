"""
Classical offline change point detection. A `SegmentCostModel` names one of
the segment cost families in `statekit._cost`; `bottom_up()` and
`window_based()` are the two approximate search methods; both trade segment
cost against a linear penalty on the number of breakpoints.
"""

import heapq as _heapq
import itertools as _itertools
import logging as _logging
import numpy as _np
from . import _cost
from .series import _values_of

_logger = _logging.getLogger(__name__)

SEARCHES = ("bottomup", "window")
DEFAULT_PENALTIES = (100, 500, 1000)
_SEARCH_ALIASES = {"bottomup": "bottomup", "bottom_up": "bottomup", "window": "window"}


class SegmentCostModel:
    """
    An immutable description of a segment cost: its kind plus kind-specific
    parameters. Calling `build()` returns a fresh cost object ready to be
    fitted to a signal.
    """

    def __init__(self, kind: str, **params):
        """
        Initialized with:

        - `kind` One of `l1`, `l2`, `normal`, `linear`, `rbf`, `rank`, `ar`.
        - `params` Keyword parameters of the cost: `epsilon` (normal),
        `covariates` (linear), `gamma`, `seed`, `max_pairs` (rbf), `order`
        (ar).
        """
        kind = str(kind).lower()
        if kind not in _cost.costs:
            raise ValueError(
                f"Unknown cost {kind!r}; supported costs are: {', '.join(_cost.costs)}."
            )
        self._kind = kind
        self._params = dict(params)
        self.build()

    def __repr__(self):
        params = ", ".join(f"{key}={value!r}" for key, value in self._params.items())
        return f"SegmentCostModel[{self._kind}{', ' + params if params else ''}]"

    def __eq__(self, other):
        if not isinstance(other, SegmentCostModel):
            return NotImplemented
        return self._kind == other._kind and self._params == other._params

    def __hash__(self):
        return hash((self._kind, tuple(sorted(self._params.items()))))

    @property
    def kind(self) -> str:
        """Name of the cost family."""
        return self._kind

    @property
    def params(self) -> dict:
        """Kind-specific parameters."""
        return dict(self._params)

    def build(self):
        """
        Return a new, unfitted cost object.
        """
        try:
            return _cost.costs[self._kind](**self._params)
        except TypeError:
            raise ValueError(
                f"Invalid parameters for the {self._kind} cost: {self._params}."
            ) from None

    def fit(self, signal):
        """
        Return a cost object fitted to `signal`.
        """
        return self.build().fit(_signal_of(signal))

    def serialize(self) -> dict:
        """
        Returns representation of the model as a dictionary for
        serialization.
        """
        return {"kind": self._kind, **self._params}


class SegmentationResult:
    """
    The outcome of a search: sorted interior breakpoints, the summed cost of
    the resulting segments, and the penalty that was applied.
    """

    def __init__(self, breakpoints: list, total_cost: float, penalty: float):
        self._breakpoints = [int(b) for b in breakpoints]
        self._total_cost = float(total_cost)
        self._penalty = float(penalty)

    def __repr__(self):
        return f"SegmentationResult{self._breakpoints}"

    def __len__(self):
        return len(self._breakpoints)

    def __iter__(self):
        return iter(self._breakpoints)

    @property
    def breakpoints(self) -> list:
        """Sorted interior breakpoints `0 < b_1 < ... < b_m < l`."""
        return list(self._breakpoints)

    @property
    def total_cost(self) -> float:
        """Summed cost of the segments."""
        return self._total_cost

    @property
    def penalty(self) -> float:
        """Penalty per breakpoint."""
        return self._penalty

    @property
    def objective(self) -> float:
        """Penalized objective `total_cost + penalty × m`."""
        return self._total_cost + self._penalty * len(self._breakpoints)


def segment_cost(model: SegmentCostModel, signal, a: int, b: int) -> float:
    """
    Cost of the segment `[a, b)` of `signal` under `model`.
    """
    _is_SegmentCostModel(model)
    return model.fit(signal).cost(a, b)


def segmentation_cost(cost, breakpoints: list, length: int) -> float:
    """
    Summed cost of the segments delimited by `breakpoints` under a fitted
    cost object.
    """
    bounds = [0] + list(breakpoints) + [length]
    return sum(cost.cost(a, b) for a, b in zip(bounds[:-1], bounds[1:]))


def bottom_up(
    signal,
    model: SegmentCostModel,
    penalty: float,
    *,
    jump: int = 5,
    min_size: int = None,
) -> SegmentationResult:
    """
    Bottom-up segmentation. Start with a breakpoint at every multiple of
    `jump` and repeatedly remove the breakpoint whose removal increases the
    total cost the least, for as long as that increase (the merge gain) is
    smaller than `penalty`. Gains that tie are resolved in favor of the
    smallest breakpoint.
    """
    _is_SegmentCostModel(model)
    values = _signal_of(signal)
    length = values.shape[0]
    cost = model.fit(values)
    min_size = _resolve_min_size(cost, min_size)
    if jump < 1:
        raise ValueError(f"jump must be at least 1, got {jump}.")
    if penalty < 0:
        raise ValueError(f"penalty must be non-negative, got {penalty}.")
    if length < 2 * min_size:
        raise ValueError(
            f"Signal of length {length} is too short for min_size {min_size}."
        )
    grid = []
    previous = 0
    for b in range(jump, length, jump):
        if b - previous >= min_size and length - b >= min_size:
            grid.append(b)
            previous = b
    # Linked list over [0] + grid + [length]; gains are keyed by breakpoint.
    left = {b: a for a, b in zip([0] + grid, grid)}
    right = {a: b for a, b in zip(grid, grid[1:] + [length])}
    version = {b: 0 for b in grid}
    segment_costs = {}

    def cost_of(a, b):
        if (a, b) not in segment_costs:
            segment_costs[a, b] = cost.cost(a, b)
        return segment_costs[a, b]

    def gain(b):
        a, c = left[b], right[b]
        return cost_of(a, c) - cost_of(a, b) - cost_of(b, c)

    heap = [(gain(b), b, 0) for b in grid]
    _heapq.heapify(heap)
    alive = set(grid)
    while heap:
        g, b, v = _heapq.heappop(heap)
        if b not in alive or v != version[b]:
            continue
        if not g < penalty:
            break
        alive.remove(b)
        a, c = left[b], right[b]
        right[a] = c
        left[c] = a
        for neighbor in (a, c):
            if neighbor in alive:
                version[neighbor] += 1
                _heapq.heappush(heap, (gain(neighbor), neighbor, version[neighbor]))
    breakpoints = sorted(alive)
    total = segmentation_cost(cost, breakpoints, length)
    _logger.debug(
        "bottom_up(%s, penalty=%s): %d breakpoints", model.kind, penalty, len(breakpoints)
    )
    return SegmentationResult(breakpoints, total, penalty)


def window_based(
    signal,
    model: SegmentCostModel,
    penalty: float,
    *,
    width: int = 100,
) -> SegmentationResult:
    """
    Window-based segmentation. For every center `t` at which a window of
    `width` samples fits, compute the discrepancy
    `d(t) = cost(t - w/2, t + w/2) - cost(t - w/2, t) - cost(t, t + w/2)`.
    Centers with `d(t) > penalty` are accepted in order of decreasing
    discrepancy (ties to the smallest index), suppressing any center within
    `w/2` samples of one already accepted.
    """
    _is_SegmentCostModel(model)
    values = _signal_of(signal)
    length = values.shape[0]
    width = int(width)
    if width < 2 or width % 2:
        raise ValueError(f"The window width must be even and at least 2, got {width}.")
    if length < width:
        raise ValueError(
            f"Signal of length {length} is shorter than the window width {width}."
        )
    cost = model.fit(values)
    half = width // 2
    if half < cost.min_size:
        raise ValueError(
            f"Window width {width} is too small for the {model.kind} cost (min_size={cost.min_size})."
        )
    discrepancy = {}
    for t in range(half, length - half + 1):
        whole = cost.cost(t - half, t + half)
        discrepancy[t] = whole - cost.cost(t - half, t) - cost.cost(t, t + half)
    candidates = sorted(
        (t for t, d in discrepancy.items() if d > penalty and 0 < t < length),
        key=lambda t: (-discrepancy[t], t),
    )
    accepted = []
    for t in candidates:
        if all(abs(t - s) > half for s in accepted):
            accepted.append(t)
    breakpoints = sorted(accepted)
    total = segmentation_cost(cost, breakpoints, length)
    _logger.debug(
        "window_based(%s, penalty=%s): %d breakpoints", model.kind, penalty, len(breakpoints)
    )
    return SegmentationResult(breakpoints, total, penalty)


def detect(
    signal,
    search: str,
    model: SegmentCostModel,
    penalty: float,
    *,
    jump: int = 5,
    width: int = 100,
    min_size: int = None,
) -> SegmentationResult:
    """
    Run one search method (`"bottomup"` or `"window"`) with a cost model and
    penalty. The breakpoints are label-free change timestamps.
    """
    if isinstance(model, str):
        model = SegmentCostModel(model)
    search = _resolve_search(search)
    if search == "bottomup":
        return bottom_up(signal, model, penalty, jump=jump, min_size=min_size)
    return window_based(signal, model, penalty, width=width)


def configuration_grid(
    costs: list = None, searches: list = SEARCHES, penalties: list = DEFAULT_PENALTIES
) -> list:
    """
    Enumerate `(cost, search, penalty)` configurations, grouped by cost,
    then search, then penalty. The defaults give the full sweep of 7 costs ×
    2 searches × 3 penalties = 42 configurations.
    """
    if costs is None:
        costs = list(_cost.costs)
    for kind in costs:
        if kind not in _cost.costs:
            raise ValueError(f"Unknown cost {kind!r}.")
    searches = [_resolve_search(search) for search in searches]
    return [
        (kind, search, penalty)
        for kind, search, penalty in _itertools.product(costs, searches, penalties)
    ]


def configuration_name(kind: str, search: str, penalty) -> str:
    """
    File-name friendly name of a configuration, e.g. `bottomup-l2-100`.
    """
    return f"{_resolve_search(search)}-{kind}-{penalty:g}"


def _signal_of(signal):
    if isinstance(signal, (list, tuple)) or getattr(signal, "ndim", None) == 1:
        values = _np.asarray(signal, dtype=float)
        if values.ndim == 1:
            return values[:, None]
    return _values_of(signal)


def _resolve_search(search):
    try:
        return _SEARCH_ALIASES[str(search).lower()]
    except KeyError:
        raise ValueError(
            f"Unknown search {search!r}; use one of {', '.join(SEARCHES)}."
        ) from None


def _resolve_min_size(cost, min_size):
    if min_size is None:
        return cost.min_size
    if min_size < cost.min_size:
        raise ValueError(
            f"min_size {min_size} is below the minimum of the {cost.name} cost ({cost.min_size})."
        )
    return int(min_size)


def _is_SegmentCostModel(model):
    if not isinstance(model, SegmentCostModel):
        raise TypeError(f"Expected SegmentCostModel, got {model.__class__.__name__}")
