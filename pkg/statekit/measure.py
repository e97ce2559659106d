"""
Functions for scoring predictions: tolerance-margin precision, recall, and
F1 of detected change points, macro-averaged per-timestep classification
scores, and the collation of scores into tables.
"""

import warnings as _warnings
import numpy as _np
from .series import StateAnnotation as _StateAnnotation
from .series import LabelSequence as _LabelSequence
from .series import expand_labels as _expand_labels
from .series import _states_of

DEFAULT_TAUS = (1, 3, 5)


class CpdConfusion:
    """
    Counts of true positives, false positives, and false negatives of a set
    of detected change points at one tolerance. Confusions add up, so scores
    over many flights are computed from the summed counts.
    """

    def __init__(self, tp: int, fp: int, fn: int, tau_samples: int):
        for name, value in (("tp", tp), ("fp", fp), ("fn", fn)):
            if int(value) < 0:
                raise ValueError(f"{name} must be non-negative, got {value}.")
        self.tp = int(tp)
        self.fp = int(fp)
        self.fn = int(fn)
        self.tau_samples = int(tau_samples)

    def __repr__(self):
        return f"CpdConfusion[tp={self.tp}, fp={self.fp}, fn={self.fn}, tau={self.tau_samples}]"

    def __eq__(self, other):
        if not isinstance(other, CpdConfusion):
            return NotImplemented
        return self.serialize() == other.serialize()

    def __add__(self, other):
        if not isinstance(other, CpdConfusion):
            return NotImplemented
        if other.tau_samples != self.tau_samples:
            raise ValueError("Cannot add confusions computed at different tolerances.")
        return CpdConfusion(
            self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.tau_samples
        )

    def serialize(self) -> dict:
        """
        Returns representation of the counts as a dictionary for
        serialization.
        """
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tau_samples": self.tau_samples}


class ClassificationScores:
    """
    Per-class and macro-averaged precision and recall of per-timestep
    labels. The macro F1 is the harmonic mean of macro precision and macro
    recall.
    """

    def __init__(self, per_class_precision: dict, per_class_recall: dict):
        if set(per_class_precision) != set(per_class_recall):
            raise ValueError("Precision and recall must cover the same classes.")
        self.per_class_precision = dict(per_class_precision)
        self.per_class_recall = dict(per_class_recall)

    def __repr__(self):
        return f"ClassificationScores[P={self.precision:.4f}, R={self.recall:.4f}, F1={self.f1:.4f}]"

    @property
    def classes(self) -> list:
        """State ids included in the macro averages."""
        return sorted(self.per_class_precision)

    @property
    def precision(self) -> float:
        """Macro precision."""
        if not self.per_class_precision:
            return 0.0
        return float(_np.mean(list(self.per_class_precision.values())))

    @property
    def recall(self) -> float:
        """Macro recall."""
        if not self.per_class_recall:
            return 0.0
        return float(_np.mean(list(self.per_class_recall.values())))

    @property
    def f1(self) -> float:
        """Harmonic mean of macro precision and recall."""
        return _harmonic_mean(self.precision, self.recall)

    def serialize(self) -> dict:
        """
        Returns representation of the scores as a dictionary for
        serialization.
        """
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "per_class_precision": {str(k): v for k, v in self.per_class_precision.items()},
            "per_class_recall": {str(k): v for k, v in self.per_class_recall.items()},
        }


def tau_to_samples(tau_seconds: float, sample_rate_hz: float = 5.0) -> int:
    """
    Convert a tolerance in seconds to a (strictly positive) number of
    samples by rounding.
    """
    tau_samples = int(round(float(tau_seconds) * float(sample_rate_hz)))
    if tau_samples <= 0:
        raise ValueError(
            f"The tolerance must be at least one sample, got {tau_seconds} s at {sample_rate_hz} Hz."
        )
    return tau_samples


def cpd_confusion(
    true_cp,
    pred_cp,
    tau_seconds: float,
    sample_rate_hz: float = 5.0,
    *,
    matching: str = "set",
) -> CpdConfusion:
    """
    Compare detected change points with the true ones at a tolerance of
    `tau_seconds`. A detection is a true positive if some true change point
    lies strictly within the tolerance of it; the remaining detections are
    false positives, and true change points with no detection within the
    tolerance are false negatives. Under this default `"set"` matching one
    true change point may vouch for several detections. With
    `matching="greedy"`, pairs are instead matched one-to-one, closest
    first. Change points at `t = 0` (the initial state) are ignored on both
    sides. Either argument may be a `StateAnnotation`, a list of
    `(t, state)` pairs, or a list of timestamps.
    """
    tau_samples = tau_to_samples(tau_seconds, sample_rate_hz)
    true_t = _timestamps(true_cp)
    pred_t = _timestamps(pred_cp)
    if matching == "set":
        if true_t.size and pred_t.size:
            hits = _np.abs(_np.subtract.outer(true_t, pred_t)) < tau_samples
            tp = int(hits.any(axis=0).sum())
            fn = int((~hits.any(axis=1)).sum())
        else:
            tp = 0
            fn = true_t.size
        return CpdConfusion(tp, pred_t.size - tp, fn, tau_samples)
    if matching == "greedy":
        distances = _np.abs(_np.subtract.outer(true_t, pred_t))
        pairs = sorted(
            (int(distances[i, j]), int(true_t[i]), int(pred_t[j]), i, j)
            for i, j in zip(*_np.nonzero(distances < tau_samples))
        )
        used_true, used_pred = set(), set()
        for _, _, _, i, j in pairs:
            if i not in used_true and j not in used_pred:
                used_true.add(i)
                used_pred.add(j)
        tp = len(used_true)
        return CpdConfusion(tp, pred_t.size - tp, true_t.size - tp, tau_samples)
    raise ValueError(f'matching should be "set" or "greedy", got {matching!r}.')


def cpd_prf(confusion: CpdConfusion) -> tuple:
    """
    Precision, recall, and F1 of a `CpdConfusion`. Precision is 0 when
    nothing was detected, recall is 0 when there is nothing to detect, and
    F1 is 0 when either is 0.
    """
    if not isinstance(confusion, CpdConfusion):
        raise TypeError(f"Expected CpdConfusion, got {confusion.__class__.__name__}")
    detected = confusion.tp + confusion.fp
    actual = confusion.tp + confusion.fn
    precision = confusion.tp / detected if detected else 0.0
    recall = confusion.tp / actual if actual else 0.0
    return precision, recall, _harmonic_mean(precision, recall)


def macro_prf(
    true_labels,
    pred_labels,
    mask=None,
    num_states: int = None,
    *,
    absent: str = "exclude",
) -> ClassificationScores:
    """
    Per-class precision `TP_s / |P_s|` and recall `TP_s / |T_s|` over the
    unmasked timesteps, averaged without weights. An undefined ratio counts
    as 0. With `absent="exclude"` (the default) classes that occur in
    neither the truth nor the prediction are left out of the averages; with
    `absent="zero"` every one of the `num_states` classes is averaged.
    """
    true_states = _states_of(true_labels)
    pred_states = _states_of(pred_labels)
    if true_states.shape != pred_states.shape:
        raise ValueError(
            f"Label sequences differ in length ({true_states.shape[0]} and {pred_states.shape[0]})."
        )
    if mask is not None:
        valid = _np.asarray(mask).astype(bool)
        if valid.shape != true_states.shape:
            raise ValueError("mask must have the same length as the labels.")
        true_states = true_states[valid]
        pred_states = pred_states[valid]
    if num_states is None:
        num_states = int(max(true_states.max(initial=-1), pred_states.max(initial=-1))) + 1
    if absent not in ("exclude", "zero"):
        raise ValueError(f'absent should be "exclude" or "zero", got {absent!r}.')
    true_counts = _np.bincount(true_states, minlength=num_states)
    pred_counts = _np.bincount(pred_states, minlength=num_states)
    hit_counts = _np.bincount(true_states[true_states == pred_states], minlength=num_states)
    precision, recall = {}, {}
    for s in range(num_states):
        if absent == "exclude" and true_counts[s] == 0 and pred_counts[s] == 0:
            continue
        precision[s] = hit_counts[s] / pred_counts[s] if pred_counts[s] else 0.0
        recall[s] = hit_counts[s] / true_counts[s] if true_counts[s] else 0.0
    return ClassificationScores(precision, recall)


def evaluate_predictions(
    truth,
    predictions: dict,
    taus=DEFAULT_TAUS,
    *,
    sample_rate_hz: float = 5.0,
    num_states: int = None,
    matching: str = "set",
    absent: str = "exclude",
    expected: list = None,
) -> dict:
    """
    Score a prediction file against the true annotations. `truth` maps
    flight ids to `(series, annotation)` pairs (a `Dataset` works too) and
    `predictions` maps flight ids to prediction records as returned by
    `statekit.io.load_predictions()`. Only timesteps from each record's
    `valid_from` onwards are scored. Change point counts are summed over
    flights before computing precision and recall; classification scores
    pool the timesteps of all flights and are only computed when every
    record carries an `initial_state`. `expected` lists the flights that
    should have a prediction (every truth flight by default); any without
    one is listed under `unscored` in the result and triggers a warning.
    Returns a dictionary with aggregate and per-flight scores.
    """
    truth = _truth_table(truth)
    missing = sorted(set(predictions) - set(truth))
    if missing:
        raise ValueError(f"No ground truth for flights: {', '.join(missing[:5])}.")
    if expected is None:
        expected = truth
    unknown = sorted(set(expected) - set(truth))
    if unknown:
        raise ValueError(f"Expected flights not in the ground truth: {', '.join(unknown[:5])}.")
    unscored = sorted(set(expected) - set(predictions))
    if unscored:
        _warnings.warn(
            f"{len(unscored)} flights have no prediction and are not scored: {', '.join(unscored[:5])}",
            UserWarning,
        )
    totals = {tau: None for tau in taus}
    flights = {}
    true_pool, pred_pool = [], []
    classify = all("initial_state" in record for record in predictions.values())
    for flight_id in sorted(predictions):
        record = predictions[flight_id]
        series, annotation = truth[flight_id]
        length = len(series)
        if int(record.get("length", length)) != length:
            raise ValueError(
                f"Flight {flight_id} has length {length}, the prediction says {record['length']}."
            )
        valid_from = int(record.get("valid_from", 0))
        true_cp = [t for t, _ in annotation.change_points if t > valid_from]
        pred_cp = [t for t, _ in record["change_points"] if t > valid_from]
        flight = {"valid_from": valid_from, "cpd": {}}
        for tau in taus:
            confusion = cpd_confusion(true_cp, pred_cp, tau, sample_rate_hz, matching=matching)
            totals[tau] = confusion if totals[tau] is None else totals[tau] + confusion
            flight["cpd"][str(tau)] = _cpd_entry(confusion)
        if classify:
            true_states = _expand_labels(annotation, length).states[valid_from:]
            pred_states = prediction_labels(record).states
            scores = macro_prf(true_states, pred_states, num_states=num_states, absent=absent)
            flight["classification"] = scores.serialize()
            true_pool.append(true_states)
            pred_pool.append(pred_states)
        flights[flight_id] = flight
    aggregate = {"cpd": {}, "classification": None}
    for tau in taus:
        if totals[tau] is not None:
            aggregate["cpd"][str(tau)] = _cpd_entry(totals[tau])
    if classify and true_pool:
        aggregate["classification"] = macro_prf(
            _np.concatenate(true_pool),
            _np.concatenate(pred_pool),
            num_states=num_states,
            absent=absent,
        ).serialize()
    source = {}
    if predictions:
        source = dict(next(iter(predictions.values())).get("source", {}))
    return {
        "taus": list(taus),
        "n_flights": len(flights),
        "unscored": unscored,
        "source": source,
        "aggregate": aggregate,
        "flights": flights,
    }


def prediction_labels(record: dict) -> _LabelSequence:
    """
    Rebuild the dense predicted labels of the timesteps
    `valid_from, ..., length - 1` from a prediction record.
    """
    valid_from = int(record.get("valid_from", 0))
    length = int(record["length"])
    entries = [(0, int(record["initial_state"]))]
    entries += [
        (int(t) - valid_from, int(s))
        for t, s in record["change_points"]
        if int(t) > valid_from
    ]
    return _expand_labels(entries, length - valid_from)


def score_table(evaluations: dict):
    """
    Collate evaluations (as returned by `evaluate_predictions()`, keyed by
    name) into a Pandas dataframe with one row per evaluation: the fields
    of the prediction source (search, cost, penalty, variant, window), then
    precision, recall, and F1 at every tolerance, then the macro
    classification scores where available.
    """
    try:
        import pandas as pd
    except ModuleNotFoundError as e:
        e.msg = "The score_table function requires Pandas."
        raise

    source_keys = []
    for evaluation in evaluations.values():
        for key in evaluation.get("source", {}):
            if key not in source_keys:
                source_keys.append(key)
    rows = []
    for name, evaluation in evaluations.items():
        row = {"name": name}
        for key in source_keys:
            row[key] = evaluation.get("source", {}).get(key)
        for tau in evaluation["taus"]:
            entry = evaluation["aggregate"]["cpd"].get(str(tau))
            for metric in ("precision", "recall", "f1"):
                row[f"{metric}@{tau}s"] = None if entry is None else entry[metric]
        classification = evaluation["aggregate"].get("classification")
        for metric in ("precision", "recall", "f1"):
            row[f"macro_{metric}"] = None if classification is None else classification[metric]
        rows.append(row)
    return pd.DataFrame(rows)


def _cpd_entry(confusion):
    precision, recall, f1 = cpd_prf(confusion)
    entry = confusion.serialize()
    entry.update({"precision": precision, "recall": recall, "f1": f1})
    return entry


def _truth_table(truth):
    if isinstance(truth, dict):
        return truth
    return {flight_id: (series, annotation) for flight_id, series, annotation in truth}


def _timestamps(change_points):
    if isinstance(change_points, _StateAnnotation):
        change_points = change_points.change_points
    timestamps = []
    for point in change_points:
        t = point[0] if isinstance(point, (tuple, list)) else point
        if int(t) > 0:
            timestamps.append(int(t))
    return _np.array(sorted(set(timestamps)), dtype=int)


def _harmonic_mean(a, b):
    if a <= 0 or b <= 0:
        return 0.0
    return 2 * a * b / (a + b)
