"""
Utilities around pipeline runs: artifact hashing, run manifests that make
steps resumable, and the report bundle that collates score tables and state
strips.
"""

import hashlib as _hashlib
import json as _json
import logging as _logging
import pathlib as _pathlib
import numpy as _np
from .io import load_predictions as _load_predictions
from .io import save as _save
from .measure import evaluate_predictions as _evaluate_predictions
from .measure import prediction_labels as _prediction_labels
from .measure import score_table as _score_table
from .measure import DEFAULT_TAUS
from .series import expand_labels as _expand_labels
from .vis import render_state_strip as _render_state_strip

try:
    from ._version import __version__
except ImportError:
    __version__ = "???"

_logger = _logging.getLogger(__name__)

RUN_MANIFEST_SUFFIX = ".run.json"
RUN_MANIFEST_NAME = "run_manifest.json"


def file_digest(file_path) -> str:
    """
    SHA-256 hex digest of a file, or of every file under a directory (paths
    and contents, in sorted order).
    """
    path = _pathlib.Path(file_path)
    digest = _hashlib.sha256()
    if path.is_dir():
        for child in sorted(p for p in path.rglob("*") if p.is_file()):
            if child.name == RUN_MANIFEST_NAME:
                continue
            digest.update(str(child.relative_to(path)).encode("utf-8"))
            _update_with_file(digest, child)
    else:
        _update_with_file(digest, path)
    return digest.hexdigest()


def config_digest(config: dict) -> str:
    """
    SHA-256 hex digest of a JSON-serializable configuration, independent of
    key order.
    """
    text = _json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return _hashlib.sha256(text.encode("utf-8")).hexdigest()


def run_manifest_path(output) -> _pathlib.Path:
    """
    Where the run manifest of an output lives: inside an output directory,
    or beside an output file as `<name>.run.json`.
    """
    output = _pathlib.Path(output)
    if output.is_dir() or not output.suffix:
        return output / RUN_MANIFEST_NAME
    return output.with_name(output.name + RUN_MANIFEST_SUFFIX)


def write_run_manifest(output, command: str, config: dict, inputs: list) -> _pathlib.Path:
    """
    Record a completed step: the command, its resolved configuration, and
    the digests of its inputs and of the output. Returns the manifest path.
    """
    path = run_manifest_path(output)
    manifest = {
        "command": command,
        "statekit_version": __version__,
        "config": config,
        "config_digest": config_digest(config),
        "inputs": {str(p): file_digest(p) for p in inputs},
        "output": {str(output): file_digest(output)},
    }
    _save(manifest, path)
    return path


def is_up_to_date(output, command: str, config: dict, inputs: list) -> bool:
    """
    Whether `output` was produced by the same command with the same
    configuration from unchanged inputs, and has not changed since.
    """
    path = run_manifest_path(output)
    if not path.exists() or not _pathlib.Path(output).exists():
        return False
    try:
        with open(path, encoding="utf-8") as file:
            manifest = _json.load(file)
    except ValueError:
        return False
    if manifest.get("command") != command:
        return False
    if manifest.get("config_digest") != config_digest(config):
        return False
    recorded = manifest.get("inputs", {})
    if sorted(recorded) != sorted(str(p) for p in inputs):
        return False
    for p in inputs:
        if not _pathlib.Path(p).exists() or recorded[str(p)] != file_digest(p):
            return False
    return manifest.get("output", {}).get(str(output)) == file_digest(output)


def length_summary(lengths) -> dict:
    """
    Count, minimum, median, and maximum of a list of flight lengths.
    """
    lengths = _np.asarray(list(lengths), dtype=int)
    if lengths.size == 0:
        return {"count": 0, "min": None, "median": None, "max": None}
    return {
        "count": int(lengths.size),
        "min": int(lengths.min()),
        "median": float(_np.median(lengths)),
        "max": int(lengths.max()),
    }


def create_report(
    truth,
    prediction_files: list,
    output_dir,
    *,
    taus=DEFAULT_TAUS,
    strips: bool = True,
    max_samples: int = 600,
    matching: str = "set",
    absent: str = "exclude",
    split: str = None,
) -> dict:
    """
    Score every prediction file against `truth` (a `Dataset`) and write the
    report bundle to `output_dir`:

    - `scores.json` Aggregate and per-flight scores of every file.
    - `cpd_table` All change point detector configurations, one row per
    (cost, search, penalty), with precision, recall, and F1 per tolerance.
    - `cpd_best` The penalty with the highest F1 summed over tolerances, for
    each (search, cost) pair.
    - `model_table` Network predictions with the best detector F1 per
    tolerance alongside.
    - `classification_table` Macro precision, recall, and F1 of every
    labeling predictor (networks and windowed baselines).
    - `ablation_table` One column per network variant, when several
    variants are reported together.
    - `strips/<name>/<flight>.svg` One state strip per flight of every
    labeling prediction file.

    Tables are written as `.csv` and as aligned `.txt`, with scores in
    percent. When `split` is given and the dataset is split, flights of that
    split without a prediction are warned about. Returns a dictionary
    mapping each artifact name to its path.
    """
    output_dir = _pathlib.Path(output_dir)
    prediction_files = [_pathlib.Path(p) for p in prediction_files]
    if not prediction_files:
        raise ValueError("The report needs at least one prediction file.")
    for path in prediction_files:
        if not path.exists():
            raise ValueError(f"Prediction file not found: {path}")
    output_dir.mkdir(parents=True, exist_ok=True)
    summary = length_summary(truth.lengths)
    _logger.info(
        "Truth: %d flights, length min %s, median %s, max %s",
        summary["count"],
        summary["min"],
        summary["median"],
        summary["max"],
    )
    truth_table = {flight_id: (series, annotation) for flight_id, series, annotation in truth}
    expected = None
    if split is not None and truth.splits is not None:
        expected = [flight_id for flight_id, _, _ in truth.select(split)]
    predictions = {}
    evaluations = {}
    for path in prediction_files:
        name = report_name(path, evaluations)
        predictions[name] = _load_predictions(path)
        evaluations[name] = _evaluate_predictions(
            truth_table,
            predictions[name],
            taus,
            sample_rate_hz=truth.sample_rate_hz,
            num_states=truth.num_states,
            matching=matching,
            absent=absent,
            expected=expected,
        )
        _logger.info("Scored %s over %d flights", name, evaluations[name]["n_flights"])
    artifacts = {"scores": output_dir / "scores.json"}
    _save(evaluations, artifacts["scores"])
    table = _percent(_score_table(evaluations), taus)
    cpd = table[table["kind"] == "cpd"]
    models = table[table["kind"] == "model"]
    labelers = table[table["macro_f1"].notna()]
    if len(cpd):
        cpd_rows = _sorted_cpd(cpd)
        columns = ["cost", "search", "penalty"] + _cpd_columns(taus)
        artifacts.update(_write_table(cpd_rows[columns], output_dir, "cpd_table"))
        artifacts.update(_write_table(_best_penalties(cpd_rows, taus)[columns], output_dir, "cpd_best"))
    if len(models):
        model_rows = models.copy()
        columns = ["name", "variant"] + _cpd_columns(taus)
        for tau in taus:
            column = f"baseline_f1@{tau}s"
            model_rows[column] = cpd[f"f1@{tau}s"].max() if len(cpd) else None
            columns.append(column)
        artifacts.update(_write_table(model_rows[columns], output_dir, "model_table"))
        if models["variant"].nunique() > 1:
            artifacts.update(_write_table(_ablation(models, taus), output_dir, "ablation_table"))
    if len(labelers):
        columns = [c for c in ("name", "kind", "variant", "w") if c in labelers]
        columns += ["macro_precision", "macro_recall", "macro_f1"]
        artifacts.update(_write_table(labelers[columns], output_dir, "classification_table"))
    if strips:
        for name, records in predictions.items():
            if not records or not all("initial_state" in r for r in records.values()):
                continue
            strip_dir = output_dir / "strips" / name
            count = write_state_strips(truth, records, strip_dir, max_samples=max_samples)
            artifacts[f"strips/{name}"] = strip_dir
            _logger.info("Wrote %d state strips for %s", count, name)
    return artifacts


def write_state_strips(truth, records: dict, output_dir, *, max_samples: int = 600) -> int:
    """
    Write one SVG state strip per prediction record (records must carry an
    `initial_state`). Returns the number of strips written.
    """
    output_dir = _pathlib.Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    truth_table = {flight_id: (series, annotation) for flight_id, series, annotation in truth}
    for flight_id, record in records.items():
        if "initial_state" not in record:
            raise ValueError(f"Record of {flight_id} has no initial_state to draw.")
        series, annotation = truth_table[flight_id]
        valid_from = int(record.get("valid_from", 0))
        _render_state_strip(
            _expand_labels(annotation, len(series)).states[valid_from:],
            _prediction_labels(record),
            max_samples=max_samples,
            output_path=output_dir / f"{flight_id}.svg",
        )
    return len(records)


def _update_with_file(digest, path):
    with open(path, "rb") as file:
        for block in iter(lambda: file.read(1 << 20), b""):
            digest.update(block)


def report_name(path, taken=()) -> str:
    """
    Name of a prediction file in reports: its file name without the
    `.jsonl` suffix, numbered if already `taken`.
    """
    path = _pathlib.Path(path)
    name = path.name
    for suffix in (".jsonl", ".json"):
        if name.endswith(suffix):
            name = name[: -len(suffix)]
    candidate, i = name, 1
    while candidate in taken:
        i += 1
        candidate = f"{name}_{i}"
    return candidate


def _cpd_columns(taus):
    return [f"{metric}@{tau}s" for tau in taus for metric in ("precision", "recall", "f1")]


def _percent(table, taus):
    table = table.copy()
    for column in _cpd_columns(taus) + ["macro_precision", "macro_recall", "macro_f1"]:
        if column in table:
            table[column] = (table[column].astype(float) * 100).round(2)
    for column in ("kind", "variant", "cost", "search", "penalty", "w"):
        if column not in table:
            table[column] = None
    return table


def _sorted_cpd(cpd):
    return cpd.sort_values(["cost", "search", "penalty"], kind="stable").reset_index(drop=True)


def _best_penalties(cpd, taus):
    scored = cpd.copy()
    scored["_total_f1"] = scored[[f"f1@{tau}s" for tau in taus]].sum(axis=1)
    best = scored.loc[scored.groupby(["search", "cost"], sort=True)["_total_f1"].idxmax()]
    return best.drop(columns="_total_f1").reset_index(drop=True)


def _ablation(models, taus):
    try:
        import pandas as pd
    except ModuleNotFoundError as e:
        e.msg = "The report requires Pandas."
        raise

    rows = _cpd_columns(taus) + ["macro_precision", "macro_recall", "macro_f1"]
    columns = {}
    for _, model in models.iterrows():
        columns[model["variant"]] = [model[row] for row in rows]
    return pd.DataFrame(columns, index=rows).rename_axis("metric").reset_index()


def _write_table(table, output_dir, name):
    csv_path = output_dir / f"{name}.csv"
    txt_path = output_dir / f"{name}.txt"
    table.to_csv(csv_path, index=False)
    with open(txt_path, "w", encoding="utf-8") as file:
        file.write(table.to_string(index=False))
        file.write("\n")
    return {name: csv_path, f"{name}.txt": txt_path}
