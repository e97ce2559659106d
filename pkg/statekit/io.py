"""
Functions for reading and writing data: flight files, dataset manifests,
prediction and breakpoint files, and general JSON.
"""

import csv as _csv
import json as _json
import pathlib as _pathlib
from types import GeneratorType as _GeneratorType
import numpy as _np
from .series import MultivariateSeries as _MultivariateSeries
from .series import StateAnnotation as _StateAnnotation
from .series import expand_labels as _expand_labels
from .dataset import Dataset as _Dataset
from .dataset import Normalizer as _Normalizer
from .dataset import filter_by_length as _filter_by_length

MANIFEST_FORMAT = "statekit-manifest"
MANIFEST_VERSION = 1
MANIFEST_NAME = "manifest.jsonl"


def load(file_path):
    """
    Read in a JSON file. `statekit.series.MultivariateSeries`,
    `statekit.series.StateAnnotation`, and `statekit.dataset.Normalizer`
    objects are automatically decoded and instantiated.
    """
    with open(str(file_path), encoding="utf-8") as file:
        data = _json.load(file, object_hook=_statekit_decoder)
    return data


def save(data, file_path, *, compress: bool = False):
    """
    Write arbitrary data to a JSON file. If `compress` is `True`, the file is
    written in the most compact way; if `False`, the file will be more human
    readable. Series, annotations, and normalizers are automatically encoded.
    """
    if compress:
        indent = None
        separators = (",", ":")
    else:
        indent = "\t"
        separators = (",", ": ")
    with open(str(file_path), "w", encoding="utf-8") as file:
        _json.dump(
            data,
            file,
            default=_statekit_encoder,
            ensure_ascii=False,
            indent=indent,
            separators=separators,
        )


def read_flight(
    file_path,
    *,
    state_names: list = None,
    sample_rate_hz: float = 5.0,
    encoding: str = "utf-8",
):
    """
    Read a flight file: a CSV file with the header
    `t,<channel_1>,...,<channel_n>[,state]` and one row per sample. Returns a
    `(MultivariateSeries, StateAnnotation)` pair; the annotation is `None` if
    the file has no `state` column. State names are mapped to ids through
    `state_names`; names missing from the list raise an error naming the
    line. If `state_names` is `None`, ids are assigned in order of first
    appearance. Parse errors name the file and the 1-based line number.
    """
    file_path = _pathlib.Path(file_path)
    with open(file_path, encoding=encoding, newline="") as file:
        csv_reader = _csv.reader(file)
        try:
            header = next(csv_reader)
        except StopIteration:
            raise ValueError(f"{file_path}: the file is empty.") from None
        if not header or header[0] != "t":
            raise ValueError(f'{file_path}, line 1: the first column must be "t".')
        has_state = header[-1] == "state"
        channel_names = header[1:-1] if has_state else header[1:]
        if state_names is None:
            lookup = {}
            growing = True
        else:
            lookup = {name: i for i, name in enumerate(state_names)}
            growing = False
        rows = []
        states = []
        for row in csv_reader:
            line = csv_reader.line_num
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(
                    f"{file_path}, line {line}: expected {len(header)} fields, got {len(row)}."
                )
            try:
                if int(row[0]) != len(rows):
                    raise ValueError(
                        f"{file_path}, line {line}: expected t={len(rows)}, got t={row[0]}."
                    )
                rows.append(
                    [float(value) for value in (row[1:-1] if has_state else row[1:])]
                )
            except ValueError as error:
                if str(error).startswith(str(file_path)):
                    raise
                raise ValueError(f"{file_path}, line {line}: {error}") from None
            if has_state:
                name = row[-1]
                if name not in lookup:
                    if not growing:
                        raise ValueError(
                            f"{file_path}, line {line}: unknown state {name!r}."
                        )
                    lookup[name] = len(lookup)
                states.append(lookup[name])
    if not rows:
        raise ValueError(f"{file_path}: the file contains no samples.")
    series = _MultivariateSeries.from_array(
        _np.array(rows, dtype=float),
        sample_rate_hz=sample_rate_hz,
        channel_names=channel_names,
    )
    if not has_state:
        return series, None
    num_states = len(state_names) if state_names is not None else len(lookup)
    annotation = _StateAnnotation.from_labels(states, num_states)
    return series, annotation


def write_flight(file_path, series, annotation=None, *, state_names: list = None):
    """
    Write a `MultivariateSeries` (and optionally its `StateAnnotation`) to a
    flight file. Values are written in Python's shortest round-trip float
    notation, so reading the file back recovers the series exactly. State
    ids are written as names from `state_names` (or as the ids themselves if
    no names are given).
    """
    values = series.values
    header = ["t"] + series.channel_names
    labels = None
    if annotation is not None:
        labels = _expand_labels(annotation, len(series)).states
        header.append("state")
        if state_names is None:
            state_names = [str(i) for i in range(annotation.num_states)]
    with open(str(file_path), "w", encoding="utf-8", newline="") as file:
        csv_writer = _csv.writer(file, lineterminator="\n")
        csv_writer.writerow(header)
        for t, row in enumerate(values):
            fields = [str(t)] + [repr(float(value)) for value in row]
            if labels is not None:
                fields.append(state_names[labels[t]])
            csv_writer.writerow(fields)


def save_dataset(dataset, directory, *, flight_dir: str = "flights"):
    """
    Write a `statekit.dataset.Dataset` to `directory`: one flight file per
    sample under `flight_dir` plus a JSON-lines manifest
    (`manifest.jsonl`). The first manifest line is a header holding the
    state name table, channel names, sampling rate, and normalization
    statistics; every following line describes one flight. Returns the path
    to the manifest.
    """
    directory = _pathlib.Path(directory)
    (directory / flight_dir).mkdir(parents=True, exist_ok=True)
    normalizer = dataset.normalizer
    header = {
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "states": dataset.state_names,
        "channels": dataset.channel_names,
        "sample_rate_hz": dataset.sample_rate_hz,
        "normalizer": None if normalizer is None else normalizer.serialize(),
    }
    splits = dataset.splits
    records = [header]
    for i, (flight_id, series, annotation) in enumerate(dataset):
        relative_path = f"{flight_dir}/{flight_id}.csv"
        write_flight(
            directory / relative_path,
            series,
            annotation,
            state_names=dataset.state_names,
        )
        records.append(
            {
                "id": flight_id,
                "path": relative_path,
                "split": None if splits is None else splits[i],
            }
        )
    manifest_path = directory / MANIFEST_NAME
    write_jsonl(records, manifest_path)
    return manifest_path


def load_dataset(
    path, *, min_length: int = 200, max_length: int = 20000, labeled: bool = True
):
    """
    Read a dataset from a manifest file (or a directory containing
    `manifest.jsonl`). Flights outside the length bounds
    `[min_length, max_length]` are dropped with a warning. If `labeled` is
    `True`, every flight file must carry a `state` column.
    """
    path = _pathlib.Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    if not path.exists():
        raise ValueError(f"Manifest not found: {path}")
    records = read_jsonl(path)
    if not records:
        raise ValueError(f"{path}: the manifest is empty.")
    header = records[0]
    if header.get("format") != MANIFEST_FORMAT:
        raise ValueError(f"{path}, line 1: not a {MANIFEST_FORMAT} header.")
    if header.get("version") != MANIFEST_VERSION:
        raise ValueError(
            f"{path}, line 1: unsupported manifest version {header.get('version')}."
        )
    entries = records[1:]
    if not entries:
        raise ValueError(f"{path}: the dataset contains no flights.")
    state_names = header["states"]
    samples = []
    ids = []
    splits = []
    for entry in entries:
        series, annotation = read_flight(
            path.parent / entry["path"],
            state_names=state_names,
            sample_rate_hz=header["sample_rate_hz"],
        )
        if labeled and annotation is None:
            raise ValueError(f"{entry['path']}: the flight has no state column.")
        samples.append((series, annotation))
        ids.append(entry["id"])
        splits.append(entry.get("split"))
    normalizer = header.get("normalizer")
    if normalizer is not None:
        normalizer = _Normalizer(normalizer["mean"], normalizer["std"])
    dataset = _Dataset(
        samples,
        state_names=state_names,
        ids=ids,
        splits=None if None in splits else splits,
        normalizer=normalizer,
    )
    return _filter_by_length(dataset, min_length=min_length, max_length=max_length)


def prediction_record(
    flight_id: str,
    length: int,
    change_points: list,
    *,
    valid_from: int = 0,
    initial_state: int = None,
    source: dict = None,
) -> dict:
    """
    Build one record of a prediction file: the flight's predicted change
    points as `[t, state]` pairs, the flight length, and the first timestep
    the predictor covers (`valid_from`, nonzero for windowed baselines). If
    `initial_state` (the predicted state at `valid_from`) is given, the
    record can also be scored as a per-timestep classification.
    """
    record = {
        "flight": str(flight_id),
        "length": int(length),
        "valid_from": int(valid_from),
        "change_points": [[int(t), int(s)] for t, s in change_points],
        "source": dict(source or {}),
    }
    if initial_state is not None:
        record["initial_state"] = int(initial_state)
    return record


def breakpoint_record(
    flight_id: str, length: int, breakpoints: list, *, source: dict = None
) -> dict:
    """
    Build one record of a breakpoint file (label-free change points from a
    classical detector).
    """
    return {
        "flight": str(flight_id),
        "length": int(length),
        "breakpoints": [int(b) for b in breakpoints],
        "source": dict(source or {}),
    }


def write_jsonl(records, file_path):
    """
    Write a list of dictionaries to a JSON-lines file, one compact object
    per line.
    """
    with open(str(file_path), "w", encoding="utf-8") as file:
        for record in records:
            file.write(
                _json.dumps(
                    record,
                    default=_statekit_encoder,
                    ensure_ascii=False,
                    separators=(",", ":"),
                )
            )
            file.write("\n")


def read_jsonl(file_path) -> list:
    """
    Read a JSON-lines file into a list of dictionaries. Blank lines are
    skipped; malformed lines raise an error naming the line number.
    """
    records = []
    with open(str(file_path), encoding="utf-8") as file:
        for line_number, line in enumerate(file, 1):
            if not line.strip():
                continue
            try:
                records.append(_json.loads(line))
            except _json.JSONDecodeError as error:
                raise ValueError(
                    f"{file_path}, line {line_number}: {error.msg}."
                ) from None
    return records


def load_predictions(file_path) -> dict:
    """
    Read a prediction or breakpoint file into a dictionary mapping flight id
    to record. Breakpoint records gain a `change_points` entry with state -1,
    so both kinds can be scored by the CPD measures.
    """
    predictions = {}
    for record in read_jsonl(file_path):
        if "flight" not in record:
            raise ValueError(f"{file_path}: record without a flight id.")
        if "change_points" not in record:
            if "breakpoints" not in record:
                raise ValueError(
                    f"{file_path}: record for {record['flight']} has no change points."
                )
            record["change_points"] = [[b, -1] for b in record["breakpoints"]]
            record.setdefault("valid_from", 0)
        predictions[record["flight"]] = record
    return predictions


def _statekit_encoder(obj):
    """
    Convert a series, annotation, or normalizer into something JSON
    serializable that can later be decoded by _statekit_decoder().
    """
    if isinstance(obj, _MultivariateSeries):
        return {"__MultivariateSeries__": obj.serialize()}
    if isinstance(obj, _StateAnnotation):
        return {
            "__StateAnnotation__": {
                "entries": obj.serialize(),
                "num_states": obj.num_states,
            }
        }
    if isinstance(obj, _Normalizer):
        return {"__Normalizer__": obj.serialize()}
    if isinstance(obj, _np.ndarray):
        return obj.tolist()
    if isinstance(obj, _np.integer):
        return int(obj)
    if isinstance(obj, _np.floating):
        return float(obj)
    if isinstance(obj, _GeneratorType):
        return list(obj)
    raise TypeError(f"Object of type {obj.__class__.__name__} is not JSON serializable")


def _statekit_decoder(obj):
    """
    Decode an object into a series, annotation, or normalizer if the key
    implies that it is one of those types.
    """
    if "__MultivariateSeries__" in obj:
        return _MultivariateSeries(**obj["__MultivariateSeries__"])
    if "__StateAnnotation__" in obj:
        return _StateAnnotation(**obj["__StateAnnotation__"])
    if "__Normalizer__" in obj:
        return _Normalizer(**obj["__Normalizer__"])
    return obj
