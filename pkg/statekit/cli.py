"""
Command-line entry point. Subcommands:

```
statekit generate --flights N --seed S --out DIR [--profile desk|paper-scale]
statekit train    --data DIR --model FILE [--preset desk|paper] [--variant hybrid|cnn_only|rnn_only]
statekit predict  --data DIR --model FILE --out FILE.jsonl
statekit detect   --data DIR --out FILE.jsonl|DIR [--grid] [--search S] [--cost C] [--penalty P]
statekit baseline --data DIR --out DIR [--w 3,5,10,15,20] [--folds 5]
statekit evaluate --truth DIR --pred FILE.jsonl [...] [--tau 1,3,5] [--out FILE.json] [--strips DIR]
statekit report   --truth DIR --pred FILE.jsonl [...] --out DIR
```

Every subcommand also takes `--config FILE` (JSON), `--seed`, `--threads`,
`--force`, and `--quiet`. Settings resolve as flags > config file >
defaults. Exit code 0 means success, 1 a usage or validation error, and 2
any other failure.
"""

import argparse
import copy
import dataclasses
import json
import logging
import os
import pathlib
import sys
from joblib import Parallel, delayed
from . import baseline, cpd, io, measure, net, sim, tools
from .dataset import split_dataset, DEFAULT_FRACTIONS, MIN_LENGTH, MAX_LENGTH
from .series import derive_change_points, expand_labels

logger = logging.getLogger(__name__)

THREADS_VARIABLE = "STATEKIT_THREADS"
COMMANDS = ("generate", "train", "predict", "detect", "baseline", "evaluate", "report")

DEFAULTS = {
    "seed": 0,
    "threads": None,
    "paths": {
        "data": None,
        "model": None,
        "output": None,
        "truth": None,
        "predictions": [],
        "strips": None,
    },
    "architecture": {
        "preset": "desk",
        "variant": "hybrid",
        "conv_layers": None,
        "gru_layers": None,
        "dense_hidden": None,
        "alpha": 0.3,
        "max_length": None,
    },
    "training": {
        "learning_rate": 1e-3,
        "beta1": 0.9,
        "beta2": 0.999,
        "epsilon": 1e-8,
        "batch_size": 4,
        "max_epochs": 80,
        "patience": 10,
        "fractions": list(DEFAULT_FRACTIONS),
    },
    "cpd": {
        "grid": False,
        "search": "bottomup",
        "cost": "l2",
        "penalty": 100,
        "costs": None,
        "searches": list(cpd.SEARCHES),
        "penalties": list(cpd.DEFAULT_PENALTIES),
        "jump": 5,
        "width": 100,
        "split": "test",
    },
    "baseline": {
        "windows": list(baseline.WINDOW_GRID),
        "folds": 5,
        "alphas": None,
        "max_rows": 50000,
        "split": "test",
    },
    "evaluation": {
        "taus": list(measure.DEFAULT_TAUS),
        "matching": "set",
        "absent": "exclude",
        "max_samples": 600,
        "split": "test",
    },
    "generate": {
        "flights": 50,
        "profile": "desk",
        "min_length": MIN_LENGTH,
        "max_length": MAX_LENGTH,
        "sample_rate_hz": 5.0,
        "noise_std": {},
    },
}


class UsageError(Exception):
    """
    Raised by the argument parser instead of exiting.
    """


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage().strip()}\n{self.prog}: error: {message}")


@dataclasses.dataclass
class RunConfig:
    """
    Resolved settings of one command: the command name, the single seed, the
    worker count, paths, and one parameter block per module.
    """

    command: str
    seed: int = 0
    threads: int = 1
    paths: dict = dataclasses.field(default_factory=dict)
    architecture: dict = dataclasses.field(default_factory=dict)
    training: dict = dataclasses.field(default_factory=dict)
    cpd: dict = dataclasses.field(default_factory=dict)
    baseline: dict = dataclasses.field(default_factory=dict)
    evaluation: dict = dataclasses.field(default_factory=dict)
    generate: dict = dataclasses.field(default_factory=dict)

    @classmethod
    def resolve(cls, command: str, file_config: dict = None, overrides: dict = None):
        """
        Merge the built-in defaults, a configuration document, and flag
        overrides (in increasing order of precedence). Unknown keys raise
        `KeyError` naming the key.
        """
        if command not in COMMANDS:
            raise ValueError(f"Unknown command {command!r}.")
        settings = copy.deepcopy(DEFAULTS)
        _merge(settings, file_config or {}, "config")
        _merge(settings, overrides or {}, "flags")
        threads = settings["threads"]
        if threads is None:
            threads = os.environ.get(THREADS_VARIABLE, 1)
        try:
            threads = int(threads)
        except ValueError:
            raise ValueError(f"Invalid thread count {threads!r}.") from None
        if threads < 1:
            raise ValueError(f"The thread count must be at least 1, got {threads}.")
        settings["threads"] = threads
        settings["seed"] = int(settings["seed"])
        return cls(command=command, **settings)

    def serialize(self, *, include_threads: bool = False) -> dict:
        data = dataclasses.asdict(self)
        if not include_threads:
            del data["threads"]
        return data


def load_config(file_path) -> dict:
    """
    Read a JSON configuration document.
    """
    path = pathlib.Path(file_path)
    if not path.exists():
        raise ValueError(f"Config file not found: {path}")
    try:
        with open(path, encoding="utf-8") as file:
            data = json.load(file)
    except json.JSONDecodeError as e:
        raise ValueError(f"{path}, line {e.lineno}: {e.msg}") from None
    if not isinstance(data, dict):
        raise ValueError(f"{path}: the configuration must be a JSON object.")
    return data


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="statekit", description="Black-box state inference toolkit.")
    commands = parser.add_subparsers(dest="command", metavar="command")
    commands.required = True

    common = _ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--seed", type=int, help="seed of every random choice")
    common.add_argument("--threads", type=int, help=f"worker count (default ${THREADS_VARIABLE} or 1)")
    common.add_argument("--force", action="store_true", help="rerun even if outputs are up to date")
    common.add_argument("--quiet", action="store_true", help="only log warnings")

    p = commands.add_parser("generate", parents=[common], help="generate synthetic flights")
    p.add_argument("--flights", type=int)
    p.add_argument("--out")
    p.add_argument("--profile", choices=sorted(sim.PROFILES))

    p = commands.add_parser("train", parents=[common], help="train a sequence labeler")
    p.add_argument("--data")
    p.add_argument("--model")
    p.add_argument("--preset", choices=sorted(net.PRESETS))
    p.add_argument("--variant", choices=net.VARIANTS)
    p.add_argument("--epochs", type=int)

    p = commands.add_parser("predict", parents=[common], help="label flights with a trained model")
    p.add_argument("--data")
    p.add_argument("--model")
    p.add_argument("--out")
    p.add_argument("--split")

    p = commands.add_parser("detect", parents=[common], help="run change point detectors")
    p.add_argument("--data")
    p.add_argument("--out")
    p.add_argument("--grid", action="store_true", default=None)
    p.add_argument("--search")
    p.add_argument("--cost")
    p.add_argument("--penalty", type=float)
    p.add_argument("--jump", type=int)
    p.add_argument("--width", type=int)
    p.add_argument("--split")

    p = commands.add_parser("baseline", parents=[common], help="fit sliding-window ridge classifiers")
    p.add_argument("--data")
    p.add_argument("--out")
    p.add_argument("--w", type=_int_list)
    p.add_argument("--folds", type=int)
    p.add_argument("--split")

    for name, text in (("evaluate", "score prediction files"), ("report", "write a report bundle")):
        p = commands.add_parser(name, parents=[common], help=text)
        p.add_argument("--truth")
        p.add_argument("--pred", nargs="+")
        p.add_argument("--tau", type=_float_list)
        p.add_argument("--out")
        p.add_argument("--split")
        if name == "evaluate":
            p.add_argument("--strips")
    return parser


def run(argv=None) -> int:
    """
    Parse `argv`, run the subcommand, and return the exit code.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return 1
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        file_config = load_config(args.config) if args.config else {}
        config = RunConfig.resolve(args.command, file_config, _overrides(args))
        _COMMANDS[args.command](config, force=args.force)
    except (ValueError, TypeError, KeyError, UsageError) as e:
        print(f"statekit {args.command}: error: {_message(e)}", file=sys.stderr)
        return 1
    except Exception as e:
        print(f"statekit {args.command}: {e.__class__.__name__}: {e}", file=sys.stderr)
        return 2
    return 0


def main():
    sys.exit(run())


######################################################################
# COMMANDS
######################################################################


def generate(config: RunConfig, *, force: bool = False):
    out = _require_path(config, "output", "--out")
    settings = config.generate
    if _skip(out, config, []) and not force:
        return
    cfg = sim.SimConfig(
        noise_std=settings["noise_std"],
        sample_rate_hz=settings["sample_rate_hz"],
        seed=config.seed,
        min_length=settings["min_length"],
        max_length=settings["max_length"],
    )
    dataset = sim.generate_dataset(
        settings["flights"],
        cfg,
        config.seed,
        profile=settings["profile"],
        n_jobs=config.threads,
    )
    dataset = split_dataset(dataset, config.training["fractions"], seed=config.seed)
    io.save_dataset(dataset, out)
    _log_lengths(dataset)
    tools.write_run_manifest(out, config.command, config.serialize(), [])


def train(config: RunConfig, *, force: bool = False):
    data = _require_input(config, "data", "--data")
    model = _require_path(config, "model", "--model")
    if _skip(model, config, [data]) and not force:
        return
    dataset = io.load_dataset(data)
    if dataset.splits is None or dataset.normalizer is None:
        dataset = split_dataset(dataset, config.training["fractions"], seed=config.seed)
    settings = config.architecture
    overrides = {
        key: settings[key]
        for key in ("conv_layers", "gru_layers", "dense_hidden", "max_length")
        if settings[key] is not None
    }
    if settings["conv_layers"] is not None:
        overrides["conv_layers"] = [tuple(layer) for layer in settings["conv_layers"]]
    if "max_length" not in overrides:
        overrides["max_length"] = max(net.PRESETS[settings["preset"]]["max_length"], dataset.max_length)
    arch = net.ArchitectureConfig.preset(
        settings["preset"],
        variant=settings["variant"],
        alpha=settings["alpha"],
        num_states=dataset.num_states,
        input_channels=dataset.n_channels,
        **overrides,
    )
    training = {k: v for k, v in config.training.items() if k != "fractions"}
    tc = net.TrainingConfig(seed=config.seed, **training)
    logger.info("Training %r on %d flights", arch, len(dataset.split("train")))
    checkpoint, history = net.train(dataset, arch, tc)
    model.parent.mkdir(parents=True, exist_ok=True)
    net.save_checkpoint(checkpoint, model)
    _history_table(history).to_csv(model.with_name(model.name + ".history.csv"), index=False)
    tools.write_run_manifest(model, config.command, config.serialize(), [data])


def predict(config: RunConfig, *, force: bool = False):
    data = _require_input(config, "data", "--data")
    model = _require_input(config, "model", "--model")
    out = _require_path(config, "output", "--out")
    if _skip(out, config, [data, model]) and not force:
        return
    checkpoint = net.load_checkpoint(model)
    dataset = io.load_dataset(data, labeled=False)
    flights = dataset.select(config.evaluation["split"] if dataset.splits else "all")
    source = {"kind": "model", "variant": checkpoint.config.variant, "model": model.name}
    records = Parallel(n_jobs=config.threads)(
        delayed(_predict_flight)(checkpoint, flight_id, series, source)
        for flight_id, series, _ in flights
    )
    out.parent.mkdir(parents=True, exist_ok=True)
    io.write_jsonl(records, out)
    logger.info("Labeled %d flights with %s", len(records), model)
    tools.write_run_manifest(out, config.command, config.serialize(), [data, model])


def detect(config: RunConfig, *, force: bool = False):
    data = _require_input(config, "data", "--data")
    out = _require_path(config, "output", "--out")
    settings = config.cpd
    if _skip(out, config, [data]) and not force:
        return
    dataset = io.load_dataset(data, labeled=False)
    flights = dataset.select(settings["split"] if dataset.splits else "all")
    if dataset.normalizer is not None:
        flights = [(i, dataset.normalizer.apply(s), a) for i, s, a in flights]
    if settings["grid"]:
        configurations = cpd.configuration_grid(
            settings["costs"], settings["searches"], settings["penalties"]
        )
        out.mkdir(parents=True, exist_ok=True)
        targets = [out / f"{cpd.configuration_name(*c)}.jsonl" for c in configurations]
    else:
        configurations = [(settings["cost"], settings["search"], settings["penalty"])]
        out.parent.mkdir(parents=True, exist_ok=True)
        targets = [out]
    jobs = [(c, flight) for c in configurations for flight in flights]
    logger.info("Running %d detector configurations over %d flights", len(configurations), len(flights))
    records = Parallel(n_jobs=config.threads)(
        delayed(_detect_flight)(kind, search, penalty, flight, settings["jump"], settings["width"])
        for (kind, search, penalty), flight in jobs
    )
    per_configuration = len(flights)
    for i, target in enumerate(targets):
        io.write_jsonl(records[i * per_configuration : (i + 1) * per_configuration], target)
    tools.write_run_manifest(out, config.command, config.serialize(), [data])


def run_baseline(config: RunConfig, *, force: bool = False):
    data = _require_input(config, "data", "--data")
    out = _require_path(config, "output", "--out")
    settings = config.baseline
    if _skip(out, config, [data]) and not force:
        return
    dataset = io.load_dataset(data)
    if dataset.splits is None or dataset.normalizer is None:
        dataset = split_dataset(dataset, config.training["fractions"], seed=config.seed)
    normalizer = dataset.normalizer
    train_flights = [(normalizer.apply(s), a) for _, s, a in dataset.split("train")]
    test_flights = [(i, normalizer.apply(s)) for i, s, _ in dataset.select(settings["split"])]
    alphas = baseline.ALPHA_GRID if settings["alphas"] is None else settings["alphas"]
    out.mkdir(parents=True, exist_ok=True)
    for w in settings["windows"]:
        features = baseline.WindowedFeatures.concatenate(
            [
                baseline.window_features(series, expand_labels(annotation, len(series)), w)
                for series, annotation in train_flights
                if len(series) >= w
            ]
        ).subsample(settings["max_rows"], seed=config.seed)
        model = baseline.ridge_fit(
            features, alphas, settings["folds"], num_states=dataset.num_states, seed=config.seed
        )
        logger.info("w=%d: alpha=%g over %d rows", w, model.chosen_alpha, len(features))
        io.save(model.serialize(), out / f"ridge-w{w}.model.json")
        source = {"kind": "ridge", "w": w, "alpha": model.chosen_alpha}
        records = Parallel(n_jobs=config.threads)(
            delayed(_baseline_flight)(model, w, flight_id, series, source)
            for flight_id, series in test_flights
        )
        io.write_jsonl(records, out / f"ridge-w{w}.jsonl")
    tools.write_run_manifest(out, config.command, config.serialize(), [data])


def evaluate(config: RunConfig, *, force: bool = False):
    truth, predictions = _require_report_inputs(config)
    settings = config.evaluation
    out = config.paths["output"]
    if out is not None:
        out = pathlib.Path(out)
        if _skip(out, config, [truth] + predictions) and not force:
            return
    dataset = io.load_dataset(truth)
    expected = None
    if dataset.splits is not None:
        expected = [flight_id for flight_id, _, _ in dataset.select(settings["split"])]
    evaluations = {}
    for path in predictions:
        records = io.load_predictions(path)
        evaluation = measure.evaluate_predictions(
            {i: (s, a) for i, s, a in dataset},
            records,
            settings["taus"],
            sample_rate_hz=dataset.sample_rate_hz,
            num_states=dataset.num_states,
            matching=settings["matching"],
            absent=settings["absent"],
            expected=expected,
        )
        evaluations[str(path)] = evaluation
        for tau, entry in evaluation["aggregate"]["cpd"].items():
            print(
                f"{path.name} tau={tau}s precision={entry['precision']:.4f} recall={entry['recall']:.4f} f1={entry['f1']:.4f}"
            )
        if evaluation["aggregate"]["classification"] is not None:
            scores = evaluation["aggregate"]["classification"]
            print(
                f"{path.name} macro precision={scores['precision']:.4f} recall={scores['recall']:.4f} f1={scores['f1']:.4f}"
            )
        if config.paths["strips"] is not None:
            strip_dir = pathlib.Path(config.paths["strips"]) / tools.report_name(path)
            tools.write_state_strips(dataset, records, strip_dir, max_samples=settings["max_samples"])
    if out is not None:
        out.parent.mkdir(parents=True, exist_ok=True)
        io.save(evaluations, out)
        tools.write_run_manifest(out, config.command, config.serialize(), [truth] + predictions)


def report(config: RunConfig, *, force: bool = False):
    truth, predictions = _require_report_inputs(config)
    out = _require_path(config, "output", "--out")
    if _skip(out, config, [truth] + predictions) and not force:
        return
    settings = config.evaluation
    dataset = io.load_dataset(truth)
    artifacts = tools.create_report(
        dataset,
        predictions,
        out,
        taus=settings["taus"],
        max_samples=settings["max_samples"],
        matching=settings["matching"],
        absent=settings["absent"],
        split=settings["split"],
    )
    logger.info("Wrote %d report artifacts to %s", len(artifacts), out)
    tools.write_run_manifest(out, config.command, config.serialize(), [truth] + predictions)


_COMMANDS = {
    "generate": generate,
    "train": train,
    "predict": predict,
    "detect": detect,
    "baseline": run_baseline,
    "evaluate": evaluate,
    "report": report,
}


######################################################################
# WORKERS
######################################################################


def _predict_flight(checkpoint, flight_id, series, source):
    _, labels = net.predict(checkpoint, series)
    return io.prediction_record(
        flight_id,
        len(series),
        derive_change_points(labels),
        initial_state=labels.states[0],
        source=source,
    )


def _detect_flight(kind, search, penalty, flight, jump, width):
    flight_id, series, _ = flight
    result = cpd.detect(series, search, cpd.SegmentCostModel(kind), penalty, jump=jump, width=width)
    source = {"kind": "cpd", "cost": kind, "search": cpd._resolve_search(search), "penalty": penalty}
    return io.breakpoint_record(flight_id, len(series), result.breakpoints, source=source)


def _baseline_flight(model, w, flight_id, series, source):
    if len(series) < w:
        raise ValueError(f"Flight {flight_id} is shorter than the window width {w}.")
    labels, valid_from = baseline.predict_series(model, series, w)
    change_points = [(t + valid_from, s) for t, s in derive_change_points(labels)]
    return io.prediction_record(
        flight_id,
        len(series),
        change_points,
        valid_from=valid_from,
        initial_state=labels.states[0],
        source=source,
    )


######################################################################
# HELPERS
######################################################################


def _overrides(args) -> dict:
    overrides = {"paths": {}, "architecture": {}, "training": {}, "cpd": {}, "baseline": {}, "evaluation": {}, "generate": {}}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.threads is not None:
        overrides["threads"] = args.threads
    flags = {
        "flights": ("generate", "flights"),
        "profile": ("generate", "profile"),
        "data": ("paths", "data"),
        "model": ("paths", "model"),
        "out": ("paths", "output"),
        "truth": ("paths", "truth"),
        "pred": ("paths", "predictions"),
        "strips": ("paths", "strips"),
        "preset": ("architecture", "preset"),
        "variant": ("architecture", "variant"),
        "epochs": ("training", "max_epochs"),
        "grid": ("cpd", "grid"),
        "search": ("cpd", "search"),
        "cost": ("cpd", "cost"),
        "penalty": ("cpd", "penalty"),
        "jump": ("cpd", "jump"),
        "width": ("cpd", "width"),
        "w": ("baseline", "windows"),
        "folds": ("baseline", "folds"),
        "tau": ("evaluation", "taus"),
    }
    for flag, (section, key) in flags.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[section][key] = value
    split = getattr(args, "split", None)
    if split is not None:
        section = {"detect": "cpd", "baseline": "baseline"}.get(args.command, "evaluation")
        overrides[section]["split"] = split
    if overrides["cpd"].get("penalty") is not None:
        penalty = overrides["cpd"]["penalty"]
        overrides["cpd"]["penalty"] = int(penalty) if float(penalty).is_integer() else penalty
    return overrides


def _merge(settings, updates, origin, prefix=""):
    if not isinstance(updates, dict):
        raise ValueError(f"{origin}: section {prefix or 'root'} must be an object.")
    for key, value in updates.items():
        name = f"{prefix}{key}"
        if key not in settings:
            raise KeyError(f"{origin}: unknown key {name!r}")
        if isinstance(settings[key], dict) and key != "noise_std":
            _merge(settings[key], value, origin, f"{name}.")
        else:
            settings[key] = value


def _require_path(config, key, flag):
    value = config.paths[key]
    if value is None:
        raise ValueError(f"{config.command} needs {flag} (or paths.{key} in the config file).")
    return pathlib.Path(value)


def _require_input(config, key, flag):
    path = _require_path(config, key, flag)
    if not path.exists():
        raise ValueError(f"Input not found: {path}")
    return path


def _require_report_inputs(config):
    truth = _require_input(config, "truth", "--truth")
    predictions = [pathlib.Path(p) for p in config.paths["predictions"]]
    if not predictions:
        raise ValueError(f"{config.command} needs at least one --pred file.")
    for path in predictions:
        if not path.exists():
            raise ValueError(f"Prediction file not found: {path}")
    return truth, predictions


def _skip(output, config, inputs) -> bool:
    if tools.is_up_to_date(output, config.command, config.serialize(), inputs):
        logger.info("%s is up to date; skipping (use --force to rerun)", output)
        return True
    return False


def _log_lengths(dataset):
    summary = tools.length_summary(dataset.lengths)
    logger.info(
        "%d flights, length min %s, median %s, max %s",
        summary["count"],
        summary["min"],
        summary["median"],
        summary["max"],
    )


def _history_table(history):
    try:
        import pandas as pd
    except ModuleNotFoundError as e:
        e.msg = "Writing the training history requires Pandas."
        raise

    return pd.DataFrame(history, columns=["epoch", "train_loss", "val_accuracy"])


def _int_list(text):
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text):
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    return [int(v) if v.is_integer() else v for v in values]


def _message(error):
    if isinstance(error, KeyError) and error.args:
        return str(error.args[0])
    return str(error)


if __name__ == "__main__":
    main()
