"""Command-line workflow runner.

Subcommands cover the full loop: synthetic/ingested dataset generation,
spline-network training with symbolic read-out, policy-gradient symbolic
regression, expression/checkpoint evaluation, analytical baselines, and
report collation.  Every command writes a run manifest next to its
outputs; --threads 1 (the default) is the bit-deterministic reference.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import hashlib
import json
import os
import sys
from dataclasses import replace

import numpy as np

from autopl import __version__, evalharness as eh, kan
from autopl.dsr import TrainerConfig, train as dsr_train
from autopl.errors import CheckpointError, DataError, DomainError, TrainingError
from autopl.expr.constraints import ConstraintSet, RepeatRule
from autopl.expr.tokens import Vocabulary
from autopl.expr.tree import evaluate, to_infix, tree_from_json, tree_to_json
from autopl.plmodels import (
    SyntheticSpec,
    generate_synthetic,
    load_empirical_csv,
    normalize_max,
    read_csv,
    split,
    write_csv,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; the contract reserves
    # 2 for data errors, so route usage problems through our own path
    def error(self, message):
        raise UsageError(message)


# tuned defaults per dataset family -----------------------------------------

KAN_PRESETS: dict[str, dict] = {
    "abg": {"shape": (6, 6, 1), "grid": 10, "steps": 100, "lamb": 0.002},
    "ci": {"shape": (4, 4, 1), "grid": 8, "steps": 300, "lamb": 0.002},
    "indoor": {"shape": (4, 1), "grid": 5, "steps": 100, "lamb": 0.0002},
    "outdoor": {"shape": (3, 1), "grid": 50, "steps": 100, "lamb": 0.02},
}

DSR_PRESETS: dict[tuple[str, str], dict] = {
    ("abg", "rspg"): {"samples": 50000, "batch": 200, "lr": 0.002, "entropy": 0.008},
    ("abg", "pqt"): {"samples": 20000, "batch": 200, "lr": 0.002, "entropy": 0.005},
    ("abg", "vpg"): {"samples": 30000, "batch": 200, "lr": 0.0001, "entropy": 0.005},
    ("ci", "rspg"): {"samples": 2000, "batch": 200, "lr": 0.001, "entropy": 0.008},
    ("ci", "pqt"): {"samples": 3000, "batch": 200, "lr": 0.002, "entropy": 0.005},
    ("ci", "vpg"): {"samples": 1000, "batch": 200, "lr": 0.0005, "entropy": 0.008},
    ("indoor", "rspg"): {"samples": 50000, "batch": 300, "lr": 0.0005, "entropy": 0.03},
    ("indoor", "pqt"): {"samples": 50000, "batch": 200, "lr": 0.001, "entropy": 0.01},
    ("indoor", "vpg"): {"samples": 50000, "batch": 200, "lr": 0.001, "entropy": 0.02},
    ("outdoor", "rspg"): {"samples": 50000, "batch": 200, "lr": 0.0005, "entropy": 0.01},
    ("outdoor", "pqt"): {"samples": 50000, "batch": 200, "lr": 0.0005, "entropy": 0.01},
    ("outdoor", "vpg"): {"samples": 50000, "batch": 200, "lr": 0.0001, "entropy": 0.01},
}

_DSR_DEFAULTS = {"policy": "rspg", "samples": 10000, "batch": 200,
                 "lr": 0.002, "entropy": 0.008, "epsilon": 0.05,
                 "queue_k": 10, "alpha": 0.25, "min_len": 4, "max_len": 40}

_DISTANCE_NAMES = frozenset({"d", "d_m", "d_km", "distance", "distance_m"})
_FREQUENCY_NAMES = frozenset({"f", "f_hz", "f_ghz", "f_mhz", "frequency",
                              "frequency_mhz"})


def infer_roles(feature_names) -> dict[str, str]:
    roles = {}
    for name in feature_names:
        if name.lower() in _DISTANCE_NAMES:
            roles[name] = "distance"
        elif name.lower() in _FREQUENCY_NAMES:
            roles[name] = "frequency"
    return roles


# plumbing -------------------------------------------------------------------


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _utc_now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _fan_out(seed: int, n: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n)]


def _load_config_file(path) -> dict:
    if path is None:
        return {}
    if not os.path.exists(path):
        raise DataError(f"config file not found: {path}")
    with open(path) as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError("config file must hold a flat JSON object")
    return cfg


def _resolve(args, file_cfg: dict, defaults: dict) -> dict:
    """Flag > config file > default, per key."""
    out = {}
    for key, default in defaults.items():
        flag = getattr(args, key, None)
        if flag is not None:
            out[key] = flag
        elif key in file_cfg:
            out[key] = file_cfg[key]
        else:
            out[key] = default
    return out


def _resolve_threads(args, file_cfg: dict) -> int:
    if getattr(args, "threads", None) is not None:
        return int(args.threads)
    if "threads" in file_cfg:
        return int(file_cfg["threads"])
    env = os.environ.get("AUTOPL_THREADS")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"AUTOPL_THREADS is not an integer: {env!r}")
    return 1


def _write_manifest(out_dir, command: str, config: dict, seed,
                    inputs: list, outputs: list, started: str) -> None:
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "tool_version": __version__,
        "started_utc": started,
        "finished_utc": _utc_now(),
        "outputs": sorted(os.path.basename(str(p)) for p in outputs),
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _prepare_out(path) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def _write_history_csv(path, rows, columns) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def _original_units(ds):
    """Per-feature ranges and medians with any normalization folded back."""
    div = ds.norm or {}
    ranges = {}
    medians = {}
    for i, name in enumerate(ds.feature_names):
        col = ds.X[:, i] * float(div.get(name, 1.0))
        ranges[name] = (float(col.min()), float(col.max()))
        medians[name] = float(np.median(col))
    return ranges, medians


def _validity_flag(tree, ds) -> str:
    roles = infer_roles(ds.feature_names)
    if not roles:
        return ""
    ranges, medians = _original_units(ds)
    report = eh.check_validity(tree, roles, ranges, medians=medians)
    return report.verdict


# gen-data -------------------------------------------------------------------


def cmd_gen_data(args) -> int:
    started = _utc_now()
    file_cfg = _load_config_file(args.config)
    cfg = _resolve(args, file_cfg, {"model": None, "input": None,
                                    "target": "pl_db", "count": 1000,
                                    "seed": 0, "normalize": False})
    if (cfg["model"] is None) == (cfg["input"] is None):
        raise UsageError("gen-data needs exactly one of --model or --input")
    out_dir = _prepare_out(args.out)
    inputs = []
    if cfg["model"] is not None:
        ds = generate_synthetic(SyntheticSpec(model_kind=cfg["model"],
                                              count=int(cfg["count"]),
                                              seed=int(cfg["seed"])))
    else:
        inputs.append(cfg["input"])
        with open(cfg["input"], newline="") as fh:
            header = next(csv.reader(fh), None)
        if not header:
            raise DataError("input CSV has no header")
        if cfg["target"] not in header:
            raise DataError(f"target column {cfg['target']!r} not in input")
        roles = {c: ("target" if c == cfg["target"] else "feature")
                 for c in header}
        ds, report = load_empirical_csv(cfg["input"], roles)
        print(f"ingested {report.kept_rows}/{report.total_rows} rows")
    if cfg["normalize"]:
        ds = normalize_max(ds)
    out_csv = os.path.join(out_dir, "dataset.csv")
    write_csv(ds, out_csv)
    outputs = [out_csv]
    if ds.norm is not None:
        outputs.append(out_csv + ".norm.json")
    _write_manifest(out_dir, "gen-data", cfg, cfg["seed"], inputs, outputs,
                    started)
    print(f"wrote {out_csv} ({ds.n_rows} rows, {len(ds.feature_names)} features)")
    return 0


# train-kan ------------------------------------------------------------------


def _parse_shape(text) -> tuple[int, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(int(v) for v in text)
    try:
        shape = tuple(int(p) for p in str(text).split(",") if p.strip())
    except ValueError:
        raise UsageError(f"bad shape {text!r}; expected e.g. 4,4,1") from None
    if len(shape) < 2:
        raise UsageError("shape needs at least input and output widths")
    return shape


def _write_graph_csv(path, net, importance, sym=None) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["layer", "in_node", "out_node", "active",
                         "importance", "family", "r2"])
        for l, layer in enumerate(net.layers):
            d_in, d_out = layer.prune_mask.shape
            for i in range(d_in):
                for j in range(d_out):
                    family = ""
                    fit_r2 = ""
                    if sym is not None:
                        fit = sym.fits[l][i][j]
                        family = fit.name
                        fit_r2 = f"{fit.r2:.6f}"
                    writer.writerow([
                        l, i, j, int(bool(layer.prune_mask[i, j])),
                        f"{importance[l][i, j]:.6f}", family, fit_r2])


def cmd_train_kan(args) -> int:
    started = _utc_now()
    file_cfg = _load_config_file(args.config)
    preset = KAN_PRESETS.get(args.model, {}) if args.model else {}
    defaults = {"shape": preset.get("shape"), "grid": preset.get("grid", 5),
                "steps": preset.get("steps", 100), "order": 3,
                "lamb": preset.get("lamb", 0.0), "seed": 0, "split": 0.8,
                "prune": None, "no_symbolic": False}
    cfg = _resolve(args, file_cfg, defaults)
    threads = _resolve_threads(args, file_cfg)
    if cfg["shape"] is None:
        raise UsageError("train-kan needs --model or --shape")
    shape = _parse_shape(cfg["shape"])

    ds = read_csv(args.data)
    if shape[0] != len(ds.feature_names):
        raise DataError(f"shape expects {shape[0]} features, dataset has "
                        f"{len(ds.feature_names)}")
    if ds.norm is None:
        # spline edges live on a fixed input interval
        ds = normalize_max(ds)
    seeds = _fan_out(int(cfg["seed"]), 2)
    train_ds, test_ds = split(ds, float(cfg["split"]), seeds[0])

    net = kan.build_network(kan.KanConfig(
        shape=shape, grid_size=int(cfg["grid"]), order=int(cfg["order"]),
        steps=int(cfg["steps"]), reg_lambda=float(cfg["lamb"]),
        seed=seeds[1]))
    result = kan.train(net, train_ds.X, train_ds.y)

    out_dir = _prepare_out(args.out)
    ckpt = os.path.join(out_dir, "kan.npz")
    kan.save_kan(net, ckpt)
    # record the input scaling the net was trained under, so eval can
    # feed it raw-unit datasets later
    if ds.norm is not None:
        with open(ckpt + ".norm.json", "w") as fh:
            json.dump(ds.norm, fh, sort_keys=True)
            fh.write("\n")

    if cfg["prune"] is not None:
        net = kan.prune(net, train_ds.X, float(cfg["prune"]))

    pred_spline = net.predict(test_ds.X)
    rows = [eh.single_row("kan-spline", {
        m: fn(pred_spline, test_ds.y) for m, fn in eh.METRICS.items()})]
    scatter = [(test_ds.y, pred_spline)]
    expressions = []
    importance = kan.edge_importance(net, train_ds.X)
    sym = None

    if not cfg["no_symbolic"]:
        sym = kan.auto_symbolic(net, train_ds.X)
        sym, _ = kan.retrain_affine(sym, train_ds.X, train_ds.y)
        tree = kan.extract_expression(sym, ds.feature_names, ds.norm)
        pred_sym = sym.predict(test_ds.X)
        infix = to_infix(tree)
        rows.append(eh.single_row(
            "kan-symbolic",
            {m: fn(pred_sym, test_ds.y) for m, fn in eh.METRICS.items()},
            expression=infix, valid=_validity_flag(tree, ds)))
        scatter.append((test_ds.y, pred_sym))
        expressions.append(infix)
        with open(os.path.join(out_dir, "expression.json"), "w") as fh:
            fh.write(tree_to_json(tree))

    metrics_csv = os.path.join(out_dir, "metrics.csv")
    eh.write_table_csv(metrics_csv, rows)
    history_csv = os.path.join(out_dir, "history.csv")
    _write_history_csv(history_csv, result.history,
                       ["step", "mse", "reg", "loss"])
    graph_csv = os.path.join(out_dir, "graph.csv")
    _write_graph_csv(graph_csv, net, importance, sym)
    scatter_csv = os.path.join(out_dir, "scatter.csv")
    eh.write_scatter_csv(scatter_csv, scatter)
    expr_txt = os.path.join(out_dir, "expressions.txt")
    with open(expr_txt, "w") as fh:
        fh.write("\n".join(expressions) + ("\n" if expressions else ""))

    outputs = [ckpt, metrics_csv, history_csv, graph_csv, scatter_csv,
               expr_txt]
    if ds.norm is not None:
        outputs.append(ckpt + ".norm.json")
    if sym is not None:
        outputs.append(os.path.join(out_dir, "expression.json"))
    snapshot = dict(cfg, shape=list(shape), threads=threads)
    _write_manifest(out_dir, "train-kan", snapshot, cfg["seed"],
                    [args.data], outputs, started)
    print(eh.format_table(rows), end="")
    return 0


# train-dsr ------------------------------------------------------------------


def cmd_train_dsr(args) -> int:
    started = _utc_now()
    file_cfg = _load_config_file(args.config)
    policy = args.policy or file_cfg.get("policy") or _DSR_DEFAULTS["policy"]
    preset = DSR_PRESETS.get((args.model, policy), {}) if args.model else {}
    defaults = dict(_DSR_DEFAULTS, **preset)
    defaults.update({"policy": policy, "seed": 0, "split": 0.8})
    cfg = _resolve(args, file_cfg, defaults)
    threads = _resolve_threads(args, file_cfg)

    ds = read_csv(args.data)
    seeds = _fan_out(int(cfg["seed"]), 2)
    train_ds, test_ds = split(ds, float(cfg["split"]), seeds[0])

    vocab = Vocabulary.default(ds.feature_names)
    roles = infer_roles(ds.feature_names)
    rules = {name: RepeatRule(min_count=1) for name in roles}
    cs = ConstraintSet(min_length=int(cfg["min_len"]),
                       max_length=int(cfg["max_len"]), repeat_rules=rules)
    tc = TrainerConfig(policy_kind=cfg["policy"],
                       batch_size=int(cfg["batch"]),
                       learning_rate=float(cfg["lr"]),
                       entropy_weight=float(cfg["entropy"]),
                       epsilon=float(cfg["epsilon"]),
                       ewma_alpha=float(cfg["alpha"]),
                       queue_k=int(cfg["queue_k"]),
                       sample_budget=int(cfg["samples"]),
                       seed=seeds[1])
    result = dsr_train(tc, train_ds, cs, vocab=vocab, threads=threads)

    out_dir = _prepare_out(args.out)
    history_rows = [dict(r, best_expression_infix=r.get("best_expression", ""))
                    for r in result.history]
    history_csv = os.path.join(out_dir, "history.csv")
    _write_history_csv(history_csv, history_rows,
                       ["step", "best_reward", "mean_reward",
                        "best_expression_infix"])

    tree = result.best_tree
    infix = to_infix(tree)
    pred = evaluate(tree, test_ds.X)
    rows = [eh.single_row(
        f"dsr-{cfg['policy']}",
        {m: fn(pred, test_ds.y) for m, fn in eh.METRICS.items()},
        expression=infix, valid=_validity_flag(tree, ds))]
    metrics_csv = os.path.join(out_dir, "metrics.csv")
    eh.write_table_csv(metrics_csv, rows)
    scatter_csv = os.path.join(out_dir, "scatter.csv")
    eh.write_scatter_csv(scatter_csv, [(test_ds.y, pred)])
    expr_txt = os.path.join(out_dir, "expressions.txt")
    with open(expr_txt, "w") as fh:
        fh.write(infix + "\n")
    expr_json = os.path.join(out_dir, "expression.json")
    with open(expr_json, "w") as fh:
        fh.write(tree_to_json(tree))

    snapshot = dict(cfg, threads=threads)
    _write_manifest(out_dir, "train-dsr", snapshot, cfg["seed"],
                    [args.data],
                    [history_csv, metrics_csv, scatter_csv, expr_txt,
                     expr_json], started)
    print(f"best reward {result.best_reward:.4f} after "
          f"{result.samples_used} samples")
    print(eh.format_table(rows), end="")
    return 0


# eval -----------------------------------------------------------------------


def cmd_eval(args) -> int:
    started = _utc_now()
    file_cfg = _load_config_file(args.config)
    cfg = _resolve(args, file_cfg, {"runs": 1, "split": 0.8, "seed": 0,
                                    "with_baselines": None})
    if (args.expr_json is None) == (args.checkpoint is None):
        raise UsageError("eval needs exactly one of --expr-json or --checkpoint")

    ds = read_csv(args.data)
    baseline_ds = ds
    inputs = [args.data]
    tree = None
    if args.expr_json is not None:
        inputs.append(args.expr_json)
        if not os.path.exists(args.expr_json):
            raise DataError(f"expression file not found: {args.expr_json}")
        with open(args.expr_json) as fh:
            tree = tree_from_json(fh.read())
        label = "expression"

        def predictor(X):
            return evaluate(tree, X)
    else:
        inputs.append(args.checkpoint)
        net = kan.load_kan(args.checkpoint)
        label = "checkpoint"
        sidecar = str(args.checkpoint) + ".norm.json"
        if os.path.exists(sidecar):
            # rescale into the units the net was trained under
            with open(sidecar) as fh:
                saved = {k: float(v) for k, v in json.load(fh).items()}
            cur = ds.norm or {}
            if cur != saved:
                back = np.array([cur.get(n, 1.0) for n in ds.feature_names])
                div = np.array([saved.get(n, 1.0) for n in ds.feature_names])
                ds = replace(ds, X=ds.X * back / div, norm=dict(saved))
            inputs.append(sidecar)
        predictor = net.predict

    runs = int(cfg["runs"])
    expression = to_infix(tree) if tree is not None else ""
    valid = _validity_flag(tree, ds) if tree is not None else ""
    if runs > 1:
        report = eh.monte_carlo_eval(lambda _train: predictor, ds, runs=runs,
                                     train_fraction=float(cfg["split"]),
                                     base_seed=int(cfg["seed"]),
                                     keep_predictions=True)
        rows = [eh.metrics_row(label, report, expression=expression,
                               valid=valid)]
        scatter = list(report.predictions)
    else:
        pred = predictor(ds.X)
        rows = [eh.single_row(
            label, {m: fn(pred, ds.y) for m, fn in eh.METRICS.items()},
            expression=expression, valid=valid)]
        scatter = [(ds.y, pred)]
    if valid:
        print(f"{label}: {valid}")

    if cfg["with_baselines"]:
        for base in eh.baseline_table(baseline_ds, cfg["with_baselines"]):
            rows.append(eh.single_row(base["method"], base))

    out_dir = _prepare_out(args.out)
    metrics_csv = os.path.join(out_dir, "metrics.csv")
    eh.write_table_csv(metrics_csv, rows)
    scatter_csv = os.path.join(out_dir, "scatter.csv")
    eh.write_scatter_csv(scatter_csv, scatter)
    _write_manifest(out_dir, "eval", dict(cfg), cfg["seed"], inputs,
                    [metrics_csv, scatter_csv], started)
    print(eh.format_table(rows), end="")
    return 0


# baseline and report ---------------------------------------------------------


def cmd_baseline(args) -> int:
    started = _utc_now()
    ds = read_csv(args.data)
    rows = [eh.single_row(r["method"], r)
            for r in eh.baseline_table(ds, args.which)]
    out_dir = _prepare_out(args.out)
    metrics_csv = os.path.join(out_dir, "metrics.csv")
    eh.write_table_csv(metrics_csv, rows)
    _write_manifest(out_dir, "baseline", {"which": args.which}, None,
                    [args.data], [metrics_csv], started)
    print(eh.format_table(rows), end="")
    return 0


def cmd_report(args) -> int:
    started = _utc_now()
    rows = []
    inputs = []
    for run_dir in args.runs:
        path = os.path.join(run_dir, "metrics.csv")
        if not os.path.exists(path):
            raise DataError(f"no metrics.csv under {run_dir}")
        inputs.append(path)
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                for key in row:
                    if key.endswith("_mean") or key.endswith("_std"):
                        row[key] = float(row[key])
                rows.append(row)
    out_dir = _prepare_out(args.out)
    metrics_csv = os.path.join(out_dir, "metrics.csv")
    eh.write_table_csv(metrics_csv, rows)
    _write_manifest(out_dir, "report", {"runs": list(args.runs)}, None,
                    inputs, [metrics_csv], started)
    print(eh.format_table(rows), end="")
    return 0


# parser ----------------------------------------------------------------------


def _add_common(sub, seed_default=None):
    sub.add_argument("--out", required=True, help="output directory")
    sub.add_argument("--config", help="JSON config file (flat keys)")
    sub.add_argument("--seed", type=int, default=seed_default)
    sub.add_argument("--threads", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="autopl",
                     description="pathloss model discovery toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("gen-data", help="generate or ingest a dataset")
    p.add_argument("--model", choices=("abg", "ci"))
    p.add_argument("--input", help="empirical CSV to ingest")
    p.add_argument("--target", help="target column for --input")
    p.add_argument("--count", type=int)
    p.add_argument("--normalize", action="store_true", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_gen_data)

    p = subs.add_parser("train-kan", help="train a spline-edge network")
    p.add_argument("--data", required=True)
    p.add_argument("--model", choices=tuple(KAN_PRESETS))
    p.add_argument("--shape", help="layer widths, e.g. 4,4,1")
    p.add_argument("--grid", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--order", type=int)
    p.add_argument("--lamb", type=float)
    p.add_argument("--split", type=float)
    p.add_argument("--prune", type=float,
                   help="edge-importance pruning threshold")
    p.add_argument("--no-symbolic", action="store_true", default=None,
                   dest="no_symbolic")
    _add_common(p)
    p.set_defaults(func=cmd_train_kan)

    p = subs.add_parser("train-dsr", help="policy-gradient expression search")
    p.add_argument("--data", required=True)
    p.add_argument("--model", choices=("abg", "ci", "indoor", "outdoor"))
    p.add_argument("--policy", choices=("rspg", "vpg", "pqt"))
    p.add_argument("--samples", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--entropy", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--queue-k", type=int, dest="queue_k")
    p.add_argument("--alpha", type=float)
    p.add_argument("--min-len", type=int, dest="min_len")
    p.add_argument("--max-len", type=int, dest="max_len")
    p.add_argument("--split", type=float)
    _add_common(p)
    p.set_defaults(func=cmd_train_dsr)

    p = subs.add_parser("eval", help="evaluate an expression or checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--expr-json", dest="expr_json")
    p.add_argument("--checkpoint")
    p.add_argument("--runs", type=int)
    p.add_argument("--split", type=float)
    p.add_argument("--with-baselines", dest="with_baselines",
                   choices=("indoor", "outdoor"))
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = subs.add_parser("baseline", help="analytical baseline table")
    p.add_argument("--data", required=True)
    p.add_argument("--which", required=True, choices=("indoor", "outdoor"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_baseline)

    p = subs.add_parser("report", help="collate metrics from run directories")
    p.add_argument("--runs", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DomainError, DataError, CheckpointError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TrainingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
