"""Experiment runner CLI.

One experiment = one JSON config = one output directory. ``fedmc run``
executes the training runs (one per heterogeneity level, co-initialized) and
every requested analysis; the other subcommands are post-hoc tools operating
on saved checkpoints. All outputs are CSV/JSON files with the schemas pinned
in ``csvio``; a manifest.json records the config hash, seed, and package
version so a run can be reproduced bit-for-bit.
"""

from __future__ import annotations

import argparse
import csv as _csv
import itertools
import json
import os
import sys
from pathlib import Path as FilePath

import numpy as np

from . import __version__, _kernels
from .checkpoint import load_checkpoint, save_checkpoint
from .config import ExperimentConfig
from .csvio import (write_barriers, write_compare, write_dropout,
                    write_landscape, write_noise_records, write_noise_stats,
                    write_path_profile, write_round_logs,
                    write_segment_profile)
from .data import IID, Dataset, dirichlet_partition, load_idx, subset, synth_gaussian
from .errors import ConfigError, FormatError
from .fedavg import NoiseStats, noise_stats, run_fedavg
from .landscape import PlaneSpec, hyperplane_grid
from .model import init_params
from .paths import (CurveFindConfig, Path, barrier, connectivity_error,
                    curve_find, dropout_error, function_dissimilarity,
                    random_keep, segment_profile, seven_segment_path,
                    traverse, weight_distance)

INIT_STREAM = 0x1717


def _load_data(cfg: ExperimentConfig):
    """Returns (train, test_or_None, class_labels, num_classes).

    class_labels are the integer class ids used for partitioning even when
    the experiment trains on scalar targets.
    """
    spec = cfg.raw["data"]
    if spec["kind"] == "synthetic":
        per_class = spec["per_class"]
        test_per_class = spec.get("test_per_class", 0)
        full = synth_gaussian(spec["num_classes"], per_class + test_per_class,
                              spec["dims"], spec.get("spread", 0.3), cfg.seed)
        block = per_class + test_per_class
        train_idx = np.concatenate([np.arange(c * block, c * block + per_class)
                                    for c in range(spec["num_classes"])])
        train = subset(full, train_idx)
        test = None
        if test_per_class:
            test_idx = np.concatenate(
                [np.arange(c * block + per_class, (c + 1) * block)
                 for c in range(spec["num_classes"])])
            test = subset(full, test_idx)
        num_classes = spec["num_classes"]
    else:
        train = load_idx(spec["train_images"], spec["train_labels"])
        test = None
        if "test_images" in spec:
            if "test_labels" not in spec:
                raise ConfigError("test_images given without test_labels")
            test = load_idx(spec["test_images"], spec["test_labels"])
        num_classes = spec.get("num_classes",
                               int(np.max(train.labels)) + 1)
    class_labels = np.asarray(train.labels, dtype=np.int64)
    if cfg.scalar_targets:
        if cfg.raw["architecture"]["output_dim"] != 1:
            raise ConfigError("scalar_targets requires output_dim 1")
        denom = max(num_classes - 1, 1)
        train = Dataset(train.features, class_labels / denom, train.name)
        if test is not None:
            test = Dataset(test.features,
                           np.asarray(test.labels, np.int64) / denom, test.name)
    return train, test, class_labels, num_classes


def _alpha_dir(out_dir: FilePath, cfg: ExperimentConfig, alpha) -> FilePath:
    d = out_dir / cfg.alpha_label(alpha)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _save_round_checkpoints(run_dir: FilePath, result, cfg, alpha, seed):
    ckpt_dir = run_dir / "checkpoints"
    ckpt_dir.mkdir(exist_ok=True)
    meta_alpha = None if alpha == IID else alpha
    for round_index, params in result.checkpoints:
        save_checkpoint(params, {"seed": seed, "round": round_index,
                                 "alpha": meta_alpha},
                        ckpt_dir / f"round_{round_index:04d}.ckpt")
    save_checkpoint(result.final, {"seed": seed, "round": cfg.rounds,
                                   "alpha": meta_alpha},
                    run_dir / "final.ckpt")


def _eval_set(train, test, which: str):
    if which == "test" and test is not None:
        return test, "test"
    return train, "train"


def cmd_run(args) -> int:
    cfg = _config_from_args(args)
    out_dir = FilePath(args.out or cfg.raw.get("out_dir") or "fedmc-out")
    out_dir.mkdir(parents=True, exist_ok=True)
    train, test, class_labels, num_classes = _load_data(cfg)
    arch = cfg.architecture(train.num_features)
    init = init_params(arch, np.random.SeedSequence((cfg.seed, INIT_STREAM)))
    save_checkpoint(init, {"seed": cfg.seed, "round": 0, "alpha": None},
                    out_dir / "init.ckpt")
    fed = cfg.fed_config()
    analyses = cfg.analyses()
    need_clients = "landscape" in analyses

    finals: dict = {}
    results: dict = {}
    for alpha in cfg.alphas:
        part = dirichlet_partition(class_labels, num_classes, fed.num_clients,
                                   alpha, cfg.seed)
        result = run_fedavg(init, train, part, fed, test_data=test,
                            threads=args.threads,
                            keep_client_finals=need_clients)
        run_dir = _alpha_dir(out_dir, cfg, alpha)
        write_round_logs(run_dir / "round_log.csv", result.round_logs)
        if result.noise_records:
            write_noise_records(run_dir / "noise.csv", result.noise_records)
        _save_round_checkpoints(run_dir, result, fed, alpha, cfg.seed)
        finals[alpha] = result.final
        results[alpha] = result
        print(f"[{cfg.alpha_label(alpha)}] final train/test loss: "
              f"{result.round_logs[-1].train_loss:.4f} / "
              f"{result.round_logs[-1].test_loss:.4f}  "
              f"acc: {result.round_logs[-1].train_acc:.4f} / "
              f"{result.round_logs[-1].test_acc:.4f}")

    _run_analyses(cfg, out_dir, analyses, train, test, init, finals, results)
    manifest = {
        "version": __version__,
        "command": "run",
        "config_sha256": cfg.digest(),
        "seed": cfg.seed,
        "backend": _kernels.BACKEND,
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


def _pairs(alphas):
    return list(itertools.combinations(alphas, 2))


def _run_analyses(cfg, out_dir, analyses, train, test, init, finals, results):
    kind = cfg.loss_kind
    if "landscape" in analyses:
        spec = analyses["landscape"]
        alpha = cfg.alphas[0]
        k1, k2 = spec.get("clients", [0, 1])
        clients = results[alpha].final_clients
        if clients is None or max(k1, k2) >= len(clients):
            raise ConfigError("landscape clients out of range")
        plane = PlaneSpec(finals[alpha], clients[k1], clients[k2],
                          tuple(spec.get("a_range", (-0.5, 1.5))),
                          tuple(spec.get("b_range", (-0.5, 1.5))),
                          spec.get("resolution", 25))
        eval_data, tag = _eval_set(train, test, "test")
        grids = hyperplane_grid(plane, {tag: eval_data}, kind)
        write_landscape(out_dir / "landscape.csv", grids)
    if "barrier" in analyses and len(cfg.alphas) >= 2:
        spec = analyses["barrier"]
        grid = spec.get("grid", 51)
        eval_data, _ = _eval_set(train, test, spec.get("dataset", "test"))
        rows = []
        for a1, a2 in _pairs(cfg.alphas):
            label = f"{cfg.alpha_label(a1)}-{cfg.alpha_label(a2)}"
            if spec.get("per_round", False):
                common = sorted(
                    set(r for r, _ in results[a1].checkpoints)
                    & set(r for r, _ in results[a2].checkpoints))
                for r in common:
                    m1 = results[a1].checkpoint_at(r)
                    m2 = results[a2].checkpoint_at(r)
                    res = barrier(m1, m2, Path.linear(m1, m2), eval_data,
                                  kind, grid)
                    rows.append((f"{label}-r{r}", res))
            res = barrier(finals[a1], finals[a2],
                          Path.linear(finals[a1], finals[a2]),
                          eval_data, kind, grid)
            rows.append((label, res))
        write_barriers(out_dir / "barrier.csv", rows)
    if "curve" in analyses and len(cfg.alphas) >= 2:
        spec = analyses["curve"]
        a1, a2 = cfg.alphas[0], cfg.alphas[1]
        t1, t2 = finals[a1], finals[a2]
        cf = CurveFindConfig(steps=spec.get("steps", 2000),
                             batch_size=spec.get("batch_size", 50),
                             lr=spec.get("lr", 0.05),
                             momentum=spec.get("momentum", 0.9),
                             seed=spec.get("seed", cfg.seed))
        bend = curve_find(t1, t2, train, kind, cf)
        save_checkpoint(bend, {"seed": cfg.seed, "round": None, "alpha": None},
                        out_dir / "bend.ckpt")
        grid = spec.get("grid", 51)
        eval_data, tag = _eval_set(train, test, "test")
        linear = Path.linear(t1, t2)
        chain = Path.polychain(t1, bend, t2)
        write_path_profile(out_dir / "linear_path.csv",
                           {tag: traverse(linear, eval_data, kind, grid)})
        write_path_profile(out_dir / "curve_path.csv",
                           {tag: traverse(chain, eval_data, kind, grid)})
        summary = {
            "linear": barrier(t1, t2, linear, eval_data, kind, grid).__dict__,
            "polychain": barrier(t1, t2, chain, eval_data, kind, grid).__dict__,
            "eps_c_linear": connectivity_error(t1, t2, linear, eval_data,
                                               kind, grid),
            "eps_c_polychain": connectivity_error(t1, t2, chain, eval_data,
                                                  kind, grid),
        }
        with open(out_dir / "curve_summary.json", "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    if "dropout" in analyses:
        spec = analyses["dropout"]
        fracs = spec.get("keep_fracs", [0.5])
        trials = spec.get("trials", 20)
        keep_seed = spec.get("keep_seed", 0)
        rows = []
        for alpha in cfg.alphas:
            label = cfg.alpha_label(alpha)
            stages = [(r, m) for r, m in results[alpha].checkpoints]
            if not stages or stages[-1][0] != cfg.fed_config().rounds:
                stages.append((cfg.fed_config().rounds, finals[alpha]))
            for stage_round, model_at in stages:
                n = model_at.arch.hidden_count
                for frac in fracs:
                    size = max(1, int(round(frac * n)))
                    for trial in range(trials):
                        keep = random_keep(n, size, keep_seed + trial)
                        for ds_name, ds in (("train", train),) + (
                                (("test", test),) if test is not None else ()):
                            res = dropout_error(model_at, keep, ds, kind)
                            rows.append([label, stage_round, n, frac, trial,
                                         ds_name, res.error, res.full_loss,
                                         res.subnet_loss])
        write_dropout(out_dir / "dropout.csv", rows)
    if "noise" in analyses:
        rows = []
        for alpha in cfg.alphas:
            recs = results[alpha].noise_records
            if recs:
                rows.append((cfg.alpha_label(alpha), noise_stats(recs)))
        write_noise_stats(out_dir / "noise_stats.csv", rows)
    if "compare" in analyses and len(cfg.alphas) >= 2:
        spec = analyses["compare"]
        eval_data, _ = _eval_set(train, test, "test")
        if spec.get("sample") and spec["sample"] < eval_data.num_samples:
            rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 0xC3)))
            idx = np.sort(rng.choice(eval_data.num_samples, spec["sample"],
                                     replace=False))
            eval_data = subset(eval_data, idx)
        rows = []
        for a1, a2 in _pairs(cfg.alphas):
            t1, t2 = finals[a1], finals[a2]
            rows.append([f"{cfg.alpha_label(a1)}-{cfg.alpha_label(a2)}",
                         function_dissimilarity(t1, t2, eval_data),
                         weight_distance(t1, t2, init),
                         weight_distance(t1, init, init),
                         weight_distance(t2, init, init)])
        write_compare(out_dir / "compare.csv", rows)
    if "seven_path" in analyses and len(cfg.alphas) >= 2:
        spec = analyses["seven_path"]
        t1, t2 = finals[cfg.alphas[0]], finals[cfg.alphas[1]]
        waypoints = seven_segment_path(t1, t2)
        eval_data, _ = _eval_set(train, test, "train")
        pos, vals = segment_profile(waypoints, eval_data, kind,
                                    spec.get("points_per_segment", 15))
        write_segment_profile(out_dir / "seven_path.csv", pos, vals, 7)


def _config_from_args(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _load_compatible(paths):
    loaded = [load_checkpoint(p) for p in paths]
    head = loaded[0][0]
    for (params, _), p in zip(loaded[1:], paths[1:]):
        if params.arch != head.arch:
            raise ConfigError(
                f"checkpoint {p} architecture {params.arch} does not match "
                f"{paths[0]} ({head.arch})")
    return [params for params, _ in loaded]


def _out_dir(args) -> FilePath:
    out = FilePath(args.out or "fedmc-out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_train_fed(args) -> int:
    cfg = _config_from_args(args)
    out_dir = _out_dir(args)
    train, test, class_labels, num_classes = _load_data(cfg)
    arch = cfg.architecture(train.num_features)
    init = init_params(arch, np.random.SeedSequence((cfg.seed, INIT_STREAM)))
    alpha = IID if args.alpha == "iid" else float(args.alpha) \
        if args.alpha is not None else cfg.alphas[0]
    fed = cfg.fed_config()
    part = dirichlet_partition(class_labels, num_classes, fed.num_clients,
                               alpha, cfg.seed)
    result = run_fedavg(init, train, part, fed, test_data=test,
                        threads=args.threads)
    run_dir = _alpha_dir(out_dir, cfg, alpha)
    write_round_logs(run_dir / "round_log.csv", result.round_logs)
    if result.noise_records:
        write_noise_records(run_dir / "noise.csv", result.noise_records)
    save_checkpoint(init, {"seed": cfg.seed, "round": 0, "alpha": None},
                    out_dir / "init.ckpt")
    _save_round_checkpoints(run_dir, result, fed, alpha, cfg.seed)
    log = result.round_logs[-1]
    print(f"final round {log.round}: train {log.train_loss:.4f}/{log.train_acc:.4f}"
          f" test {log.test_loss:.4f}/{log.test_acc:.4f}")
    return 0


def cmd_landscape(args) -> int:
    cfg = _config_from_args(args)
    out_dir = _out_dir(args)
    origin, axis1, axis2 = _load_compatible([args.origin, args.axis1, args.axis2])
    train, test, _, _ = _load_data(cfg)
    eval_data, tag = _eval_set(train, test, args.dataset)
    plane = PlaneSpec(origin, axis1, axis2,
                      tuple(args.a_range), tuple(args.b_range), args.resolution)
    grids = hyperplane_grid(plane, {tag: eval_data}, cfg.loss_kind)
    write_landscape(out_dir / "landscape.csv", grids)
    return 0


def cmd_path(args) -> int:
    cfg = _config_from_args(args)
    out_dir = _out_dir(args)
    models = _load_compatible([args.start, args.end]
                              + ([args.bend] if args.bend else []))
    start, end = models[0], models[1]
    path = (Path.polychain(start, models[2], end) if args.bend
            else Path.linear(start, end))
    train, test, _, _ = _load_data(cfg)
    profiles = {"train": traverse(path, train, cfg.loss_kind, args.grid)}
    if test is not None:
        profiles["test"] = traverse(path, test, cfg.loss_kind, args.grid)
    write_path_profile(out_dir / "path.csv", profiles)
    eval_data, _ = _eval_set(train, test, args.dataset)
    eps = connectivity_error(start, end, path, eval_data, cfg.loss_kind,
                             args.grid)
    print(f"connectivity error ({args.dataset}): {eps:.6g}")
    return 0


def cmd_curve_find(args) -> int:
    cfg = _config_from_args(args)
    out_dir = _out_dir(args)
    start, end = _load_compatible([args.start, args.end])
    train, _, _, _ = _load_data(cfg)
    cf = CurveFindConfig(steps=args.steps, batch_size=args.batch_size,
                         lr=args.lr, momentum=args.momentum,
                         bend_init=args.bend_init, seed=args.cf_seed)
    bend = curve_find(start, end, train, cfg.loss_kind, cf)
    save_checkpoint(bend, {"seed": cfg.seed, "round": None, "alpha": None},
                    out_dir / "bend.ckpt")
    print(f"bend checkpoint written to {out_dir / 'bend.ckpt'}")
    return 0


def cmd_dropout(args) -> int:
    cfg = _config_from_args(args)
    out_dir = _out_dir(args)
    (model_at,) = _load_compatible([args.checkpoint])
    train, test, _, _ = _load_data(cfg)
    n = model_at.arch.hidden_count
    rows = []
    size = max(1, int(round(args.keep_frac * n)))
    for trial in range(args.trials):
        keep = random_keep(n, size, args.keep_seed + trial)
        for ds_name, ds in (("train", train),) + (
                (("test", test),) if test is not None else ()):
            res = dropout_error(model_at, keep, ds, cfg.loss_kind)
            rows.append(["cli", 0, n, args.keep_frac, trial, ds_name,
                         res.error, res.full_loss, res.subnet_loss])
    write_dropout(out_dir / "dropout.csv", rows)
    mean_train = float(np.mean([r[6] for r in rows if r[5] == "train"]))
    print(f"mean train dropout error over {args.trials} trials: {mean_train:.6g}")
    return 0


def _round_checkpoints(run_dir: FilePath):
    ckpt_dir = FilePath(run_dir) / "checkpoints"
    out = {}
    for p in sorted(ckpt_dir.glob("round_*.ckpt")):
        params, meta = load_checkpoint(p)
        out[int(meta["round"])] = params
    return out


def cmd_barrier(args) -> int:
    cfg = _config_from_args(args)
    out_dir = _out_dir(args)
    train, test, _, _ = _load_data(cfg)
    eval_data, _ = _eval_set(train, test, args.dataset)
    rows = []
    if args.per_round:
        runs_a = _round_checkpoints(args.per_round[0])
        runs_b = _round_checkpoints(args.per_round[1])
        for r in sorted(set(runs_a) & set(runs_b)):
            m1, m2 = runs_a[r], runs_b[r]
            if m1.arch != m2.arch:
                raise ConfigError(f"round {r}: checkpoint architectures differ")
            rows.append((r, barrier(m1, m2, Path.linear(m1, m2), eval_data,
                                    cfg.loss_kind, args.grid)))
    else:
        m1, m2 = _load_compatible([args.start, args.end])
        rows.append(("pair", barrier(m1, m2, Path.linear(m1, m2), eval_data,
                                     cfg.loss_kind, args.grid)))
    write_barriers(out_dir / "barrier.csv", rows)
    return 0


def cmd_noise(args) -> int:
    out_dir = _out_dir(args)
    by_run = {}
    for run_dir in args.run_dirs:
        path = FilePath(run_dir) / "noise.csv"
        with open(path) as fh:
            reader = _csv.DictReader(fh)
            norms = [float(row["norm_total"]) for row in reader]
        if not norms:
            raise ConfigError(f"{path}: no noise rows")
        arr = np.array(norms)
        by_run[FilePath(run_dir).name] = NoiseStats(
            float(arr.mean()), float(arr.max()), float(arr.min()))
    write_noise_stats(out_dir / "noise_stats.csv", sorted(by_run.items()))
    for name, s in sorted(by_run.items()):
        print(f"{name}: mean {s.mean:.6g}  max {s.maximum:.6g}  min {s.minimum:.6g}")
    return 0


def cmd_compare(args) -> int:
    cfg = _config_from_args(args)
    out_dir = _out_dir(args)
    models = _load_compatible(args.checkpoints)
    (init,) = _load_compatible([args.init])
    if init.arch != models[0].arch:
        raise ConfigError("init checkpoint architecture differs")
    train, test, _, _ = _load_data(cfg)
    eval_data, _ = _eval_set(train, test, args.dataset)
    rows = []
    for i, j in itertools.combinations(range(len(models)), 2):
        rows.append([f"{i}-{j}",
                     function_dissimilarity(models[i], models[j], eval_data),
                     weight_distance(models[i], models[j], init),
                     weight_distance(models[i], init, init),
                     weight_distance(models[j], init, init)])
    write_compare(out_dir / "compare.csv", rows)
    return 0


def cmd_seven_path(args) -> int:
    cfg = _config_from_args(args)
    out_dir = _out_dir(args)
    start, end = _load_compatible([args.start, args.end])
    train, test, _, _ = _load_data(cfg)
    eval_data, _ = _eval_set(train, test, args.dataset)
    waypoints = seven_segment_path(start, end)
    pos, vals = segment_profile(waypoints, eval_data, cfg.loss_kind, args.points)
    write_segment_profile(out_dir / "seven_path.csv", pos, vals, 7)
    print(f"max loss along path: {vals.max():.6g} "
          f"(endpoints {vals[0]:.6g}, {vals[-1]:.6g})")
    return 0


def _add_common(sub):
    sub.add_argument("--config", required=True, help="experiment JSON config")
    sub.add_argument("--out", help="output directory")
    sub.add_argument("--seed", type=int, default=None,
                     help="override the config seed")
    sub.add_argument("--threads", type=int,
                     default=int(os.environ.get("FLMC_THREADS", "0")) or None,
                     help="max worker threads (default: FLMC_THREADS or serial)")
    sub.add_argument("--dataset", choices=("train", "test"), default="test",
                     help="evaluation split for analyses (default test, "
                          "falls back to train)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedmc",
        description="federated training + mode-connectivity measurement")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("run", help="train per heterogeneity level and run "
                                    "all requested analyses")
    _add_common(p)
    p.set_defaults(func=cmd_run)

    p = subs.add_parser("train-fed", help="single federated training run")
    _add_common(p)
    p.add_argument("--alpha", help="heterogeneity level (number or 'iid'); "
                                   "default: first config alpha")
    p.set_defaults(func=cmd_train_fed)

    p = subs.add_parser("landscape", help="hyperplane grid through 3 checkpoints")
    _add_common(p)
    p.add_argument("--origin", required=True)
    p.add_argument("--axis1", required=True)
    p.add_argument("--axis2", required=True)
    p.add_argument("--a-range", nargs=2, type=float, default=(-0.5, 1.5))
    p.add_argument("--b-range", nargs=2, type=float, default=(-0.5, 1.5))
    p.add_argument("--resolution", type=int, default=25)
    p.set_defaults(func=cmd_landscape)

    p = subs.add_parser("path", help="traverse a linear path or polychain")
    _add_common(p)
    p.add_argument("--start", required=True)
    p.add_argument("--end", required=True)
    p.add_argument("--bend", default=None)
    p.add_argument("--grid", type=int, default=51)
    p.set_defaults(func=cmd_path)

    p = subs.add_parser("curve-find", help="optimize a polychain bend")
    _add_common(p)
    p.add_argument("--start", required=True)
    p.add_argument("--end", required=True)
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--batch-size", type=int, default=50)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--bend-init", default="midpoint",
                   choices=("midpoint", "endpoint", "random"))
    p.add_argument("--cf-seed", type=int, default=0)
    p.set_defaults(func=cmd_curve_find)

    p = subs.add_parser("dropout", help="dropout-stability sweep on a checkpoint")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--keep-frac", type=float, default=0.5)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--keep-seed", type=int, default=0)
    p.set_defaults(func=cmd_dropout)

    p = subs.add_parser("barrier", help="barrier between checkpoints")
    _add_common(p)
    p.add_argument("--start")
    p.add_argument("--end")
    p.add_argument("--per-round", nargs=2, metavar=("RUN_DIR_A", "RUN_DIR_B"),
                   help="sweep matching per-round checkpoints of two runs")
    p.add_argument("--grid", type=int, default=51)
    p.set_defaults(func=cmd_barrier)

    p = subs.add_parser("noise", help="summarize noise.csv files into stats")
    p.add_argument("--run-dirs", nargs="+", required=True)
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_noise)

    p = subs.add_parser("compare", help="function dissimilarity + weight distances")
    _add_common(p)
    p.add_argument("--checkpoints", nargs="+", required=True)
    p.add_argument("--init", required=True)
    p.set_defaults(func=cmd_compare)

    p = subs.add_parser("seven-path", help="construct and profile the "
                                           "7-segment connecting path")
    _add_common(p)
    p.add_argument("--start", required=True)
    p.add_argument("--end", required=True)
    p.add_argument("--points", type=int, default=15)
    p.set_defaults(func=cmd_seven_path)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "command", None) == "barrier":
        if not args.per_round and not (args.start and args.end):
            parser.error("barrier needs --start/--end or --per-round")
    try:
        return args.func(args)
    except (ConfigError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
