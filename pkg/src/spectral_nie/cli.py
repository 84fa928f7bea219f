"""``spectral-nie`` command line interface.

Settings come from built-in defaults, then an optional INI file
(``--config``, sections ``[data]``, ``[model]``, ``[solver]``, ``[train]``),
then the ``SPECTRAL_NIE_SEED`` environment variable, then command-line flags.
Flags use the config key names with dashes (``init_points`` -> ``--init-points``).

Exit codes: 0 success, 1 usage, 2 data or schema error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import contextlib
import itertools
import json
import logging
import os
import shutil
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Sequence

from . import io
from .datagen import (
    DELAY_KIND,
    DelayNetSpec,
    gen_delay_dataset,
    gen_ie_dataset,
    parse_downsample,
    split,
    downsample,
)
from .errors import (
    DivergedError,
    NonFiniteError,
    SchemaError,
    SingularSystemError,
)
from .ie_core import SolverConfig
from .train_eval import (
    BENCHMARK_CSV_HEADER,
    EPOCH_CSV_HEADER,
    BenchmarkCase,
    TrainConfig,
    benchmark,
    evaluate,
    interpolation_eval,
    new_model,
    train,
)

log = logging.getLogger("spectral_nie")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3
SEED_ENV = "SPECTRAL_NIE_SEED"
IE_KIND = "synthetic-ie"


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# configuration schema
# --------------------------------------------------------------------------

def _int_tuple(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in str(text).split(",") if x.strip())


def _float_tuple(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in str(text).split(",") if x.strip())


def _optional_int(text: str) -> int | None:
    return None if str(text).strip().lower() in ("", "none", "auto") else int(text)


def _optional_str(text: str) -> str | None:
    return None if str(text).strip().lower() in ("", "none") else str(text)


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    default: str
    help: str


SCHEMA: dict[str, dict[str, Key]] = {
    "data": {
        "kind": Key(str, IE_KIND, f"{IE_KIND} or {DELAY_KIND}"),
        "samples": Key(int, "100", "number of trajectories"),
        "points": Key(int, "100", "time points per trajectory"),
        "seed": Key(int, "0", "generator seed"),
        "dim": Key(int, "2", "channels of the synthetic integral equation"),
        "equation": Key(str, "fredholm", "fredholm or volterra (synthetic IE)"),
        "lam": Key(float, "1.0", "requested lambda before norm capping (synthetic IE)"),
        "noise_sigma": Key(float, "0.05", "Gaussian noise level (synthetic IE)"),
        "t_min": Key(float, "0.0", "start time (synthetic IE)"),
        "t_max": Key(float, "1.0", "end time (synthetic IE)"),
        "n_quad": Key(int, "200", "Nystrom quadrature nodes (synthetic IE)"),
        "free_term_scales": Key(_float_tuple, "1.0,0.05,0.05,0.05",
                                "coefficient ranges of the degree-3 free terms"),
        "max_norm": Key(float, "0.5", "cap on |lam| times the operator norm"),
        "nodes": Key(int, "80", "network size (delay net)"),
        "coupling": Key(float, "1.5", "coupling strength (delay net)"),
        "density": Key(float, "0.2", "edge density (delay net)"),
        "max_delay": Key(float, "1.0", "largest delay (delay net)"),
        "t_end": Key(float, "4.0", "end time (delay net)"),
        "step": Key(float, "0.01", "Euler step (delay net)"),
        "stim_amplitude": Key(float, "1.0", "stimulus amplitude (delay net)"),
        "stim_onset": Key(float, "1.0", "stimulus onset (delay net)"),
    },
    "model": {
        "n": Key(int, "16", "Chebyshev degree N (N + 1 modes)"),
        "hidden": Key(_int_tuple, "32", "comma-separated hidden widths"),
        "equation": Key(str, "fredholm", "fredholm or volterra"),
        "lam": Key(float, "1.0", "lambda of the learned equation"),
        "output_scale": Key(float, "1.0", "scale of the initial output layer"),
    },
    "solver": {
        "tol": Key(float, "1e-6", "Picard stopping tolerance"),
        "max_iter": Key(int, "100", "Picard iteration cap"),
        "relaxation": Key(float, "1.0", "Picard damping in (0, 1]"),
    },
    "train": {
        "lr": Key(float, "1e-3", "Adam learning rate"),
        "batch_size": Key(int, "32", "mini-batch size"),
        "max_epochs": Key(int, "1000", "epoch cap"),
        "patience_epochs": Key(int, "200", "epochs without validation improvement"),
        "walltime_cap_s": Key(float, "3600", "training time cap in seconds"),
        "init_points": Key(int, "2", "initial points used to build the free term"),
        "free_term_degree": Key(_optional_int, "auto", "free-term fit degree (auto: min(p-1, 2))"),
        "mc_samples": Key(int, "1000", "Monte Carlo projection samples"),
        "seed": Key(int, "0", "initialisation, shuffling and split seed"),
        "split": Key(_float_tuple, "0.8,0.1,0.1", "train,val,test fractions"),
        "downsample": Key(_optional_str, "none", "train on regular:K or irregular:P[:SEED] data"),
    },
}

COMMAND_SECTIONS = {
    "gen-data": ("data",),
    "train": ("model", "solver", "train"),
    "eval": ("solver",),
    "interp": ("solver",),
    "benchmark": ("model", "solver", "train"),
}


def _flag(key: str) -> str:
    return "--" + key.replace("_", "-")


def read_config_file(path) -> dict[str, dict[str, str]]:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise UsageError(f"cannot parse config {path}: {exc}") from None
    out: dict[str, dict[str, str]] = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise UsageError(f"unknown config section [{section}]")
        for key, value in parser.items(section):
            if key not in SCHEMA[section]:
                raise UsageError(f"unknown config key {key!r} in [{section}]")
            out.setdefault(section, {})[key] = value
    return out


def resolve_config(args: argparse.Namespace, sections: Sequence[str]) -> dict[str, dict[str, Any]]:
    """Merge defaults, config file, environment and flags; parse every value."""
    raw = {s: {k: key.default for k, key in SCHEMA[s].items()} for s in sections}
    if getattr(args, "config", None):
        for section, values in read_config_file(args.config).items():
            if section in raw:
                raw[section].update(values)
    env_seed = os.environ.get(SEED_ENV)
    if env_seed:
        for section in ("data", "train"):
            if section in raw:
                raw[section]["seed"] = env_seed
    for section in sections:
        for key in SCHEMA[section]:
            value = getattr(args, f"{section}__{key}", None)
            if value is not None:
                raw[section][key] = value
    resolved: dict[str, dict[str, Any]] = {}
    for section, values in raw.items():
        resolved[section] = {}
        for key, text in values.items():
            try:
                resolved[section][key] = SCHEMA[section][key].parse(text)
            except (TypeError, ValueError) as exc:
                raise UsageError(f"bad value for {key} in [{section}]: {text!r} ({exc})") from None
    return resolved


def write_resolved_config(path: Path, resolved: dict[str, dict[str, Any]], extra: dict | None = None):
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    for section, values in resolved.items():
        parser[section] = {k: _config_text(v) for k, v in values.items()}
    if extra:
        parser["run"] = {k: _config_text(v) for k, v in extra.items()}
    with open(path, "w", encoding="utf-8") as fh:
        parser.write(fh)


def _config_text(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, tuple):
        return ",".join(repr(v) if isinstance(v, float) else str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def train_config_from(resolved: dict[str, dict[str, Any]]) -> TrainConfig:
    m, s, t = resolved["model"], resolved["solver"], resolved["train"]
    try:
        return TrainConfig(
            n=m["n"], hidden=m["hidden"], kind=m["equation"], lam=m["lam"],
            output_scale=m["output_scale"],
            lr=t["lr"], batch_size=t["batch_size"], max_epochs=t["max_epochs"],
            patience_epochs=t["patience_epochs"], walltime_cap_s=t["walltime_cap_s"],
            n_init_points=t["init_points"], free_term_degree=t["free_term_degree"],
            mc_samples=t["mc_samples"], seed=t["seed"],
            solver=SolverConfig(s["tol"], s["max_iter"], s["relaxation"]),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def train_config_from_manifest(manifest: dict, solver: dict[str, Any] | None = None) -> TrainConfig:
    cfg = dict(manifest["train_config"])
    solver_cfg = SolverConfig(**(solver or cfg.pop("solver")))
    cfg.pop("solver", None)
    cfg["hidden"] = tuple(cfg["hidden"])
    return TrainConfig(solver=solver_cfg, **cfg)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def _check_output(path: Path, force: bool):
    if path.exists() and not force:
        raise UsageError(f"{path} exists; pass --force to overwrite")


def generate(data: dict[str, Any]):
    if data["samples"] < 1:
        raise UsageError("--samples must be >= 1")
    if data["points"] < 2:
        raise UsageError("--points must be >= 2")
    if data["kind"] == IE_KIND:
        return gen_ie_dataset(
            data["samples"], data["points"], data["dim"], data["lam"], data["noise_sigma"],
            data["seed"], kind=data["equation"], t_min=data["t_min"], t_max=data["t_max"],
            n_quad=data["n_quad"], free_term_scales=data["free_term_scales"],
            max_norm=data["max_norm"],
        )
    if data["kind"] == DELAY_KIND:
        spec = DelayNetSpec.random(
            data["nodes"], data["seed"], coupling=data["coupling"], density=data["density"],
            max_delay=data["max_delay"], stim_amplitude=data["stim_amplitude"],
            stim_onset=data["stim_onset"], step=data["step"], t_end=data["t_end"],
        )
        return gen_delay_dataset(spec, data["samples"], data["points"], data["seed"])
    raise UsageError(f"unknown dataset kind {data['kind']!r}; use {IE_KIND} or {DELAY_KIND}")


def cmd_gen_data(args) -> int:
    resolved = resolve_config(args, COMMAND_SECTIONS["gen-data"])
    out = Path(args.out)
    _check_output(out, args.force)
    try:
        ds = generate(resolved["data"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    io.save_dataset(ds, out)
    write_resolved_config(out.with_suffix(".config.ini"), resolved)
    summary = {k: ds.meta[k] for k in ("kind", "dim", "n_points", "t_min", "t_max",
                                        "noise_sigma", "seed")}
    summary["samples"] = len(ds)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def _splits(ds, cfg_train: dict[str, Any]):
    try:
        return split(ds, cfg_train["split"], cfg_train["seed"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None


@contextlib.contextmanager
def _staging(out_dir: Path, force: bool):
    """Write into a temporary sibling directory, then move files into place."""
    if out_dir.exists() and any(out_dir.iterdir()) and not force:
        raise UsageError(f"{out_dir} is not empty; pass --force to overwrite")
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=".staging-", dir=out_dir.parent))
    try:
        yield tmp
        out_dir.mkdir(exist_ok=True)
        for item in tmp.iterdir():
            os.replace(item, out_dir / item.name)
    finally:
        shutil.rmtree(tmp, ignore_errors=True)


def _fmt(x) -> str:
    return io.format_cell(x)


def cmd_train(args) -> int:
    resolved = resolve_config(args, COMMAND_SECTIONS["train"])
    cfg = train_config_from(resolved)
    ds = io.load_dataset(args.data)
    tr, va, te = _splits(ds, resolved["train"])
    mode_text = resolved["train"]["downsample"]
    if mode_text:
        mode = _parse_mode(mode_text)
        tr, va = downsample(tr, mode), downsample(va, mode)
    model = new_model(cfg, ds.dim)
    with _staging(Path(args.out_dir), args.force) as stage:
        best, metrics = train(model, tr, va, cfg)
        test = evaluate(best, te, cfg)
        io.write_csv(stage / "metrics.csv", EPOCH_CSV_HEADER,
                     [(e.epoch, e.train_mse, e.val_mse, e.walltime_s) for e in metrics.epochs])
        summary = {
            "status": metrics.status,
            "epochs": len(metrics.epochs),
            "best_epoch": metrics.best_epoch,
            "best_val_mse": metrics.mse_mean,
            "test_mse_mean": test.mse_mean,
            "test_mse_std": test.mse_std,
            "projection_mse": metrics.projection_mse,
            "params": metrics.n_params,
            "memory_bytes": metrics.memory_bytes,
            "walltime_s": metrics.walltime_s,
        }
        io.write_csv(stage / "summary.csv", tuple(summary), [summary])
        io.save_checkpoint(
            stage / "checkpoint.json", best,
            seed=cfg.seed, step=metrics.best_epoch or 0,
            train_config=_train_config_dict(cfg),
            split={"fractions": list(resolved["train"]["split"]), "seed": cfg.seed},
            data_meta={k: ds.meta.get(k) for k in ("kind", "dim", "t_min", "t_max", "seed")},
        )
        write_resolved_config(stage / "config.ini", resolved, {"data": args.data})
    print(" ".join(f"{k}={_fmt(v)}" for k, v in summary.items()))
    return EXIT_OK


def _train_config_dict(cfg: TrainConfig) -> dict:
    return {
        "n": cfg.n, "hidden": list(cfg.hidden), "kind": cfg.kind.value, "lam": cfg.lam,
        "lr": cfg.lr, "batch_size": cfg.batch_size, "max_epochs": cfg.max_epochs,
        "patience_epochs": cfg.patience_epochs, "walltime_cap_s": cfg.walltime_cap_s,
        "n_init_points": cfg.n_init_points, "free_term_degree": cfg.free_term_degree,
        "mc_samples": cfg.mc_samples, "seed": cfg.seed, "output_scale": cfg.output_scale,
        "solver": {"tol": cfg.solver.tol, "max_iter": cfg.solver.max_iter,
                   "relaxation": cfg.solver.relaxation},
    }


def _parse_mode(text: str):
    try:
        return parse_downsample(text)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load_model(args):
    params, manifest = io.load_checkpoint(args.checkpoint)
    ds = io.load_dataset(args.data)
    if ds.dim != params.dim:
        raise SchemaError(f"checkpoint expects {params.dim} channels, dataset has {ds.dim}")
    solver = None
    if any(getattr(args, f"solver__{k}", None) is not None for k in SCHEMA["solver"]):
        solver = resolve_config(args, ("solver",))["solver"]
    return params, train_config_from_manifest(manifest, solver), ds, manifest


def _select_split(ds, manifest: dict, which: str):
    if which == "all":
        return ds
    info = manifest["split"]
    tr, va, te = _splits(ds, {"split": tuple(info["fractions"]), "seed": info["seed"]})
    return {"train": tr, "val": va, "test": te}[which]


def cmd_eval(args) -> int:
    params, cfg, ds, manifest = _load_model(args)
    target = _select_split(ds, manifest, args.split)
    m = evaluate(params, target, cfg)
    row = {"split": args.split, "samples": len(target),
           "mse_mean": m.mse_mean, "mse_std": m.mse_std}
    return _report(args, ("split", "samples", "mse_mean", "mse_std"), row)


def cmd_interp(args) -> int:
    params, cfg, ds, manifest = _load_model(args)
    target = _select_split(ds, manifest, args.split)
    mode = _parse_mode(args.downsample)
    m = interpolation_eval(params, target, mode, cfg)
    row = {"split": args.split, "downsample": str(mode), "samples": len(target),
           "mse_mean": m.mse_mean, "mse_std": m.mse_std}
    return _report(args, ("split", "downsample", "samples", "mse_mean", "mse_std"), row)


def _report(args, header, row) -> int:
    if args.out:
        out = Path(args.out)
        _check_output(out, args.force)
        io.write_csv(out, header, [row])
    print(" ".join(f"{k}={_fmt(row[k])}" for k in header))
    return EXIT_OK


def _parse_sweep(items: Sequence[str]) -> list[tuple[str, list[str]]]:
    sweeps = []
    for item in items:
        key, sep, values = item.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or not values:
            raise UsageError(f"bad --sweep {item!r}; use key=v1,v2")
        if not any(key in SCHEMA[s] for s in COMMAND_SECTIONS["benchmark"]):
            raise UsageError(f"unknown sweep key {key!r}")
        sweeps.append((key, values.split(";") if ";" in values else values.split(",")))
    return sweeps


def cmd_benchmark(args) -> int:
    base = resolve_config(args, COMMAND_SECTIONS["benchmark"])
    sweeps = _parse_sweep(args.sweep or [])
    ds = io.load_dataset(args.data)
    mode_text = base["train"]["downsample"]
    mode = _parse_mode(mode_text) if mode_text else None
    out_dir = Path(args.out_dir)
    cases = []
    tr, va, te = _splits(ds, base["train"])
    for combo in itertools.product(*[[(k, v) for v in vals] for k, vals in sweeps]):
        raw = {s: dict(v) for s, v in base.items()}
        for key, value in combo:
            section = next(s for s in COMMAND_SECTIONS["benchmark"] if key in SCHEMA[s])
            try:
                raw[section][key] = SCHEMA[section][key].parse(value)
            except ValueError as exc:
                raise UsageError(f"bad sweep value {key}={value!r}: {exc}") from None
        name = ",".join(f"{k}={v}" for k, v in combo) or "base"
        ctr, cva = (downsample(tr, mode), downsample(va, mode)) if mode else (tr, va)
        cases.append(BenchmarkCase(name, train_config_from(raw), ctr, cva, te,
                                   interp_mode=mode, ds_test_full=te))
    with _staging(out_dir, args.force) as stage:
        rows = benchmark(cases)
        io.write_csv(stage / "benchmark.csv", BENCHMARK_CSV_HEADER, rows)
        write_resolved_config(stage / "config.ini", base,
                              {"data": args.data, "sweep": " ".join(args.sweep or [])})
    for row in rows:
        print(" ".join(f"{k}={_fmt(row[k])}" for k in BENCHMARK_CSV_HEADER))
    return EXIT_OK


def cmd_selfcheck(args) -> int:
    from .selfcheck import run_all

    results = run_all()
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERICAL


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_sections(parser: argparse.ArgumentParser, sections: Sequence[str]):
    parser.add_argument("--config", help="INI file with [data]/[model]/[solver]/[train] sections")
    for section in sections:
        group = parser.add_argument_group(f"[{section}]")
        for key, spec in SCHEMA[section].items():
            group.add_argument(_flag(key), dest=f"{section}__{key}", default=None,
                               metavar=key.upper(), help=f"{spec.help} (default {spec.default})")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spectral-nie", description="Spectral neural integral equations.")
    parser.add_argument("--threads", type=int, default=None,
                        help="cap on BLAS/OpenMP threads (default: machine parallelism)")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-data", help="generate a dataset file")
    _add_sections(p, COMMAND_SECTIONS["gen-data"])
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a model on a dataset")
    _add_sections(p, COMMAND_SECTIONS["train"])
    p.add_argument("--data", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_train)

    for name, func, help_text in (("eval", cmd_eval, "evaluate a checkpoint"),
                                  ("interp", cmd_interp, "interpolation error of a checkpoint")):
        p = sub.add_parser(name, help=help_text)
        _add_sections(p, COMMAND_SECTIONS[name])
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--data", required=True)
        p.add_argument("--split", choices=("all", "train", "val", "test"), default="test")
        p.add_argument("--out", help="CSV file for the metrics row")
        p.add_argument("--force", action="store_true")
        if name == "interp":
            p.add_argument("--downsample", required=True,
                           help="regular:K or irregular:P[:SEED]")
        p.set_defaults(func=func)

    p = sub.add_parser("benchmark", help="train and evaluate a sweep of configurations")
    _add_sections(p, COMMAND_SECTIONS["benchmark"])
    p.add_argument("--data", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--sweep", action="append", help="key=v1,v2 (repeatable, crossed)")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("selfcheck", help="run the analytic oracle checks")
    p.set_defaults(func=cmd_selfcheck)
    return parser


def _thread_limit(n: int | None):
    if n is None:
        return contextlib.nullcontext()
    if n < 1:
        raise UsageError("--threads must be >= 1")
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help or a parse error
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        with _thread_limit(args.threads):
            return args.func(args)
    except UsageError as exc:
        print(f"spectral-nie: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SchemaError, FileNotFoundError, IsADirectoryError, json.JSONDecodeError) as exc:
        print(f"spectral-nie: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NonFiniteError, SingularSystemError, DivergedError) as exc:
        print(f"spectral-nie: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"spectral-nie: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
