"""Command-line front door: generate | train | evaluate | gradcheck | flops.

Every command is a pure function of (config file, flags, seed); reruns with
--threads 1 produce byte-identical outputs. Exit codes: 0 success,
1 validation, 2 I/O or file format, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

import numpy as np

from . import baselines, evalkit, model as mdl, training
from .autodiff import finite_diff_check
from .channelsim import (Dataset, SystemConfig, dataset_bytes, desk_config,
                         generate_dataset, load_dataset, save_dataset)
from .errors import DataFormatError, NumericError, ValidationError
from .training import FcArch, GruArch, OdeArch, TrainConfig

_SYSTEM_KEYS = {f.name for f in dataclasses.fields(SystemConfig)}
_TRAIN_KEYS = {f.name for f in dataclasses.fields(TrainConfig)} - {"seed"}
_SOLVER_KEYS = {"scheme", "step_frames"}
_EXTRA_KEYS = {"gru_hidden", "fc_width"}

_RANGE_KEYS = {"velocity_range_kmh", "delay_spread_range_ns"}
_INT_KEYS = {
    "n_tx", "n_rx", "n_rf", "n_subcarriers", "slots_per_frame", "history_frames",
    "future_frames", "label_samples", "n_paths", "feature_l", "feature_r", "seed",
    "epochs", "batch_size", "checkpoint_every", "gru_hidden", "fc_width",
}
_STR_KEYS = {"gradient_path", "scheme"}


class RunConfig:
    """Validated union of system, training, and solver settings."""

    def __init__(self, system: SystemConfig, train: TrainConfig,
                 solver: mdl.SolverSpec, gru_hidden: int | None, fc_width: int):
        self.system = system
        self.train = train
        self.solver = solver
        self.gru_hidden = gru_hidden
        self.fc_width = fc_width


def _parse_value(key: str, text: str):
    text = text.strip()
    try:
        if key in _RANGE_KEYS:
            lo, hi = (float(part) for part in text.split(","))
            return (lo, hi)
        if key in _INT_KEYS:
            return int(text)
        if key in _STR_KEYS:
            return text
        return float(text)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"bad value for config key {key!r}: {text!r}") from exc


def parse_config_file(path) -> dict:
    """Plain-text 'key = value' lines; '#' starts a comment; unknown keys rejected."""
    known = _SYSTEM_KEYS | _TRAIN_KEYS | _SOLVER_KEYS | _EXTRA_KEYS
    values: dict = {}
    try:
        with open(path, "r", encoding="utf-8") as src:
            for lineno, line in enumerate(src, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValidationError(f"{path}:{lineno}: expected 'key = value'")
                key, text = (part.strip() for part in line.split("=", 1))
                if key not in known:
                    raise ValidationError(f"{path}:{lineno}: unknown config key {key!r}")
                values[key] = _parse_value(key, text)
    except OSError as exc:
        raise DataFormatError(f"cannot read config file {path}: {exc}") from exc
    return values


def build_run_config(values: dict, seed: int | None = None) -> RunConfig:
    sys_kwargs = {k: v for k, v in values.items() if k in _SYSTEM_KEYS}
    train_kwargs = {k: v for k, v in values.items() if k in _TRAIN_KEYS}
    if seed is not None:
        sys_kwargs["seed"] = seed
        train_kwargs["seed"] = seed
    elif "seed" in values:
        train_kwargs["seed"] = values["seed"]
    system = dataclasses.replace(desk_config(), **sys_kwargs)
    train = TrainConfig(**train_kwargs)
    solver = mdl.SolverSpec(
        scheme=values.get("scheme", "rk4"),
        step_frames=values.get("step_frames", 1.0 / system.slots_per_frame))
    gru_hidden = values.get("gru_hidden")
    fc_width = values.get("fc_width", 512)
    return RunConfig(system, train, solver, gru_hidden, fc_width)


def _load_values(args) -> dict:
    values = parse_config_file(args.config) if args.config else {}
    for item in args.set or []:
        if "=" not in item:
            raise ValidationError(f"--set expects key=value, got {item!r}")
        key, text = (part.strip() for part in item.split("=", 1))
        known = _SYSTEM_KEYS | _TRAIN_KEYS | _SOLVER_KEYS | _EXTRA_KEYS
        if key not in known:
            raise ValidationError(f"unknown config key {key!r}")
        values[key] = _parse_value(key, text)
    return values


# ---------------------------------------------------------------------------
# subcommands

def cmd_generate(args) -> int:
    run = build_run_config(_load_values(args), seed=args.seed)
    if args.samples < 1:
        raise ValidationError("--samples must be at least 1")
    ds = generate_dataset(run.system, args.samples, args.mode,
                          seed=run.system.seed, threads=args.threads)
    save_dataset(ds, args.out)
    sha = evalkit.dataset_hash(ds)
    print(f"wrote {args.out}: {len(ds.samples)} {ds.mode} samples, "
          f"E_avg={ds.e_avg:.6e}, sha256={sha[:16]}")
    return 0


def _make_arch(name: str, run: RunConfig):
    if name == "ode":
        return OdeArch(run.solver)
    if name == "gru":
        return GruArch(hidden=run.gru_hidden)
    if name == "fc":
        return FcArch(width=run.fc_width)
    raise ValidationError(f"unknown architecture {name!r}")


def cmd_train(args) -> int:
    values = _load_values(args)
    if args.grad:
        values["gradient_path"] = args.grad
    run = build_run_config(values, seed=args.seed)
    ds = load_dataset(args.data)
    if ds.config != run.system:
        raise ValidationError("dataset config does not match the run config; "
                              "pass the same config used for generation")
    arch = _make_arch(args.arch, run)
    params, trace = training.train(arch, ds, run.train,
                                   checkpoint_path=args.out, threads=args.threads,
                                   log=(lambda row: print(
                                       f"epoch {row.epoch}: {row.mean_train_nmse_db:+.3f} dB",
                                       flush=True)) if args.verbose else None)
    training.write_trace_csv(str(args.out) + ".trace.csv", trace)
    print(f"wrote {args.out} after {len(trace)} epochs; "
          f"final train NMSE {trace[-1].mean_train_nmse_db:+.3f} dB")
    return 0


def _method_specs(args, run: RunConfig, ds: Dataset) -> dict[str, evalkit.MethodSpec]:
    ds_hash = evalkit.dataset_hash(ds)
    grid = run.system.test_grid
    wanted = [m.strip() for m in args.baselines.split(",") if m.strip()]
    methods: dict[str, evalkit.MethodSpec] = {}

    if args.model:
        ckpt_cfg, params = mdl.load_checkpoint(args.model)
        mdl.validate_model_params(ckpt_cfg, params)
        spec = run.solver
        methods["ode"] = evalkit.MethodSpec(
            lambda s: mdl.predict(params, s.inputs, grid, spec), ds_hash)

    for name in wanted:
        if name == "perfect":
            methods["perfect"] = evalkit.MethodSpec(lambda s: list(s.labels), ds_hash)
        elif name == "outdated":
            methods["outdated"] = evalkit.MethodSpec(
                lambda s: baselines.outdated_csi(s.inputs)(grid), ds_hash)
        elif name == "gru_interp":
            if not args.gru:
                raise ValidationError("baseline 'gru_interp' needs --gru CHECKPOINT")
            _, gparams = mdl.load_checkpoint(args.gru)
            methods["gru_interp"] = evalkit.MethodSpec(
                lambda s, gp=gparams: baselines.slot_series(
                    baselines.gru_discrete_predict(gp, s.inputs, run.system)), ds_hash)
        elif name == "fc_interp":
            if not args.fc:
                raise ValidationError("baseline 'fc_interp' needs --fc CHECKPOINT")
            _, fparams = mdl.load_checkpoint(args.fc)
            methods["fc_interp"] = evalkit.MethodSpec(
                lambda s, fp=fparams: baselines.slot_series(
                    baselines.fc_discrete_predict(fp, s, run.system)), ds_hash)
        else:
            raise ValidationError(f"unknown baseline {name!r}")
    return methods


def cmd_evaluate(args) -> int:
    run = build_run_config(_load_values(args), seed=args.seed)
    ds = load_dataset(args.data)
    methods = _method_specs(args, run, ds)
    if not methods:
        raise ValidationError("nothing to evaluate: pass --model and/or --baselines")
    rows = evalkit.evaluate_methods(methods, ds)
    metadata = {
        "dataset_sha256": evalkit.dataset_hash(ds),
        "seed": str(run.system.seed),
        "n_samples": str(len(ds.samples)),
        "config": " ".join(f"{f.name}={getattr(ds.config, f.name)}"
                           for f in dataclasses.fields(SystemConfig)),
    }
    evalkit.write_report_csv(args.out, rows, metadata)
    print(f"wrote {args.out}: {len(rows)} rows "
          f"({len(methods)} methods x {len(run.system.test_grid)} slots)")
    return 0


def cmd_gradcheck(args) -> int:
    run = build_run_config(_load_values(args), seed=args.seed)
    cfg = run.system
    ds = generate_dataset(cfg, 1, "train", seed=cfg.seed)
    sample = ds.samples[0]
    arch = OdeArch(run.solver)

    def loss_and_grads(params):
        return training.sample_loss_grads(arch, params, sample, cfg, "tape")

    params = mdl.init_model_params(cfg, np.random.default_rng(cfg.seed))
    worst = finite_diff_check(loss_and_grads, params, probes=args.probes,
                              step=args.step, seed=cfg.seed)
    ok = worst < args.tolerance
    print(f"gradcheck: max relative error {worst:.3e} "
          f"({'PASS' if ok else 'FAIL'} vs tolerance {args.tolerance:.1e})")
    if not ok:
        raise NumericError(f"gradient check failed: {worst:.3e} >= {args.tolerance:.1e}")
    return 0


def cmd_flops(args) -> int:
    run = build_run_config(_load_values(args), seed=args.seed)
    report = mdl.count_flops(run.system, run.solver)
    print(f"{'stage':<10}{'counted':>14}{'formula':>14}{'ratio':>8}")
    for stage in ("encoder", "decoder", "head"):
        sc = getattr(report, stage)
        print(f"{stage:<10}{sc.counted:>14}{sc.formula:>14}{sc.ratio:>8.3f}")
    print(f"field evaluations G = {report.field_evals} over {report.n_targets} targets")
    return 0


# ---------------------------------------------------------------------------
# entry point

class _Parser(argparse.ArgumentParser):
    def error(self, message):  # map usage errors to exit code 1
        raise ValidationError(message)


def _add_common(p) -> None:
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override one config key (repeatable; wins over the file)")
    p.add_argument("--seed", type=int, default=None, help="master seed override")
    p.add_argument("--threads", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ctcp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate and save a dataset")
    _add_common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--mode", choices=("train", "test"), default="train")
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("train", help="train a model and write checkpoint + loss trace")
    _add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--arch", choices=("ode", "gru", "fc"), default="ode")
    p.add_argument("--grad", choices=("tape", "adjoint"), default=None)
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("evaluate", help="per-slot NMSE / rate report")
    _add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--model", help="continuous-model checkpoint")
    p.add_argument("--gru", help="GRU baseline checkpoint")
    p.add_argument("--fc", help="FC baseline checkpoint")
    p.add_argument("--baselines", default="outdated,perfect",
                   help="comma list from: gru_interp, fc_interp, outdated, perfect")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("gradcheck", help="finite-difference gradient validation")
    _add_common(p)
    p.add_argument("--tolerance", type=float, default=1e-5)
    p.add_argument("--probes", type=int, default=10)
    p.add_argument("--step", type=float, default=1e-6)
    p.set_defaults(fn=cmd_gradcheck)

    p = sub.add_parser("flops", help="counted vs analytic multiplication table")
    _add_common(p)
    p.set_defaults(fn=cmd_flops)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataFormatError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
