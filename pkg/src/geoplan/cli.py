"""Command-line entry point.

Subcommands: gen-data, train-sft, train-grl, plan, eval, sweep-energy,
delta-hyp.  Exit codes: 0 success, 2 configuration error, 3 numerical
failure during training.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import envs
from . import runtime
from . import worldmodel as wm

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _load_cfg(args) -> runtime.RunConfig:
    if args.config:
        cfg = runtime.RunConfig.load(args.config)
    else:
        cfg = runtime.RunConfig().validate()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out_dir = args.out
    return cfg


def _out_dir(cfg) -> str:
    os.makedirs(cfg.out_dir, exist_ok=True)
    return cfg.out_dir


def _load_model(args) -> wm.WorldModel:
    if not args.checkpoint or not os.path.exists(args.checkpoint):
        raise runtime.ConfigError(
            f"missing checkpoint {args.checkpoint!r}")
    return wm.load_checkpoint(args.checkpoint)


def cmd_gen_data(args) -> int:
    cfg = _load_cfg(args)
    world = runtime.build_world(cfg)
    records = envs.generate_dataset(world, cfg.data.num_traj,
                                    cfg.data.horizon, cfg.data.seed)
    path = os.path.join(_out_dir(cfg), "dataset.jsonl")
    envs.write_dataset(records, path)
    print(f"wrote {len(records)} trajectories to {path}")
    return EXIT_OK


def cmd_train_sft(args) -> int:
    cfg = _load_cfg(args)
    model, manifest = runtime.train_sft(cfg)
    out = _out_dir(cfg)
    wm.save_checkpoint(model, os.path.join(out, "sft_checkpoint.json"))
    runtime.write_report(manifest.to_dict(),
                         os.path.join(out, "sft_manifest.json"))
    print(f"sft done: final loss {manifest.loss_trace[-1][1]:.6g}, "
          f"checkpoint {manifest.checkpoint_hash[:12]}")
    return EXIT_OK


def cmd_train_grl(args) -> int:
    cfg = _load_cfg(args)
    model = _load_model(args)
    model, manifest = runtime.train_grl(cfg, model)
    out = _out_dir(cfg)
    wm.save_checkpoint(model, os.path.join(out, "grl_checkpoint.json"))
    runtime.write_report(manifest.to_dict(),
                         os.path.join(out, "grl_manifest.json"))
    print(f"grl done: final loss {manifest.loss_trace[-1][1]:.6g}, "
          f"checkpoint {manifest.checkpoint_hash[:12]}")
    return EXIT_OK


def cmd_plan(args) -> int:
    cfg = _load_cfg(args)
    model = _load_model(args)
    world = runtime.build_world(cfg)
    plan = runtime.plan_pair(model, world, args.start, args.goal,
                             cfg.eval.horizon, cfg.cem, seed=cfg.seed)
    doc = {"start": args.start, "goal": args.goal,
           "horizon": cfg.eval.horizon, "actions": plan}
    runtime.write_report(doc, os.path.join(_out_dir(cfg), "plan.json"))
    print(json.dumps(doc, sort_keys=True))
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _load_cfg(args)
    model = _load_model(args)
    report = runtime.evaluate(cfg, model)
    runtime.write_report(report, os.path.join(_out_dir(cfg), "eval.json"))
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK


def cmd_sweep_energy(args) -> int:
    cfg = _load_cfg(args)
    model = _load_model(args)
    path = os.path.join(_out_dir(cfg), "landscape.csv")
    runtime.run_sweep(cfg, model, path)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_delta_hyp(args) -> int:
    cfg = _load_cfg(args)
    model = _load_model(args)
    path = os.path.join(_out_dir(cfg), "delta.csv")
    report = runtime.run_delta(cfg, model, path,
                               num_quadruples=args.num_quadruples)
    print(f"wrote {path}: normalized mean delta "
          f"{report.normalized_mean:.6g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geoplan",
        description="Hyperbolic-latent world model: train, plan, diagnose.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, checkpoint=False):
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None, help="output directory")
        if checkpoint:
            p.add_argument("--checkpoint", required=True)

    common(sub.add_parser("gen-data", help="write a JSONL dataset"))
    common(sub.add_parser("train-sft", help="supervised training stage"))
    common(sub.add_parser("train-grl",
                          help="refinement stage from a checkpoint"),
           checkpoint=True)
    p_plan = sub.add_parser("plan", help="plan one start/goal pair")
    common(p_plan, checkpoint=True)
    p_plan.add_argument("--start", type=int, default=0)
    p_plan.add_argument("--goal", type=int, required=True)
    common(sub.add_parser("eval", help="held-out metric evaluation"),
           checkpoint=True)
    common(sub.add_parser("sweep-energy", help="energy landscape CSV"),
           checkpoint=True)
    p_delta = sub.add_parser("delta-hyp", help="four-point slimness CSV")
    common(p_delta, checkpoint=True)
    p_delta.add_argument("--num-quadruples", type=int, default=10000)
    return parser


_COMMANDS = {
    "gen-data": cmd_gen_data,
    "train-sft": cmd_train_sft,
    "train-grl": cmd_train_grl,
    "plan": cmd_plan,
    "eval": cmd_eval,
    "sweep-energy": cmd_sweep_energy,
    "delta-hyp": cmd_delta_hyp,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except runtime.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except runtime.NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
