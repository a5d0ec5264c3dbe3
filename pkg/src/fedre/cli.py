"""Command-line front end.

Verbs:
  run       execute a config's seeds and export per-round metrics
  sweep     re-run a config once per value of one (dotted) config key
  invert    train briefly, then score the reconstruction attack
  validate  parse a config and echo the effective settings

FEDRE_OUTPUT_DIR, when set, re-roots every output file into that directory.
"""

import argparse
import json
import os
import sys
from pathlib import Path

from .config import ConfigError, config_to_dict, load_config
from .runner import export_summary, run_experiment, run_inversion_study, run_sweep

OUTPUT_DIR_ENV = "FEDRE_OUTPUT_DIR"


def resolve_output_path(path):
    override = os.environ.get(OUTPUT_DIR_ENV)
    path = Path(path)
    return Path(override) / path.name if override else path


def _format_from(path, explicit):
    if explicit:
        return explicit
    return "csv" if str(path).endswith(".csv") else "jsonl"


def _print_summary(summary):
    print(
        f"final mean accuracy {100 * summary.mean_acc:.2f}%"
        f" +- {100 * summary.std_acc:.2f} over {len(summary.seeds)} seed(s);"
        f" upload {summary.upload_total} / broadcast {summary.broadcast_total}"
        " scalars per seed"
    )
    if summary.failed_seeds:
        print(f"failed seeds: {summary.failed_seeds}")


def cmd_run(args):
    cfg = load_config(args.config)
    out = resolve_output_path(args.output or cfg.output_path)
    summary = run_experiment(cfg)
    fmt = _format_from(out, args.format)
    export_summary(summary, fmt, out)
    _print_summary(summary)
    print(f"wrote {fmt} metrics to {out}")
    return 0


def cmd_sweep(args):
    cfg = load_config(args.config)  # validate before sweeping
    with open(args.config, encoding="utf-8") as fh:
        base = json.load(fh)
    values = [json.loads(v) for v in args.values]
    out_base = resolve_output_path(args.output or cfg.output_path)
    for value, sweep_cfg, summary in run_sweep(base, args.key, values):
        tag = str(value).replace("/", "_").replace(" ", "")
        out = out_base.with_name(f"{out_base.stem}_{args.key.replace('.', '-')}-{tag}{out_base.suffix}")
        fmt = _format_from(out, args.format)
        export_summary(summary, fmt, out)
        print(f"{args.key}={value}: ", end="")
        _print_summary(summary)
        print(f"  wrote {out}")
    return 0


def cmd_invert(args):
    cfg = load_config(args.config)
    study = run_inversion_study(cfg)
    out = resolve_output_path(args.output or cfg.output_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        for record in study.records():
            fh.write(json.dumps(record) + "\n")
    for kind in ("raw", "prototype", "entangled"):
        print(
            f"{kind:>10}: mean mse {study.mean_mse[kind]:.4f}, "
            f"mean psnr {study.mean_psnr[kind]:.2f} dB"
        )
    print(f"wrote {len(study.results)} attack records to {out}")
    return 0


def cmd_validate(args):
    cfg = load_config(args.config)
    print(f"{args.config} is valid; effective settings:")
    print(json.dumps(config_to_dict(cfg), indent=2))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fedre",
        description="Desk-scale federated learning with entangled representation uploads.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a config and export metrics")
    p.add_argument("config")
    p.add_argument("--output", help="override the config's output path")
    p.add_argument("--format", choices=("jsonl", "csv"))
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="re-run a config over values of one key")
    p.add_argument("config")
    p.add_argument("--key", required=True, help="dotted config key, e.g. partition.alpha")
    p.add_argument("--values", required=True, nargs="+", help="JSON literals")
    p.add_argument("--output", help="override the config's output path")
    p.add_argument("--format", choices=("jsonl", "csv"))
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("invert", help="run the input-reconstruction study")
    p.add_argument("config")
    p.add_argument("--output", help="override the config's output path")
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("validate", help="check a config file")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
