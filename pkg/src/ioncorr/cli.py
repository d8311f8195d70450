"""Command-line front end.

    ioncorr validate config.yaml
    ioncorr run config.yaml --threads 4
    ioncorr run out/run.manifest.json        # reproduce a previous run
    ioncorr preset fig2c --realizations 200

Failures print one JSON object ``{"error": <category>, "message": ...}``
on stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import yaml

from . import __version__
from .config import derived_quantities, load_config, to_document, with_overrides
from .errors import IonCorrError
from .output import OutputWriter, gnuplot_script, manifest
from .runner import (
    PRESETS,
    configs_from_preset_document,
    preset_configs,
    preset_document,
    run_config,
    run_preset,
)

log = logging.getLogger("ioncorr")

OUT_DIR_ENV = "IONCORR_OUT_DIR"
DEFAULT_OUT_DIR = "ioncorr_out"

EXIT_CODES = {"validation": 2, "parse": 2, "domain": 3, "divergent_limit": 3, "convergence": 3, "io": 4}


def _out_dir(flag, configured):
    return flag or configured or os.environ.get(OUT_DIR_ENV) or DEFAULT_OUT_DIR


def _read_manifest(path):
    """The parsed document if ``path`` holds a manifest, else ``None``."""
    try:
        doc = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except yaml.YAMLError:
        return None  # load_config reports the parse error with its position
    if isinstance(doc, dict) and "ioncorr_version" in doc:
        if doc["ioncorr_version"] != __version__:
            log.warning("manifest written by version %s, running %s", doc["ioncorr_version"], __version__)
        return doc
    return None


def _write_tables(writer, stem, tables, gnuplot):
    paths = []
    for suffix, table in tables.items():
        name = f"{stem}_{suffix}" if suffix else stem
        paths.append(writer.table(name, table))
        if gnuplot:
            x = table.columns[0]
            ys = [c for c in ("g2_zero", "g2", "g2_constructive", "g2_destructive", "q_over_s2_model")
                  if c in table.columns]
            if ys:
                writer.text(f"{name}.gp", gnuplot_script(f"{name}.csv", table, x, ys))
    return paths


def _run_preset_configs(name, configs, args):
    any_cfg = next(iter(configs.values()))
    writer = OutputWriter(_out_dir(args.out_dir, any_cfg.output.dir))
    tables = run_preset(name, configs, threads=args.threads)
    paths = _write_tables(writer, name, tables, args.gnuplot)
    writer.json(f"{name}.manifest.json", manifest(preset_document(name, configs), kind="preset"))
    return paths


def cmd_validate(args):
    cfg = load_config(args.config)
    cfg = with_overrides(cfg, seed=args.seed, realizations=args.realizations)
    echo = {"config": to_document(cfg), "derived": derived_quantities(cfg)}
    json.dump(echo, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def cmd_run(args):
    doc = _read_manifest(args.config)
    if doc is not None and "preset" in doc:
        name, configs = configs_from_preset_document(doc["preset"])
        configs = {k: with_overrides(c, seed=args.seed, realizations=args.realizations) for k, c in configs.items()}
        paths = _run_preset_configs(name, configs, args)
    else:
        cfg = with_overrides(load_config(args.config), seed=args.seed, realizations=args.realizations)
        writer = OutputWriter(_out_dir(args.out_dir, cfg.output.dir))
        tables = run_config(cfg, threads=args.threads)
        stem = cfg.output.name
        paths = _write_tables(writer, stem, tables, args.gnuplot or cfg.output.gnuplot)
        writer.json(f"{stem}.manifest.json", manifest(to_document(cfg), derived_quantities(cfg)))
    for p in paths:
        print(p)
    return 0


def cmd_preset(args):
    configs = preset_configs(args.name, seed=args.seed, realizations=args.realizations)
    for p in _run_preset_configs(args.name, configs, args):
        print(p)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="ioncorr", description="Photon statistics of light scattered by ion chains")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")
    common.add_argument("--realizations", type=int, default=None, help="Monte-Carlo realizations per point")
    common.add_argument("--threads", type=int, default=1, help="worker threads; results do not depend on it")
    common.add_argument("--out-dir", default=None, help=f"output directory (default: ${OUT_DIR_ENV} or ./{DEFAULT_OUT_DIR})")
    common.add_argument("--gnuplot", action="store_true", help="also write a gnuplot script per table")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="run a configuration file or manifest")
    p.add_argument("config")
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("preset", parents=[common], help="run a built-in figure preset")
    p.add_argument("name", choices=PRESETS)
    p.set_defaults(func=cmd_preset)
    p = sub.add_parser("validate", parents=[common], help="print the resolved configuration")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)
    return parser


def _fail(category, exc):
    payload = {"error": category, "message": str(exc)}
    for attr in ("field", "line", "column"):
        value = getattr(exc, attr, None)
        if value is not None:
            payload[attr] = value
    print(json.dumps(payload), file=sys.stderr)
    return EXIT_CODES.get(category, 1)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.threads < 1:
        return _fail("validation", ValueError("--threads must be positive"))
    try:
        return args.func(args)
    except IonCorrError as exc:
        return _fail(exc.category, exc)
    except OSError as exc:
        return _fail("io", exc)
    except Exception as exc:  # noqa: BLE001 - report, never hang or dump a traceback
        log.debug("unexpected failure", exc_info=True)
        return _fail("internal", exc)


if __name__ == "__main__":
    sys.exit(main())
