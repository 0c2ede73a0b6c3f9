"""Command-line entry point: ``easpectral <experiment> [--config f] [--seed s] [--out d] [--threads k]``.

Exit codes: 0 ok, 2 config error, 3 I/O error, 4 counterexample or replay
mismatch.  Errors are reported on stderr as one JSON record.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .experiments import (
    EXPERIMENTS,
    ConfigError,
    config_from_mapping,
    config_from_meta,
    load_config,
    read_meta,
    run,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_COUNTEREXAMPLE = 4


def _error(code: int, kind: str, message: str) -> int:
    print(json.dumps({"status": "error", "kind": kind, "exit_code": code, "message": message}), file=sys.stderr)
    return code


def _common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, help="master seed (non-negative decimal)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--threads", type=int, help="worker threads; never changes results")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="easpectral", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat TOML config file")
        _common(p)
    p = sub.add_parser("replay", help="re-run an experiment from its .meta.json and compare artifacts")
    p.add_argument("metadata")
    p.add_argument("--config", dest="metadata_opt", help="alias for the positional metadata path")
    _common(p)
    return ap


def _overrides(args) -> dict:
    out = {}
    for k in ("seed", "out", "threads"):
        v = getattr(args, k)
        if v is not None:
            out[k] = v
    return out


def _run_experiment(args) -> int:
    if args.config is not None:
        cfg = load_config(args.config, args.command)
        data = cfg.to_dict()
    else:
        data = {"experiment": args.command}
    data.update(_overrides(args))
    cfg = config_from_mapping(data, args.command)
    outcome, meta_path = run(cfg)
    print(json.dumps({"status": "counterexample" if outcome.counterexample else "ok", "meta": str(meta_path),
                      **outcome.summary}))
    return EXIT_COUNTEREXAMPLE if outcome.counterexample else EXIT_OK


def _replay(args) -> int:
    path = Path(args.metadata_opt or args.metadata)
    meta = read_meta(path)
    cfg = config_from_meta(meta)
    data = cfg.to_dict()
    data["out"] = str(path.parent / "replay")
    data.update(_overrides(args))
    cfg = config_from_mapping(data)
    outcome, meta_path = run(cfg)
    new = json.loads(meta_path.read_text())["artifacts"]
    if cfg.seed != meta["config"]["seed"]:
        print(json.dumps({"status": "ok", "meta": str(meta_path), "note": "seed changed, artifacts not compared"}))
        return EXIT_OK
    diff = sorted(k for k in set(new) | set(meta["artifacts"]) if new.get(k) != meta["artifacts"].get(k))
    if diff:
        print(json.dumps({"status": "mismatch", "meta": str(meta_path), "differing": diff}))
        return EXIT_COUNTEREXAMPLE
    print(json.dumps({"status": "identical", "meta": str(meta_path), "artifacts": sorted(new)}))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "replay":
            return _replay(args)
        return _run_experiment(args)
    except ConfigError as exc:
        return _error(EXIT_CONFIG, "config", str(exc))
    except (OSError, json.JSONDecodeError) as exc:
        return _error(EXIT_IO, "io", str(exc))


if __name__ == "__main__":
    sys.exit(main())
