"""Command line entry point.

Exit codes: 0 success, 2 config error, 3 resonance or precondition error,
4 solver failure, 5 a scenario expectation was violated (files are written).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .atlas import WORKERS_ENV, NoSignChange, SolverError, workers_from_env
from .effective import ResonanceError
from .model import ChannelError
from .presets import PRESETS, get_preset
from .scenario import SCHEMA, ConfigError, PreconditionError, compare, load_config, run

EXIT_OK, EXIT_CONFIG, EXIT_PRECONDITION, EXIT_SOLVER, EXIT_EXPECTATION = 0, 2, 3, 4, 5

_ERRORS = (
    (ConfigError, EXIT_CONFIG),
    (ResonanceError, EXIT_PRECONDITION),
    (ChannelError, EXIT_PRECONDITION),
    (PreconditionError, EXIT_PRECONDITION),
    (NoSignChange, EXIT_SOLVER),
    (SolverError, EXIT_SOLVER),
)


def _error(exc: Exception, code: int) -> int:
    record = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    print(json.dumps(record), file=sys.stderr)
    return code


def _source(arg: str):
    """A config path, or ``preset:NAME``."""
    if arg.startswith("preset:"):
        return get_preset(arg.split(":", 1)[1])
    return arg


def _with_seed(source, seed):
    if seed is None:
        return source
    raw = load_config(source)
    raw["seed"] = seed
    return raw


def _cmd_run(args) -> int:
    source = _with_seed(_source(args.config), args.seed)
    name = source["name"] if isinstance(source, dict) else Path(args.config).stem
    out = Path(args.out) if args.out else Path("runs") / name
    manifest = run(source, out, workers=args.workers)
    for check in manifest["expectations"]:
        status = "PASS" if check["passed"] else "FAIL"
        print(f"{status} {check['kind']}: {json.dumps(check['observed'])}")
    print(f"wrote {len(manifest['outputs'])} file(s) + manifest.json to {out}")
    return EXIT_OK if manifest["passed"] else EXIT_EXPECTATION


def _cmd_compare(args) -> int:
    report = compare(_source(args.config), workers=args.workers)
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return EXIT_OK


def _cmd_preset(args) -> int:
    config = get_preset(args.name)
    if args.seed is not None:
        config["seed"] = args.seed
    if args.emit_config:
        text = json.dumps(config, indent=2)
        if args.out:
            Path(args.out).write_text(text + "\n", encoding="utf-8")
        else:
            print(text)
        return EXIT_OK
    args.config = f"preset:{args.name}"
    return _cmd_run(args)


def _cmd_list(args) -> int:
    for name, cfg in PRESETS.items():
        print(f"{name:6s}  {cfg['description']}")
    return EXIT_OK


def _cmd_schema(args) -> int:
    print(json.dumps(SCHEMA, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pairtunnel",
        description="Pair tunneling of SOC bosons in a driven non-Hermitian double well.",
        epilog=f"Worker count defaults to ${WORKERS_ENV} (1 if unset).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario config (path or preset:NAME)")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (default runs/<name>)")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--seed", type=int, default=None, help="recorded only; the core is deterministic")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("compare", help="exact vs effective dynamics report")
    p.add_argument("config")
    p.add_argument("--out", help="also write the JSON report here")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("preset", help="emit or run a figure preset")
    p.add_argument("name", choices=sorted(PRESETS))
    p.add_argument("--emit-config", action="store_true", help="print the config instead of running it")
    p.add_argument("--out", help="config file (with --emit-config) or output directory")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_preset)

    p = sub.add_parser("list-presets", help="list figure presets")
    p.set_defaults(func=_cmd_list)

    p = sub.add_parser("schema", help="print the config JSON schema")
    p.set_defaults(func=_cmd_schema)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "workers", None) is None and hasattr(args, "workers"):
        args.workers = workers_from_env()
    try:
        return args.func(args)
    except KeyError as exc:
        return _error(ConfigError(exc.args[0]), EXIT_CONFIG)
    except Exception as exc:
        for cls, code in _ERRORS:
            if isinstance(exc, cls):
                return _error(exc, code)
        raise


if __name__ == "__main__":
    sys.exit(main())
