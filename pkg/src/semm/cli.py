"""Command-line front end: a thin client of the service layer.

By default requests are handled in-process (no server needed); pass
--server URL to talk to a running instance over HTTP instead.  Exit codes:
0 success, 1 runtime failure, 2 invalid input or config.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import pydantic

from . import __version__, reports
from .config import load_config, request_from_config
from .errors import ValidationError
from .service import handlers
from .service import schemas as sm

COMMANDS = ("simulate", "sweep", "suppression", "tomography",
            "cancel-solve", "noise", "table")

EXIT_OK, EXIT_RUNTIME, EXIT_INVALID = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semm",
        description="Stark echo modulation memory simulator",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML run configuration")
    common.add_argument("--seed", type=int, default=None, help="override config seed")
    common.add_argument("--output", type=Path, default=None, help="output directory")
    common.add_argument("--format", choices=("csv", "json"), default=None,
                        help="trace file format (default csv)")
    common.add_argument("--dry-run", action="store_true",
                        help="validate config without simulating")
    common.add_argument("--server", default=None,
                        help="run against a remote service, e.g. http://host:8000")

    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=f"run the {name} operation")

    serve = sub.add_parser("serve", help="launch the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def _dispatch(command: str, request, server: str | None):
    if server is None:
        return handlers.HANDLERS[command](request)
    import httpx

    url = server.rstrip("/") + "/" + command
    resp = httpx.post(url, json=request.model_dump(mode="json"), timeout=None)
    if resp.status_code in (400, 422):
        raise ValidationError(resp.json().get("detail", resp.text))
    resp.raise_for_status()
    return handlers.RESPONSE_TYPES[command].model_validate(resp.json())


def _validate(command: str, request, server: str | None) -> sm.ValidateResponse:
    payload = sm.ValidateRequest(command=command,
                                 request=request.model_dump(mode="json"))
    if server is None:
        return handlers.handle_validate(payload)
    import httpx

    resp = httpx.post(server.rstrip("/") + "/validate",
                      json=payload.model_dump(mode="json"), timeout=None)
    resp.raise_for_status()
    return sm.ValidateResponse.model_validate(resp.json())


def _write(path: Path, content: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(content)
    print(f"wrote {path}")


def _report_json(resp) -> str:
    return reports.json_report(resp.model_dump(mode="json"))


def _emit(command: str, resp, out_dir: Path, fmt: str) -> None:
    if command == "simulate":
        for trace in resp.traces:
            if fmt == "json":
                payload = reports.json_report(trace.model_dump(mode="json"))
                _write(out_dir / f"{trace.label}.json", payload)
            else:
                _write(out_dir / f"{trace.label}.csv", reports.trace_csv(trace))
        _write(out_dir / "simulate_report.json", _report_json(resp))
    elif command == "sweep":
        _write(out_dir / "sweep.csv", reports.sweep_csv(resp.points))
        _write(out_dir / "sweep_report.json", _report_json(resp))
    elif command == "suppression":
        _write(out_dir / "suppression_report.json", _report_json(resp))
        print(f"mu = {resp.mu:.6g} over {resp.shots} shot(s)")
    elif command == "tomography":
        _write(out_dir / "tomography_report.json", _report_json(resp))
        print(f"average fidelity = {resp.average_fidelity:.6f}")
    elif command == "cancel-solve":
        _write(out_dir / "cancel_solve_report.json", _report_json(resp))
        if resp.found:
            print(f"cancellation root: E*Ts = {resp.root!r} (V/cm)*s")
        else:
            print(f"no root found; min transform {resp.min_value:.6g} "
                  f"at x = {resp.x_at_min:.6g}")
    elif command == "noise":
        sys.stdout.write(reports.noise_text(resp))
        _write(out_dir / "noise_report.json", _report_json(resp))
    elif command == "table":
        sys.stdout.write(reports.table_text(resp))
        _write(out_dir / "table_report.json", _report_json(resp))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "serve":
        import uvicorn

        from .service.app import create_app

        uvicorn.run(create_app(), host=args.host, port=args.port)
        return EXIT_OK

    try:
        cfg = {}
        if args.config is not None:
            cfg = load_config(args.config)
        elif args.command not in ("noise", "table"):
            raise ValidationError(f"{args.command} requires --config")
        request = request_from_config(args.command, cfg, seed=args.seed)
    except (ValidationError, pydantic.ValidationError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INVALID

    try:
        check = _validate(args.command, request, args.server)
        if not check.ok:
            print(f"error: {check.detail}", file=sys.stderr)
            return EXIT_INVALID
        if args.dry_run:
            print(f"{args.command}: {check.detail}")
            return EXIT_OK
        resp = _dispatch(args.command, request, args.server)
        out_dir = args.output or Path(cfg.get("output", "."))
        fmt = args.format or cfg.get("format", "csv")
        _emit(args.command, resp, out_dir, fmt)
        return EXIT_OK
    except (ValidationError, pydantic.ValidationError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as err:  # runtime failure contract: exit 1
        print(f"runtime error: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
