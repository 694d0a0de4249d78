"""Command-line client for the compute engine.

Subcommands: spectrum, dichroism, limit-study, verify, serve.  By default the
run executes in-process through the same orchestration layer the service
exposes; with --server URL the request is posted to a running service
instance instead and the returned rows are written locally, byte-identically.

Exit codes: 0 success, 1 configuration/validation error, 2 numerical
non-convergence (or failed verification), 3 internal error.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .config import ConfigError, RunConfig, parse_config
from .matrix import UnconvergedError
from .output import render_csv, render_json, write_result
from .runner import RunResult, run_dichroism, run_limit_study, run_spectrum, run_verify

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_UNCONVERGED = 2
EXIT_INTERNAL = 3

_RUNNERS = {
    "spectrum": run_spectrum,
    "dichroism": run_dichroism,
    "limit-study": run_limit_study,
}


def _load_config(path: str | None) -> RunConfig:
    if path is None:
        cfg = RunConfig()
        cfg.validate()
        return cfg
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    return parse_config(text)


def _config_payload(cfg: RunConfig) -> dict:
    return {
        "beam": {"l": cfg.l, "k_rho": cfg.k_rho, "k_rho_out": cfg.k_rho_out},
        "transition": {"a": cfg.a, "n_initial": cfg.n_initial,
                       "m_initial": cfg.m_initial, "n_final": cfg.n_final,
                       "alpha": cfg.alpha},
        "geometry": {"R0": list(cfg.R0), "cluster_radii": list(cfg.cluster_radii),
                     "n_samples": cfg.n_samples},
        "window": {"l_min": cfg.l_min, "l_max": cfg.l_max,
                   "window_tail_tol": cfg.window_tail_tol},
        "tolerances": {"quad_tol": cfg.quad_tol, "direct_tol": cfg.direct_tol,
                       "tail_tol": cfg.tail_tol},
        "truncation": {"P": cfg.P, "r_max": cfg.r_max},
        "run": {"selection_sign": cfg.selection_sign},
    }


def _remote_run(server: str, subcommand: str, cfg: RunConfig, threads: int,
                allow_unconverged: bool, level: str | None = None) -> RunResult:
    import httpx

    body: dict = {"config": _config_payload(cfg), "threads": threads}
    if subcommand == "verify":
        body["level"] = level
    else:
        body["allow_unconverged"] = allow_unconverged
    url = f"{server.rstrip('/')}/{subcommand}"
    resp = httpx.post(url, json=body, timeout=None)
    if resp.status_code == 409:
        raise UnconvergedError(resp.json().get("detail", "unconverged"))
    if resp.status_code == 422:
        raise ConfigError(str(resp.json().get("detail", "invalid request")))
    resp.raise_for_status()
    data = resp.json()
    return RunResult(subcommand=data["meta"]["subcommand"], meta=data["meta"],
                     columns=tuple(data["columns"]), rows=data["rows"],
                     summary=data["summary"], all_converged=data["all_converged"])


def _emit(result: RunResult, out: str | None, fmt: str) -> None:
    if out:
        write_result(result, out, fmt)
    else:
        sys.stdout.write(render_csv(result) if fmt == "csv" else render_json(result))


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="run configuration file")
    p.add_argument("--out", metavar="PATH", help="output file (stdout if omitted)")
    p.add_argument("--format", choices=("csv", "json"), default=None,
                   help="output format (default: config [output] format)")
    p.add_argument("--threads", type=int, default=1, metavar="N",
                   help="worker threads for sweep points")
    p.add_argument("--allow-unconverged", action="store_true",
                   help="emit results even if some amplitudes are flagged unconverged")
    p.add_argument("--server", metavar="URL",
                   help="post the run to a service instance instead of computing in-process")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vortexoam",
        description="OAM transfer from electron vortex beams to displaced atoms")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, helptext in (
        ("spectrum", "outgoing-OAM weight tables over displacement points"),
        ("dichroism", "cluster-averaged dichroic signal curve"),
        ("limit-study", "off-channel weight along a displacement sequence to 0"),
    ):
        p = sub.add_parser(name, help=helptext)
        _add_common(p)
    pv = sub.add_parser("verify", help="self-test: analytic identities and oracle comparison")
    _add_common(pv)
    pv.add_argument("--level", choices=("quick", "full"), default="quick")
    ps = sub.add_parser("serve", help="run the HTTP compute service")
    ps.add_argument("--host", default="127.0.0.1")
    ps.add_argument("--port", type=int, default=8000)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.subcommand == "serve":
        import uvicorn

        from .service import app
        uvicorn.run(app, host=args.host, port=args.port)
        return EXIT_OK
    try:
        cfg = _load_config(args.config)
        fmt = args.format or cfg.format
        if args.server:
            result = _remote_run(args.server, args.subcommand, cfg, args.threads,
                                 args.allow_unconverged,
                                 getattr(args, "level", None))
        elif args.subcommand == "verify":
            result = run_verify(cfg, args.level, args.threads)
        else:
            result = _RUNNERS[args.subcommand](cfg, args.threads)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, ZeroDivisionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UnconvergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNCONVERGED
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL

    if args.subcommand == "verify":
        if args.out:
            write_result(result, args.out, fmt)
        for line in result.summary:
            print(line)
        return EXIT_OK if result.all_converged else EXIT_UNCONVERGED
    if not result.all_converged and not args.allow_unconverged:
        print("error: unconverged amplitudes present "
              "(rerun with --allow-unconverged to emit anyway)", file=sys.stderr)
        return EXIT_UNCONVERGED
    _emit(result, args.out, fmt)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
