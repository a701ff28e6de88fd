"""Command-line entry point.

Every command is a thin HTTP client of the service module: by default the
app is mounted in-process (no server required), while ``--server URL``
points the same requests at a remote instance.  Artifacts are always
written locally from the JSON payloads.

Durations accept ``9h``, ``30min``, ``120s``, or a bare number meaning
hours.  Set ``SETTLESIM_LOG_LEVEL`` to change logging verbosity.
"""
from __future__ import annotations

import argparse
import asyncio
import json
import logging
import os
import sys
from pathlib import Path

import httpx

from . import __version__, artifacts

log = logging.getLogger(__name__)

_DURATION_UNITS = {"h": 3600.0, "hour": 3600.0, "hours": 3600.0,
                   "min": 60.0, "m": 60.0, "s": 1.0, "sec": 1.0}


def parse_duration(text: str) -> float:
    """Duration in seconds from '9h' / '30min' / '120s' / bare hours."""
    text = text.strip().lower()
    for suffix in sorted(_DURATION_UNITS, key=len, reverse=True):
        if text.endswith(suffix):
            number = text[: -len(suffix)].strip()
            try:
                return float(number) * _DURATION_UNITS[suffix]
            except ValueError:
                break
    try:
        return float(text) * 3600.0
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"cannot parse duration {text!r}; use forms like 9h, 30min, 120s")


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated integers, got {text!r}")


def _duration_list(text: str) -> list[float]:
    return [parse_duration(part) for part in text.split(",") if part.strip()]


def _float_list(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated numbers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="settlesim",
        description="one-dimensional reactive settling simulations for "
                    "clarifier-thickener vessels")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    parser.add_argument("--server", default=None,
                        help="URL of a running service; default runs "
                             "the app in-process")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(cmd: argparse.ArgumentParser, cells_default=128) -> None:
        cmd.add_argument("--scenario", default="example1",
                         help="builtin name (example1..example5) or a JSON "
                              "spec file path")
        cmd.add_argument("--out", type=Path, default=Path("."),
                         help="directory for artifacts (created if missing)")
        cmd.add_argument("--z-mode", choices=("none", "ramp"), default=None,
                         help="override the biomass growth cap near the "
                              "packing limit")
        cmd.add_argument("--diffusion", type=_float_list, default=None,
                         metavar="D1,D2,D3",
                         help="override soluble diffusion coefficients "
                              "[m^2/s]")
        cmd.add_argument("--no-reactions", action="store_true",
                         help="disable the reaction terms for this run")

    sim = sub.add_parser("simulate", help="run one scenario and write "
                                          "profile/output tables")
    common(sim)
    sim.add_argument("--method", choices=("cs", "xp"), default="cs")
    sim.add_argument("--cells", type=int, default=128, metavar="N")
    sim.add_argument("--horizon", type=parse_duration, default="9h")
    sim.add_argument("--cadence", type=parse_duration, default=None,
                     help="snapshot spacing (recorded at the first step "
                          "past each tick)")
    sim.add_argument("--safety", type=float, default=None,
                     help="fraction of the stability budget to use "
                          "(default 0.95)")
    sim.add_argument("--debug-invariants", action="store_true",
                     help="abort the run on the first admissible-region "
                          "violation")

    conv = sub.add_parser("converge", help="refinement study against a "
                                           "fine reference")
    common(conv)
    conv.add_argument("--method", choices=("cs", "xp"), default="cs")
    conv.add_argument("--cells", type=_int_list, default=[16, 32, 64, 128],
                      metavar="N1,N2,...")
    conv.add_argument("--times", type=_duration_list, default="3h,6h,9h",
                      metavar="T1,T2,...")
    conv.add_argument("--reference", type=int, default=1024,
                      help="reference grid; every --cells entry must "
                           "divide it")
    conv.add_argument("--safety", type=float, default=None)

    curve = sub.add_parser("cfl-curve", help="tabulate both stability "
                                             "budgets over a grid family")
    common(curve)
    curve.add_argument("--cells", type=_int_list,
                       default=[40, 80, 160, 400, 1000, 2000, 4000],
                       metavar="N1,N2,...")
    curve.add_argument("--horizon", type=parse_duration, default="9h",
                       help="horizon whose schedules bound the budgets")
    curve.add_argument("--safety", type=float, default=1.0)

    comp = sub.add_parser("compare-xp", help="run both schemes and write "
                                             "paired profiles")
    common(comp)
    comp.add_argument("--cells", type=int, default=128, metavar="N")
    comp.add_argument("--horizon", type=parse_duration, default="9h")
    comp.add_argument("--cadence", type=parse_duration, default=None,
                      help="additional comparison times before the horizon")
    comp.add_argument("--safety", type=float, default=None)

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


class _InProcessTransport(httpx.BaseTransport):
    """Serves requests from the ASGI app without a socket.

    Each request runs the app on a private event loop and returns a fully
    buffered response, which is all the CLI needs (no streaming).
    """

    def __init__(self, app) -> None:
        self._asgi = httpx.ASGITransport(app=app)

    def handle_request(self, request: httpx.Request) -> httpx.Response:
        async def round_trip() -> httpx.Response:
            upstream = await self._asgi.handle_async_request(request)
            content = await upstream.aread()
            await upstream.aclose()
            return httpx.Response(upstream.status_code,
                                  headers=upstream.headers, content=content)

        return asyncio.run(round_trip())


def _client(server: str | None) -> httpx.Client:
    if server is not None:
        return httpx.Client(base_url=server, timeout=None)
    from .service import app
    return httpx.Client(transport=_InProcessTransport(app),
                        base_url="http://settlesim", timeout=None)


def _scenario_field(args) -> str | dict:
    name = args.scenario
    if name.endswith(".json") or os.sep in name or os.path.exists(name):
        with open(name) as handle:
            return json.load(handle)
    return name


def _overrides(args) -> dict:
    payload = {}
    if args.z_mode is not None:
        payload["z_mode"] = args.z_mode
    if args.diffusion is not None:
        payload["diffusion"] = args.diffusion
    if args.no_reactions:
        payload["reactions_enabled"] = False
    return payload


def _post(client: httpx.Client, path: str, payload: dict) -> dict:
    response = client.post(path, json=payload)
    if response.status_code != 200:
        try:
            detail = response.json().get("detail", response.text)
        except Exception:
            detail = response.text
        print(f"error ({response.status_code}): {detail}", file=sys.stderr)
        raise SystemExit(2)
    return response.json()


def _outdir(args) -> Path:
    args.out.mkdir(parents=True, exist_ok=True)
    return args.out


def _run_simulate(args, client: httpx.Client) -> int:
    payload = {"scenario": _scenario_field(args), "method": args.method,
               "cells": args.cells, "horizon_s": args.horizon,
               "strict_invariants": args.debug_invariants,
               **_overrides(args)}
    if args.cadence is not None:
        payload["cadence_s"] = args.cadence
    if args.safety is not None:
        payload["safety"] = args.safety
    body = _post(client, "/simulate", payload)
    out = _outdir(args)
    artifacts.write_profiles(out / "profiles.csv", body)
    artifacts.write_outputs(out / "outputs.csv", body)
    artifacts.write_report(out / "report.json", body, config=payload)
    report = body["report"]
    print(f"{body['name']}: {report['steps']} steps of "
          f"<= {report['dt_limit_s']:.6g} s, mass residual "
          f"{report['mass_residual']:.3e}, "
          f"{report['violations']} invariant violation(s)")
    print(f"wrote {out / 'profiles.csv'}, {out / 'outputs.csv'}, "
          f"{out / 'report.json'}")
    if report["violations"]:
        print("error: the stability budget should forbid invariant "
              "violations; please report this run", file=sys.stderr)
        return 1
    return 0


def _run_converge(args, client: httpx.Client) -> int:
    payload = {"scenario": _scenario_field(args), "method": args.method,
               "n_values": args.cells, "times_s": args.times,
               "reference_cells": args.reference, **_overrides(args)}
    if args.safety is not None:
        payload["safety"] = args.safety
    body = _post(client, "/converge", payload)
    out = _outdir(args)
    path = artifacts.write_convergence(out / "convergence.csv", body)
    hours = ", ".join(f"{t / 3600:g} h" for t in body["times_s"])
    print(f"{body['name']}: errors vs N_ref = {body['reference_cells']} "
          f"at {hours}")
    for ni, n in enumerate(body["n_values"]):
        errs = ", ".join(f"{body['errors'][ti][ni]:.4f}"
                         for ti in range(len(body["times_s"])))
        print(f"  N = {n:4d}: {errs}")
    print(f"wrote {path}")
    return 0


def _run_cfl_curve(args, client: httpx.Client) -> int:
    payload = {"scenario": _scenario_field(args), "cell_counts": args.cells,
               "horizon_s": args.horizon, "safety": args.safety,
               **_overrides(args)}
    if args.no_reactions:
        payload.pop("reactions_enabled", None)
        payload["with_reactions"] = False
    body = _post(client, "/cfl-curve", payload)
    out = _outdir(args)
    path = artifacts.write_cfl_curve(out / "cfl_curve.csv", body)
    print(f"{body['name']}: dt range [{min(body['dt_cs']):.4g}, "
          f"{max(body['dt_cs']):.4g}] s over dz in "
          f"[{min(body['dz']):.4g}, {max(body['dz']):.4g}] m")
    print(f"wrote {path}")
    return 0


def _run_compare(args, client: httpx.Client) -> int:
    probes = []
    if args.cadence is not None:
        tick = args.cadence
        while tick < args.horizon:
            probes.append(tick)
            tick += args.cadence
    payload = {"scenario": _scenario_field(args), "cells": args.cells,
               "horizon_s": args.horizon, "probe_times_s": probes,
               **_overrides(args)}
    if args.safety is not None:
        payload["safety"] = args.safety
    body = _post(client, "/compare-xp", payload)
    out = _outdir(args)
    profiles, distances = artifacts.write_comparison(out, body)
    final = body["distances"][-1]
    print(f"{body['name']}: scheme distance {final:.4f} at "
          f"t = {body['probe_times_s'][-1] / 3600:g} h on {args.cells} cells")
    print(f"wrote {profiles}, {distances}")
    return 0


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=os.environ.get("SETTLESIM_LOG_LEVEL", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)

    if args.command == "serve":
        import uvicorn

        from .service import app
        uvicorn.run(app, host=args.host, port=args.port)
        return 0

    handlers = {"simulate": _run_simulate, "converge": _run_converge,
                "cfl-curve": _run_cfl_curve, "compare-xp": _run_compare}
    with _client(args.server) as client:
        return handlers[args.command](args, client)


if __name__ == "__main__":
    raise SystemExit(main())
