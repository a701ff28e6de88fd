"""Deterministic run artifacts: CSV tables and a JSON report.

All writers consume the plain payload dictionaries the service returns and
emit byte-stable files: fixed column orders, shortest round-trip float
formatting (``repr``), newline ``\\n``.  Identical payloads therefore yield
identical files, making artifacts diff-able across runs and machines.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_rows(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="\n") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_profiles(path, payload: dict) -> Path:
    """Full state table: one row per snapshot time and cell.

    Columns: t_s, z_m, each solid, each soluble, total solids X, water W.
    The first and last cell of each snapshot are the effluent and underflow
    pipe states just outside the vessel.
    """
    path = Path(path)
    header = (["t_s", "z_m"] + list(payload["solid_names"])
              + list(payload["soluble_names"]) + ["X", "W"])

    def rows():
        for ti, t in enumerate(payload["times_s"]):
            solids = payload["solids"][ti]
            solubles = payload["solubles"][ti]
            water = payload["water"][ti]
            for ci, z in enumerate(payload["z_centers"]):
                x_total = sum(solids[ci])
                yield ([t, z] + list(solids[ci]) + list(solubles[ci])
                       + [x_total, water[ci]])

    _write_rows(path, header, rows())
    return path


def write_outputs(path, payload: dict) -> Path:
    """Outlet time series: effluent and underflow states plus bulk flows.

    Columns: t_s, per-solid effluent and underflow concentrations, the same
    for solubles, then Q_f, Q_e, Q_u in m^3/s.
    """
    path = Path(path)
    header = ["t_s"]
    for kind in ("e", "u"):
        header += [f"{name}_{kind}" for name in payload["solid_names"]]
    for kind in ("e", "u"):
        header += [f"{name}_{kind}" for name in payload["soluble_names"]]
    header += ["Q_f", "Q_e", "Q_u"]

    def rows():
        for ti, t in enumerate(payload["times_s"]):
            solids = payload["solids"][ti]
            solubles = payload["solubles"][ti]
            yield ([t] + list(solids[0]) + list(solids[-1])
                   + list(solubles[0]) + list(solubles[-1])
                   + [payload["feed_flow"][ti], payload["effluent_flow"][ti],
                      payload["underflow"][ti]])

    _write_rows(path, header, rows())
    return path


def write_report(path, payload: dict, config: dict | None = None) -> Path:
    """Machine-readable run summary (stepping stats, audit, settings)."""
    path = Path(path)
    body = {"report": payload["report"], "scenario": payload["name"]}
    if config is not None:
        body["config"] = config
    with open(path, "w", newline="\n") as handle:
        json.dump(body, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return path


def write_convergence(path, payload: dict) -> Path:
    """Refinement table: one row per grid, error/order pairs per time."""
    path = Path(path)
    hours = [t / 3600.0 for t in payload["times_s"]]
    header = ["N"]
    for h in hours:
        header += [f"e_rel_{h:g}h", f"theta_{h:g}h"]
    header.append("cpu_s")

    def rows():
        for ni, n in enumerate(payload["n_values"]):
            row = [n]
            for ti in range(len(hours)):
                row += [payload["errors"][ti][ni], payload["orders"][ti][ni]]
            row.append(payload["cpu_seconds"][ni])
            yield row
        reference = [payload["reference_cells"]]
        reference += [None, None] * len(hours)
        reference.append(payload["cpu_seconds"][-1])
        yield reference

    _write_rows(path, header, rows())
    return path


def write_cfl_curve(path, payload: dict) -> Path:
    """Stability-budget curve: dz against both admissible steps."""
    path = Path(path)
    rows = ([n, dz, dt_cs, dt_xp] for n, dz, dt_cs, dt_xp in
            zip(payload["n_values"], payload["dz"], payload["dt_cs"],
                payload["dt_xp"]))
    _write_rows(path, ["N", "dz_m", "dt_cs_s", "dt_xp_s"], rows)
    return path


def write_comparison(directory, payload: dict) -> tuple[Path, Path]:
    """Paired profiles of both schemes plus their distance per time."""
    directory = Path(directory)
    names = list(payload["solid_names"]) + list(payload["soluble_names"])
    profile_header = ["t_s", "z_m"]
    for name in names:
        profile_header += [f"{name}_cs", f"{name}_xp"]

    def profile_rows():
        for ti, t in enumerate(payload["probe_times_s"]):
            cs = [list(map(list, payload["cs_solids"][ti])),
                  list(map(list, payload["cs_solubles"][ti]))]
            xp = [list(map(list, payload["xp_solids"][ti])),
                  list(map(list, payload["xp_solubles"][ti]))]
            for ci, z in enumerate(payload["z_centers"]):
                row = [t, z]
                for block in range(2):
                    for a, b in zip(cs[block][ci], xp[block][ci]):
                        row += [a, b]
                yield row

    profiles = directory / "compare_profiles.csv"
    _write_rows(profiles, profile_header, profile_rows())

    distance_header = ["t_s"] + [f"dist_{n}" for n in names] + ["dist_total"]

    def distance_rows():
        for ti, t in enumerate(payload["probe_times_s"]):
            yield ([t] + list(payload["component_distances"][ti])
                   + [payload["distances"][ti]])

    distances = directory / "compare_distances.csv"
    _write_rows(distances, distance_header, distance_rows())
    return profiles, distances
