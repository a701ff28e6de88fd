"""HTTP endpoints: payload shapes, overrides, validation, error mapping."""
import numpy as np
import pytest
from fastapi.testclient import TestClient

import settlesim
from settlesim.service import create_app

HOUR = 3600.0


@pytest.fixture(scope="module")
def client():
    with TestClient(create_app()) as c:
        yield c


def test_health(client):
    body = client.get("/health").json()
    assert body == {"status": "ok", "version": settlesim.__version__}


def test_scenario_listing(client):
    names = client.get("/scenarios").json()["names"]
    assert names == [f"example{i}" for i in range(1, 6)]


def test_scenario_detail_and_404(client):
    spec = client.get("/scenarios/example1").json()
    assert spec["name"] == "example1"
    assert {"geometry", "feed_flow", "underflow", "kinetics",
            "initial", "material", "diffusion"} <= spec.keys()
    assert spec["kinetics"]["enabled"] is True
    missing = client.get("/scenarios/examplex")
    assert missing.status_code == 404
    assert "examplex" in missing.json()["detail"]


def test_simulate_happy_path(client):
    response = client.post("/simulate", json={
        "scenario": "example1", "cells": 16, "horizon_s": 600.0,
        "probe_times_s": [300.0, 600.0]})
    assert response.status_code == 200
    body = response.json()
    assert body["name"] == "example1"
    assert body["soluble_names"] == ["S_NO3", "S_S", "S_N2"]
    assert len(body["z_centers"]) == 18          # pipe cells included
    assert body["times_s"][0] == 0.0 and body["times_s"][-1] == 600.0
    assert len(body["solids"]) == len(body["times_s"])
    assert len(body["solids"][0]) == 18 and len(body["solids"][0][0]) == 2
    assert len(body["water"][0]) == 18
    assert body["probe_times_s"] == [300.0, 600.0]
    assert len(body["probe_solubles"]) == 2
    assert body["feed_flow"][0] == pytest.approx(0.125, rel=1e-12)
    assert body["effluent_flow"][0] == pytest.approx(420 / HOUR, rel=1e-12)
    report = body["report"]
    assert report["method"] == "cs" and report["cells"] == 16
    assert report["violations"] == 0
    assert report["mass_residual"] <= 1e-10
    assert report["steps"] > 0 and report["dt_limit_s"] > 0


def test_simulate_with_percentage_method(client):
    response = client.post("/simulate", json={
        "scenario": "example1", "method": "xp", "cells": 16,
        "horizon_s": 300.0})
    assert response.status_code == 200
    assert response.json()["report"]["method"] == "xp"


def test_simulate_reaction_override(client):
    request = {"scenario": "example1", "cells": 16, "horizon_s": 900.0}
    with_reactions = client.post("/simulate", json=request).json()
    without = client.post("/simulate", json=request
                          | {"reactions_enabled": False}).json()
    # disabling the kinetics drops the species roles with it
    assert with_reactions["soluble_names"] == ["S_NO3", "S_S", "S_N2"]
    assert without["soluble_names"] == ["S1", "S2", "S3"]
    final = lambda body: np.asarray(body["solubles"])[-1]
    # conversion adds gas beyond what transport alone moves around
    gas_gain = final(with_reactions)[:, 2] - final(without)[:, 2]
    assert gas_gain.max() > 1e-4
    assert np.abs(final(with_reactions) - final(without)).max() > 1e-2
    ramped = client.post("/simulate", json=request | {"z_mode": "ramp"})
    assert ramped.status_code == 200


def test_simulate_unknown_scenario_names_builtins(client):
    response = client.post("/simulate", json={
        "scenario": "examplex", "cells": 8, "horizon_s": 60.0})
    assert response.status_code == 400
    assert "example1" in response.json()["detail"]


def test_simulate_validation_guards(client):
    base = {"scenario": "example1", "horizon_s": 60.0}
    assert client.post("/simulate",
                       json=base | {"cells": 5000}).status_code == 422
    assert client.post("/simulate",
                       json=base | {"bogus_knob": 1}).status_code == 422
    assert client.post("/simulate", json={
        "scenario": "example1", "horizon_s": -5.0}).status_code == 422
    assert client.post("/simulate",
                       json=base | {"safety": 1.5}).status_code == 422


def test_simulate_accepts_inline_spec(client):
    spec = client.get("/scenarios/example1").json()
    spec["name"] = "mine"
    response = client.post("/simulate", json={
        "scenario": spec, "cells": 8, "horizon_s": 60.0})
    assert response.status_code == 200
    assert response.json()["name"] == "mine"


def test_converge_endpoint(client):
    response = client.post("/converge", json={
        "scenario": "example1", "n_values": [8, 16], "times_s": [600.0],
        "reference_cells": 32})
    assert response.status_code == 200
    body = response.json()
    assert body["errors"][0][1] < body["errors"][0][0]
    assert body["orders"][0][0] is None
    assert isinstance(body["orders"][0][1], float)
    assert len(body["component_names"]) == 5
    assert len(body["cpu_seconds"]) == 3


def test_cfl_curve_endpoint(client):
    body = client.post("/cfl-curve", json={
        "scenario": "example1", "cell_counts": [16, 32]}).json()
    assert body["dt_cs"][0] == pytest.approx(0.20077503233498947, rel=1e-9)
    assert all(isinstance(v, float) for v in body["dt_xp"])
    varying = client.post("/cfl-curve", json={
        "scenario": "example2", "cell_counts": [10], "horizon_s": 60.0}).json()
    assert varying["dt_xp"] == [None]


def test_compare_endpoint(client):
    response = client.post("/compare-xp", json={
        "scenario": "example1", "cells": 16, "horizon_s": 900.0,
        "probe_times_s": [450.0]})
    assert response.status_code == 200
    body = response.json()
    assert body["probe_times_s"] == [450.0, 900.0]
    assert len(body["distances"]) == 2
    assert all(d > 0.0 for d in body["distances"])
    assert body["cs_report"]["method"] == "cs"
    assert body["xp_report"]["method"] == "xp"
    assert len(body["cs_solids"]) == 2
