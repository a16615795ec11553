import pytest
from fastapi.testclient import TestClient

from chflow.service.app import app

client = TestClient(app)

SMALL_CFG = """
grid.nx = 16
grid.ny = 16
potential.theta = 1.0
potential.theta0 = 2.0
mobility.form = nondegenerate
mobility.coeffs = 1.0, 0.5
mobility.b_min = 0.5
mobility.b_max = 1.5
init.kind = constant_noise
init.mean = 0.0
init.noise = 0.05
init.seed = 7
init.band_limit = 2
stepper.dt = 1e-3
run.T = 0.02
"""


class TestHealth:
    def test_health(self):
        resp = client.get("/health")
        assert resp.status_code == 200
        assert resp.json()["status"] == "ok"


class TestSimulate:
    def test_summary_and_ledger(self):
        resp = client.post("/simulate", json={"config": SMALL_CFG,
                                              "include_ledger": True})
        assert resp.status_code == 200
        data = resp.json()
        s = data["summary"]
        assert s["steps"] == 20
        assert s["t_end"] == pytest.approx(0.02)
        assert s["mass_drift_max"] <= 1e-12
        assert s["max_energy_rise"] <= 1e-9
        led = data["ledger"]
        assert led["columns"][0] == "t"
        assert len(led["rows"]) == 21
        E = [row[2] for row in led["rows"]]
        assert all(b <= a + 1e-9 for a, b in zip(E, E[1:]))

    def test_validation_errors_are_400_with_full_list(self):
        bad = SMALL_CFG + "potential.theta = 5.0\n"
        resp = client.post("/simulate", json={"config": bad})
        assert resp.status_code == 400
        detail = resp.json()["detail"]
        assert detail["kind"] == "validation"
        assert any("duplicate" in v for v in detail["violations"])

    def test_outputs_written(self, tmp_path):
        cfg = SMALL_CFG + (
            "output.ledger = led.csv\noutput.snapshot_every = 10\n"
            "output.snapshot_dir = snaps\noutput.pgm = true\n")
        resp = client.post("/simulate", json={"config": cfg,
                                              "workdir": str(tmp_path)})
        assert resp.status_code == 200
        outs = resp.json()["summary"]["outputs"]
        assert str(tmp_path / "led.csv") in outs
        assert (tmp_path / "snaps" / "snap_00000010.chfld").exists()
        assert (tmp_path / "snaps" / "snap_00000020.pgm").exists()

    def test_zero_horizon_run(self):
        cfg = SMALL_CFG.replace("run.T = 0.02", "run.T = 0.0")
        resp = client.post("/simulate", json={"config": cfg,
                                              "include_ledger": True})
        assert resp.status_code == 200
        data = resp.json()
        assert data["summary"]["steps"] == 0
        assert len(data["ledger"]["rows"]) == 1

    def test_openapi_schema_renders(self):
        resp = client.get("/openapi.json")
        assert resp.status_code == 200
        paths = resp.json()["paths"]
        for ep in ("/simulate", "/steady", "/uniqueness", "/lab", "/check"):
            assert ep in paths

    def test_deterministic_across_calls(self):
        r1 = client.post("/simulate", json={"config": SMALL_CFG,
                                            "include_ledger": True}).json()
        r2 = client.post("/simulate", json={"config": SMALL_CFG,
                                            "include_ledger": True}).json()
        assert r1 == r2


class TestSteady:
    def test_small_domain_converges_to_constant(self):
        resp = client.post("/steady", json={"config": SMALL_CFG,
                                            "max_time": 50.0})
        assert resp.status_code == 200
        data = resp.json()
        assert data["converged"]
        assert data["residual"] <= 1e-9
        assert abs(data["mean"]) < 1e-12

    def test_state_written(self, tmp_path):
        resp = client.post("/steady", json={"config": SMALL_CFG,
                                            "max_time": 50.0,
                                            "save_state": "steady.chfld",
                                            "workdir": str(tmp_path)})
        assert resp.status_code == 200
        assert (tmp_path / "steady.chfld").exists()


class TestUniqueness:
    def test_report_fields(self):
        resp = client.post("/uniqueness", json={"config": SMALL_CFG,
                                                "eps": 1e-4, "T": 0.01})
        assert resp.status_code == 200
        data = resp.json()
        assert data["d0"] > 0
        assert data["ratio"] == pytest.approx(data["d_final"] / data["d0"])
        assert data["c_emp"] >= 1.0
        assert data["sandwich_slack"] <= 1e-9
        assert len(data["times"]) == len(data["d"]) == len(data["hm1"])

    def test_degenerate_mobility_rejected(self):
        cfg = SMALL_CFG.replace("nondegenerate", "degenerate")
        cfg = "\n".join(ln for ln in cfg.splitlines()
                        if not ln.startswith(("mobility.coeffs", "mobility.b_")))
        resp = client.post("/uniqueness", json={"config": cfg})
        assert resp.status_code == 400


class TestLab:
    def test_gronwall_suite(self):
        resp = client.post("/lab", json={"suite": "gronwall", "seed": 7,
                                         "samples": 5})
        assert resp.status_code == 200
        rep = resp.json()["report"]["gronwall"]
        assert rep["violations"] == 0
        assert len(rep["rows"]) == 5
        assert all(r["ok"] for r in rep["rows"])

    def test_blowup_suite(self):
        resp = client.post("/lab", json={"suite": "blowup", "seed": 0,
                                         "samples": 1})
        rows = resp.json()["report"]["blowup"]["rows"]
        ts = [r["blowup_time"] for r in rows]
        assert ts[0] > ts[1] > ts[2]

    def test_gn_suite(self):
        resp = client.post("/lab", json={"suite": "gn", "seed": 11,
                                         "samples": 10})
        rep = resp.json()["report"]["gn"]
        assert rep["log_slope"] <= 0.05

    def test_identical_reports_for_same_seed(self):
        a = client.post("/lab", json={"suite": "gronwall", "seed": 3,
                                      "samples": 4}).json()
        b = client.post("/lab", json={"suite": "gronwall", "seed": 3,
                                      "samples": 4}).json()
        assert a == b


class TestCheck:
    def test_single_criterion(self):
        resp = client.post("/check", json={"only": [3]})
        assert resp.status_code == 200
        data = resp.json()
        assert data["all_passed"]
        assert data["results"][0]["cid"] == 3
        assert "PASS" in data["table"]

    def test_unknown_criterion_rejected(self):
        resp = client.post("/check", json={"only": [99]})
        assert resp.status_code == 400
