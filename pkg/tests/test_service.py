"""HTTP API surface, driven in process."""

import numpy as np
import pytest
from fastapi.testclient import TestClient

from dirmix.service import app, parse_alpha_spec


@pytest.fixture()
def client():
    with TestClient(app) as c:
        yield c


@pytest.fixture()
def mixture_container(client, tmp_path):
    out = str(tmp_path / "mix.smpx")
    resp = client.post(
        "/synth",
        json={
            "classes": 3,
            "alpha": "20,2,2;2,20,2;2,2,20",
            "n": 900,
            "seed": 7,
            "out": out,
        },
    )
    assert resp.status_code == 200, resp.text
    return out


class TestParseAlphaSpec:
    def test_parses_rows(self):
        got = parse_alpha_spec("1,2;3,4")
        np.testing.assert_array_equal(got, [[1.0, 2.0], [3.0, 4.0]])

    def test_rejects_ragged(self):
        with pytest.raises(ValueError):
            parse_alpha_spec("1,2;3")

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            parse_alpha_spec("1,0;1,1")


class TestHealth:
    def test_health(self, client):
        resp = client.get("/health")
        assert resp.status_code == 200
        assert resp.json()["status"] == "ok"


class TestSynth:
    def test_writes_container_and_manifest(self, client, tmp_path, mixture_container):
        body = None
        resp = client.post(
            "/inspect", json={"container": mixture_container}
        )
        assert resp.status_code == 200
        body = resp.json()
        assert body["n_samples"] == 900
        assert body["dim"] == 3
        assert body["manifest"]["dataset"] == "synthetic"

    def test_balanced_labels_within_3_sigma(self, client, tmp_path):
        out = str(tmp_path / "m.smpx")
        resp = client.post(
            "/synth",
            json={"classes": 3, "alpha": "20,2,2;2,20,2;2,2,20", "n": 5000, "seed": 7, "out": out},
        )
        hist = np.array(resp.json()["label_histogram"])
        sd = np.sqrt(5000 * (1 / 3) * (2 / 3))
        assert np.all(np.abs(hist - 5000 / 3) <= 3 * sd)

    def test_same_seed_same_file(self, client, tmp_path):
        paths = []
        for name in ("a.smpx", "b.smpx"):
            out = str(tmp_path / name)
            client.post(
                "/synth",
                json={"classes": 2, "alpha": "5,1;1,5", "n": 200, "seed": 3, "out": out},
            )
            paths.append(out)
        with open(paths[0], "rb") as f1, open(paths[1], "rb") as f2:
            assert f1.read() == f2.read()

    def test_n_zero_is_a_validation_error(self, client, tmp_path):
        resp = client.post(
            "/synth",
            json={"classes": 2, "alpha": "5,1;1,5", "n": 0, "seed": 3, "out": str(tmp_path / "x.smpx")},
        )
        assert resp.status_code == 422

    def test_alpha_row_count_mismatch(self, client, tmp_path):
        resp = client.post(
            "/synth",
            json={"classes": 3, "alpha": "5,1;1,5", "n": 10, "seed": 3, "out": str(tmp_path / "x.smpx")},
        )
        assert resp.status_code == 400
        assert "alpha spec" in resp.json()["detail"]


class TestCluster:
    def test_high_accuracy_and_report_files(self, client, tmp_path, mixture_container):
        out_prefix = str(tmp_path / "rep")
        resp = client.post(
            "/cluster",
            json={
                "container": mixture_container,
                "method": "hard-em-dirichlet",
                "n_tasks": 8,
                "out": out_prefix,
            },
        )
        assert resp.status_code == 200, resp.text
        body = resp.json()
        assert body["mean_accuracy"] >= 0.95
        assert body["n_tasks"] == 8
        assert (tmp_path / "rep.csv").exists()
        assert (tmp_path / "rep.json").exists()
        assert body["resolved_config"]["solver"]["lam"] == pytest.approx(5 * 75 / 3)

    def test_missing_container_is_404(self, client, tmp_path):
        resp = client.post(
            "/cluster",
            json={"container": str(tmp_path / "nope.smpx"), "method": "hard-kmeans", "n_tasks": 1},
        )
        assert resp.status_code == 404

    def test_unknown_method_is_422(self, client, mixture_container):
        resp = client.post(
            "/cluster",
            json={"container": mixture_container, "method": "best-method", "n_tasks": 1},
        )
        assert resp.status_code == 422

    def test_ablation_flags_reach_solver(self, client, mixture_container):
        resp = client.post(
            "/cluster",
            json={
                "container": mixture_container,
                "method": "em-dirichlet",
                "n_tasks": 2,
                "no_mdl": True,
                "no_barrier": True,
            },
        )
        assert resp.status_code == 200
        solver = resp.json()["resolved_config"]["solver"]
        assert solver["use_mdl"] is False
        assert solver["use_barrier"] is False
        assert solver["hard_assignments"] is True


class TestFewshot:
    def test_runs_supervised(self, client, mixture_container):
        resp = client.post(
            "/fewshot",
            json={
                "container": mixture_container,
                "method": "em-dirichlet",
                "shots": 2,
                "k_eff": 3,
                "query_size": 30,
                "n_tasks": 3,
            },
        )
        assert resp.status_code == 200, resp.text
        assert resp.json()["mean_accuracy"] >= 0.9

    def test_k_eff_above_class_count(self, client, mixture_container):
        resp = client.post(
            "/fewshot",
            json={"container": mixture_container, "method": "em-dirichlet", "k_eff": 7, "n_tasks": 1},
        )
        assert resp.status_code == 400
        assert "k_eff" in resp.json()["detail"]


class TestFitDirichlet:
    def test_both_schemes_agree(self, client, mixture_container):
        results = {}
        for algo in ("quadratic", "minka"):
            resp = client.post(
                "/fit-dirichlet", json={"container": mixture_container, "algo": algo}
            )
            assert resp.status_code == 200, resp.text
            results[algo] = resp.json()
        f_quad = results["quadratic"]["final_objective"]
        f_minka = results["minka"]["final_objective"]
        assert abs(f_quad - f_minka) <= 1e-6 * max(1.0, abs(f_quad))
        assert results["quadratic"]["iterations"] >= 1
        assert results["quadratic"]["converged"]

    def test_nonpositive_eps_is_422(self, client, mixture_container):
        resp = client.post(
            "/fit-dirichlet",
            json={"container": mixture_container, "algo": "quadratic", "eps": 0.0},
        )
        assert resp.status_code == 422


class TestBenchmarkSweep:
    def test_query_size_sweep(self, client, tmp_path, mixture_container):
        out_prefix = str(tmp_path / "sweep")
        resp = client.post(
            "/benchmark",
            json={
                "container": mixture_container,
                "method": "hard-em-dirichlet",
                "sweep": "query-size",
                "values": [10, 25],
                "n_tasks": 3,
                "out": out_prefix,
            },
        )
        assert resp.status_code == 200, resp.text
        points = resp.json()["points"]
        assert [p["value"] for p in points] == [10, 25]
        assert (tmp_path / "sweep.csv").exists()

    def test_shots_sweep(self, client, mixture_container):
        resp = client.post(
            "/benchmark",
            json={
                "container": mixture_container,
                "method": "em-dirichlet",
                "sweep": "shots",
                "values": [1, 2],
                "k_eff": 3,
                "query_size": 20,
                "n_tasks": 2,
            },
        )
        assert resp.status_code == 200, resp.text
        assert len(resp.json()["points"]) == 2
