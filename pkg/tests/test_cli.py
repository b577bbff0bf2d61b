import json
import os

import numpy as np
import pytest

from detstab import cli
from detstab.cli import BASE_Q_GRID, SweepConfig, auto_q_grid, main, run_sweep


def write_cfg(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


def good_params(**kw):
    base = {"q": 0.2, "k": 1.0, "D": 1.0, "ea": 1.0, "u_plus": 0.0, "u_ig": 0.1}
    base.update(kw)
    return base


def test_auto_q_grid_reproduces_reference_at_zero():
    assert auto_q_grid(0.0) == list(BASE_Q_GRID)
    assert len(BASE_Q_GRID) == 25


def test_auto_q_grid_scales_with_cj_bound():
    got = auto_q_grid(0.2)
    assert got[-1] == pytest.approx(0.499 * 0.32 / 0.5)


class TestProfileCommand:
    def test_writes_files(self, tmp_path):
        cfg = write_cfg(tmp_path, "c.json", {"params": good_params(q=0.05)})
        out = tmp_path / "out"
        assert main(["profile", "--config", cfg, "--out", str(out)]) == 0
        assert (out / "profile.csv").exists()
        meta = json.loads((out / "profile.json").read_text())
        assert meta["residual_norm"] <= 1e-8
        assert meta["endpoint_error"] <= 1e-3
        assert meta["analytic_z"] is False

    def test_validation_exit(self, tmp_path):
        cfg = write_cfg(tmp_path, "c.json", {"params": good_params(q=0.7)})
        out = tmp_path / "out"
        assert main(["profile", "--config", cfg, "--out", str(out)]) == 2
        assert not (out / "profile.csv").exists()

    def test_zero_ea_routing(self, tmp_path):
        cfg = write_cfg(tmp_path, "c.json", {"params": good_params(ea=0.0, q=0.1)})
        out = tmp_path / "out"
        assert main(["profile", "--config", cfg, "--out", str(out)]) == 0
        meta = json.loads((out / "profile.json").read_text())
        assert meta["analytic_z"] is True
        assert meta["classification"] == "connection"

    def test_zero_ea_no_connection_exit(self, tmp_path):
        cfg = write_cfg(tmp_path, "c.json", {"params": good_params(ea=0.0, q=0.24)})
        out = tmp_path / "out"
        assert main(["profile", "--config", cfg, "--out", str(out)]) == 3
        # the failed iterate is still written for diagnosis
        assert (out / "profile.csv").exists()

    def test_deterministic_reruns(self, tmp_path):
        cfg = write_cfg(tmp_path, "c.json", {"params": good_params(q=0.05)})
        outs = []
        for d in ("a", "b"):
            out = tmp_path / d
            assert main(["profile", "--config", cfg, "--out", str(out)]) == 0
            outs.append((out / "profile.csv").read_bytes()
                        + (out / "profile.json").read_bytes())
        assert outs[0] == outs[1]


class TestEvansCommand:
    @pytest.mark.slow
    def test_verdict_and_trace(self, tmp_path):
        cfg = write_cfg(tmp_path, "c.json",
                        {"params": good_params(), "contour": {"nodes": 24}})
        out = tmp_path / "out"
        assert main(["evans", "--config", cfg, "--out", str(out)]) == 0
        verdict = json.loads((out / "verdict.json").read_text())
        assert verdict["winding"] == 0
        assert verdict["certified"] is True
        assert verdict["R"] == 4.0
        assert verdict["verdict"] == "spectrally stable"
        rows = (out / "evans_trace.csv").read_text().strip().splitlines()
        assert rows[0] == "re_lambda,im_lambda,re_E,im_E,log_radial"
        assert len(rows) >= 48

    @pytest.mark.slow
    def test_radius_override(self, tmp_path):
        cfg = write_cfg(tmp_path, "c.json",
                        {"params": good_params(), "contour": {"nodes": 16}})
        out = tmp_path / "out"
        assert main(["evans", "--config", cfg, "--out", str(out),
                     "--radius", "1.0"]) == 0
        verdict = json.loads((out / "verdict.json").read_text())
        assert verdict["R"] == 1.0 and verdict["winding"] == 0


class TestWindCommand:
    def test_recount_from_csv(self, tmp_path):
        from detstab.spectral import EvansTrace
        from detstab.winding import build_contour
        c = build_contour(4.0, 40)
        vals = np.array([lam - 1.0 for lam in c.nodes])
        tr = EvansTrace(nodes=c.nodes, values=vals, ledgers=np.zeros(vals.size))
        trace_path = tmp_path / "tr.csv"
        tr.to_csv(trace_path)
        out = tmp_path / "out"
        rc = main(["wind", "--trace", str(trace_path), "--out", str(out)])
        assert rc == 0
        rec = json.loads((out / "winding.json").read_text())
        assert rec["winding"] == 1 and rec["certified"]


class TestHfboundCommand:
    @pytest.mark.slow
    def test_point(self, tmp_path):
        cfg = write_cfg(tmp_path, "c.json", {"params": good_params()})
        out = tmp_path / "out"
        assert main(["hfbound", "--config", cfg, "--out", str(out)]) == 0
        rec = json.loads((out / "hfbound.json").read_text())
        assert rec["R"] == 4.0 and rec["feasible"] is True


class TestZeroEaCommand:
    def test_coeffs_and_profile(self, tmp_path):
        cfg = write_cfg(tmp_path, "c.json", {"params": good_params(ea=0.0, q=0.1)})
        out = tmp_path / "out"
        assert main(["zero-ea", "--config", cfg, "--out", str(out)]) == 0
        rec = json.loads((out / "zero_ea.json").read_text())
        assert rec["mu_plus"] == pytest.approx(0.6180339887498949)
        assert rec["classification"] == "connection"


class TestSweep:
    def cfg(self, qs, **kw):
        base = {
            "grids": {"ea": [1.0], "k": [1.0], "D": [1.0],
                      "u_plus": [0.0], "u_ig": [0.1], "q": qs},
            "contour": {"nodes": 16},
        }
        base.update(kw)
        return base

    @pytest.mark.slow
    def test_single_point_ledger(self, tmp_path):
        ledger = run_sweep(SweepConfig.from_dict(self.cfg([0.2])), jobs=1)
        assert ledger["summary"]["total"] == 1
        rec = ledger["records"][0]
        assert rec["status"] == "done"
        assert rec["winding"] == 0 and rec["certified"]
        assert rec["R"] == 4.0

    @pytest.mark.slow
    def test_every_point_accounted(self, tmp_path):
        # one good point, one beyond the physical region, one loses the wave
        ledger = run_sweep(SweepConfig.from_dict(self.cfg([0.2, 0.55])), jobs=1)
        s = ledger["summary"]
        assert s["total"] == 2
        assert s["done"] == 1 and s["skipped"] == 1
        assert s["skip_fraction"] == pytest.approx(0.5)

    @pytest.mark.slow
    def test_parallel_matches_serial(self):
        config = SweepConfig.from_dict({
            "grids": {"ea": [1.0, 2.0], "k": [1.0], "D": [1.0],
                      "u_plus": [0.0], "u_ig": [0.1], "q": [0.1]},
            "contour": {"nodes": 16},
        })
        a = run_sweep(config, jobs=1)
        b = run_sweep(config, jobs=2)
        for rec in a["records"] + b["records"]:
            rec["wall_time"] = 0.0
        assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)

    def test_k_scaling_rule(self):
        config = SweepConfig.from_dict({
            "grids": {"ea": [2.0], "D": [1.0], "u_plus": [0.0],
                      "u_ig": [0.1], "q": [0.1]},
            "k_scaling": "exp_ea_half",
        })
        fams = config.families()
        assert fams[0]["k"] == pytest.approx(np.exp(1.0))
