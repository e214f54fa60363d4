from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
import yaml

from vcmflood.harness import expr
from vcmflood.harness.cases import closed, lake_at_rest, make_test1, make_test2
from vcmflood.harness.cli import compare_main, main, simulate_main
from vcmflood.harness.compare import compare, l2_in_time
from vcmflood.harness.config import config_from_dict, dump_config, load_config
from vcmflood.harness.io import Table, read_table, snapshot_name
from vcmflood.harness.ledger import ConservationLedger
from vcmflood.harness.models import bank_crest, build_adapter, channel_geometry
from vcmflood.harness.runner import RunReport, load_report, run
from vcmflood.vcm import InvariantViolation

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


class TestExpressions:
    def test_piecewise_wall(self):
        x = np.array([0.0, 10.0, 13.9, 14.0])
        np.testing.assert_allclose(expr.evaluate("where(x < 14.0, tanh(10.0 - x) + 1.0, 0.0)", x),
                                   [np.tanh(10.0) + 1.0, 1.0, np.tanh(-3.9) + 1.0, 0.0])

    def test_constants_broadcast(self):
        assert expr.evaluate(0.5, np.zeros(3)).tolist() == [0.5, 0.5, 0.5]
        np.testing.assert_allclose(expr.evaluate("x + y", np.zeros((2, 1)), np.ones(3)), np.ones((2, 3)))

    @pytest.mark.parametrize("source", [
        "__import__('os').system('true')",
        "x.__class__",
        "open('f')",
        "(lambda: 1)()",
        "[1][0]",
        "'text'",
        "z + 1",
    ])
    def test_rejects_unsafe_or_unknown_syntax(self, source):
        with pytest.raises(ValueError):
            expr.validate(source)


class TestConfig:
    def test_yaml_round_trip(self, tmp_path):
        config = make_test2()
        dump_config(config, tmp_path / "c.yaml")
        assert load_config(tmp_path / "c.yaml") == config

    def test_shipped_configs_match_factories(self):
        assert load_config(CONFIGS / "test1.yaml") == make_test1()
        assert load_config(CONFIGS / "test2.yaml") == make_test2()

    @pytest.mark.parametrize("cfl", [0.0, -0.5, 1.01])
    def test_rejects_bad_cfl(self, cfl):
        with pytest.raises(ValueError, match="cfl"):
            replace(make_test1(), cfl=cfl).validate()

    def test_rejects_unknown_keys(self):
        data = make_test1().to_dict()
        data["viscosity"] = 1.0
        with pytest.raises(ValueError, match="unknown"):
            config_from_dict(data)

    def test_rejects_non_conforming_floodplain(self):
        config = make_test1()
        fp = replace(config.floodplains[0], nx=70)
        with pytest.raises(ValueError, match="conform"):
            replace(config, floodplains=[fp]).validate()

    def test_rejects_zero_resolution(self):
        config = make_test1()
        with pytest.raises(ValueError, match=">= 1"):
            replace(config, channel=replace(config.channel, lateral_cells_upper=0)).validate()


class TestCaseFactories:
    def test_test1_values(self):
        config = make_test1()
        ch = config.channel
        assert (ch.length, ch.width, ch.cells) == (19.3, 0.5, 193)
        assert (ch.lateral_cells_full, ch.lateral_cells_upper) == (25, 8)
        fp = config.floodplains[0]
        assert (fp.nx, fp.ny) == (68, 90)
        assert config.manning_n == 0.009 and config.cfl == 0.95 and config.t_end == 10.0
        assert config.initial_u == 0.0 and config.initial_v == 0.0
        geom = channel_geometry(config)
        x = geom.x_centers
        np.testing.assert_allclose(geom.eta_beta, np.where(x < 14.0, np.tanh(10.0 - x) + 1.0, 0.0))
        crest = bank_crest(config)(x)
        np.testing.assert_array_equal(crest, np.where(x <= 12.5, 2.5, 0.0))

    @pytest.mark.parametrize("method, cells", [("full2d", 193 * 25 + 68 * 90), ("vcm", 68 * 90), ("fbm", 68 * 90)])
    def test_grid_variants(self, method, cells):
        adapter = build_adapter(make_test1(method))
        assert adapter.output_mesh().n_cells >= cells

    def test_test1_initial_volume_by_quadrature(self):
        reservoir = 0.504 * 6.10 * 0.5
        rest = 0.003 * ((19.3 - 6.10) * 0.5 + (19.3 - 12.5) * 1.8)
        for method in ("full2d", "vcm", "fbm"):
            adapter = build_adapter(make_test1(method))
            assert adapter.total_mass(adapter.initial_state()) == pytest.approx(reservoir + rest, rel=1e-12)

    def test_test2_initial_depth_cell_by_cell(self):
        adapter = build_adapter(make_test2("full2d"))
        mesh = adapter.output_mesh()
        H = adapter.initial_state().H
        for x, y, h in zip(mesh.xc, mesh.yc, H):
            if x <= 8.5 and y >= 1.8:
                expected = 1.5
            elif x > 8.5 and y >= 1.8:
                expected = 0.7
            elif 10.5 <= x <= 16.0 and 0.0 <= y <= 1.8:
                expected = 0.2
            else:
                expected = 0.0
            assert h == expected, (x, y)

    def test_test2_floodplain_and_breach(self):
        config = make_test2()
        fp = config.floodplains[0]
        assert (fp.x0, fp.x1, fp.y0, fp.y1, fp.nx, fp.ny, fp.bed) == (10.5, 16.0, 0.0, 1.8, 55, 90, 0.5)
        geom = channel_geometry(config)
        x = geom.x_centers
        crest = bank_crest(config)(x)
        assert np.all(crest[(x >= 10.5) & (x <= 16.0)] == 0.5)
        assert np.all(crest[(x < 10.5) | (x > 16.0)] == 3.0)
        wall = np.where(x < 10.0, np.tanh(0.5 * (4.5 - x)) + 1.5,
                        np.where(x <= 16.5, 0.5, np.tanh(x - 19.2) + 1.5))
        np.testing.assert_allclose(geom.eta_beta, wall)
        adapter = build_adapter(config)
        state = adapter.initial_state()
        np.testing.assert_array_equal(state.floodplain.H, 0.2)

    def test_closed_and_lake_at_rest_variants(self):
        config = closed(make_test1())
        assert set(config.channel.boundary.values()) == {"wall"}
        assert all(set(fp.boundary.values()) == {"wall"} for fp in config.floodplains)
        rest = lake_at_rest(make_test2(), 0.4)
        assert rest.manning_n == 0.0 and rest.initial_surface == 0.4


class TestLedger:
    def test_residual_identity(self):
        ledger = ConservationLedger(1.0, 0.5)
        ledger.record(1, 0.1, 0.1, 0.9, 0.5, 0.1, 0.0)
        ledger.record(2, 0.2, 0.1, 0.8, 0.6, 0.0, 0.0)
        assert ledger.total_outflow == pytest.approx(0.1)
        assert ledger.relative_drift() == pytest.approx(0.0, abs=1e-15)
        assert ledger.table().data.shape == (2, 9)

    def test_unbalanced_step_raises(self):
        ledger = ConservationLedger(1.0, 0.0)
        with pytest.raises(InvariantViolation, match="residual"):
            ledger.record(1, 0.1, 0.1, 0.99, 0.0, 0.0, 0.0)


class TestRunner:
    def test_zero_end_time_returns_initial_condition(self):
        config = replace(make_test1("vcm"), t_end=0.0, output_times=[])
        report = run(config)
        adapter = build_adapter(config)
        expected = adapter.surface(adapter.initial_state()).table(config.h_dry)
        assert report.steps == 0
        np.testing.assert_array_equal(report.final_surface().data, expected.data)
        assert report.times.tolist() == [0.0]

    @pytest.mark.parametrize("method", ["full2d", "vcm", "fbm"])
    def test_reruns_are_bit_identical(self, tmp_path, method):
        config = replace(make_test2(method), t_end=0.3, output_times=[0.3])
        run(config, out_dir=tmp_path / "a")
        run(config, out_dir=tmp_path / "b")
        files = sorted(p.name for p in (tmp_path / "a").glob("*.csv"))
        assert snapshot_name(method, 0.3) in files and "probes.csv" in files
        for name in files:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name

    def test_full2d_volume_matches_outflow(self, audited_run):
        report = audited_run(make_test1("full2d"))
        ledger = report.ledger
        assert ledger.total_outflow > 0.0
        balance = ledger.final_total + ledger.total_outflow - ledger.total_clipped - ledger.initial_total
        assert abs(balance) <= 1e-10 * ledger.initial_total

    def test_write_and_load_report(self, tmp_path):
        config = replace(make_test1("fbm"), t_end=0.2, output_times=[0.1])
        report = run(config, out_dir=tmp_path)
        loaded = load_report(tmp_path)
        assert loaded.method == "fbm" and loaded.steps == report.steps
        np.testing.assert_array_equal(loaded.times, report.times)
        for name in report.probes:
            np.testing.assert_array_equal(loaded.probes[name], report.probes[name])
        np.testing.assert_array_equal(loaded.final_surface().data, report.final_surface().data)
        ledger = read_table(tmp_path / "ledger.csv")
        assert ledger.columns[0] == "step" and len(ledger.data) == report.steps
        summary = yaml.safe_load((tmp_path / "run.yaml").read_text())
        assert summary["output_times"] == [0.1, 0.2]

    def test_probe_outside_domain_is_rejected(self):
        config = replace(make_test1("vcm"), t_end=0.0, output_times=[], probes={"far": (50.0, 1.0)})
        with pytest.raises(ValueError, match="outside"):
            run(config)


def synthetic_report(times, values, eta=0.0):
    n = 4
    surface = Table(("x", "y", "z_b", "H"), np.column_stack([np.arange(n), np.zeros(n), np.zeros(n),
                                                            np.full(n, 1.0 + eta)]))
    return RunReport(method="m", times=np.asarray(times, dtype=float), probes={"P": np.asarray(values, dtype=float)},
                     probe_coords={"P": (0.0, 0.0)}, snapshots={float(times[-1]): {"surface": surface}})


class TestCompare:
    def test_self_comparison_is_zero(self):
        t = np.linspace(0.0, 2.0, 41)
        report = synthetic_report(t, np.sin(t))
        table = compare(report, report)
        assert table.probe_errors == {"P": 0.0} and table.final_field == 0.0

    def test_constant_offset(self):
        t = np.linspace(0.0, 10.0, 201)
        table = compare(synthetic_report(t, np.cos(t)), synthetic_report(t, np.cos(t) + 0.03, eta=0.03))
        assert table.probe_errors["P"] == pytest.approx(0.03 * np.sqrt(10.0), rel=1e-12)
        assert table.final_field == pytest.approx(0.03, rel=1e-12)

    def test_candidate_interpolated_to_reference_times(self):
        ref = synthetic_report(np.linspace(0.0, 1.0, 11), np.linspace(0.0, 1.0, 11))
        cand = synthetic_report(np.linspace(0.0, 1.0, 3), np.linspace(0.0, 1.0, 3))
        assert compare(ref, cand).probe_errors["P"] == pytest.approx(0.0, abs=1e-15)

    def test_trapezoid_rule(self):
        assert l2_in_time(np.array([0.0, 1.0]), np.array([1.0, 1.0])) == 1.0

    def test_missing_probe(self):
        report = synthetic_report([0.0, 1.0], [0.0, 0.0])
        with pytest.raises(ValueError, match="missing"):
            compare(report, report, ["Q"])


class TestCommandLine:
    def test_simulate_then_compare(self, tmp_path, capsys):
        config = CONFIGS / "test1.yaml"
        for method in ("vcm", "fbm"):
            assert simulate_main(["--config", str(config), "--method", method, "--t-end", "0.3",
                                  "--out", str(tmp_path / method)]) == 0
        assert (tmp_path / "vcm" / snapshot_name("vcm", 0.3)).exists()
        assert (tmp_path / "vcm" / snapshot_name("vcm", 0.3, "profile1d")).exists()
        capsys.readouterr()
        assert compare_main(["--ref", str(tmp_path / "vcm"), "--cand", str(tmp_path / "vcm"),
                             "--probes", str(CONFIGS / "test1_probes.yaml")]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "probe,l2_error"
        rows = dict(line.split(",") for line in lines[1:])
        assert list(rows) == ["P1", "P2", "P3", "P4", "P5", "P6", "final_field"]
        assert all(float(v) == 0.0 for v in rows.values())
        csv = tmp_path / "probes.csv"
        csv.write_text("name,x,y\nP1,3.0,2.05\nP3,13.5,1.85\n")
        assert main(["compare", "--ref", str(tmp_path / "vcm"), "--cand", str(tmp_path / "fbm"),
                     "--probes", str(csv)]) == 0
        rows = capsys.readouterr().out.strip().splitlines()[1:]
        assert [r.split(",")[0] for r in rows] == ["P1", "P3", "final_field"]

    def test_cfl_override_is_validated(self, tmp_path):
        with pytest.raises(ValueError, match="cfl"):
            simulate_main(["--config", str(CONFIGS / "test1.yaml"), "--method", "vcm", "--cfl", "1.5",
                           "--out", str(tmp_path)])

    def test_unknown_command(self):
        assert main(["plot"]) == 2
