"""Operating-characteristics simulator: determinism, aggregation, export."""

import json

import pytest

from droid.core import STATUS_COMPLETED, DoseGrid, default_design
from droid.ocs import (
    OCReport,
    run_comparator_ocs,
    run_comparator_trial,
    run_ocs,
    run_trial,
    write_ocs_csv,
    write_ocs_json,
)
from droid.scenarios import builtin_scenario

CFG = default_design()
S8 = builtin_scenario("8")      # mostly short trials: cheap to simulate


class TestRunTrial:
    def test_deterministic(self):
        a = run_trial(CFG, S8, 404)
        b = run_trial(CFG, S8, 404)
        assert a.to_dict() == b.to_dict()

    def test_seeds_differ(self):
        a = run_trial(CFG, S8, 404)
        b = run_trial(CFG, S8, 405)
        assert a.to_dict() != b.to_dict()

    def test_ends_in_a_terminal_state(self):
        t = run_trial(CFG, S8, 12)
        assert not t.active
        assert not t.pending_alloc
        if t.status == STATUS_COMPLETED:
            assert t.final is not None

    def test_grid_mismatch_rejected(self):
        bad = builtin_scenario("1")
        cfg3 = default_design(grid=DoseGrid(doses=(0.1, 0.3, 0.5),
                                            skeleton=(0.05, 0.15, 0.30)))
        with pytest.raises(ValueError, match="grid"):
            run_trial(cfg3, bad, 1)


class TestRunOcs:
    def test_fractions_partition_unity(self):
        rep = run_ocs(CFG, S8, 25, seed=3000)
        assert sum(rep.selection_fraction) + rep.none_fraction == \
            pytest.approx(1.0, abs=1e-12)
        assert rep.n_reps == 25
        assert rep.mean_total > 0
        assert len(rep.mean_patients) == 5

    def test_replicates_kept_on_request(self):
        rep = run_ocs(CFG, S8, 10, seed=3000, keep_replicates=True)
        assert len(rep.replicates) == 10
        sel = sum(1 for r in rep.replicates if r["selected"] is not None)
        assert sel / 10 == pytest.approx(sum(rep.selection_fraction))
        assert run_ocs(CFG, S8, 10, seed=3000).replicates == ()

    def test_reproducible_across_calls(self):
        a = run_ocs(CFG, S8, 12, seed=77)
        b = run_ocs(CFG, S8, 12, seed=77)
        assert a == b

    def test_worker_pool_matches_serial(self):
        serial = run_ocs(CFG, S8, 8, seed=5, keep_replicates=True)
        pooled = run_ocs(CFG, S8, 8, seed=5, keep_replicates=True, workers=2)
        assert serial == pooled

    def test_validation(self):
        with pytest.raises(ValueError, match="n_reps"):
            run_ocs(CFG, S8, 0, seed=1)
        with pytest.raises(ValueError, match="sum to one"):
            OCReport(design_label="x", scenario_name="s", n_reps=1, seed=0,
                     selection_fraction=(0.5, 0.0), none_fraction=0.0,
                     mean_patients=(1.0, 1.0), mean_total=2.0,
                     early_stop_fraction=0.0, poc_fraction=0.0,
                     config_digest="abc")


class TestComparator:
    def test_always_selects_some_dose(self):
        row = run_comparator_trial(CFG, S8, 9)
        assert row["selected"] in (1, 2, 3, 4, 5)
        assert row["n_total"] == CFG.stage1_budget
        assert row["poc"] is None

    def test_heavy_toxicity_selects_low(self):
        rep = run_comparator_ocs(CFG, S8, 15, seed=909)
        assert rep.none_fraction == 0.0
        # true DLT rates are 0.10, 0.40, ...: the bottom dose dominates
        assert rep.selection_fraction[0] > 0.5
        assert rep.mean_total == CFG.stage1_budget

    def test_deterministic(self):
        assert run_comparator_ocs(CFG, S8, 6, seed=4) == \
            run_comparator_ocs(CFG, S8, 6, seed=4)


class TestExport:
    def test_csv_layout_and_byte_determinism(self, tmp_path):
        rep = run_ocs(CFG, S8, 10, seed=3000)
        p1, p2 = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
        write_ocs_csv([rep], p1)
        write_ocs_csv([run_ocs(CFG, S8, 10, seed=3000)], p2)
        b1 = open(p1, "rb").read()
        assert b1 == open(p2, "rb").read()
        lines = b1.decode().strip().splitlines()
        assert lines[0] == "scenario,design,dose,selection_pct,mean_patients"
        assert len(lines) == 1 + 5 + 1          # header, doses, none row
        assert lines[-1].startswith("8,droid,none,")

    def test_json_mirror(self, tmp_path):
        rep = run_ocs(CFG, S8, 10, seed=3000)
        path = str(tmp_path / "ocs.json")
        write_ocs_json([rep], path, meta={"seed": 3000, "n_reps": 10})
        data = json.loads(open(path).read())
        assert data["meta"]["seed"] == 3000
        row = data["results"][0]
        assert row["scenario"] == "8"
        assert row["config_digest"] == rep.config_digest
        assert sum(row["selection_fraction"]) + row["none_fraction"] == \
            pytest.approx(1.0)
