"""Persistence store and CLI behavior."""

import json
import os

import pytest

from droid.cli import main
from droid.conduct import (
    RevisionConflict,
    StoreError,
    TrialEnvelope,
    TrialNotFound,
    TrialStore,
)
from droid.core import TrialState, default_design
from droid.engine import advance
from droid.scenarios import builtin_scenario, save_scenarios


def fresh_state(seed=0):
    state = TrialState(config=default_design(), seed=seed)
    return advance(state)


class TestStore:
    def test_create_load_roundtrip(self, tmp_path):
        store = TrialStore(tmp_path)
        env = store.create(fresh_state(), trial_id="t1")
        assert env.revision == 0
        back = store.load("t1")
        assert back.trial_id == "t1"
        assert back.revision == 0
        assert back.state.to_dict() == env.state.to_dict()
        assert back.created_at and back.updated_at

    def test_create_refuses_existing_id(self, tmp_path):
        store = TrialStore(tmp_path)
        store.create(fresh_state(), trial_id="t1")
        with pytest.raises(StoreError, match="already exists"):
            store.create(fresh_state(), trial_id="t1")

    def test_generated_ids_unique(self, tmp_path):
        store = TrialStore(tmp_path)
        ids = {store.create(fresh_state()).trial_id for _ in range(5)}
        assert len(ids) == 5
        assert sorted(ids) == store.list_ids()

    def test_load_unknown_raises(self, tmp_path):
        with pytest.raises(TrialNotFound):
            TrialStore(tmp_path).load("ghost")

    def test_save_bumps_revision(self, tmp_path):
        store = TrialStore(tmp_path)
        env = store.create(fresh_state(), trial_id="t1")
        env.state.record_cohort(1, [(0, 0.3, 1), (0, 0.25, 0), (1, 0.4, None)])
        saved = store.save(env)
        assert saved.revision == 1
        assert store.load("t1").revision == 1

    def test_stale_write_refused(self, tmp_path):
        store = TrialStore(tmp_path)
        store.create(fresh_state(), trial_id="t1")
        a = store.load("t1")
        b = store.load("t1")
        a.state.record_cohort(1, [(0, 0.3, 1), (0, 0.25, 0), (1, 0.4, None)])
        store.save(a)
        b.state.record_cohort(1, [(0, 0.1, 0), (0, 0.2, 0), (0, 0.3, 0)])
        with pytest.raises(RevisionConflict, match="state changed on disk"):
            store.save(b)
        # the accepted write survives
        assert store.load("t1").revision == 1
        assert store.load("t1").state.n_enrolled == 3

    def test_crash_between_temp_write_and_rename(self, tmp_path, monkeypatch):
        store = TrialStore(tmp_path)
        env = store.create(fresh_state(), trial_id="t1")
        env.state.record_cohort(1, [(0, 0.3, 1), (0, 0.25, 0), (1, 0.4, None)])

        def boom(src, dst):
            raise OSError("killed")
        monkeypatch.setattr(os, "replace", boom)
        with pytest.raises(OSError):
            store.save(env)
        monkeypatch.undo()
        back = store.load("t1")
        assert back.revision == 0
        assert back.state.n_enrolled == 0
        assert not list(tmp_path.glob("*.tmp"))

    def test_rejects_path_escaping_ids(self, tmp_path):
        store = TrialStore(tmp_path)
        for bad in ("../x", "a/b", "", "."):
            with pytest.raises(StoreError):
                store.path(bad)

    def test_envelope_roundtrip(self):
        env = TrialEnvelope(trial_id="x", state=fresh_state(), revision=3,
                            created_at="2026-01-01T00:00:00+00:00",
                            updated_at="2026-01-02T00:00:00+00:00")
        back = TrialEnvelope.from_dict(json.loads(json.dumps(env.to_dict())))
        assert back.trial_id == "x"
        assert back.revision == 3
        assert back.state.to_dict() == env.state.to_dict()


@pytest.fixture
def scenario_file(tmp_path):
    path = tmp_path / "sc.json"
    save_scenarios([builtin_scenario("1")], str(path))
    return path


class TestSimulateCli:
    def test_writes_reports_and_exits_zero(self, tmp_path, scenario_file,
                                           capsys):
        out = tmp_path / "oc"
        rc = main(["simulate", "--scenarios", str(scenario_file),
                   "--reps", "3", "--seed", "7", "--out", str(out)])
        assert rc == 0
        assert (out / "oc.csv").exists()
        assert (out / "oc.json").exists()
        text = capsys.readouterr().out
        assert "scenario 1" in text
        assert "selection %" in text
        payload = json.loads((out / "oc.json").read_text())
        assert payload["meta"]["reps"] == 3
        assert len(payload["results"]) == 1

    def test_same_seed_byte_identical_csv(self, tmp_path, scenario_file):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        for out in (out_a, out_b):
            rc = main(["simulate", "--scenarios", str(scenario_file),
                       "--reps", "3", "--seed", "11", "--out", str(out)])
            assert rc == 0
        assert (out_a / "oc.csv").read_bytes() == (out_b / "oc.csv").read_bytes()

    def test_zero_reps_exits_2(self, scenario_file, capsys):
        rc = main(["simulate", "--scenarios", str(scenario_file),
                   "--reps", "0"])
        assert rc == 2
        assert "reps must be >= 1" in capsys.readouterr().err

    def test_missing_scenario_file_exits_3(self, tmp_path, capsys):
        missing = tmp_path / "nope.json"
        rc = main(["simulate", "--scenarios", str(missing), "--reps", "1"])
        assert rc == 3
        assert str(missing) in capsys.readouterr().err

    def test_bad_config_override_exits_2(self, tmp_path, scenario_file):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"phi_t": 2.0}))
        rc = main(["simulate", "--scenarios", str(scenario_file),
                   "--reps", "1", "--config", str(cfg)])
        assert rc == 2

    def test_comparator_design_runs(self, tmp_path, scenario_file):
        out = tmp_path / "oc"
        rc = main(["simulate", "--design", "crm",
                   "--scenarios", str(scenario_file),
                   "--reps", "3", "--out", str(out)])
        assert rc == 0
        rows = (out / "oc.csv").read_text().splitlines()
        assert any(",crm," in row for row in rows[1:])


class TestConductCli:
    def test_new_then_next(self, tmp_path, capsys):
        trial = tmp_path / "t.json"
        assert main(["conduct", str(trial), "new", "--seed", "5"]) == 0
        text = capsys.readouterr().out
        assert "revision 0" in text
        assert "cohort of 3 at dose 1" in text
        assert main(["conduct", str(trial), "next"]) == 0
        assert "cohort of 3 at dose 1" in capsys.readouterr().out

    def test_new_refuses_overwrite(self, tmp_path, capsys):
        trial = tmp_path / "t.json"
        assert main(["conduct", str(trial), "new"]) == 0
        assert main(["conduct", str(trial), "new"]) == 3

    def test_enroll_advances_and_persists(self, tmp_path, capsys):
        trial = tmp_path / "t.json"
        main(["conduct", str(trial), "new", "--seed", "5"])
        capsys.readouterr()
        rc = main(["conduct", str(trial), "enroll", "--dose", "1",
                   "--outcomes", "[[0,0.25,1],[0,0.31,0],[0,0.28,null]]"])
        assert rc == 0
        text = capsys.readouterr().out
        assert "recorded 3 patients at dose 1" in text
        assert "revision 1" in text
        payload = json.loads(trial.read_text())
        assert payload["revision"] == 1
        assert len(payload["state"]["patients"]) == 3

    def test_enroll_wrong_dose_refused(self, tmp_path, capsys):
        trial = tmp_path / "t.json"
        main(["conduct", str(trial), "new"])
        capsys.readouterr()
        rc = main(["conduct", str(trial), "enroll", "--dose", "4",
                   "--outcomes", "[[0,0.25,1]]"])
        assert rc == 2
        assert "not currently recommended" in capsys.readouterr().err

    def test_enroll_bad_outcomes_exit_2(self, tmp_path, capsys):
        trial = tmp_path / "t.json"
        main(["conduct", str(trial), "new"])
        capsys.readouterr()
        assert main(["conduct", str(trial), "enroll", "--dose", "1",
                     "--outcomes", "not json"]) == 2
        assert main(["conduct", str(trial), "enroll", "--dose", "1",
                     "--outcomes", '[["x",0.2]]']) == 2

    def test_analyze_before_completion_prints_pending(self, tmp_path, capsys):
        trial = tmp_path / "t.json"
        main(["conduct", str(trial), "new"])
        capsys.readouterr()
        rc = main(["conduct", str(trial), "analyze"])
        assert rc == 0
        text = capsys.readouterr().out
        assert "pending" in text
        assert "optimal dose: pending" in text

    def test_stale_revision_message(self, tmp_path, capsys):
        trial = tmp_path / "t.json"
        main(["conduct", str(trial), "new", "--seed", "5"])
        # another writer bumps the file between our load and save
        payload = json.loads(trial.read_text())
        payload["revision"] = 7
        trial.write_text(json.dumps(payload))
        store = TrialStore(tmp_path)
        env = store.load("t")
        env.revision = 3
        with pytest.raises(RevisionConflict, match="state changed on disk"):
            store.save(env)

    def test_full_trial_reaches_analysis(self, tmp_path, capsys):
        """Drive a whole trial through the CLI with scripted outcomes."""
        import numpy as np

        trial = tmp_path / "t.json"
        main(["conduct", str(trial), "new", "--seed", "9"])
        capsys.readouterr()
        rng = np.random.default_rng(42)
        tox = (0.05, 0.10, 0.15, 0.18, 0.45)
        resp = (0.40, 0.50, 0.52, 0.53, 0.53)
        pd = (0.40, 0.57, 0.58, 0.60, 0.60)
        store = TrialStore(tmp_path)
        for _ in range(60):
            env = store.load("t")
            if not env.state.active:
                break
            pending = sorted(set(env.state.pending_alloc))
            for j in pending:
                n = env.state.pending_alloc.count(j)
                rows = [[int(rng.random() < tox[j - 1]),
                         float(rng.normal(pd[j - 1], 0.1)),
                         int(rng.random() < resp[j - 1])]
                        for _ in range(n)]
                rc = main(["conduct", str(trial), "enroll", "--dose", str(j),
                           "--outcomes", json.dumps(rows)])
                assert rc == 0
                capsys.readouterr()
        env = store.load("t")
        assert env.state.status == "completed"
        rc = main(["conduct", str(trial), "analyze"])
        assert rc == 0
        text = capsys.readouterr().out
        assert "dose-response index" in text
        assert "concept" in text
