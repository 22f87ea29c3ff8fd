import csv

import numpy as np
import pytest

from cablequad.evaluation import SCENARIOS, ScenarioConfig, drop_phases, run_episode, run_scenario
from cablequad.evaluation.scenarios import LOG_COLUMNS, RESULT_COLUMNS
from cablequad.env import EnvConfig
from cablequad.learning.network import NetworkSpec, init_params
from cablequad.mathcore import RngStream
from cablequad.sensing import ObservationConfig


def test_default_grid_is_five_by_five():
    cfg = ScenarioConfig()
    assert len(cfg.grid_m_P) == 5 and len(cfg.grid_l) == 5
    assert cfg.grid_m_P[0] == 0.0 and cfg.grid_m_P[-1] == 0.2 and cfg.grid_l[-1] == 1.0


def test_grid_sweep_rows_cover_every_cell_and_seed():
    cfg = ScenarioConfig(grid_m_P=(0.0, 0.2), grid_l=(0.0,), seeds=3, duration=17.0)
    res = run_scenario("grid_sweep", cfg, seed=2)
    assert len(res.rows) == 6
    cells = sorted((r[4], r[5], r[3]) for r in res.rows)
    assert cells == sorted((m, 0.0, s) for m in (0.0, 0.2) for s in range(3))
    assert all(len(r) == len(RESULT_COLUMNS) for r in res.rows)


def test_track_no_payload_uses_endpoint_params(tmp_path):
    res = run_scenario("track_no_payload", ScenarioConfig(duration=17.0), seed=0)
    row = res.rows[0]
    assert row[RESULT_COLUMNS.index("m_P")] == 0.0 and row[RESULT_COLUMNS.index("l")] == 0.0
    assert row[RESULT_COLUMNS.index("termination")] == "none"
    assert res.metrics[0].rmse_total < 0.05
    res.write(tmp_path)
    with open(tmp_path / "track_no_payload_metrics.csv") as fh:
        assert next(csv.reader(fh)) == RESULT_COLUMNS
    with open(tmp_path / "track_no_payload_trajectory.csv") as fh:
        assert next(csv.reader(fh)) == LOG_COLUMNS


def test_unknown_scenario_rejected():
    with pytest.raises(ValueError):
        run_scenario("loop_the_loop")
    assert "slack_taut_drop" in SCENARIOS


def test_drop_has_free_fall_bounce_and_settles():
    res = run_scenario("slack_taut_drop", ScenarioConfig(), seed=0)
    ph = drop_phases(res.events)
    # gap 0.3 m closed by relative acceleration between g (quadrotor held still)
    # and g (1 + m_P / m_Q) (thrust still sized for the payload lifts the quadrotor)
    g, m_P, m_Q = 9.81, 0.2, 0.835
    assert np.sqrt(0.6 / (g * (1 + m_P / m_Q))) <= ph["free_fall_end"] <= np.sqrt(0.6 / g)
    assert ph["bounces"] >= 1 and ph["settled_taut"]
    assert res.events[0][1] == "slack->taut"


def test_drop_rejects_short_cable():
    with pytest.raises(ValueError):
        run_scenario("slack_taut_drop", ScenarioConfig(l=0.2))


def test_drop_phases_on_synthetic_events():
    ev = [[0.25, "slack->taut"], [0.30, "taut->slack"], [0.40, "slack->taut"]]
    assert drop_phases(ev) == {"free_fall_end": 0.25, "bounces": 1, "settled_taut": True, "events": 3}
    assert drop_phases([])["free_fall_end"] is None


def test_policy_observation_size_must_match():
    spec = NetworkSpec(H=1, F=1, hist_embed=3, prev_embed=3, hidden=(6, 6))
    pol = init_params(spec, RngStream(0))
    cfg = EnvConfig(num_envs=1, episode_time=0.2, reference="hover", obs=ObservationConfig(H=2, F=2))
    with pytest.raises(ValueError):
        run_episode(cfg, policy=pol)
    ok = EnvConfig(num_envs=1, episode_time=1.0, reference="hover", obs=ObservationConfig(H=1, F=1))
    res = run_episode(ok, policy=pol)
    assert res.rows[0][RESULT_COLUMNS.index("controller")] == "policy"


def test_config_validation():
    with pytest.raises(ValueError):
        ScenarioConfig(seeds=0)
    with pytest.raises(ValueError):
        ScenarioConfig(hover_duration=0.2)
