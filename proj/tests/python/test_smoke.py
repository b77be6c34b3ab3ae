import json

import numpy as np
import pytest

import specshape


def test_default_layout():
    layout = specshape.Layout.default()
    assert (layout.width, layout.height) == (5, 5)
    assert layout.num_machine_types == 5
    assert layout.machine_type(layout.entry) is None
    again = specshape.Layout.parse(layout.to_json())
    assert again.to_json() == layout.to_json()


def test_bad_layout_raises():
    with pytest.raises(ValueError):
        specshape.Layout.parse('{"width": 2}')


def test_env_rollout():
    env = specshape.Env(n_agents=2)
    env.reset(3)
    obs = env.observe(0)
    assert isinstance(obs, np.ndarray)
    assert obs.shape == (env.observation_size,) == (42,)
    assert obs[:25].sum() == 1.0
    rng = np.random.default_rng(0)
    while not env.episode_over:
        actions = [int(rng.integers(6)) if env.can_act(i) else None for i in range(2)]
        result = env.step(actions)
        assert len(result["deltas"]) == 2
    assert env.step_index <= 50
    for i in range(2):
        a = env.agent(i)
        assigned = 4
        remaining = sum(len(b) for b in a["tasks"])
        assert a["counters"]["tasks_finished"] + remaining == assigned
    assert "agent 0" in env.render_text()
    assert env.render_svg().startswith("<svg")


def test_env_rejects_bad_actions():
    env = specshape.Env(n_agents=1)
    env.reset(0)
    with pytest.raises(ValueError):
        env.step([9])
    with pytest.raises(RuntimeError):
        env.step([None])


def test_scheme_table():
    assert specshape.scheme_names() == ["r0", "r1", "r2", "r3", "r4", "r5", "rx"]
    r1 = specshape.scheme_weights("r1")
    assert r1["beta"] == 1.0 and r1["delta"] == 0.1 and r1["alpha"] == 0.0
    rx0 = specshape.scheme_weights("rx", 0)
    assert rx0["eta"] > 0.0 and rx0["zeta"] == 0.0
    rx_end = specshape.scheme_weights("rx", 5000)
    r5 = specshape.scheme_weights("r5")
    assert rx_end == {**r5, "alpha": 0.0}


def test_potential_value():
    counters = dict(items_completed=0, tasks_finished=3, step_count=10, machines_used=4,
                    path_violations=1, agent_collisions=0, emergency_violations=0)
    assert specshape.potential(counters, "r5") == pytest.approx(1.1, abs=1e-12)


def test_train_and_curves(tmp_path):
    records = specshape.train("qmix", "r5", agents=2, episodes=3, seed=1)
    assert [r["episode"] for r in records] == [0, 1, 2]
    assert all(r["steps_until_solved"] <= 50 for r in records)
    config = {"scenario": 1, "agents": 2, "schemes": ["r1"], "episodes": 3, "seeds": 2}
    csv = specshape.run_config(json.dumps(config), str(tmp_path), 1)
    lines = csv.splitlines()
    assert lines[0] == "episode,metric,scheme,algorithm,mean,ci_low,ci_high"
    assert len(lines) == 1 + 3 * 3
    assert (tmp_path / "runs" / "dqn_r1_seed0.csv").exists()
    assert csv == specshape.run_config(json.dumps(config), "", 1)
    svg = specshape.plot_svg(csv, "soft")
    assert svg.count('class="legend"') == 1
    with pytest.raises(ValueError):
        specshape.run_config(json.dumps({"scenario": 7}))
