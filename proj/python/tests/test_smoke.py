import json

import numpy as np
import pytest

import ailfm


def test_amd_range_and_stacking():
    amd = ailfm.amd_table(4, 4, 4)
    assert len(amd) == 64
    assert min(amd) == 3.0 and max(amd) == 4.5
    assert ailfm.mean_amd(4, 4, 4) < ailfm.mean_amd(8, 8, 1)


def test_anchor_values():
    assert ailfm.kernels() == ["embedding", "attention", "ffn", "lm_head"]
    assert ailfm.ips_at("attention", 3.0, 3.0) == 7.92e9
    assert ailfm.mpki("lm_head", 4.5) == 37.0
    assert ailfm.ips_at("ffn", 3.5, 2.0) < ailfm.ips_at("ffn", 3.5, 3.0)


def test_steady_state_single_node():
    t = ailfm.steady_state(np.array([5.0]), 1, 1, 1, g_sink=1.0)
    assert t.shape == (1,)
    assert t[0] == pytest.approx(50.0)
    zero = ailfm.steady_state(np.zeros(64))
    assert np.allclose(zero, 45.0)


def test_config_round_trip_and_errors():
    text = ailfm.config_to_json()
    assert json.loads(ailfm.parse_config(text)) == json.loads(text)
    with pytest.raises(ailfm.ConfigError):
        ailfm.parse_config('{"schema_version": 2}')
    with pytest.raises(ValueError):
        ailfm.parse_config('{"schema_version": 1, "bogus": 1}')


def test_stay_episode():
    row = ailfm.run_episode(scheduler="stay", seq_len=128, seed=3)
    assert row["scheduler"] == "stay"
    assert row["epochs"] > 0 and not row["truncated"]
    assert row["migrations"] == 0
    assert row["violation_pct"] == 0.0


def test_missing_policy_is_fit_error():
    with pytest.raises(ailfm.FitError):
        ailfm.run_episode(scheduler="ailfm")


def test_policy_net(tmp_path):
    net = ailfm.PolicyNet.init(seed=2, dropout=0.1)
    assert net.widths == [10, 64, 32, 32, 5]
    f = [0.1 * i for i in range(10)]
    mean, var = net.mc_uncertainty(f, passes=30, seed=1)
    assert var >= 0.0
    path = str(tmp_path / "p.model")
    net.save(path)
    back = ailfm.PolicyNet.load(path)
    assert back.predict_utility(f) == net.predict_utility(f)
    with pytest.raises(ValueError):
        net.predict_utility([1.0, 2.0])


def test_cli_exit_codes(tmp_path):
    assert ailfm.cli(["--help"]) == 0
    assert ailfm.cli(["no-such-command"]) == 2
    assert ailfm.cli(["evaluate", "--config", str(tmp_path / "missing.json")]) == 2
