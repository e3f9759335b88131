import pytest

from anisonet.config import (
    ConfigError, GridSpec, NetworkConfig, NeuronParams, RunConfig, dump_run_config,
    load_run_config, random_control,
)


def test_defaults_match_parameter_table():
    cfg = NetworkConfig()
    assert (cfg.grid.n_exc, cfg.grid.n_inh) == (3600, 900)
    assert (cfg.exc_out_degree, cfg.inh_out_degree) == (180, 45)
    n = cfg.neuron
    assert (n.v_th, n.current_decay, n.voltage_decay, n.t_ref) == (64000, 380, 400, 2)
    assert (cfg.j_exc, cfg.j_inh, cfg.sigma_exc, cfg.sigma_inh) == (12, 48, 12, 9)


def test_retention_factors():
    n = NeuronParams()
    assert n.current_factor == 3716 / 4096
    assert n.voltage_factor == 3696 / 4096
    e = NeuronParams(current_decay=10.0, voltage_decay=20.0, decay_mode="exp")
    assert e.current_factor == pytest.approx(0.9048374180359595)


@pytest.mark.parametrize("kw, field", [
    (dict(v_th=0), "v_th"), (dict(t_ref=-1), "t_ref"), (dict(current_decay=5000), "current_decay"),
    (dict(decay_mode="x"), "decay_mode"),
])
def test_neuron_invariants(kw, field):
    with pytest.raises(ConfigError) as err:
        NeuronParams(**kw)
    assert err.value.field == field


def test_grid_invariant():
    with pytest.raises(ConfigError):
        GridSpec(60, 20)


@pytest.mark.parametrize("kw, field", [
    (dict(sigma_exc=0), "sigma_exc"), (dict(sigma_inh=-1), "sigma_inh"),
    (dict(p_conn=0), "p_conn"), (dict(kind="ring"), "kind"), (dict(profile="box"), "profile"),
    (dict(pool_window=7), "pool_window"),
])
def test_network_invariants(kw, field):
    with pytest.raises(ConfigError) as err:
        NetworkConfig(**kw)
    assert err.value.field == field


def test_replace_nested_and_digest():
    cfg = NetworkConfig()
    new = cfg.replace(seed=3, neuron__v_th=1000.0)
    assert new.seed == 3 and new.neuron.v_th == 1000.0 and cfg.neuron.v_th == 64000
    assert new.digest() != cfg.digest()
    assert NetworkConfig.from_dict(new.to_dict()) == new


def test_random_control_has_own_scaling():
    rc = random_control(NetworkConfig())
    assert rc.kind == "random"
    assert rc.neuron.weight_multiplier != NetworkConfig().neuron.weight_multiplier


def test_run_config_roundtrip(tmp_path):
    run = RunConfig(network=NetworkConfig(seed=7, sigma_exc=10.0), readout="excitatory",
                    trajectories=("hide", "move_up"), alpha=0.01, enet_test_trials=(1, 2))
    path = tmp_path / "run.ini"
    path.write_text(dump_run_config(run))
    back = load_run_config(path)
    assert back == run
    assert back.digest() == run.digest()


def test_run_config_errors(tmp_path):
    p = tmp_path / "bad.ini"
    p.write_text("[network]\nsigma_E = 0\n")
    with pytest.raises(ConfigError) as err:
        load_run_config(p)
    assert err.value.field == "sigma_exc"
    p.write_text("[network]\nbogus = 1\n")
    with pytest.raises(ConfigError, match="bogus"):
        load_run_config(p)
    p.write_text("[experiment]\ntrajectories = hide,wave\n")
    with pytest.raises(ConfigError):
        load_run_config(p)
