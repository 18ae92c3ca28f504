"""Configuration round-trips, schedule shape, optimizer updates, seeded
training determinism, oracle-grounded evaluation, and the CLI surface."""

import json

import numpy as np
import pytest

from geoplan import cli
from geoplan import envs
from geoplan import runtime
from geoplan import worldmodel as wm
from geoplan.runtime import RunConfig


def _tiny_cfg(**kw):
    cfg = RunConfig()
    cfg.env.branching = 2
    cfg.env.depth = 3
    cfg.env.feature_dim = 4
    cfg.env.noise = 0.0
    cfg.model.latent_dim = 12
    cfg.data.num_traj = 200
    cfg.data.horizon = 3
    cfg.grl.horizon = 3
    cfg.eval.horizon = 3
    cfg.eval.num_pairs = 30
    cfg.cem.num_samples = 64
    cfg.cem.num_elites = 8
    cfg.cem.iterations = 4
    cfg.optim.warmup_steps = 10
    cfg.optim.constant_steps = 180
    cfg.optim.decay_steps = 10
    cfg.optim.peak_lr = 1e-2
    for k, v in kw.items():
        setattr(cfg, k, v)
    return cfg.validate()


# ---------------------------------------------------------------------------
# configuration

def test_config_round_trip(tmp_path):
    cfg = _tiny_cfg()
    path = tmp_path / "cfg.json"
    cfg.save(path)
    loaded = RunConfig.load(path)
    assert loaded.to_dict() == cfg.to_dict()
    assert runtime.config_hash(loaded) == runtime.config_hash(cfg)


def test_config_rejects_unknown_keys(tmp_path):
    doc = RunConfig().to_dict()
    doc["typo_field"] = 1
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(runtime.ConfigError):
        RunConfig.load(path)
    doc = RunConfig().to_dict()
    doc["model"]["bogus"] = 2
    path.write_text(json.dumps(doc))
    with pytest.raises(runtime.ConfigError):
        RunConfig.load(path)


def test_config_validation_errors():
    with pytest.raises(runtime.ConfigError):
        RunConfig.from_dict({"schema_version": 99})
    cfg = RunConfig()
    cfg.model.geometry = "spherical"
    with pytest.raises(runtime.ConfigError):
        cfg.validate()
    cfg = RunConfig()
    cfg.model.init_c = 0.01
    with pytest.raises(runtime.ConfigError):
        cfg.validate()
    cfg = RunConfig()
    cfg.grl.gamma = 1.5
    with pytest.raises(runtime.ConfigError):
        cfg.validate()
    with pytest.raises(runtime.ConfigError):
        RunConfig.load("/nonexistent/path.json")


def test_config_hash_sensitivity():
    h1 = runtime.config_hash(_tiny_cfg())
    cfg2 = _tiny_cfg()
    cfg2.seed = 99
    assert h1 != runtime.config_hash(cfg2)
    assert h1 == runtime.config_hash(_tiny_cfg())


# ---------------------------------------------------------------------------
# schedule and optimizer

def test_schedule_phases():
    peak = 1e-2
    ramp = [runtime.schedule(s, 10, 20, 10, peak) for s in range(40)]
    assert ramp[0] == pytest.approx(peak / 10)
    assert ramp[9] == pytest.approx(peak)
    assert all(v == peak for v in ramp[10:30])
    assert ramp[31] < peak
    assert ramp[39] == pytest.approx(peak / 10)
    assert runtime.schedule(40, 10, 20, 10, peak) == 0.0
    # monotone ramp up then down
    assert all(a <= b + 1e-15 for a, b in zip(ramp[:10], ramp[1:10]))
    assert all(a >= b for a, b in zip(ramp[30:], ramp[31:]))


def test_sgd_update_moves_parameters():
    rng = np.random.default_rng(0)
    params = wm.init_params(rng, 4, hidden_mult=2, num_hidden=1,
                            num_actions=2)
    before = [w.copy() for w in params.weights]
    grads = [np.ones_like(g) for g in params.trainable()]
    runtime.sgd_update(params, grads, lr=0.1, weight_decay=0.0)
    for b, a in zip(before, params.weights):
        np.testing.assert_allclose(a, b - 0.1, atol=1e-12)
    assert params.log_c == pytest.approx(-0.1)
    with pytest.raises(ValueError):
        runtime.sgd_update(params, grads[:-1], 0.1, 0.0)


def test_sgd_update_decoupled_decay():
    rng = np.random.default_rng(1)
    params = wm.init_params(rng, 4, hidden_mult=2, num_hidden=1,
                            num_actions=2)
    w0 = params.weights[0].copy()
    b0 = params.biases[0].copy()
    grads = [np.zeros_like(g) for g in params.trainable()]
    runtime.sgd_update(params, grads, lr=0.5, weight_decay=0.1)
    np.testing.assert_allclose(params.weights[0], w0 * (1 - 0.05))
    np.testing.assert_allclose(params.biases[0], b0)   # biases never decay


def test_adam_rescale_normalizes():
    adam = runtime.AdamState()
    g = [np.array([1.0, -2.0, 0.5])]
    out = adam.rescale([gi.copy() for gi in g])
    # first step: mhat/sqrt(vhat) ~ sign(g)
    np.testing.assert_allclose(out[0], np.sign(g[0]), atol=1e-3)
    out2 = adam.rescale([gi.copy() for gi in g])
    assert adam.t == 2
    np.testing.assert_allclose(out2[0], np.sign(g[0]), atol=1e-3)


# ---------------------------------------------------------------------------
# training loops

def test_train_sft_zero_steps_keeps_init():
    cfg = _tiny_cfg()
    world = runtime.build_world(cfg)
    enc = runtime.build_encoder(cfg, world)
    dataset = envs.generate_latent_dataset(world, enc, cfg.data.num_traj,
                                           cfg.data.horizon, cfg.data.seed)
    model = runtime.build_model(cfg, world, dataset)
    before = runtime.checkpoint_hash(model)
    model, manifest = runtime.train_sft(cfg, model=model, dataset=dataset,
                                        steps=0)
    assert runtime.checkpoint_hash(model) == before
    assert manifest.checkpoint_hash == before


def test_train_sft_reduces_loss_and_is_deterministic():
    def run():
        cfg = _tiny_cfg()
        model, manifest = runtime.train_sft(cfg)
        return model, manifest

    model1, man1 = run()
    model2, man2 = run()
    assert man1.checkpoint_hash == man2.checkpoint_hash
    assert man1.loss_trace == man2.loss_trace
    first = man1.loss_trace[0][1]
    last = man1.loss_trace[-1][1]
    assert last < 0.5 * first
    assert all(np.isfinite(v) for _, v in man1.loss_trace)
    # curvature stayed inside the clamp
    assert 0.1 <= man1.extra["final_c"] <= 10.0


def test_train_grl_runs_and_traces_terms():
    cfg = _tiny_cfg()
    world = runtime.build_world(cfg)
    enc = runtime.build_encoder(cfg, world)
    dataset = envs.generate_latent_dataset(world, enc, cfg.data.num_traj,
                                           cfg.data.horizon, cfg.data.seed)
    model = runtime.build_model(cfg, world, dataset)
    model, _ = runtime.train_sft(cfg, model=model, dataset=dataset, steps=20)
    model, manifest = runtime.train_grl(cfg, model, dataset=dataset,
                                        steps=12)
    assert manifest.extra["stage"] == "grl"
    tri = manifest.extra["triangle_trace"]
    assert len(tri) >= 1
    assert all(v >= 0.0 for _, v in tri)    # slack hinge is nonnegative
    assert all(np.isfinite(v) for _, v in manifest.loss_trace)


def test_nonfinite_loss_raises_numerical_error():
    cfg = _tiny_cfg()
    world = runtime.build_world(cfg)
    enc = runtime.build_encoder(cfg, world)
    dataset = envs.generate_latent_dataset(world, enc, 50, cfg.data.horizon,
                                           cfg.data.seed)
    model = runtime.build_model(cfg, world, dataset)
    model.params.values[:] = np.nan
    with pytest.raises(runtime.NumericalError):
        runtime.train_sft(cfg, model=model, dataset=dataset, steps=3)


# ---------------------------------------------------------------------------
# evaluation

def test_evaluate_perfect_model_scores_one():
    # noiseless world with oracle-filled memory values: exact planning
    cfg = _tiny_cfg()
    world = runtime.build_world(cfg)
    enc = runtime.build_encoder(cfg, world)
    dataset = envs.generate_latent_dataset(world, enc, cfg.data.num_traj,
                                           cfg.data.horizon, cfg.data.seed)
    model = runtime.build_model(cfg, world, dataset)
    clean = wm.encode(np.stack([envs.observe(world, s)
                                for s in range(world.num_nodes)]), enc)
    params = model.params
    for slot in range(params.keys.shape[0]):
        a = int(np.argmax(params.gate[:, slot] == 0.0))
        node = int(np.argmin(np.linalg.norm(clean - params.keys[slot],
                                            axis=1)))
        params.values[slot] = clean[envs.step(world, node, a)]
    report = runtime.evaluate(cfg, model)
    assert report["sr"] == 1.0
    assert report["macc"] == 1.0
    assert report["miou"] == 1.0
    assert report["num_pairs"] + report["excluded_unreachable"] == 30
    assert report["num_pairs"] > 0


def test_evaluate_reports_disjointness():
    cfg = _tiny_cfg()
    world = runtime.build_world(cfg)
    enc = runtime.build_encoder(cfg, world)
    dataset = envs.generate_latent_dataset(world, enc, 50, cfg.data.horizon,
                                           cfg.data.seed)
    model = runtime.build_model(cfg, world, dataset)
    report = runtime.evaluate(cfg, model,
                              train_keys=runtime.dataset_keys(dataset))
    assert report["disjoint"] in (True, False)


def test_evaluate_thread_pool_matches_serial(monkeypatch):
    cfg = _tiny_cfg()
    cfg.eval.num_pairs = 10
    world = runtime.build_world(cfg)
    enc = runtime.build_encoder(cfg, world)
    dataset = envs.generate_latent_dataset(world, enc, 100,
                                           cfg.data.horizon, cfg.data.seed)
    model = runtime.build_model(cfg, world, dataset)
    monkeypatch.setenv("GEOPLAN_THREADS", "1")
    serial = runtime.evaluate(cfg, model)
    monkeypatch.setenv("GEOPLAN_THREADS", "4")
    threaded = runtime.evaluate(cfg, model)
    assert serial == threaded


def test_report_round_trip(tmp_path):
    doc = {"sr": 1.0, "macc": 1.0, "miou": 1.0, "horizon": 3,
           "num_pairs": 5, "seed": 100}
    path = tmp_path / "report.json"
    runtime.write_report(doc, path)
    assert json.loads(path.read_text()) == doc


# ---------------------------------------------------------------------------
# pipeline determinism (small scale; the acceptance suite re-checks at
# reference scale)

def test_pipeline_reports_byte_identical(tmp_path):
    cfg = _tiny_cfg()
    cfg.data.num_traj = 120
    cfg.eval.num_pairs = 10
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    runtime.run_pipeline(cfg, out_dir=out1)
    runtime.run_pipeline(cfg, out_dir=out2)
    assert (out1 / "report.json").read_bytes() == \
        (out2 / "report.json").read_bytes()
    assert (out1 / "checkpoint.json").read_bytes() == \
        (out2 / "checkpoint.json").read_bytes()


def test_run_sweep_and_delta_outputs(tmp_path):
    cfg = _tiny_cfg()
    world = runtime.build_world(cfg)
    enc = runtime.build_encoder(cfg, world)
    dataset = envs.generate_latent_dataset(world, enc, 80, cfg.data.horizon,
                                           cfg.data.seed)
    model = runtime.build_model(cfg, world, dataset)
    sweep_path = tmp_path / "landscape.csv"
    from geoplan import diagnostics
    grid = diagnostics.GridSpec(x_lo=-0.2, x_hi=0.2, y_lo=-0.2, y_hi=0.2,
                                step=0.1)
    sweep = runtime.run_sweep(cfg, model, sweep_path, grid=grid)
    assert sweep.energy.shape == (5, 5)
    assert sweep_path.read_text().startswith("dx,dy,energy\n")
    delta_path = tmp_path / "delta.csv"
    report = runtime.run_delta(cfg, model, delta_path, num_quadruples=200)
    assert report.deltas.shape == (200,)
    assert delta_path.exists()


# ---------------------------------------------------------------------------
# CLI

def test_cli_gen_data(tmp_path):
    cfg = _tiny_cfg()
    cfg.data.num_traj = 5
    cfg_path = tmp_path / "cfg.json"
    cfg.save(cfg_path)
    code = cli.main(["gen-data", "--config", str(cfg_path),
                     "--out", str(tmp_path / "out")])
    assert code == 0
    records = envs.read_dataset(tmp_path / "out" / "dataset.jsonl")
    assert len(records) == 5


def test_cli_config_error_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["gen-data", "--config", str(bad)]) == 2
    assert cli.main(["eval", "--checkpoint",
                     str(tmp_path / "missing.json")]) == 2


def test_cli_train_plan_eval_cycle(tmp_path):
    cfg = _tiny_cfg()
    cfg.data.num_traj = 150
    cfg.eval.num_pairs = 8
    cfg_path = tmp_path / "cfg.json"
    cfg.save(cfg_path)
    out = tmp_path / "run"
    assert cli.main(["train-sft", "--config", str(cfg_path),
                     "--out", str(out)]) == 0
    ck = out / "sft_checkpoint.json"
    assert ck.exists()
    assert cli.main(["train-grl", "--config", str(cfg_path),
                     "--out", str(out), "--checkpoint", str(ck)]) == 0
    assert cli.main(["eval", "--config", str(cfg_path), "--out", str(out),
                     "--checkpoint", str(out / "grl_checkpoint.json")]) == 0
    report = json.loads((out / "eval.json").read_text())
    assert set(report) >= {"sr", "macc", "miou", "horizon", "num_pairs",
                           "seed"}
    assert cli.main(["plan", "--config", str(cfg_path), "--out", str(out),
                     "--checkpoint", str(ck), "--goal", "7"]) == 0
    plan = json.loads((out / "plan.json").read_text())
    assert len(plan["actions"]) == cfg.eval.horizon
    assert cli.main(["sweep-energy", "--config", str(cfg_path),
                     "--out", str(out), "--checkpoint", str(ck)]) == 0
    assert (out / "landscape.csv").exists()
    assert cli.main(["delta-hyp", "--config", str(cfg_path),
                     "--out", str(out), "--checkpoint", str(ck),
                     "--num-quadruples", "50"]) == 0
    assert (out / "delta.csv").exists()
