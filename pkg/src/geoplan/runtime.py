"""Experiment orchestration: configuration, seeded training loops for the
supervised and refinement stages, evaluation against the exact oracle,
and the diagnostic report emitters.  Everything is deterministic under a
fixed config + seed, down to byte-identical report files.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from . import diagnostics
from . import envs
from . import gradengine as ge
from . import losses
from . import manifold
from . import metrics
from . import planner
from . import worldmodel as wm

CONFIG_SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid or unreadable run configuration (CLI exit code 2)."""


class NumericalError(RuntimeError):
    """Non-finite loss or gradient during training (CLI exit code 3)."""


# ---------------------------------------------------------------------------
# configuration

@dataclass
class EnvSpec:
    kind: str = "tree"          # or "drift"
    branching: int = 3
    depth: int = 6
    feature_dim: int = 16
    noise: float = 0.05
    seed: int = 0


@dataclass
class ModelSpec:
    latent_dim: int = 32
    predictor: str = "memory"      # or "mlp"
    hidden_mult: int = 4
    num_hidden: int = 2
    dedupe_threshold: float = 0.5
    beta: float = 16.0
    init_c: float = 1.0
    geometry: str = "hyperbolic"   # or "euclidean"
    encoder_seed: int = 7001       # offset so it never collides with data rngs


@dataclass
class DataSpec:
    num_traj: int = 20000
    horizon: int = 4
    seed: int = 0


@dataclass
class OptimSpec:
    optimizer: str = "adam"        # or "sgd"
    warmup_steps: int = 100
    constant_steps: int = 1800
    decay_steps: int = 100
    peak_lr: float = 3e-3
    weight_decay: float = 1e-5
    batch_size: int = 64


@dataclass
class SftSpec:
    lambda_: float = 0.5


@dataclass
class GrlSpec:
    gamma: float = 0.99
    beta: float = 0.1
    horizon: int = 4
    triangle_mode: str = "slack"
    lr_scale: float = 0.25      # refinement uses a smaller step size
    steps_scale: float = 0.25   # and a shorter schedule
    batch_size: int = 32


@dataclass
class CemSpec:
    num_samples: int = 800
    num_elites: int = 80
    iterations: int = 10


@dataclass
class EvalSpec:
    num_pairs: int = 200
    horizon: int = 4
    seed: int = 100


@dataclass
class RunConfig:
    schema_version: int = CONFIG_SCHEMA_VERSION
    env: EnvSpec = field(default_factory=EnvSpec)
    model: ModelSpec = field(default_factory=ModelSpec)
    data: DataSpec = field(default_factory=DataSpec)
    optim: OptimSpec = field(default_factory=OptimSpec)
    sft: SftSpec = field(default_factory=SftSpec)
    grl: GrlSpec = field(default_factory=GrlSpec)
    cem: CemSpec = field(default_factory=CemSpec)
    eval: EvalSpec = field(default_factory=EvalSpec)
    seed: int = 0
    out_dir: str = "runs"

    def validate(self) -> "RunConfig":
        try:
            if self.schema_version != CONFIG_SCHEMA_VERSION:
                raise ConfigError(
                    f"unsupported config schema {self.schema_version}")
            if self.env.kind not in ("tree", "drift"):
                raise ConfigError(f"unknown environment {self.env.kind!r}")
            if self.model.geometry not in ("hyperbolic", "euclidean"):
                raise ConfigError(f"unknown geometry {self.model.geometry!r}")
            if self.model.predictor not in ("memory", "mlp"):
                raise ConfigError(
                    f"unknown predictor {self.model.predictor!r}")
            if self.optim.optimizer not in ("adam", "sgd"):
                raise ConfigError(
                    f"unknown optimizer {self.optim.optimizer!r}")
            if self.model.latent_dim < 1:
                raise ConfigError("latent_dim must be >= 1")
            if min(self.optim.warmup_steps, self.optim.constant_steps,
                   self.optim.decay_steps) < 0:
                raise ConfigError("schedule phase lengths must be >= 0")
            if self.optim.peak_lr <= 0:
                raise ConfigError("peak_lr must be positive")
            if not manifold.MIN_C <= self.model.init_c <= manifold.MAX_C:
                raise ConfigError(
                    f"init_c must lie in [{manifold.MIN_C}, "
                    f"{manifold.MAX_C}]")
            # delegate sub-config validation to the owning modules
            losses.SftConfig(lambda_=self.sft.lambda_)
            losses.GrlConfig(gamma=self.grl.gamma, beta=self.grl.beta,
                             horizon=self.grl.horizon,
                             triangle_mode=self.grl.triangle_mode)
            planner.CemConfig(num_samples=self.cem.num_samples,
                              num_elites=self.cem.num_elites,
                              iterations=self.cem.iterations)
            envs.TreeWorld(branching=self.env.branching,
                           depth=self.env.depth,
                           feature_dim=self.env.feature_dim,
                           noise=self.env.noise, seed=self.env.seed)
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        def build(klass, sub):
            names = {f.name for f in dataclasses.fields(klass)}
            extra = set(sub) - names
            if extra:
                raise ConfigError(f"unknown {klass.__name__} keys: "
                                  f"{sorted(extra)}")
            return klass(**sub)

        try:
            kwargs = dict(doc)
            for name, klass in [("env", EnvSpec), ("model", ModelSpec),
                                ("data", DataSpec), ("optim", OptimSpec),
                                ("sft", SftSpec), ("grl", GrlSpec),
                                ("cem", CemSpec), ("eval", EvalSpec)]:
                if name in kwargs and isinstance(kwargs[name], dict):
                    kwargs[name] = build(klass, kwargs[name])
            return build(cls, kwargs).validate()
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(doc)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")


def config_hash(cfg: RunConfig) -> str:
    blob = json.dumps(cfg.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def checkpoint_hash(model: wm.WorldModel) -> str:
    doc = wm.checkpoint_dict(model)
    doc.pop("rng_state", None)
    blob = json.dumps(doc, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


# ---------------------------------------------------------------------------
# schedule and optimizer

def schedule(step: int, warmup: int, constant: int, decay: int,
             peak: float) -> float:
    """Three-phase step size: linear warmup, plateau, linear decay."""
    if step < warmup:
        return peak * (step + 1) / max(warmup, 1)
    if step < warmup + constant:
        return peak
    done = step - warmup - constant
    remaining = max(decay - done, 0)
    return peak * remaining / max(decay, 1)


def sgd_update(params: wm.PredictorParams, grads: list, lr: float,
               weight_decay: float) -> None:
    """In-place descent step with decoupled weight decay.

    `grads` follows the trainable() ordering; log_c takes no decay and is
    clamped by the caller afterwards.
    """
    arrays = params.trainable()
    if len(grads) != len(arrays):
        raise ValueError("gradient/parameter count mismatch")
    k = 0
    for i in range(len(params.weights)):
        params.weights[i] = (params.weights[i] * (1.0 - lr * weight_decay)
                             - lr * grads[k])
        k += 1
    for i in range(len(params.biases)):
        params.biases[i] = params.biases[i] - lr * grads[k]
        k += 1
    if params.action_embed is not None:
        params.action_embed = (params.action_embed
                               * (1.0 - lr * weight_decay) - lr * grads[k])
        k += 1
    if params.action_proj is not None:
        params.action_proj = (params.action_proj
                              * (1.0 - lr * weight_decay) - lr * grads[k])
        k += 1
    if params.kind == "memory":
        # keys take no decay: they anchor the input dictionary
        params.keys = params.keys - lr * grads[k]
        k += 1
        params.values = (params.values * (1.0 - lr * weight_decay)
                         - lr * grads[k])
        k += 1
    params.log_c = float(params.log_c - lr * float(grads[k]))


class AdamState:
    """Diagonal moment estimates rescaling gradients per coordinate.

    The rescaled gradients feed the same decoupled-decay descent step as
    plain gradient descent; the sparse-update memory predictor needs the
    per-coordinate normalization to converge in a desk-scale step budget.
    """

    def __init__(self, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = None
        self.v = None
        self.t = 0

    def rescale(self, grads: list) -> list:
        if self.m is None:
            self.m = [np.zeros_like(g) for g in grads]
            self.v = [np.zeros_like(g) for g in grads]
        self.t += 1
        out = []
        for i, g in enumerate(grads):
            self.m[i] = self.beta1 * self.m[i] + (1 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1 - self.beta2) * g * g
            mh = self.m[i] / (1 - self.beta1 ** self.t)
            vh = self.v[i] / (1 - self.beta2 ** self.t)
            out.append(mh / (np.sqrt(vh) + self.eps))
        return out


# ---------------------------------------------------------------------------
# manifests and training

@dataclass
class RunManifest:
    config_hash: str
    checkpoint_hash: str
    loss_trace: list
    wall_clock: float
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"config_hash": self.config_hash,
                "checkpoint_hash": self.checkpoint_hash,
                "loss_trace": self.loss_trace,
                "wall_clock": self.wall_clock,
                "extra": self.extra}


def build_world(cfg: RunConfig) -> envs.TreeWorld:
    return envs.TreeWorld(branching=cfg.env.branching, depth=cfg.env.depth,
                          feature_dim=cfg.env.feature_dim,
                          noise=cfg.env.noise, seed=cfg.env.seed)


def build_encoder(cfg: RunConfig, world: envs.TreeWorld) -> wm.EncoderSpec:
    return wm.EncoderSpec(seed=cfg.model.encoder_seed,
                          obs_dim=world.obs_dim,
                          latent_dim=cfg.model.latent_dim)


def build_model(cfg: RunConfig, world: envs.TreeWorld,
                dataset=None) -> wm.WorldModel:
    """Seeded model construction.

    The memory predictor is dictionary-initialized from the training
    dataset (pass the (latents, actions) pair); without a dataset, or
    with predictor="mlp", the tanh network is used.
    """
    enc = build_encoder(cfg, world)
    rng = np.random.default_rng(cfg.seed)
    if cfg.model.predictor == "memory" and dataset is not None:
        latents, actions = dataset
        params = wm.init_memory_params(
            latents, actions, world.num_actions,
            dedupe_threshold=cfg.model.dedupe_threshold,
            beta=cfg.model.beta, init_c=cfg.model.init_c, seed=cfg.seed)
    else:
        params = wm.init_params(rng, cfg.model.latent_dim,
                                hidden_mult=cfg.model.hidden_mult,
                                num_hidden=cfg.model.num_hidden,
                                num_actions=world.num_actions,
                                init_c=cfg.model.init_c)
    return wm.WorldModel(encoder=enc, params=params,
                         geometry=cfg.model.geometry)


def _check_finite(value: float, step: int, stage: str) -> None:
    if not np.isfinite(value):
        raise NumericalError(
            f"non-finite {stage} loss {value!r} at step {step}")


def _tangent_states(latents_batch, model, params):
    """Per-step manifold states from a (B, T+1, n) latent batch."""
    steps = latents_batch.shape[1]
    return [wm.to_manifold(latents_batch[:, t, :], model, params)
            for t in range(steps)]


def sft_batch_loss(model, params, latents_batch, actions_batch,
                   sft_cfg: losses.SftConfig):
    """Supervised mixture on one batch of trajectory windows.

    Teacher forcing predicts each transition from the true previous state;
    the rollout term self-feeds the first two predictions.
    """
    states = _tangent_states(latents_batch, model, params)
    horizon = actions_batch.shape[1]
    c = losses._model_c(params)
    metric = "euclidean" if model.geometry == "euclidean" else "hyperbolic"
    preds = [wm.predict_step(states[t], actions_batch[:, t], model, params)
             for t in range(horizon)]
    tf = losses.teacher_forcing(preds, states[1:], c, metric)
    ro = losses.rollout_loss(model, states[0],
                             [actions_batch[:, 0], actions_batch[:, 1]],
                             states[2], params)
    return losses.sft_loss(tf, ro, sft_cfg)


def train_sft(cfg: RunConfig, model: wm.WorldModel = None,
              dataset=None, steps: int = None):
    """Supervised stage: descend the teacher-forcing/rollout mixture.

    Returns (model, manifest).  `model`, `dataset`, `steps` may be
    injected for staged pipelines; defaults build everything from cfg.
    """
    t0 = time.time()
    world = build_world(cfg)
    if dataset is None:
        enc = (model.encoder if model is not None
               else build_encoder(cfg, world))
        dataset = envs.generate_latent_dataset(
            world, enc, cfg.data.num_traj, cfg.data.horizon, cfg.data.seed)
    if model is None:
        model = build_model(cfg, world, dataset)
    latents, actions = dataset
    opt = cfg.optim
    total_steps = (opt.warmup_steps + opt.constant_steps + opt.decay_steps
                   if steps is None else steps)
    sft_cfg = losses.SftConfig(lambda_=cfg.sft.lambda_)
    rng = np.random.default_rng(cfg.seed + 1)
    adam = AdamState() if opt.optimizer == "adam" else None
    trace = []
    for step_i in range(total_steps):
        idx = rng.integers(0, latents.shape[0], size=opt.batch_size)
        params_n = model.params.as_nodes()
        loss = sft_batch_loss(model, params_n, latents[idx], actions[idx],
                              sft_cfg)
        loss_val = float(ge.value_of(loss))
        _check_finite(loss_val, step_i, "sft")
        grads = ge.gradient(loss, params_n.trainable())
        if adam is not None:
            grads = adam.rescale(grads)
        lr = schedule(step_i, opt.warmup_steps, opt.constant_steps,
                      opt.decay_steps, opt.peak_lr)
        sgd_update(model.params, grads, lr, opt.weight_decay)
        model.clamp_curvature()
        if step_i % 50 == 0 or step_i == total_steps - 1:
            trace.append([step_i, loss_val])
    manifest = RunManifest(
        config_hash=config_hash(cfg), checkpoint_hash=checkpoint_hash(model),
        loss_trace=trace, wall_clock=time.time() - t0,
        extra={"stage": "sft", "steps": total_steps,
               "final_c": model.curvature.c})
    return model, manifest


def train_grl(cfg: RunConfig, model: wm.WorldModel,
              dataset=None, steps: int = None):
    """Refinement stage: discounted rollout energy + triangle hinge.

    Trains predictor and log-curvature only (the encoder is frozen by
    construction); uses a scaled-down copy of the supervised schedule.
    """
    t0 = time.time()
    world = build_world(cfg)
    if dataset is None:
        dataset = envs.generate_latent_dataset(
            world, model.encoder, cfg.data.num_traj, cfg.data.horizon,
            cfg.data.seed)
    latents, actions = dataset
    horizon = min(cfg.grl.horizon, actions.shape[1])
    grl_cfg = losses.GrlConfig(gamma=cfg.grl.gamma, beta=cfg.grl.beta,
                               horizon=horizon,
                               triangle_mode=cfg.grl.triangle_mode)
    opt = cfg.optim
    scale = cfg.grl.steps_scale
    warmup = max(int(opt.warmup_steps * scale), 1)
    constant = int(opt.constant_steps * scale)
    decay = max(int(opt.decay_steps * scale), 1)
    total_steps = warmup + constant + decay if steps is None else steps
    peak = opt.peak_lr * cfg.grl.lr_scale
    rng = np.random.default_rng(cfg.seed + 2)
    adam = AdamState() if opt.optimizer == "adam" else None
    trace, energy_trace, tri_trace = [], [], []
    for step_i in range(total_steps):
        idx = rng.integers(0, latents.shape[0], size=cfg.grl.batch_size)
        params_n = model.params.as_nodes()
        states = _tangent_states(latents[idx][:, :horizon + 1, :],
                                 model, params_n)
        acts = [actions[idx][:, t] for t in range(horizon)]
        loss = losses.grl_loss(model, states[0], acts, states[1:],
                               grl_cfg, params_n)
        loss_val = float(ge.value_of(loss))
        _check_finite(loss_val, step_i, "grl")
        grads = ge.gradient(loss, params_n.trainable())
        if adam is not None:
            grads = adam.rescale(grads)
        lr = schedule(step_i, warmup, constant, decay, peak)
        sgd_update(model.params, grads, lr, opt.weight_decay)
        model.clamp_curvature()
        if step_i % 50 == 0 or step_i == total_steps - 1:
            disc, tri = losses.grl_terms(model, states[0], acts, states[1:],
                                         grl_cfg, model.params)
            energy_trace.append([step_i, float(ge.value_of(disc))])
            tri_trace.append([step_i, float(ge.value_of(tri))])
            trace.append([step_i, loss_val])
    manifest = RunManifest(
        config_hash=config_hash(cfg), checkpoint_hash=checkpoint_hash(model),
        loss_trace=trace, wall_clock=time.time() - t0,
        extra={"stage": "grl", "steps": total_steps,
               "energy_trace": energy_trace, "triangle_trace": tri_trace,
               "final_c": model.curvature.c})
    return model, manifest


# ---------------------------------------------------------------------------
# evaluation

def _eval_pairs(world: envs.TreeWorld, num_pairs: int, horizon: int,
                seed: int):
    """Held-out (start, goal, oracle plan) triples with exact-depth goals."""
    rng = np.random.default_rng(seed)
    max_start_depth = world.depth - horizon
    starts = [n for n in range(world.num_nodes)
              if world.node_depth(n) <= max_start_depth]
    pairs = []
    for _ in range(num_pairs):
        start = int(starts[rng.integers(len(starts))])
        actions = [int(a) for a in rng.integers(0, world.branching,
                                                size=horizon)]
        node = start
        for a in actions:
            node = envs.step(world, node, a)
        pairs.append((start, node, actions))
    return pairs


def plan_pair(model: wm.WorldModel, world: envs.TreeWorld, start: int,
              goal: int, horizon: int, cem: CemSpec, seed: int) -> list:
    """Plan one (start, goal) pair from noisy observations."""
    rng = np.random.default_rng(seed)
    start_latent = wm.to_manifold(
        wm.encode(envs.observe(world, start, rng), model.encoder), model)
    goal_latent = wm.to_manifold(
        wm.encode(envs.observe(world, goal, rng), model.encoder), model)
    cfg = planner.CemConfig(num_samples=cem.num_samples,
                            num_elites=cem.num_elites,
                            iterations=cem.iterations, horizon=horizon,
                            seed=seed)
    result = planner.cem_categorical(
        planner.make_energy(model, start_latent, goal_latent),
        world.num_actions, cfg)
    return [int(a) for a in result.actions]


def evaluate(cfg: RunConfig, model: wm.WorldModel,
             train_keys: set = None) -> dict:
    """Plan held-out pairs, compare to the oracle, emit the metrics report.

    `train_keys` is the set of (start, action-tuple) pairs seen in
    training; the report records whether the held-out split is disjoint.
    """
    world = build_world(cfg)
    horizon = cfg.eval.horizon
    pairs = _eval_pairs(world, cfg.eval.num_pairs, horizon, cfg.eval.seed)

    usable, excluded = [], 0
    for start, goal, _ in pairs:
        oracle = envs.brute_force_plan(world, start, goal, horizon)
        if oracle is None:
            excluded += 1
            continue
        usable.append((start, goal, oracle))

    max_workers = int(os.environ.get("GEOPLAN_THREADS", "1") or "1")

    def job(i):
        start, goal, _ = usable[i]
        return plan_pair(model, world, start, goal, horizon, cfg.cem,
                         seed=cfg.eval.seed * 1000 + i)

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            predicted = list(pool.map(job, range(len(usable))))
    else:
        predicted = [job(i) for i in range(len(usable))]

    truth = [oracle for _, _, oracle in usable]
    batch = metrics.EvalBatch(predicted, truth)
    disjoint = None
    if train_keys is not None:
        eval_keys = {(s, tuple(o)) for s, _, o in usable}
        disjoint = not (eval_keys & train_keys)
    return {
        "sr": metrics.success_rate(batch),
        "macc": metrics.mean_accuracy(batch),
        "miou": metrics.mean_iou(batch),
        "horizon": horizon,
        "num_pairs": len(usable),
        "seed": cfg.eval.seed,
        "excluded_unreachable": excluded,
        "disjoint": disjoint,
        "geometry": model.geometry,
    }


def dataset_keys(dataset) -> set:
    """(start-ish) identity keys for disjointness checks on latent data."""
    _, actions = dataset
    return {tuple(row) for row in actions.tolist()}


# ---------------------------------------------------------------------------
# report emitters

def write_report(doc: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def run_pipeline(cfg: RunConfig, out_dir=None) -> dict:
    """generate -> supervised -> refinement -> evaluate, all seeded.

    Writes checkpoint, manifests, and the metrics report under out_dir
    when given; returns the combined report dict either way.
    """
    world = build_world(cfg)
    enc = build_encoder(cfg, world)
    dataset = envs.generate_latent_dataset(
        world, enc, cfg.data.num_traj, cfg.data.horizon, cfg.data.seed)
    model = build_model(cfg, world, dataset)
    model, sft_manifest = train_sft(cfg, model=model, dataset=dataset)
    model, grl_manifest = train_grl(cfg, model, dataset=dataset)
    report = evaluate(cfg, model, train_keys=None)
    combined = {
        "config_hash": config_hash(cfg),
        "sft_checkpoint_hash": sft_manifest.checkpoint_hash,
        "grl_checkpoint_hash": grl_manifest.checkpoint_hash,
        "sft_loss_trace": sft_manifest.loss_trace,
        "grl_loss_trace": grl_manifest.loss_trace,
        "eval": report,
    }
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        wm.save_checkpoint(model, os.path.join(out_dir, "checkpoint.json"))
        write_report(combined, os.path.join(out_dir, "report.json"))
    return combined


def run_sweep(cfg: RunConfig, model: wm.WorldModel, out_path,
              grid: diagnostics.GridSpec = None) -> diagnostics.LandscapeGrid:
    """Energy landscape around one dataset transition, written as CSV."""
    world = build_world(cfg)
    rng = np.random.default_rng(cfg.seed + 3)
    start = 0
    a1 = int(rng.integers(world.branching))
    nxt = envs.step(world, start, a1)
    s_t = wm.encode(envs.observe(world, start, rng), model.encoder)
    c = losses._model_c(model.params)
    s_next = wm.to_manifold(
        wm.encode(envs.observe(world, nxt, rng), model.encoder), model)
    goal_dir = wm.encode(envs.observe(world, nxt, rng), model.encoder) - s_t
    alt_dir = rng.standard_normal(s_t.shape)
    u1, u2 = diagnostics.orthonormal_pair(goal_dir, alt_dir)
    grid = grid if grid is not None else diagnostics.GridSpec()
    sweep = diagnostics.energy_sweep(s_t, s_next, u1, u2, grid, c)
    if out_path is not None:
        diagnostics.write_landscape_csv(sweep, out_path)
    return sweep


def run_delta(cfg: RunConfig, model: wm.WorldModel, out_path,
              num_quadruples: int = 10000) -> diagnostics.DeltaReport:
    """Four-point slimness of encoded world states under the model metric."""
    world = build_world(cfg)
    rng = np.random.default_rng(cfg.seed + 4)
    count = min(world.num_nodes, 512)
    nodes = rng.choice(world.num_nodes, size=count, replace=False)
    obs = np.stack([envs.observe(world, int(n), rng) for n in nodes])
    points = wm.to_manifold(wm.encode(obs, model.encoder), model)

    def metric(a, b):
        return np.asarray(wm.model_distance(a, b, model))

    report = diagnostics.gromov_delta(points, metric,
                                      num_quadruples=num_quadruples,
                                      seed=cfg.seed + 5)
    if out_path is not None:
        diagnostics.write_delta_csv(report, out_path)
    return report
