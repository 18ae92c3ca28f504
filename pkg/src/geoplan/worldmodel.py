"""Desk-scale hyperbolic latent world model.

A frozen random linear encoder stands in for a pretrained backbone; its
output is interpreted as an origin tangent vector and projected onto the
Poincare ball with a learnable curvature.  An action-conditioned MLP
predicts the next latent state, computing in tangent coordinates
(log-map in, exp-map out) so the network itself stays Euclidean while
every loss is hyperbolic.  A flat "euclidean" geometry mode removes the
projections and swaps the metric, giving the baseline model on the same
code path.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field

import numpy as np

from . import gradengine as ge
from . import manifold
from .gradengine import Node
from .manifold import Curvature

CHECKPOINT_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class EncoderSpec:
    """Frozen random linear encoder: obs -> R^n, seeded and bias-free."""

    seed: int
    obs_dim: int
    latent_dim: int
    weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        rng = np.random.default_rng(self.seed)
        w = rng.standard_normal((self.latent_dim, self.obs_dim))
        w /= np.sqrt(self.obs_dim)
        object.__setattr__(self, "weights", w)


def encode(obs, enc: EncoderSpec):
    """Deterministic linear embedding of an observation (or batch)."""
    obs = np.asarray(obs, dtype=np.float64)
    if obs.shape[-1] != enc.obs_dim:
        raise ValueError(
            f"observation length {obs.shape[-1]} != obs_dim {enc.obs_dim}")
    return obs @ enc.weights.T


@dataclass
class PredictorParams:
    """Parameters of the latent-dynamics network plus learnable log-curvature.

    Two predictor kinds share this container.  "mlp" is an
    action-conditioned tanh network over tangent coordinates.  "memory" is
    an action-gated soft key-value memory: radial-basis attention over a
    data-initialized key dictionary, read out through learned values —
    the right inductive bias when transitions form a large lookup table.
    Fields hold ndarrays normally; the training loop swaps in gradengine
    Nodes of the same shapes via :func:`as_nodes`.
    """

    weights: list      # per layer, shape (out, in)
    biases: list       # per layer, shape (out,)
    action_embed: object = None   # (num_actions, n) for discrete actions
    action_proj: object = None    # (n, action_dim) for continuous actions
    log_c: object = 0.0
    kind: str = "mlp"             # or "memory"
    keys: object = None           # (M, n) memory keys
    values: object = None         # (M, n) memory values
    gate: object = None           # (num_actions, M) constant 0/-inf mask
    beta: float = 16.0            # attention sharpness, not trained

    def as_nodes(self) -> "PredictorParams":
        return PredictorParams(
            weights=[Node(w) for w in self.weights],
            biases=[Node(b) for b in self.biases],
            action_embed=(None if self.action_embed is None
                          else Node(self.action_embed)),
            action_proj=(None if self.action_proj is None
                         else Node(self.action_proj)),
            log_c=Node(np.float64(self.log_c)),
            kind=self.kind,
            keys=None if self.keys is None else Node(self.keys),
            values=None if self.values is None else Node(self.values),
            gate=self.gate,
            beta=self.beta,
        )

    def trainable(self) -> list:
        out = list(self.weights) + list(self.biases)
        if self.action_embed is not None:
            out.append(self.action_embed)
        if self.action_proj is not None:
            out.append(self.action_proj)
        if self.kind == "memory":
            out.extend([self.keys, self.values])
        out.append(self.log_c)
        return out


def init_params(rng: np.random.Generator, latent_dim: int,
                hidden_mult: int = 4, num_hidden: int = 2,
                num_actions: int = None, action_dim: int = None,
                init_c: float = 1.0) -> PredictorParams:
    """Seeded Glorot-style init; widths n -> mult*n -> ... -> n."""
    n = latent_dim
    widths = [n] + [hidden_mult * n] * num_hidden + [n]
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        scale = np.sqrt(2.0 / (fan_in + fan_out))
        weights.append(rng.standard_normal((fan_out, fan_in)) * scale)
        biases.append(np.zeros(fan_out))
    action_embed = None
    action_proj = None
    if num_actions is not None:
        action_embed = rng.standard_normal((num_actions, n)) * 0.1
    if action_dim is not None:
        action_proj = rng.standard_normal((n, action_dim)) * 0.1
    return PredictorParams(weights=weights, biases=biases,
                           action_embed=action_embed,
                           action_proj=action_proj,
                           log_c=float(np.log(init_c)))


GATE_OFF = -1e9


def init_memory_params(latents, actions, num_actions: int,
                       dedupe_threshold: float = 0.5, beta: float = 16.0,
                       init_c: float = 1.0, seed: int = 0) -> PredictorParams:
    """Data-initialized key-value memory predictor.

    Builds a per-action key dictionary from observed transition inputs:
    greedy dedupe at `dedupe_threshold` (a new sample opens a slot only
    when farther than the threshold from every existing same-action key),
    then each key is refined to the mean of the samples assigned to it,
    averaging out observation noise.  Values start at zero and are
    learned by gradient descent.

    latents: (num_traj, T+1, n) encoded states; actions: (num_traj, T).
    """
    latents = np.asarray(latents, dtype=np.float64)
    actions = np.asarray(actions)
    horizon = actions.shape[1]
    n = latents.shape[2]
    inputs = np.concatenate([latents[:, t, :] for t in range(horizon)])
    acts = np.concatenate([actions[:, t] for t in range(horizon)])
    rng = np.random.default_rng(seed)
    order = rng.permutation(inputs.shape[0])

    keys_by_a = [np.empty((0, n)) for _ in range(num_actions)]
    fill = [0] * num_actions
    for i in order:
        a = int(acts[i])
        bank, m = keys_by_a[a], fill[a]
        if m > 0:
            gaps = np.linalg.norm(bank[:m] - inputs[i], axis=1)
            if gaps.min() <= dedupe_threshold:
                continue
        if m == bank.shape[0]:
            keys_by_a[a] = np.vstack([bank, np.empty((max(64, m), n))])
            bank = keys_by_a[a]
        bank[m] = inputs[i]
        fill[a] = m + 1

    sizes = fill
    keys = np.vstack([keys_by_a[a][:fill[a]] for a in range(num_actions)])
    slot_action = np.concatenate(
        [np.full(s, a) for a, s in enumerate(sizes)])
    num_slots = keys.shape[0]

    # refine: average every sample into its nearest same-action slot
    accum = np.zeros_like(keys)
    counts = np.zeros(num_slots)
    for a in range(num_actions):
        slot_idx = np.where(slot_action == a)[0]
        bank = keys[slot_idx]
        samples = inputs[acts == a]
        bank_sq = (bank ** 2).sum(-1)
        for lo in range(0, samples.shape[0], 4096):
            chunk = samples[lo:lo + 4096]
            d2 = bank_sq[None, :] - 2.0 * chunk @ bank.T
            nearest = slot_idx[np.argmin(d2, axis=1)]
            np.add.at(accum, nearest, chunk)
            np.add.at(counts, nearest, 1)
    keys = np.where(counts[:, None] > 0,
                    accum / np.maximum(counts, 1)[:, None], keys)

    gate = np.full((num_actions, num_slots), GATE_OFF)
    for a in range(num_actions):
        gate[a, slot_action == a] = 0.0
    return PredictorParams(weights=[], biases=[], log_c=float(np.log(init_c)),
                           kind="memory", keys=keys,
                           values=np.zeros((num_slots, n)), gate=gate,
                           beta=float(beta))


@dataclass
class WorldModel:
    encoder: EncoderSpec
    params: PredictorParams
    geometry: str = "hyperbolic"     # or "euclidean"
    tangent_mode: bool = True        # network input/output in tangent coords
    skip: bool = True                # residual connection around the MLP

    @property
    def curvature(self) -> Curvature:
        return Curvature(log_c=float(ge.value_of(self.params.log_c)))

    def clamp_curvature(self) -> None:
        lo, hi = np.log(manifold.MIN_C), np.log(manifold.MAX_C)
        self.params.log_c = float(np.clip(float(self.params.log_c), lo, hi))


@dataclass
class LatentTrajectory:
    """Imagined rollout: states[0] is the start, states[1:] are predicted."""

    states: list
    actions: object

    @property
    def predicted(self):
        return self.states[1:]

    @property
    def end(self):
        return self.states[-1]


def _curv(params):
    return ge.exp(params.log_c) if ge.is_node(params.log_c) else float(
        np.exp(ge.value_of(params.log_c)))


def to_manifold(s, model: WorldModel, params: PredictorParams = None):
    """Project a tangent embedding onto the model's latent manifold."""
    params = params if params is not None else model.params
    if model.geometry == "euclidean":
        return s
    return manifold.exp_origin(s, _curv(params))


def model_distance(u, v, model: WorldModel, params: PredictorParams = None):
    """Latent metric: geodesic distance, or plain norm in euclidean mode."""
    params = params if params is not None else model.params
    if model.geometry == "euclidean":
        return manifold.euclidean_distance(u, v)
    return manifold.distance(u, v, _curv(params))


def _action_input(action, params):
    if params.action_embed is not None:
        idx = np.asarray(action)
        num_actions = ge.value_of(params.action_embed).shape[0]
        if np.any(idx < 0) or np.any(idx >= num_actions):
            raise ValueError(f"unknown action id in {action!r}")
        return ge.take_rows(params.action_embed, idx)
    if params.action_proj is not None:
        return ge.matmul(action, ge.transpose(params.action_proj))
    raise ValueError("predictor has no action conditioning table")


def predict_step(state, action, model: WorldModel,
                 params: PredictorParams = None):
    """One latent transition: state, action -> predicted next state."""
    params = params if params is not None else model.params
    c = _curv(params)
    hyperbolic = model.geometry != "euclidean"

    if hyperbolic and model.tangent_mode:
        u = manifold.log_origin(state, c)
    else:
        u = state
    if params.kind == "memory":
        # radial-basis attention: -beta*|u-k|^2 up to a per-input constant
        sim = ge.matmul(u, ge.transpose(params.keys))
        ksq = ge.sqnorm(params.keys)
        logits = ge.add(ge.mul(params.beta, ge.sub(ge.mul(2.0, sim), ksq)),
                        ge.take_rows(params.gate, np.asarray(action)))
        out = ge.matmul(ge.softmax(logits), params.values)
    else:
        h = ge.add(u, _action_input(action, params))
        for w, b in zip(params.weights[:-1], params.biases[:-1]):
            h = ge.tanh(ge.add(ge.matmul(h, ge.transpose(w)), b))
        out = ge.add(ge.matmul(h, ge.transpose(params.weights[-1])),
                     params.biases[-1])
        if model.skip:
            out = ge.add(u, out)
    if not hyperbolic:
        return out
    if model.tangent_mode:
        return manifold.exp_origin(out, c)
    return manifold.clamp_to_ball(out, c)


def rollout(state, actions, model: WorldModel,
            params: PredictorParams = None) -> LatentTrajectory:
    """Feed predictions back as inputs for len(actions) steps."""
    actions = list(actions) if not isinstance(actions, np.ndarray) else actions
    if len(actions) == 0:
        raise ValueError("rollout needs at least one action")
    states = [state]
    for t in range(len(actions)):
        states.append(predict_step(states[-1], actions[t], model, params))
    return LatentTrajectory(states=states, actions=actions)


def rollout_batch(start, action_matrix, model: WorldModel) -> np.ndarray:
    """End states for N candidate action sequences (numpy path only).

    start: (n,) latent; action_matrix: (N, T) int ids or (N, T, A) floats.
    Returns (N, n) end states.  Used by the planner's batched energies.
    """
    action_matrix = np.asarray(action_matrix)
    n_cand = action_matrix.shape[0]
    horizon = action_matrix.shape[1]
    state = np.broadcast_to(np.asarray(start, dtype=np.float64),
                            (n_cand, len(start))).copy()
    for t in range(horizon):
        state = predict_step(state, action_matrix[:, t], model)
    return state


# ---------------------------------------------------------------------------
# checkpoint serialization

def _b64(arr: np.ndarray) -> str:
    return base64.b64encode(
        np.ascontiguousarray(arr, dtype="<f8").tobytes()).decode("ascii")


def _unb64(data: str, shape) -> np.ndarray:
    return np.frombuffer(base64.b64decode(data),
                         dtype="<f8").reshape(shape).copy()


def checkpoint_dict(model: WorldModel, rng_state=None) -> dict:
    p = model.params
    return {
        "schema_version": CHECKPOINT_SCHEMA_VERSION,
        "encoder_seed": model.encoder.seed,
        "obs_dim": model.encoder.obs_dim,
        "latent_dim": model.encoder.latent_dim,
        "geometry": model.geometry,
        "tangent_mode": model.tangent_mode,
        "skip": model.skip,
        "layer_shapes": [list(w.shape) for w in p.weights],
        "weights": [_b64(w) for w in p.weights],
        "biases": [_b64(b) for b in p.biases],
        "action_embed_shape": (None if p.action_embed is None
                               else list(np.shape(p.action_embed))),
        "action_embed": (None if p.action_embed is None
                         else _b64(p.action_embed)),
        "action_proj_shape": (None if p.action_proj is None
                              else list(np.shape(p.action_proj))),
        "action_proj": (None if p.action_proj is None
                        else _b64(p.action_proj)),
        "log_c": float(p.log_c),
        "kind": p.kind,
        "keys_shape": None if p.keys is None else list(np.shape(p.keys)),
        "keys": None if p.keys is None else _b64(p.keys),
        "values_shape": (None if p.values is None
                         else list(np.shape(p.values))),
        "values": None if p.values is None else _b64(p.values),
        "gate_shape": None if p.gate is None else list(np.shape(p.gate)),
        "gate": None if p.gate is None else _b64(p.gate),
        "beta": float(p.beta),
        "rng_state": rng_state,
    }


def save_checkpoint(model: WorldModel, path, rng_state=None) -> None:
    with open(path, "w") as fh:
        json.dump(checkpoint_dict(model, rng_state), fh, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path) -> WorldModel:
    with open(path) as fh:
        doc = json.load(fh)
    if doc["schema_version"] != CHECKPOINT_SCHEMA_VERSION:
        raise ValueError(f"unsupported checkpoint schema "
                         f"{doc['schema_version']}")
    enc = EncoderSpec(seed=doc["encoder_seed"], obs_dim=doc["obs_dim"],
                      latent_dim=doc["latent_dim"])
    weights = [_unb64(w, s) for w, s in zip(doc["weights"],
                                            doc["layer_shapes"])]
    biases = [_unb64(b, (s[0],)) for b, s in zip(doc["biases"],
                                                 doc["layer_shapes"])]
    action_embed = (None if doc["action_embed"] is None else
                    _unb64(doc["action_embed"], doc["action_embed_shape"]))
    action_proj = (None if doc["action_proj"] is None else
                   _unb64(doc["action_proj"], doc["action_proj_shape"]))
    params = PredictorParams(
        weights=weights, biases=biases, action_embed=action_embed,
        action_proj=action_proj, log_c=doc["log_c"],
        kind=doc.get("kind", "mlp"),
        keys=(None if doc.get("keys") is None
              else _unb64(doc["keys"], doc["keys_shape"])),
        values=(None if doc.get("values") is None
                else _unb64(doc["values"], doc["values_shape"])),
        gate=(None if doc.get("gate") is None
              else _unb64(doc["gate"], doc["gate_shape"])),
        beta=doc.get("beta", 16.0))
    return WorldModel(encoder=enc, params=params, geometry=doc["geometry"],
                      tangent_mode=doc["tangent_mode"], skip=doc["skip"])
