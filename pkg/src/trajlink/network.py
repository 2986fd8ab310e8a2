"""The learnable association network and its exact gradients.

Five fully-connected blocks cooperate on one message-passing round:

* ``node_encoder``   descriptor -> 32-d initial node state
* ``edge_encoder``   (euclidean, cosine) -> 4-d initial edge state
* ``edge_update``    [state_i, state_j, edge state] -> 4-d hidden edge state
* ``node_update``    [own state, hidden edge state] -> per-edge message
* ``classifier``     hidden edge state -> 2-class softmax

Aggregated node states are the sum of incoming messages; with a single
round they are exposed for inspection but the classifier consumes only the
hidden edge states, so they carry no gradient. Forward and backward are
plain float64 numpy; ``backward`` is exact reverse-mode differentiation,
checked against finite differences in the test suite.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .graph import AssociationGraph

BLOCK_ORDER = ("node_encoder", "edge_encoder", "node_update", "edge_update", "classifier")

RELU = "relu"
SOFTMAX = "softmax"


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    activation: str  # "relu" or "softmax"


@dataclass(frozen=True)
class ModelConfig:
    """Output widths of every block; input widths follow by chaining.

    The default mirrors the production architecture: a 2048-d descriptor is
    progressively compressed to 32 dims, edge raw features expand to 4 dims,
    and the hidden edge state stays 4-d. Smaller configurations are used for
    desk-scale tests where exhaustive gradient checks must stay cheap.
    """

    dim: int = 2048
    node_encoder_dims: tuple[int, ...] = (1024, 512, 128, 32)
    edge_encoder_dims: tuple[int, ...] = (4, 4)
    node_update_dims: tuple[int, ...] = (32,)
    edge_update_dims: tuple[int, ...] = (4,)
    classifier_dims: tuple[int, ...] = (2,)

    def __post_init__(self):
        for name in ("node_encoder_dims", "edge_encoder_dims", "node_update_dims",
                     "edge_update_dims", "classifier_dims"):
            dims = getattr(self, name)
            if not dims or any(d < 1 for d in dims):
                raise ValueError(f"{name} must be a nonempty tuple of positive ints")
        if self.classifier_dims[-1] != 2:
            raise ValueError("classifier must end in 2 output classes")
        if self.dim < 1:
            raise ValueError("dim must be positive")

    @property
    def node_state_dim(self) -> int:
        return self.node_encoder_dims[-1]

    @property
    def edge_state_dim(self) -> int:
        return self.edge_encoder_dims[-1]

    @property
    def hidden_edge_dim(self) -> int:
        return self.edge_update_dims[-1]

    def layer_specs(self) -> dict[str, list[LayerSpec]]:
        def chain(in_dim, out_dims, final_activation=RELU):
            specs = []
            for k, out in enumerate(out_dims):
                act = final_activation if k == len(out_dims) - 1 else RELU
                specs.append(LayerSpec(in_dim, out, act))
                in_dim = out
            return specs

        d_node = self.node_state_dim
        d_edge = self.edge_state_dim
        d_hidden = self.hidden_edge_dim
        return {
            "node_encoder": chain(self.dim, self.node_encoder_dims),
            "edge_encoder": chain(2, self.edge_encoder_dims),
            "node_update": chain(d_node + d_hidden, self.node_update_dims),
            "edge_update": chain(2 * d_node + d_edge, self.edge_update_dims),
            "classifier": chain(d_hidden, self.classifier_dims, final_activation=SOFTMAX),
        }


def small_config(dim: int) -> ModelConfig:
    """A reduced architecture for tests and demos on low-dimensional data."""
    return ModelConfig(
        dim=dim,
        node_encoder_dims=(16, 8),
        edge_encoder_dims=(4, 4),
        node_update_dims=(8,),
        edge_update_dims=(4,),
        classifier_dims=(2,),
    )


@dataclass
class MlpBlock:
    """One fully-connected stack: weights[k] is (out, in), biases[k] is (out,)."""

    specs: list[LayerSpec]
    weights: list[np.ndarray]
    biases: list[np.ndarray]


@dataclass
class ModelParameters:
    dim: int
    config: ModelConfig
    blocks: dict[str, MlpBlock]

    def parameter_count(self) -> int:
        return sum(
            w.size + b.size
            for block in self.blocks.values()
            for w, b in zip(block.weights, block.biases)
        )


def init_parameters(config: ModelConfig, seed: int) -> ModelParameters:
    """Uniform [-sqrt(6/in_dim), +sqrt(6/in_dim)] weights, zero biases.

    The draw order is fixed (blocks in BLOCK_ORDER, layers in order, weights
    only), so the same seed always yields bit-identical parameters.
    """
    rng = np.random.default_rng(seed)
    specs = config.layer_specs()
    blocks: dict[str, MlpBlock] = {}
    for name in BLOCK_ORDER:
        weights, biases = [], []
        for spec in specs[name]:
            bound = np.sqrt(6.0 / spec.in_dim)
            weights.append(rng.uniform(-bound, bound, size=(spec.out_dim, spec.in_dim)))
            biases.append(np.zeros(spec.out_dim, dtype=np.float64))
        blocks[name] = MlpBlock(specs[name], weights, biases)
    return ModelParameters(dim=config.dim, config=config, blocks=blocks)


def softmax(z: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max-subtraction stabilization."""
    z = np.asarray(z, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def mlp_forward(block: MlpBlock, x: np.ndarray, trace: list | None = None) -> np.ndarray:
    """Run one FC stack on a vector or a row-batch of vectors.

    When ``trace`` is given, (input, pre-activation) pairs are appended per
    layer so the backward pass can replay the computation.
    """
    a = np.asarray(x, dtype=np.float64)
    squeeze = a.ndim == 1
    if squeeze:
        a = a[None, :]
    for spec, w, b in zip(block.specs, block.weights, block.biases):
        if a.shape[1] != spec.in_dim:
            raise ValueError(
                f"input dimension {a.shape[1]} does not match layer ({spec.in_dim} -> {spec.out_dim})"
            )
        z = a @ w.T + b
        if trace is not None:
            trace.append((a, z))
        if spec.activation == RELU:
            a = np.maximum(z, 0.0)
        elif spec.activation == SOFTMAX:
            a = softmax(z)
        else:
            raise ValueError(f"unknown activation {spec.activation!r}")
    return a[0] if squeeze else a


def mlp_backward(block: MlpBlock, trace: list, grad_out: np.ndarray):
    """Backprop through one FC stack.

    ``trace`` is the list filled by :func:`mlp_forward`; ``grad_out`` is the
    adjoint of the block output. Returns (per-layer (dW, db) list, adjoint of
    the block input). Softmax layers receive the adjoint of the probability
    vector and apply the exact softmax Jacobian.
    """
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(block.specs)
    g = np.asarray(grad_out, dtype=np.float64)
    for k in range(len(block.specs) - 1, -1, -1):
        spec = block.specs[k]
        a_in, z = trace[k]
        if spec.activation == RELU:
            gz = g * (z > 0.0)
        elif spec.activation == SOFTMAX:
            y = softmax(z)
            gz = y * (g - np.sum(g * y, axis=-1, keepdims=True))
        else:
            raise ValueError(f"unknown activation {spec.activation!r}")
        grads[k] = (gz.T @ a_in, gz.sum(axis=0))
        g = gz @ block.weights[k]
    return grads, g


@dataclass
class ForwardTrace:
    """Everything the forward pass computed, plus caches for backward."""

    node_states: np.ndarray  # (N, d_node) initial node embeddings
    edge_states: np.ndarray  # (E, d_edge) initial edge embeddings
    hidden_edge_states: np.ndarray  # (E, d_hidden)
    messages: np.ndarray  # (2E, d_msg) rows 2e / 2e+1: message to endpoint i / j
    aggregated_node_states: np.ndarray  # (N, d_msg) summed incoming messages
    edge_probabilities: np.ndarray  # (E, 2) softmax output per edge
    classifier_logits: np.ndarray  # (E, 2) pre-softmax scores
    block_traces: dict[str, list]


def _message_inputs(graph: AssociationGraph, node_states, hidden_edge_states):
    """(2E, d_node + d_hidden) matrix: rows 2e and 2e+1 are the messages of
    edge e as seen from its first and second endpoint respectively, each
    using that endpoint's own initial state."""
    e = graph.edge_count
    d_node = node_states.shape[1]
    d_hidden = hidden_edge_states.shape[1]
    x = np.empty((2 * e, d_node + d_hidden), dtype=np.float64)
    if e:
        x[0::2, :d_node] = node_states[graph.edges[:, 0]]
        x[1::2, :d_node] = node_states[graph.edges[:, 1]]
        x[0::2, d_node:] = hidden_edge_states
        x[1::2, d_node:] = hidden_edge_states
    return x


def aggregate_messages(graph: AssociationGraph, messages: np.ndarray) -> np.ndarray:
    """Sum each node's incoming messages in ascending neighbor order.

    Incident messages are first sorted by neighbor index, so any edge-list
    permutation of the same graph reduces in the identical order and the
    result is bit-for-bit reproducible. Isolated nodes get the zero vector.
    """
    n = graph.node_count
    d = messages.shape[1]
    out = np.zeros((n, d), dtype=np.float64)
    for v, incident in enumerate(graph.neighbor_lists()):
        if not incident:
            continue
        rows = [2 * e if graph.edges[e, 0] == v else 2 * e + 1 for _, e in incident]
        out[v] = messages[rows].sum(axis=0)
    return out


def forward(graph: AssociationGraph, params: ModelParameters) -> ForwardTrace:
    """One full message-passing round plus edge classification."""
    if graph.features.shape[1] != params.dim:
        raise ValueError(
            f"graph descriptor dimension {graph.features.shape[1]} != model dim {params.dim}"
        )
    traces: dict[str, list] = {name: [] for name in BLOCK_ORDER}

    node_states = mlp_forward(params.blocks["node_encoder"], graph.features,
                              traces["node_encoder"])
    edge_states = mlp_forward(params.blocks["edge_encoder"], graph.edge_raw,
                              traces["edge_encoder"])

    if graph.edge_count:
        concat = np.concatenate(
            [node_states[graph.edges[:, 0]], node_states[graph.edges[:, 1]], edge_states],
            axis=1,
        )
    else:
        d_cat = 2 * node_states.shape[1] + params.config.edge_state_dim
        concat = np.zeros((0, d_cat), dtype=np.float64)
    hidden = mlp_forward(params.blocks["edge_update"], concat, traces["edge_update"])

    msg_in = _message_inputs(graph, node_states, hidden)
    messages = mlp_forward(params.blocks["node_update"], msg_in, traces["node_update"])
    aggregated = aggregate_messages(graph, messages)

    probs = mlp_forward(params.blocks["classifier"], hidden, traces["classifier"])
    logits = traces["classifier"][-1][1] if graph.edge_count else np.zeros((0, 2))

    return ForwardTrace(
        node_states=node_states,
        edge_states=edge_states,
        hidden_edge_states=hidden,
        messages=messages,
        aggregated_node_states=aggregated,
        edge_probabilities=probs.reshape(-1, 2),
        classifier_logits=np.asarray(logits, dtype=np.float64).reshape(-1, 2),
        block_traces=traces,
    )


def zero_gradients(params: ModelParameters) -> dict[str, list[tuple[np.ndarray, np.ndarray]]]:
    return {
        name: [(np.zeros_like(w), np.zeros_like(b))
               for w, b in zip(block.weights, block.biases)]
        for name, block in params.blocks.items()
    }


def backward(
    graph: AssociationGraph,
    params: ModelParameters,
    trace: ForwardTrace,
    loss_grad: np.ndarray,
) -> dict[str, list[tuple[np.ndarray, np.ndarray]]]:
    """Exact gradients of the loss w.r.t. every weight and bias.

    ``loss_grad`` is dL/dy_hat, one 2-vector per edge. Only the classifier
    output reaches the loss: the aggregated node states are a dead end under
    a single message-passing round, so the node_update block (and the
    message branch through the node encoder) receive exactly zero gradient.
    """
    loss_grad = np.asarray(loss_grad, dtype=np.float64)
    if loss_grad.shape != trace.edge_probabilities.shape:
        raise ValueError(
            f"loss_grad shape {loss_grad.shape} != predictions shape "
            f"{trace.edge_probabilities.shape}"
        )
    grads = zero_gradients(params)
    if graph.edge_count == 0:
        return grads

    cls_grads, g_hidden = mlp_backward(
        params.blocks["classifier"], trace.block_traces["classifier"], loss_grad
    )
    grads["classifier"] = cls_grads

    upd_grads, g_concat = mlp_backward(
        params.blocks["edge_update"], trace.block_traces["edge_update"], g_hidden
    )
    grads["edge_update"] = upd_grads

    d_node = trace.node_states.shape[1]
    g_node_states = np.zeros_like(trace.node_states)
    np.add.at(g_node_states, graph.edges[:, 0], g_concat[:, :d_node])
    np.add.at(g_node_states, graph.edges[:, 1], g_concat[:, d_node:2 * d_node])
    g_edge_states = g_concat[:, 2 * d_node:]

    enc_grads, _ = mlp_backward(
        params.blocks["node_encoder"], trace.block_traces["node_encoder"], g_node_states
    )
    grads["node_encoder"] = enc_grads

    edge_enc_grads, _ = mlp_backward(
        params.blocks["edge_encoder"], trace.block_traces["edge_encoder"], g_edge_states
    )
    grads["edge_encoder"] = edge_enc_grads

    return grads


def save_checkpoint(params: ModelParameters, path, extra: dict | None = None) -> None:
    """Write the model as JSON: {"dim": D, "blocks": {name: [{"w", "b"}, ...]}}."""
    payload = {
        "dim": params.dim,
        "blocks": {
            name: [
                {"w": w.tolist(), "b": b.tolist()}
                for w, b in zip(block.weights, block.biases)
            ]
            for name, block in params.blocks.items()
        },
    }
    if extra:
        payload.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_checkpoint(path) -> ModelParameters:
    """Read a checkpoint and validate every dimension chain."""
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if "dim" not in payload or "blocks" not in payload:
        raise ValueError(f"{path}: not a model checkpoint (missing dim/blocks)")
    dim = int(payload["dim"])
    raw_blocks = payload["blocks"]
    missing = [name for name in BLOCK_ORDER if name not in raw_blocks]
    if missing:
        raise ValueError(f"{path}: checkpoint missing blocks {missing}")

    def block_dims(name):
        return tuple(len(layer["b"]) for layer in raw_blocks[name])

    config = ModelConfig(
        dim=dim,
        node_encoder_dims=block_dims("node_encoder"),
        edge_encoder_dims=block_dims("edge_encoder"),
        node_update_dims=block_dims("node_update"),
        edge_update_dims=block_dims("edge_update"),
        classifier_dims=block_dims("classifier"),
    )
    specs = config.layer_specs()
    blocks: dict[str, MlpBlock] = {}
    for name in BLOCK_ORDER:
        weights, biases = [], []
        for spec, layer in zip(specs[name], raw_blocks[name]):
            w = np.asarray(layer["w"], dtype=np.float64)
            b = np.asarray(layer["b"], dtype=np.float64)
            if w.shape != (spec.out_dim, spec.in_dim):
                raise ValueError(
                    f"{path}: {name} weight shape {w.shape} breaks the "
                    f"({spec.in_dim} -> {spec.out_dim}) chain"
                )
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"{path}: {name} has non-finite parameters")
            weights.append(w)
            biases.append(b)
        blocks[name] = MlpBlock(specs[name], weights, biases)
    return ModelParameters(dim=dim, config=config, blocks=blocks)
