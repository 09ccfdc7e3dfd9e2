import heapq
from dataclasses import dataclass
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from atep.core.errors import ContractError, MalformedGenomeError
from atep.neat.genome import Activation, AgentGenome, NodeKind


def _sigmoid(x: float) -> float:
    return float(0.5 * (1.0 + np.tanh(0.5 * x)))


def _gauss(x: float) -> float:
    return float(np.exp(-min(x * x, 700.0)))


ACTIVATIONS: Dict[Activation, Callable[[float], float]] = {
    Activation.TANH: lambda x: float(np.tanh(x)),
    Activation.SIGMOID: _sigmoid,
    Activation.SINE: lambda x: float(np.sin(x)),
    Activation.GAUSS: _gauss,
    Activation.IDENTITY: lambda x: float(x),
    Activation.RELU: lambda x: float(max(0.0, x)),
}


@dataclass(frozen=True, eq=False)
class NodeEval:
    slot: int
    activation: Activation
    bias: float
    response: float
    sources: np.ndarray
    weights: np.ndarray


@dataclass(frozen=True, eq=False)
class CompiledNetwork:
    """Feedforward phenotype of a genome.

    Node values live in a flat array: slots ``0..n_in-1`` are inputs, slot ``n_in`` is the
    bias (always 1.0), the remaining slots are filled in ``order``.
    """

    num_inputs: int
    num_outputs: int
    order: Tuple[NodeEval, ...]
    output_slots: Tuple[int, ...]
    num_slots: int
    hidden_count: int
    connection_count: int
    node_ids: Tuple[int, ...]

    @property
    def evaluation_order(self) -> List[int]:
        return [self.node_ids[e.slot] for e in self.order]

    def incoming(self, node_id: int) -> List[Tuple[int, float]]:
        slot = self.node_ids.index(node_id)
        for e in self.order:
            if e.slot == slot:
                return [(self.node_ids[s], float(w)) for s, w in zip(e.sources, e.weights)]
        return []


def _topological_order(node_ids: Sequence[int], edges: Sequence[Tuple[int, int]]) -> List[int]:
    indegree = {n: 0 for n in node_ids}
    outgoing: Dict[int, List[int]] = {n: [] for n in node_ids}
    for a, b in edges:
        outgoing[a].append(b)
        indegree[b] += 1
    ready = [n for n, d in indegree.items() if d == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        node = heapq.heappop(ready)
        order.append(node)
        for nxt in outgoing[node]:
            indegree[nxt] -= 1
            if indegree[nxt] == 0:
                heapq.heappush(ready, nxt)
    if len(order) != len(node_ids):
        raise MalformedGenomeError("enabled connections form a cycle")
    return order


def compile_genome(g: AgentGenome) -> CompiledNetwork:
    """Build the evaluable network from the genome's enabled connections.

    Output nodes always squash with tanh; hidden nodes use their own activation.
    """
    inputs = [n for n in g.nodes if n.kind is NodeKind.INPUT]
    biases = [n for n in g.nodes if n.kind is NodeKind.BIAS]
    outputs = [n for n in g.nodes if n.kind is NodeKind.OUTPUT]
    if len(biases) != 1:
        raise MalformedGenomeError(f"genome {g.genome_id} must have exactly one bias node")

    fixed = [n.id for n in inputs] + [biases[0].id]
    computed = [n for n in g.nodes if n.kind in (NodeKind.HIDDEN, NodeKind.OUTPUT)]
    node_ids = tuple(fixed + [n.id for n in computed])
    slot_of = {node_id: i for i, node_id in enumerate(node_ids)}

    enabled = [c for c in g.connections if c.enabled]
    for c in enabled:
        if c.from_node not in slot_of or c.to_node not in slot_of:
            raise MalformedGenomeError(
                f"genome {g.genome_id}: connection {c.innovation} references a missing node"
            )
    order_ids = _topological_order(list(node_ids), [c.key for c in enabled])

    incoming: Dict[int, List[Tuple[int, float]]] = {n.id: [] for n in computed}
    for c in enabled:
        if c.to_node not in incoming:
            raise MalformedGenomeError(
                f"genome {g.genome_id}: connection {c.innovation} feeds an input or bias node"
            )
        incoming[c.to_node].append((slot_of[c.from_node], c.weight))

    node_map = g.node_map
    order = []
    for node_id in order_ids:
        if node_id not in incoming:
            continue
        node = node_map[node_id]
        edges = incoming[node_id]
        order.append(
            NodeEval(
                slot=slot_of[node_id],
                activation=Activation.TANH if node.kind is NodeKind.OUTPUT else node.activation,
                bias=node.bias,
                response=node.response,
                sources=np.array([s for s, _ in edges], dtype=np.intp),
                weights=np.array([w for _, w in edges], dtype=np.float64),
            )
        )
    return CompiledNetwork(
        num_inputs=len(inputs),
        num_outputs=len(outputs),
        order=tuple(order),
        output_slots=tuple(slot_of[n.id] for n in outputs),
        num_slots=len(node_ids),
        hidden_count=g.hidden_count,
        connection_count=len(enabled),
        node_ids=node_ids,
    )


def activate(net: CompiledNetwork, obs: Sequence[float]) -> np.ndarray:
    """Evaluate the network on one observation. Stateless between calls."""
    obs = np.asarray(obs, dtype=np.float64)
    if obs.shape != (net.num_inputs,):
        raise ContractError(
            f"observation has shape {obs.shape}, network expects ({net.num_inputs},)"
        )
    values = np.zeros(net.num_slots, dtype=np.float64)
    values[: net.num_inputs] = obs
    values[net.num_inputs] = 1.0
    for e in net.order:
        total = float(np.dot(e.weights, values[e.sources])) if e.sources.size else 0.0
        values[e.slot] = ACTIVATIONS[e.activation](e.bias + e.response * total)
    return values[list(net.output_slots)]
