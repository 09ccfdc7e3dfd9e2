import hashlib
import json
from dataclasses import dataclass, replace
from enum import Enum
from functools import cached_property
from typing import Any, Dict, FrozenSet, Iterable, List, Mapping, Optional, Tuple

from atep.core.errors import EvaluationOrderError, MalformedGenomeError


class NodeKind(str, Enum):
    INPUT = "input"
    OUTPUT = "output"
    HIDDEN = "hidden"
    BIAS = "bias"


class Activation(str, Enum):
    TANH = "tanh"
    SIGMOID = "sigmoid"
    SINE = "sine"
    GAUSS = "gauss"
    IDENTITY = "identity"
    RELU = "relu"


@dataclass(frozen=True)
class GenomeSignature:
    """Fixed interface of a genome: input nodes, one bias node, output nodes.

    Node ids are laid out as inputs ``0..n_in-1``, bias ``n_in``, outputs after that.
    Hidden node ids start at ``first_hidden_id``.
    """

    num_inputs: int
    num_outputs: int

    @property
    def input_ids(self) -> Tuple[int, ...]:
        return tuple(range(self.num_inputs))

    @property
    def bias_id(self) -> int:
        return self.num_inputs

    @property
    def output_ids(self) -> Tuple[int, ...]:
        start = self.num_inputs + 1
        return tuple(range(start, start + self.num_outputs))

    @property
    def first_hidden_id(self) -> int:
        return self.num_inputs + 1 + self.num_outputs

    def interface_nodes(self, output_activation: Activation = Activation.TANH) -> List["NodeGene"]:
        nodes = [NodeGene(i, NodeKind.INPUT, Activation.IDENTITY) for i in self.input_ids]
        nodes.append(NodeGene(self.bias_id, NodeKind.BIAS, Activation.IDENTITY))
        nodes.extend(NodeGene(o, NodeKind.OUTPUT, output_activation) for o in self.output_ids)
        return nodes


@dataclass(frozen=True)
class NodeGene:
    id: int
    kind: NodeKind
    activation: Activation = Activation.TANH
    response: float = 1.0
    bias: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "kind": self.kind.value,
            "activation": self.activation.value,
            "response": self.response,
            "bias": self.bias,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "NodeGene":
        return cls(
            id=int(data["id"]),
            kind=NodeKind(data["kind"]),
            activation=Activation(data["activation"]),
            response=float(data["response"]),
            bias=float(data["bias"]),
        )


@dataclass(frozen=True)
class ConnectionGene:
    innovation: int
    from_node: int
    to_node: int
    weight: float
    enabled: bool = True

    @property
    def key(self) -> Tuple[int, int]:
        return (self.from_node, self.to_node)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "innovation": self.innovation,
            "from_node": self.from_node,
            "to_node": self.to_node,
            "weight": self.weight,
            "enabled": self.enabled,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ConnectionGene":
        return cls(
            innovation=int(data["innovation"]),
            from_node=int(data["from_node"]),
            to_node=int(data["to_node"]),
            weight=float(data["weight"]),
            enabled=bool(data["enabled"]),
        )


@dataclass(frozen=True)
class AgentGenome:
    """NEAT genome. Nodes are kept sorted by id, connections by innovation.

    Instances are never edited in place; every operator returns a new genome.
    """

    genome_id: int
    nodes: Tuple[NodeGene, ...]
    connections: Tuple[ConnectionGene, ...]
    fitness: Optional[float] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "nodes", tuple(sorted(self.nodes, key=lambda n: n.id)))
        object.__setattr__(
            self, "connections", tuple(sorted(self.connections, key=lambda c: c.innovation))
        )

    @cached_property
    def node_map(self) -> Dict[int, NodeGene]:
        return {n.id: n for n in self.nodes}

    @cached_property
    def connection_map(self) -> Dict[int, ConnectionGene]:
        return {c.innovation: c for c in self.connections}

    @property
    def max_innovation(self) -> int:
        return self.connections[-1].innovation if self.connections else 0

    @property
    def hidden_count(self) -> int:
        return sum(1 for n in self.nodes if n.kind is NodeKind.HIDDEN)

    @property
    def enabled_connection_count(self) -> int:
        return sum(1 for c in self.connections if c.enabled)

    def gene_set(self) -> Tuple[FrozenSet[int], FrozenSet[int]]:
        return frozenset(self.node_map), frozenset(self.connection_map)

    def require_fitness(self) -> float:
        if self.fitness is None:
            raise EvaluationOrderError(f"genome {self.genome_id} has not been evaluated")
        return self.fitness

    def with_fitness(self, fitness: Optional[float]) -> "AgentGenome":
        return replace(self, fitness=fitness)

    def with_id(self, genome_id: int) -> "AgentGenome":
        return replace(self, genome_id=genome_id)

    def validate(self) -> None:
        ids = [n.id for n in self.nodes]
        if len(ids) != len(set(ids)):
            raise MalformedGenomeError(f"genome {self.genome_id}: duplicate node ids")
        innovations = [c.innovation for c in self.connections]
        if len(innovations) != len(set(innovations)):
            raise MalformedGenomeError(f"genome {self.genome_id}: duplicate innovations")
        pairs = [c.key for c in self.connections]
        if len(pairs) != len(set(pairs)):
            raise MalformedGenomeError(f"genome {self.genome_id}: duplicate (from, to) pairs")
        known = self.node_map
        for c in self.connections:
            if c.from_node not in known or c.to_node not in known:
                raise MalformedGenomeError(
                    f"genome {self.genome_id}: connection {c.innovation} references a missing node"
                )
        if has_cycle(c.key for c in self.connections if c.enabled):
            raise MalformedGenomeError(f"genome {self.genome_id}: enabled connections form a cycle")

    def structural_hash(self) -> str:
        """Content hash ignoring genome id and fitness; used for deterministic tie-breaks."""
        payload = {
            "nodes": [n.to_dict() for n in self.nodes],
            "connections": [c.to_dict() for c in self.connections],
        }
        return hashlib.sha1(json.dumps(payload, sort_keys=True).encode("utf-8")).hexdigest()

    def to_dict(self) -> Dict[str, Any]:
        return {
            "genome_id": self.genome_id,
            "fitness": self.fitness,
            "nodes": [n.to_dict() for n in self.nodes],
            "connections": [c.to_dict() for c in self.connections],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "AgentGenome":
        fitness = data.get("fitness")
        return cls(
            genome_id=int(data["genome_id"]),
            nodes=tuple(NodeGene.from_dict(n) for n in data["nodes"]),
            connections=tuple(ConnectionGene.from_dict(c) for c in data["connections"]),
            fitness=None if fitness is None else float(fitness),
        )


def dumps_genome(genome: AgentGenome) -> str:
    """Byte-stable text record of a genome (nodes by id, connections by innovation)."""
    return json.dumps(genome.to_dict(), sort_keys=True, indent=1)


def loads_genome(text: str) -> AgentGenome:
    return AgentGenome.from_dict(json.loads(text))


def rank_key(genome: AgentGenome) -> Tuple[float, int]:
    """Sort key for 'best first': fitness descending, then genome id ascending."""
    return (-genome.require_fitness(), genome.genome_id)


def best_genome(genomes: Iterable[AgentGenome]) -> AgentGenome:
    return min(genomes, key=rank_key)


def adjacency(edges: Iterable[Tuple[int, int]]) -> Dict[int, List[int]]:
    adj: Dict[int, List[int]] = {}
    for a, b in edges:
        adj.setdefault(a, []).append(b)
    return adj


def reaches(adj: Mapping[int, List[int]], start: int, goal: int) -> bool:
    stack = [start]
    visited = set()
    while stack:
        node = stack.pop()
        if node == goal:
            return True
        if node in visited:
            continue
        visited.add(node)
        stack.extend(adj.get(node, ()))
    return False


def creates_cycle(adj: Mapping[int, List[int]], from_node: int, to_node: int) -> bool:
    """True if adding from_node -> to_node to the graph ``adj`` would close a cycle."""
    if from_node == to_node:
        return True
    return reaches(adj, to_node, from_node)


def has_cycle(edges: Iterable[Tuple[int, int]]) -> bool:
    adj: Dict[int, List[int]] = {}
    for a, b in edges:
        if creates_cycle(adj, a, b):
            return True
        adj.setdefault(a, []).append(b)
    return False
