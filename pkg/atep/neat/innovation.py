from dataclasses import dataclass, field
from typing import Any, Collection, Dict, Hashable, Mapping, Tuple

from atep.neat.genome import AgentGenome, ConnectionGene, GenomeSignature, NodeGene

# Canonical, namespace-independent description of where a node came from:
#   ("io", id)                    interface node
#   ("layer", layer, unit)        fixed-topology hidden unit
#   ("split", key_a, key_b, k)    k-th node created by splitting a -> b
NodeKey = Tuple[Hashable, ...]


def _freeze(value: Any) -> Any:
    if isinstance(value, list):
        return tuple(_freeze(v) for v in value)
    return value


def _thaw(value: Any) -> Any:
    if isinstance(value, tuple):
        return [_thaw(v) for v in value]
    return value


@dataclass
class IdCounter:
    """Monotone id source (genome ids, species ids, environment ids)."""

    next_id: int = 0

    def take(self) -> int:
        value = self.next_id
        self.next_id += 1
        return value


@dataclass
class InnovationRegistry:
    """Innovation bookkeeping for one structural lineage.

    A (from_node, to_node) pair keeps the innovation number it was first given for the
    whole run. Node ids are derived from canonical origin keys so that a genome can be
    translated into another registry's numbering (see ``translate``).
    """

    next_innovation: int = 1
    next_node_id: int = 0
    seen: Dict[Tuple[int, int], int] = field(default_factory=dict)
    node_keys: Dict[NodeKey, int] = field(default_factory=dict)
    node_origin: Dict[int, NodeKey] = field(default_factory=dict)

    @classmethod
    def for_signature(cls, signature: GenomeSignature) -> "InnovationRegistry":
        reg = cls(next_node_id=signature.first_hidden_id)
        for node_id in (*signature.input_ids, signature.bias_id, *signature.output_ids):
            key = ("io", node_id)
            reg.node_keys[key] = node_id
            reg.node_origin[node_id] = key
        return reg

    def connection_innovation(self, from_node: int, to_node: int) -> int:
        pair = (from_node, to_node)
        innovation = self.seen.get(pair)
        if innovation is None:
            innovation = self.next_innovation
            self.next_innovation += 1
            self.seen[pair] = innovation
        return innovation

    def node_for_key(self, key: NodeKey) -> int:
        node_id = self.node_keys.get(key)
        if node_id is None:
            node_id = self.next_node_id
            self.next_node_id += 1
            self.node_keys[key] = node_id
            self.node_origin[node_id] = key
        return node_id

    def key_of(self, node_id: int) -> NodeKey:
        return self.node_origin[node_id]

    def split_node(self, from_node: int, to_node: int, taken: Collection[int]) -> int:
        """Node id for splitting from_node -> to_node, skipping ids already in the genome."""
        base = (self.key_of(from_node), self.key_of(to_node))
        k = 0
        while True:
            node_id = self.node_for_key(("split", *base, k))
            if node_id not in taken:
                return node_id
            k += 1

    def layer_node(self, layer: int, unit: int) -> int:
        return self.node_for_key(("layer", layer, unit))

    def translate(self, genome: AgentGenome, source: "InnovationRegistry") -> AgentGenome:
        """Renumber a genome from ``source``'s namespace into this registry's namespace."""
        if source is self:
            return genome
        id_map = {n.id: self.node_for_key(source.key_of(n.id)) for n in genome.nodes}
        nodes = [
            NodeGene(id_map[n.id], n.kind, n.activation, n.response, n.bias) for n in genome.nodes
        ]
        connections = [
            ConnectionGene(
                innovation=self.connection_innovation(id_map[c.from_node], id_map[c.to_node]),
                from_node=id_map[c.from_node],
                to_node=id_map[c.to_node],
                weight=c.weight,
                enabled=c.enabled,
            )
            for c in genome.connections
        ]
        return AgentGenome(genome.genome_id, tuple(nodes), tuple(connections), genome.fitness)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "next_innovation": self.next_innovation,
            "next_node_id": self.next_node_id,
            "seen": [[a, b, i] for (a, b), i in sorted(self.seen.items(), key=lambda kv: kv[1])],
            "nodes": [[node_id, _thaw(key)] for node_id, key in sorted(self.node_origin.items())],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "InnovationRegistry":
        reg = cls(
            next_innovation=int(data["next_innovation"]),
            next_node_id=int(data["next_node_id"]),
        )
        for a, b, innovation in data["seen"]:
            reg.seen[(int(a), int(b))] = int(innovation)
        for node_id, key in data["nodes"]:
            frozen = _freeze(key)
            reg.node_keys[frozen] = int(node_id)
            reg.node_origin[int(node_id)] = frozen
        return reg


def registry_copy(reg: InnovationRegistry) -> InnovationRegistry:
    return InnovationRegistry(
        next_innovation=reg.next_innovation,
        next_node_id=reg.next_node_id,
        seen=dict(reg.seen),
        node_keys=dict(reg.node_keys),
        node_origin=dict(reg.node_origin),
    )
