"""Per-question document graph linked by shared entities.

Every (document, mention) pair is a node. Two nodes are connected when they
carry the same normalized entity key and belong to different documents.
"""

from collections import defaultdict
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
import numpy.typing as npt

from anyhop.client.corpus import tokenize_question
from anyhop.client.models import Document, EntityMention, Question


DEFAULT_ENTITY_CAP = 120


@dataclass(frozen=True)
class GraphNode:
    """An entity mention owned by one document of the graph."""

    doc_index: int
    mention: EntityMention

    @property
    def entity_key(self) -> str:
        """Normalized entity key of the mention."""
        return self.mention.entity_key


@dataclass(frozen=True)
class DocGraph:
    """Entity graph over an ordered document list.

    Attributes
    ----------
    docs : tuple[str, ...]
        Document ids, node ``doc_index`` values point into this tuple
    nodes : tuple[GraphNode, ...]
        Nodes in (document, position) order
    neighbors : tuple[tuple[int, ...], ...]
        Sorted neighbor indices per node, self excluded
    """

    docs: tuple[str, ...]
    nodes: tuple[GraphNode, ...]
    neighbors: tuple[tuple[int, ...], ...]

    @property
    def num_nodes(self) -> int:
        """Number of nodes."""
        return len(self.nodes)

    @property
    def edges(self) -> list[tuple[int, int]]:
        """Undirected edges as sorted ``(i, j)`` pairs with ``i < j``."""
        return [
            (i, j)
            for i, adjacent in enumerate(self.neighbors)
            for j in adjacent
            if i < j
        ]

    def adjacency(self, self_loops: bool = False) -> npt.NDArray[np.bool_]:
        """Return the symmetric boolean adjacency matrix."""
        matrix = np.zeros((self.num_nodes, self.num_nodes), dtype=bool)
        for i, adjacent in enumerate(self.neighbors):
            matrix[i, list(adjacent)] = True
        if self_loops:
            np.fill_diagonal(matrix, True)
        return matrix

    def subgraph(self, keep: Sequence[int]) -> "DocGraph":
        """Return the graph induced by the node indices in ``keep``."""
        keep = sorted(keep)
        relabel = {old: new for new, old in enumerate(keep)}
        neighbors = tuple(
            tuple(relabel[j] for j in self.neighbors[i] if j in relabel) for i in keep
        )
        return DocGraph(
            docs=self.docs,
            nodes=tuple(self.nodes[i] for i in keep),
            neighbors=neighbors,
        )

    def without_edges(self) -> "DocGraph":
        """Return the same nodes with an empty edge set."""
        return DocGraph(
            docs=self.docs,
            nodes=self.nodes,
            neighbors=tuple(() for _ in self.nodes),
        )


def _occurs_in(key: str, folded: Sequence[str]) -> bool:
    key_tokens = key.split(" ")
    width = len(key_tokens)
    return any(
        list(folded[i : i + width]) == key_tokens
        for i in range(len(folded) - width + 1)
    )


def _cap_nodes(
    candidates: list[GraphNode],
    docs: Sequence[Document],
    question: Question,
    entity_cap: int,
) -> list[GraphNode]:
    doc_sets: dict[str, set[str]] = defaultdict(set)
    for node in candidates:
        doc_sets[node.entity_key].add(docs[node.doc_index].id)
    folded = [token.casefold() for token in tokenize_question(question)]
    question_keys = {key for key in doc_sets if _occurs_in(key, folded)}

    ranked = sorted(
        candidates,
        key=lambda node: (
            -len(doc_sets[node.entity_key]),
            node.entity_key not in question_keys,
            node.mention.token_start,
            docs[node.doc_index].id,
        ),
    )
    kept = ranked[:entity_cap]
    return sorted(kept, key=lambda node: (node.doc_index, node.mention.token_start))


def build_graph(
    question: Question,
    docs: Sequence[Document],
    entity_cap: int = DEFAULT_ENTITY_CAP,
) -> DocGraph:
    """Build the shared-entity graph of a document list.

    Parameters
    ----------
    question : Question
        Current question, used to prioritize question entities when capping
    docs : Sequence[Document]
        Documents in reranker input order, non-empty
    entity_cap : int, default=120
        Maximum number of nodes

    Returns
    -------
    DocGraph
        One node per (document, mention); when the mentions exceed the cap,
        the kept ones are those whose key occurs in the most documents, then
        question entities, then the earliest positions
    """
    if not docs:
        raise ValueError("build_graph needs at least one document")
    candidates = [
        GraphNode(doc_index, mention)
        for doc_index, doc in enumerate(docs)
        for mention in doc.mentions
    ]
    nodes = (
        _cap_nodes(candidates, docs, question, entity_cap)
        if len(candidates) > entity_cap
        else candidates
    )

    by_key: dict[str, list[int]] = defaultdict(list)
    for i, node in enumerate(nodes):
        by_key[node.entity_key].append(i)
    neighbors = tuple(
        tuple(
            j
            for j in by_key[node.entity_key]
            if nodes[j].doc_index != node.doc_index
        )
        for node in nodes
    )
    return DocGraph(
        docs=tuple(doc.id for doc in docs),
        nodes=tuple(nodes),
        neighbors=neighbors,
    )


def dump_edge_list(graph: DocGraph, path: Union[str, Path]) -> None:
    """Write the graph as a tab-separated edge list.

    Each line holds ``i, j, entity_key, doc_i, doc_j`` for one undirected edge.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        f.write("# node_i\tnode_j\tentity_key\tdoc_i\tdoc_j\n")
        for i, j in graph.edges:
            node_i, node_j = graph.nodes[i], graph.nodes[j]
            f.write(
                f"{i}\t{j}\t{node_i.entity_key}\t"
                f"{graph.docs[node_i.doc_index]}\t{graph.docs[node_j.doc_index]}\n"
            )
