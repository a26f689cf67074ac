"""Graph-based document reranker.

For every document set the reranker

1. pools each graph node's mention rows and the question rows of the encoding,
2. gates every node by its question relevance (soft mask),
3. propagates node vectors over shared-entity edges with graph attention,
4. writes the propagated vectors back into the mention rows and fuses all
   documents with one transformer layer,
5. scores each document from its sequence-start row.

Training minimizes the mean binary cross-entropy between scores and
supporting-document labels with plain gradient descent. The encoder is frozen.
"""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
import numpy.typing as npt

from anyhop.client._client_vars import LEAKY_RELU_SLOPE
from anyhop.client._exceptions import TrainingDivergedError
from anyhop.client._layers import (
    Array,
    BoolArray,
    ParamSet,
    TransformerParams,
    bce_with_logits,
    masked_softmax,
    sigmoid,
    softmax_backward,
    transformer_backward,
    transformer_forward,
)
from anyhop.client.config import EncoderConfig
from anyhop.client.encoder import EncodedDocs, get_encoder, pool_entity, pool_question
from anyhop.client.graph import DEFAULT_ENTITY_CAP, DocGraph, build_graph
from anyhop.client.models import Document, Question


logger = logging.getLogger(__name__)


@dataclass
class RerankerParams(ParamSet):
    """Trainable tensors of the graph reranker, with ``d = 2h``.

    Attributes
    ----------
    mask_v : np.ndarray
        ``d x d`` soft mask projection
    gat_w1 : np.ndarray
        ``T x d x d`` per-layer node projections
    gat_b1 : np.ndarray
        ``T x d`` per-layer node biases
    gat_w2 : np.ndarray
        ``T x 2d`` per-layer attention vectors
    w3 : np.ndarray
        ``h x 3h`` projection writing node vectors back into token rows
    fusion : TransformerParams
        Multi-document fusion layer
    scorer_w : np.ndarray
        ``h`` document classifier weight
    scorer_b : np.ndarray
        Document classifier bias, shape ``(1,)``
    """

    mask_v: Array
    gat_w1: Array
    gat_b1: Array
    gat_w2: Array
    w3: Array
    fusion: TransformerParams
    scorer_w: Array
    scorer_b: Array

    @property
    def hidden_size(self) -> int:
        """Encoder embedding size h."""
        return int(self.w3.shape[0])

    @property
    def num_layers(self) -> int:
        """Number of graph attention layers T."""
        return int(self.gat_w1.shape[0])

    @classmethod
    def initialize(
        cls, hidden_size: int, num_layers: int = 2, seed: int = 0
    ) -> "RerankerParams":
        """Seeded initialization.

        Graph layers start close to the identity and ``w3`` starts close to
        ``[I | 0]``, so an untrained reranker scores documents from their
        unmodified encodings.
        """
        rng = np.random.default_rng(seed)
        h, d = hidden_size, 2 * hidden_size
        noise = 0.1 / math.sqrt(d)
        w3 = np.hstack([np.eye(h), rng.normal(0.0, noise, (h, d))])
        return cls(
            mask_v=rng.normal(0.0, noise, (d, d)),
            gat_w1=np.stack(
                [np.eye(d) + rng.normal(0.0, noise, (d, d)) for _ in range(num_layers)]
            ),
            gat_b1=np.zeros((num_layers, d)),
            gat_w2=rng.normal(0.0, noise, (num_layers, 2 * d)),
            w3=w3,
            fusion=TransformerParams.initialize(h, rng),
            scorer_w=rng.normal(0.0, 0.1 / math.sqrt(h), h),
            scorer_b=np.zeros(1),
        )


@dataclass(frozen=True)
class RerankInput:
    """Everything the reranker needs about one (question, document set).

    Attributes
    ----------
    encoded : EncodedDocs
        Frozen encoding of the question against every document
    graph : DocGraph
        Entity graph restricted to nodes whose mentions survived truncation
    node_rows : tuple[tuple[int, ...], ...]
        Rows of ``encoded.v`` covered by each node's mention
    entities : np.ndarray
        ``n x 2h`` pooled node vectors
    question : np.ndarray
        ``2h`` pooled question vector
    """

    encoded: EncodedDocs
    graph: DocGraph
    node_rows: tuple[tuple[int, ...], ...]
    entities: Array
    question: Array

    @property
    def num_docs(self) -> int:
        """Number of documents being reranked."""
        return self.encoded.num_docs


@dataclass
class RerankOutput:
    """Scores and intermediate tensors of one reranker forward pass.

    Attributes
    ----------
    scores : np.ndarray
        Per-document scores in (0, 1)
    masks : np.ndarray
        Soft mask value of every node
    attentions : list[np.ndarray]
        ``n x n`` attention weights of each graph layer
    fused : np.ndarray
        Output of the fusion layer
    """

    scores: Array
    masks: Array
    attentions: list[Array]
    fused: Array
    logits: Array = field(repr=False, default_factory=lambda: np.zeros(0))


def prepare_input(
    question: Question,
    docs: Sequence[Document],
    encoder: EncoderConfig,
    entity_cap: int = DEFAULT_ENTITY_CAP,
    use_graph: bool = True,
) -> RerankInput:
    """Encode a document set and build its entity graph.

    Nodes whose mention is cut by truncation are dropped. With ``use_graph``
    disabled every node keeps only its self-loop.
    """
    encoded = get_encoder(encoder).encode_docs(question, docs)
    graph = build_graph(question, docs, entity_cap) if docs else DocGraph((), (), ())
    keep = []
    rows = []
    for i, node in enumerate(graph.nodes):
        mention_rows = encoded.mention_rows(node.doc_index, node.mention)
        if mention_rows is not None:
            keep.append(i)
            rows.append(tuple(mention_rows))
    if len(keep) != graph.num_nodes:
        graph = graph.subgraph(keep)
    if not use_graph:
        graph = graph.without_edges()

    hidden = encoded.v.shape[1]
    entities = (
        np.stack(
            [pool_entity(encoded, node.doc_index, node.mention) for node in graph.nodes]
        )
        if graph.nodes
        else np.zeros((0, 2 * hidden))
    )
    return RerankInput(
        encoded=encoded,
        graph=graph,
        node_rows=tuple(rows),
        entities=entities,
        question=pool_question(encoded) if docs else np.zeros(2 * hidden),
    )


def soft_mask(question: Array, entities: Array, mask_v: Array) -> tuple[Any, Any]:
    """Gate entity vectors by their relevance to the question.

    Parameters
    ----------
    question : np.ndarray
        ``2h`` pooled question vector
    entities : np.ndarray
        One ``2h`` entity vector or an ``n x 2h`` matrix of them
    mask_v : np.ndarray
        ``2h x 2h`` projection

    Returns
    -------
    tuple
        ``m = sigmoid(q^T V e / sqrt(2h))`` and ``g = m * e``, per entity
    """
    logits = (entities @ (question @ mask_v)) / math.sqrt(question.shape[0])
    masks = sigmoid(logits)
    gated = masks[..., None] * entities if np.ndim(entities) > 1 else masks * entities
    return masks, gated


def _leaky_relu(x: Array) -> Array:
    return np.where(x > 0, x, LEAKY_RELU_SLOPE * x)


def gat_forward(
    nodes: Array,
    neighborhood: BoolArray,
    gat_w1: Array,
    gat_b1: Array,
    gat_w2: Array,
) -> tuple[Array, list[dict[str, Array]]]:
    """Run the stacked graph attention layers.

    Parameters
    ----------
    nodes : np.ndarray
        ``n x d`` input node vectors
    neighborhood : np.ndarray
        ``n x n`` boolean attention mask, symmetric and with self-loops
    gat_w1, gat_b1, gat_w2 : np.ndarray
        Stacked per-layer weights

    Returns
    -------
    tuple[np.ndarray, list[dict[str, np.ndarray]]]
        Output node vectors and one cache per layer, holding the attention
        weights under ``"alpha"``
    """
    d = nodes.shape[1]
    caches = []
    current = nodes
    for t in range(gat_w1.shape[0]):
        hidden = current @ gat_w1[t].T + gat_b1[t]
        pre = (hidden @ gat_w2[t][:d])[:, None] + (hidden @ gat_w2[t][d:])[None, :]
        alpha = masked_softmax(_leaky_relu(pre), neighborhood)
        aggregated = alpha @ hidden
        caches.append(
            {
                "input": current,
                "hidden": hidden,
                "pre": pre,
                "alpha": alpha,
                "aggregated": aggregated,
            }
        )
        current = np.maximum(aggregated, 0.0)
    return current, caches


def gat_backward(
    dout: Array,
    caches: list[dict[str, Array]],
    gat_w1: Array,
    gat_w2: Array,
) -> tuple[Array, Array, Array, Array]:
    """Backward pass of :func:`gat_forward`.

    Returns
    -------
    tuple
        Gradients of the input nodes, ``gat_w1``, ``gat_b1`` and ``gat_w2``
    """
    d = dout.shape[1]
    d_w1 = np.zeros_like(gat_w1)
    d_b1 = np.zeros((gat_w1.shape[0], d))
    d_w2 = np.zeros_like(gat_w2)
    grad = dout
    for t in reversed(range(len(caches))):
        cache = caches[t]
        alpha, hidden = cache["alpha"], cache["hidden"]
        daggregated = grad * (cache["aggregated"] > 0)
        dalpha = daggregated @ hidden.T
        dhidden = alpha.T @ daggregated
        dscore = softmax_backward(alpha, dalpha)
        dpre = dscore * np.where(cache["pre"] > 0, 1.0, LEAKY_RELU_SLOPE)
        dsource = dpre.sum(axis=1)
        dtarget = dpre.sum(axis=0)
        d_w2[t, :d] = dsource @ hidden
        d_w2[t, d:] = dtarget @ hidden
        dhidden += np.outer(dsource, gat_w2[t][:d]) + np.outer(dtarget, gat_w2[t][d:])
        d_w1[t] = dhidden.T @ cache["input"]
        d_b1[t] = dhidden.sum(axis=0)
        grad = dhidden @ gat_w1[t]
    return grad, d_w1, d_b1, d_w2


def _row_node_pairs(node_rows: Sequence[Sequence[int]]) -> tuple[Any, Any]:
    rows = np.array([r for rows in node_rows for r in rows], dtype=np.int64)
    owners = np.array(
        [i for i, rows in enumerate(node_rows) for _ in rows], dtype=np.int64
    )
    return rows, owners


def fuse(
    encoded: EncodedDocs,
    nodes: Array,
    node_rows: Sequence[Sequence[int]],
    params: RerankerParams,
) -> tuple[Array, dict[str, Any]]:
    """Write node vectors into their token rows, then fuse all documents.

    Every mention row ``t`` of node ``i`` becomes ``W3 [t; g_i]``; the result
    passes through the fusion transformer layer over all ``|D| * L`` rows.

    Returns
    -------
    tuple[np.ndarray, dict[str, Any]]
        Fused rows ``(|D| * L) x h`` and the backward cache
    """
    v = encoded.v
    rows, owners = _row_node_pairs(node_rows)
    written = v.copy()
    concat = np.zeros((0, 3 * v.shape[1]))
    if rows.size:
        concat = np.hstack([v[rows], nodes[owners]])
        written[rows] = concat @ params.w3.T
    fused, cache = transformer_forward(written, encoded.valid_mask, params.fusion)
    return fused, {"rows": rows, "owners": owners, "concat": concat, "fusion": cache}


def score_documents(
    fused: Array, cls_positions: Sequence[int], scorer_w: Array, scorer_b: Array
) -> Array:
    """Score each document from its sequence-start row, in (0, 1)."""
    return sigmoid(fused[list(cls_positions)] @ scorer_w + scorer_b[0])


def filter_topk(
    scores: Sequence[float],
    top_k: int,
    first_hops: Optional[Sequence[int]] = None,
    doc_ids: Optional[Sequence[str]] = None,
) -> list[int]:
    """Select the indices of the K best documents.

    Parameters
    ----------
    scores : Sequence[float]
        Per-document scores
    top_k : int
        Number of documents to keep, at least 1
    first_hops : Sequence[int], optional
        Hop at which each document was first retrieved
    doc_ids : Sequence[str], optional
        Document ids

    Returns
    -------
    list[int]
        Kept indices, best first; ties go to the earlier hop, then to the
        smaller doc id, then to the earlier index
    """
    if top_k < 1:
        raise ValueError(f"top_k must be >= 1, got {top_k}")
    hops = first_hops if first_hops is not None else [0] * len(scores)
    ids = doc_ids if doc_ids is not None else [""] * len(scores)
    order = sorted(
        range(len(scores)), key=lambda i: (-float(scores[i]), hops[i], ids[i], i)
    )
    return order[:top_k]


def _forward(
    inputs: RerankInput, params: RerankerParams
) -> tuple[RerankOutput, dict[str, Any]]:
    graph = inputs.graph
    masks, gated = soft_mask(inputs.question, inputs.entities, params.mask_v)
    gat_caches: list[dict[str, Array]] = []
    propagated = gated
    if graph.num_nodes:
        propagated, gat_caches = gat_forward(
            gated,
            graph.adjacency(self_loops=True),
            params.gat_w1,
            params.gat_b1,
            params.gat_w2,
        )
    fused, fuse_cache = fuse(inputs.encoded, propagated, inputs.node_rows, params)
    cls_rows = fused[inputs.encoded.cls_positions]
    logits = cls_rows @ params.scorer_w + params.scorer_b[0]
    output = RerankOutput(
        scores=sigmoid(logits),
        masks=masks,
        attentions=[cache["alpha"] for cache in gat_caches],
        fused=fused,
        logits=logits,
    )
    cache = {"gat": gat_caches, "fuse": fuse_cache, "cls_rows": cls_rows}
    return output, cache


def rerank(inputs: RerankInput, params: RerankerParams) -> RerankOutput:
    """Score every document of a prepared input."""
    output, _ = _forward(inputs, params)
    return output


def loss_and_grad(
    inputs: RerankInput, labels: Sequence[float], params: RerankerParams
) -> tuple[float, RerankerParams]:
    """Binary cross-entropy of one sample and its exact parameter gradients.

    Parameters
    ----------
    inputs : RerankInput
        Prepared document set
    labels : Sequence[float]
        0/1 supporting label per document
    params : RerankerParams
        Current parameters

    Returns
    -------
    tuple[float, RerankerParams]
        Mean loss over documents and the gradient of every tensor

    Raises
    ------
    TrainingDivergedError
        If the loss is not finite
    """
    y = np.asarray(labels, dtype=np.float64)
    output, cache = _forward(inputs, params)
    loss = float(bce_with_logits(output.logits, y).mean())
    if not math.isfinite(loss):
        raise TrainingDivergedError(f"Reranker loss is not finite: {loss}")

    h = params.hidden_size
    dlogits = (output.scores - y) / y.shape[0]
    d_scorer_w = dlogits @ cache["cls_rows"]
    d_scorer_b = np.array([dlogits.sum()])
    dfused = np.zeros_like(output.fused)
    dfused[inputs.encoded.cls_positions] = np.outer(dlogits, params.scorer_w)

    fuse_cache = cache["fuse"]
    dwritten, d_fusion = transformer_backward(
        dfused, fuse_cache["fusion"], params.fusion
    )
    d_w3 = np.zeros_like(params.w3)
    n_nodes = inputs.graph.num_nodes
    dpropagated = np.zeros((n_nodes, 2 * h))
    rows, owners = fuse_cache["rows"], fuse_cache["owners"]
    if rows.size:
        dconcat_out = dwritten[rows]
        d_w3 = dconcat_out.T @ fuse_cache["concat"]
        np.add.at(dpropagated, owners, (dconcat_out @ params.w3)[:, h:])

    d_gat_w1 = np.zeros_like(params.gat_w1)
    d_gat_b1 = np.zeros_like(params.gat_b1)
    d_gat_w2 = np.zeros_like(params.gat_w2)
    d_mask_v = np.zeros_like(params.mask_v)
    if n_nodes:
        dgated, d_gat_w1, d_gat_b1, d_gat_w2 = gat_backward(
            dpropagated, cache["gat"], params.gat_w1, params.gat_w2
        )
        masks = output.masks
        dlogit_mask = (dgated * inputs.entities).sum(axis=1) * masks * (1 - masks)
        scale = math.sqrt(inputs.question.shape[0])
        d_mask_v = np.outer(inputs.question, dlogit_mask @ inputs.entities) / scale

    grads = RerankerParams(
        mask_v=d_mask_v,
        gat_w1=d_gat_w1,
        gat_b1=d_gat_b1,
        gat_w2=d_gat_w2,
        w3=d_w3,
        fusion=d_fusion,
        scorer_w=d_scorer_w,
        scorer_b=d_scorer_b,
    )
    return loss, grads


@dataclass(frozen=True)
class RerankerExample:
    """A prepared training sample."""

    inputs: RerankInput
    labels: npt.NDArray[np.float64]


def batch_loss_and_grad(
    batch: Sequence[RerankerExample], params: RerankerParams
) -> tuple[float, RerankerParams]:
    """Average :func:`loss_and_grad` over a batch."""
    total = 0.0
    grads = params.zeros_like()
    for example in batch:
        loss, sample_grads = loss_and_grad(example.inputs, example.labels, params)
        total += loss
        grads = grads.add(sample_grads)
    scale = 1.0 / len(batch)
    return total * scale, grads.map(lambda tensor: tensor * scale)


def train(
    examples: Sequence[RerankerExample],
    params: RerankerParams,
    steps: int,
    lr: float,
    seed: int = 0,
    batch_size: int = 8,
    log_every: int = 50,
) -> tuple[RerankerParams, list[float]]:
    """Train the reranker with plain gradient descent.

    Batches are drawn from a seeded permutation of ``examples`` that is
    redrawn after each pass.

    Parameters
    ----------
    examples : Sequence[RerankerExample]
        Prepared samples
    params : RerankerParams
        Starting parameters, not modified
    steps : int
        Number of gradient steps; 0 returns ``params`` unchanged
    lr : float
        Learning rate, positive
    seed : int, default=0
        Seed of the batch order
    batch_size : int, default=8
        Samples per step
    log_every : int, default=50
        Steps between loss log lines

    Returns
    -------
    tuple[RerankerParams, list[float]]
        Trained parameters and the loss of every step, measured before the
        update of that step

    Raises
    ------
    TrainingDivergedError
        If a loss or a parameter becomes non-finite
    """
    return run_gradient_descent(
        examples,
        params,
        batch_loss_and_grad,
        steps=steps,
        lr=lr,
        seed=seed,
        batch_size=batch_size,
        log_every=log_every,
        name="reranker",
    )


def run_gradient_descent(
    examples: Sequence[Any],
    params: Any,
    batch_fn: Any,
    steps: int,
    lr: float,
    seed: int,
    batch_size: int,
    log_every: int,
    name: str,
) -> tuple[Any, list[float]]:
    """Shared plain gradient descent loop of every trainable model."""
    if lr <= 0:
        raise ValueError(f"lr must be > 0, got {lr}")
    if steps == 0:
        return params, []
    if not examples:
        raise ValueError(f"No training samples for the {name}")
    rng = np.random.default_rng(seed)
    order: list[int] = []
    losses = []
    for step in range(1, steps + 1):
        batch = []
        while len(batch) < min(batch_size, len(examples)):
            if not order:
                order = rng.permutation(len(examples)).tolist()
            batch.append(examples[order.pop()])
        loss, grads = batch_fn(batch, params)
        params = params.step(grads, lr)
        if not params.is_finite():
            raise TrainingDivergedError(f"{name} parameters diverged at step {step}")
        losses.append(loss)
        if step % log_every == 0 or step == steps:
            logger.info("%s step %d/%d loss %.5f", name, step, steps, loss)
    return params, losses


class GraphReranker:
    """Inference wrapper bundling parameters with their configuration.

    Parameters
    ----------
    params : RerankerParams
        Trained parameters
    encoder : EncoderConfig
        Encoder the parameters were trained against
    entity_cap : int, default=120
        Maximum graph nodes per document set
    use_graph : bool, default=True
        Propagate along shared-entity edges
    """

    def __init__(
        self,
        params: RerankerParams,
        encoder: EncoderConfig,
        entity_cap: int = DEFAULT_ENTITY_CAP,
        use_graph: bool = True,
    ):
        self.params = params
        self.encoder = encoder
        self.entity_cap = entity_cap
        self.use_graph = use_graph

    def score(
        self, question: Question, docs: Sequence[Document]
    ) -> tuple[Array, DocGraph]:
        """Score every document for the question, in input order.

        Returns
        -------
        tuple[np.ndarray, DocGraph]
            Scores and the entity graph they were computed over
        """
        inputs = prepare_input(
            question, docs, self.encoder, self.entity_cap, self.use_graph
        )
        return rerank(inputs, self.params).scores, inputs.graph
