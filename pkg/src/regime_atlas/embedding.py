"""Node embeddings for grid cells.

Default engine: a two-layer graph-convolutional encoder (widths 16 then
8) with an inner-product decoder, trained full-batch by gradient descent
on the cross-entropy between decoded and normalized edge weights. Steps
that would increase the loss are rejected with a halved rate for that
epoch, so the recorded loss history never increases.

Fallback engine: rank-8 truncated eigendecomposition of the symmetrically
normalized blend of adjacency and content similarity; deterministic and
training-free, used for oracle cross-checks and fast runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

EMBED_DIM = 8
HIDDEN_DIM = 16
EPOCHS = 200
LEARNING_RATE = 0.01


@dataclass
class CellEmbedding:
    """Embedding vectors of one grid cell's members."""

    stamp: int
    regime: int
    vectors: dict[int, np.ndarray]  # series index -> 8-vector
    engine: str
    loss_history: list[float] = field(default_factory=list)


def _sym_normalize(adj: np.ndarray) -> np.ndarray:
    """D^-1/2 (A + I) D^-1/2 with unit self-connections."""
    a_hat = adj + np.eye(adj.shape[0])
    deg = a_hat.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(deg)
    return a_hat * inv_sqrt[:, None] * inv_sqrt[None, :]


def _log_sigmoid(s: np.ndarray) -> np.ndarray:
    return -np.logaddexp(0.0, -s)


def _log_one_minus_sigmoid(s: np.ndarray) -> np.ndarray:
    return -np.logaddexp(0.0, s)


def _sigmoid(s: np.ndarray) -> np.ndarray:
    out = np.empty_like(s)
    pos = s >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-s[pos]))
    es = np.exp(s[~pos])
    out[~pos] = es / (1.0 + es)
    return out


def init_weights(input_dim: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Glorot-uniform weights; a fixed seed gives node-order-free init."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(input_dim,)))
    lim1 = np.sqrt(6.0 / (input_dim + HIDDEN_DIM))
    lim2 = np.sqrt(6.0 / (HIDDEN_DIM + EMBED_DIM))
    w1 = rng.uniform(-lim1, lim1, size=(input_dim, HIDDEN_DIM))
    w2 = rng.uniform(-lim2, lim2, size=(HIDDEN_DIM, EMBED_DIM))
    return w1, w2


def _forward(a_norm: np.ndarray, content: np.ndarray, w1: np.ndarray, w2: np.ndarray):
    h_pre = a_norm @ content @ w1
    h = np.tanh(h_pre)
    z = a_norm @ h @ w2
    return h, z


def reconstruction_loss(z: np.ndarray, target: np.ndarray) -> float:
    """Mean off-diagonal cross-entropy between decoded and target weights."""
    n = z.shape[0]
    if n < 2:
        return 0.0
    scores = z @ z.T
    ce = -(target * _log_sigmoid(scores) + (1.0 - target) * _log_one_minus_sigmoid(scores))
    mask = ~np.eye(n, dtype=bool)
    return float(ce[mask].mean())


def loss_and_gradients(
    a_norm: np.ndarray,
    content: np.ndarray,
    target: np.ndarray,
    w1: np.ndarray,
    w2: np.ndarray,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Cross-entropy loss and its analytic gradients in the two weight matrices."""
    n = a_norm.shape[0]
    h, z = _forward(a_norm, content, w1, w2)
    scores = z @ z.T
    p = _sigmoid(scores)
    mask = ~np.eye(n, dtype=bool)
    denom = float(mask.sum())
    ce = -(target * _log_sigmoid(scores) + (1.0 - target) * _log_one_minus_sigmoid(scores))
    loss = float(ce[mask].sum() / denom)

    g_scores = (p - target) * mask / denom
    g_z = (g_scores + g_scores.T) @ z
    xw = a_norm @ content  # shared encoder input
    g_w2 = (a_norm @ h).T @ g_z
    g_h = a_norm @ (g_z @ w2.T)
    g_hpre = g_h * (1.0 - h * h)
    g_w1 = xw.T @ g_hpre
    return loss, g_w1, g_w2


def embed_cell_gcn(
    adjacency: np.ndarray,
    content: np.ndarray,
    node_ids: np.ndarray,
    stamp: int,
    regime: int,
    window_size: int,
    seed: int = 0,
    epochs: int = EPOCHS,
    learning_rate: float = LEARNING_RATE,
) -> CellEmbedding:
    """Train the autoencoder on one cell's subnetwork.

    A singleton cell skips training and returns the initialized encoder's
    projection of the node content.
    """
    n = adjacency.shape[0]
    content = np.asarray(content, dtype=float)
    w1, w2 = init_weights(content.shape[1], seed)
    a_norm = _sym_normalize(adjacency.astype(float))
    target = adjacency.astype(float) / float(window_size)

    history: list[float] = []
    if n >= 2:
        loss, g1, g2 = loss_and_gradients(a_norm, content, target, w1, w2)
        history.append(loss)
        for _ in range(epochs):
            rate = learning_rate
            accepted = False
            for _ in range(20):  # reject steps that would increase the loss
                c1 = w1 - rate * g1
                c2 = w2 - rate * g2
                new_loss, n1, n2 = loss_and_gradients(a_norm, content, target, c1, c2)
                if new_loss <= loss:
                    w1, w2, loss, g1, g2 = c1, c2, new_loss, n1, n2
                    accepted = True
                    break
                rate *= 0.5
            history.append(loss)
            if not accepted:
                break
    _, z = _forward(a_norm, content, w1, w2)
    vectors = {int(node_ids[i]): z[i].copy() for i in range(n)}
    return CellEmbedding(stamp=stamp, regime=regime, vectors=vectors, engine="gcn", loss_history=history)


def spectral_embed_matrix(matrix: np.ndarray) -> np.ndarray:
    """Top-8 eigenpairs of a symmetric matrix, scaled by sqrt|eigenvalue|.

    Eigenvector signs are fixed so each vector's largest-magnitude entry
    is positive, keeping the output deterministic.
    """
    vals, vecs = np.linalg.eigh(matrix)
    order = np.argsort(-np.abs(vals))[:EMBED_DIM]
    n = matrix.shape[0]
    out = np.zeros((n, EMBED_DIM))
    for col, idx in enumerate(order):
        vec = vecs[:, idx]
        anchor = np.argmax(np.abs(vec))
        if vec[anchor] < 0:
            vec = -vec
        out[:, col] = vec * np.sqrt(abs(vals[idx]))
    return out


def content_similarity(content: np.ndarray) -> np.ndarray:
    """1 - RMS distance between value vectors; contents live in [0, 1]."""
    diff = content[:, None, :] - content[None, :, :]
    return 1.0 - np.sqrt(np.mean(diff**2, axis=2))


def embed_cell_spectral(
    adjacency: np.ndarray,
    content: np.ndarray,
    node_ids: np.ndarray,
    stamp: int,
    regime: int,
    window_size: int,
) -> CellEmbedding:
    """Training-free embedding from the blended similarity spectrum."""
    n = adjacency.shape[0]
    blend = 0.5 * (adjacency.astype(float) / float(window_size) + content_similarity(content))
    deg = blend.sum(axis=1)
    deg[deg <= 0] = 1.0
    inv_sqrt = 1.0 / np.sqrt(deg)
    normed = blend * inv_sqrt[:, None] * inv_sqrt[None, :]
    z = spectral_embed_matrix(normed)
    err = float(np.mean((z @ z.T - normed) ** 2))
    vectors = {int(node_ids[i]): z[i].copy() for i in range(n)}
    return CellEmbedding(
        stamp=stamp, regime=regime, vectors=vectors, engine="spectral", loss_history=[err]
    )


def reconstruction_error(embedding: CellEmbedding, adjacency: np.ndarray, node_ids: np.ndarray, window_size: int) -> float:
    """Reconstruction error of stored vectors against the cell's weights.

    The autoencoder engine reports mean off-diagonal cross-entropy; the
    spectral engine reports mean squared error against its normalized
    blend (its own training target).
    """
    z = np.stack([embedding.vectors[int(i)] for i in node_ids])
    target = adjacency.astype(float) / float(window_size)
    if embedding.engine == "gcn":
        return reconstruction_loss(z, target)
    return float(embedding.loss_history[-1])
