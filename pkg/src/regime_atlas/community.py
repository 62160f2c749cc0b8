"""Community detection over stamp networks and group centroids.

Two selectable objectives share one greedy engine (Louvain-style node
moves plus graph aggregation, with a flat refinement cycle): the
two-level map equation of an unrecorded random walk on the undirected
weighted graph, and Newman modularity. The map equation tends to absorb
small boundary groups into their strongest neighbor, which suits density
scoring; modularity keeps equal-sized planted groups apart, which suits
grid partitioning. Both are fully deterministic: nodes are swept in
ascending id order and ties keep the lowest module id.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scanner import StampNetwork

_IMPROVE_TOL = 1e-12


def _plogp(x: np.ndarray | float) -> np.ndarray | float:
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = x[pos] * np.log2(x[pos])
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class Partition:
    """Disjoint groups covering the network's nodes."""

    stamp: int
    groups: list[np.ndarray]  # node ids (series indices), ascending within group
    quality: float  # map-equation description length or modularity
    method: str

    @property
    def n_groups(self) -> int:
        return len(self.groups)


@dataclass(frozen=True)
class Profile:
    """Centroid of a group of windows, stored as centered shape + level."""

    shape: np.ndarray  # mean-centered centroid
    mean: float  # level to restore
    sd: float  # dispersion of the centroid values

    @property
    def values(self) -> np.ndarray:
        return self.shape + self.mean


def group_centroid(member_values: np.ndarray) -> Profile:
    """Pointwise mean of the member windows plus its level and spread."""
    member_values = np.asarray(member_values, dtype=float)
    if member_values.ndim == 1:
        member_values = member_values[None, :]
    if member_values.shape[0] == 0:
        raise ValueError("group must be non-empty")
    centroid = member_values.mean(axis=0)
    mean = float(centroid.mean())
    sd = float(centroid.std())
    return Profile(shape=centroid - mean, mean=mean, sd=sd)


class _Objective:
    """Shared aggregate bookkeeping for both move objectives.

    ``weights`` has the self-loop weight on the diagonal (counted once);
    strengths count self-loops twice as usual.
    """

    def __init__(self, weights: np.ndarray):
        self.w = weights
        n = weights.shape[0]
        self.strength = weights.sum(axis=1) + np.diag(weights)
        self.total = float(self.strength.sum())  # == 2 * total edge weight
        self.labels = np.arange(n)
        self.mod_strength = self.strength.astype(float).copy()
        self.mod_internal = np.diag(weights).astype(float).copy()

    def links_to_modules(self, node: int) -> np.ndarray:
        row = self.w[node].copy()
        row[node] = 0.0
        return np.bincount(self.labels, weights=row, minlength=len(self.labels))

    def apply_move(self, node: int, target: int, link: np.ndarray) -> None:
        src = self.labels[node]
        self_loop = self.w[node, node]
        s = self.strength[node]
        self.mod_strength[src] -= s
        self.mod_internal[src] -= link[src] + self_loop
        self.mod_strength[target] += s
        self.mod_internal[target] += link[target] + self_loop
        self.labels[node] = target


class _MapEquation(_Objective):
    def __init__(self, weights: np.ndarray):
        super().__init__(weights)
        t = self.total
        self.p_node = self.strength / t if t > 0 else np.zeros_like(self.strength)
        self.const_term = -float(_plogp(self.p_node).sum())

    def _module_terms(self, mod_s: np.ndarray, mod_i: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        q = (mod_s - 2.0 * mod_i) / self.total
        pc = q + mod_s / self.total
        return q, pc

    def value(self) -> float:
        if self.total <= 0:
            return 0.0
        q, pc = self._module_terms(self.mod_strength, self.mod_internal)
        q = np.clip(q, 0.0, None)
        q_tot = float(q.sum())
        return float(_plogp(q_tot) - 2.0 * _plogp(q).sum() + _plogp(pc).sum()) + self.const_term

    def move_gain(self, node: int, link: np.ndarray, candidates: np.ndarray) -> np.ndarray:
        """Objective delta for moving ``node`` into each candidate module."""
        t = self.total
        src = self.labels[node]
        s = self.strength[node]
        loop = self.w[node, node]
        q_src, pc_src = self._q_pc(src)
        q_src_new = max((self.mod_strength[src] - s) - 2.0 * (self.mod_internal[src] - link[src] - loop), 0.0) / t
        pc_src_new = q_src_new + (self.mod_strength[src] - s) / t

        q_tgt, pc_tgt = self._q_pc(candidates)
        q_tgt_new = np.maximum(
            (self.mod_strength[candidates] + s) - 2.0 * (self.mod_internal[candidates] + link[candidates] + loop),
            0.0,
        ) / t
        pc_tgt_new = q_tgt_new + (self.mod_strength[candidates] + s) / t

        q_all = max(np.clip((self.mod_strength - 2.0 * self.mod_internal) / t, 0.0, None).sum(), 0.0)
        q_all_new = q_all - q_src - q_tgt + q_src_new + q_tgt_new
        delta = (
            _plogp(q_all_new) - _plogp(q_all)
            - 2.0 * (_plogp(q_src_new) + _plogp(q_tgt_new) - _plogp(q_src) - _plogp(q_tgt))
            + _plogp(pc_src_new) + _plogp(pc_tgt_new) - _plogp(pc_src) - _plogp(pc_tgt)
        )
        return np.asarray(delta, dtype=float)

    def _q_pc(self, idx):
        q = np.clip((self.mod_strength[idx] - 2.0 * self.mod_internal[idx]) / self.total, 0.0, None)
        pc = q + self.mod_strength[idx] / self.total
        return q, pc

    better = staticmethod(lambda delta: delta < -_IMPROVE_TOL)


class _Modularity(_Objective):
    """Newman modularity; deltas are negated so lower is better."""

    def value(self) -> float:
        if self.total <= 0:
            return 0.0
        w_tot = self.total / 2.0
        return float((self.mod_internal / w_tot - (self.mod_strength / self.total) ** 2).sum())

    def move_gain(self, node: int, link: np.ndarray, candidates: np.ndarray) -> np.ndarray:
        t = self.total
        w_tot = t / 2.0
        src = self.labels[node]
        s = self.strength[node]
        loop = self.w[node, node]

        def contrib(ms, mi):
            return mi / w_tot - (ms / t) ** 2

        cur = contrib(self.mod_strength[src], self.mod_internal[src]) + contrib(
            self.mod_strength[candidates], self.mod_internal[candidates]
        )
        new = contrib(self.mod_strength[src] - s, self.mod_internal[src] - link[src] - loop) + contrib(
            self.mod_strength[candidates] + s, self.mod_internal[candidates] + link[candidates] + loop
        )
        return -(new - cur)

    better = staticmethod(lambda delta: delta < -_IMPROVE_TOL)


def _local_moves(state: _Objective) -> bool:
    """Sweep nodes in ascending order until no move improves the objective."""
    n = state.w.shape[0]
    any_move = False
    improved = True
    while improved:
        improved = False
        for node in range(n):
            link = state.links_to_modules(node)
            src = state.labels[node]
            candidates = np.flatnonzero(link > 0)
            candidates = candidates[candidates != src]
            if len(candidates) == 0:
                continue
            deltas = state.move_gain(node, link, candidates)
            best = int(np.argmin(deltas))
            if state.better(float(deltas[best])):
                state.apply_move(node, int(candidates[best]), link)
                improved = True
                any_move = True
    return any_move


def _aggregate(weights: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Condense modules into supernodes; returns (new weights, compact labels)."""
    uniq, compact = np.unique(labels, return_inverse=True)
    k = len(uniq)
    n = weights.shape[0]
    agg = np.zeros((k, k), dtype=float)
    # off-diagonal edges once per pair, diagonal = internal weight once
    iu, ju = np.triu_indices(n)
    w = weights[iu, ju]
    nz = w != 0
    np.add.at(agg, (compact[iu[nz]], compact[ju[nz]]), w[nz])
    agg = np.triu(agg) + np.triu(agg, 1).T
    return agg, compact


def _seeded(cls, weights: np.ndarray, labels: np.ndarray):
    """Build an objective state whose aggregates match a given partition."""
    state = cls(weights)
    n = weights.shape[0]
    state.labels = labels.copy()
    state.mod_strength = np.bincount(labels, weights=state.strength, minlength=n).astype(float)
    internal = np.zeros(n, dtype=float)
    iu, ju = np.triu_indices(n)
    same = labels[iu] == labels[ju]
    np.add.at(internal, labels[iu[same]], weights[iu[same], ju[same]])
    state.mod_internal = internal
    return state


def _optimize(weights: np.ndarray, objective: str) -> np.ndarray:
    """Alternate node-level refinement with multilevel coarsening until
    neither improves the objective."""
    cls = _MapEquation if objective == "map-equation" else _Modularity
    n = weights.shape[0]
    weights = weights.astype(float)
    if cls(weights).total <= 0:
        return np.arange(n)
    labels = np.arange(n)
    while True:
        state = _seeded(cls, weights, labels)
        flat_moved = _local_moves(state)
        _, labels = np.unique(state.labels, return_inverse=True)

        level_moved = False
        node_map = labels.copy()
        current, _ = _aggregate(weights, labels)
        while current.shape[0] > 1:
            st = cls(current)
            if not _local_moves(st):
                break
            level_moved = True
            agg, compact = _aggregate(current, st.labels)
            node_map = compact[node_map]
            if agg.shape[0] == current.shape[0]:
                break
            current = agg
        labels = node_map
        if not (flat_moved or level_moved):
            return labels


def detect_communities(network: StampNetwork, method: str = "map-equation") -> Partition:
    """Split a stamp network into densely connected groups.

    Zero-degree nodes stay as their own singleton groups; an empty
    network yields an empty partition.
    """
    if method not in ("map-equation", "modularity"):
        raise ValueError(f"unknown method {method!r}")
    n = network.n_nodes
    if n == 0:
        return Partition(stamp=network.stamp, groups=[], quality=0.0, method=method)
    cls = _MapEquation if method == "map-equation" else _Modularity
    labels = _optimize(network.weights.astype(float), method)
    quality = _seeded(cls, network.weights.astype(float), labels).value()

    groups: list[np.ndarray] = []
    for lbl in sorted(set(labels.tolist()), key=lambda l: int(np.flatnonzero(labels == l)[0])):
        members = np.flatnonzero(labels == lbl)
        groups.append(network.node_ids[members])
    return Partition(stamp=network.stamp, groups=groups, quality=quality, method=method)


def description_length(weights: np.ndarray, groups: list[np.ndarray], node_ids: np.ndarray) -> float:
    """Map-equation value of an arbitrary partition (for cross-checks)."""
    id_to_pos = {int(v): i for i, v in enumerate(node_ids)}
    labels = np.empty(len(node_ids), dtype=int)
    for g, members in enumerate(groups):
        for m in members:
            labels[id_to_pos[int(m)]] = g
    return _seeded(_MapEquation, weights.astype(float), labels).value()
