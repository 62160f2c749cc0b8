"""Window-size search: density scoring, convergence sweep, MDL selection,
and cross-stamp regime canonicalization.

The regime-density score of a window size is the largest per-stamp group
count divided by the size. Sizes are tested in ascending order until two
successive scores differ by less than a convergence threshold; the
selected size sits at the boundary between the large and small scores,
found by minimizing a two-segment code length.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .community import Partition, Profile, detect_communities, group_centroid
from .errors import ConfigError
from .panel import SeriesPanel
from .scanner import WindowedView, scan

_LOG_FLOOR = 1e-12


@dataclass(frozen=True)
class DensityCurve:
    """Scores over the tested window sizes, in ascending size order."""

    sizes: tuple[int, ...]
    scores: tuple[float, ...]
    epsilon: float

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.sizes, self.sizes[1:])):
            raise ConfigError("curve sizes must be strictly increasing")

    @property
    def entries(self) -> list[tuple[int, float]]:
        return list(zip(self.sizes, self.scores))


@dataclass
class RegimeCatalog:
    """Global regimes and the per-(stamp, local group) label assignment."""

    window_size: int
    profiles: list[Profile]  # index r-1 holds regime label r
    assignment: dict[tuple[int, int], int]  # (stamp, group index) -> label 1..K
    theta_match: float

    @property
    def n_regimes(self) -> int:
        return len(self.profiles)


def default_size_grid(n_stamps: int, max_candidates: int = 60) -> list[int]:
    """Candidate sizes 2..min(m/4, 200), thinned to at most ``max_candidates``."""
    hi = min(n_stamps // 4, 200)
    if hi < 2:
        raise ConfigError(f"series too short for a window sweep (m={n_stamps})")
    step = max(1, -(-(hi - 1) // max_candidates))
    return list(range(2, hi + 1, step))


def density_score(panel: SeriesPanel, window_size: int, method: str = "map-equation") -> float:
    """Largest group count over all stamps, divided by the window size."""
    _, networks = scan(panel, window_size)
    max_groups = 0
    for net in networks:
        if net.n_nodes == 0:
            continue
        part = detect_communities(net, method)
        max_groups = max(max_groups, part.n_groups)
    return max_groups / window_size


def sweep(
    panel: SeriesPanel,
    sizes: list[int] | None = None,
    epsilon: float = 0.01,
    method: str = "map-equation",
) -> DensityCurve:
    """Score sizes in ascending order, stopping once scores stabilize."""
    if sizes is None:
        sizes = default_size_grid(panel.n_stamps)
    if not sizes:
        raise ConfigError("candidate size set is empty")
    sizes = sorted(set(int(s) for s in sizes))
    tested: list[int] = []
    scores: list[float] = []
    previous = None
    for size in sizes:
        score = density_score(panel, size, method)
        tested.append(size)
        scores.append(score)
        if previous is not None and abs(score - previous) < epsilon:
            break
        previous = score
    return DensityCurve(sizes=tuple(tested), scores=tuple(scores), epsilon=epsilon)


def _floored_log2(x: float) -> float:
    return float(np.log2(max(abs(x), _LOG_FLOOR)))


def two_segment_code_length(scores: list[float], split: int) -> float:
    """Code length of the curve split after index ``split`` (inclusive left).

    Each segment costs the log of its mean plus the log of every score's
    absolute deviation from that mean; all logarithm arguments are floored
    to keep exact-mean deviations and sub-unit scores finite.
    """
    left = scores[: split + 1]
    right = scores[split + 1 :]
    total = 0.0
    for seg in (left, right):
        mean = float(np.mean(seg))
        total += _floored_log2(mean)
        total += sum(_floored_log2(s - mean) for s in seg)
    return total


def select_window(curve: DensityCurve) -> int:
    """Size at the boundary between the large and small scores.

    Minimizes the two-segment code length over every split whose left
    segment has at least two scores (a boundary needs a large side to
    characterize) and whose right segment is non-empty; ties go to the
    smallest size. A single-entry curve returns that entry.
    """
    n = len(curve.sizes)
    if n == 1:
        return curve.sizes[0]
    if n < 3:
        raise ConfigError("need at least 3 curve entries to select a window size")
    scores = list(curve.scores)
    best_size = None
    best_cl = np.inf
    for split in range(1, n - 1):
        cl = two_segment_code_length(scores, split)
        if cl < best_cl - 1e-15:
            best_cl = cl
            best_size = curve.sizes[split]
    return int(best_size)


@dataclass
class _Cluster:
    total: np.ndarray
    count: int
    size: int
    first_stamp: int
    members: list[tuple[int, int]] = field(default_factory=list)

    @property
    def mean(self) -> np.ndarray:
        return self.total / self.count


def _centroid_distance(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sqrt(np.mean((a - b) ** 2)))


def canonicalize_regimes(
    view: WindowedView,
    partitions: list[Partition],
    theta_match: float = 0.05,
) -> RegimeCatalog:
    """Merge local group centroids across stamps into global regimes.

    Centroids are pooled over all stamps, sorted by size then shape so the
    result does not depend on stamp order, and greedily agglomerated: a
    centroid joins the nearest existing cluster within ``theta_match``
    (root-mean-square distance on raw centroids), else it founds a new
    one. Labels are ordered by first stamp of appearance, then by total
    member count descending.
    """
    pool = []
    for part in partitions:
        for g, members in enumerate(part.groups):
            centroid = view.values[members, part.stamp].mean(axis=0)
            key = (-len(members), tuple(np.round(centroid, 12)), part.stamp, g)
            pool.append((key, part.stamp, g, len(members), centroid))
    pool.sort(key=lambda item: item[0])

    clusters: list[_Cluster] = []
    for _, stamp, g, size, centroid in pool:
        best = None
        for idx, cl in enumerate(clusters):
            d = _centroid_distance(centroid, cl.mean)
            if d <= theta_match and (best is None or d < best[0]):
                best = (d, idx)
        if best is None:
            clusters.append(
                _Cluster(total=centroid.copy(), count=1, size=size, first_stamp=stamp, members=[(stamp, g)])
            )
        else:
            cl = clusters[best[1]]
            cl.total = cl.total + centroid
            cl.count += 1
            cl.size += size
            cl.first_stamp = min(cl.first_stamp, stamp)
            cl.members.append((stamp, g))

    order = sorted(range(len(clusters)), key=lambda i: (clusters[i].first_stamp, -clusters[i].size))
    profiles: list[Profile] = []
    assignment: dict[tuple[int, int], int] = {}
    for label, idx in enumerate(order, start=1):
        cl = clusters[idx]
        profiles.append(group_centroid(cl.mean[None, :]))
        for stamp, g in cl.members:
            assignment[(stamp, g)] = label
    return RegimeCatalog(
        window_size=view.window_size,
        profiles=profiles,
        assignment=assignment,
        theta_match=theta_match,
    )
