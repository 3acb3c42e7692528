"""Complete binary trees, their graph metric, embeddings and exact distortion.

Vertices are numbered in heap order: the root is 1 and the children of ``i``
are ``2i`` and ``2i + 1``. Array position ``i - 1`` holds vertex ``i``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.spatial.distance import pdist

from .convexity import SpaceSpec
from .errors import DegenerateEmbedding, DomainError, NoPairs, SelectionError, TreeSizeError

# vertex ids are int64; 2**(n+1) - 1 must stay representable
MAX_DEPTH = 62


@dataclass(frozen=True)
class BinaryTree:
    depth: int

    @property
    def n_vertices(self) -> int:
        return (1 << (self.depth + 1)) - 1

    @property
    def root(self) -> int:
        return 1

    def vertex_depth(self, v: int) -> int:
        self.check_vertex(v)
        return int(v).bit_length() - 1

    def check_vertex(self, v):
        if not (1 <= v <= self.n_vertices):
            raise IndexError(f"vertex {v} is not in T_{self.depth} (ids 1..{self.n_vertices})")

    def children(self, v: int):
        if self.vertex_depth(v) == self.depth:
            return ()
        return (2 * v, 2 * v + 1)

    def vertices_at(self, level: int) -> range:
        return range(1 << level, 1 << (level + 1))

    def pair_distances(self) -> np.ndarray:
        """Tree distances over all pairs ``i < j`` in :func:`pdist` order (read-only)."""
        return _pair_distances(self.depth)

    def distance_matrix(self) -> np.ndarray:
        ids = np.arange(1, self.n_vertices + 1)
        return _heap_distance(ids[:, None], ids[None, :])


@lru_cache(maxsize=16)
def _pair_distances(depth):
    i, j = np.triu_indices((1 << (depth + 1)) - 1, k=1)
    out = _heap_distance(i + 1, j + 1).astype(float)
    out.setflags(write=False)
    return out


def _bit_length(a):
    a = np.asarray(a, dtype=np.int64)
    out = np.zeros(a.shape, dtype=np.int64)
    a = a.copy()
    while np.any(a):
        nz = a > 0
        out[nz] += 1
        a >>= 1
    return out


def _heap_distance(u, v):
    u = np.asarray(u, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    du, dv = _bit_length(u) - 1, _bit_length(v) - 1
    dmin = np.minimum(du, dv)
    uu = u >> (du - dmin)
    vv = v >> (dv - dmin)
    lca_depth = dmin - _bit_length(uu ^ vv)
    return du + dv - 2 * lca_depth


def build_tree(n: int) -> BinaryTree:
    if int(n) != n or n < 0:
        raise DomainError(f"tree depth must be a nonnegative integer, got {n}")
    if n > MAX_DEPTH:
        raise TreeSizeError(f"T_{n} has 2^{n + 1} - 1 vertices, beyond the int64 vertex index")
    return BinaryTree(int(n))


def tree_distance(tree: BinaryTree, u: int, v: int) -> int:
    """Graph distance in T_n: depth(u) + depth(v) - 2 depth(lca(u, v))."""
    tree.check_vertex(u)
    tree.check_vertex(v)
    u, v = int(u), int(v)
    du, dv = u.bit_length() - 1, v.bit_length() - 1
    total = du + dv
    while du > dv:
        u >>= 1
        du -= 1
    while dv > du:
        v >>= 1
        dv -= 1
    while u != v:
        u >>= 1
        v >>= 1
        du -= 1
    return total - 2 * du


@dataclass(frozen=True)
class Embedding:
    tree: BinaryTree
    space: SpaceSpec
    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] != self.tree.n_vertices:
            raise DomainError(
                f"need {self.tree.n_vertices} points for T_{self.tree.depth}, got shape {pts.shape}"
            )
        if pts.shape[1] != self.space.dim:
            raise DomainError(f"points have dimension {pts.shape[1]}, space has {self.space.dim}")
        if not np.all(np.isfinite(pts)):
            raise DomainError("embedding contains non-finite coordinates")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def point(self, v: int) -> np.ndarray:
        self.tree.check_vertex(v)
        return self.points[v - 1]

    def scaled(self, factor: float) -> "Embedding":
        return Embedding(self.tree, self.space, self.points * factor)

    def pair_norms(self) -> np.ndarray:
        if self.space.p == 2.0:
            return pdist(self.points, "euclidean")
        return pdist(self.points, "minkowski", p=self.space.p)

    def to_dict(self):
        return {
            "tree_depth": self.tree.depth,
            "space": self.space.to_dict(),
            "points": self.points.tolist(),
        }

    @classmethod
    def from_dict(cls, data):
        for key in ("tree_depth", "space", "points"):
            if key not in data:
                raise DomainError(f"embedding JSON is missing key {key!r}")
        space = SpaceSpec(float(data["space"]["p"]), int(data["space"]["dim"]))
        return cls(build_tree(int(data["tree_depth"])), space, np.asarray(data["points"], dtype=float))


@dataclass(frozen=True)
class DistortionReport:
    expansion: float
    contraction: float
    distortion: float
    scale: float

    def to_dict(self):
        return {
            "expansion": self.expansion,
            "contraction": self.contraction,
            "distortion": self.distortion,
            "scale": self.scale,
        }


def evaluate_distortion(e: Embedding) -> DistortionReport:
    """Exact distortion of a finite map: max pair ratio over min pair ratio.

    The infimum over scales ``s`` is attained at ``s = contraction``.
    """
    if e.tree.depth == 0:
        raise NoPairs("T_0 has a single vertex; distortion is undefined")
    ratios = e.pair_norms() / e.tree.pair_distances()
    contraction = float(ratios.min())
    if contraction == 0.0:
        raise DegenerateEmbedding("two distinct vertices are mapped to the same point")
    expansion = float(ratios.max())
    return DistortionReport(expansion, contraction, expansion / contraction, contraction)


def normalize_embedding(e: Embedding) -> Embedding:
    """Rescale so that the map is distance non-decreasing with some pair tight."""
    report = evaluate_distortion(e)
    return e.scaled(1.0 / report.contraction)


def restrict_to_selection(e: Embedding, kept) -> Embedding:
    """Restrict ``e`` to vertices selected every other generation.

    ``kept`` maps each selected vertex to its two kept grandchildren, one
    through each child. The selected vertices form a copy of
    ``T_{n // 2}`` whose metric is half the ambient one, so points are halved
    as well.
    """
    tree = e.tree
    half_depth = tree.depth // 2
    small = build_tree(half_depth)
    chosen = np.zeros(small.n_vertices, dtype=np.int64)
    chosen[0] = tree.root
    for w in range(1, 1 << half_depth):
        a0 = int(chosen[w - 1])
        if a0 not in kept:
            raise SelectionError(f"selected vertex {a0} has no kept grandchildren")
        pair = kept[a0]
        if len(pair) != 2:
            raise SelectionError(f"vertex {a0} must keep exactly two grandchildren, got {pair}")
        left = [g for g in pair if g >> 1 == 2 * a0]
        right = [g for g in pair if g >> 1 == 2 * a0 + 1]
        if len(left) != 1 or len(right) != 1:
            raise SelectionError(
                f"kept vertices {tuple(pair)} of {a0} must be one grandchild through each child"
            )
        chosen[2 * w - 1] = left[0]
        chosen[2 * w] = right[0]
    return Embedding(small, e.space, e.points[chosen - 1] / 2.0)
