import math

import numpy as np
import pytest

from treedistort.convexity import SpaceSpec
from treedistort.fork_engine import fork_constant
from treedistort.metric_core import Embedding, build_tree, tree_distance

ACCEPTANCE_LINES = []


@pytest.fixture
def record_criterion():
    def record(number, passed, detail):
        ACCEPTANCE_LINES.append(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def lp_norm(x, p):
    return sum(abs(float(t)) ** p for t in x) ** (1.0 / p)


def brute_force_distortion(e):
    """Plain double loop over vertex pairs; independent of the vectorized path."""
    V = e.tree.n_vertices
    hi, lo = -math.inf, math.inf
    for u in range(1, V + 1):
        for v in range(u + 1, V + 1):
            r = lp_norm(e.points[u - 1] - e.points[v - 1], e.space.p) / tree_distance(e.tree, u, v)
            hi = max(hi, r)
            lo = min(lo, r)
    return hi, lo, hi / lo


def path_embedding(n, space, rng, jitter=0.0):
    """Each vertex sits at the sum of random edge vectors along its root path."""
    tree = build_tree(n)
    pts = np.zeros((tree.n_vertices, space.dim))
    for v in range(2, tree.n_vertices + 1):
        step = rng.standard_normal(space.dim)
        step /= lp_norm(step, space.p)
        pts[v - 1] = pts[v // 2 - 1] + step + jitter * rng.standard_normal(space.dim)
    return Embedding(tree, space, pts)


def near_extremal_witness(rng, D, profile, space):
    """Child and grandchild images near the far-end configuration."""
    eta = fork_constant(D, profile) / D ** (profile.p_type - 1)
    p = space.p
    # both legs must stay in [1, D]
    lo = max(1.0, D - eta)
    for _ in range(10_000):
        u = rng.standard_normal(space.dim)
        u /= np.sum(np.abs(u) ** p) ** (1 / p)
        w = u + rng.uniform(0, 1) * math.sqrt(eta / D) * rng.standard_normal(space.dim)
        w /= np.sum(np.abs(w) ** p) ** (1 / p)
        x1 = rng.uniform(lo, D) * u
        x2 = x1 + rng.uniform(lo, D) * w
        n2 = np.sum(np.abs(x2) ** p) ** (1 / p)
        if n2 >= 2 * (D - eta) and n2 >= 2:
            return x1, x2
    raise RuntimeError("sampler failed")


@pytest.fixture
def l2_1():
    return SpaceSpec(2.0, 1)
