"""Heuristic search for low-distortion embeddings of T_n into l_p^d.

The objective is a smoothed log-distortion,

    softmax_beta(log r_ij) - softmin_beta(log r_ij),

over all vertex pairs, where ``r_ij = |phi_i - phi_j| / d(i, j)``. It is
scale invariant, so iterates are recentred and rescaled freely. The
temperature ``beta`` doubles every tenth of the run. Every result is an
upper bound on the optimal distortion, never a claim of optimality.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .convexity import SpaceSpec
from .errors import ConvergenceError, DegenerateEmbedding, DomainError
from .metric_core import DistortionReport, Embedding, build_tree, evaluate_distortion

log = logging.getLogger(__name__)

MAX_HALVINGS = 40
ANNEAL_STAGES = 10
SCHEDULES = ("inv_sqrt", "constant")


@dataclass(frozen=True)
class OptimizerConfig:
    restarts: int = 8
    steps: int = 5000
    step_size: float = 0.1
    schedule: str = "inv_sqrt"
    beta0: float = 4.0
    seed: int = 42
    snapshots: int = 50

    def __post_init__(self):
        if self.restarts < 1 or self.steps < 1 or self.snapshots < 1:
            raise DomainError("restarts, steps and snapshots must be positive")
        if not (self.step_size > 0 and math.isfinite(self.step_size)):
            raise DomainError(f"step size must be positive and finite, got {self.step_size}")
        if not (self.beta0 > 0 and math.isfinite(self.beta0)):
            raise DomainError(f"temperature must be positive and finite, got {self.beta0}")
        if self.schedule not in SCHEDULES:
            raise DomainError(f"unknown schedule {self.schedule!r}; choose from {SCHEDULES}")
        if not (0 <= self.seed < 2**64):
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    def to_dict(self):
        return asdict(self)


@dataclass
class OptimizationResult:
    embedding: Embedding
    report: DistortionReport
    history: list
    config: OptimizerConfig
    trace: list = field(default_factory=list)
    restart: int = 0

    @property
    def distortion(self):
        return self.report.distortion


def _seed_material(seed):
    if isinstance(seed, (tuple, list)):
        return [int(s) for s in seed]
    return [int(seed)]


def random_embedding(n: int, space: SpaceSpec, seed) -> Embedding:
    """Centered Gaussian points with standard deviation ``n``; deterministic in ``seed``."""
    if n < 1:
        raise DomainError(f"random embeddings need depth >= 1, got {n}")
    tree = build_tree(n)
    base = _seed_material(seed)
    for attempt in range(100):
        rng = np.random.default_rng(base if attempt == 0 else base + [attempt])
        e = Embedding(tree, space, rng.standard_normal((tree.n_vertices, space.dim)) * n)
        try:
            evaluate_distortion(e)
        except DegenerateEmbedding:
            continue
        return e
    raise DegenerateEmbedding("could not draw a non-degenerate embedding")


class _Objective:
    """Smoothed log-distortion and its gradient on dense pair matrices.

    Diagonal entries are excluded by pinning them to -inf (for the soft max)
    and +inf (for the soft min), so no boolean masks are materialized.
    """

    def __init__(self, tree, space):
        self.p = space.p
        T = tree.distance_matrix().astype(float)
        self.V = T.shape[0]
        np.fill_diagonal(T, 1.0)
        self.log_tree = np.log(T)
        parents = np.arange(2, self.V + 1) // 2
        self.edges = (parents - 1, np.arange(1, self.V))

    def distances(self, P):
        if self.p == 2.0:
            sq = np.einsum("ij,ij->i", P, P)
            d = P @ P.T
            d *= -2.0
            d += sq[:, None]
            d += sq[None, :]
            np.maximum(d, 0.0, out=d)
            np.sqrt(d, out=d)
            return d
        acc = np.zeros((self.V, self.V))
        for k in range(P.shape[1]):
            acc += np.abs(P[:, k, None] - P[None, :, k]) ** self.p
        return acc ** (1.0 / self.p)

    def value(self, P, beta):
        """Objective at ``P``; returns ``(value, state)`` with state for :meth:`gradient`."""
        dist = self.distances(P)
        np.fill_diagonal(dist, 1.0)
        with np.errstate(divide="ignore"):
            L = np.log(dist)
        L -= self.log_tree
        np.fill_diagonal(L, -np.inf)
        top = L.max()
        np.fill_diagonal(L, np.inf)
        bottom = L.min()
        if not (math.isfinite(top) and math.isfinite(bottom)):
            return math.inf, None
        E_hi = L - top
        E_hi *= beta
        np.exp(E_hi, out=E_hi)
        E_lo = L - bottom
        E_lo *= -beta
        np.exp(E_lo, out=E_lo)
        np.fill_diagonal(E_hi, 0.0)
        np.fill_diagonal(E_lo, 0.0)
        s_hi, s_lo = E_hi.sum(), E_lo.sum()
        # each unordered pair appears twice in the dense matrix
        value = (top - bottom) + (math.log(s_hi) + math.log(s_lo) - 2.0 * math.log(2.0)) / beta
        if not math.isfinite(value):
            return math.inf, None
        return value, (dist, E_hi, E_lo, s_hi, s_lo)

    def gradient(self, P, state):
        dist, E_hi, E_lo, s_hi, s_lo = state
        W = E_hi
        W *= 2.0 / s_hi
        W -= E_lo * (2.0 / s_lo)
        if self.p == 2.0:
            W /= dist
            W /= dist
            return W.sum(axis=1)[:, None] * P - W @ P
        W /= dist
        G = np.empty_like(P)
        for k in range(P.shape[1]):
            delta = (P[:, k, None] - P[None, :, k]) / dist
            # zero coordinates take the zero subgradient
            G[:, k] = (W * np.sign(delta) * np.abs(delta) ** (self.p - 1.0)).sum(axis=1)
        return G

    def __call__(self, P, beta, grad=True):
        value, state = self.value(P, beta)
        if not grad or state is None:
            return value, None
        return value, self.gradient(P, state)

    def standardize(self, P):
        P = P - P.mean(axis=0)
        i, j = self.edges
        if self.p == 2.0:
            lengths = np.linalg.norm(P[i] - P[j], axis=1)
        else:
            lengths = (np.abs(P[i] - P[j]) ** self.p).sum(axis=1) ** (1.0 / self.p)
        return P / lengths.mean()


def _snapshot(tree, space, P, value, restart, t, trace, best, best_P):
    try:
        rep = evaluate_distortion(Embedding(tree, space, P))
    except DegenerateEmbedding:
        return best, best_P
    trace.append((restart, t, value, rep.distortion))
    if rep.distortion < best.distortion:
        return rep, P.copy()
    return best, best_P


def optimize_embedding(n: int, space: SpaceSpec, config: OptimizerConfig = OptimizerConfig(),
                       seed=None, restart: int = 0) -> OptimizationResult:
    """One annealed descent run from a random start.

    ``seed`` defaults to ``config.seed``; :func:`multi_start` passes
    ``(config.seed, i)``. Steps that make the smoothed objective non-finite
    or larger are rejected and the step size halved.
    """
    if n < 1:
        raise DomainError(f"depth must be >= 1, got {n}")
    seed = config.seed if seed is None else seed
    tree = build_tree(n)
    obj = _Objective(tree, space)
    start = random_embedding(n, space, seed)
    P = obj.standardize(start.points)

    best_P = start.points
    best = evaluate_distortion(start)
    trace = [(restart, 0, math.nan, best.distortion)]
    stage_len = max(1, config.steps // ANNEAL_STAGES)
    snap_every = max(1, config.steps // config.snapshots)
    beta = None
    mult = 1.0
    for t in range(1, config.steps + 1):
        stage_beta = config.beta0 * 2.0 ** min((t - 1) // stage_len, ANNEAL_STAGES - 1)
        if stage_beta != beta:
            beta = stage_beta
            value, G = obj(P, beta)
            if not math.isfinite(value):
                raise ConvergenceError("objective is not finite at the current iterate",
                                       best=Embedding(tree, space, best_P))
        eta = config.step_size * (1.0 / math.sqrt(t) if config.schedule == "inv_sqrt" else 1.0)
        eta *= mult
        # step length is the largest single-point displacement
        gmax = np.sqrt((G * G).sum(axis=1)).max()
        if gmax == 0.0:
            break
        direction = G / gmax
        accepted = False
        finite_seen = False
        for k in range(MAX_HALVINGS):
            P_new = obj.standardize(P - eta * direction)
            v_new, state = obj.value(P_new, beta)
            if math.isfinite(v_new):
                finite_seen = True
                if v_new <= value:
                    accepted = True
                    break
            eta *= 0.5
        if accepted:
            P, value, G = P_new, v_new, obj.gradient(P_new, state)
            mult = min(1.0, mult * 2.0) if k == 0 else mult * 0.5**k
        elif not finite_seen:
            raise ConvergenceError(f"every trial step at iteration {t} overflowed",
                                   best=Embedding(tree, space, best_P))
        if t % snap_every == 0 and t < config.steps:
            best, best_P = _snapshot(tree, space, P, value, restart, t, trace, best, best_P)
    best, best_P = _snapshot(tree, space, P, value, restart, t, trace, best, best_P)
    emb = Embedding(tree, space, best_P)
    return OptimizationResult(emb, evaluate_distortion(emb), [best.distortion], config, trace, restart)


def multi_start(n: int, space: SpaceSpec, config: OptimizerConfig = OptimizerConfig()) -> OptimizationResult:
    """Best of ``config.restarts`` independent runs seeded by ``(seed, i)``.

    Ties go to the lower restart index. A failed restart keeps its best
    iterate; the call only raises if every restart failed.
    """
    results = []
    history = []
    trace = []
    failures = []
    for i in range(config.restarts):
        try:
            r = optimize_embedding(n, space, config, seed=(config.seed, i), restart=i)
        except ConvergenceError as exc:
            failures.append(exc)
            log.warning("restart %d failed: %s", i, exc)
            if exc.best is not None:
                rep = evaluate_distortion(exc.best)
                results.append((rep.distortion, i, exc.best, rep))
                history.append(rep.distortion)
            continue
        results.append((r.report.distortion, i, r.embedding, r.report))
        history.append(r.report.distortion)
        trace.extend(r.trace)
    if not results:
        raise failures[-1]
    _, idx, emb, rep = min(results, key=lambda item: (item[0], item[1]))
    return OptimizationResult(emb, rep, history, config, trace, idx)
