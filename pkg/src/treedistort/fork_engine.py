"""The fork lemma as executable checks, and the half-depth extraction it drives.

A fork is the four-vertex tree ``a0 -> a1 -> {a2, a2p}``. If a map of the
fork into a ``p``-uniformly convex space is distance non-decreasing and
``D``-Lipschitz, one of the two grandchildren lies within
``2 * (D - K(D) / D**(p-1))`` of ``a0``. Keeping that grandchild below every
child of every vertex selected so far, every other generation, yields a copy
of ``T_{n // 2}`` whose distortion is at most ``f(D) = D - K(D) / D**(p-1)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .convexity import ConvexityProfile, SpaceSpec, _pnorm
from .errors import DepthError, DomainError, HypothesisError, InfeasibleMargin, LemmaViolation
from .metric_core import Embedding, evaluate_distortion, normalize_embedding, restrict_to_selection

DEFAULT_TAU = 1e-6
# relative slack for floating-point comparisons of certified inequalities
SLACK = 1e-12
CONTRACT_TOL = 1e-9


@dataclass(frozen=True)
class Fork:
    a0: int
    a1: int
    a2: int
    a2p: int

    def __post_init__(self):
        if self.a1 not in (2 * self.a0, 2 * self.a0 + 1):
            raise DomainError(f"{self.a1} is not a child of {self.a0}")
        if {self.a2, self.a2p} != {2 * self.a1, 2 * self.a1 + 1}:
            raise DomainError(f"{self.a2}, {self.a2p} are not the two children of {self.a1}")

    @classmethod
    def below(cls, a0, a1):
        return cls(a0, a1, 2 * a1, 2 * a1 + 1)

    def as_list(self):
        return [self.a0, self.a1, self.a2, self.a2p]


@dataclass(frozen=True)
class ForkCertificate:
    fork: Fork
    D: float
    eta: float
    bound: float
    kept: int
    kept_norm: float
    other_norm: float

    def to_dict(self):
        return {
            "fork": self.fork.as_list(),
            "D": self.D,
            "eta": self.eta,
            "bound": self.bound,
            "kept": self.kept,
            "kept_norm": self.kept_norm,
            "other_norm": self.other_norm,
        }


@dataclass(frozen=True)
class Check:
    name: str
    lhs: float
    rhs: float
    relation: str
    holds: bool
    kind: str = "inequality"


@dataclass
class ProofTrace:
    x1: np.ndarray
    x2: np.ndarray
    v: np.ndarray | None
    eta: float
    eps: float
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.holds for c in self.checks)

    def failed(self):
        return [c for c in self.checks if not c.holds]


@dataclass
class ExtractionLevel:
    depth: int
    D: float
    certificates: list

    def to_dict(self):
        return {
            "depth": self.depth,
            "D": self.D,
            "certificates": [c.to_dict() for c in self.certificates],
        }


@dataclass
class ExtractionTrace:
    levels: list
    d_sequence: list
    certified_statement: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "levels": [lv.to_dict() for lv in self.levels],
            "d_sequence": list(self.d_sequence),
            "certified_statement": dict(self.certified_statement),
        }


def _le(a, b):
    return a <= b + SLACK * max(1.0, abs(b))


def _ge(a, b):
    return a >= b - SLACK * max(1.0, abs(b))


def _margin_lhs(K, D, p, c):
    return 4.0 * K / D ** (p - 1.0) + 2.0 * (2.0 * K / c) ** (1.0 / p)


@lru_cache(maxsize=4096)
def fork_constant(D: float, profile: ConvexityProfile, tau: float = DEFAULT_TAU) -> float:
    """Largest ``K`` with ``4K/D**(p-1) + 2*(2K/c)**(1/p) <= 2*(1 - tau)``.

    Solved by bisection on the increasing left side; the returned value is
    the feasible end of the final bracket.
    """
    if not D >= 1.0:
        raise DomainError(f"Lipschitz constant must be >= 1, got {D}")
    if not 0.0 <= tau < 1.0:
        raise InfeasibleMargin(f"margin tau must lie in [0, 1), got {tau}")
    p, c = profile.p_type, profile.c
    target = 2.0 * (1.0 - tau)
    lo, hi = 0.0, 0.5 * c * (target / 2.0) ** p
    if not hi > 0.0:
        raise InfeasibleMargin(f"no positive K satisfies the margin for D={D}, tau={tau}")
    for _ in range(400):
        if hi - lo <= 1e-12 * hi:
            break
        mid = 0.5 * (lo + hi)
        if _margin_lhs(mid, D, p, c) <= target:
            lo = mid
        else:
            hi = mid
    if not lo > 0.0:
        raise InfeasibleMargin(f"no positive K satisfies the margin for D={D}, tau={tau}")
    eps = (2.0 * lo / (c * D**p)) ** (1.0 / p)
    if eps > 2.0:
        raise DomainError(f"proof parameter eps={eps} leaves the modulus domain (0, 2]")
    return lo


def fork_eta(D: float, profile: ConvexityProfile, tau: float = DEFAULT_TAU) -> float:
    return fork_constant(D, profile, tau) / D ** (profile.p_type - 1.0)


def fork_bound(D: float, profile: ConvexityProfile, tau: float = DEFAULT_TAU) -> float:
    """Distance within which one grandchild of a fork must lie: ``2(D - eta)``."""
    return 2.0 * (D - fork_eta(D, profile, tau))


def proof_eps(D: float, eta: float, profile: ConvexityProfile) -> float:
    return (2.0 * eta / (profile.c * D)) ** (1.0 / profile.p_type)


def both_far_separation_bound(D: float, profile: ConvexityProfile, tau: float = DEFAULT_TAU) -> float:
    """Upper bound on ``|x2 - x2'|`` when both grandchildren are far from ``a0``.

    Equals ``4*eta + 2*D*eps`` and is at most ``2*(1 - tau)``, which
    contradicts the separation 2 demanded of a non-contracting map.
    """
    eta = fork_eta(D, profile, tau)
    return 4.0 * eta + 2.0 * D * proof_eps(D, eta, profile)


def check_fork(e: Embedding, fork: Fork, D: float, profile: ConvexityProfile,
               tau: float = DEFAULT_TAU) -> ForkCertificate:
    for v in fork.as_list():
        e.tree.check_vertex(v)
    p = e.space.p
    pts = {v: e.point(v) for v in fork.as_list()}
    tree_d = {(fork.a0, fork.a1): 1, (fork.a0, fork.a2): 2, (fork.a0, fork.a2p): 2,
              (fork.a1, fork.a2): 1, (fork.a1, fork.a2p): 1, (fork.a2, fork.a2p): 2}
    for (u, w), d in tree_d.items():
        r = _pnorm(pts[u] - pts[w], p) / d
        if r < 1.0 - SLACK:
            raise HypothesisError(f"pair ({u}, {w}) contracts: ratio {r!r} < 1")
        if r > D * (1.0 + SLACK):
            raise HypothesisError(f"pair ({u}, {w}) expands: ratio {r!r} > D={D!r}")

    n2 = _pnorm(pts[fork.a2] - pts[fork.a0], p)
    n2p = _pnorm(pts[fork.a2p] - pts[fork.a0], p)
    if (n2, fork.a2) <= (n2p, fork.a2p):
        kept, kept_norm, other_norm = fork.a2, n2, n2p
    else:
        kept, kept_norm, other_norm = fork.a2p, n2p, n2
    eta = fork_eta(D, profile, tau)
    bound = 2.0 * (D - eta)
    if kept_norm > bound:
        raise LemmaViolation(
            f"fork {fork.as_list()}: both grandchildren beyond {bound!r} "
            f"(norms {n2!r}, {n2p!r}, D={D!r}, profile={profile})"
        )
    return ForkCertificate(fork, float(D), eta, bound, kept, kept_norm, other_norm)


def replay_lemma_proof(x1, x2, D: float, profile: ConvexityProfile,
                       space: SpaceSpec | None = None, tau: float = DEFAULT_TAU) -> ProofTrace:
    """Recompute every inequality of the fork lemma's proof for one witness.

    ``a0`` sits at the origin, ``x1`` and ``x2`` are the images of the child
    and of a grandchild. Hypotheses are checked first; when one fails a
    :class:`HypothesisError` carrying the partial trace is raised.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if space is None:
        space = SpaceSpec(profile.p_type, x1.shape[0])
    p = space.p

    def norm(z):
        return _pnorm(z, p)

    eta = fork_eta(D, profile, tau)
    eps = proof_eps(D, eta, profile)
    trace = ProofTrace(x1, x2, None, eta, eps)
    n1, n21, n2 = norm(x1), norm(x2 - x1), norm(x2)

    def hyp(name, lhs, rel, rhs):
        ok = lhs <= rhs if rel == "<=" else lhs >= rhs
        trace.checks.append(Check(name, lhs, rhs, rel, ok, kind="hypothesis"))

    hyp("|x1| <= D", n1, "<=", D)
    hyp("|x2-x1| <= D", n21, "<=", D)
    hyp("|x1| >= 1", n1, ">=", 1.0)
    hyp("|x2-x1| >= 1", n21, ">=", 1.0)
    hyp("|x2| >= 2", n2, ">=", 2.0)
    hyp("|x2| >= 2(D-eta)", n2, ">=", 2.0 * (D - eta))
    if not trace.passed:
        names = ", ".join(c.name for c in trace.failed())
        raise HypothesisError(f"witness violates: {names}", trace=trace)

    v = (n1 / n21) * (x2 - x1)
    trace.v = v

    def ineq(name, lhs, rel, rhs):
        ok = _le(lhs, rhs) if rel == "<=" else _ge(lhs, rhs)
        trace.checks.append(Check(name, lhs, rhs, rel, ok))

    ineq("|x1| >= D-2eta", n1, ">=", D - 2.0 * eta)
    ineq("|x2-x1| >= D-2eta", n21, ">=", D - 2.0 * eta)
    gap = norm(x1 + v - x2)
    ineq("|x1+v-x2| = ||x1|-|x2-x1||", abs(gap - abs(n1 - n21)), "<=", 0.0)
    ineq("|x1+v-x2| <= 2eta", gap, "<=", 2.0 * eta)
    ineq("|x1+v| >= 2D-4eta", norm(x1 + v), ">=", 2.0 * D - 4.0 * eta)
    mid = norm(x1 + v) / (2.0 * n1)
    ineq("|(x1+v)/2|/|x1| >= 1-2eta/D", mid, ">=", 1.0 - 2.0 * eta / D)
    sep = norm(x1 - v) / n1
    ineq("c*sep^p <= 1-|midpoint|", profile.c * sep**profile.p_type, "<=", 1.0 - mid)
    ineq("|x1-v| <= eps*D", norm(x1 - v), "<=", eps * D)
    ineq("|2x1-x2| <= 2eta+eps*D", norm(2.0 * x1 - x2), "<=", 2.0 * eta + eps * D)
    return trace


def extract_half(e: Embedding, profile: ConvexityProfile, tau: float = DEFAULT_TAU):
    """Select a half-depth subtree of lower distortion.

    Returns the renormalized embedding of ``T_{n // 2}`` and a single-level
    :class:`ExtractionTrace`. Raises :class:`LemmaViolation` if the output
    distortion exceeds ``f(D) + 1e-9``.
    """
    depth = e.tree.depth
    if depth < 2:
        raise DepthError(f"extraction needs depth >= 2, got {depth}")
    e = normalize_embedding(e)
    D = evaluate_distortion(e).distortion
    certs = []
    kept = {}
    frontier = [e.tree.root]
    for _ in range(depth // 2):
        nxt = []
        for a0 in frontier:
            pair = []
            for a1 in (2 * a0, 2 * a0 + 1):
                cert = check_fork(e, Fork.below(a0, a1), D, profile, tau)
                certs.append(cert)
                pair.append(cert.kept)
            kept[a0] = tuple(pair)
            nxt.extend(pair)
        frontier = nxt
    out = normalize_embedding(restrict_to_selection(e, kept))
    D_next = evaluate_distortion(out).distortion
    f_D = D - fork_eta(D, profile, tau)
    if D_next > f_D + CONTRACT_TOL:
        raise LemmaViolation(f"extracted distortion {D_next!r} exceeds f(D)={f_D!r}")
    trace = ExtractionTrace([ExtractionLevel(depth, D, certs)], [D, D_next])
    return out, trace


def certify_chain(e: Embedding, profile: ConvexityProfile, tau: float = DEFAULT_TAU) -> ExtractionTrace:
    """Iterate :func:`extract_half` down to depth 1 and compare with the theory.

    The certified lower bound is the iterative bound for
    ``m = floor(log2 n)``; the observed distortion must dominate it.
    """
    from .bourgain_bound import lower_bound_iterative

    depth = e.tree.depth
    if depth < 2:
        raise DepthError(f"certification needs depth >= 2, got {depth}")
    cur = normalize_embedding(e)
    levels = []
    d_seq = [evaluate_distortion(cur).distortion]
    while cur.tree.depth >= 2:
        cur, step = extract_half(cur, profile, tau)
        levels.extend(step.levels)
        d_seq.append(step.d_sequence[-1])
    m = depth.bit_length() - 1
    bound = lower_bound_iterative(m, profile, tau)
    passed = d_seq[0] >= bound.value
    statement = {
        "text": (
            f"any embedding of T_{depth} into l_{e.space.p} has distortion >= {bound.value:.12g}; "
            f"observed D_0 = {d_seq[0]:.12g} ({'PASS' if passed else 'FAIL'})"
        ),
        "depth": depth,
        "m": m,
        "lower_bound": bound.value,
        "observed_distortion": d_seq[0],
        "passed": bool(passed),
        "rigorous": profile.rigorous,
        "profile": profile.to_dict(),
        "tau": tau,
    }
    return ExtractionTrace(levels, d_seq, statement)
