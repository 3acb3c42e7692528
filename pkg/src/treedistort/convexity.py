"""l_p norms, moduli of uniform convexity and type-p constants."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import ConvergenceError, DomainError, Unsupported

NUMERIC_RESTARTS = 16
CONSTRAINT_TOL = 1e-10
OBJECTIVE_TOL = 1e-12
PROFILE_SAFETY = 0.9


@dataclass(frozen=True)
class SpaceSpec:
    """The host space l_p^dim."""

    p: float
    dim: int

    def __post_init__(self):
        if not (1.0 < self.p < math.inf):
            raise DomainError(f"norm exponent must lie in (1, inf), got {self.p}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise DomainError(f"dimension must be a positive integer, got {self.dim}")
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "dim", int(self.dim))

    def to_dict(self):
        return {"p": self.p, "dim": self.dim}


@dataclass(frozen=True)
class ConvexityProfile:
    """Witness ``delta(eps) >= c * eps**p_type`` for a host space.

    ``source`` is ``"analytic"`` for the provable constant and ``"numeric"``
    for a fitted (non-rigorous) one.
    """

    p_type: float
    c: float
    source: str = "analytic"

    def __post_init__(self):
        if self.p_type < 2:
            raise DomainError(f"convexity type must be >= 2, got {self.p_type}")
        if not self.c > 0:
            raise DomainError(f"convexity constant must be positive, got {self.c}")
        if self.source not in ("analytic", "numeric"):
            raise DomainError(f"unknown profile source {self.source!r}")

    @property
    def rigorous(self):
        return self.source == "analytic"

    def to_dict(self):
        return {"p_type": self.p_type, "c": self.c, "source": self.source}


@dataclass
class ModulusEstimate:
    value: float
    x: np.ndarray
    y: np.ndarray
    separation: float
    restarts: list = field(default_factory=list)


def _check_eps(eps):
    if not (0.0 < eps <= 2.0):
        raise DomainError(f"eps must lie in (0, 2], got {eps}")


def _pnorm(x, p):
    x = np.abs(np.asarray(x, dtype=float))
    top = x.max(initial=0.0)
    if top == 0.0:
        return 0.0
    if p == 2.0:
        return float(np.linalg.norm(x))
    # rescale before the power to avoid overflow/underflow
    return float(top * np.sum((x / top) ** p) ** (1.0 / p))


def _pnorm_grad(x, p):
    """Gradient of the l_p norm; the zero subgradient is used at the origin."""
    n = _pnorm(x, p)
    if n == 0.0:
        return np.zeros_like(x, dtype=float)
    return np.sign(x) * (np.abs(x) / n) ** (p - 1.0)


def norm_value(space: SpaceSpec, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != space.dim:
        raise DomainError(f"vector of shape {x.shape} does not live in l_{space.p}^{space.dim}")
    return _pnorm(x, space.p)


def modulus_analytic(space: SpaceSpec, eps: float) -> float:
    """Exact modulus of convexity of l_p for p >= 2 (Clarkson)."""
    _check_eps(eps)
    p = space.p
    if p < 2:
        raise Unsupported("closed-form modulus only available for p >= 2; use modulus_numeric")
    t = (eps / 2.0) ** p
    # 1 - (1 - t)**(1/p) without cancellation for small t
    return float(-math.expm1(math.log1p(-t) / p)) if t < 1.0 else 1.0


def _solve_restart(p, dim, eps, rng, budget):
    half = eps / 2.0
    m0 = rng.standard_normal(dim)
    h0 = rng.standard_normal(dim)
    m0 *= max(1.0 - half, 1e-3) / max(_pnorm(m0, p), 1e-300)
    w0 = np.concatenate([m0, h0])

    def chord(h):
        nh = _pnorm(h, p)
        return half * h / nh, nh

    def chord_jac_t(h, nh, g):
        # (d chord / d h)^T g
        gh = _pnorm_grad(h, p)
        return half * (g / nh - gh * np.dot(h, g) / nh**2)

    def objective(w):
        return -_pnorm(w[:dim], p)

    def objective_jac(w):
        return np.concatenate([-_pnorm_grad(w[:dim], p), np.zeros(dim)])

    def cons(w):
        m, h = w[:dim], w[dim:]
        hh, _ = chord(h)
        return np.array([_pnorm(m + hh, p) - 1.0, _pnorm(m - hh, p) - 1.0])

    def cons_jac(w):
        m, h = w[:dim], w[dim:]
        hh, nh = chord(h)
        g1 = _pnorm_grad(m + hh, p)
        g2 = _pnorm_grad(m - hh, p)
        return np.vstack([
            np.concatenate([g1, chord_jac_t(h, nh, g1)]),
            np.concatenate([g2, -chord_jac_t(h, nh, g2)]),
        ])

    res = minimize(
        objective, w0, jac=objective_jac, method="SLSQP",
        constraints=[{"type": "eq", "fun": cons, "jac": cons_jac}],
        options={"maxiter": budget, "ftol": OBJECTIVE_TOL},
    )
    m, h = res.x[:dim], res.x[dim:]
    if not np.all(np.isfinite(res.x)) or _pnorm(h, p) == 0.0:
        return None
    hh, _ = chord(h)
    x, y = m + hh, m - hh
    if np.max(np.abs(cons(res.x))) > CONSTRAINT_TOL:
        return None
    x = x / _pnorm(x, p)
    y = y / _pnorm(y, p)
    return 1.0 - _pnorm((x + y) / 2.0, p), x, y


def modulus_numeric(space: SpaceSpec, eps: float, seed: int = 0, budget: int = 500,
                    restarts: int = NUMERIC_RESTARTS) -> ModulusEstimate:
    """Estimate the modulus of convexity by constrained search over sphere pairs.

    Pairs are parameterized as ``m +- chord`` with the chord held at norm
    ``eps / 2`` so the separation is exact; both endpoints are pinned to the
    unit sphere as equality constraints. The result is an upper bound on the
    infimum up to the constraint tolerance.
    """
    _check_eps(eps)
    p, dim = space.p, space.dim
    if eps == 2.0 or dim == 1:
        # strict convexity forces y = -x at eps = 2; in 1-D the only
        # separated unit pair is (1, -1) for every eps in (0, 2]
        x = np.zeros(dim)
        x[0] = 1.0
        return ModulusEstimate(1.0, x, -x, 2.0, [1.0])

    best = None
    values = []
    for i in range(restarts):
        rng = np.random.default_rng([seed, i])
        out = _solve_restart(p, dim, eps, rng, budget)
        values.append(math.nan if out is None else out[0])
        if out is not None and (best is None or out[0] < best[0]):
            best = out
    if best is None:
        raise ConvergenceError(
            f"no restart met the constraint tolerance {CONSTRAINT_TOL} "
            f"(p={p}, dim={dim}, eps={eps})"
        )
    value, x, y = best
    return ModulusEstimate(float(value), x, y, _pnorm(x - y, p), values)


def convexity_profile(space: SpaceSpec, seed: int = 0, grid_size: int = 24) -> ConvexityProfile:
    """Type and constant of uniform convexity for ``space``.

    For p >= 2 the constant ``1 / (p * 2**p)`` follows from
    ``(1 - t)**(1/p) <= 1 - t/p``. For 1 < p < 2 the constant is fitted from
    numeric moduli on an eps grid and shrunk by a safety factor; it is
    flagged ``numeric`` and must not be read as a certificate.
    """
    p = space.p
    if p >= 2:
        return ConvexityProfile(p_type=p, c=1.0 / (p * 2.0**p), source="analytic")
    probe = SpaceSpec(p, max(space.dim, 2))
    grid = np.linspace(2.0 / grid_size, 2.0, grid_size)
    ratios = [modulus_numeric(probe, float(e), seed=seed, restarts=4).value / e**2 for e in grid]
    return ConvexityProfile(p_type=2.0, c=float(PROFILE_SAFETY * min(ratios)), source="numeric")


def profile_violations(profile: ConvexityProfile, space: SpaceSpec, grid=None, seed=0):
    """Return the eps values where ``delta(eps) < c * eps**p_type``.

    The analytic modulus is used when available, the numeric estimate otherwise.
    """
    if grid is None:
        grid = np.linspace(0.02, 2.0, 100)
    bad = []
    for e in grid:
        e = float(e)
        if space.p >= 2:
            delta = modulus_analytic(space, e)
        else:
            delta = modulus_numeric(space, e, seed=seed).value
        if delta < profile.c * e**profile.p_type:
            bad.append(e)
    return bad
