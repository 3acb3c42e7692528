"""Certified lower bounds on the distortion of T_n from the self-improvement map.

``f(D) = D - K(D) / D**(p-1)`` maps the distortion of an embedding of
``T_n`` to a bound on the distortion of an embedded ``T_{n // 2}``. Since
every embedding has distortion at least 1, any ``D`` whose first
``m = floor(log2 n)`` iterates do not all stay >= 1 is ruled out.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numba
import numpy as np

from .convexity import ConvexityProfile
from .errors import DomainError, InfeasibleMargin
from .fork_engine import DEFAULT_TAU, fork_constant

log = logging.getLogger(__name__)

BISECTION_RTOL = 1e-9
SEQUENCE_CAP = 4096
MONOTONE_GRID = 9


@dataclass
class LowerBoundResult:
    m: int
    profile: ConvexityProfile
    value: float
    method: str
    tau: float | None = None
    d_sequence: list | None = None
    upper: float | None = None
    notes: list = field(default_factory=list)

    def to_dict(self):
        out = {
            "m": self.m,
            "method": self.method,
            "value": self.value,
            "p": self.profile.p_type,
            "c": self.profile.c,
            "tau": self.tau,
            "profile": self.profile.to_dict(),
        }
        if self.upper is not None:
            out["upper"] = self.upper
        if self.notes:
            out["notes"] = list(self.notes)
        return out


@numba.njit(cache=True)
def _pow(x, p):
    if p == 2.0:
        return x * x
    if p == 3.0:
        return x * x * x
    if p == 4.0:
        x2 = x * x
        return x2 * x2
    if p == 1.0:
        return x
    return x**p


@numba.njit(cache=True)
def _solve_s(D, p, c, target, s):
    # root of A s^p + 2 s = target with A = 2c / D^(p-1); K = c s^p / 2.
    # The left side is convex and increasing, so Newton from above stays above.
    A = 2.0 * c / _pow(D, p - 1.0)
    if s <= 0.0 or A * _pow(s, p) + 2.0 * s - target < 0.0:
        s = 0.5 * target
    for _ in range(100):
        h = A * _pow(s, p) + 2.0 * s - target
        s_new = s - h / (p * A * _pow(s, p - 1.0) + 2.0)
        if not (0.0 < s_new < s):
            break
        done = s - s_new <= 1e-16 * s
        s = s_new
        if done:
            break
    while A * _pow(s, p) + 2.0 * s > target:
        s = np.nextafter(s, 0.0)
    return s


@numba.njit(cache=True)
def _iterate_kernel(D, m, p, c, target, out):
    # out, when non-empty, receives the iterates D_1 .. D_k
    s = 0.0
    record = out.shape[0] > 0
    for k in range(m):
        s = _solve_s(D, p, c, target, s)
        D = D - 0.5 * c * _pow(s, p) / _pow(D, p - 1.0)
        if record:
            out[k] = D
        if D < 1.0:
            return D, k
    return D, m


@numba.njit(cache=True)
def _inverse_kernel(m, p, c, target):
    # m-fold preimage of 1 under f; x = y + K(x) / x^(p-1) is a contraction
    y = 1.0
    s = 0.0
    for _ in range(m):
        x = y
        for _ in range(60):
            s = _solve_s(x, p, c, target, s)
            x_new = y + 0.5 * c * _pow(s, p) / _pow(x, p - 1.0)
            if abs(x_new - x) <= 1e-16 * x_new:
                x = x_new
                break
            x = x_new
        y = x
    return y


def _check_D(D):
    if not D >= 1.0:
        raise DomainError(f"f is defined on [1, inf), got D={D}")


def _check_tau(tau):
    # the Newton kernel has no feasible root outside this range
    if not 0.0 <= tau < 1.0:
        raise InfeasibleMargin(f"margin tau must lie in [0, 1), got {tau}")


def f_step(D: float, profile: ConvexityProfile, tau: float = DEFAULT_TAU) -> float:
    _check_D(D)
    return D - fork_constant(D, profile, tau) / D ** (profile.p_type - 1.0)


def f_iterate(D: float, m: int, profile: ConvexityProfile, tau: float = DEFAULT_TAU,
              record: bool = False):
    """Apply ``f`` up to ``m`` times, stopping once an iterate drops below 1.

    Returns ``(value, survived)``: the last computed iterate and the number
    of steps whose iterate stayed >= 1. ``survived < m`` means step
    ``survived + 1`` fell below 1. With ``record=True`` the iterate list is
    appended as a third element.

    ``K(D)`` is obtained here by a guarded Newton solve (monotone from above,
    then nudged to the feasible side) rather than bisection, so that
    ``m`` in the millions stays cheap.
    """
    _check_D(D)
    _check_tau(tau)
    if m < 0:
        raise DomainError(f"iteration count must be >= 0, got {m}")
    target = 2.0 * (1.0 - tau)
    buf = np.empty(m if record else 0)
    value, survived = _iterate_kernel(float(D), int(m), float(profile.p_type),
                                      float(profile.c), target, buf)
    if record:
        return float(value), int(survived), buf[: min(m, survived + 1)].tolist()
    return float(value), int(survived)


def _survives(D, m, profile, tau):
    return f_iterate(D, m, profile, tau)[1] == m


def lower_bound_iterative(m: int, profile: ConvexityProfile,
                          tau: float = DEFAULT_TAU) -> LowerBoundResult:
    """Smallest ``D`` whose ``m`` iterates under ``f`` all stay >= 1.

    ``value`` is the largest bisection point known to fail, so it is a
    certified lower bound; ``upper`` is the smallest one known to survive.
    """
    if int(m) != m or m < 1:
        raise DomainError(f"m must be a positive integer, got {m}")
    _check_tau(tau)
    m = int(m)
    notes = []
    lo = 1.0
    hi = (2.0 * profile.p_type * profile.c * m) ** (1.0 / profile.p_type) + 2.0
    widen = 0
    while not _survives(hi, m, profile, tau):
        lo, hi = hi, 2.0 * hi
        widen += 1
        if widen > 200:
            raise DomainError("could not bracket the lower bound")
    if widen:
        notes.append(f"bracket widened {widen} times")
    if _survives(lo, m, profile, tau):
        # only possible if f(1) >= 1, which K > 0 rules out
        raise DomainError("predicate holds at D = 1; f does not decrease")

    grid = np.linspace(lo, hi, MONOTONE_GRID)
    flags = [_survives(float(g), m, profile, tau) for g in grid]
    first = flags.index(True)
    if all(flags[first:]) and not any(flags[:first]):
        lo, hi = float(grid[first - 1]), float(grid[first])
        lo, hi = _seeded_bracket(lo, hi, m, profile, tau)
    else:
        msg = f"survival predicate not monotone on grid {flags}; using ascending scan"
        log.warning(msg)
        notes.append(msg)
        lo, hi = _scan(lo, hi, m, profile, tau)

    while hi - lo > BISECTION_RTOL * hi:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _survives(mid, m, profile, tau):
            hi = mid
        else:
            lo = mid

    seq = None
    if m <= SEQUENCE_CAP:
        seq = [hi] + f_iterate(hi, m, profile, tau, record=True)[2]
    return LowerBoundResult(m, profile, lo, "iterative", tau, seq, hi, notes)


def _seeded_bracket(lo, hi, m, profile, tau):
    """Shrink a verified bracket around the backward-iterated preimage of 1.

    The estimate only proposes endpoints; each is accepted after the forward
    predicate confirms it, otherwise the valid outer endpoint is kept.
    """
    est = _inverse_kernel(m, float(profile.p_type), float(profile.c), 2.0 * (1.0 - tau))
    if not lo < est < hi:
        return lo, hi
    for width in (1e-11, 1e-9, 1e-7, 1e-5, 1e-3):
        a, b = est * (1.0 - width), est * (1.0 + width)
        a_fails = a > lo and not _survives(a, m, profile, tau)
        b_survives = b < hi and _survives(b, m, profile, tau)
        if a_fails:
            lo = a
        if b_survives:
            hi = b
        if a_fails and b_survives:
            break
    return lo, hi


def _scan(lo, hi, m, profile, tau, pieces=64):
    step = (hi - lo) / pieces
    x = lo
    while x < hi:
        nxt = min(x + step, hi)
        if _survives(nxt, m, profile, tau):
            return x, nxt
        x = nxt
    return lo, hi


def lower_bound_asymptotic(m: int, profile: ConvexityProfile) -> LowerBoundResult:
    """Leading-order bound ``(p c / 2)**(1/p) * m**(1/p)``; never a certificate."""
    if int(m) != m or m < 1:
        raise DomainError(f"m must be a positive integer, got {m}")
    p, c = profile.p_type, profile.c
    value = (p * c / 2.0) ** (1.0 / p) * float(m) ** (1.0 / p)
    return LowerBoundResult(int(m), profile, value, "asymptotic",
                            notes=["leading order only; lower-order terms dropped"])


def m_from_n(n) -> int:
    """``floor(log2 n)`` for arbitrarily large integers (given as int or decimal string)."""
    n = int(n)
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    return n.bit_length() - 1
