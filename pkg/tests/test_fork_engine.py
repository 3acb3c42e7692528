import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from treedistort.convexity import ConvexityProfile, SpaceSpec
from treedistort.errors import DepthError, DomainError, HypothesisError, InfeasibleMargin
from treedistort.fork_engine import (
    Fork,
    both_far_separation_bound,
    certify_chain,
    check_fork,
    extract_half,
    fork_bound,
    fork_constant,
    fork_eta,
    replay_lemma_proof,
)
from treedistort.metric_core import Embedding, build_tree, evaluate_distortion, normalize_embedding
from treedistort.optimizer import random_embedding

from conftest import brute_force_distortion, near_extremal_witness, path_embedding

HILBERT = ConvexityProfile(2.0, 0.125)


def k_closed_form(D, tau=0.0):
    """p = 2: with s = sqrt(K), (4/D) s^2 + 8 s = 2(1 - tau)."""
    T = 2 * (1 - tau)
    s = (-8 + math.sqrt(64 + 16 * T / D)) / (8 / D)
    return s * s


def k_brentq(D, p, c, tau=0.0):
    g = lambda K: 4 * K / D ** (p - 1) + 2 * (2 * K / c) ** (1 / p) - 2 * (1 - tau)
    return brentq(g, 0.0, c, xtol=1e-300, rtol=1e-15)


def test_fork_constant_frozen_values():
    assert fork_constant(2.0, HILBERT, 0.0) == pytest.approx((math.sqrt(5) - 2) ** 2, rel=1e-11)
    assert fork_constant(1.0, HILBERT, 0.0) == pytest.approx((math.sqrt(6) / 2 - 1) ** 2, rel=1e-11)
    assert fork_constant(10.0, HILBERT, 0.0) == pytest.approx((math.sqrt(105) - 10) ** 2, rel=1e-11)


@pytest.mark.parametrize("D", [1.0, 1.5, 3.0, 17.0, 1e4])
@pytest.mark.parametrize("tau", [0.0, 1e-6, 0.3])
def test_fork_constant_matches_closed_form(D, tau):
    K = fork_constant(D, HILBERT, tau)
    assert K == pytest.approx(k_closed_form(D, tau), rel=1e-11)
    # returned value is feasible
    assert 4 * K / D + 2 * math.sqrt(16 * K) <= 2 * (1 - tau) * (1 + 1e-15)


@pytest.mark.parametrize("p", [2.5, 3.0, 4.0])
@pytest.mark.parametrize("D", [1.0, 2.0, 9.0])
def test_fork_constant_general_p(p, D):
    c = 1 / (p * 2**p)
    K = fork_constant(D, ConvexityProfile(p, c), 0.0)
    assert K == pytest.approx(k_brentq(D, p, c), rel=1e-11)


def test_fork_constant_limit_large_D():
    # as D grows the first term vanishes and 2(2K/c)^(1/2) -> 2 gives K -> c/2
    assert fork_constant(1e12, HILBERT, 0.0) == pytest.approx(0.0625, rel=1e-10)


def test_fork_constant_monotone():
    Ds = [1.0, 1.2, 2.0, 5.0, 50.0]
    Ks = [fork_constant(D, HILBERT) for D in Ds]
    assert all(a < b for a, b in zip(Ks, Ks[1:]))
    assert fork_constant(2.0, ConvexityProfile(2.0, 0.05)) < fork_constant(2.0, HILBERT)
    assert fork_constant(2.0, HILBERT, 0.1) < fork_constant(2.0, HILBERT, 0.0)


def test_fork_constant_domain():
    with pytest.raises(DomainError):
        fork_constant(0.99, HILBERT)
    with pytest.raises(InfeasibleMargin):
        fork_constant(2.0, HILBERT, 1.0)
    with pytest.raises(InfeasibleMargin):
        fork_constant(2.0, HILBERT, -0.1)


def test_fork_bound_values():
    assert fork_bound(2.0, HILBERT, 0.0) == pytest.approx(2 * (2 - (math.sqrt(5) - 2) ** 2 / 2), rel=1e-11)
    assert fork_bound(2.0, HILBERT, 0.0) == pytest.approx(3.94427, abs=1e-5)
    assert fork_bound(1.0, HILBERT, 0.0) == pytest.approx(1.89898, abs=1e-5)
    assert fork_eta(2.0, HILBERT, 0.0) == pytest.approx(fork_constant(2.0, HILBERT, 0.0) / 2)


@settings(max_examples=80, deadline=None)
@given(D=st.floats(1.0, 1e6), p=st.sampled_from([2.0, 2.5, 3.0, 4.0]), tau=st.floats(0.0, 0.5))
def test_contrapositive_separation_below_two(D, p, tau):
    prof = ConvexityProfile(p, 1 / (p * 2**p))
    assert both_far_separation_bound(D, prof, tau) <= 2 * (1 - tau) * (1 + 1e-12)
    assert both_far_separation_bound(D, prof, tau) < 2


def test_fork_validation():
    Fork(1, 2, 4, 5)
    Fork(3, 7, 15, 14)
    with pytest.raises(DomainError):
        Fork(1, 4, 8, 9)
    with pytest.raises(DomainError):
        Fork(1, 2, 4, 6)


def _t2_with_fork(pts_fork, dim):
    """Place the fork on vertices 1, 2, 4, 5 of T_2; the rest are far away filler."""
    pts = np.zeros((7, dim))
    pts[[0, 1, 3, 4]] = pts_fork
    pts[[2, 5, 6]] = 1e3 * np.arange(1, 4)[:, None]
    return pts


def test_check_fork_l2_example():
    space = SpaceSpec(2.0, 2)
    fork_pts = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [1.0, 2.0]])
    e = Embedding(build_tree(2), space, _t2_with_fork(fork_pts, 2))
    cert = check_fork(e, Fork.below(1, 2), 2.0, HILBERT)
    assert cert.kept == 4
    assert cert.kept_norm == 2.0
    assert cert.other_norm == pytest.approx(math.sqrt(5))
    assert cert.bound == pytest.approx(3.94427, abs=1e-5)
    d = cert.to_dict()
    assert list(d) == ["fork", "D", "eta", "bound", "kept", "kept_norm", "other_norm"]
    assert d["fork"] == [1, 2, 4, 5]


def test_check_fork_tie_keeps_lower_index():
    space = SpaceSpec(2.0, 2)
    fork_pts = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, math.sqrt(3)], [1.0, -math.sqrt(3)]])
    e = Embedding(build_tree(2), space, _t2_with_fork(fork_pts, 2))
    assert check_fork(e, Fork.below(1, 2), 2.0, HILBERT).kept == 4


def test_check_fork_rejects_hypothesis_failures():
    space = SpaceSpec(2.0, 2)
    contracting = np.array([[0.0, 0.0], [0.5, 0.0], [1.5, 0.0], [0.5, 1.0]])
    e = Embedding(build_tree(2), space, _t2_with_fork(contracting, 2))
    with pytest.raises(HypothesisError):
        check_fork(e, Fork.below(1, 2), 4.0, HILBERT)
    expanding = np.array([[0.0, 0.0], [3.0, 0.0], [4.0, 0.0], [3.0, 1.0]])
    e = Embedding(build_tree(2), space, _t2_with_fork(expanding, 2))
    with pytest.raises(HypothesisError):
        check_fork(e, Fork.below(1, 2), 2.0, HILBERT)


def test_collinear_witness_replay():
    D = 2.0
    eta = fork_eta(D, HILBERT)
    x1 = np.array([D, 0.0, 0.0])
    x2 = np.array([2 * D, 0.0, 0.0])
    trace = replay_lemma_proof(x1, x2, D, HILBERT)
    assert trace.passed
    assert trace.eta == pytest.approx(eta)
    np.testing.assert_allclose(trace.v, x1)
    assert trace.eps <= 1 / D


def test_replay_hypothesis_guard():
    with pytest.raises(HypothesisError) as info:
        replay_lemma_proof([1.0, 0.0], [1.5, 0.0], 2.0, HILBERT)
    trace = info.value.trace
    assert trace is not None
    names = {c.name for c in trace.failed()}
    assert "|x2| >= 2" in names
    assert all(c.kind == "hypothesis" for c in trace.checks)


@pytest.mark.parametrize("p", [2.0, 3.0, 4.0])
def test_replay_random_witnesses_general_p(p):
    rng = np.random.default_rng([7, int(p)])
    space = SpaceSpec(p, 3)
    prof = ConvexityProfile(p, 1 / (p * 2**p))
    for _ in range(200):
        D = rng.uniform(1.05, 8.0)
        x1, x2 = near_extremal_witness(rng, D, prof, space)
        trace = replay_lemma_proof(x1, x2, D, prof, space)
        assert trace.passed, [c for c in trace.failed()]


def test_extract_half_contract_small():
    e = path_embedding(4, SpaceSpec(2.0, 3), np.random.default_rng(3), jitter=0.2)
    D = evaluate_distortion(normalize_embedding(e)).distortion
    out, trace = extract_half(e, HILBERT)
    assert out.tree.depth == 2
    assert trace.d_sequence[0] == pytest.approx(D, rel=1e-12)
    _, _, d_out = brute_force_distortion(out)
    assert d_out == pytest.approx(trace.d_sequence[1], rel=1e-12)
    assert d_out <= D - fork_eta(D, HILBERT) + 1e-9
    # two forks below the root, then two below each of the two kept grandchildren
    assert len(trace.levels[0].certificates) == 2 + 4


def test_extract_half_depth_error():
    with pytest.raises(DepthError):
        extract_half(random_embedding(1, SpaceSpec(2.0, 2), 0), HILBERT)


def test_certify_chain_t2_single_level():
    e = path_embedding(2, SpaceSpec(2.0, 2), np.random.default_rng(0))
    trace = certify_chain(e, HILBERT)
    assert len(trace.levels) == 1
    assert len(trace.d_sequence) == 2
    st_ = trace.certified_statement
    assert st_["m"] == 1 and st_["depth"] == 2
    assert st_["passed"] is (st_["observed_distortion"] >= st_["lower_bound"])
    assert st_["rigorous"] is True


def test_certify_chain_t8_three_levels_decreasing():
    e = random_embedding(8, SpaceSpec(2.0, 8), seed=2)
    trace = certify_chain(e, HILBERT)
    assert [lv.depth for lv in trace.levels] == [8, 4, 2]
    seq = trace.d_sequence
    assert len(seq) == 4
    assert all(a > b for a, b in zip(seq, seq[1:]))
    assert trace.certified_statement["m"] == 3
    assert trace.certified_statement["passed"]
    d = trace.to_dict()
    assert set(d) == {"levels", "d_sequence", "certified_statement"}
