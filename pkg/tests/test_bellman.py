import math

import numpy as np
import pytest

from conftest import mixed_instance
from robustmdp.bellman import (
    bellman_opt,
    bellman_opt_nonrobust,
    bellman_optimistic,
    bellman_optimistic_s,
    bellman_optimistic_sa,
    bellman_policy,
    bellman_policy_nonrobust,
    bellman_s_opt,
    bellman_s_policy,
    bellman_sa_opt,
    bellman_sa_policy,
    make_context,
)
from robustmdp.errors import RectangularityMismatch
from robustmdp.mdp import MdpInstance, Rect, UncertaintySpec, random_instance
from robustmdp.oracle import OracleConfig, inner_min_sampled, waterfill_grid
from robustmdp.solver import SolveConfig, value_iteration


def one_state(R0, gamma=0.9):
    R0 = np.atleast_2d(np.asarray(R0, dtype=float))
    return MdpInstance(np.ones((1, R0.shape[1], 1)), R0, gamma)


def random_policy(rng, S, A):
    return rng.dirichlet(np.ones(A), size=S)


def test_nonrobust_max_of_rewards():
    assert bellman_opt_nonrobust(one_state([1.0, 0.0]), [0.0]).tolist() == [1.0]


def test_nonrobust_fixed_point():
    inst = random_instance(5, 3, seed=2)
    rep = value_iteration(inst, None, SolveConfig(epsilon=1e-8))
    assert np.max(np.abs(bellman_opt_nonrobust(inst, rep.value) - rep.value)) <= 1e-8


def test_nonrobust_monotone(rng):
    inst = random_instance(4, 3, seed=5)
    u = rng.normal(size=4)
    v = u + rng.random(4)
    assert (bellman_opt_nonrobust(inst, u) <= bellman_opt_nonrobust(inst, v)).all()


def test_sa_policy_zero_radius_is_nominal(rng, small_inst):
    unc = UncertaintySpec.uniform(small_inst, "sa", 2, 0.0, 0.0)
    pi, v = random_policy(rng, 3, 2), rng.normal(size=3)
    ctx = make_context(small_inst, unc, v)
    assert np.allclose(bellman_sa_policy(ctx, pi), bellman_policy_nonrobust(small_inst, pi, v),
                       atol=1e-12)


def test_sa_single_state_kappa_vanishes(rng):
    inst = one_state([1.0, 0.5, -0.2])
    unc = UncertaintySpec.uniform(inst, "sa", 2, 0.1, 0.7)
    pi = random_policy(rng, 1, 3)
    ctx = make_context(inst, unc, [3.0])
    Q = np.array([1.0, 0.5, -0.2]) + 0.9 * 3.0
    assert bellman_sa_policy(ctx, pi)[0] == pytest.approx(pi[0] @ (Q - 0.1))


def test_sa_penalty_example():
    # S=2, v=[0, 2], noise p=1 so kappa_inf(v) = 1; penalty 0.1 + 0.9 * 0.2 * 1
    P0 = np.full((2, 2, 2), 0.5)
    inst = MdpInstance(P0, np.zeros((2, 2)), 0.9)
    unc = UncertaintySpec.uniform(inst, "sa", 1, 0.1, 0.2)
    v = np.array([0.0, 2.0])
    ctx = make_context(inst, unc, v)
    assert ctx.kappa == 1.0
    assert ctx.sigma == pytest.approx(np.full((2, 2), 0.28))
    pi = np.array([[0.3, 0.7], [1.0, 0.0]])
    closed = bellman_sa_policy(ctx, pi)
    for s in range(2):
        sampled = inner_min_sampled(inst, unc, pi, v, s, OracleConfig(noise_samples=10_000))
        assert closed[s] <= sampled + 1e-9
        assert sampled - closed[s] <= 1e-6


def test_sa_opt_reductions(rng, small_inst):
    v = rng.normal(size=3)
    zero = UncertaintySpec.uniform(small_inst, "sa", 2, 0.0, 0.0)
    nr = bellman_opt_nonrobust(small_inst, v)
    assert np.allclose(bellman_sa_opt(make_context(small_inst, zero, v)), nr, atol=1e-12)
    shift = UncertaintySpec.uniform(small_inst, "sa", 2, 0.3, 0.0)
    assert np.allclose(bellman_sa_opt(make_context(small_inst, shift, v)), nr - 0.3)


def test_sa_opt_dominates_policies(rng):
    inst = random_instance(3, 2, seed=9)
    unc = UncertaintySpec.uniform(inst, "sa", 2, 0.1, 0.05)
    ctx = make_context(inst, unc, rng.normal(size=3))
    best = bellman_sa_opt(ctx)
    for _ in range(100):
        assert (bellman_sa_policy(ctx, random_policy(rng, 3, 2)) <= best + 1e-12).all()


def test_s_policy_deterministic(rng, small_inst):
    unc = UncertaintySpec.uniform(small_inst, "s", 2.5, 0.1, 0.05)
    v = rng.normal(size=3)
    ctx = make_context(small_inst, unc, v)
    pi = np.eye(2)[[1, 0, 1]]
    Q = small_inst.R0 + small_inst.gamma * small_inst.P0 @ v
    expected = Q[np.arange(3), [1, 0, 1]] - ctx.sigma
    assert bellman_s_policy(ctx, pi) == pytest.approx(expected)


def test_s_policy_matches_sampled_oracle():
    inst = mixed_instance(2, 2, seed=4)
    unc = UncertaintySpec.uniform(inst, "s", 2, 0.1, 0.1)
    pi = np.full((2, 2), 0.5)
    v = np.array([1.0, -0.5])
    ctx = make_context(inst, unc, v)
    assert unc.q.norm(pi[0]) == pytest.approx(1 / math.sqrt(2))
    closed = bellman_s_policy(ctx, pi)
    for s in range(2):
        sampled = inner_min_sampled(inst, unc, pi, v, s, OracleConfig(noise_samples=10_000))
        assert closed[s] <= sampled + 1e-9
        assert sampled - closed[s] <= 1e-2


def test_s_opt_reductions(rng, small_inst):
    v = rng.normal(size=3)
    zero = UncertaintySpec.uniform(small_inst, "s", 1.5, 0.0, 0.0)
    value, batch = bellman_s_opt(make_context(small_inst, zero, v))
    assert np.allclose(value, bellman_opt_nonrobust(small_inst, v), atol=1e-12)
    assert (batch.chi == 1).all()
    inf = UncertaintySpec.uniform(small_inst, "s", math.inf, 0.2, 0.1)
    ctx = make_context(small_inst, inf, v)
    assert np.allclose(bellman_s_opt(ctx)[0], bellman_opt_nonrobust(small_inst, v) - ctx.sigma)


def test_s_opt_penalized_average_example():
    inst = one_state([1.0, 0.0])
    unc = UncertaintySpec.uniform(inst, "s", 1, 0.5, 3.0)
    value, batch = bellman_s_opt(make_context(inst, unc, [0.0]))
    assert value[0] == pytest.approx(0.5)
    assert batch[0].chi == 1
    grid = waterfill_grid([1.0, 0.0], 0.5, math.inf, OracleConfig(grid_step=1e-3))
    assert grid == pytest.approx(0.5, abs=5e-3)


def test_s_opt_dominates(rng):
    inst = random_instance(4, 3, seed=6)
    unc = UncertaintySpec.uniform(inst, "s", 2, 0.1, 0.05)
    v = rng.normal(size=4)
    ctx = make_context(inst, unc, v)
    best, _ = bellman_s_opt(ctx)
    assert (best <= bellman_opt_nonrobust(inst, v) + 1e-12).all()
    for _ in range(100):
        assert (bellman_s_policy(ctx, random_policy(rng, 4, 3)) <= best + 1e-9).all()


@pytest.mark.parametrize("rect", ["sa", "s"])
@pytest.mark.parametrize("p", [1, 2, math.inf, 3])
def test_radius_monotonicity(rect, p, rng):
    inst = random_instance(4, 3, seed=8)
    v = rng.normal(size=4)
    lo = UncertaintySpec.uniform(inst, rect, p, 0.05, 0.05)
    alpha = lo.alpha + rng.random(lo.alpha.shape) * 0.1
    beta = lo.beta + rng.random(lo.beta.shape) * 0.1
    hi = lo.with_radii(alpha, beta)
    a, _ = bellman_opt(make_context(inst, lo, v))
    b, _ = bellman_opt(make_context(inst, hi, v))
    assert (b <= a + 1e-12).all()


@pytest.mark.parametrize("rect", ["sa", "s"])
def test_optimistic_sandwich(rect, rng):
    inst = random_instance(4, 3, seed=10)
    unc = UncertaintySpec.uniform(inst, rect, 2, 0.1, 0.1)
    for _ in range(20):
        v = rng.normal(size=4)
        ctx = make_context(inst, unc, v)
        pess, _ = bellman_opt(ctx)
        nr = bellman_opt_nonrobust(inst, v)
        opt = bellman_optimistic(ctx)
        assert (pess <= nr + 1e-12).all() and (nr <= opt + 1e-12).all()


def test_optimistic_reductions(rng, small_inst):
    v = rng.normal(size=3)
    nr = bellman_opt_nonrobust(small_inst, v)
    zero_sa = UncertaintySpec.uniform(small_inst, "sa", 2, 0.0, 0.0)
    zero_s = UncertaintySpec.uniform(small_inst, "s", 2, 0.0, 0.0)
    assert np.allclose(bellman_optimistic_sa(make_context(small_inst, zero_sa, v)), nr)
    assert np.allclose(bellman_optimistic_s(make_context(small_inst, zero_s, v)), nr)
    bonus = UncertaintySpec.uniform(small_inst, "sa", 2, 0.25, 0.0)
    assert np.allclose(bellman_optimistic_sa(make_context(small_inst, bonus, v)), nr + 0.25)


def test_optimistic_s_beats_every_policy(rng):
    inst = random_instance(3, 3, seed=12)
    unc = UncertaintySpec.uniform(inst, "s", 2, 0.1, 0.1)
    v = rng.normal(size=3)
    ctx = make_context(inst, unc, v)
    Q = inst.R0 + inst.gamma * inst.P0 @ v
    top = bellman_optimistic_s(ctx)
    for _ in range(100):
        pi = random_policy(rng, 3, 3)
        bonus = np.einsum("sa,sa->s", pi, Q) + ctx.sigma * unc.q.norm(pi, axis=1)
        assert (bonus <= top + 1e-12).all()


def test_rectangularity_mismatch(small_inst):
    sa = make_context(small_inst, UncertaintySpec.uniform(small_inst, "sa", 2, 0.1, 0.1), np.zeros(3))
    s = make_context(small_inst, UncertaintySpec.uniform(small_inst, "s", 2, 0.1, 0.1), np.zeros(3))
    pi = np.full((3, 2), 0.5)
    with pytest.raises(RectangularityMismatch):
        bellman_s_opt(sa)
    with pytest.raises(RectangularityMismatch):
        bellman_s_policy(sa, pi)
    with pytest.raises(RectangularityMismatch):
        bellman_sa_opt(s)
    with pytest.raises(RectangularityMismatch):
        bellman_sa_policy(s, pi)
    with pytest.raises(RectangularityMismatch):
        bellman_optimistic_sa(s)
    with pytest.raises(RectangularityMismatch):
        bellman_optimistic_s(sa)


def test_policy_dispatch(rng, small_inst):
    v = rng.normal(size=3)
    pi = random_policy(rng, 3, 2)
    nr = UncertaintySpec.nonrobust(3, 2)
    assert np.allclose(bellman_policy(make_context(small_inst, nr, v), pi),
                       bellman_policy_nonrobust(small_inst, pi, v))
    assert bellman_opt(make_context(small_inst, nr, v))[1] is None


def test_forbidden_mask_only_sees_allowed_states(rng):
    P0 = np.zeros((4, 2, 4))
    P0[:, :, :2] = 0.5
    P0[3, 1] = [0.25, 0.25, 0.25, 0.25]
    inst = MdpInstance(P0, rng.random((4, 2)), 0.9)
    for rect in ("sa", "s"):
        unc = UncertaintySpec.uniform(inst, rect, 2, 0.1, 0.1, forbid_zeros=True)
        v = rng.normal(size=4)
        w = v.copy()
        w[2:] += 5.0  # only forbidden next states change for most pairs
        kv = make_context(inst, unc, v).kappa
        kw = make_context(inst, unc, w).kappa
        if rect == "sa":
            assert np.allclose(kv[:3], kw[:3]) and np.allclose(kv[3, 0], kw[3, 0])
            assert not np.isclose(kv[3, 1], kw[3, 1])
        else:
            assert np.allclose(kv[:3], kw[:3]) and not np.isclose(kv[3], kw[3])


def test_forbidden_mask_soundness(rng):
    P0 = np.zeros((3, 2, 3))
    P0[:, :, :2] = [0.6, 0.4]
    P0[2] = 1 / 3
    inst = MdpInstance(P0, rng.random((3, 2)), 0.9)
    for rect in ("sa", "s"):
        unc = UncertaintySpec.uniform(inst, rect, 2, 0.05, 0.1, forbid_zeros=True)
        pi = random_policy(rng, 3, 2)
        v = rng.normal(size=3) * 3
        closed = bellman_policy(make_context(inst, unc, v), pi)
        for s in range(3):
            sampled = inner_min_sampled(inst, unc, pi, v, s, OracleConfig(noise_samples=20_000))
            assert closed[s] <= sampled + 1e-9
            assert sampled - closed[s] <= 1e-2


def test_workers_give_identical_results(rng):
    inst = random_instance(40, 5, seed=3)
    unc = UncertaintySpec.uniform(inst, "s", 3, 0.1, 0.1)
    ctx = make_context(inst, unc, rng.normal(size=40))
    one, b1 = bellman_s_opt(ctx, workers=1)
    four, b4 = bellman_s_opt(ctx, workers=4)
    assert np.array_equal(one, four)
    assert np.array_equal(b1.chi, b4.chi)
    assert np.array_equal(b1.weights, b4.weights)
