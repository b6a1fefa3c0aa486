import numpy as np
import pytest

from slrl.gat import (
    GatParams,
    attention_coeffs,
    gat_backward,
    gat_forward,
    init_gat,
    init_gat_stack,
    stack_backward,
    stack_forward,
)
from slrl.graph import build_gaussian
from slrl.numerics import finite_diff_grad, make_rng, relative_error

from oracles import attention_oracle, gat_forward_oracle


def csr(neighborhoods):
    indptr = np.zeros(len(neighborhoods) + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([len(v) for v in neighborhoods])
    return indptr, np.concatenate([np.asarray(v, dtype=np.int64) for v in neighborhoods])


def neighborhood_lists(indptr, indices):
    return [indices[indptr[i] : indptr[i + 1]] for i in range(len(indptr) - 1)]


def random_params(seed, f_in, f_prime, heads, **kw):
    return init_gat(f_in, f_prime, heads, make_rng(seed), **kw)


def random_graph(seed, n, f, k=3):
    h = make_rng(seed).normal(size=(n, f))
    return h, build_gaussian(h, k=k, sigma=1.0)


def test_singleton_neighborhood_gives_unit_alpha():
    params = random_params(0, 3, 4, heads=1)
    h = make_rng(1).normal(size=(2, 3))
    nbhd = csr([[0], [1]])  # only the self loop
    alphas = attention_coeffs(params, 0, h, nbhd, include_self=False)
    assert alphas[0].shape == (1,) and alphas[0][0] == pytest.approx(1.0)


def test_zero_weights_give_uniform_attention():
    params = GatParams(w=[np.zeros((4, 3))], a=[np.ones(8)])
    h, g = random_graph(2, n=6, f=3)
    alphas = attention_coeffs(params, 0, h, g)
    indptr, indices = g.neighborhoods()
    for i, row in enumerate(alphas):
        size = indptr[i + 1] - indptr[i]
        assert np.max(np.abs(row - 1.0 / size)) < 1e-12


def test_attention_matches_eq_oracle():
    for seed in range(20):
        params = random_params(seed, 3, 3, heads=1)
        h, g = random_graph(seed + 100, n=4, f=3, k=2)
        indptr, indices = g.neighborhoods()
        got = attention_coeffs(params, 0, h, g)
        want = attention_oracle(
            params.w[0], params.a[0], params.leaky_slope, h, neighborhood_lists(indptr, indices)
        )
        for r_got, r_want in zip(got, want):
            assert np.max(np.abs(r_got - r_want)) < 1e-9


def test_attention_rows_stochastic():
    params = random_params(3, 5, 4, heads=2)
    h, g = random_graph(4, n=10, f=5)
    for head in range(2):
        for row in attention_coeffs(params, head, h, g):
            assert row.sum() == pytest.approx(1.0, abs=1e-9)
            assert np.all(row > 0)


def test_forward_single_forced_neighbor():
    # one neighbor, self excluded: output row is act(W h_j)
    params = random_params(5, 3, 4, heads=1)
    h = make_rng(6).normal(size=(2, 3))
    nbhd = csr([[1], [0]])
    out = gat_forward(params, h, nbhd, include_self=False)
    expected = 1.0 / (1.0 + np.exp(-(params.w[0] @ h[1])))
    assert np.max(np.abs(out[0] - expected)) < 1e-12


def test_forward_zero_weights_sigmoid_half():
    params = GatParams(w=[np.zeros((4, 3))] * 2, a=[np.zeros(8)] * 2)
    h, g = random_graph(7, n=5, f=3)
    out = gat_forward(params, h, g)
    assert np.max(np.abs(out - 0.5)) < 1e-12


@pytest.mark.parametrize("combine", ["average", "concat"])
@pytest.mark.parametrize("activation", ["sigmoid", "elu"])
def test_forward_matches_transcription_oracle(combine, activation):
    for seed in range(20):
        params = random_params(seed, 4, 3, heads=2, combine=combine, activation=activation)
        h, g = random_graph(seed + 50, n=6, f=4, k=2)
        indptr, indices = g.neighborhoods()
        got = gat_forward(params, h, g)
        want = gat_forward_oracle(
            params.w,
            params.a,
            params.leaky_slope,
            activation,
            combine,
            h,
            neighborhood_lists(indptr, indices),
        )
        assert got.shape == want.shape
        assert np.max(np.abs(got - want)) < 1e-9


def test_sigmoid_output_range():
    params = random_params(8, 4, 4, heads=3)
    h, g = random_graph(9, n=8, f=4)
    out = gat_forward(params, h, g)
    assert np.all(out > 0.0) and np.all(out < 1.0)


def test_locality_of_forward():
    params = random_params(10, 3, 3, heads=2)
    h, g = random_graph(11, n=9, f=3, k=2)
    out = gat_forward(params, h, g)
    target = 0
    neighborhood = set(g.nbrs[target].tolist()) | {target}
    outsider = next(i for i in range(g.n) if i not in neighborhood)
    h2 = h.copy()
    h2[outsider] += 1.7
    out2 = gat_forward(params, h2, g)
    assert np.array_equal(out[target], out2[target])


def test_permutation_equivariance():
    params = random_params(12, 3, 4, heads=2)
    h, g = random_graph(13, n=7, f=3, k=2)
    out = gat_forward(params, h, g)
    perm = make_rng(14).permutation(g.n)
    inv = np.argsort(perm)
    h_perm = h[perm]
    g_perm = build_gaussian(h_perm, k=2, sigma=1.0)
    out_perm = gat_forward(params, h_perm, g_perm)
    assert np.max(np.abs(out_perm - out[perm])) < 1e-9


def test_backward_zero_upstream():
    params = random_params(15, 4, 3, heads=2)
    h, g = random_graph(16, n=6, f=4)
    grad_w, grad_a, grad_h = gat_backward(params, h, g, np.zeros((6, 3)))
    assert all(np.max(np.abs(gw)) == 0 for gw in grad_w)
    assert all(np.max(np.abs(ga)) == 0 for ga in grad_a)
    assert np.max(np.abs(grad_h)) == 0


@pytest.mark.parametrize("combine", ["average", "concat"])
def test_backward_matches_finite_differences(combine):
    params = random_params(17, 3, 3, heads=2, combine=combine)
    h, g = random_graph(18, n=5, f=3, k=2)
    f_out = params.f_out
    upstream = make_rng(19).normal(size=(5, f_out))

    grad_w, grad_a, grad_h = gat_backward(params, h, g, upstream)

    def scalar_of_h(vec):
        return float(np.sum(upstream * gat_forward(params, vec.reshape(h.shape), g)))

    assert relative_error(grad_h.ravel(), finite_diff_grad(scalar_of_h, h.ravel(), 1e-5)) < 1e-4

    for k in range(params.heads):
        def scalar_of_w(vec, k=k):
            w = [m.copy() for m in params.w]
            w[k] = vec.reshape(params.w[k].shape)
            p = GatParams(w=w, a=params.a, activation=params.activation, combine=combine)
            return float(np.sum(upstream * gat_forward(p, h, g)))

        num = finite_diff_grad(scalar_of_w, params.w[k].ravel(), 1e-5)
        assert relative_error(grad_w[k].ravel(), num) < 1e-4

        def scalar_of_a(vec, k=k):
            a = [v.copy() for v in params.a]
            a[k] = vec
            p = GatParams(w=params.w, a=a, activation=params.activation, combine=combine)
            return float(np.sum(upstream * gat_forward(p, h, g)))

        num_a = finite_diff_grad(scalar_of_a, params.a[k], 1e-5)
        assert relative_error(grad_a[k], num_a) < 1e-4


def test_backward_locality():
    params = random_params(20, 3, 3, heads=1)
    h, g = random_graph(21, n=9, f=3, k=2)
    target = 0
    neighborhood = set(g.nbrs[target].tolist()) | {target}
    outsider = next(i for i in range(g.n) if i not in neighborhood)
    upstream = np.zeros((g.n, 3))
    upstream[target] = 1.0
    _, _, grad_h = gat_backward(params, h, g, upstream)
    assert np.max(np.abs(grad_h[outsider])) == 0.0


def test_stack_identity_when_empty():
    h = make_rng(22).normal(size=(4, 3))
    out, caches = stack_forward([], h, None)
    assert np.array_equal(out, h) and caches == []
    grads, grad_h = stack_backward([], [], np.ones_like(h))
    assert grads == [] and np.array_equal(grad_h, np.ones_like(h))


def test_stack_two_layers_shapes():
    stack = init_gat_stack(2, 4, 3, heads=2, seed=0, combine="concat")
    h, g = random_graph(23, n=6, f=4)
    out, caches = stack_forward(stack, h, g)
    assert out.shape == (6, 6)  # concat: K * F' = 2 * 3
    assert stack[1].f_in == 6
    grads, grad_h = stack_backward(stack, caches, np.ones_like(out))
    assert grad_h.shape == h.shape
    assert len(grads) == 2


def test_alpha_row_sums_exposed_by_cache():
    stack = init_gat_stack(1, 3, 3, heads=2, seed=1)
    h, g = random_graph(24, n=7, f=3)
    _, caches = stack_forward(stack, h, g)
    sums = caches[0].alpha_row_sums()
    assert sums.shape == (2, 7)
    assert np.max(np.abs(sums - 1.0)) < 1e-9
