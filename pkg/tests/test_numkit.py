import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import trapezoid

from fraudrla.numkit import (
    LAYER_NORM_EPS,
    AdamState,
    MlpParams,
    NotPositiveDefiniteError,
    adam_step,
    cholesky,
    make_rng,
    mean_and_covariance,
    mlp_forward,
    mlp_grad,
    mlp_init,
    mvn_log_pdf,
    mvn_sample,
    percentile,
)


def random_spd(n, g, eps=1e-3):
    m = g.standard_normal((n, n))
    return m @ m.T + eps * np.eye(n)


# -- cholesky ----------------------------------------------------------------

def test_cholesky_identity():
    np.testing.assert_array_equal(cholesky(np.eye(3)), np.eye(3))


def test_cholesky_hand_2x2():
    np.testing.assert_allclose(cholesky([[4, 2], [2, 3]]), [[2, 0], [1, np.sqrt(2)]], atol=1e-15)


@pytest.mark.parametrize("n", [1, 2, 5, 12, 20, 32])
def test_cholesky_reconstruction(n):
    g = np.random.default_rng(n)
    for _ in range(20):
        a = random_spd(n, g)
        L = cholesky(a)
        assert np.allclose(L, np.tril(L))
        err = np.abs(L @ L.T - a).max()
        assert err <= 1e-8 * np.abs(a).max()


def test_cholesky_rejects_bad_input():
    with pytest.raises(NotPositiveDefiniteError):
        cholesky([[1, 2], [2, 1]])
    with pytest.raises(ValueError):
        cholesky([[1, 0.5], [0, 1]])


# -- Gaussian machinery --------------------------------------------------------

def test_mvn_sample_zero_chol_returns_mean():
    mean = np.array([1.5, -2.0, 3.0])
    np.testing.assert_array_equal(mvn_sample(mean, np.zeros((3, 3)), make_rng(0)), mean)


def test_mvn_sample_moments():
    rng = make_rng(1)
    x = np.array([mvn_sample(np.zeros(3), np.eye(3), rng) for _ in range(10000)])
    assert np.abs(x.mean(axis=0)).max() < 0.05
    assert np.abs(np.cov(x.T) - np.eye(3)).max() < 0.1


def test_mvn_sample_deterministic():
    a = [mvn_sample(np.zeros(2), np.eye(2), make_rng(9)) for _ in range(2)]
    np.testing.assert_array_equal(a[0], a[1])


def test_mvn_log_pdf_closed_forms():
    assert mvn_log_pdf([0.0], [0.0], [[1.0]]) == pytest.approx(-0.9189385, abs=1e-7)
    got = mvn_log_pdf([0.0, 0.0], [0.0, 0.0], np.diag([1.0, 2.0]))
    assert got == pytest.approx(-np.log(2) - np.log(2 * np.pi), abs=1e-12)


def test_mvn_log_pdf_dense_inverse_oracle():
    g = np.random.default_rng(5)
    for _ in range(50):
        n = int(g.integers(1, 7))
        cov = random_spd(n, g, eps=0.1)
        mean, x = g.standard_normal(n), g.standard_normal(n)
        d = x - mean
        oracle = -0.5 * (n * np.log(2 * np.pi) + np.log(np.linalg.det(cov)) + d @ np.linalg.inv(cov) @ d)
        assert mvn_log_pdf(x, mean, cholesky(cov)) == pytest.approx(oracle, abs=1e-9)


def test_mvn_log_pdf_integrates_to_one():
    sigma = 1.7
    grid = np.linspace(-8 * sigma, 8 * sigma, 4001)
    dens = np.exp([mvn_log_pdf([v], [0.0], [[sigma]]) for v in grid])
    assert trapezoid(dens, grid) == pytest.approx(1.0, abs=1e-3)


# -- percentile / covariance ---------------------------------------------------

def test_percentile_examples():
    assert percentile([1, 2, 3, 4, 5], 0.5) == 3
    assert percentile(np.arange(100), 0.05) == pytest.approx(4.95, abs=1e-12)


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50), st.integers(0, 1000))
def test_percentile_bounds_and_permutation(values, seed):
    v = np.array(values)
    assert percentile(v, 0.0) == v.min()
    assert percentile(v, 1.0) == v.max()
    shuffled = np.random.default_rng(seed).permutation(v)
    ps = np.linspace(0, 1, 11)
    a = [percentile(v, p) for p in ps]
    assert a == [percentile(shuffled, p) for p in ps]
    assert all(x <= y + 1e-9 for x, y in zip(a, a[1:]))


def test_mean_and_covariance_examples():
    m, c = mean_and_covariance([[0, 0], [2, 2]])
    np.testing.assert_array_equal(m, [1, 1])
    np.testing.assert_array_equal(c, [[2, 2], [2, 2]])
    _, c = mean_and_covariance(np.tile([3.0, -1.0], (5, 1)))
    np.testing.assert_array_equal(c, np.zeros((2, 2)))


def test_mean_and_covariance_two_pass_oracle():
    x = np.random.default_rng(2).standard_normal((200, 4)) * [1, 10, 0.1, 3]
    m, c = mean_and_covariance(x)
    mu = x.sum(axis=0) / len(x)
    d = x - mu
    oracle = sum(np.outer(r, r) for r in d) / (len(x) - 1)
    np.testing.assert_allclose(m, mu, atol=1e-10)
    np.testing.assert_allclose(c, oracle, atol=1e-10)


# -- MLP -----------------------------------------------------------------------

def test_mlp_zero_weights_zero_output():
    p = mlp_init([3, 4, 2], make_rng(0))
    for a in p.arrays():
        a[...] = 0
    out, _ = mlp_forward(p, np.array([1.0, -2.0, 3.0]))
    np.testing.assert_array_equal(out, 0)


def test_mlp_identity_layer():
    p = MlpParams([np.eye(3)], [np.zeros(3)], ["linear"])
    x = np.array([0.5, -1.0, 2.0])
    np.testing.assert_array_equal(mlp_forward(p, x)[0], x)


def test_layer_norm_constant_input_is_zero():
    p = MlpParams([np.eye(4)], [np.zeros(4)], ["linear"], layer_norm=True)
    out, cache = mlp_forward(p, np.full(4, 3.3))
    np.testing.assert_allclose(cache.ln_xhat, 0, atol=1e-12)
    np.testing.assert_allclose(out, 0, atol=1e-12)


def _fd_check(p, x, seed):
    g = np.random.default_rng(seed)
    gout = g.standard_normal(p.n_outputs if x.ndim == 1 else (len(x), p.n_outputs))
    out, cache = mlp_forward(p, x)
    grads, gin = mlp_grad(p, cache, gout)
    h = 1e-5

    def f():
        return float(np.sum(mlp_forward(p, x)[0] * gout))

    worst = 0.0
    for arr, gr in zip(p.arrays(), grads):
        num = np.zeros_like(arr)
        for i in np.ndindex(arr.shape):
            old = arr[i]
            arr[i] = old + h
            up = f()
            arr[i] = old - h
            down = f()
            arr[i] = old
            num[i] = (up - down) / (2 * h)
        scale = max(np.abs(num).max(), np.abs(gr).max(), 1e-3)
        worst = max(worst, np.abs(num - gr).max() / scale)
    num_in = np.zeros_like(x)
    for i in np.ndindex(x.shape):
        old = x[i]
        x[i] = old + h
        up = f()
        x[i] = old - h
        down = f()
        x[i] = old
        num_in[i] = (up - down) / (2 * h)
    if x.size:
        worst = max(worst, np.abs(num_in - gin).max() / max(np.abs(num_in).max(), 1e-3))
    return worst


@pytest.mark.parametrize("sizes", [[3, 5, 2], [4, 8, 8, 3], [16, 32, 32, 8]])
@pytest.mark.parametrize("layer_norm", [False, True])
def test_gradient_check(sizes, layer_norm):
    g = make_rng(sum(sizes))
    p = mlp_init(sizes, g, layer_norm=layer_norm)
    for a in p.arrays():
        a += 0.1 * g.standard_normal(a.shape)
    x = g.standard_normal(sizes[0])
    assert _fd_check(p, x, 1) <= 1e-4
    xb = g.standard_normal((3, sizes[0]))
    assert _fd_check(p, xb, 2) <= 1e-4


def test_zero_output_gradient_gives_zero_grads():
    p = mlp_init([3, 4, 2], make_rng(0), layer_norm=True)
    out, cache = mlp_forward(p, np.array([1.0, 0.0, -1.0]))
    grads, gin = mlp_grad(p, cache, np.zeros(2))
    assert all(np.all(gr == 0) for gr in grads)
    assert np.all(gin == 0)


def test_linear_layer_weight_gradient_is_outer_product():
    p = MlpParams([np.ones((2, 3))], [np.zeros(2)], ["linear"])
    x = np.array([1.0, 2.0, 3.0])
    gout = np.array([0.5, -1.0])
    _, cache = mlp_forward(p, x)
    grads, _ = mlp_grad(p, cache, gout)
    np.testing.assert_array_equal(grads[0], np.outer(gout, x))
    np.testing.assert_array_equal(grads[1], gout)


def test_layer_norm_eps_value():
    assert LAYER_NORM_EPS == 1e-5


def test_mlp_params_round_trip():
    p = mlp_init([4, 6, 2], make_rng(3), layer_norm=True)
    q = MlpParams.from_dict(p.to_dict())
    for a, b in zip(p.arrays(), q.arrays()):
        np.testing.assert_array_equal(a, b)


def test_mlp_params_rejects_bad_chain():
    with pytest.raises(ValueError):
        MlpParams([np.zeros((3, 2)), np.zeros((2, 4))], [np.zeros(3), np.zeros(2)], ["tanh", "linear"])


# -- Adam ----------------------------------------------------------------------

def test_adam_zero_gradient_leaves_params():
    p = [np.array([1.0, 2.0])]
    s = AdamState.for_params(p, lr=0.1)
    adam_step(s, p, [np.zeros(2)])
    np.testing.assert_array_equal(p[0], [1.0, 2.0])


@given(st.floats(1e-3, 1e3), st.sampled_from([1e-3, 1e-2, 0.1]))
def test_adam_first_step_magnitude_is_lr(g, lr):
    p = [np.array([0.0])]
    s = AdamState.for_params(p, lr=lr)
    adam_step(s, p, [np.array([g])])
    # bias-corrected m/sqrt(v) = g/|g| up to eps
    assert p[0][0] == pytest.approx(-lr, rel=1e-5)


def test_adam_deterministic_trajectories():
    def run():
        p = mlp_init([3, 4, 1], make_rng(0))
        s = AdamState.for_params(p.arrays(), 1e-2)
        g = make_rng(1)
        for _ in range(20):
            _, cache = mlp_forward(p, g.standard_normal(3))
            grads, _ = mlp_grad(p, cache, np.ones(1))
            adam_step(s, p.arrays(), grads)
        return p.arrays()
    for a, b in zip(run(), run()):
        np.testing.assert_array_equal(a, b)


def test_make_rng_is_pcg64():
    assert make_rng(0).bit_generator.__class__.__name__ == "PCG64"
    np.testing.assert_array_equal(make_rng(7).random(5), make_rng(7).random(5))
