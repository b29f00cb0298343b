import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from reddiff import operators as ops
from reddiff.oracle import finite_diff_grad


def adjoint_gap(op, rng):
    x, u = rng.standard_normal(op.in_dim), rng.standard_normal(op.out_dim)
    lhs, rhs = op.apply(x) @ u, x @ op.vjp(x, u)
    return abs(lhs - rhs) / max(1.0, abs(lhs))


def test_inpainting_example():
    op = ops.make_inpainting_mask([1, 0, 1, 0])
    assert np.array_equal(op.apply([1.0, 2.0, 3.0, 4.0]), [1.0, 3.0])
    assert np.array_equal(op.vjp(None, [5.0, 6.0]), [5.0, 0.0, 6.0, 0.0])


def test_inpainting_identity_and_errors(rng):
    op = ops.make_inpainting_mask(np.ones(5, bool))
    x = rng.standard_normal(5)
    assert np.array_equal(op.apply(x), x)
    assert np.array_equal(op.vjp(x, x), x)
    with pytest.raises(ValueError):
        ops.make_inpainting_mask(np.zeros(4, bool))
    with pytest.raises(ValueError):
        op.apply(x[:3])


def test_downsample_example():
    op = ops.make_downsample_avg((2, 2), 2)
    assert np.array_equal(op.apply([1.0, 3.0, 5.0, 7.0]), [4.0])
    ident = ops.make_downsample_avg((3, 4), 1)
    x = np.arange(12.0)
    assert np.array_equal(ident.apply(x), x)
    with pytest.raises(ValueError):
        ops.make_downsample_avg((5, 4), 2)


def test_blur_identity_and_dc(rng):
    x = rng.standard_normal(64)
    assert np.allclose(ops.make_gaussian_blur((8, 8), 2.0, 1).apply(x), x, atol=1e-15)
    const = np.full(64, 0.37)
    assert np.allclose(ops.make_gaussian_blur((8, 8), 1.5, 5).apply(const), const, atol=1e-14)
    assert ops.gaussian_kernel(1.3, 7).sum() == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        ops.make_gaussian_blur((8, 8), 1.0, 4)


@pytest.mark.parametrize(
    "factory, tol",
    [
        (lambda r: ops.make_inpainting_mask(r.random(30) < 0.5), 1e-12),
        (lambda r: ops.make_downsample_avg((6, 8), 2), 1e-12),
        (lambda r: ops.make_downsample_avg((4, 4, 3), 2), 1e-12),
        (lambda r: ops.make_gaussian_blur((8, 8), 1.2, 5), 1e-10),
        (lambda r: ops.make_gaussian_blur((6, 9, 3), 0.8, 3), 1e-10),
        (lambda r: ops.make_dense_linear(r.standard_normal((7, 4))), 1e-12),
    ],
)
def test_adjoint(factory, tol):
    rng = np.random.default_rng(0)
    op = factory(rng)
    for _ in range(10):
        assert adjoint_gap(op, rng) <= tol


def test_matrix_matches_apply(rng):
    op = ops.make_gaussian_blur((5, 5), 1.0, 3)
    x = rng.standard_normal(25)
    assert np.allclose(op.matrix() @ x, op.apply(x), atol=1e-14)
    with pytest.raises(TypeError):
        ops.make_hdr_clip(3).matrix()


def test_hdr_values():
    op = ops.make_hdr_clip(2)
    assert np.allclose(op.apply([0.2, 0.9]), [0.4, 1.0])
    assert np.array_equal(op.derivative(np.array([0.2, 0.9])), [2.0, 0.0])
    assert np.array_equal(op.derivative(np.array([-0.2, -3.0])), [2.0, 0.0])


def test_hdr_vjp_finite_difference(rng):
    op = ops.make_hdr_clip(20)
    x = rng.uniform(-1, 1, 20)
    x = x[np.abs(np.abs(2 * x) - 1) > 1e-3][:10]  # stay away from the kinks
    op = ops.make_hdr_clip(x.size)
    u = rng.standard_normal(x.size)
    fd = finite_diff_grad(lambda z: u @ op.apply(z), x, 1e-6)
    assert np.allclose(op.vjp(x, u), fd, rtol=1e-6, atol=1e-8)


def test_dft_dc_and_sign():
    op = ops.make_dft_magnitude((6,), oversample=1)
    assert op.apply(np.full(6, -0.5))[0] == pytest.approx(3.0)
    rng = np.random.default_rng(3)
    x = rng.standard_normal(6)
    assert np.allclose(op.apply(x), op.apply(-x))
    with pytest.raises(ValueError):
        ops.make_dft_magnitude((6,), oversample=0)


@pytest.mark.parametrize("shape", [(10,), (4, 5)])
def test_dft_vjp_finite_difference(shape):
    rng = np.random.default_rng(5)
    op = ops.make_dft_magnitude(shape, 2)
    x = rng.standard_normal(op.in_dim)
    assert np.abs(op.transform(x)).min() > 1e-6
    fd = finite_diff_grad(lambda z: 0.5 * np.sum(op.apply(z) ** 2), x, 1e-6)
    got = op.vjp(x, op.apply(x))
    assert np.linalg.norm(got - fd) <= 1e-5 * np.linalg.norm(fd)


def test_dense_examples(rng):
    x = rng.standard_normal(3)
    ident = ops.make_dense_linear(np.eye(3))
    assert np.array_equal(ident.apply(x), x)
    assert ops.make_dense_linear([[1.0]]).initial_estimate(np.array([2.0])) == pytest.approx([2.0])
    with pytest.raises(ValueError):
        ops.make_dense_linear(np.eye(3)).apply(np.ones(2))


def test_sigma_v_floor():
    assert ops.make_dense_linear(np.eye(2), 0.0).effective_sigma_v == ops.SIGMA_V_FLOOR
    assert ops.make_dense_linear(np.eye(2), 0.2).effective_sigma_v == 0.2
    with pytest.raises(ValueError):
        ops.make_dense_linear(np.eye(2), -1.0)


def test_measurement_checks_length():
    with pytest.raises(ValueError):
        ops.Measurement(np.ones(3), ops.make_dense_linear(np.eye(2)))


def test_load_mask(tmp_path):
    (tmp_path / "m.txt").write_text("1 0 1\n0 1 1\n")
    mask = ops.load_mask(tmp_path / "m.txt")
    assert mask.shape == (2, 3) and mask.sum() == 4
    (tmp_path / "m.bin").write_bytes(bytes([1, 0, 0, 1]))
    assert np.array_equal(ops.load_mask(tmp_path / "m.bin"), [True, False, False, True])
    (tmp_path / "bad.txt").write_text("1 0\n1\n")
    with pytest.raises(ValueError):
        ops.load_mask(tmp_path / "bad.txt")


@settings(max_examples=40, deadline=None)
@given(
    x=arrays(np.float64, 16, elements=st.floats(-3, 3)),
    u=arrays(np.float64, 4, elements=st.floats(-3, 3)),
)
def test_downsample_adjoint_property(x, u):
    op = ops.make_downsample_avg((4, 4), 2)
    assert op.apply(x) @ u == pytest.approx(x @ op.vjp(x, u), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(x=arrays(np.float64, 8, elements=st.floats(-2, 2)))
def test_hdr_range_property(x):
    y = ops.make_hdr_clip(8).apply(x)
    assert np.all(np.abs(y) <= 1.0)
    assert set(np.unique(ops.make_hdr_clip(8).derivative(x))) <= {0.0, 2.0}
