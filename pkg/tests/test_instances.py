import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.sparse.linalg import aslinearoperator

from proxrate import (CompositeProblem, EstimationError, FormatError, L1Norm, ParameterError,
                      PartialReferenceWarning, SquaredDistance, ZeroFunction)
from proxrate.instances import (ConvolutionOperator, dumps_instance, encode_pgm, gaussian_kernel,
                                gen_deblur, gen_random_lasso, lipschitz_estimate, load_instance,
                                load_pgm, loads_instance, parse_pgm, save_instance, save_pgm,
                                solve_reference, synthetic_image)
from proxrate.instances.storage import MAGIC
from proxrate.rng import CounterStream


# -- random streams ----------------------------------------------------------------

def test_stream_words_are_philox_raw_output():
    raw = np.random.Philox(key=np.array([42, 0], dtype=np.uint64)).random_raw(8)
    np.testing.assert_array_equal(CounterStream(42).words(8), raw)


def test_stream_transforms_match_documented_formulas():
    words = CounterStream(7).words(4)
    u = (words >> np.uint64(11)).astype(np.float64) * 2.0 ** -53
    np.testing.assert_array_equal(CounterStream(7).uniform(4), u)
    rad = np.sqrt(-2.0 * np.log1p(-u[0::2]))
    expected = np.empty(4)
    expected[0::2] = rad * np.cos(2 * np.pi * u[1::2])
    expected[1::2] = rad * np.sin(2 * np.pi * u[1::2])
    np.testing.assert_allclose(CounterStream(7).normal(4), expected, rtol=1e-15, atol=1e-15)


def test_stream_moments():
    z = CounterStream(3).normal(200_000)
    assert abs(z.mean()) < 0.01 and abs(z.std() - 1) < 0.01
    u = CounterStream(3).uniform(200_000)
    assert u.min() >= 0 and u.max() < 1 and abs(u.mean() - 0.5) < 0.005


@given(st.integers(1, 60), st.data())
def test_sample_without_replacement(n, data):
    k = data.draw(st.integers(1, n))
    out = CounterStream(data.draw(st.integers(0, 1000))).sample_without_replacement(n, k)
    assert len(set(out.tolist())) == k and out.min() >= 0 and out.max() < n


# -- Lasso ----------------------------------------------------------------------------

def test_lasso_determinism():
    a = gen_random_lasso(50, 100, 5, 0.01, 0.1, seed=0)
    b = gen_random_lasso(50, 100, 5, 0.01, 0.1, seed=0)
    assert np.array_equal(a.A, b.A) and np.array_equal(a.b, b.b) and a.L == b.L
    c = gen_random_lasso(50, 100, 5, 0.01, 0.1, seed=1)
    assert not np.array_equal(a.A, c.A)


def test_lasso_structure():
    inst = gen_random_lasso(50, 100, 5, 0.01, 0.1, seed=0)
    assert inst.shape == (50, 100)
    assert np.count_nonzero(inst.planted) == 5
    assert set(np.abs(inst.planted[inst.planted != 0])) == {1.0}
    # rows scaled by 1/sqrt(m): column norms concentrate near 1
    assert abs(np.mean(np.sum(inst.A ** 2, axis=0)) - 1) < 0.1
    lam_max = np.linalg.eigvalsh(inst.A.T @ inst.A)[-1]
    assert lam_max <= inst.L <= lam_max * (1 + 1e-9)


def test_lasso_noiseless_recovery():
    inst = gen_random_lasso(60, 30, 4, 0.0, 1e-8, seed=5)
    ref = solve_reference(inst.problem, 1e-10)
    assert np.linalg.norm(ref.x_star - inst.planted) <= 1e-3


@pytest.mark.parametrize("args", [(0, 5, 1, 0.1, 0.1), (5, 0, 1, 0.1, 0.1), (5, 5, 0, 0.1, 0.1),
                                  (5, 5, 6, 0.1, 0.1), (5, 5, 2, -1.0, 0.1), (5, 5, 2, 0.1, 0.0)])
def test_lasso_invalid(args):
    with pytest.raises(ParameterError):
        gen_random_lasso(*args, seed=0)


# -- Lipschitz ------------------------------------------------------------------------

def test_lipschitz_identity():
    tol = 1e-12
    assert lipschitz_estimate(np.eye(4), 4, tol=tol) == pytest.approx(1 + 10 * tol, rel=1e-15)


@pytest.mark.parametrize("tol", [1e-6, 1e-12])
def test_lipschitz_diag(tol):
    L = lipschitz_estimate(np.diag([1.0, 2.0]), 2, tol=tol)
    assert 4.0 <= L <= 4.0 * (1 + 10 * tol)


@pytest.mark.parametrize("seed", range(10))
def test_lipschitz_upper_bound_on_random(seed):
    A = CounterStream(seed + 50).normal(40 * 60).reshape(40, 60)
    L = lipschitz_estimate(aslinearoperator(A), 60, seed=seed)
    top = np.linalg.eigvalsh(A.T @ A)[-1]
    assert top <= L <= top * (1 + 1e-9)


def test_lipschitz_errors():
    with pytest.raises(ParameterError):
        lipschitz_estimate(np.eye(3), 3, tol=0.0)
    with pytest.raises(ParameterError):
        lipschitz_estimate(np.zeros((3, 3)), 3)
    # nearly equal top eigenvalues converge too slowly for three iterations
    with pytest.raises(EstimationError) as info:
        lipschitz_estimate(np.diag([1.0, 0.999, 0.5]), 3, tol=1e-14, max_iters=3)
    assert 0 < info.value.estimate <= 1.0


# -- reference ---------------------------------------------------------------------------

def test_reference_lasso_1d():
    p = CompositeProblem(SquaredDistance([1.0]), L1Norm(0.3), 1)
    ref = solve_reference(p, 1e-10)
    assert ref.x_star[0] == pytest.approx(0.7, abs=1e-10)
    assert ref.phi_star == pytest.approx(0.255, abs=1e-12)
    assert ref.certified_eps <= 1e-10


def test_reference_g_zero_one_step():
    c = np.array([1.0, -2.0, 3.5])
    p = CompositeProblem(SquaredDistance(c), ZeroFunction(), 3)
    ref = solve_reference(p, 1e-10, step_frac=1.0)
    np.testing.assert_array_equal(ref.x_star, c)
    assert ref.certified_eps == 0.0


@pytest.mark.parametrize("seed", range(10))
def test_reference_certified(seed):
    inst = gen_random_lasso(50, 100, 5, 0.01, 0.1, seed)
    assert solve_reference(inst.problem, 1e-10).certified_eps <= 1e-10


def test_reference_budget_exhausted_warns():
    inst = gen_random_lasso(50, 100, 5, 0.01, 0.1, 0)
    with pytest.warns(PartialReferenceWarning):
        ref = solve_reference(inst.problem, 1e-12, max_iters=5)
    assert ref.certified_eps > 1e-12


def test_reference_rejects_bad_target(lasso_1d):
    with pytest.raises(ParameterError):
        solve_reference(lasso_1d, 0.0)


# -- deblurring ---------------------------------------------------------------------------

def test_gaussian_kernel():
    k = gaussian_kernel(2.0)
    assert k.shape == (17, 17)
    assert k.sum() == pytest.approx(1.0, abs=1e-15)
    np.testing.assert_array_equal(k, k.T)
    np.testing.assert_array_equal(k, k[::-1, ::-1])
    assert gaussian_kernel(0.2).shape == (1, 1)
    with pytest.raises(ParameterError):
        gaussian_kernel(0.0)


def test_identity_kernel_limit():
    clean = synthetic_image(16)
    inst = gen_deblur(clean, 0.1, 0.01, 1e-6, seed=4)
    noise = 0.01 * CounterStream(4).normal(clean.size)
    np.testing.assert_allclose(inst.observed, clean.reshape(-1) + noise, rtol=0, atol=1e-15)


def test_adjoint_on_random_pairs():
    op = ConvolutionOperator(gaussian_kernel(1.5), (24, 20))
    stream = CounterStream(6)
    for _ in range(100):
        u, v = stream.normal(480), stream.normal(480)
        assert abs(op.matvec(u) @ v - u @ op.rmatvec(v)) <= 1e-12


def test_nonsymmetric_kernel_adjoint():
    op = ConvolutionOperator(np.arange(9.0).reshape(3, 3), (5, 6))
    B = op.to_dense()
    y = CounterStream(1).normal(30)
    np.testing.assert_allclose(op.rmatvec(y), B.T @ y, rtol=1e-13, atol=1e-13)


def test_convolution_reflexive_boundary_by_hand():
    img = np.arange(9.0).reshape(3, 3)
    op = ConvolutionOperator(np.full((3, 3), 1 / 9), (3, 3))
    out = op.matvec(img.reshape(-1)).reshape(3, 3)
    # symmetric padding duplicates the edge: the corner window is rows (0,0,1) x cols (0,0,1)
    corner = np.mean([img[i, j] for i in (0, 0, 1) for j in (0, 0, 1)])
    assert out[0, 0] == pytest.approx(corner, abs=1e-15)
    assert out[1, 1] == pytest.approx(img.mean(), abs=1e-15)


def test_deblur_dense_gradient_agrees():
    inst = gen_deblur(synthetic_image(20), 1.0, 1e-3, 1e-6, seed=2)
    B = inst.blur.to_dense()
    np.testing.assert_allclose(B, B.T, rtol=0, atol=1e-15)
    x = CounterStream(3).uniform(400)
    dense = B.T @ (B @ x - inst.observed)
    free = inst.problem.smooth.gradient(x)
    assert np.linalg.norm(free - dense) <= 1e-12 * np.linalg.norm(dense)
    top = np.linalg.eigvalsh(B.T @ B)[-1]
    assert top <= inst.L <= top * (1 + 1e-8)


def test_deblur_invalid():
    with pytest.raises(ParameterError):
        gen_deblur(synthetic_image(8), 0.0, 0.0, 1e-6, 0)
    with pytest.raises(ParameterError):
        gen_deblur(synthetic_image(8) + 1.0, 1.0, 0.0, 1e-6, 0)


def test_synthetic_image_range():
    img = synthetic_image(64)
    assert img.shape == (64, 64) and img.min() >= 0 and img.max() <= 1
    assert len(np.unique(img)) >= 4


# -- PGM ------------------------------------------------------------------------------

pixels = arrays(np.float64, st.tuples(st.integers(1, 9), st.integers(1, 9)),
                elements=st.floats(0, 1))


@given(pixels, st.booleans())
def test_pgm_round_trip(img, binary):
    out = parse_pgm(encode_pgm(img, binary))
    assert out.shape == img.shape
    assert np.max(np.abs(out - img)) <= 1 / 255


def test_pgm_single_black_pixel(tmp_path):
    path = tmp_path / "one.pgm"
    save_pgm(np.zeros((1, 1)), path)
    assert load_pgm(path)[0, 0] == 0.0


def test_pgm_p2_equals_p5():
    img = synthetic_image(12)
    np.testing.assert_array_equal(parse_pgm(encode_pgm(img, True)), parse_pgm(encode_pgm(img, False)))


def test_pgm_rounding_half_away_from_zero():
    # 0.5 / 255 -> 0.5 -> 1 ; 1.5 / 255 -> 2
    data = encode_pgm(np.array([[0.5 / 255, 1.5 / 255, 2.4 / 255]]), binary=True)
    assert list(data[-3:]) == [1, 2, 2]


def test_pgm_16bit_and_comments():
    header = b"P5\n# a comment\n2 1\n65535\n"
    data = header + (0).to_bytes(2, "big") + (65535).to_bytes(2, "big")
    np.testing.assert_array_equal(parse_pgm(data), [[0.0, 1.0]])
    ascii_ = b"P2 # dims follow\n3 1 4\n0 2 4\n"
    np.testing.assert_array_equal(parse_pgm(ascii_), [[0.0, 0.5, 1.0]])


@pytest.mark.parametrize("data, offset", [
    (b"P6\n1 1\n255\n\x00", 0),
    (b"P5\n2 x\n255\n\x00\x00", 5),
    (b"P5\n2 2\n255\n\x00\x00", 13),
    (b"P2\n2 1\n3\n1 9\n", 11),
    (b"P5\n1 1\n70000\n\x00", 7),
])
def test_pgm_format_errors(data, offset):
    with pytest.raises(FormatError) as info:
        parse_pgm(data)
    assert info.value.offset == offset
    assert f"byte offset {offset}" in str(info.value)


# -- instance container ----------------------------------------------------------------

def test_lasso_container_round_trip(tmp_path, canonical):
    path = tmp_path / "inst.bin"
    save_instance(canonical, path)
    assert path.read_bytes().startswith(MAGIC + b"\n")
    back = load_instance(path)
    assert np.array_equal(back.A, canonical.A) and np.array_equal(back.b, canonical.b)
    assert back.lam == canonical.lam and back.L == canonical.L
    assert np.array_equal(back.planted, canonical.planted)
    assert np.array_equal(back.reference.x_star, canonical.reference.x_star)
    assert back.reference.phi_star == canonical.reference.phi_star
    assert back.reference.certified_eps == canonical.reference.certified_eps
    assert dumps_instance(back) == dumps_instance(canonical)


def test_deblur_container_round_trip():
    inst = gen_deblur(synthetic_image(10), 1.0, 1e-3, 1e-6, seed=1)
    back = loads_instance(dumps_instance(inst))
    assert back.image_shape == (10, 10)
    assert np.array_equal(back.observed, inst.observed)
    assert np.array_equal(back.kernel, inst.kernel) and back.L == inst.L
    assert np.array_equal(back.clean, inst.clean)


def test_lasso_without_reference_round_trip():
    inst = gen_random_lasso(4, 6, 2, 0.1, 0.1, seed=2)
    back = loads_instance(dumps_instance(inst))
    assert back.reference is None
    assert np.array_equal(back.A, inst.A)


@pytest.mark.parametrize("mutate", [
    lambda d: b"PROXRATE-INST-v2" + d[16:],
    lambda d: d[:-8],
    lambda d: d + b"\x00",
    lambda d: d.replace(b"kind = lasso", b"kind = other"),
    lambda d: d.replace(b"array A = 4 6", b"array A = 4 x"),
    lambda d: d.replace(b"\nend\n", b"\nnope\n"),
])
def test_container_rejects_corruption(mutate):
    data = dumps_instance(gen_random_lasso(4, 6, 2, 0.1, 0.1, seed=2))
    with pytest.raises(FormatError):
        loads_instance(mutate(data))
