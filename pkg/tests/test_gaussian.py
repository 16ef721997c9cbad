import numpy as np
import pytest

from conftest import random_spd
from nuvssm import GaussianInfo, GaussianMoment
from nuvssm.gaussian import (
    DualMarginal,
    Marginal,
    adder_node_backward,
    adder_node_forward,
    edge_marginal,
    equality_dual,
    equality_node,
    input_block_forward_info,
    input_block_marginal_forward,
    matmul_backward,
    matmul_dual,
    matmul_marginal,
    matmul_node,
    observation_block_dual_backward,
    observation_block_forward,
)


def random_pair(rng, n):
    """Random informative forward/backward message pair in moment form."""
    fwd = GaussianMoment(rng.standard_normal(n), random_spd(rng, n))
    bwd = GaussianMoment(rng.standard_normal(n), random_spd(rng, n))
    return fwd, bwd


def test_construction_rejects_asymmetric():
    with pytest.raises(ValueError):
        GaussianMoment([0.0, 0.0], [[1.0, 0.5], [0.1, 1.0]])


def test_construction_rejects_indefinite():
    with pytest.raises(ValueError):
        GaussianMoment([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]])


def test_degenerate_encodings():
    det = GaussianMoment([1.0], [[0.0]])
    with pytest.raises(ValueError):
        det.to_info()
    ni = GaussianInfo.non_informative(2)
    assert not ni.informative
    with pytest.raises(ValueError):
        ni.to_moment()


def test_round_trip_forms():
    rng = np.random.default_rng(1)
    mom = GaussianMoment(rng.standard_normal(3), random_spd(rng, 3))
    back = mom.to_info().to_moment()
    np.testing.assert_allclose(back.mean, mom.mean, atol=1e-12)
    np.testing.assert_allclose(back.cov, mom.cov, atol=1e-12)


def test_equality_node_sums_information():
    rng = np.random.default_rng(2)
    a = GaussianMoment(rng.standard_normal(2), random_spd(rng, 2)).to_info()
    b = GaussianMoment(rng.standard_normal(2), random_spd(rng, 2)).to_info()
    c = equality_node(a, b)
    np.testing.assert_allclose(c.xi, a.xi + b.xi)
    np.testing.assert_allclose(c.prec, a.prec + b.prec)


def test_equality_dual_sums():
    d1 = DualMarginal([1.0, 0.0], np.eye(2))
    d2 = DualMarginal([0.0, 2.0], 2 * np.eye(2))
    s = equality_dual(d1, d2)
    np.testing.assert_allclose(s.dxi, [1.0, 2.0])
    np.testing.assert_allclose(s.dprec, 3 * np.eye(2))


def test_adder_moments():
    x = GaussianMoment([1.0], [[2.0]])
    y = GaussianMoment([3.0], [[4.0]])
    z = adder_node_forward(x, y)
    assert z.mean[0] == 4.0 and z.cov[0, 0] == 6.0
    back = adder_node_backward(z, y)
    assert back.mean[0] == 1.0 and back.cov[0, 0] == 10.0


def test_matmul_all_parameterizations():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((2, 3))
    x = GaussianMoment(rng.standard_normal(3), random_spd(rng, 3))
    y = matmul_node(x, A)
    np.testing.assert_allclose(y.mean, A @ x.mean)
    np.testing.assert_allclose(y.cov, A @ x.cov @ A.T, atol=1e-12)
    yb = GaussianMoment(rng.standard_normal(2), random_spd(rng, 2)).to_info()
    xb = matmul_backward(yb, A)
    np.testing.assert_allclose(xb.xi, A.T @ yb.xi)
    np.testing.assert_allclose(xb.prec, A.T @ yb.prec @ A, atol=1e-12)
    d = DualMarginal(rng.standard_normal(2), random_spd(rng, 2))
    dx = matmul_dual(d, A)
    np.testing.assert_allclose(dx.dxi, A.T @ d.dxi)
    m = matmul_marginal(Marginal(x.mean, x.cov), A)
    np.testing.assert_allclose(m.mean, A @ x.mean)


def dense_marginal(fwd: GaussianMoment, bwd: GaussianMoment):
    """Oracle: product of two Gaussian densities via plain inversion."""
    Wf = np.linalg.inv(fwd.cov)
    Wb = np.linalg.inv(bwd.cov)
    cov = np.linalg.inv(Wf + Wb)
    mean = cov @ (Wf @ fwd.mean + Wb @ bwd.mean)
    dprec = np.linalg.inv(fwd.cov + bwd.cov)
    dxi = dprec @ (fwd.mean - bwd.mean)
    return mean, cov, dxi, dprec


def test_edge_marginal_all_form_combinations():
    rng = np.random.default_rng(4)
    for _ in range(50):
        n = int(rng.integers(1, 5))
        fwd, bwd = random_pair(rng, n)
        mean, cov, dxi, dprec = dense_marginal(fwd, bwd)
        combos = [
            (fwd, bwd),
            (fwd, bwd.to_info()),
            (fwd.to_info(), bwd),
            (fwd.to_info(), bwd.to_info()),
        ]
        for f, b in combos:
            mar, dual = edge_marginal(f, b)
            np.testing.assert_allclose(mar.mean, mean, rtol=1e-9, atol=1e-10)
            np.testing.assert_allclose(mar.cov, cov, rtol=1e-9, atol=1e-10)
            np.testing.assert_allclose(dual.dxi, dxi, rtol=1e-9, atol=1e-10)
            np.testing.assert_allclose(dual.dprec, dprec, rtol=1e-9, atol=1e-10)


def test_edge_marginal_identity_suite():
    # the full set of single-edge identities relating (m, V) and (dxi, dprec)
    rng = np.random.default_rng(5)
    for _ in range(100):
        n = int(rng.integers(1, 5))
        fwd, bwd = random_pair(rng, n)
        mar, dual = edge_marginal(fwd, bwd.to_info())
        Wb = bwd.to_info().prec
        xib = bwd.to_info().xi
        np.testing.assert_allclose(mar.mean, fwd.mean - fwd.cov @ dual.dxi, rtol=1e-9, atol=1e-11)
        np.testing.assert_allclose(mar.mean, bwd.mean + bwd.cov @ dual.dxi, rtol=1e-8, atol=1e-9)
        np.testing.assert_allclose(mar.cov, fwd.cov - fwd.cov @ dual.dprec @ fwd.cov,
                                   rtol=1e-9, atol=1e-11)
        np.testing.assert_allclose(dual.dxi, Wb @ mar.mean - xib, rtol=1e-8, atol=1e-9)
        np.testing.assert_allclose(dual.dprec, Wb - Wb @ mar.cov @ Wb, rtol=1e-8, atol=1e-9)
        Wf = fwd.to_info().prec
        np.testing.assert_allclose(dual.dprec, Wf @ mar.cov @ Wb, rtol=1e-8, atol=1e-9)


def test_edge_marginal_degenerate_cases():
    fwd = GaussianMoment([2.0], [[0.0]])  # deterministic
    bwd = GaussianInfo([5.0], [[1.0]])
    mar, dual = edge_marginal(fwd, bwd)
    assert mar.mean[0] == 2.0 and mar.cov[0, 0] == 0.0
    # dxi = W m - xi on the backward side
    np.testing.assert_allclose(dual.dxi, [-3.0])
    mar2, dual2 = edge_marginal(GaussianMoment([1.5], [[2.0]]), GaussianInfo.non_informative(1))
    assert mar2.mean[0] == 1.5 and dual2.dprec[0, 0] == 0.0
    with pytest.raises(ValueError):
        edge_marginal(GaussianInfo.non_informative(1), GaussianInfo.non_informative(1))


def test_observation_block_forward_scalar_example():
    x = GaussianMoment([0.0], [[1.0]])
    y = GaussianMoment([1.0], [[1.0]])
    out = observation_block_forward(x, [[1.0]], y)
    np.testing.assert_allclose(out.mean, [0.5])
    np.testing.assert_allclose(out.cov, [[0.5]])


def test_observation_block_forward_matches_marginal():
    rng = np.random.default_rng(6)
    for _ in range(30):
        n = int(rng.integers(1, 5))
        L = int(rng.integers(1, 3))
        A = rng.standard_normal((L, n))
        x = GaussianMoment(rng.standard_normal(n), random_spd(rng, n))
        y = GaussianMoment(rng.standard_normal(L), random_spd(rng, L))
        out = observation_block_forward(x, A, y)
        # oracle: condition the joint Gaussian of (X, A X + noise) on Y = m_y
        # via information-form combination on the X edge
        W = A.T @ np.linalg.inv(y.cov) @ A
        xi = A.T @ np.linalg.inv(y.cov) @ y.mean
        Wx = np.linalg.inv(x.cov)
        cov = np.linalg.inv(Wx + W)
        mean = cov @ (Wx @ x.mean + xi)
        np.testing.assert_allclose(out.mean, mean, rtol=1e-8, atol=1e-9)
        np.testing.assert_allclose(out.cov, cov, rtol=1e-8, atol=1e-9)


def test_observation_block_dual_backward_variants_agree():
    rng = np.random.default_rng(7)
    for _ in range(30):
        n = int(rng.integers(1, 5))
        A = rng.standard_normal((1, n))
        x_fwd = GaussianMoment(rng.standard_normal(n), random_spd(rng, n))
        y_bwd = GaussianMoment(rng.standard_normal(1), [[float(rng.uniform(0.2, 1.0))]])
        z_fwd = observation_block_forward(x_fwd, A, y_bwd)
        z_dual = DualMarginal(rng.standard_normal(n), random_spd(rng, n))
        dF = observation_block_dual_backward(z_dual, A, y_bwd, z_fwd=z_fwd, variant="F")
        dG = observation_block_dual_backward(z_dual, A, y_bwd, x_fwd=x_fwd, variant="G")
        np.testing.assert_allclose(dF.dxi, dG.dxi, rtol=1e-8, atol=1e-9)
        np.testing.assert_allclose(dF.dprec, dG.dprec, rtol=1e-8, atol=1e-9)


def test_input_block_forward_info_scalar_example():
    x = GaussianInfo([1.0], [[1.0]])
    u = GaussianInfo([0.0], [[1.0]])
    out = input_block_forward_info(x, [[1.0]], u)
    np.testing.assert_allclose(out.xi, [0.5])
    np.testing.assert_allclose(out.prec, [[0.5]])


def test_input_block_forward_info_matches_dense():
    rng = np.random.default_rng(8)
    for _ in range(30):
        n = int(rng.integers(1, 5))
        m = int(rng.integers(1, 3))
        A = rng.standard_normal((n, m))
        x = GaussianMoment(rng.standard_normal(n), random_spd(rng, n)).to_info()
        Du = random_spd(rng, m)
        u = GaussianMoment(np.zeros(m), Du).to_info()
        out = input_block_forward_info(x, A, u)
        # oracle: Z = X + A U in moment form, then invert
        xm = x.to_moment()
        cov = xm.cov + A @ Du @ A.T
        prec = np.linalg.inv(cov)
        np.testing.assert_allclose(out.prec, prec, rtol=1e-8, atol=1e-9)
        np.testing.assert_allclose(out.xi, prec @ xm.mean, rtol=1e-7, atol=1e-8)


def test_input_block_reverse_flag():
    # reverse direction: the backward message on X of Z = X + A U is the
    # backward message on Z widened by the input, with the input mean negated.
    rng = np.random.default_rng(9)
    n, m = 3, 2
    A = rng.standard_normal((n, m))
    z_bwd = GaussianMoment(rng.standard_normal(n), random_spd(rng, n))
    Du = random_spd(rng, m)
    u = GaussianMoment(np.zeros(m), Du).to_info()
    out = input_block_forward_info(z_bwd.to_info(), A, u, reverse=True)
    cov = z_bwd.cov + A @ Du @ A.T
    prec = np.linalg.inv(cov)
    np.testing.assert_allclose(out.prec, prec, rtol=1e-8, atol=1e-9)
    np.testing.assert_allclose(out.xi, prec @ z_bwd.mean, rtol=1e-7, atol=1e-8)


def test_input_block_marginal_forward_variants():
    # oracle: joint Gaussian over (X, U) conditioned on a pseudo-observation
    # expressed by the backward information message on Z
    rng = np.random.default_rng(10)
    for _ in range(30):
        n = int(rng.integers(1, 4))
        m = int(rng.integers(1, 3))
        A = rng.standard_normal((n, m))
        x_fwd = GaussianMoment(rng.standard_normal(n), random_spd(rng, n))
        Du = random_spd(rng, m)
        u = GaussianMoment(np.zeros(m), Du)
        bwd_z = GaussianMoment(rng.standard_normal(n), random_spd(rng, n)).to_info()

        # dense reference on Z = X + A U
        z_cov = x_fwd.cov + A @ Du @ A.T
        Wf = np.linalg.inv(z_cov)
        cov_z = np.linalg.inv(Wf + bwd_z.prec)
        mean_z = cov_z @ (Wf @ x_fwd.mean + bwd_z.xi)

        # marginal on X: combine forward X message with backward through the block
        bwd_on_x = input_block_forward_info(bwd_z, A, u.to_info(), reverse=True)
        mar_x, _ = edge_marginal(x_fwd, bwd_on_x)

        for variant, kwargs in (
            ("F", {"bwd_near": bwd_on_x}),
            ("H", {"bwd_far": bwd_z}),
        ):
            mar_z = input_block_marginal_forward(mar_x, A, u, variant=variant, **kwargs)
            np.testing.assert_allclose(mar_z.mean, mean_z, rtol=1e-7, atol=1e-8)
            np.testing.assert_allclose(mar_z.cov, cov_z, rtol=1e-7, atol=1e-8)


def test_input_block_marginal_forward_zero_variance_input():
    # the F-variant must carry a deterministic (zero-variance) input through
    x_fwd = GaussianMoment([1.0, -1.0], np.eye(2))
    u = GaussianMoment([0.0], [[0.0]])
    A = np.array([[1.0], [0.0]])
    bwd = GaussianInfo.non_informative(2)
    mar = input_block_marginal_forward(Marginal(x_fwd.mean, x_fwd.cov), A, u, bwd_near=bwd)
    np.testing.assert_allclose(mar.mean, x_fwd.mean)
    np.testing.assert_allclose(mar.cov, x_fwd.cov)
