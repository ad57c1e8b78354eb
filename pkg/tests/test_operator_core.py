"""State space, propagation and spectral calculus.

Oracles used here are independent of the implementation paths:
Taylor summation for the matrix exponential, brute-force quadratic
forms for Gram norms, explicit inverse plus SVD for weighted resolvent
norms, and closed-form powers of diagonal generators.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from semiper.errors import (
    BackwardTimeDisallowed,
    KernelComponentPresent,
    NonFiniteInput,
    NonHermitian,
    NotPositiveDefinite,
    OnSpectrum,
    SpectrumOnCut,
)
from semiper.models import build_diagonal_model, build_scalar_model
from semiper.operator_core import (
    build_model,
    contour_spectral_projector,
    deflated_block,
    domain_gram,
    fractional_power,
    kernel_projector,
    make_state_space,
    norm_domain,
    propagate,
    propagator_matrix,
    resolvent_norm,
    spectrum_report,
)


def taylor_expm(A, t, terms=80):
    """Matrix exponential by plain Taylor summation.

    Only safe for ||tA|| of order one, which is all the oracle needs.
    """
    n = A.shape[0]
    acc = np.eye(n, dtype=complex)
    term = np.eye(n, dtype=complex)
    for k in range(1, terms):
        term = term @ (A * t) / k
        acc = acc + term
    return acc


def random_stable_model(rng, n=4, field="real"):
    A = rng.standard_normal((n, n))
    A = A - (np.abs(np.linalg.eigvals(A).real).max() + 0.5) * np.eye(n)
    B = rng.standard_normal((n, n))
    G = B @ B.T + n * np.eye(n)
    space = make_state_space(n, G, field)
    return build_model(space, A, label="random_stable")


# ---------------------------------------------------------------------------
# state space
# ---------------------------------------------------------------------------

def test_norm_matches_quadratic_form(rng):
    n = 5
    B = rng.standard_normal((n, n))
    G = B @ B.T + n * np.eye(n)
    space = make_state_space(n, G)
    for _ in range(10):
        x = rng.standard_normal(n)
        brute = np.sqrt(np.real(x @ G @ x))
        assert space.norm(x) == pytest.approx(brute, rel=1e-12)


def test_inner_product_conjugate_symmetry(rng):
    n = 4
    B = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    G = B @ B.conj().T + n * np.eye(n)
    space = make_state_space(n, G, "complex")
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    y = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    assert space.inner(x, y) == pytest.approx(np.conj(space.inner(y, x)))
    brute = np.vdot(x, G @ y)
    assert space.inner(x, y) == pytest.approx(brute, rel=1e-12)


def test_op_norm_diagonal_identity_gram():
    space = make_state_space(3, np.eye(3))
    M = np.diag([0.5, -2.0, 1.5])
    assert space.op_norm(M) == pytest.approx(2.0, rel=1e-12)


def test_op_norm_dominates_rayleigh_quotients(rng):
    n = 5
    B = rng.standard_normal((n, n))
    G = B @ B.T + n * np.eye(n)
    space = make_state_space(n, G)
    M = rng.standard_normal((n, n))
    bound = space.op_norm(M)
    for _ in range(50):
        x = rng.standard_normal(n)
        assert space.norm(M @ x) <= bound * space.norm(x) * (1 + 1e-12)


def test_sqrt_gram_squares_back(rng):
    n = 4
    B = rng.standard_normal((n, n))
    G = B @ B.T + n * np.eye(n)
    space = make_state_space(n, G)
    S = space.sqrt_gram
    assert_allclose(S @ S, G, rtol=1e-11, atol=1e-11)
    assert_allclose(space.inv_sqrt_gram @ S, np.eye(n), atol=1e-11)


def test_gram_must_be_hermitian():
    with pytest.raises(NonHermitian):
        make_state_space(2, [[1.0, 0.5], [0.0, 1.0]])


def test_gram_must_be_positive_definite():
    with pytest.raises(NotPositiveDefinite):
        make_state_space(2, [[1.0, 0.0], [0.0, -1.0]])


def test_gram_must_be_finite():
    with pytest.raises(NonFiniteInput):
        make_state_space(2, [[np.nan, 0.0], [0.0, 1.0]])


def test_gram_shape_checked():
    with pytest.raises(ValueError):
        make_state_space(3, np.eye(2))


# ---------------------------------------------------------------------------
# propagation
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("t", [0.0, 0.3, 0.7])
def test_propagator_matches_taylor_series(rng, t):
    model = random_stable_model(rng)
    assert_allclose(propagator_matrix(model, t), taylor_expm(model.A, t),
                    rtol=1e-10, atol=1e-12)


def test_propagate_agrees_with_matrix(rng):
    model = random_stable_model(rng)
    x = rng.standard_normal(model.dim)
    assert_allclose(propagate(model, 0.5, x),
                    propagator_matrix(model, 0.5) @ x,
                    rtol=1e-10, atol=1e-13)


def test_propagate_semigroup_law(rng):
    model = random_stable_model(rng)
    x = rng.standard_normal(model.dim)
    both = propagate(model, 0.4, propagate(model, 0.9, x))
    assert_allclose(propagate(model, 1.3, x), both, rtol=1e-10, atol=1e-13)


def test_scalar_propagation_closed_form():
    model = build_scalar_model(lam=-2.0)
    out = propagate(model, 1.5, np.array([3.0]))
    assert out[0] == pytest.approx(3.0 * np.exp(-3.0), rel=1e-13)


def test_backward_time_needs_group():
    space = make_state_space(2, np.eye(2))
    model = build_model(space, -np.eye(2), group_allowed=False)
    with pytest.raises(BackwardTimeDisallowed):
        propagate(model, -0.1, np.ones(2))


def test_backward_time_on_group_inverts_forward(rng):
    model = random_stable_model(rng)
    x = rng.standard_normal(model.dim)
    back = propagate(model, -0.8, propagate(model, 0.8, x))
    assert_allclose(back, x, rtol=1e-9, atol=1e-11)


def test_propagate_rejects_nan_state():
    model = build_scalar_model()
    with pytest.raises(NonFiniteInput):
        propagate(model, 1.0, np.array([np.nan]))


# ---------------------------------------------------------------------------
# resolvent
# ---------------------------------------------------------------------------

def test_resolvent_norm_diagonal_exact():
    lams = np.array([-1.0 + 2.0j, -3.0 - 1.0j])
    model = build_diagonal_model(lams)
    for eta in (0.0, 1.0, -2.5):
        oracle = 1.0 / np.min(np.abs(1j * eta - lams))
        assert resolvent_norm(model, eta) == pytest.approx(oracle, rel=1e-11)


def test_resolvent_norm_matches_dense_svd(rng):
    model = random_stable_model(rng)
    eta = 1.7
    G = model.space.gram
    vals, vecs = np.linalg.eigh(G)
    S = (vecs * np.sqrt(vals)) @ vecs.conj().T
    R = np.linalg.inv(1j * eta * np.eye(model.dim) - model.A)
    oracle = np.linalg.svd(S @ R @ np.linalg.inv(S), compute_uv=False)[0]
    assert resolvent_norm(model, eta) == pytest.approx(oracle, rel=1e-10)


def test_resolvent_on_spectrum_raises():
    model = build_diagonal_model([2.0j, -1.0])
    with pytest.raises(OnSpectrum):
        resolvent_norm(model, 2.0)


def test_resolvent_uses_deflated_block():
    """With the kernel mode removed, eta = 0 is a regular point."""
    space = make_state_space(2, np.eye(2))
    e0 = np.array([1.0, 0.0])
    model = build_model(space, np.diag([0.0, -2.0]), kernel_basis=(e0,))
    assert resolvent_norm(model, 0.0) == pytest.approx(0.5, rel=1e-11)


# ---------------------------------------------------------------------------
# fractional powers
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("diag,expected", [
    ([-1.0, -4.0], [1.0, 2.0]),
    ([-1.0, -9.0], [1.0, 3.0]),
])
def test_square_root_of_diagonal_generator(diag, expected):
    model = build_diagonal_model(diag)
    F = fractional_power(model, 0.5)
    assert_allclose(F, np.diag(expected), atol=1e-12)


def test_cube_of_cube_root_recovers_generator(rng):
    model = random_stable_model(rng)
    F = fractional_power(model, 1.0 / 3.0)
    assert_allclose(F @ F @ F, -model.A, rtol=1e-9, atol=1e-10)


def test_power_composition_law(rng):
    model = random_stable_model(rng)
    F3 = fractional_power(model, 0.3)
    F4 = fractional_power(model, 0.4)
    F7 = fractional_power(model, 0.7)
    assert_allclose(F3 @ F4, F7, rtol=1e-9, atol=1e-10)


def test_integer_power_is_exact():
    model = build_diagonal_model([-1.0, -2.0, -5.0])
    assert_allclose(fractional_power(model, 2.0),
                    np.diag([1.0, 4.0, 25.0]), atol=1e-13)
    assert_allclose(fractional_power(model, 0.0), np.eye(3), atol=1e-13)


def test_spectrum_on_cut_refused():
    space = make_state_space(1, [[1.0]])
    model = build_model(space, [[2.0]])
    with pytest.raises(SpectrumOnCut):
        fractional_power(model, 0.5)


def test_fractional_power_annihilates_kernel():
    space = make_state_space(2, np.eye(2))
    e0 = np.array([1.0, 0.0])
    model = build_model(space, np.diag([0.0, -4.0]), kernel_basis=(e0,))
    F = fractional_power(model, 0.5)
    assert_allclose(F @ e0, np.zeros(2), atol=1e-12)
    assert_allclose(F @ np.array([0.0, 1.0]), [0.0, 2.0], atol=1e-12)


def test_norm_domain_diagonal_value():
    model = build_diagonal_model([-1.0, -4.0])
    x = np.array([0.0, 1.0])
    assert norm_domain(model, 0.5, x) == pytest.approx(3.0, rel=1e-12)


def test_norm_domain_rejects_kernel_component():
    space = make_state_space(2, np.eye(2))
    e0 = np.array([1.0, 0.0])
    model = build_model(space, np.diag([0.0, -4.0]), kernel_basis=(e0,))
    with pytest.raises(KernelComponentPresent):
        norm_domain(model, 0.5, np.array([1.0, 1.0]))


def test_domain_gram_equivalent_to_sum_norm(rng):
    """Hilbertian domain norm sits within [1/sqrt(2), 1] of the sum norm."""
    model = random_stable_model(rng)
    Gd = domain_gram(model, 0.5)
    for _ in range(20):
        x = rng.standard_normal(model.dim)
        hilbert = np.sqrt(np.real(x @ Gd @ x))
        summed = norm_domain(model, 0.5, x)
        assert hilbert <= summed * (1 + 1e-12)
        assert hilbert >= summed / np.sqrt(2) * (1 - 1e-12)


# ---------------------------------------------------------------------------
# kernel projector and spectrum report
# ---------------------------------------------------------------------------

def test_contour_projector_matches_spectral_projector():
    space = make_state_space(3, np.eye(3))
    e0 = np.array([1.0, 0.0, 0.0])
    A = np.array([[0.0, 0.3, 0.0], [0.0, -2.0, 0.1], [0.0, 0.0, -3.0]])
    model = build_model(space, A, kernel_basis=(e0,))
    P = contour_spectral_projector(model)
    assert_allclose(P, kernel_projector(model), atol=1e-9)
    assert_allclose(P @ P, P, atol=1e-9)
    assert np.trace(P).real == pytest.approx(1.0, abs=1e-9)


def test_contour_projector_around_isolated_eigenvalue():
    model = build_diagonal_model([-1.0, -2.0, -5.0])
    P = contour_spectral_projector(model, center=-2.0)
    assert_allclose(P, np.diag([0.0, 1.0, 0.0]), atol=1e-10)


def test_deflated_block_removes_kernel_direction():
    space = make_state_space(2, np.eye(2))
    e0 = np.array([1.0, 0.0])
    model = build_model(space, np.diag([0.0, -4.0]), kernel_basis=(e0,))
    A_r, G_r, Q = deflated_block(model)
    assert A_r.shape == (1, 1)
    assert A_r[0, 0] == pytest.approx(-4.0)
    assert G_r[0, 0].real == pytest.approx(1.0)
    assert Q.shape == (2, 1)


def test_spectrum_report_stable_model():
    model = build_diagonal_model([-1.0 + 5.0j, -0.25])
    rep = spectrum_report(model)
    assert rep.assumptions_ok
    assert rep.abscissa == pytest.approx(-0.25)
    assert rep.kernel_dim == 0
    assert rep.distance_to_imaginary_axis == pytest.approx(0.25)


def test_spectrum_report_flags_imaginary_eigenvalue():
    space = make_state_space(1, [[1.0]], "complex")
    model = build_model(space, [[1.0j]])
    rep = spectrum_report(model)
    assert not rep.assumptions_ok
    assert rep.deflated_abscissa == pytest.approx(0.0, abs=1e-14)


def test_spectrum_report_kernel_model_ok():
    space = make_state_space(2, np.eye(2))
    e0 = np.array([1.0, 0.0])
    model = build_model(space, np.diag([0.0, -4.0]), kernel_basis=(e0,))
    rep = spectrum_report(model)
    assert rep.kernel_dim == 1
    assert rep.assumptions_ok
    assert rep.deflated_abscissa == pytest.approx(-4.0)


def test_build_model_rejects_bad_shapes():
    space = make_state_space(2, np.eye(2))
    with pytest.raises(ValueError):
        build_model(space, np.eye(3))
    with pytest.raises(NonFiniteInput):
        build_model(space, [[np.inf, 0.0], [0.0, -1.0]])
