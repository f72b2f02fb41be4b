import numpy as np
import pytest

from pdecert.model import (
    FilterRealization,
    Interconnection,
    LtiSystem,
    PdeSpec,
    build_filter,
    build_interconnection,
    chatter_matrices,
    from_time_delay,
    heat_uncertainty,
    simulate_filter,
)
from pdecert.oracle import transport_projections, transport_trace
from pdecert.validation import heat_expansion_check


def transport_pde(width: int, speed: float) -> PdeSpec:
    z = np.zeros((width, width))
    i = np.eye(width)
    return PdeSpec(
        order=1,
        width=width,
        coeffs=(z, -speed * i),
        boundary_selector=np.hstack([i, z]),
        boundary_input=i,
        output_selector=np.hstack([z, i]),
    )


def zero_plant(n: int) -> LtiSystem:
    z = np.zeros((n, n))
    return LtiSystem(A=z, B=z, C=np.eye(n), D=z)


def test_lti_dimension_checks():
    with pytest.raises(ValueError):
        LtiSystem(A=np.zeros((2, 3)), B=np.zeros((2, 1)), C=np.eye(2), D=np.zeros((2, 1)))
    with pytest.raises(ValueError):
        LtiSystem(A=np.zeros((2, 2)), B=np.zeros((3, 1)), C=np.eye(2), D=np.zeros((2, 1)))


def test_pde_spec_validation():
    with pytest.raises(ValueError, match="leading coefficient"):
        transport_pde(1, 0.0)
    i = np.eye(1)
    z = np.zeros((1, 1))
    with pytest.raises(ValueError, match="full row rank"):
        PdeSpec(
            order=1,
            width=1,
            coeffs=(z, -i),
            boundary_selector=np.zeros((1, 2)),
            boundary_input=i,
            output_selector=np.hstack([z, i]),
        )


def test_transport_filter_order_zero():
    # single coefficient: its derivative is speed * (z(0) - z(1))
    pde = transport_pde(2, speed=3.0)
    filt = build_filter(pde, 0)
    assert np.allclose(filt.A_state, np.zeros((2, 2)))
    assert np.allclose(filt.B_trace, 3.0 * np.hstack([np.eye(2), -np.eye(2)]))
    assert not filt.B_output.any()


def test_transport_filter_order_one_scalar():
    pde = transport_pde(1, speed=2.5)
    filt = build_filter(pde, 1)
    assert np.allclose(filt.A_state, 2.5 * np.array([[0.0, 0.0], [2.0, 0.0]]))
    assert np.allclose(filt.B_trace, 2.5 * np.array([[1.0, -1.0], [-1.0, -1.0]]))


def test_filter_output_structure_any_spec():
    for pde, order in [
        (transport_pde(2, 1.7), 3),
        (heat_uncertainty(zero_plant(1), 0.8), 2),
    ]:
        filt = build_filter(pde, order)
        q = filt.trace_width
        assert np.array_equal(filt.D_trace[:q], np.eye(q))
        assert not filt.D_trace[q:].any()
        assert not filt.D_output.any()
        assert not filt.B_output.any()
        assert np.array_equal(filt.C_state[q:], np.eye(filt.n_state))
        assert not filt.C_state[:q].any()


def test_filter_rejects_unsupported_order():
    z = np.zeros((1, 1))
    pde = PdeSpec(
        order=3,
        width=1,
        coeffs=(z, z, z, np.eye(1)),
        boundary_selector=np.hstack([np.eye(3), np.zeros((3, 3))]),
        boundary_input=np.ones((3, 1)),
        output_selector=np.zeros((1, 6)),
    )
    with pytest.raises(ValueError, match="order 1 or 2"):
        build_filter(pde, 1)


def test_heat_filter_order_zero_has_zero_state_coupling():
    pde = heat_uncertainty(zero_plant(1), diffusivity=1.0)
    filt = build_filter(pde, 0)
    assert np.allclose(filt.A_state, 0.0)


def test_heat_selectors_scalar_channel():
    pde = heat_uncertainty(zero_plant(1), diffusivity=1.0)
    ks = pde.boundary_selector
    assert ks.shape == (2, 4)
    assert np.array_equal(ks[0], [1.0, 0.0, 0.0, 0.0])
    assert np.array_equal(ks[1], [0.0, 0.0, 0.0, 1.0])
    assert np.array_equal(pde.boundary_input, [[1.0], [0.0]])


def test_heat_rejects_nonpositive_diffusivity():
    with pytest.raises(ValueError):
        heat_uncertainty(zero_plant(1), diffusivity=0.0)


def test_interconnection_zero_plant_block_diagonal():
    pde = transport_pde(1, 2.0)
    filt = build_filter(pde, 0)
    sys = build_interconnection(zero_plant(1), filt, pde.output_selector)
    assert np.allclose(sys.A, np.zeros((2, 2)))
    assert sys.n_filter == 1


def test_interconnection_chatter_block_structure():
    A, B = chatter_matrices(2.0)
    plant, pde = from_time_delay(A, B, h=0.5)
    filt = build_filter(pde, 0)
    sys = build_interconnection(plant, filt, pde.output_selector)
    assert sys.A.shape == (8, 8)
    assert np.allclose(sys.A[:4, :4], filt.A_state)
    assert np.allclose(sys.A[4:, 4:], A)
    assert not sys.A[:4, 4:].any() and not sys.A[4:, :4].any()


def test_interconnection_reduced_form_equality():
    # with zero gain from the plant output the general formula collapses to
    # the block-diagonal short form, exactly
    A, B = chatter_matrices(1.3)
    plant, pde = from_time_delay(A, B, h=0.8)
    filt = build_filter(pde, 2)
    sys = build_interconnection(plant, filt, pde.output_selector)
    n, nf = plant.n, filt.n_state
    assert np.array_equal(sys.A[:nf, :nf], filt.A_state)
    assert not sys.A[:nf, nf:].any()
    assert np.array_equal(sys.B[:nf], filt.B_trace)
    assert np.array_equal(sys.B[nf:], plant.B @ pde.output_selector)
    assert np.array_equal(sys.C, np.hstack([filt.C_state, np.zeros((filt.out_dim, n))]))
    assert np.array_equal(sys.D, filt.D_trace)


def test_interconnection_output_reproduces_stacked_signal():
    rng = np.random.default_rng(5)
    A, B = chatter_matrices(2.0)
    plant, pde = from_time_delay(A, B, h=0.3)
    filt = build_filter(pde, 1)
    sys = build_interconnection(plant, filt, pde.output_selector)
    for _ in range(5):
        xi = rng.standard_normal(filt.n_state)
        x = rng.standard_normal(plant.n)
        trace = rng.standard_normal(filt.trace_width)
        out = sys.C @ np.concatenate([xi, x]) + sys.D @ trace
        assert np.allclose(out, np.concatenate([trace, xi]))


def test_interconnection_dimension_mismatch():
    pde = transport_pde(1, 2.0)
    filt = build_filter(pde, 0)
    with pytest.raises(ValueError):
        build_interconnection(zero_plant(1), filt, np.zeros((1, 3)))


def test_from_time_delay_examples():
    A, B = chatter_matrices(2.0)
    plant, pde = from_time_delay(A, B, h=0.5)
    assert np.allclose(pde.coeffs[1], -2.0 * np.eye(4))  # speed 1/h
    assert np.array_equal(plant.C, np.eye(4))
    assert not plant.D.any()
    # selector identities: boundary rows pick z(0), output picks z(1)
    rng = np.random.default_rng(6)
    trace = rng.standard_normal(8)
    assert np.allclose(pde.boundary_selector @ trace, trace[:4])
    assert np.allclose(pde.output_selector @ trace, trace[4:])
    with pytest.raises(ValueError):
        from_time_delay(A, B, h=0.0)
    with pytest.raises(ValueError):
        from_time_delay(A, B[:2, :2], h=1.0)


def test_filter_consistency_single_run():
    # exact transport solution versus direct quadrature of the coefficients
    speed = 1.6
    freqs = np.array([0.7, 1.4, 2.1])

    def y(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.sin(np.outer(t, freqs)).sum(axis=1, keepdims=True)

    pde = transport_pde(1, speed)
    filt = build_filter(pde, 3)
    h = 1.0 / speed
    dt = h / int(np.ceil(h / 2e-4))
    times = dt * np.arange(int(np.ceil(3.0 / dt)) + 1)
    xi = simulate_filter(filt, transport_trace(y, speed), times)
    sample = np.linspace(1, times.size - 1, 25).astype(int)
    omega = transport_projections(y, speed, times[sample], 3)
    err = np.linalg.norm(xi[sample] - omega) / np.linalg.norm(omega)
    assert err < 1e-5


def test_simulate_filter_rejects_nonuniform_grid():
    pde = transport_pde(1, 1.0)
    filt = build_filter(pde, 0)
    bad = np.array([0.0, 0.1, 0.3])
    with pytest.raises(ValueError, match="uniform"):
        simulate_filter(filt, transport_trace(lambda t: np.atleast_1d(t), 1.0), bad)


def test_second_order_expansion_check_passes():
    result = heat_expansion_check()
    assert result.passed
    assert result.worst <= 1e-8
