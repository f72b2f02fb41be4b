import numpy as np
import pytest
import scipy.optimize

from pdecert.model import chatter_matrices
from pdecert.oracle import (
    OracleConvergenceError,
    dde_abscissa,
    stable_intervals,
    transport_projections,
    transport_state,
    transport_trace,
)


def test_no_delay_coupling_gives_plant_spectrum():
    spec = dde_abscissa([[-1.0]], [[0.0]], h=2.7)
    assert spec.abscissa == pytest.approx(-1.0, abs=1e-9)


def test_scalar_critical_delay():
    # dx = -x(t - h) crosses the imaginary axis at h = pi / 2
    spec = dde_abscissa([[0.0]], [[-1.0]], h=np.pi / 2)
    assert abs(spec.abscissa) < 1e-8
    # independent check: solve the characteristic equation near i
    h = np.pi / 2

    def residue(v):
        lam = v[0] + 1j * v[1]
        val = lam + np.exp(-lam * h)
        return [val.real, val.imag]

    root = scipy.optimize.fsolve(residue, [0.1, 0.9])
    assert abs(root[0]) < 1e-9
    assert root[1] == pytest.approx(1.0, abs=1e-9)
    # and the collocation found that root among its eigenvalues
    nearest = np.min(np.abs(spec.roots - (root[0] + 1j * root[1])))
    assert nearest < 1e-8


def test_scalar_stability_flips_across_critical_delay():
    assert dde_abscissa([[0.0]], [[-1.0]], h=1.4).abscissa < 0.0
    assert dde_abscissa([[0.0]], [[-1.0]], h=1.7).abscissa > 0.0


def test_chatter_spot_values():
    A, B = chatter_matrices(2.0)
    assert dde_abscissa(A, B, 0.5).abscissa < 0.0  # inside [0, 0.859]
    assert dde_abscissa(A, B, 1.0).abscissa > 0.0  # between the pockets
    assert dde_abscissa(A, B, 1.2).abscissa < 0.0  # inside [1.117, 1.264]


def test_small_delay_matches_undelayed_limit():
    A, B = chatter_matrices(2.0)
    limit = float(np.linalg.eigvals(A + B).real.max())
    spec = dde_abscissa(A, B, h=1e-4)
    assert spec.abscissa == pytest.approx(limit, abs=1e-2)


def test_roots_in_conjugate_pairs():
    A, B = chatter_matrices(2.0)
    roots = dde_abscissa(A, B, 0.7).roots
    complex_roots = roots[np.abs(roots.imag) > 1e-8]
    paired = np.sort_complex(complex_roots.conj())
    assert np.allclose(np.sort_complex(complex_roots), paired, atol=1e-8)


def test_convergence_between_orders():
    A, B = chatter_matrices(2.0)
    a40 = dde_abscissa(A, B, 0.9, order=40).abscissa
    a50 = dde_abscissa(A, B, 0.9, order=50).abscissa
    assert abs(a40 - a50) < 1e-6


def test_input_validation():
    with pytest.raises(ValueError):
        dde_abscissa([[0.0]], [[-1.0]], h=0.0)
    with pytest.raises(ValueError):
        dde_abscissa(np.eye(2), np.eye(3), h=1.0)
    with pytest.raises(ValueError):
        dde_abscissa([[0.0]], [[-1.0]], h=1.0, order=5)


def test_stable_intervals_hurwitz_no_coupling():
    grid = np.linspace(0.1, 2.0, 12)
    out = stable_intervals([[-1.0]], [[0.0]], grid)
    assert out == [(pytest.approx(0.1), pytest.approx(2.0))]


def test_stable_intervals_marginal_case_is_not_stable():
    # zero dynamics sit exactly on the axis; strict stability excludes them
    grid = np.linspace(0.1, 1.0, 4)
    assert stable_intervals([[0.0]], [[0.0]], grid) == []


def test_stable_intervals_scalar_critical():
    grid = np.linspace(1.0, 2.0, 21)
    out = stable_intervals([[0.0]], [[-1.0]], grid)
    assert len(out) == 1
    lo, hi = out[0]
    assert lo == pytest.approx(1.0)
    assert hi == pytest.approx(np.pi / 2, abs=1e-3)


def test_stable_intervals_rejects_bad_grid():
    with pytest.raises(ValueError):
        stable_intervals([[-1.0]], [[0.0]], [0.2, 0.1])


# --- exact transport solution -------------------------------------------------


def test_transport_state_wavefront():
    y = lambda t: np.atleast_1d(np.asarray(t, dtype=float))  # ramp input
    z = transport_state(y, speed=2.0, x=0.5, t=1.0)
    assert z == pytest.approx(0.75)  # y(1 - 0.25)
    assert transport_state(y, 2.0, 0.5, 0.1) == pytest.approx(0.0)  # ahead of front


def test_transport_trace_components():
    y = lambda t: np.atleast_1d(np.asarray(t, dtype=float)) ** 2
    trace = transport_trace(y, speed=0.5)
    t = np.array([1.0, 3.0])
    out = trace(t)
    assert out.shape == (2, 2)
    assert out[0] == pytest.approx([1.0, 0.0])  # front not yet through at t=1
    assert out[1] == pytest.approx([9.0, 1.0])  # y(3), y(3 - 2)


def test_transport_projections_against_quadrature():
    import scipy.integrate

    from pdecert import legendre

    speed = 1.3
    y = lambda t: np.atleast_1d(np.sin(1.7 * np.asarray(t, dtype=float)))
    for t in (0.3, 0.9, 2.0):
        got = transport_projections(y, speed, [t], order=3)[0]
        for k in range(4):
            ref, _ = scipy.integrate.quad(
                lambda x: (np.sin(1.7 * (t - x / speed)) if t >= x / speed else 0.0)
                * legendre.value(k, x),
                0.0,
                1.0,
                points=[min(1.0, speed * t)],
            )
            assert got[k] == pytest.approx(ref, abs=1e-12)
