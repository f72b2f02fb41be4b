import numpy as np
import pytest

from pdecert import legendre


def test_order_zero_is_one():
    for x in (0.0, 0.3, 1.0):
        assert legendre.value(0, x) == pytest.approx(1.0)


def test_boundary_values():
    for k in range(9):
        assert legendre.value(k, 1.0) == pytest.approx(1.0)
        assert legendre.value(k, 0.0) == pytest.approx((-1.0) ** k)


def test_first_order_midpoint():
    # the binomial sum gives 2x - 1 at order one
    assert legendre.value(1, 0.5) == pytest.approx(0.0, abs=1e-15)


def test_rejects_outside_domain():
    with pytest.raises(ValueError):
        legendre.value(3, -0.1)
    with pytest.raises(ValueError):
        legendre.value(3, 1.1)
    with pytest.raises(ValueError):
        legendre.value(-1, 0.5)


def test_coupling_coefficients():
    assert legendre.ell(1, 0) == pytest.approx(2.0)
    assert legendre.ell(2, 1) == pytest.approx(6.0)
    assert legendre.ell(2, 0) == pytest.approx(0.0)
    for k in range(8):
        assert legendre.ell(k, k) == 0.0
    assert legendre.ell(1, 3) == 0.0


def test_deriv_matrix_small_orders():
    assert np.array_equal(legendre.deriv_matrix(0, 3), np.zeros((3, 3)))
    assert np.array_equal(legendre.deriv_matrix(1, 1), [[0.0, 0.0], [2.0, 0.0]])
    assert np.array_equal(
        legendre.deriv_matrix(2, 1),
        [[0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 6.0, 0.0]],
    )


def test_deriv_matrix_block_structure():
    out = legendre.deriv_matrix(1, 2)
    assert np.array_equal(out[2:, :2], 2.0 * np.eye(2))
    assert not out[:2, :].any()


def test_derivative_identity_finite_differences():
    step = 1e-6
    xs = np.linspace(0.01, 0.99, 50)
    for k in range(9):
        fd = (legendre.value(k, xs + step) - legendre.value(k, xs - step)) / (2 * step)
        series = sum(legendre.ell(k, j) * legendre.value(j, xs) for j in range(k + 1))
        assert np.abs(fd - series).max() < 1e-4


def test_second_derivative_identity_finite_differences():
    step = 1e-4
    xs = np.linspace(0.05, 0.95, 30)
    for k in range(7):
        fd = (
            legendre.value(k, xs + step)
            - 2 * legendre.value(k, xs)
            + legendre.value(k, xs - step)
        ) / step**2
        series = sum(
            legendre.ell(k, j) * legendre.ell(j, i) * legendre.value(i, xs)
            for j in range(k + 1)
            for i in range(j + 1)
        )
        assert np.abs(fd - series).max() < 1e-3


def test_orthogonality_by_quadrature():
    xg, wg = legendre.gauss_rule(64)
    vals = legendre.value_stack(8, xg)
    gram = (vals * wg) @ vals.T
    for k in range(9):
        for j in range(9):
            expected = legendre.norm_sq(k) if k == j else 0.0
            assert gram[k, j] == pytest.approx(expected, abs=1e-10)


def test_norms():
    for k in range(6):
        assert legendre.norm_sq(k) == pytest.approx(1.0 / (2 * k + 1))


def test_table_invariants():
    table = legendre.LegendreTable.build(5)
    assert np.array_equal(np.triu(table.ell), np.zeros((6, 6)))
    assert np.allclose(table.norms, [1 / (2 * k + 1) for k in range(6)])


def test_gauss_rule_integrates_polynomials():
    xg, wg = legendre.gauss_rule(16)
    for p in range(10):
        assert wg @ xg**p == pytest.approx(1.0 / (p + 1), rel=1e-13)
