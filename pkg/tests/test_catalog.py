import numpy as np
import pytest

from lagfsi.catalog import FORCING_CATALOG, INITIAL_CATALOG, T, X, Y, AnalyticField, lookup


def test_derivatives_of_polynomial():
    f = AnalyticField((X**2 * Y + T * X, Y**3))
    p = np.array([[0.5, -1.0]])
    np.testing.assert_allclose(f.value(p, 2.0), [[0.5**2 * -1 + 1.0, -1.0]])
    np.testing.assert_allclose(f.grad(p, 2.0), [[[2 * 0.5 * -1 + 2.0, 0.25], [0, 3.0]]])
    np.testing.assert_allclose(f.laplacian(p, 0.0), [[-2.0, -6.0]])
    np.testing.assert_allclose(f.time_derivative(p, 0.0), [[0.5, 0.0]])


@pytest.mark.parametrize("name", sorted(FORCING_CATALOG))
def test_forcing_entries(name):
    f = lookup(FORCING_CATALOG, name, 2.0)
    assert f.value(np.zeros((1, 2)), 0.3).shape == (1, 2)


def test_initial_fields_vanish_on_wall():
    u = lookup(INITIAL_CATALOG, "stream_bump")
    th = np.linspace(0, 2 * np.pi, 17)
    np.testing.assert_allclose(u.value(np.column_stack([np.cos(th), np.sin(th)])), 0, atol=1e-14)


def test_unknown_name():
    with pytest.raises(KeyError):
        lookup(FORCING_CATALOG, "nope")
