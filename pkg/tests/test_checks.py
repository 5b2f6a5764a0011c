import numpy as np
import pytest

from screenquest import checks


def test_as_float_array_copies_and_casts():
    raw = [[1, 2], [3, 4]]
    out = checks.as_float_array(raw)
    assert out.dtype == np.float64
    assert out.tolist() == [[1.0, 2.0], [3.0, 4.0]]


def test_check_matrix_rejects_bad_shapes():
    with pytest.raises(ValueError):
        checks.check_matrix([1.0, 2.0])
    with pytest.raises(ValueError):
        checks.check_matrix([[np.nan, 1.0]])


def test_check_binary_matrix():
    out = checks.check_binary_matrix([[0, 1], [1, 0]])
    assert out.dtype == np.int8
    with pytest.raises(ValueError):
        checks.check_binary_matrix([[0, 2], [1, 0]])


def test_check_binary_labels_length_and_values():
    out = checks.check_binary_labels([0, 1, 1], 3)
    assert out.tolist() == [0, 1, 1]
    with pytest.raises(ValueError):
        checks.check_binary_labels([0, 1], 3)
    with pytest.raises(ValueError):
        checks.check_binary_labels([0, 3, 1], 3)


def test_check_weights_normalization_window():
    weights = checks.check_weights([0.5, 0.5])
    assert weights.sum() == pytest.approx(1.0)
    # slight negative noise inside tolerance is clipped, not rejected
    noisy = checks.check_weights([1.0 + 5e-10, -5e-10])
    assert noisy.min() >= 0.0
    with pytest.raises(ValueError):
        checks.check_weights([0.7, 0.7])
    with pytest.raises(ValueError):
        checks.check_weights([1.2, -0.2])


def test_check_distance_matrix_properties():
    good = np.array([[0.0, 1.0], [1.0, 0.0]])
    checks.check_distance_matrix(good)
    with pytest.raises(ValueError):
        checks.check_distance_matrix(np.array([[0.0, 1.0], [2.0, 0.0]]))
    with pytest.raises(ValueError):
        checks.check_distance_matrix(np.array([[0.5, 1.0], [1.0, 0.0]]))
    with pytest.raises(ValueError):
        checks.check_distance_matrix(np.array([[0.0, -1.0], [-1.0, 0.0]]))
