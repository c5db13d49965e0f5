import logging
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from src.errors import DimensionError, KindError
from src.sensing import check_measurement_count, compress, effective_dictionary, make_measurement_matrix


def test_identity_is_exact(dictionary15):
    phi = make_measurement_matrix("identity", 15, 15)
    assert_array_equal(phi.matrix, np.eye(15))
    psi = effective_dictionary(phi, dictionary15)
    assert psi.matrix is dictionary15.matrix
    assert_allclose(psi.column_norms, np.sqrt(15.0))


@pytest.mark.parametrize(
    "kind, m, n, error",
    [
        ("identity", 6, 15, KindError),
        ("bernoulli", 6, 15, KindError),
        ("gaussian", 16, 15, DimensionError),
        ("gaussian", 0, 15, DimensionError),
    ],
)
def test_invalid_measurement_matrix(kind, m, n, error):
    with pytest.raises(error):
        make_measurement_matrix(kind, m, n, seed=1)


def test_gaussian_statistics():
    phi = make_measurement_matrix("gaussian", 200, 400, seed=123)
    entries = phi.matrix
    assert entries.shape == (200, 400)
    assert np.mean(np.abs(entries) ** 2) * 200 == pytest.approx(1.0, abs=0.02)
    assert abs(np.mean(entries)) * np.sqrt(200) < 0.02
    assert not entries.flags.writeable


def test_gaussian_is_seeded():
    a = make_measurement_matrix("gaussian", 6, 15, seed=9)
    b = make_measurement_matrix("gaussian", 6, 15, seed=9)
    c = make_measurement_matrix("gaussian", 6, 15, seed=10)
    assert_array_equal(a.matrix, b.matrix)
    assert not np.allclose(a.matrix, c.matrix)
    assert a.seed == 9


def test_compress_and_effective_dictionary(dictionary15):
    phi = make_measurement_matrix("gaussian", 6, 15, seed=4)
    x = dictionary15.matrix[:, 50]
    y = compress(phi, x, snapshot_index=3)
    assert len(y) == 6
    assert y.snapshot_index == 3
    assert y.kind == "gaussian"
    psi = effective_dictionary(phi, dictionary15)
    assert psi.matrix.shape == (6, 181)
    assert_allclose(y.data, psi.matrix[:, 50])
    assert_allclose(psi.column_norms, np.linalg.norm(psi.matrix, axis=0))


def test_compress_is_linear(dictionary15):
    phi = make_measurement_matrix("gaussian", 6, 15, seed=9)
    x1, x2 = dictionary15.matrix[:, 20], dictionary15.matrix[:, 130]
    a, b = 1.5 - 0.5j, -2.0j
    combined = compress(phi, a * x1 + b * x2).data
    assert_allclose(combined, a * compress(phi, x1).data + b * compress(phi, x2).data, rtol=0, atol=1e-12)


def test_compress_rejects_wrong_length():
    phi = make_measurement_matrix("identity", 4, 4)
    with pytest.raises(DimensionError):
        compress(phi, np.ones(5))


def test_measurement_count_warning(caplog):
    phi = make_measurement_matrix("gaussian", 6, 15, seed=0)
    with caplog.at_level(logging.WARNING, logger="src.sensing"):
        bound = check_measurement_count(phi, 3)
    assert bound == pytest.approx(3 * math.log(15))
    assert "M·ln(N)" in caplog.text


def test_identity_never_warns(caplog):
    phi = make_measurement_matrix("identity", 15, 15)
    with caplog.at_level(logging.WARNING, logger="src.sensing"):
        check_measurement_count(phi, 7)
    assert caplog.text == ""
