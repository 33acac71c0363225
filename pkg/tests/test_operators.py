import numpy as np
import pytest

from oqrw import RecordModel, WalkModel, devectorize, kraus_from_unitary, validate_kraus, vectorize
from oqrw import bundled
from oqrw.errors import StructuralError, ValidationError
from oqrw.operators import check_density_matrix, normalization_defect, trace_norm

from conftest import random_kraus


def test_bc_pair_is_normalized():
    B, C = bundled.bc_pair()
    rep = validate_kraus([B, C])
    assert rep.valid
    assert rep.residual < 1e-15


def test_printed_2d_family_fails_with_three_sixteenths():
    ops = bundled.oqrw_2d_printed_operators()
    rep = validate_kraus(ops)
    assert not rep.valid
    assert abs(rep.residual - 3 / 16) < 1e-12
    defect = normalization_defect(ops)
    assert np.unravel_index(np.argmax(np.abs(defect)), defect.shape) == (0, 0)


def test_corrected_2d_family_is_normalized():
    assert validate_kraus(bundled.oqrw_2d().kraus).residual < 1e-15


def test_single_unitary_is_valid():
    U = np.array([[0, 1], [1, 0]], dtype=complex)
    assert validate_kraus([U]).residual < 1e-15


def test_walk_model_rejects_wrong_count():
    B, C = bundled.bc_pair()
    with pytest.raises(StructuralError):
        WalkModel(2, [C, B])


def test_walk_model_rejects_unnormalized():
    with pytest.raises(ValidationError) as exc:
        WalkModel(2, bundled.oqrw_2d_printed_operators())
    assert abs(exc.value.residual - 3 / 16) < 1e-12


def test_mixed_shapes_rejected():
    with pytest.raises(StructuralError):
        validate_kraus([np.eye(2), np.eye(3)])


def test_steps_layout():
    m = bundled.oqrw_2d()
    assert m.steps.tolist() == [[1, 0], [0, 1], [-1, 0], [0, -1]]
    rec = bundled.bc_record()
    assert rec.steps.tolist() == [[1, 0], [0, 1]]


def test_record_as_walk_zero_pads():
    rec = bundled.spontaneous_emission()
    w = rec.as_walk()
    assert w.lattice_dim == 2
    assert np.abs(w.kraus[:2] - rec.kraus).max() == 0
    assert np.abs(w.kraus[2:]).max() == 0


def test_vectorize_round_trip(rng):
    X = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    assert np.array_equal(devectorize(vectorize(X)), X)


def test_vectorize_column_stacking():
    X = np.arange(4).reshape(2, 2)
    assert vectorize(X).tolist() == [0, 2, 1, 3]


def test_kraus_from_identity_unitary():
    rec = kraus_from_unitary(np.eye(4), 2, 2)
    assert np.abs(rec.kraus[0] - np.eye(2)).max() == 0
    assert np.abs(rec.kraus[1]).max() == 0


def test_spontaneous_emission_operators():
    h = 1.0
    rec = bundled.spontaneous_emission(h)
    M1 = np.diag([1, np.cos(h)])
    M2 = np.array([[0, np.sin(h)], [0, 0]])
    assert np.abs(rec.kraus[0] - M1).max() < 1e-14
    assert np.abs(rec.kraus[1] - M2).max() < 1e-14


def test_kraus_from_non_unitary_fails():
    U = np.eye(4)
    U[0, 0] = 2
    with pytest.raises(ValidationError):
        kraus_from_unitary(U, 2, 2)


def test_kraus_from_unitary_random_is_normalized(rng):
    g = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    U, _ = np.linalg.qr(g)
    rec = kraus_from_unitary(U, 2, 3)
    assert rec.n_jumps == 3
    assert validate_kraus(rec.kraus).residual < 1e-12


def test_density_matrix_checks():
    check_density_matrix(np.eye(2) / 2)
    with pytest.raises(ValidationError):
        check_density_matrix(np.diag([1.5, -0.5]))
    with pytest.raises(ValidationError):
        check_density_matrix(np.eye(2))


def test_trace_norm():
    assert abs(trace_norm(np.diag([0.5, -0.5])) - 1.0) < 1e-15


def test_random_kraus_helper(rng):
    ops = random_kraus(rng, 3, 4)
    assert validate_kraus(ops).residual < 1e-12
    assert RecordModel(ops).n_jumps == 4
