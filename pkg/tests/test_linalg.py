"""Dense kernels: eigendecomposition, polar factor, QR, projection, alignment."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from otsmlab import (
    InfeasibleProjection,
    RankDeficient,
    op_norm,
    polar_factor,
    procrustes_align,
    project_box_hyperplane,
    qr_orthonormalize,
    sym_eig,
)
from otsmlab.blockspec import BlockSpec, StiefelBlocks

from conftest import projection_oracle, random_stiefel, rotate_frames


# ---------------------------------------------------------------------------
# sym_eig


def test_sym_eig_reconstructs_and_orders(rng):
    for n in (1, 2, 5, 17):
        a = rng.standard_normal((n, n))
        a = (a + a.T) / 2
        eig = sym_eig(a)
        assert np.all(np.diff(eig.values) <= 1e-12)
        recon = eig.vectors @ np.diag(eig.values) @ eig.vectors.T
        assert np.linalg.norm(recon - a) <= 1e-9 * max(1.0, np.linalg.norm(a))
        gram = eig.vectors.T @ eig.vectors
        assert np.linalg.norm(gram - np.eye(n)) <= 1e-10


def test_sym_eig_sign_convention():
    # largest-magnitude component of each eigenvector is positive
    a = np.array([[0.0, 1.0], [1.0, 0.0]])
    eig = sym_eig(a)
    assert eig.values == pytest.approx([1.0, -1.0])
    s = 1 / np.sqrt(2)
    np.testing.assert_allclose(eig.vectors[:, 0], [s, s], atol=1e-14)
    np.testing.assert_allclose(eig.vectors[:, 1], [s, -s], atol=1e-14)


def test_sym_eig_deterministic(rng):
    a = rng.standard_normal((8, 8))
    a = a + a.T
    first = sym_eig(a.copy())
    second = sym_eig(a.copy())
    assert np.array_equal(first.values, second.values)
    assert np.array_equal(first.vectors, second.vectors)


def test_op_norm_matches_spectrum(rng):
    a = rng.standard_normal((6, 6))
    a = (a + a.T) / 2
    assert op_norm(a) == pytest.approx(np.max(np.abs(np.linalg.eigvalsh(a))))
    assert op_norm(np.zeros((3, 3))) == 0.0


# ---------------------------------------------------------------------------
# polar factor


def test_polar_factor_against_svd(rng):
    for d, r in ((4, 2), (6, 6), (5, 1)):
        a = rng.standard_normal((d, r))
        u, _, vt = np.linalg.svd(a, full_matrices=False)
        q = polar_factor(a)
        assert np.linalg.norm(q - u @ vt) <= 1e-10
        assert np.linalg.norm(q.T @ q - np.eye(r)) <= 1e-12


def test_polar_factor_maximizes_trace(rng):
    # tr(Q^T A) over orthonormal Q peaks at the polar factor
    a = rng.standard_normal((5, 3))
    q = polar_factor(a)
    best = float(np.trace(q.T @ a))
    for trial in range(25):
        other = polar_factor(rng.standard_normal((5, 3)))
        assert float(np.trace(other.T @ a)) <= best + 1e-10


def test_polar_factor_rank_deficient_completion():
    a = np.zeros((4, 2))
    a[0, 0] = 3.0  # rank 1, second column must be completed
    q, deficient = polar_factor(a, return_deficient=True)
    assert deficient
    assert np.linalg.norm(q.T @ q - np.eye(2)) <= 1e-12
    np.testing.assert_allclose(q[:, 0], [1, 0, 0, 0], atol=1e-14)

    q2, deficient2 = polar_factor(np.eye(3), return_deficient=True)
    assert not deficient2
    np.testing.assert_allclose(q2, np.eye(3), atol=1e-14)


def test_polar_factor_orthonormal_input_fixed_point(rng):
    a = rng.standard_normal((6, 3))
    q = np.linalg.qr(a)[0]
    np.testing.assert_allclose(polar_factor(q), q, atol=1e-12)


# ---------------------------------------------------------------------------
# QR orthonormalization


def test_qr_orthonormalize_positive_diagonal(rng):
    a = rng.standard_normal((7, 4))
    q = qr_orthonormalize(a)
    r = q.T @ a
    assert np.all(np.diag(r) > 0)
    assert np.linalg.norm(q.T @ q - np.eye(4)) <= 1e-12
    # same column span
    proj = q @ q.T
    assert np.linalg.norm(proj @ a - a) <= 1e-10 * np.linalg.norm(a)


def test_qr_orthonormalize_scale_invariant(rng):
    a = rng.standard_normal((6, 3))
    q1 = qr_orthonormalize(a)
    q2 = qr_orthonormalize(1e6 * a)
    assert np.linalg.norm(q1 - q2) <= 1e-12


def test_qr_orthonormalize_rejects_rank_deficiency():
    a = np.ones((5, 2))  # two identical columns
    with pytest.raises(RankDeficient):
        qr_orthonormalize(a)


# ---------------------------------------------------------------------------
# box-and-hyperplane projection


def test_projection_matches_oracle_small(rng):
    worst = 0.0
    for trial in range(300):
        n = int(rng.integers(1, 7))
        v = rng.standard_normal(n) * float(rng.choice([0.1, 1.0, 10.0]))
        hi = float(rng.uniform(0.2, 2.0))
        with_lo = bool(rng.integers(0, 2))
        lo = float(-rng.uniform(0.2, 2.0)) if with_lo else None
        lo_eff = lo if with_lo else -np.inf
        total = float(rng.uniform(n * max(lo_eff, -3.0), n * hi))
        got = project_box_hyperplane(v, hi, total, lo=lo)
        want = projection_oracle(v, hi, total, lo=lo)
        worst = max(worst, float(np.max(np.abs(got - want))))
    assert worst <= 1e-10


def test_projection_feasibility_edges():
    v = np.array([5.0, -3.0, 0.5])
    x = project_box_hyperplane(v, 1.0, 3.0)  # only reachable with all at hi
    np.testing.assert_allclose(x, [1.0, 1.0, 1.0], atol=1e-12)
    x = project_box_hyperplane(v, 1.0, -6.0, lo=-2.0)
    np.testing.assert_allclose(x, [-2.0, -2.0, -2.0], atol=1e-12)


def test_projection_sum_exact(rng):
    for trial in range(50):
        n = int(rng.integers(1, 30))
        v = rng.standard_normal(n) * 5
        x = project_box_hyperplane(v, 1.0, min(n * 1.0, 3.0))
        assert abs(float(np.sum(x)) - min(n * 1.0, 3.0)) <= 1e-12
        assert np.all(x <= 1.0 + 1e-12)


def test_projection_infeasible():
    with pytest.raises(InfeasibleProjection):
        project_box_hyperplane(np.ones(3), 1.0, 4.0)
    with pytest.raises(InfeasibleProjection):
        project_box_hyperplane(np.ones(3), 1.0, -7.0, lo=-2.0)
    with pytest.raises(InfeasibleProjection):
        project_box_hyperplane(np.ones(3), 0.0, 0.0, lo=1.0)


def test_projection_idempotent_on_feasible_points(rng):
    v = np.array([0.2, 0.9, 0.4])
    x = project_box_hyperplane(v, 1.0, float(v.sum()), lo=0.0)
    np.testing.assert_allclose(x, v, atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(-20, 20), min_size=1, max_size=6),
    st.floats(0.1, 3.0),
    st.data(),
)
def test_projection_oracle_property(values, hi, data):
    v = np.asarray(values)
    n = v.size
    total = data.draw(st.floats(-3.0 * n, hi * n))
    x = project_box_hyperplane(v, hi, total)
    want = projection_oracle(v, hi, total)
    assert float(np.max(np.abs(x - want))) <= 1e-10
    assert abs(float(np.sum(x)) - total) <= 1e-12


# ---------------------------------------------------------------------------
# Procrustes alignment


def test_procrustes_align_recovers_common_rotation(rng):
    spec = BlockSpec(dims=(5, 4, 6), r=3)
    frames = random_stiefel(spec, 11)
    rotated = rotate_frames(frames, 12)
    result = procrustes_align(rotated, frames)
    assert result.max_residual <= 1e-10
    assert not result.rank_deficient
    # rotation undoes the applied one
    recon = StiefelBlocks(spec, [b @ result.rotation for b in rotated])
    for i in range(spec.m):
        assert np.linalg.norm(recon[i] - frames[i]) <= 1e-10


def test_procrustes_align_residual_is_positive_for_mismatch(rng):
    spec = BlockSpec(dims=(5, 5), r=2)
    a = random_stiefel(spec, 1)
    b = random_stiefel(spec, 2)
    result = procrustes_align(a, b)
    assert result.max_residual > 1e-3
    assert result.residual_per_block.shape == (2,)
