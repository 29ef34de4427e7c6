"""Backend parity: the compiled core and the pure fallback must agree."""

import numpy as np
import pytest

from photoncloud import kernels


def haar(m, rng):
    z = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    q, r = np.linalg.qr(z)
    return q * (np.diagonal(r) / np.abs(np.diagonal(r))).conj()


@pytest.fixture(scope="module")
def impls():
    return kernels.backends()


def test_backend_selected():
    assert kernels.implementation() in ("pure", "compiled")


def test_permanent_parity(impls):
    rng = np.random.default_rng(0)
    for n in range(0, 8):
        a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        vals = [impl.permanent(a) for impl in impls.values()]
        for v in vals[1:]:
            assert v == pytest.approx(vals[0], rel=1e-12, abs=1e-12)


def test_fock_distribution_parity(impls):
    rng = np.random.default_rng(1)
    u = haar(5, rng)
    occ = np.array([1, 1, 0, 1, 0])
    results = [impl.fock_distribution(u, occ) for impl in impls.values()]
    outs0, probs0 = results[0]
    for outs, probs in results[1:]:
        np.testing.assert_array_equal(outs, outs0)
        np.testing.assert_allclose(probs, probs0, rtol=1e-12, atol=1e-15)


def test_mesh_parity(impls):
    rng = np.random.default_rng(2)
    m = 6
    # chain of MZIs touching every neighboring pair twice
    unit_p = np.array([0, 2, 4, 1, 3, 0, 2, 4], dtype=np.int64)
    n_units = len(unit_p)
    theta_idx = np.arange(n_units, dtype=np.int64)
    phi_idx = np.array([n_units + u if u % 2 == 0 else -1 for u in range(n_units)], dtype=np.int64)
    n_shifters = 2 * n_units
    eps = rng.uniform(-0.05, 0.05, size=2 * n_units)
    t1 = np.sqrt(0.5 + eps[0::2])
    r1 = np.sqrt(0.5 - eps[0::2])
    t2 = np.sqrt(0.5 + eps[1::2])
    r2 = np.sqrt(0.5 - eps[1::2])
    out_mode = np.array([0, 3], dtype=np.int64)
    out_idx = np.array([n_shifters - 2, n_shifters - 1], dtype=np.int64)
    phases = rng.uniform(0, 2 * np.pi, size=n_shifters)

    mats = [
        impl.mesh_matrix(m, unit_p, theta_idx, phi_idx, t1, r1, t2, r2, out_mode, out_idx, phases)
        for impl in impls.values()
    ]
    for mat in mats[1:]:
        np.testing.assert_allclose(mat, mats[0], atol=1e-13)
    # unitarity regardless of coupler errors
    np.testing.assert_allclose(mats[0] @ mats[0].conj().T, np.eye(m), atol=1e-12)

    batch = rng.uniform(0, 2 * np.pi, size=(17, n_shifters))
    in_modes = rng.integers(0, m, size=17)
    cols = [
        impl.mesh_columns_batch(m, unit_p, theta_idx, phi_idx, t1, r1, t2, r2, batch, in_modes)
        for impl in impls.values()
    ]
    for c in cols[1:]:
        np.testing.assert_allclose(c, cols[0], atol=1e-13)
    # column probabilities from the batched path match the full matrix
    full = impls["pure"].mesh_matrix(
        m, unit_p, theta_idx, phi_idx, t1, r1, t2, r2,
        np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64), batch[0]
    )
    np.testing.assert_allclose(cols[0][0], np.abs(full[:, in_modes[0]]) ** 2, atol=1e-12)
