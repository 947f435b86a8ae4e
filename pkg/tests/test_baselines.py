import numpy as np
import pytest
import scipy.fft

from conftest import random_graph
from gwac.baselines import (binary_baseline, direct_dct, direct_gfb, direct_lra, truncated_svd)
from gwac.codec import encode_topology
from gwac.filterbank import analyze, design_biorthogonal, harary_decompose
from gwac.graph import binary_adjacency, sym_normalized_laplacian, weighted_adjacency


def rel_fro(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


@pytest.fixture
def W(rng):
    return weighted_adjacency(random_graph(rng, 24, 0.3)).toarray()


def test_dct_near_lossless(W):
    res = direct_dct(W, 1.0, 1e-8)
    assert rel_fro(res.reconstructed, W) < 1e-6
    np.testing.assert_array_equal(res.reconstructed, res.reconstructed.T)
    assert res.bytes > 0


def test_dct_constant_matrix_is_dc_only():
    C = scipy.fft.dct(np.full((8, 8), 0.7), type=2, norm="ortho", axis=0)
    assert np.abs(C[1:]).max() < 1e-12
    res = direct_dct(np.full((8, 8), 0.7), 8 / 64, 1e-6)
    assert rel_fro(res.reconstructed, np.full((8, 8), 0.7)) < 1e-5


def test_dct_localizes_to_nonzero_columns(rng):
    W = np.zeros((16, 16))
    W[3, 11] = W[11, 3] = 1.3
    C = scipy.fft.dct(W, type=2, norm="ortho", axis=0)
    cols = np.flatnonzero(np.abs(C).sum(axis=0) > 0)
    np.testing.assert_array_equal(cols, [3, 11])
    res = direct_dct(W, 0.05, 1e-6)
    # only the two source columns and rows can carry energy after symmetrization
    mask = np.zeros_like(W, bool)
    mask[:, [3, 11]] = mask[[3, 11], :] = True
    assert np.abs(res.reconstructed[~mask]).max() < 1e-12


def test_lra_rank_one():
    u = np.linspace(0.1, 1.0, 10)
    W = np.outer(u, u)
    res = direct_lra(W, 1, 0.01)
    U, s, V = truncated_svd(W, 1)
    exact = (U * s) @ V.T
    np.testing.assert_allclose(exact, W, atol=1e-12)
    assert 0 < np.abs(res.reconstructed - W).max() < 0.05


def test_lra_full_rank_fine_step(W):
    res = direct_lra(W, len(W), 1e-8)
    assert rel_fro(res.reconstructed, W) < 1e-6


def test_lra_eckart_young(W):
    sig = np.linalg.svd(W, compute_uv=False)
    for r in (1, 3, 10, 20):
        U, s, V = truncated_svd(W, r)
        err = np.linalg.norm(W - (U * s) @ V.T)
        assert err == pytest.approx(np.sqrt(np.sum(sig[r:] ** 2)), abs=1e-8)


def test_lra_rejects_bad_rank(W):
    with pytest.raises(ValueError):
        direct_lra(W, 0)


def test_gfb_near_lossless(rng):
    g = random_graph(rng, 24, 0.3)
    W = weighted_adjacency(g).toarray()
    assert rel_fro(direct_gfb(W, g, rho=1.0, step=1e-8).reconstructed, W) < 1e-6


def test_gfb_coefficient_count(rng):
    g = random_graph(rng, 24, 0.3)
    A = binary_adjacency(g)
    sub = analyze(sym_normalized_laplacian(A), harary_decompose(A, 2), design_biorthogonal(8),
                  weighted_adjacency(g).toarray())
    assert sub.flat().size == 24 * 24


def test_gfb_bytes_grow_with_rho(rng):
    g = random_graph(rng, 40, 0.2)
    W = weighted_adjacency(g).toarray()
    sizes = [direct_gfb(W, g, rho=r).bytes for r in (0.02, 0.1, 0.3, 0.6, 1.0)]
    assert all(a <= b + 300 for a, b in zip(sizes, sizes[1:]))


def test_binary_baseline(rng):
    g = random_graph(rng, 20, 0.3, weighted=False)
    res = binary_baseline(g)
    np.testing.assert_array_equal(res.reconstructed, weighted_adjacency(g).toarray())
    assert res.bytes == len(encode_topology(g.edges, g.n))
    h = random_graph(rng, 20, 0.3)
    assert binary_baseline(h).bytes == len(encode_topology(h.edges, h.n))
