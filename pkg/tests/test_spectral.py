from __future__ import annotations

import warnings

import numpy as np
import pytest

from netreg import Graph, ase, block_ase, procrustes_align, sample_grdpg, three_block_model
from netreg.errors import ConfigurationError, DegenerateGraphError
from netreg.spectral import AmbiguousCutoffWarning


def _rotation(rng, k):
    q, _ = np.linalg.qr(rng.normal(size=(k, k)))
    return q


def _latents(rng, n, p, q):
    """Positive and negative parts with orthogonal column spaces and distinct scales."""
    M = rng.normal(size=(n, p + q))
    Qm, _ = np.linalg.qr(M)
    scales = np.linspace(3.0, 1.0, p + q) * np.sqrt(n)
    X = Qm * scales
    return X[:, :p], X[:, p:]


@pytest.mark.parametrize("p,q", [(2, 0), (3, 0), (2, 1), (1, 2)])
def test_noiseless_embedding_recovers_latents(p, q):
    rng = np.random.default_rng(10 * p + q)
    n, rho = 60, 0.3
    chi, zeta = _latents(rng, n, p, q)
    # a rotation inside each signature block leaves the probabilities unchanged
    R = np.zeros((p + q, p + q))
    R[:p, :p] = _rotation(rng, p)
    if q:
        R[p:, p:] = _rotation(rng, q)
    truth = np.hstack([chi, zeta]) @ R
    P = rho * (chi @ chi.T - zeta @ zeta.T)
    emb = ase(P, p + q, rho_hat=rho)
    assert np.sum(emb.eigvals > 0) == p and np.sum(emb.eigvals < 0) == q
    np.testing.assert_allclose(emb.reconstruction(), P, atol=1e-9 * np.abs(P).max())
    al = procrustes_align(emb, truth)
    assert al.residual < 1e-8 * np.linalg.norm(truth)
    assert not al.rank_deficient
    np.testing.assert_allclose(al.Q @ al.Q.T, np.eye(p + q), atol=1e-12)


def test_eigenvalue_order_and_sign_convention():
    rng = np.random.default_rng(1)
    chi, zeta = _latents(rng, 40, 1, 1)
    emb = ase(chi @ chi.T - 16.0 * zeta @ zeta.T, 2, rho_hat=1.0)
    assert emb.eigvals[0] < 0 < emb.eigvals[1]
    assert abs(emb.eigvals[0]) >= abs(emb.eigvals[1])
    for j in range(2):
        col = emb.Zhat[:, j]
        assert col[np.argmax(np.abs(col))] > 0


def test_graph_input_uses_density_and_is_deterministic():
    s = sample_grdpg(three_block_model(), 400, seed=2)
    e1 = ase(s.graph, 2)
    e2 = ase(s.graph, 2)
    assert np.array_equal(e1.Zhat, e2.Zhat)
    rho = s.graph.n_edges / (400 * 399 / 2)
    assert e1.rho_hat == pytest.approx(rho, rel=1e-14)
    # large-n path (partial eigensolver) agrees with the dense one
    A = s.graph.dense().astype(float)
    vals = np.linalg.eigvalsh(A)
    top = vals[np.argsort(-np.abs(vals))[:2]]
    np.testing.assert_allclose(np.sort(e1.eigvals), np.sort(top), rtol=1e-10)


def test_estimated_embedding_close_to_truth():
    s = sample_grdpg(three_block_model(), 1500, seed=3)
    d = sum(three_block_model().signature)
    emb = ase(s.graph, d)
    al = procrustes_align(emb, s.truth["Z"])
    rel = al.residual / np.linalg.norm(s.truth["Z"])
    assert rel < 0.1


def test_ambiguous_cutoff_warns():
    P = np.diag([3.0, 2.0, 2.0, 1.0])
    with pytest.warns(AmbiguousCutoffWarning):
        emb = ase(P, 2, rho_hat=1.0)
    assert emb.ambiguous
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert not ase(P, 1, rho_hat=1.0).ambiguous


def test_invalid_inputs():
    with pytest.raises(ConfigurationError):
        ase(np.ones((3, 4)), 1, rho_hat=1.0)
    with pytest.raises(ConfigurationError):
        ase(np.eye(3), 0, rho_hat=1.0)
    with pytest.raises(ConfigurationError):
        ase(np.eye(3), 1)
    with pytest.raises(DegenerateGraphError):
        ase(Graph.empty(4), 1)
    with pytest.raises(ConfigurationError):
        procrustes_align(np.ones((3, 2)), np.ones((3, 3)))


def test_procrustes_flags_rank_deficiency():
    a = np.zeros((5, 2))
    a[:, 0] = 1.0
    assert procrustes_align(a, a).rank_deficient


def test_block_embedding_layout():
    s = sample_grdpg(three_block_model(), 600, seed=4)
    labels = s.truth["blocks"]
    emb = block_ase(s.graph, labels, 1)
    assert emb.Zhat.shape == (600, 3)
    for b in range(3):
        nodes = np.flatnonzero(labels == b)
        sub = s.graph.induced(nodes)
        single = ase(sub, 1)
        np.testing.assert_allclose(emb.Zhat[nodes, b], single.Zhat[:, 0], atol=1e-12)
        others = [c for c in range(3) if c != b]
        assert np.all(emb.Zhat[np.ix_(nodes, others)] == 0.0)
        assert emb.rho_hat[b] == pytest.approx(single.rho_hat)
    with pytest.raises(DegenerateGraphError):
        block_ase(s.graph, np.where(np.arange(600) == 0, 9, labels), 1)
