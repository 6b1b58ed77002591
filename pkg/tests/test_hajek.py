from __future__ import annotations

import numpy as np
import pytest

from netreg import Graph
from netreg.errors import CapabilityError
from netreg.motifs import (
    count_local, cycle, hajek_projection, k_star, merge_motifs, rooted_k_star, supports_kernel, weighted_projection,
)

import oracles

KERNELS = [
    ("edge", k_star(1)), ("two_star", k_star(2)), ("three_star", k_star(3)), ("triangle", cycle(3)),
    ("rooted_1", rooted_k_star(1)), ("rooted_2", rooted_k_star(2)), ("rooted_3", rooted_k_star(3)),
]


def _graph(seed, n=8, p=0.55):
    rng = np.random.default_rng(seed)
    A = oracles.random_adjacency(rng, n, p)
    return A, Graph.from_adjacency(A), oracles.density(A), rng


@pytest.mark.parametrize("label,m", KERNELS)
def test_weighted_projection_matches_subset_enumeration(label, m):
    for seed in range(3):
        A, g, rho, rng = _graph(seed)
        x = rng.normal(size=A.shape[0])
        got = weighted_projection(g, m, x, rho)
        want = oracles.subset_projection(A, m.edges, m.r, x, rho, rooted=m.rooted)
        np.testing.assert_allclose(got, want, rtol=1e-11, atol=1e-12)


@pytest.mark.parametrize("label,m", KERNELS)
def test_projection_average_is_weighted_frequency(label, m):
    A, g, rho, rng = _graph(9, n=30, p=0.3)
    x = rng.normal(size=30)
    q = count_local(g, m, rho).values
    assert weighted_projection(g, m, x, rho).mean() == pytest.approx(np.mean(x * q), rel=1e-12)


def test_unsupported_kernel():
    assert not supports_kernel(cycle(4))
    _, g, rho, _ = _graph(0)
    with pytest.raises(CapabilityError):
        weighted_projection(g, cycle(4), np.ones(g.n), rho)
    with pytest.raises(CapabilityError):
        hajek_projection(g, np.ones((g.n, 1)), np.ones(g.n), [cycle(4)], rho)


@pytest.mark.parametrize("mj,mk", [
    (k_star(2), k_star(2)), (k_star(1), k_star(2)), (rooted_k_star(2), rooted_k_star(2)), (cycle(3), k_star(1)),
])
def test_motif_by_motif_block(mj, mk):
    A, g, rho, rng = _graph(3)
    n = A.shape[0]
    X = np.ones((n, 1))
    Y = rng.normal(size=n)
    H = hajek_projection(g, X, Y, [mj, mk], rho)
    dec = merge_motifs(mj, mk, "leading_only")
    want = np.zeros(n)
    for M, w in dec.leading:
        # with unit weights an unrooted frequency is its own projection
        want += w * oracles.subset_projection(A, M.edges, M.r, np.ones(n), rho, rooted=M.rooted)
    want -= want.mean()
    np.testing.assert_allclose(H.G_lambda[:, 1, 2], want, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(H.G_lambda[:, 2, 1], want, rtol=1e-10, atol=1e-12)
    assert H.D_lambda[1, 2] == mj.r + mk.r - 1
    assert H.alpha_lambda[1, 2] == mj.s + mk.s


def test_mixed_and_cross_moment_blocks():
    A, g, rho, rng = _graph(4)
    n = A.shape[0]
    X = np.column_stack([np.ones(n), rng.normal(size=n)])
    Y = rng.normal(size=n)
    m = k_star(2)
    H = hajek_projection(g, X, Y, [m], rho)
    xz = oracles.subset_projection(A, m.edges, m.r, X[:, 1], rho)
    np.testing.assert_allclose(H.G_lambda[:, 1, 2], xz - xz.mean(), atol=1e-12)
    yz = oracles.subset_projection(A, m.edges, m.r, Y, rho)
    np.testing.assert_allclose(H.G_gamma[:, 2], yz - yz.mean(), atol=1e-12)
    np.testing.assert_allclose(H.G_gamma[:, 1], X[:, 1] * Y - np.mean(X[:, 1] * Y), atol=1e-12)
    np.testing.assert_allclose(H.G_lambda[:, 1, 1], X[:, 1] ** 2 - np.mean(X[:, 1] ** 2), atol=1e-12)
    assert H.D_lambda[1, 2] == 3 and H.alpha_lambda[1, 2] == 2
    assert H.D_gamma[2] == 3 and H.alpha_gamma[2] == 2
    assert H.D_lambda[0, 1] == 1 and H.alpha_lambda[0, 1] == 0
    d = A.sum(1)
    np.testing.assert_allclose(H.G_rho, d / ((n - 1) * rho) - 1 - np.mean(d / ((n - 1) * rho) - 1), atol=1e-12)


def test_array_columns_are_treated_as_node_level():
    A, g, rho, rng = _graph(6)
    n = A.shape[0]
    z = rng.normal(size=n)
    Y = rng.normal(size=n)
    H = hajek_projection(g, np.ones((n, 1)), Y, [z], rho)
    assert H.D_lambda[1, 1] == 1 and H.alpha_gamma[1] == 0
    np.testing.assert_allclose(H.G_gamma[:, 1], z * Y - np.mean(z * Y), atol=1e-12)


def test_stacked_layout_and_covariance():
    A, g, rho, rng = _graph(7, n=20, p=0.4)
    n = 20
    H = hajek_projection(g, np.ones((n, 1)), rng.normal(size=n), [k_star(1), rooted_k_star(2)], rho)
    G, D, alpha = H.stacked()
    P = 3
    assert G.shape == (n, P * P + P + 1)
    assert D[-1] == 2 and alpha[-1] == 0
    np.testing.assert_allclose(G.mean(0), 0.0, atol=1e-12)
    DG = G * D
    brute = sum(np.outer(DG[i], DG[i]) for i in range(n)) / n ** 2
    np.testing.assert_allclose(H.covariance(), brute, atol=1e-14)
