from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import integrate, optimize

from netreg import (
    AffineProductKernel, ConstantKernel, FunctionKernel, Graph, GraphonSpec, GrdpgLinearDGP, GrdpgSpec,
    InverseSumKernel, LinearGraphonDGP, NeighborhoodAverageDGP, PowerLaw, sample_graphon, sample_grdpg,
    three_block_model,
)
from netreg.errors import ConfigurationError
from netreg.rng import child_seed, substream


# ---------------------------------------------------------------------------
# Graph container
# ---------------------------------------------------------------------------

def test_graph_round_trip_and_queries():
    rng = np.random.default_rng(0)
    upper = np.triu(rng.random((12, 12)) < 0.4, 1)
    A = (upper | upper.T).astype(int)
    g = Graph.from_adjacency(A)
    assert np.array_equal(g.dense(), A)
    assert np.array_equal(g.degree, A.sum(1))
    assert g.n_edges == A.sum() // 2
    for i in range(12):
        assert set(g.neighbors(i).tolist()) == set(np.flatnonzero(A[i]).tolist())
        for j in range(12):
            assert g.has_edge(i, j) == bool(A[i, j])
    perm = rng.permutation(12)
    gp = g.permute(perm)
    # node i of the original is node perm[i] of the relabelled graph
    inv = np.argsort(perm)
    assert np.array_equal(gp.dense(), A[np.ix_(inv, inv)])
    sub = g.induced([0, 3, 5])
    assert np.array_equal(sub.dense(), A[np.ix_([0, 3, 5], [0, 3, 5])])


def test_graph_rejects_bad_edges():
    with pytest.raises(Exception):
        Graph(3, np.array([[0, 0]]))
    with pytest.raises(Exception):
        Graph(3, np.array([[0, 5]]))
    with pytest.raises(Exception):
        Graph.from_adjacency(np.array([[0, 1], [0, 0]]))


def test_complete_and_empty():
    assert Graph.complete(5).n_edges == 10
    assert Graph.empty(5).n_edges == 0


# ---------------------------------------------------------------------------
# random streams
# ---------------------------------------------------------------------------

def test_substreams_are_deterministic_and_distinct():
    a = substream(1, "edges", 3).random(5)
    assert np.array_equal(a, substream(1, "edges", 3).random(5))
    assert not np.array_equal(a, substream(1, "edges", 4).random(5))
    assert not np.array_equal(a, substream(1, "noise", 3).random(5))
    assert not np.array_equal(a, substream(2, "edges", 3).random(5))
    assert child_seed(1, "mc", 0) != child_seed(1, "mc", 1)


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

def _quad_degree(kernel, x, rho):
    f = lambda v: min(rho * float(kernel(x, v)), 1.0)
    # locate the truncation kink on a fine grid and refine it
    grid = np.linspace(0.0, 1.0, 2001)
    over = np.array([rho * float(kernel(x, v)) >= 1.0 for v in grid])
    pts = []
    for i in np.flatnonzero(over[1:] != over[:-1]):
        pts.append(optimize.brentq(lambda v: rho * float(kernel(x, v)) - 1.0, grid[i], grid[i + 1], xtol=1e-15))
    return integrate.quad(f, 0.0, 1.0, points=pts or None, limit=200, epsabs=1e-13)[0]


@pytest.mark.parametrize("kernel", [InverseSumKernel(), AffineProductKernel(), AffineProductKernel(1.0, 6.0),
                                    ConstantKernel(0.5)])
@pytest.mark.parametrize("rho", [0.05, 0.3, 0.9])
def test_truncated_degree_matches_quadrature(kernel, rho):
    xs = np.array([0.001, 0.02, 0.1, 0.37, 0.8, 0.999])
    got = kernel.truncated_degree(xs, rho)
    want = np.array([_quad_degree(kernel, x, rho) for x in xs])
    np.testing.assert_allclose(got, want, rtol=1e-7, atol=1e-9)


def test_generic_numeric_degree_matches_closed_form():
    k = InverseSumKernel()
    f = FunctionKernel(lambda u, v: 1.0 / (u + v))
    xs = np.linspace(0.2, 0.9, 5)
    np.testing.assert_allclose(f.truncated_degree(xs, 0.1), k.truncated_degree(xs, 0.1), rtol=1e-9)


def test_neighbor_mean_constant_kernel_is_uniform_mean():
    k = ConstantKernel(0.5)
    np.testing.assert_allclose(k.neighbor_mean(np.array([0.1, 0.7]), 0.3, lambda v: v), 0.5, atol=1e-12)


def test_density_matches_double_integral():
    spec = GraphonSpec(AffineProductKernel(), 0.2)
    want = integrate.dblquad(lambda v, u: min(0.2 * (1 + 2 * u * v), 1.0), 0, 1, 0, 1)[0]
    assert spec.density(0.2) == pytest.approx(want, rel=1e-9)


def test_invalid_kernels_and_sparsity():
    with pytest.raises(ConfigurationError):
        PowerLaw(0.5)
    with pytest.raises(ConfigurationError):
        GraphonSpec(ConstantKernel(), 1.5).rho(10)
    with pytest.raises(ConfigurationError):
        sample_graphon(GraphonSpec(FunctionKernel(lambda u, v: u - v + 0 * v), 0.5), 10)
    with pytest.raises(ConfigurationError):
        sample_graphon(GraphonSpec(FunctionKernel(lambda u, v: 5.0 + 0 * u * v, bound=2.0), 0.1), 20)


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------

def test_erdos_renyi_degree_and_density():
    p = 0.1
    s = sample_graphon(GraphonSpec(ConstantKernel(1.0), p), 2000, seed=3)
    n = 2000
    dens = s.graph.n_edges / math.comb(n, 2)
    sd = math.sqrt(p * (1 - p) / math.comb(n, 2))
    assert abs(dens - p) < 5 * sd
    assert abs(s.graph.degree.var() - (n - 1) * p * (1 - p)) < 0.15 * (n - 1) * p * (1 - p)


def test_graphon_density_close_to_population():
    spec = GraphonSpec(InverseSumKernel(), PowerLaw(-0.4))
    n = 1500
    s = sample_graphon(spec, n, seed=1)
    want = spec.density(spec.rho(n))
    got = s.graph.n_edges / math.comb(n, 2)
    assert got == pytest.approx(want, rel=0.08)


def test_sampling_is_deterministic_and_prefix_stable():
    spec = GraphonSpec(AffineProductKernel(), 0.2)
    a = sample_graphon(spec, 200, LinearGraphonDGP(), seed=9)
    b = sample_graphon(spec, 200, LinearGraphonDGP(), seed=9)
    assert a.graph == b.graph and np.array_equal(a.Y, b.Y)
    c = sample_graphon(spec, 260, seed=9)
    assert np.array_equal(c.xi[:200], a.xi)
    assert np.array_equal(c.graph.induced(range(200)).dense(), a.graph.dense())
    d = sample_graphon(spec, 200, seed=10)
    assert not np.array_equal(d.xi, a.xi)


def test_linear_dgp_truth_and_columns():
    s = sample_graphon(GraphonSpec(InverseSumKernel(), 0.3), 300, LinearGraphonDGP(), seed=2)
    assert np.all(s.X[:, 0] == 1.0) and s.X.shape == (300, 3)
    beta = s.truth["beta"]
    Z = s.truth["Z"][:, 0]
    resid = s.Y - s.X @ beta[:3] - beta[3] * Z
    assert abs(resid.mean()) < 0.2 and resid.std() == pytest.approx(1.0, abs=0.15)


def test_neighborhood_average_truth_is_conditional_mean():
    spec = GraphonSpec(AffineProductKernel(), 0.2)
    s = sample_graphon(spec, 100, NeighborhoodAverageDGP(), seed=4)
    xi = s.xi[:3]
    for x, z in zip(xi, s.truth["Z"][:3, 0]):
        num = integrate.quad(lambda v: v * (1 + 2 * x * v), 0, 1)[0]
        den = integrate.quad(lambda v: 1 + 2 * x * v, 0, 1)[0]
        assert z == pytest.approx(num / den, rel=1e-9)


def test_block_positions_reproduce_B():
    spec = three_block_model()
    pos, vals = spec.block_positions()
    sgn = np.sign(vals)
    B = (pos * sgn) @ pos.T
    np.testing.assert_allclose(B, np.asarray(spec.B), atol=1e-12)
    assert spec.signature == (int(np.sum(vals > 0)), int(np.sum(vals < 0)))
    assert np.all(np.diff(np.abs(vals)) <= 0)


def test_grdpg_block_frequencies_and_density():
    spec = three_block_model()
    n = 4000
    s = sample_grdpg(spec, n, seed=5)
    freq = np.bincount(s.truth["blocks"], minlength=3) / n
    np.testing.assert_allclose(freq, (0.65, 0.25, 0.10), atol=0.03)
    got = s.graph.n_edges / math.comb(n, 2)
    assert got == pytest.approx(spec.density(1.0), rel=0.02)
    # truth Z reproduces the normalized probabilities
    pos, vals = spec.block_positions()
    Z = s.truth["Z"]
    P = (Z[:5] * np.sign(vals)) @ Z[:5].T
    B = np.asarray(spec.B)[np.ix_(s.truth["blocks"][:5], s.truth["blocks"][:5])]
    np.testing.assert_allclose(P, B / s.truth["density"], rtol=1e-10)


def test_grdpg_general_sampler_and_validation():
    def sampler(rng, n):
        chi = 0.3 + 0.4 * rng.random((n, 1))
        zeta = 0.1 * rng.random((n, 1))
        return chi, zeta

    spec = GrdpgSpec(sampler=sampler, signature=(1, 1))
    s = sample_grdpg(spec, 300, GrdpgLinearDGP(z_coefs=(1.0, 1.0)), seed=0)
    assert s.truth["Z"].shape == (300, 2)
    assert not s.intercept
    with pytest.raises(ConfigurationError):
        GrdpgSpec(sampler=sampler)
    with pytest.raises(ConfigurationError):
        GrdpgSpec(block_probs=(0.5, 0.6), B=((0.5, 0.1), (0.1, 0.5)))
    with pytest.raises(ConfigurationError):
        GrdpgSpec(block_probs=(0.5, 0.5), B=((0.5, 0.1), (0.2, 0.5)))
    with pytest.raises(ConfigurationError):
        sample_grdpg(spec, 30, GrdpgLinearDGP(), seed=0)
