import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from peridyn_fd.errors import ConfigError
from peridyn_fd.grid import (build_grid, cell_average_projection, domain_taper, holder_norm_estimate,
                             holder_seminorm_estimate, l2_inner, l2_norm, read_field_csv, smoothstep,
                             write_field_csv)


def test_1d_nodes_and_stencil():
    g = build_grid(1, 1.0, 0.05, 0.2)
    assert g.shape == (19,)
    np.testing.assert_allclose(g.coords()[:, 0], 0.05 * np.arange(1, 20))
    assert len(g.offsets) == 8
    assert sorted(g.offsets[:, 0]) == [-4, -3, -2, -1, 1, 2, 3, 4]


def test_2d_stencil_within_horizon_and_symmetric():
    g = build_grid(2, 1.0, 0.1 / 1.0001, 0.1)
    assert np.all(np.linalg.norm(g.offsets, axis=1) * g.h <= g.eps * (1 + 1e-12))
    assert len(g.offsets) == 4
    for h, eps in ((0.025, 0.1), (0.02, 0.07), (0.05, 0.2)):
        off = {tuple(k) for k in build_grid(2, 1.0, h, eps).offsets}
        assert off == {tuple(-np.array(k)) for k in off}


@given(st.integers(2, 8), st.integers(1, 3))
def test_neighbour_lists_symmetric(ratio, d):
    g = build_grid(d, 1.0, 0.2 / ratio, 0.2)
    node = tuple(n // 2 for n in g.shape)
    for j in g.neighbor_indices(node):
        if g.is_inside(j):
            assert node in g.neighbor_indices(j)


def test_ghost_neighbours_exist_near_boundary():
    g = build_grid(1, 1.0, 0.05, 0.2)
    nbrs = g.neighbor_indices((0,))
    assert any(not g.is_inside(j) for j in nbrs)
    up = g.pad(np.ones(g.shape + (1,)))
    assert up[0, 0] == 0.0 and up[g.pad_width, 0] == 1.0


@pytest.mark.parametrize("d,ext,h,eps", [(1, 1.0, 0.2, 0.2), (1, 1.0, 0.3, 0.2), (2, 1.0, 0.05, 1.0),
                                          (2, 0.1, 0.01, 0.2), (4, 1.0, 0.1, 0.2)])
def test_invalid_grids(d, ext, h, eps):
    with pytest.raises(ConfigError):
        build_grid(d, ext, h, eps)


def test_taper_values():
    g = build_grid(1, 1.0, 0.05, 0.2)
    w = domain_taper(g)
    x = g.coords()[:, 0]
    assert np.all(w[(x >= 0.2) & (x <= 0.8)] == 1.0)
    assert w[1] == pytest.approx(0.5)  # x = 0.1 = eps/2
    wp = domain_taper(g, padded=True)
    assert np.all(wp[: g.pad_width + 1][:g.pad_width] == 0.0)
    assert smoothstep(0.5) == pytest.approx(0.5)


@given(st.floats(-1.0, 2.0))
def test_smoothstep_range(s):
    assert 0.0 <= smoothstep(s) <= 1.0


def test_cell_average_examples():
    g = build_grid(1, 1.0, 0.05, 0.2)
    const = cell_average_projection(lambda x: np.full(x.shape[:-1] + (2,), 3.5), g)
    assert np.all(const == pytest.approx(3.5))
    lin = cell_average_projection(lambda x: 2.0 * x, g)
    np.testing.assert_allclose(lin, 2.0 * g.coords(), rtol=1e-14)
    sq = cell_average_projection(lambda x: x**2, g)
    assert sq[0, 0] == pytest.approx(0.05**2 + 0.05**2 / 12, rel=1e-13)
    assert sq[0, 0] == pytest.approx(0.0027083333, rel=1e-7)
    with pytest.raises(ConfigError):
        cell_average_projection(lambda x: x, g, order=2)


def test_projection_idempotent_on_piecewise_constants():
    g = build_grid(2, 1.0, 0.05, 0.2)
    rng = np.random.default_rng(3)
    vals = rng.standard_normal(g.shape + (2,))
    idx = lambda x: np.clip(np.rint(x / g.h).astype(int) - 1, 0, np.array(g.shape) - 1)

    def pc(x):
        i = idx(x)
        return vals[i[..., 0], i[..., 1]]

    once = cell_average_projection(pc, g)
    np.testing.assert_allclose(once, vals, rtol=1e-12)


def test_projection_is_l2_contraction():
    g = build_grid(1, 1.0, 0.05, 0.2)
    fine = build_grid(1, 1.0, 0.05 / 50, 0.2)
    rng = np.random.default_rng(11)
    for _ in range(20):
        a, k, p = rng.standard_normal(3), rng.integers(1, 6, 3), rng.uniform(0, 6, 3)
        fn = lambda x: sum(ai * np.sin(ki * np.pi * x + pi) for ai, ki, pi in zip(a, k, p))
        proj = cell_average_projection(fn, g, order=5)
        # fine sampling restricted to the union of coarse cells
        xf = fine.coords()
        inside = (xf[..., 0] > g.h / 2) & (xf[..., 0] < 1 - g.h / 2)
        ref = math.sqrt(np.sum(fine.h * fn(xf)[inside] ** 2))
        assert l2_norm(proj, g) <= ref * (1 + 1e-3)


def test_l2_norm_examples():
    g = build_grid(2, 1.0, 0.05, 0.2)
    assert l2_norm(g.zeros(), g) == 0.0
    ones = np.ones(g.shape + (1,))
    # nodes cover [h/2, 1 - h/2]^d, so the constant field sees (1 - h)^d of the box
    assert l2_norm(ones, g) == pytest.approx(math.sqrt((1 - g.h) ** 2), rel=1e-13)
    rng = np.random.default_rng(0)
    u = rng.standard_normal(g.shape + (2,))
    assert l2_norm(-3.0 * u, g) == pytest.approx(3.0 * l2_norm(u, g))
    assert l2_inner(u, u, g) == pytest.approx(l2_norm(u, g) ** 2)


def test_holder_examples():
    g = build_grid(1, 1.0, 0.01, 0.05)
    x = g.coords()
    assert holder_seminorm_estimate(np.ones(g.shape + (1,)), 0.5, g) == 0.0
    assert holder_seminorm_estimate(x, 1.0, g) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ConfigError):
        holder_seminorm_estimate(x, 1.5, g)


def test_holder_estimate_increases_under_refinement():
    fn = lambda x: np.abs(x - 0.5) ** 0.5
    ests = []
    for h in (0.1 / 3, 0.1 / 9, 0.1 / 27):
        g = build_grid(1, 1.0, h, 0.2)
        ests.append(holder_seminorm_estimate(fn(g.coords()), 0.5, g))
    assert ests[0] <= ests[1] <= ests[2] <= 1.0 + 1e-12
    # dense-pair evaluation on the finest grid equals the estimator in exhaustive mode
    assert ests[-1] > 0.9


def test_holder_sampled_is_lower_estimate_and_reproducible():
    g = build_grid(2, 1.0, 0.02, 0.05)
    u = np.sin(7 * g.coords())
    full = holder_seminorm_estimate(u, 1.0, g, sample_budget=10**7)
    samp = holder_seminorm_estimate(u, 1.0, g, sample_budget=20_000, seed=5)
    assert samp <= full * (1 + 1e-12)
    assert samp == holder_seminorm_estimate(u, 1.0, g, sample_budget=20_000, seed=5)
    assert holder_norm_estimate(u, 1.0, g) >= full


def test_csv_roundtrip(tmp_path):
    g = build_grid(2, (1.0, 0.5), 0.05, 0.2)
    rng = np.random.default_rng(2)
    u = rng.standard_normal(g.shape + (2,))
    p = tmp_path / "snap.csv"
    write_field_csv(p, g, u)
    header = p.read_text().splitlines()[0]
    assert header == "i0,i1,x0,x1,u0,u1"
    np.testing.assert_array_equal(read_field_csv(p, g), u)
    with pytest.raises(FileNotFoundError):
        read_field_csv(tmp_path / "missing.csv", g)
    with pytest.raises(ConfigError):
        read_field_csv(p, build_grid(1, 1.0, 0.05, 0.2))
