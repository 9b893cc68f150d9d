"""Test kernels and the neighbor search."""

import numpy as np
import pytest

from sphverify._kernel import KernelSpec, kernel_eval, kernel_grad
from sphverify._neighbors import build_neighbors
from sphverify._operators import unit_lattice


class TestKernel:
    @pytest.fixture(params=["quintic", "wendland_c2"])
    def spec(self, request):
        return KernelSpec(h=0.1, family=request.param)

    def test_normalised(self, spec):
        dx = spec.h / 20.
        n = int(np.ceil(spec.support_radius / dx)) + 1
        coords = (np.arange(-n, n) + 0.5) * dx
        xx, yy = np.meshgrid(coords, coords)
        r = np.column_stack((xx.ravel(), yy.ravel()))
        assert np.sum(kernel_eval(r, spec)) * dx * dx == pytest.approx(1., abs=1e-3)

    def test_compact_support(self, spec):
        r = np.array([[spec.support_radius, 0.], [0., 1.01 * spec.support_radius]])
        np.testing.assert_array_equal(kernel_eval(r, spec), 0.)
        np.testing.assert_array_equal(kernel_grad(r, spec), 0.)

    def test_gradient_antisymmetric(self, spec):
        r = np.random.default_rng(1).uniform(-0.2, 0.2, (50, 2))
        np.testing.assert_allclose(kernel_grad(-r, spec), -kernel_grad(r, spec))

    def test_gradient_matches_difference(self, spec):
        r = np.array([[0.07, 0.03]])
        eps = 1e-7
        fd = np.array([
            (kernel_eval(r + [eps, 0.], spec) - kernel_eval(r - [eps, 0.], spec)) / (2 * eps),
            (kernel_eval(r + [0., eps], spec) - kernel_eval(r - [0., eps], spec)) / (2 * eps),
        ]).T
        np.testing.assert_allclose(kernel_grad(r, spec), fd, rtol=1e-5)

    def test_self_gradient_is_zero(self, spec):
        np.testing.assert_array_equal(kernel_grad(np.zeros((1, 2)), spec), 0.)

    def test_support_radius(self):
        assert KernelSpec(h=1.).support_radius == 3.
        assert KernelSpec(h=1., family="wendland_c2").support_radius == 2.

    def test_invalid(self):
        with pytest.raises(ValueError):
            KernelSpec(h=1., family="gaussian")
        with pytest.raises(ValueError):
            KernelSpec(h=0.)


class TestNeighbors:
    @pytest.fixture()
    def cloud(self):
        return np.random.default_rng(7).uniform(0., 1., (400, 2))

    def test_backends_agree(self, cloud):
        cells = build_neighbors(cloud, 0.1, method="cells")
        tree = build_neighbors(cloud, 0.1, method="kdtree")
        np.testing.assert_array_equal(cells.dst, tree.dst)
        np.testing.assert_array_equal(cells.src, tree.src)

    def test_brute_force(self, cloud):
        nbrs = build_neighbors(cloud, 0.1)
        dist = np.linalg.norm(cloud[:, None] - cloud[None], axis=-1)
        dst, src = np.nonzero((dist < 0.1) & ~np.eye(len(cloud), dtype=bool))
        np.testing.assert_array_equal(nbrs.dst, dst)
        np.testing.assert_array_equal(nbrs.src, src)

    def test_sources(self, cloud):
        points = cloud[:10] + 0.01
        nbrs = build_neighbors(points, 0.1, sources=cloud)
        assert nbrs.n_dst == 10
        assert np.all(np.linalg.norm(points[nbrs.dst] - cloud[nbrs.src], axis=1) < 0.1)
        np.testing.assert_array_equal(nbrs[0], nbrs.src[nbrs.dst == 0])

    def test_strict_cutoff(self):
        points = np.array([[0., 0.], [0.5, 0.]])
        assert len(build_neighbors(points, 0.5)) == 0
        assert len(build_neighbors(points, 0.5 + 1e-9)) == 2

    def test_sum(self):
        points = unit_lattice(0.1)
        nbrs = build_neighbors(points, 0.15)
        counts = nbrs.sum(np.ones(len(nbrs)))
        np.testing.assert_array_equal(counts, nbrs.counts())
        assert counts.max() == 8 and counts.min() == 3

    def test_unsupported_method(self, cloud):
        with pytest.raises(ValueError):
            build_neighbors(cloud, 0.1, method="octree")

    def test_benchmark_neighbors(self, benchmark):
        points = unit_lattice(0.01)
        benchmark(build_neighbors, points, 0.036)
