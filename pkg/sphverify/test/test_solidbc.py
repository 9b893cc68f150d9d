"""Test the solid wall treatments."""

import numpy as np
import pytest

from sphverify._geometry import TEST_SURFACE, generate_domain
from sphverify._kernel import kernel_eval
from sphverify._mms import get_solution
from sphverify._operators import PointSampler
from sphverify._particles import Tag
from sphverify._scheme import SchemeConfig, eos_density
from sphverify._solidbc import (SolidBoundary, apply_solid_bc,
                                build_ghost_layout)

METHODS = ["marrone", "adami", "colagrossi", "takeda", "randles", "hashemi",
           "marongiu"]
DX = 0.05


@pytest.fixture()
def cfg():
    return SchemeConfig(c_o=20., nu=0.01)


def _setup(name, condition, cfg, shape="straight"):
    spec = SolidBoundary.subclasses[name](condition, None, cfg).domain_spec(shape, DX)
    method = SolidBoundary.gettype(name, condition, spec.test_interface(), cfg)
    return method, generate_domain(spec)


def _wall(particles):
    return (particles.tag == Tag.SOLID) & (particles.surface == TEST_SURFACE)


class TestRegistry:
    def test_unknown_method(self, cfg):
        with pytest.raises(ValueError):
            SolidBoundary.gettype("fictitious", "slip", None, cfg)

    def test_unknown_condition(self, cfg):
        with pytest.raises(ValueError):
            SolidBoundary.gettype("adami", "periodic", None, cfg)

    def test_layers(self, cfg):
        assert SolidBoundary.gettype("mms", "slip", None, cfg).domain_spec("straight", DX).ghost_layers == 6
        assert SolidBoundary.gettype("mms2l", "slip", None, cfg).domain_spec("straight", DX).ghost_layers == 2
        spec = SolidBoundary.gettype("hashemi", "slip", None, cfg).domain_spec("convex", DX)
        assert spec.on_surface


class TestConstantState:
    @pytest.mark.parametrize("name", METHODS)
    @pytest.mark.parametrize("condition", ["pressure", "slip", "noslip"])
    def test_constant_pressure_preserved(self, name, condition, cfg):
        method, particles = _setup(name, condition, cfg)
        particles.pressure[:] = 3.
        particles.density[:] = eos_density(3., cfg)
        apply_solid_bc(method, particles, 0., stage=0, dt=1e-3)
        wall = _wall(particles)
        assert wall.any()
        np.testing.assert_allclose(particles.pressure[wall], 3., atol=1e-9)
        np.testing.assert_allclose(particles.density[wall], eos_density(3., cfg), atol=1e-9)
        np.testing.assert_allclose(particles.velocity[wall], 0., atol=1e-12)

    @pytest.mark.parametrize("name", METHODS)
    def test_uniform_tangential_flow_slips(self, name, cfg):
        method, particles = _setup(name, "slip", cfg)
        particles.velocity[:] = (1., 0.)
        particles.velocity_slip[:] = (1., 0.)
        apply_solid_bc(method, particles, 0., stage=0, dt=1e-3)
        wall = _wall(particles)
        np.testing.assert_allclose(particles.velocity_slip[wall],
                                   np.tile([1., 0.], (wall.sum(), 1)), atol=1e-9)

    @pytest.mark.parametrize("name", ["marrone", "adami", "takeda"])
    def test_convex_constant_pressure(self, name, cfg):
        method, particles = _setup(name, "pressure", cfg, shape="convex")
        particles.pressure[:] = 1.5
        apply_solid_bc(method, particles, 0.)
        np.testing.assert_allclose(particles.pressure[_wall(particles)], 1.5, atol=1e-9)


class TestMarrone:
    def test_linear_pressure_exact(self, cfg):
        method, particles = _setup("marrone", "pressure", cfg)
        x = particles.position[:, 0]
        particles.pressure[:] = 2. + 0.5 * x
        apply_solid_bc(method, particles, 0.)
        wall = _wall(particles)
        np.testing.assert_allclose(particles.pressure[wall], 2. + 0.5 * x[wall], atol=1e-9)
        np.testing.assert_allclose(particles.density[wall],
                                   eos_density(particles.pressure[wall], cfg))

    def test_noslip_reverses_velocity(self, cfg):
        method, particles = _setup("marrone", "noslip", cfg)
        particles.velocity[:] = (1., 0.)
        apply_solid_bc(method, particles, 0.)
        wall = _wall(particles)
        np.testing.assert_allclose(particles.velocity[wall],
                                   np.tile([-1., 0.], (wall.sum(), 1)), atol=1e-9)
        np.testing.assert_allclose(particles.velocity_slip[wall],
                                   np.tile([1., 0.], (wall.sum(), 1)), atol=1e-9)

    def test_hydrostatic_head(self):
        cfg = SchemeConfig(gravity=(0., -1.))
        method, particles = _setup("marrone", "pressure", cfg)
        particles.pressure[:] = 1.
        apply_solid_bc(method, particles, 0.)
        wall = _wall(particles)
        y = particles.position[wall, 1]
        # ghost above the wall, image below it: p_g = p_v + rho (x_g - x_v) . g
        np.testing.assert_allclose(particles.pressure[wall], 1. - 2. * (y - 1.), atol=1e-9)

    def test_layout(self, cfg):
        method, _ = _setup("marrone", "slip", cfg)
        layout = build_ghost_layout(method, "straight", DX)
        np.testing.assert_allclose(layout.virtual[:, 1], 2. - layout.ghosts[:, 1])
        np.testing.assert_allclose(layout.virtual[:, 0], layout.ghosts[:, 0])


class TestPrescribed:
    def test_mms_requires_solution(self, cfg):
        method, particles = _setup("mms", "noslip", cfg)
        with pytest.raises(ValueError):
            apply_solid_bc(method, particles, 0.)

    @pytest.mark.parametrize("name", ["mms", "mms2l"])
    def test_ghosts_follow_solution(self, name, cfg):
        spec = SolidBoundary.gettype(name, "noslip", None, cfg).domain_spec("straight", DX)
        method = SolidBoundary.gettype(name, "noslip", spec.test_interface(), cfg,
                                       solution="noslip_d1")
        particles = generate_domain(spec)
        apply_solid_bc(method, particles, 0.02)
        wall = _wall(particles)
        x, y = particles.position[wall].T
        u, v, p, rho = get_solution("noslip_d1").evaluate(x, y, 0.02, cfg.c_o, cfg.rho_o)
        np.testing.assert_allclose(particles.pressure[wall], p)
        np.testing.assert_allclose(particles.density[wall], rho)
        np.testing.assert_allclose(particles.velocity[wall], np.column_stack((u, v)))
        assert particles.pinned[wall].all()


class TestColagrossi:
    def test_mirrors_fluid(self, cfg):
        method, particles = _setup("colagrossi", "slip", cfg)
        fluid = particles.tag == Tag.FLUID
        n_before = len(particles)
        near = fluid & (1. - particles.position[:, 1] < particles.kernel.support_radius)
        apply_solid_bc(method, particles, 0.)
        mirrors = particles.mirror
        assert np.count_nonzero(mirrors) == np.count_nonzero(near)
        assert len(particles) == n_before + np.count_nonzero(near)
        assert np.all(particles.position[mirrors, 1] > 1.)
        assert method.members(particles).size == 0

    def test_reapply_keeps_count(self, cfg):
        method, particles = _setup("colagrossi", "slip", cfg)
        apply_solid_bc(method, particles, 0.)
        n_after = len(particles)
        apply_solid_bc(method, particles, 0., stage=1)
        assert len(particles) == n_after
        particles.touch()
        apply_solid_bc(method, particles, 0.)
        assert len(particles) == n_after


class TestMarongiu:
    def test_stencil(self, cfg):
        method, _ = _setup("marongiu", "slip", cfg)
        layout = build_ghost_layout(method, "straight", DX)
        assert layout.stencil.shape == (len(layout.ghosts), 5, 2)
        np.testing.assert_allclose(layout.stencil[:, 4, 1], 1. - 4. * DX)

    def test_density_only_updated_on_first_stage(self, cfg):
        method, particles = _setup("marongiu", "pressure", cfg)
        wall = _wall(particles)
        y = particles.position[:, 1]
        particles.density[:] = 1. + 0.01 * y
        before = particles.density[wall].copy()
        apply_solid_bc(method, particles, 0., stage=1, dt=1e-3)
        np.testing.assert_array_equal(particles.density[wall], before)
        apply_solid_bc(method, particles, 0., stage=0, dt=1e-3)
        assert not np.allclose(particles.density[wall], before)


class TestHashemi:
    @pytest.mark.parametrize("perturb", [0., 0.05])
    def test_hydrostatic_balance(self, perturb):
        cfg = SchemeConfig(c_o=20., nu=0., gravity=(0., -2.))
        method, particles = _setup("hashemi", "pressure", cfg)
        x, y = particles.position[:, 0], particles.position[:, 1]
        particles.pressure[:] = 5. + 2. * cfg.rho_o * (1. - y)
        # the balance is scaled by the wall density, not the fluid one
        fluid = particles.tag == Tag.FLUID
        particles.density[:] = cfg.rho_o
        particles.density[fluid] += perturb * np.sin(7. * x[fluid]) * np.cos(5. * y[fluid])
        apply_solid_bc(method, particles, 0.)
        wall = _wall(particles)
        assert wall.any()
        np.testing.assert_allclose(particles.pressure[wall], 5., atol=1e-8)
        np.testing.assert_allclose(particles.velocity[wall], 0., atol=1e-12)


class TestTakeda:
    def test_degenerate_partner_keeps_ghost(self, cfg):
        method, particles = _setup("takeda", "pressure", cfg)
        fluid = particles.tag == Tag.FLUID
        target = np.array([0.475, 1. - 0.5 * DX])
        k = np.flatnonzero(fluid)[np.argmin(np.linalg.norm(
            particles.position[fluid] - target, axis=1))]
        particles.position[k, 1] = 1.
        particles.pressure[:] = 0.
        particles.pressure[fluid] = 3.
        apply_solid_bc(method, particles, 0.)
        wall = _wall(particles)
        column = wall & np.isclose(particles.position[:, 0], 0.475)
        assert column.any()
        assert particles.diagnostics["takeda_degenerate"] >= 1
        np.testing.assert_array_equal(particles.pressure[column], 0.)
        others = wall & ~np.isclose(particles.position[:, 0], 0.475, atol=1.5 * DX)
        np.testing.assert_allclose(particles.pressure[others], 3.)
        assert np.isfinite(particles.velocity[wall]).all()


class TestRandles:
    def test_band_pressure(self, cfg):
        method, particles = _setup("randles", "pressure", cfg)
        x, y = particles.position[:, 0], particles.position[:, 1]
        particles.pressure[:] = 2. + np.sin(3. * x) + y**2
        before = particles.pressure.copy()
        sources = method.sources(particles)
        ghosts = np.isin(np.arange(len(particles)), method.members(particles))
        sd = method.interface.signed_distance(particles.position)
        band = np.flatnonzero((particles.tag == Tag.FLUID) & (sd >= 0.)
                              & (sd < method.band * particles.dx))
        assert len(band)
        p_bc, support = PointSampler(
            method.interface.project(particles.position[band]), particles,
            sources).shepard(before)
        assert support.all()
        expected = np.empty(len(band))
        for k, i in enumerate(band):
            w = kernel_eval(particles.position[i] - particles.position,
                            particles.kernel) * particles.volume
            w[i] = 0.
            fluid_sum = np.sum(np.where(sources, (before - p_bc[k]) * w, 0.))
            expected[k] = p_bc[k] + fluid_sum / (1. - np.sum(w[ghosts]))
        apply_solid_bc(method, particles, 0.)
        np.testing.assert_allclose(particles.pressure[band], expected, rtol=1e-10)

    def test_uniform_interior_reproduces_wall_value(self, cfg):
        method, particles = _setup("randles", "pressure", cfg)
        particles.pressure[:] = 4.
        apply_solid_bc(method, particles, 0.)
        fluid = particles.tag == Tag.FLUID
        np.testing.assert_allclose(particles.pressure[fluid], 4., atol=1e-12)
