"""Test the inlet and outlet buffers."""

import numpy as np
import pytest

from sphverify._geometry import DomainSpec, generate_domain
from sphverify._openbc import (OpenBoundary, apply_open_bc,
                               characteristics_decompose,
                               characteristics_recompose, recycle_particles)
from sphverify._particles import Tag
from sphverify._scheme import SchemeConfig


@pytest.fixture()
def cfg():
    return SchemeConfig(c_o=20., u_max=1.)


@pytest.fixture()
def channel():
    return generate_domain(DomainSpec("io_channel", 0.05))


def test_characteristics_roundtrip():
    rng = np.random.default_rng(0)
    rho = 1. + rng.uniform(-0.05, 0.05, 1000)
    u = rng.uniform(-1., 1., 1000)
    p = rng.uniform(-5., 5., 1000)
    state = characteristics_decompose(rho, u, p, 1.01, 0.3, 0.5, 20.)
    rho2, u2, p2 = characteristics_recompose(state)
    np.testing.assert_allclose(rho2, rho, rtol=1e-12)
    np.testing.assert_allclose(u2, u, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(p2, p, rtol=1e-10, atol=1e-12)


def test_characteristics_reference_state_is_zero():
    state = characteristics_decompose(1., 0.5, 2., 1., 0.5, 2., 10.)
    assert state.J1 == state.J2 == state.J3 == 0.


class TestRecycle:
    def test_counts(self):
        particles = generate_domain(DomainSpec("io_channel", 0.1))
        n = len(particles)
        x = particles.position[:, 0]
        tag = particles.tag
        particles.position[(tag == Tag.INLET) & (x > -0.1), 0] += 0.06
        particles.position[(tag == Tag.FLUID) & (x > 0.9), 0] += 0.06
        particles.position[(tag == Tag.OUTLET) & (x > 1.5), 0] += 0.1
        counts = recycle_particles(particles, layers=6)
        assert counts == {"spawned": 10, "to_outlet": 10, "deleted": 10}
        assert len(particles) == n
        assert np.count_nonzero(particles.tag == Tag.INLET) == 60
        assert np.count_nonzero(particles.tag == Tag.FLUID) == 100
        assert np.count_nonzero(particles.tag == Tag.OUTLET) == 60
        inlet = particles.position[particles.tag == Tag.INLET, 0]
        np.testing.assert_allclose(np.sort(inlet)[:10], -0.59)

    def test_nothing_to_do(self):
        particles = generate_domain(DomainSpec("io_channel", 0.1))
        version = particles.version
        assert recycle_particles(particles) == {"spawned": 0, "to_outlet": 0, "deleted": 0}
        assert particles.version == version


class TestRegistry:
    def test_unknown(self, cfg):
        with pytest.raises(ValueError):
            OpenBoundary.gettype("sponge", "outlet", cfg)
        with pytest.raises(ValueError):
            OpenBoundary.gettype("mirror", "sideways", cfg)
        with pytest.raises(ValueError):
            OpenBoundary.gettype("mirror", "inlet", cfg, target="density")

    def test_donothing_outlet_only(self, cfg, channel):
        with pytest.raises(ValueError):
            OpenBoundary.gettype("donothing", "inlet", cfg)
        method = OpenBoundary.gettype("donothing", "outlet", cfg)
        before = channel.copy()
        apply_open_bc(method, channel, 0.)
        np.testing.assert_array_equal(channel.pressure, before.pressure)

    def test_hybrid_inlet_needs_velocity(self, cfg, channel):
        method = OpenBoundary.gettype("hybrid", "inlet", cfg)
        with pytest.raises(ValueError):
            apply_open_bc(method, channel, 0.)


class TestMirror:
    @pytest.fixture()
    def linear(self, channel):
        channel.pressure[:] = 1. + 2. * channel.position[:, 0]
        return channel

    def test_taylor_corrected_is_exact(self, cfg, linear):
        apply_open_bc(OpenBoundary.gettype("mirror", "outlet", cfg), linear, 0.)
        outlet = linear.tag == Tag.OUTLET
        x = linear.position[outlet, 0]
        np.testing.assert_allclose(linear.pressure[outlet], 1. + 2. * x, atol=1e-9)
        np.testing.assert_allclose(linear.velocity[outlet], 0., atol=1e-12)

    def test_simple_mirror_samples_image(self, cfg, linear):
        apply_open_bc(OpenBoundary.gettype("simple-mirror", "outlet", cfg), linear, 0.)
        outlet = linear.tag == Tag.OUTLET
        x = linear.position[outlet, 0]
        np.testing.assert_allclose(linear.pressure[outlet], 1. + 2. * (2. - x), atol=1e-9)

    def test_inlet(self, cfg, channel):
        x = channel.position[:, 0]
        channel.velocity[:, 0] = 1. + x
        apply_open_bc(OpenBoundary.gettype("mirror", "inlet", cfg), channel, 0.)
        inlet = channel.tag == Tag.INLET
        np.testing.assert_allclose(channel.velocity[inlet, 0], 1. + x[inlet], atol=1e-9)
        np.testing.assert_allclose(channel.velocity_slip[inlet], channel.velocity[inlet])


class TestHybrid:
    def _uniform(self, channel):
        channel.pressure[:] = 0.
        channel.density[:] = 1.
        channel.velocity[:] = (1., 0.)
        return channel

    @pytest.mark.parametrize("side", ["inlet", "outlet"])
    def test_uniform_state_unchanged(self, cfg, channel, side):
        particles = self._uniform(channel)
        method = OpenBoundary.gettype("hybrid", side, cfg, prescribed=(1., 0.))
        apply_open_bc(method, particles, 0.)
        buffer = particles.tag == method.tag
        np.testing.assert_allclose(particles.pressure[buffer], 0., atol=1e-12)
        np.testing.assert_allclose(particles.density[buffer], 1., atol=1e-12)
        np.testing.assert_allclose(particles.velocity[buffer],
                                   np.tile([1., 0.], (buffer.sum(), 1)), atol=1e-12)

    def test_callable_prescribed_velocity(self, cfg, channel, mocker):
        particles = self._uniform(channel)
        prescribed = mocker.Mock(side_effect=lambda pos, t: np.tile([1., 0.], (len(pos), 1)))
        method = OpenBoundary.gettype("hybrid", "inlet", cfg, prescribed=prescribed)
        apply_open_bc(method, particles, 0.25)
        assert prescribed.call_count == 1
        assert prescribed.call_args.args[1] == 0.25

    @pytest.mark.parametrize("pressure, expected", [(0.5, 0.01), (5., 0.)])
    def test_reference_averaging(self, cfg, channel, pressure, expected):
        channel.pressure[:] = pressure
        outlet = channel.tag == Tag.OUTLET
        channel.p_ref[outlet] = 0.
        channel.u_ref[outlet] = 0.
        method = OpenBoundary.gettype("hybrid", "outlet", cfg, average_window=50)
        apply_open_bc(method, channel, 0., stage=0)
        near = outlet & (channel.position[:, 0] < 1.1)
        np.testing.assert_allclose(channel.p_ref[near], expected, atol=1e-12)

    def test_references_frozen_on_second_stage(self, cfg, channel):
        channel.pressure[:] = 0.5
        outlet = channel.tag == Tag.OUTLET
        channel.p_ref[outlet] = 0.
        channel.u_ref[outlet] = 0.
        method = OpenBoundary.gettype("hybrid", "outlet", cfg)
        apply_open_bc(method, channel, 0., stage=1)
        np.testing.assert_array_equal(channel.p_ref[outlet], 0.)
