"""Solid wall boundary treatments.

Each treatment fills the state of the solid particles of one surface from
the current fluid state before forces are evaluated. Three conditions can
be imposed: a homogeneous Neumann condition on pressure (``pressure``), a
slip wall (``slip``) and a no-slip wall (``noslip``). Walls are at rest.

Solid particles carry two velocities: ``velocity`` enters velocity
gradients and therefore the viscous term, ``velocity_slip`` enters the
continuity equation. For a no-slip wall the former holds the no-slip
extrapolation and the latter the slip one; otherwise both hold the slip
extrapolation.

Treatments are registered by name and obtained with
:meth:`SolidBoundary.gettype`::

    wall = SolidBoundary.gettype("marrone", "noslip", interface, cfg)
    wall(particles, t, stage, dt)

Particles sampled by the treatments are fluid, inlet and outlet particles.
Treatments never raise on missing interpolation support: the previous value
is kept and the event is counted in ``particles.diagnostics``.
"""

from abc import ABCMeta, abstractmethod
from dataclasses import dataclass

import numpy as np

from ._geometry import TEST_SURFACE, DomainSpec, generate_domain
from ._kernel import kernel_eval, kernel_grad
from ._mms import get_solution
from ._neighbors import build_neighbors
from ._operators import PointSampler, _inverse_2x2
from ._particles import Tag
from ._scheme import eos_density, eos_pressure

CONDITIONS = ("pressure", "slip", "noslip")
_SOURCE_TAGS = (Tag.FLUID, Tag.INLET, Tag.OUTLET)
_FD_COEFFICIENTS = np.array([-25., 48., -36., 16., -3.]) / 12.


@dataclass
class GhostLayout:
    """Fixed positions a treatment works with.

    ``virtual`` holds the mirror images of the ghosts (Marrone) and
    ``stencil`` the five normal finite-difference points of every boundary
    particle (Marongiu), shape (n, 5, 2).
    """

    ghosts: np.ndarray
    normals: np.ndarray
    virtual: np.ndarray = None
    stencil: np.ndarray = None


class SolidBoundary(metaclass=ABCMeta):
    """Base class of the wall treatments."""

    subclasses = {}
    layers = 6
    on_surface = False

    def __init__(self, condition, interface, cfg, surface=TEST_SURFACE,
                 solution=None):
        if condition not in CONDITIONS:
            raise ValueError(f"Unsupported boundary condition {condition}")
        self.condition = condition
        self.interface = interface
        self.cfg = cfg
        self.surface = surface
        self.solution = solution
        self._cache = {}

    @classmethod
    def gettype(cls, name, *args, **kwargs):
        """Instantiate the treatment registered as ``name``."""
        if name not in cls.subclasses:
            raise ValueError(f"Unsupported solid boundary method {name}")
        return cls.subclasses[name](*args, **kwargs)

    @classmethod
    def register_subclass(cls, name):
        def decorator(subclass):
            cls.subclasses[name] = subclass
            subclass.name = name
            return subclass
        return decorator

    def domain_spec(self, shape, dx):
        """Domain parameters this treatment needs."""
        return DomainSpec(shape, dx, ghost_layers=self.layers,
                          on_surface=self.on_surface)

    def __call__(self, particles, t, stage, dt):
        self.apply(particles, t, stage, dt)

    @abstractmethod
    def apply(self, particles, t, stage, dt):
        """Fill the wall state at time t of RK stage ``stage``."""

    def members(self, particles):
        """Indices of the solid particles of this surface."""
        return np.flatnonzero((particles.tag == Tag.SOLID)
                              & (particles.surface == self.surface)
                              & ~particles.mirror)

    def sources(self, particles):
        return particles.mask(*_SOURCE_TAGS)

    def _cached(self, name, particles, factory):
        key = (id(particles), particles.version, len(particles))
        entry = self._cache.get(name)
        if entry is None or entry[0] != key:
            entry = (key, factory())
            self._cache[name] = entry
        return entry[1]

    def _set_pressure(self, particles, index, pressure):
        particles.pressure[index] = pressure
        particles.density[index] = eos_density(pressure, self.cfg)

    def _set_velocity(self, particles, index, extrapolated, normal):
        """Store slip and no-slip images of the extrapolated fluid velocity."""
        un = np.sum(extrapolated * normal, axis=1)
        slip = extrapolated - 2. * un[:, np.newaxis] * normal
        particles.velocity_slip[index] = slip
        if self.condition == "noslip":
            particles.velocity[index] = -extrapolated
        else:
            particles.velocity[index] = slip

    def _wall_velocity(self, particles, index, points):
        """Velocity on the wall itself: zero, or the tangential fluid velocity."""
        normal = particles.normal[index]
        velocity = np.zeros((len(index), 2))
        if self.condition == "slip":
            sampler = self._cached("wall", particles, lambda: PointSampler(
                points, particles, self.sources(particles)))
            shep, support = sampler.shepard(particles.velocity)
            un = np.sum(shep * normal, axis=1)
            velocity = np.where(support[:, np.newaxis],
                                shep - un[:, np.newaxis] * normal,
                                particles.velocity_slip[index])
        particles.velocity[index] = velocity
        particles.velocity_slip[index] = velocity

    def layout(self, particles):
        index = self.members(particles)
        return GhostLayout(particles.position[index].copy(),
                           particles.normal[index].copy())


class _Prescribed(SolidBoundary):
    def apply(self, particles, t, stage, dt):
        if self.solution is None:
            raise ValueError(f"{self.name} needs a manufactured solution")
        index = self.members(particles)
        pos = particles.position[index]
        ms = get_solution(self.solution)
        u, v, p, rho = ms.evaluate(pos[:, 0], pos[:, 1], t, self.cfg.c_o,
                                   self.cfg.rho_o)
        velocity = np.column_stack((u, v))
        particles.pressure[index] = p + self.cfg.p_background
        particles.density[index] = rho
        particles.velocity[index] = velocity
        particles.velocity_slip[index] = velocity
        particles.grad_u[index] = ms.velocity_gradient(pos[:, 0], pos[:, 1], t)
        particles.pinned[index] = True


@SolidBoundary.register_subclass("mms")
class MMSReference(_Prescribed):
    """Ghost state taken from the manufactured solution."""


@SolidBoundary.register_subclass("mms2l")
class MMSReference2Layer(_Prescribed):
    """Like :class:`MMSReference` with two ghost layers only."""

    layers = 2


@SolidBoundary.register_subclass("marrone")
class Marrone(SolidBoundary):
    """Fixed ghosts sampling their mirror image with first-order MLS."""

    def layout(self, particles):
        base = super().layout(particles)
        base.virtual = self.interface.reflect(base.ghosts)
        return base

    def apply(self, particles, t, stage, dt):
        index = self.members(particles)
        if not len(index):
            return
        ghosts = particles.position[index]
        virtual = self.interface.reflect(ghosts)
        sampler = self._cached("virtual", particles, lambda: PointSampler(
            virtual, particles, self.sources(particles)))
        state = np.column_stack((particles.pressure, particles.density,
                                 particles.velocity))
        value, _, ok = sampler.mls(state, particles.volume)
        support = sampler.support
        fallback = support & ~ok
        if fallback.any():
            particles.diagnostics["mls_fallback"] += int(fallback.sum())
        if (~support).any():
            particles.diagnostics["no_support"] += int((~support).sum())
        index, value = index[support], value[support]
        gravity = np.asarray(self.cfg.gravity)
        hydro = value[:, 1] * ((ghosts[support] - virtual[support]) @ gravity)
        self._set_pressure(particles, index, value[:, 0] + hydro)
        self._set_velocity(particles, index, value[:, 2:],
                           particles.normal[index])


@SolidBoundary.register_subclass("adami")
class Adami(SolidBoundary):
    """Shepard extrapolation with a hydrostatic correction."""

    def apply(self, particles, t, stage, dt):
        index = self.members(particles)
        if not len(index):
            return
        ghosts = particles.position[index]
        sampler = self._cached("ghost", particles, lambda: PointSampler(
            ghosts, particles, self.sources(particles)))
        rel = ghosts[sampler.dst] - particles.position[sampler.src]
        gravity = np.asarray(self.cfg.gravity)
        head = particles.density[sampler.src] * (rel @ gravity)
        state = np.column_stack((particles.pressure[sampler.src] + head,
                                 particles.velocity[sampler.src]))
        total = sampler.nbrs.sum(state * sampler.w[:, np.newaxis])
        support = sampler.support
        if (~support).any():
            particles.diagnostics["no_support"] += int((~support).sum())
        value = total[support] / sampler.wsum[support, np.newaxis]
        index = index[support]
        self._set_pressure(particles, index, value[:, 0])
        self._set_velocity(particles, index, value[:, 1:],
                           particles.normal[index])


@SolidBoundary.register_subclass("colagrossi")
class Colagrossi(SolidBoundary):
    """Fluid near the wall mirrored across it before every evaluation."""

    layers = 0

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self._version = None
        self._origin = None

    def _own_mirrors(self, particles):
        return particles.mirror & (particles.surface == self.surface)

    def apply(self, particles, t, stage, dt):
        key = (id(particles), particles.version, len(particles))
        if self._version != key:
            mine = self._own_mirrors(particles)
            if mine.any():
                particles.remove(mine)
            sd = self.interface.signed_distance(particles.position)
            origin = np.flatnonzero(
                (particles.tag == Tag.FLUID) & ~particles.mirror
                & (sd >= 0.) & (sd < particles.kernel.support_radius))
            mirrors = particles.take(origin)
            mirrors.position[:] = self.interface.reflect(mirrors.position)
            mirrors.normal[:] = self.interface.normal(mirrors.position)
            mirrors.tag[:] = Tag.SOLID
            mirrors.surface[:] = self.surface
            mirrors.mirror[:] = True
            mirrors.pinned[:] = False
            mirrors.src_momentum[:] = 0.
            mirrors.src_continuity[:] = 0.
            particles.extend(mirrors)
            self._origin = origin
            self._version = (id(particles), particles.version, len(particles))
        index = np.flatnonzero(self._own_mirrors(particles))
        origin = self._origin
        particles.pressure[index] = particles.pressure[origin]
        particles.density[index] = particles.density[origin]
        self._set_velocity(particles, index, particles.velocity[origin],
                           particles.normal[index])

    def layout(self, particles):
        return GhostLayout(np.zeros((0, 2)), np.zeros((0, 2)))


@SolidBoundary.register_subclass("takeda")
class Takeda(SolidBoundary):
    """Linear extrapolation from the fluid particle facing each ghost."""

    cone = np.cos(np.radians(30.))

    def _partners(self, particles, index):
        ghosts = particles.position[index]
        fluid = np.flatnonzero(self.sources(particles))
        radius = max(particles.kernel.support_radius,
                     (self.layers + 2) * particles.dx)
        nbrs = build_neighbors(ghosts, radius, sources=particles.position[fluid])
        partner = np.full(len(index), -1)
        if not len(nbrs):
            return partner
        rel = particles.position[fluid[nbrs.src]] - ghosts[nbrs.dst]
        dist = np.linalg.norm(rel, axis=1)
        facing = np.sum(rel * particles.normal[index][nbrs.dst], axis=1)
        outside = facing < self.cone * dist
        order = np.lexsort((dist, outside, nbrs.dst))
        first = np.unique(nbrs.dst[order], return_index=True)
        partner[first[0]] = fluid[nbrs.src[order][first[1]]]
        return partner

    def apply(self, particles, t, stage, dt):
        index = self.members(particles)
        if not len(index):
            return
        partner = self._cached("partner", particles,
                               lambda: self._partners(particles, index))
        found = partner >= 0
        if (~found).any():
            particles.diagnostics["no_support"] += int((~found).sum())
        d_ghost = -self.interface.signed_distance(particles.position[index])
        d_fluid = np.where(found, self.interface.signed_distance(
            particles.position[np.maximum(partner, 0)]), 0.)
        degenerate = found & (d_fluid < 1e-6 * particles.dx)
        if degenerate.any():
            particles.diagnostics["takeda_degenerate"] += int(degenerate.sum())
        ok = found & ~degenerate
        index, partner = index[ok], partner[ok]
        ratio = (d_ghost[ok] / d_fluid[ok])[:, np.newaxis]
        normal = particles.normal[index]
        u_f = particles.velocity[partner]
        un = np.sum(u_f * normal, axis=1)[:, np.newaxis]
        slip = u_f - un * normal - ratio * un * normal
        self._set_pressure(particles, index, particles.pressure[partner])
        particles.velocity_slip[index] = slip
        particles.velocity[index] = -ratio * u_f if self.condition == "noslip" else slip


@SolidBoundary.register_subclass("randles")
class Randles(SolidBoundary):
    """Boundary values on ghosts and a corrected first fluid layer."""

    band = 1.5

    def apply(self, particles, t, stage, dt):
        index = self.members(particles)
        if not len(index):
            return
        sources = self.sources(particles)
        ghosts = particles.position[index]
        projected = self.interface.project(ghosts)
        sampler = self._cached("ghost", particles, lambda: PointSampler(
            projected, particles, sources))
        state = np.column_stack((particles.pressure, particles.velocity))
        value, support = sampler.shepard(state)
        if (~support).any():
            particles.diagnostics["no_support"] += int((~support).sum())
        normal = particles.normal[index]
        un = np.sum(value[:, 1:] * normal, axis=1)[:, np.newaxis]
        tangential = value[:, 1:] - un * normal
        keep = index[support]
        self._set_pressure(particles, keep, value[support, 0])
        wall = np.zeros_like(tangential) if self.condition == "noslip" else tangential
        particles.velocity[keep] = wall[support]
        particles.velocity_slip[keep] = tangential[support]
        if self.condition == "pressure":
            self._correct_band(particles, sources, index)

    def _correct_band(self, particles, sources, ghosts):
        sd = self.interface.signed_distance(particles.position)
        band = np.flatnonzero((particles.tag == Tag.FLUID)
                              & (sd >= 0.) & (sd < self.band * particles.dx))
        if not len(band):
            return
        pos = particles.position[band]
        spec = particles.kernel
        wall_sampler = self._cached("band", particles, lambda: PointSampler(
            self.interface.project(pos), particles, sources))
        p_bc, support = wall_sampler.shepard(particles.pressure)
        nbrs = self._cached("band_nbrs", particles, lambda: build_neighbors(
            pos, spec.support_radius, sources=particles.position))
        w = kernel_eval(pos[nbrs.dst] - particles.position[nbrs.src], spec)
        omega = particles.volume[nbrs.src]
        other = nbrs.src != band[nbrs.dst]
        is_fluid = sources[nbrs.src] & other
        is_wall = np.isin(nbrs.src, ghosts) & other
        fluid_sum = nbrs.sum(np.where(
            is_fluid, (particles.pressure[nbrs.src] - p_bc[nbrs.dst]) * w * omega, 0.))
        wall_sum = nbrs.sum(np.where(is_wall, w * omega, 0.))
        denominator = 1. - wall_sum
        ok = support & (denominator > 1e-6)
        if (~ok).any():
            particles.diagnostics["no_support"] += int((~ok).sum())
        particles.pressure[band[ok]] = p_bc[ok] + fluid_sum[ok] / denominator[ok]


def _fluid_corrected_weights(particles, points, sources):
    """Kernel pairs from points to fluid with fluid-only gradient correction."""
    index = np.flatnonzero(sources)
    spec = particles.kernel
    nbrs = build_neighbors(points, spec.support_radius,
                           sources=particles.position[index])
    src = index[nbrs.src]
    xji = particles.position[src] - points[nbrs.dst]
    dw = kernel_grad(-xji, spec)
    omega = particles.volume[src]
    moment = nbrs.sum(dw[:, :, np.newaxis] * xji[:, np.newaxis, :]
                      * omega[:, np.newaxis, np.newaxis])
    det = moment[:, 0, 0] * moment[:, 1, 1] - moment[:, 0, 1] * moment[:, 1, 0]
    ok = np.abs(det) > 1e-12
    correction = np.broadcast_to(np.eye(2), moment.shape).copy()
    correction[ok] = _inverse_2x2(moment[ok])
    dwc = np.einsum('pab,pb->pa', correction[nbrs.dst], dw)
    return nbrs, src, dwc * omega[:, np.newaxis], ok


@SolidBoundary.register_subclass("hashemi")
class Hashemi(SolidBoundary):
    """Wall pressure from the normal momentum balance."""

    layers = 1
    on_surface = True

    def apply(self, particles, t, stage, dt):
        index = self.members(particles)
        if not len(index):
            return
        points = particles.position[index]
        sources = self.sources(particles)
        nbrs, src, weight, ok = self._cached(
            "weights", particles,
            lambda: _fluid_corrected_weights(particles, points, sources))
        normal = particles.normal[index]
        inv_rho = 1. / particles.density[index]
        wn = np.sum(weight * normal[nbrs.dst], axis=1)
        numerator = nbrs.sum(particles.pressure[src] * wn) * inv_rho
        denominator = nbrs.sum(wn) * inv_rho
        balance = (-particles.acceleration + particles.acc_viscous
                   + np.asarray(self.cfg.gravity) + particles.src_momentum)
        sampler = self._cached("wall", particles, lambda: PointSampler(
            points, particles, sources))
        shep, support = sampler.shepard(balance)
        rhs = np.sum(shep * normal, axis=1)
        ok = ok & support & (np.abs(denominator) > 1e-12)
        if (~ok).any():
            particles.diagnostics["no_support"] += int((~ok).sum())
        self._set_pressure(particles, index[ok],
                           (numerator[ok] - rhs[ok]) / denominator[ok])
        self._wall_velocity(particles, index, points)


@SolidBoundary.register_subclass("marongiu")
class Marongiu(SolidBoundary):
    """Wall density evolved along the incoming characteristic."""

    layers = 1
    on_surface = True

    def layout(self, particles):
        base = super().layout(particles)
        base.stencil = self.stencil(base.ghosts, base.normals, particles.dx)
        return base

    @staticmethod
    def stencil(points, normals, dx):
        steps = np.arange(5) * dx
        return points[:, np.newaxis, :] + steps[np.newaxis, :, np.newaxis] * normals[:, np.newaxis, :]

    def apply(self, particles, t, stage, dt):
        index = self.members(particles)
        if not len(index):
            return
        points = particles.position[index]
        normal = particles.normal[index]
        self._wall_velocity(particles, index, points)
        if stage != 0:
            return
        stencil = self.stencil(points, normal, particles.dx)[:, 1:]
        sampler = self._cached("stencil", particles, lambda: PointSampler(
            stencil.reshape(-1, 2), particles, self.sources(particles)))
        state, support = sampler.shepard(np.column_stack(
            (particles.density, particles.velocity)))
        state = state.reshape(len(index), 4, 3)
        support = support.reshape(len(index), 4).all(axis=1)
        if (~support).any():
            particles.diagnostics["no_support"] += int((~support).sum())
        rho = np.column_stack((particles.density[index], state[:, :, 0]))
        un = np.column_stack((
            np.sum(particles.velocity[index] * normal, axis=1),
            np.einsum('pka,pa->pk', state[:, :, 1:], normal)))
        drho_dn = rho @ _FD_COEFFICIENTS / particles.dx
        dun_dn = un @ _FD_COEFFICIENTS / particles.dx
        c_o = self.cfg.c_o
        rho_b = particles.density[index]
        g_n = normal @ np.asarray(self.cfg.gravity)
        rate = c_o * drho_dn - rho_b * dun_dn - rho_b * g_n / c_o
        updated = rho_b + dt * rate
        keep = index[support]
        particles.density[keep] = updated[support]
        particles.pressure[keep] = eos_pressure(updated[support], self.cfg)


def apply_solid_bc(method, particles, t, stage=0, dt=0.):
    """Run a wall treatment once."""
    method(particles, t, stage, dt)
    return particles


def build_ghost_layout(method, shape, dx):
    """Generate the domain a treatment needs and return its fixed layout."""
    particles = generate_domain(method.domain_spec(shape, dx))
    return method.layout(particles)
