"""Inlet and outlet buffers.

Open boundaries are vertical interfaces at x = x0 with buffers of particles
on the far side (``inlet`` particles upstream of the inlet, ``outlet``
particles downstream of the outlet). Buffer particles advect with their own
velocity and change role when they cross an interface, see
:func:`recycle_particles`. Their state is set by one of the registered
methods before every evaluation:

``donothing``
    outlet particles keep the state they had when they left the fluid;
``mirror``
    first-order MLS value and gradient at the mirror point (2 x0 - x, y),
    Taylor-corrected back to the buffer particle;
``simple-mirror``
    the MLS value at the mirror point without the Taylor term;
``hybrid``
    characteristic variables extrapolated with Shepard weights, the
    incoming one replaced by its reference value. References are time
    averages of the sampled state taken while the acoustic intensity is
    low; the inlet velocity reference is prescribed.
"""

from abc import ABCMeta, abstractmethod
from dataclasses import dataclass

import numpy as np

from ._operators import PointSampler
from ._particles import Tag
from ._scheme import eos_density

SIDES = ("inlet", "outlet")
TARGETS = ("velocity", "pressure")


@dataclass
class CharacteristicState:
    """Characteristic variables of the linearized 1-D system along x."""

    J1: np.ndarray
    J2: np.ndarray
    J3: np.ndarray
    rho_ref: np.ndarray
    u_ref: np.ndarray
    p_ref: np.ndarray
    c_o: float


def characteristics_decompose(rho, u, p, rho_ref, u_ref, p_ref, c_o):
    """Split (rho, u, p) about the reference state.

    J1 = -c^2 (rho - rho_ref) + (p - p_ref)
    J2 = rho c (u - u_ref) + (p - p_ref)
    J3 = -rho c (u - u_ref) + (p - p_ref)
    """
    rho, u, p = (np.asarray(a, dtype=float) for a in (rho, u, p))
    dp = p - p_ref
    return CharacteristicState(
        J1=-c_o**2 * (rho - rho_ref) + dp,
        J2=rho * c_o * (u - u_ref) + dp,
        J3=-rho * c_o * (u - u_ref) + dp,
        rho_ref=rho_ref, u_ref=u_ref, p_ref=p_ref, c_o=c_o)


def characteristics_recompose(state):
    """Inverse of :func:`characteristics_decompose`; returns (rho, u, p)."""
    c_o = state.c_o
    rho = state.rho_ref + (-state.J1 + 0.5 * state.J2 + 0.5 * state.J3) / c_o**2
    u = state.u_ref + (state.J2 - state.J3) / (2. * rho * c_o)
    p = state.p_ref + 0.5 * (state.J2 + state.J3)
    return rho, u, p


def recycle_particles(particles, x_in=0., x_out=1., layers=6):
    """Move particles between the inlet buffer, the fluid and the outlet buffer.

    Inlet particles at or past ``x_in`` become fluid and are replaced by a
    copy ``layers`` spacings upstream; fluid at or past ``x_out`` becomes
    outlet; outlet particles beyond the buffer are deleted.

    Returns
    -------
    dict
        Number of particles ``spawned``, ``to_outlet`` and ``deleted``.
    """
    dx = particles.dx
    x = particles.position[:, 0]
    tag = particles.tag
    entering = np.flatnonzero((tag == Tag.INLET) & (x >= x_in))
    spawned = particles.take(entering)
    spawned.position[:, 0] -= layers * dx
    particles.tag[entering] = Tag.FLUID
    particles.pinned[entering] = False
    particles.p_ref[entering] = np.nan
    particles.u_ref[entering] = np.nan
    leaving = (particles.tag == Tag.FLUID) & (x >= x_out)
    particles.tag[leaving] = Tag.OUTLET
    gone = (particles.tag == Tag.OUTLET) & (x >= x_out + layers * dx)
    n_gone = int(gone.sum())
    if n_gone:
        particles.remove(gone)
    if len(entering):
        particles.extend(spawned)
    elif np.any(leaving):
        particles.touch()
    return {"spawned": len(entering), "to_outlet": int(leaving.sum()),
            "deleted": n_gone}


class OpenBoundary(metaclass=ABCMeta):
    """Base class of the buffer update methods."""

    subclasses = {}

    def __init__(self, side, cfg, x0=None, target="velocity", prescribed=None,
                 intensity_threshold=0.05, average_window=50):
        if side not in SIDES:
            raise ValueError(f"Unsupported open boundary side {side}")
        if target not in TARGETS:
            raise ValueError(f"Unsupported open boundary target {target}")
        self.side = side
        self.cfg = cfg
        self.x0 = (0. if side == "inlet" else 1.) if x0 is None else float(x0)
        self.target = target
        self.prescribed = prescribed
        self.intensity_threshold = intensity_threshold
        self.average_window = average_window
        self._cache = {}

    @classmethod
    def gettype(cls, name, *args, **kwargs):
        """Instantiate the method registered as ``name``."""
        if name not in cls.subclasses:
            raise ValueError(f"Unsupported open boundary method {name}")
        return cls.subclasses[name](*args, **kwargs)

    @classmethod
    def register_subclass(cls, name):
        def decorator(subclass):
            cls.subclasses[name] = subclass
            subclass.name = name
            return subclass
        return decorator

    @property
    def tag(self):
        return Tag.INLET if self.side == "inlet" else Tag.OUTLET

    def members(self, particles):
        return np.flatnonzero(particles.tag == self.tag)

    def __call__(self, particles, t, stage, dt):
        self.apply(particles, t, stage, dt)

    @abstractmethod
    def apply(self, particles, t, stage, dt):
        """Set the buffer state at time t of RK stage ``stage``."""

    def _sampler(self, name, particles, points):
        key = (id(particles), particles.version, len(particles))
        entry = self._cache.get(name)
        if entry is None or entry[0] != key:
            entry = (key, PointSampler(points, particles,
                                       particles.mask(Tag.FLUID)))
            self._cache[name] = entry
        return entry[1]


@OpenBoundary.register_subclass("donothing")
class DoNothing(OpenBoundary):
    """Outlet particles keep their state."""

    def __init__(self, side, *args, **kwargs):
        if side != "outlet":
            raise ValueError("donothing is an outlet method")
        super().__init__(side, *args, **kwargs)

    def apply(self, particles, t, stage, dt):
        pass


@OpenBoundary.register_subclass("mirror")
class Mirror(OpenBoundary):
    """Taylor-corrected MLS sample at the mirror point."""

    taylor = True

    def apply(self, particles, t, stage, dt):
        index = self.members(particles)
        if not len(index):
            return
        pos = particles.position[index]
        mirror = np.column_stack((2. * self.x0 - pos[:, 0], pos[:, 1]))
        sampler = self._sampler("mirror", particles, mirror)
        state = np.column_stack((particles.pressure, particles.velocity))
        value, grad, ok = sampler.mls(state, particles.volume)
        support = sampler.support
        if (~support).any():
            particles.diagnostics["open_no_support"] += int((~support).sum())
        if (support & ~ok).any():
            particles.diagnostics["mls_fallback"] += int((support & ~ok).sum())
        if self.taylor:
            value = value + np.einsum('pka,pa->pk', grad, pos - mirror)
        index, value = index[support], value[support]
        particles.pressure[index] = value[:, 0]
        particles.density[index] = eos_density(value[:, 0], self.cfg)
        particles.velocity[index] = value[:, 1:]
        particles.velocity_slip[index] = value[:, 1:]


@OpenBoundary.register_subclass("simple-mirror")
class SimpleMirror(Mirror):
    """Plain MLS sample at the mirror point."""

    taylor = False


@OpenBoundary.register_subclass("hybrid")
class Hybrid(OpenBoundary):
    """Characteristic extrapolation about time-averaged references."""

    def apply(self, particles, t, stage, dt):
        index = self.members(particles)
        if not len(index):
            return
        pos = particles.position[index]
        sampler = self._sampler("buffer", particles, pos)
        state, support = sampler.shepard(np.column_stack(
            (particles.density, particles.velocity, particles.pressure)))
        if (~support).any():
            particles.diagnostics["open_no_support"] += int((~support).sum())
        index, pos, state = index[support], pos[support], state[support]
        rho_s, u_s, p_s = state[:, 0], state[:, 1:3], state[:, 3]

        p_ref = particles.p_ref[index]
        u_ref = particles.u_ref[index]
        fresh = np.isnan(p_ref)
        p_ref[fresh] = p_s[fresh]
        if self.side == "inlet":
            u_ref = self._prescribed(pos, t)
        else:
            unset = np.isnan(u_ref).any(axis=1)
            u_ref[unset] = u_s[unset]
        if stage == 0:
            scale = self.cfg.rho_o * self.cfg.c_o * self.cfg.u_max
            quiet = np.abs(p_s - p_ref) / scale < self.intensity_threshold
            alpha = 1. / self.average_window
            p_ref[quiet] += alpha * (p_s[quiet] - p_ref[quiet])
            if self.side == "outlet":
                u_ref[quiet] += alpha * (u_s[quiet] - u_ref[quiet])
        particles.p_ref[index] = p_ref
        particles.u_ref[index] = u_ref

        chars = characteristics_decompose(
            rho_s, u_s[:, 0], p_s, eos_density(p_ref, self.cfg), u_ref[:, 0],
            p_ref, self.cfg.c_o)
        zero = np.zeros_like(chars.J1)
        if self.side == "inlet":
            chars.J1, chars.J2 = zero, zero
            v = u_ref[:, 1]
        else:
            chars.J3 = zero
            v = u_s[:, 1]
        rho, u, p = characteristics_recompose(chars)
        velocity = np.column_stack((u, v))
        particles.density[index] = rho
        particles.pressure[index] = p
        particles.velocity[index] = velocity
        particles.velocity_slip[index] = velocity

    def _prescribed(self, pos, t):
        if self.prescribed is None:
            raise ValueError("hybrid inlet needs a prescribed velocity")
        if callable(self.prescribed):
            return np.asarray(self.prescribed(pos, t), dtype=float).reshape(-1, 2)
        return np.broadcast_to(np.asarray(self.prescribed, dtype=float),
                               (len(pos), 2)).copy()


def apply_open_bc(method, particles, t, stage=0, dt=0.):
    """Run a buffer update once."""
    method(particles, t, stage, dt)
    return particles
