"""Weakly-compressible scheme.

The scheme couples a linear equation of state with corrected-gradient
discretizations of the continuity and momentum equations, advances them
with a midpoint Runge-Kutta step and periodically regularizes the particle
distribution with an iterative shifting pass whose property transfer is a
first-order Taylor expansion.

Each right-hand-side evaluation runs in a fixed order:

1. pressure of fluid particles from the equation of state;
2. boundary hooks (open boundaries, solid boundaries, pinned values);
3. velocity gradients on every non-pinned particle;
4. continuity, with slip velocities read on solid particles, and momentum,
   with the no-slip gradients of solid particles in the viscous term.
"""

import logging
from dataclasses import dataclass

import numpy as np

from ._kernel import kernel_grad
from ._neighbors import build_neighbors
from ._operators import Interactions, gradient, viscous_operator
from ._particles import Tag


class SimulationDiverged(RuntimeError):
    """A state array became non-finite during integration."""

    def __init__(self, message, step=None, t=None, snapshot=None):
        super().__init__(message)
        self.step = step
        self.t = t
        self.snapshot = snapshot


@dataclass
class SchemeConfig:
    """Physical and numerical knobs of one run."""

    c_o: float = 20.
    rho_o: float = 1.
    nu: float = 0.01
    dt: float = None
    shift_every: int = 10
    delta: float = 0.
    p_background: float = 0.
    gravity: tuple = (0., 0.)
    advect: bool = True
    u_max: float = 1.
    neighbor_method: str = "cells"

    def __post_init__(self):
        if not self.c_o > 0:
            raise ValueError(f"c_o must be positive, got {self.c_o}")
        if not self.rho_o > 0:
            raise ValueError(f"rho_o must be positive, got {self.rho_o}")
        if self.nu < 0:
            raise ValueError(f"nu must not be negative, got {self.nu}")
        if self.delta < 0:
            raise ValueError(f"delta must not be negative, got {self.delta}")
        if self.shift_every < 0:
            raise ValueError(
                f"shift_every must not be negative, got {self.shift_every}")
        if self.neighbor_method not in ("cells", "kdtree"):
            raise ValueError(
                f"Unsupported neighbor search method {self.neighbor_method}")
        self.gravity = tuple(float(g) for g in self.gravity)

    def auto_dt(self, h):
        """Acoustic time step h / (c_o + U)."""
        return h / (self.c_o + self.u_max)


def eos_pressure(rho, cfg):
    """p = p_b + c_o^2 (rho - rho_o)."""
    return cfg.p_background + cfg.c_o**2 * (np.asarray(rho, dtype=float) - cfg.rho_o)


def eos_density(p, cfg):
    """Inverse of :func:`eos_pressure`."""
    return cfg.rho_o + (np.asarray(p, dtype=float) - cfg.p_background) / cfg.c_o**2


class InteractionCache:
    """Reuse interactions while the particle positions are unchanged."""

    def __init__(self, method="cells"):
        self.method = method
        self._key = None
        self._inter = None

    def __call__(self, particles):
        key = (id(particles), particles.version, len(particles))
        if key != self._key:
            self._inter = Interactions(particles, method=self.method)
            self._key = key
        return self._inter


def density_damping(particles, inter, cfg):
    """delta h c_o sum_j psi_ij . grad W_ij omega_j with the plain kernel gradient."""
    h = particles.h
    xji = -inter.xij
    r2 = np.sum(xji * xji, axis=1)
    drho = particles.density[inter.src] - particles.density[inter.dst]
    psi = 2. * drho * np.sum(xji * inter.dw, axis=1) / (r2 + 0.01 * h * h)
    return cfg.delta * h * cfg.c_o * inter.sum(psi * inter.volume[inter.src])


def continuity_rhs(particles, inter, cfg):
    """d rho / dt for every particle; only fluid values are integrated."""
    solid = particles.tag == Tag.SOLID
    source_velocity = np.where(solid[:, np.newaxis], particles.velocity_slip,
                               particles.velocity)
    grad = gradient(inter, particles.velocity, source_values=source_velocity)
    div = grad[:, 0, 0] + grad[:, 1, 1]
    rate = -particles.density * div + particles.src_continuity
    if cfg.delta > 0.:
        rate = rate + density_damping(particles, inter, cfg)
    return rate


def momentum_rhs(particles, inter, cfg):
    """du/dt = sum_j (p_i - p_j)/rho_i grad~W_ij omega_j + viscous + sources + g."""
    dp = particles.pressure[inter.dst] - particles.pressure[inter.src]
    force = inter.sum(dp[:, np.newaxis] * inter.dwc * inter.volume[inter.src, np.newaxis])
    acc_p = force / particles.density[:, np.newaxis]
    acc_v = viscous_operator(inter, particles.grad_u, cfg.nu)
    particles.acc_viscous[:] = acc_v
    return acc_p + acc_v + particles.src_momentum + np.asarray(cfg.gravity)


def compute_velocity_gradient(particles, inter):
    """grad u over all sources; pinned particles keep their prescribed gradient."""
    grad = gradient(inter, particles.velocity)
    free = ~particles.pinned
    particles.grad_u[free] = grad[free]


def evaluate(particles, cfg, cache):
    """Return (d rho/dt, du/dt) after boundary hooks have run."""
    inter = cache(particles)
    particles.volume[:] = inter.volume
    compute_velocity_gradient(particles, inter)
    rate = continuity_rhs(particles, inter, cfg)
    acc = momentum_rhs(particles, inter, cfg)
    particles.acceleration[:] = acc
    return rate, acc


def _check_finite(particles, t):
    for name in ("position", "velocity", "density", "pressure"):
        if not np.all(np.isfinite(getattr(particles, name))):
            raise SimulationDiverged(f"Non-finite {name} at t={t:g}", t=t)


def rk2_step(particles, cfg, hooks=(), t=0., dt=None, cache=None):
    """Advance fluid (and moving buffer) particles by one midpoint step.

    ``hooks`` are called as ``hook(particles, t_stage, stage, dt)`` after the
    fluid pressure update of each stage. Mirror particles may be rebuilt by a
    hook; they live at the tail of the arrays so the indices of the other
    particles stay valid for the whole step.
    """
    dt = cfg.dt if dt is None else dt
    if dt is None:
        dt = cfg.auto_dt(particles.h)
    cache = InteractionCache(cfg.neighbor_method) if cache is None else cache
    head = int(np.count_nonzero(~particles.mirror))
    fluid = np.flatnonzero(particles.tag[:head] == Tag.FLUID)
    moving = np.flatnonzero(np.isin(
        particles.tag[:head], (Tag.FLUID, Tag.INLET, Tag.OUTLET)))
    rho0 = particles.density[fluid].copy()
    u0 = particles.velocity[fluid].copy()
    x0 = particles.position[moving].copy()
    u_moving0 = particles.velocity[moving].copy()

    def stage(t_stage, index):
        particles.pressure[fluid] = eos_pressure(particles.density[fluid], cfg)
        for hook in hooks:
            hook(particles, t_stage, index, dt)
        return evaluate(particles, cfg, cache)

    rate, acc = stage(t, 0)
    particles.density[fluid] = rho0 + 0.5 * dt * rate[fluid]
    particles.velocity[fluid] = u0 + 0.5 * dt * acc[fluid]
    if cfg.advect and len(moving):
        particles.position[moving] = x0 + 0.5 * dt * u_moving0
        particles.touch()

    rate, acc = stage(t + 0.5 * dt, 1)
    u_half = particles.velocity[moving].copy()
    particles.density[fluid] = rho0 + dt * rate[fluid]
    particles.velocity[fluid] = u0 + dt * acc[fluid]
    if cfg.advect and len(moving):
        particles.position[moving] = x0 + dt * u_half
        particles.touch()
    particles.pressure[fluid] = eos_pressure(particles.density[fluid], cfg)
    _check_finite(particles, t + dt)
    return particles


def ipst_shift(particles, cfg=None, admits=None, max_iterations=10,
               method="cells"):
    """Shift fluid particles toward uniformity and Taylor-update their state.

    Each iteration moves fluid particles by -0.5 h^2 grad C with
    C_i = sum_j W_ij omega_j, limited to 0.1 dx per iteration and 0.5 dx in
    total, and stops once the largest move is below 0.01 h. A move is
    rejected when ``admits`` (a predicate on positions) returns False for
    it. Pressure, density and velocity are then corrected with the
    gradients of the pre-shift state.

    Returns
    -------
    numpy.ndarray
        Displacement of every fluid particle.
    """
    method = cfg.neighbor_method if cfg is not None else method
    fluid = np.flatnonzero(particles.tag == Tag.FLUID)
    if not len(fluid):
        return np.zeros((0, 2))
    spec = particles.kernel
    h, dx = particles.h, particles.dx
    inter = Interactions(particles, method=method)
    grad_p = gradient(inter, particles.pressure)[fluid]
    grad_rho = gradient(inter, particles.density)[fluid]
    grad_u = gradient(inter, particles.velocity)[fluid]
    volume = inter.volume

    start = particles.position[fluid].copy()
    nbrs = build_neighbors(start, spec.support_radius + dx,
                           sources=particles.position, method=method)
    for iteration in range(max_iterations):
        current = particles.position[fluid]
        xij = current[nbrs.dst] - particles.position[nbrs.src]
        dw = kernel_grad(xij, spec)
        grad_c = nbrs.sum(dw * volume[nbrs.src, np.newaxis])
        move = -0.5 * h * h * grad_c
        norm = np.linalg.norm(move, axis=1)
        scale = np.minimum(1., 0.1 * dx / np.maximum(norm, 1e-300))
        move *= scale[:, np.newaxis]
        target = current + move
        total = target - start
        tnorm = np.linalg.norm(total, axis=1)
        over = tnorm > 0.5 * dx
        if over.any():
            target[over] = start[over] + total[over] * (0.5 * dx / tnorm[over])[:, np.newaxis]
        if admits is not None:
            rejected = ~admits(target)
            target[rejected] = current[rejected]
        step = np.linalg.norm(target - current, axis=1)
        particles.position[fluid] = target
        if step.max() < 0.01 * h:
            break
    displacement = particles.position[fluid] - start
    particles.pressure[fluid] += np.sum(displacement * grad_p, axis=1)
    particles.density[fluid] += np.sum(displacement * grad_rho, axis=1)
    particles.velocity[fluid] += np.einsum('pab,pb->pa', grad_u, displacement)
    particles.touch()
    logging.debug(
        f"Shifted {len(fluid)} particles in {iteration + 1} iterations, "
        f"max {np.linalg.norm(displacement, axis=1).max() / dx:.3f} dx")
    return displacement
