"""Test domains.

Every domain is cut from a lattice with nodes at ((i + 1/2) dx, (j + 1/2) dx).
Fluid fills either the unit square (``straight``, ``io_channel``) or the
annulus 0.25 <= r <= 0.5 around (0.5, 0.5) (``convex``, ``concave`` and their
packed versions). One interface per domain is the surface under test and
gets ``ghost_layers`` rows of solid particles with ``surface`` =
TEST_SURFACE; every other boundary is padded with ``pinned_layers`` rows of
particles whose state is prescribed.

Normals stored on particles point from the wall into the fluid.
"""

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd
from tqdm.auto import tqdm

from ._kernel import kernel_grad
from ._neighbors import build_neighbors
from ._particles import ParticleSet, Tag

TEST_SURFACE = 1
PINNED_SURFACE = 2
CENTER = np.array([0.5, 0.5])
SHAPES = ("straight", "convex", "concave", "packed_convex", "packed_concave",
          "io_channel")


class LineInterface:
    """Straight interface through ``point`` with unit ``normal`` into the fluid."""

    def __init__(self, point, normal):
        self.point = np.asarray(point, dtype=float)
        normal = np.asarray(normal, dtype=float)
        self.n = normal / np.linalg.norm(normal)

    def signed_distance(self, x):
        return (np.asarray(x, dtype=float) - self.point) @ self.n

    def normal(self, x):
        return np.broadcast_to(self.n, np.shape(x)).copy()

    def project(self, x):
        x = np.asarray(x, dtype=float)
        return x - self.signed_distance(x)[..., np.newaxis] * self.n

    def reflect(self, x):
        x = np.asarray(x, dtype=float)
        return x - 2. * self.signed_distance(x)[..., np.newaxis] * self.n


class CircleInterface:
    """Circle with the fluid outside (``fluid_outside``) or inside."""

    def __init__(self, center, radius, fluid_outside):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        self.sign = 1. if fluid_outside else -1.

    def _radial(self, x):
        rel = np.asarray(x, dtype=float) - self.center
        r = np.linalg.norm(rel, axis=-1)
        return rel, r

    def signed_distance(self, x):
        _, r = self._radial(x)
        return self.sign * (r - self.radius)

    def normal(self, x):
        rel, r = self._radial(x)
        return self.sign * rel / r[..., np.newaxis]

    def project(self, x):
        rel, r = self._radial(x)
        return self.center + rel * (self.radius / r)[..., np.newaxis]

    def reflect(self, x):
        x = np.asarray(x, dtype=float)
        return 2. * self.project(x) - x


@dataclass
class DomainSpec:
    """Geometry parameters of a test domain.

    ``on_surface`` places a single row of boundary particles on the test
    interface instead of ``ghost_layers`` rows outside it. ``kernel`` is
    the kernel family of the generated particles and of the packing.
    """

    shape: str
    dx: float
    ghost_layers: int = 6
    pinned_layers: int = 6
    on_surface: bool = False
    kernel: str = "quintic"

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"Unsupported domain shape {self.shape}")
        if not self.dx > 0:
            raise ValueError(f"dx must be positive, got {self.dx}")
        n = 1. / self.dx
        if abs(n - round(n)) > 1e-8 * n:
            raise ValueError(f"dx={self.dx} does not divide the unit extent")
        if self.ghost_layers < 0 or self.pinned_layers < 0:
            raise ValueError("Layer counts must not be negative")

    @property
    def curved(self):
        return self.shape in ("convex", "concave", "packed_convex", "packed_concave")

    @property
    def packed(self):
        return self.shape.startswith("packed_")

    def test_interface(self):
        """The analytic interface whose boundary treatment is tested."""
        if self.shape == "straight":
            return LineInterface((0., 1.), (0., -1.))
        if self.shape in ("convex", "packed_convex"):
            return CircleInterface(CENTER, 0.25, fluid_outside=True)
        if self.shape in ("concave", "packed_concave"):
            return CircleInterface(CENTER, 0.5, fluid_outside=False)
        return None

    def admits(self, x):
        """True where x lies in the fluid region."""
        x = np.asarray(x, dtype=float)
        if self.curved:
            r = np.linalg.norm(x - CENTER, axis=-1)
            return (r >= 0.25) & (r <= 0.5)
        return np.all((x >= 0.) & (x <= 1.), axis=-1)

    def inlet_x(self):
        return 0.

    def outlet_x(self):
        return 1.


def _lattice(dx, lo, hi):
    n_lo = int(np.floor(lo / dx + 1e-9))
    n_hi = int(np.ceil(hi / dx - 1e-9))
    coords = (np.arange(n_lo, n_hi) + 0.5) * dx
    xx, yy = np.meshgrid(coords, coords, indexing='ij')
    return np.column_stack((xx.ravel(), yy.ravel()))


def _assemble(spec, groups):
    dx = spec.dx
    position = np.concatenate([g[0] for g in groups])
    particles = ParticleSet(position, dx, kernel=spec.kernel)
    start = 0
    for pos, tag, surface, pinned, normal in groups:
        sl = slice(start, start + len(pos))
        particles.tag[sl] = tag
        particles.surface[sl] = surface
        particles.pinned[sl] = pinned
        if normal is not None:
            particles.normal[sl] = normal
        start += len(pos)
    particles.volume[:] = dx * dx
    return particles


def _straight(spec):
    dx, pad = spec.dx, spec.pinned_layers * spec.dx
    pts = _lattice(dx, -pad, 1. + pad)
    x, y = pts[:, 0], pts[:, 1]
    fluid = (x > 0) & (x < 1) & (y > 0) & (y < 1)
    above = (x > 0) & (x < 1) & (y > 1)
    pinned = ~fluid & ~above
    interface = spec.test_interface()
    groups = [(pts[fluid], Tag.FLUID, -1, False, None)]
    if spec.on_surface:
        n = int(round(1. / dx))
        row = np.column_stack(((np.arange(n) + 0.5) * dx, np.ones(n)))
        groups.append((row, Tag.SOLID, TEST_SURFACE, False, interface.normal(row)))
    else:
        test = above & (y < 1. + spec.ghost_layers * dx)
        groups.append((pts[test], Tag.SOLID, TEST_SURFACE, False,
                       interface.normal(pts[test])))
    groups.append((pts[pinned], Tag.SOLID, PINNED_SURFACE, True, None))
    return _assemble(spec, groups)


def _curved(spec):
    dx, pad = spec.dx, spec.pinned_layers * spec.dx
    convex = spec.shape in ("convex", "packed_convex")
    interface = spec.test_interface()
    pts = _lattice(dx, -pad, 1. + pad)
    r = np.linalg.norm(pts - CENTER, axis=1)
    fluid = (r >= 0.25) & (r <= 0.5)
    if convex:
        band = (r < 0.25) & (r > 0.25 - spec.ghost_layers * dx)
        pinned = (r > 0.5) & (r < 0.5 + pad)
    else:
        band = (r > 0.5) & (r < 0.5 + spec.ghost_layers * dx)
        pinned = (r < 0.25) & (r > 0.25 - pad)
    if spec.on_surface:
        fluid &= interface.signed_distance(pts) >= 0.5 * dx
        n = int(round(2. * np.pi * interface.radius / dx))
        theta = 2. * np.pi * (np.arange(n) + 0.5) / n
        test = interface.center + interface.radius * np.column_stack(
            (np.cos(theta), np.sin(theta)))
    else:
        test = pts[band]
    pinned_pts = pts[pinned]
    groups = [
        (pts[fluid], Tag.FLUID, -1, False, None),
        (test, Tag.SOLID, TEST_SURFACE, False, interface.normal(test)),
        (pinned_pts, Tag.SOLID, PINNED_SURFACE, True, None),
    ]
    return _assemble(spec, groups)


def _io_channel(spec):
    dx, layers = spec.dx, spec.pinned_layers
    n = int(round(1. / dx))
    coords = (np.arange(n) + 0.5) * dx
    buffer = (np.arange(layers) + 0.5) * dx
    fluid = np.column_stack([a.ravel() for a in np.meshgrid(coords, coords, indexing='ij')])
    inlet = np.column_stack([a.ravel() for a in np.meshgrid(-buffer, coords, indexing='ij')])
    outlet = np.column_stack([a.ravel() for a in np.meshgrid(1. + buffer, coords, indexing='ij')])
    xs = np.concatenate((-buffer[::-1], coords, 1. + buffer))
    walls_y = np.concatenate((-buffer[::-1], 1. + buffer))
    walls = np.column_stack([a.ravel() for a in np.meshgrid(xs, walls_y, indexing='ij')])
    groups = [
        (fluid, Tag.FLUID, -1, False, None),
        (inlet, Tag.INLET, -1, False, np.tile([1., 0.], (len(inlet), 1))),
        (outlet, Tag.OUTLET, -1, False, np.tile([-1., 0.], (len(outlet), 1))),
        (walls, Tag.SOLID, PINNED_SURFACE, True, None),
    ]
    return _assemble(spec, groups)


def generate_domain(spec):
    """Build the particle set of a test domain.

    Packed shapes are generated on the lattice and then relaxed with
    :func:`pack_domain`.
    """
    if spec.shape == "straight":
        particles = _straight(spec)
    elif spec.shape == "io_channel":
        particles = _io_channel(spec)
    else:
        particles = _curved(spec)
        if spec.packed:
            particles = pack_domain(particles, spec)
    logging.debug(
        f"Generated {spec.shape} domain with {len(particles)} particles "
        f"({np.count_nonzero(particles.tag == Tag.FLUID)} fluid)")
    return particles


def _conform_band(positions, interface, offset):
    """Place band particles evenly on the curve at signed distance ``offset``."""
    rel = positions - interface.center
    angle = np.arctan2(rel[:, 1], rel[:, 0])
    order = np.argsort(angle, kind='stable')
    n = len(positions)
    start = angle[order[0]] if n else 0.
    even = start + 2. * np.pi * np.arange(n) / max(n, 1)
    radius = interface.radius + interface.sign * offset
    out = np.empty_like(positions)
    out[order] = interface.center + radius * np.column_stack((np.cos(even), np.sin(even)))
    return out


def pack_domain(particles, spec, max_iterations=500, rebuild_every=20,
                tolerance=1e-3, progress=False):
    """Conform a staircase curved domain to its test interface.

    The fluid layer touching the interface (0 <= d < dx) is placed at
    d = dx/2 and the first ghost layer (-dx < d < 0) at d = -dx/2, both
    evenly spaced along the curve. The remaining fluid and the next two
    ghost layers are then relaxed with a shifting iteration while fluid
    keeps d >= dx and ghosts keep d <= -dx. Deeper ghosts and pinned
    particles stay on the lattice.

    When the iteration has not converged after ``max_iterations`` the
    iterate with the smallest largest move is kept and a warning is logged.
    """
    if not spec.curved:
        return particles
    particles = particles.copy()
    interface = spec.test_interface()
    dx = spec.dx
    kspec = particles.kernel
    h = kspec.h
    pos = particles.position
    sd = interface.signed_distance(pos)
    fluid = particles.tag == Tag.FLUID
    ghost = (particles.surface == TEST_SURFACE) & (particles.tag == Tag.SOLID)
    if spec.on_surface:
        ghost = np.zeros_like(ghost)
    fluid_band = fluid & (sd >= 0.) & (sd < dx)
    ghost_band = ghost & (sd < 0.) & (sd > -dx)
    pos[fluid_band] = _conform_band(pos[fluid_band], interface, 0.5 * dx)
    pos[ghost_band] = _conform_band(pos[ghost_band], interface, -0.5 * dx)
    free_fluid = fluid & ~fluid_band
    free_ghost = ghost & ~ghost_band & (sd >= -3. * dx)
    free = np.flatnonzero(free_fluid | free_ghost)
    is_fluid = fluid[free]
    volume = np.full(len(particles), dx * dx)

    def constrain(target, current):
        d = interface.signed_distance(target)
        ok = np.where(is_fluid, d >= dx, (d <= -dx) & (d >= -3. * dx))
        ok &= np.where(is_fluid, spec.admits(target), True)
        target[~ok] = current[~ok]
        return target

    best, best_move = pos[free].copy(), np.inf
    converged = False
    nbrs = None
    for iteration in tqdm(range(max_iterations), disable=not progress,
                          desc="packing"):
        if iteration % rebuild_every == 0:
            nbrs = build_neighbors(pos[free], kspec.support_radius + 2. * dx,
                                   sources=pos)
        current = pos[free]
        dw = kernel_grad(current[nbrs.dst] - pos[nbrs.src], kspec)
        move = -0.5 * h * h * nbrs.sum(dw * volume[nbrs.src, np.newaxis])
        norm = np.linalg.norm(move, axis=1)
        move *= np.minimum(1., 0.05 * dx / np.maximum(norm, 1e-300))[:, np.newaxis]
        target = constrain(current + move, current)
        largest = np.linalg.norm(target - current, axis=1).max(initial=0.)
        pos[free] = target
        if largest < best_move:
            best, best_move = target.copy(), largest
        if largest < tolerance * dx:
            converged = True
            break
    if not converged:
        logging.warning(
            f"Packing did not converge in {max_iterations} iterations "
            f"(largest move {best_move / dx:.2e} dx); keeping the best iterate")
        pos[free] = best
    particles.normal[ghost] = interface.normal(pos[ghost])
    particles.touch()
    return particles


def domain_dump(spec):
    """Positions, tags and normals of a generated domain as a DataFrame."""
    particles = generate_domain(spec)
    frame = particles.to_frame()
    return frame[["x", "y", "tag", "surface", "pinned", "nx", "ny"]]
