"""Flow past a circular cylinder.

The composed scheme in one run: a hybrid inlet with prescribed velocity,
a hybrid outlet, slip side walls and a no-slip cylinder, all with fixed
ghost particles sampling their mirror images. Drag and lift coefficients
are recorded every step and field snapshots at a fixed interval.
"""

import logging
import math
import re
from dataclasses import dataclass

import numpy as np
import pandas as pd

from ._geometry import CircleInterface, LineInterface
from ._openbc import OpenBoundary, recycle_particles
from ._particles import ParticleSet, Tag
from ._scheme import InteractionCache, SchemeConfig, SimulationDiverged
from ._simulation import Simulation
from ._solidbc import SolidBoundary
from .utils import WriteBuffer

TOP_WALL = 3
BOTTOM_WALL = 4
CYLINDER = 5


@dataclass
class CylinderCase:
    """Parameters of the cylinder run; lengths are in units of metres.

    The domain spans ``upstream`` diameters before and ``downstream``
    diameters after the cylinder centre and ``half_width`` diameters on
    either side of it.
    """

    D: float = 2.
    Re: float = 200.
    U: float = 1.
    dx: float = 0.2
    c_o: float = 10.
    rho_o: float = 1.
    delta: float = 0.0625
    t_final: float = 5.
    upstream: float = 5.
    downstream: float = 10.
    half_width: float = 5.
    layers: int = 6
    shift_every: int = 10
    snapshot_every: int = None
    neighbor_method: str = "cells"

    def __post_init__(self):
        if not self.D > 0 or not self.dx > 0:
            raise ValueError("D and dx must be positive")
        if self.dx > 0.25 * self.D:
            raise ValueError(f"dx={self.dx} is too coarse for D={self.D}")
        if self.U < 0:
            raise ValueError(f"U must not be negative, got {self.U}")

    @property
    def nu(self):
        return self.U * self.D / self.Re

    @property
    def p_o(self):
        return self.rho_o * self.c_o**2

    @property
    def x_in(self):
        return -self.upstream * self.D

    @property
    def x_out(self):
        return self.downstream * self.D

    @property
    def y_wall(self):
        return self.half_width * self.D

    @property
    def u_ref(self):
        """Speed normalising the force coefficients; 1 for a quiescent run."""
        return self.U if self.U > 0 else 1.

    def scheme_config(self):
        return SchemeConfig(
            c_o=self.c_o, rho_o=self.rho_o, nu=self.nu, delta=self.delta,
            p_background=self.p_o, shift_every=self.shift_every, advect=True,
            u_max=max(self.U, 1.), neighbor_method=self.neighbor_method)

    def admits(self, x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        return ((x[..., 0] >= self.x_in) & (x[..., 0] <= self.x_out)
                & (np.abs(x[..., 1]) <= self.y_wall) & (r >= 0.5 * self.D))


def parse_spacing(text, D=2.):
    """Read a spacing given as a number or as ``D/n``."""
    if isinstance(text, (int, float)):
        return float(text)
    match = re.fullmatch(r"\s*D\s*/\s*([0-9.]+)\s*", str(text))
    if match:
        return D / float(match.group(1))
    try:
        return float(text)
    except ValueError:
        raise ValueError(f"Cannot read spacing {text!r}; use a number or D/n") from None


def _grid(dx, x_lo, x_hi, y_lo, y_hi):
    xs = x_lo + (np.arange(int(round((x_hi - x_lo) / dx))) + 0.5) * dx
    ys = y_lo + (np.arange(int(round((y_hi - y_lo) / dx))) + 0.5) * dx
    xx, yy = np.meshgrid(xs, ys, indexing='ij')
    return np.column_stack((xx.ravel(), yy.ravel()))


def build_cylinder_domain(case):
    """Particles of the channel with the cylinder at the origin."""
    dx, pad = case.dx, case.layers * case.dx
    R = 0.5 * case.D
    core = _grid(dx, case.x_in, case.x_out, -case.y_wall, case.y_wall)
    r = np.linalg.norm(core, axis=1)
    fluid = core[r >= R]
    cylinder = core[r < R]
    inlet = _grid(dx, case.x_in - pad, case.x_in, -case.y_wall, case.y_wall)
    outlet = _grid(dx, case.x_out, case.x_out + pad, -case.y_wall, case.y_wall)
    top = _grid(dx, case.x_in - pad, case.x_out + pad, case.y_wall,
                case.y_wall + pad)
    bottom = top * np.array([1., -1.])
    interfaces = {
        TOP_WALL: LineInterface((0., case.y_wall), (0., -1.)),
        BOTTOM_WALL: LineInterface((0., -case.y_wall), (0., 1.)),
        CYLINDER: CircleInterface((0., 0.), R, fluid_outside=True),
    }
    groups = [
        (fluid, Tag.FLUID, -1, None),
        (inlet, Tag.INLET, -1, np.array([1., 0.])),
        (outlet, Tag.OUTLET, -1, np.array([-1., 0.])),
        (top, Tag.SOLID, TOP_WALL, interfaces[TOP_WALL]),
        (bottom, Tag.SOLID, BOTTOM_WALL, interfaces[BOTTOM_WALL]),
        (cylinder, Tag.SOLID, CYLINDER, interfaces[CYLINDER]),
    ]
    particles = ParticleSet(np.concatenate([g[0] for g in groups]), dx)
    start = 0
    for pos, tag, surface, normal in groups:
        sl = slice(start, start + len(pos))
        particles.tag[sl] = tag
        particles.surface[sl] = surface
        if isinstance(normal, np.ndarray):
            particles.normal[sl] = normal
        elif normal is not None:
            particles.normal[sl] = normal.normal(pos)
        start += len(pos)
    particles.volume[:] = dx * dx
    particles.density[:] = case.rho_o
    particles.pressure[:] = case.p_o
    particles.velocity[:] = (case.U, 0.)
    particles.velocity_slip[:] = particles.velocity
    return particles, interfaces


def cylinder_pairs(particles, inter):
    """Mask of (fluid, cylinder) interaction pairs."""
    fluid = particles.tag == Tag.FLUID
    body = ((particles.tag == Tag.SOLID) & (particles.surface == CYLINDER)
            & ~particles.mirror)
    return fluid[inter.dst] & body[inter.src]


def force_coefficients(particles, case, inter=None, cfg=None):
    """(c_d, c_l) of the fluid force on the cylinder.

    The force is the reaction of the pressure and viscous interactions
    between fluid particles and cylinder ghosts. The pressure pair uses the
    symmetric (p_i + p_j) form, whose pair reaction is the force on the body
    surface; the (p_i - p_j) pairs of the momentum equation only sum to the
    pressure gradient over a full support. The background pressure is
    removed so a uniform pressure gives no force.
    """
    cfg = case.scheme_config() if cfg is None else cfg
    if inter is None:
        inter = InteractionCache(cfg.neighbor_method)(particles)
    pairs = cylinder_pairs(particles, inter)
    i, j = inter.dst[pairs], inter.src[pairs]
    vol = inter.volume
    p = particles.pressure - cfg.p_background
    f_p = np.sum(((p[i] + p[j]) * vol[i] * vol[j])[:, np.newaxis]
                 * inter.dw[pairs], axis=0)
    diff = particles.grad_u[j] - particles.grad_u[i]
    acc = cfg.nu * np.einsum('pab,pb->pa', diff,
                             inter.dwc[pairs] * vol[j, np.newaxis])
    f_v = -np.sum((particles.density[i] * vol[i])[:, np.newaxis] * acc, axis=0)
    force = f_p + f_v
    scale = 0.5 * case.rho_o * case.u_ref**2 * case.D
    return force[0] / scale, force[1] / scale


def neighbor_mean_pressure(particles, inter):
    """p_avg,i = sum_j p_j / N_i over the neighbors of i."""
    total = inter.sum(particles.pressure[inter.src])
    count = inter.nbrs.counts()
    return np.where(count > 0, total / np.maximum(count, 1), particles.pressure)


def write_snapshot(particles, inter, filename):
    fluid = particles.tag == Tag.FLUID
    p_avg = neighbor_mean_pressure(particles, inter)
    pd.DataFrame({
        "x": particles.position[fluid, 0], "y": particles.position[fluid, 1],
        "p": particles.pressure[fluid], "p_avg": p_avg[fluid],
        "speed": np.linalg.norm(particles.velocity[fluid], axis=1),
    }).to_csv(filename, index=False)


def cylinder_hooks(case, cfg, interfaces):
    """Stage hooks in evaluation order: buffers, then walls, then the body."""
    return [
        OpenBoundary.gettype("hybrid", "inlet", cfg, x0=case.x_in,
                             prescribed=(case.U, 0.)),
        OpenBoundary.gettype("hybrid", "outlet", cfg, x0=case.x_out),
        SolidBoundary.gettype("marrone", "slip", interfaces[TOP_WALL], cfg,
                              surface=TOP_WALL),
        SolidBoundary.gettype("marrone", "slip", interfaces[BOTTOM_WALL], cfg,
                              surface=BOTTOM_WALL),
        SolidBoundary.gettype("marrone", "noslip", interfaces[CYLINDER], cfg,
                              surface=CYLINDER),
    ]


def run_cylinder(case, out="forces.csv", snapshot_prefix="cylinder",
                 progress=False):
    """Run the cylinder case and return the force history.

    Returns
    -------
    pandas.DataFrame
        Columns t, c_d, c_l and the mean fluid pressure p_mean.
    """
    cfg = case.scheme_config()
    particles, interfaces = build_cylinder_domain(case)
    n_fluid0 = int(np.count_nonzero(particles.tag == Tag.FLUID))

    def recycle(ps, t):
        recycle_particles(ps, case.x_in, case.x_out, case.layers)

    sim = Simulation(particles, cfg, cylinder_hooks(case, cfg, interfaces),
                     [recycle], admits=case.admits, output=snapshot_prefix,
                     progress=progress)
    steps = int(math.ceil(case.t_final / sim.dt))
    snapshot_every = case.snapshot_every or max(steps // 5, 1)
    logging.info(
        f"Cylinder: {len(particles)} particles, dt={sim.dt:.4g} s, "
        f"{steps} steps, nu={case.nu:g}")
    history = []
    with WriteBuffer(open(out, 'w')) as f:
        f.append("t,c_d,c_l\n")

        def record(ps, t, step):
            inter = sim.cache(ps)
            c_d, c_l = force_coefficients(ps, case, inter, cfg)
            fluid = ps.tag == Tag.FLUID
            history.append((t, c_d, c_l, float(ps.pressure[fluid].mean())))
            f.append(f"{t:.6f},{c_d:.6e},{c_l:.6e}\n")
            if step % snapshot_every == 0:
                write_snapshot(ps, inter, f"{snapshot_prefix}.snapshot.{step}.csv")

        sim.prepare(0.)
        try:
            sim.run(steps, save_every=1, on_save=record, desc="cylinder")
        except SimulationDiverged:
            logging.error("Cylinder run aborted")
            raise
    n_fluid = int(np.count_nonzero(sim.particles.tag == Tag.FLUID))
    drift = (n_fluid - n_fluid0) / max(int(round(2. * case.y_wall / case.dx)), 1)
    logging.info(f"Fluid particle count changed by {drift:+.2f} inlet columns")
    if sim.particles.diagnostics:
        logging.warning(f"Cylinder diagnostics: {dict(sim.particles.diagnostics)}")
    return pd.DataFrame(history, columns=["t", "c_d", "c_l", "p_mean"])
