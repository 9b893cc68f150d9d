"""Manufactured solutions.

Thirteen closed-form velocity and pressure fields are provided: three
families for solid walls (Neumann pressure, slip, no-slip) on straight and
curved domains, and five for open boundaries (steady velocity and pressure
fields plus Gaussian waves crossing the inlet or the outlet). Density is
defined through the inverse equation of state, rho = rho_o + p / c_o^2, so
the EOS introduces no residue of its own.

Symbolic expressions are differentiated once with sympy and compiled with
``lambdify``; residues are therefore exact up to roundoff. The residue of a
field is what is left after substituting it in the weakly-compressible
equations,

    R_cont = d rho/dt + u . grad rho + rho div u
    R_mom = du/dt + (u . grad) u + grad p / rho - nu lap u

and is added to the solver as a source so that the field becomes a
solution. With ``material=False`` the advective terms are dropped; this is
the form used when particles are held at fixed positions.

A central finite-difference oracle (:func:`fd_residue`) recomputes the
residues from :func:`ms_eval` alone to certify the symbolic derivatives.
"""

from functools import lru_cache

import numpy as np
import pandas as pd
import sympy as sp

X, Y, T = sp.symbols("x y t", real=True)
C, RHO0, NU = sp.symbols("c rho0 nu", positive=True)
_ARGS = (X, Y, T, C, RHO0, NU)

_PI = sp.pi
_DECAY = sp.exp(-10 * T)
_R2 = (X - sp.Rational(1, 2))**2 + (Y - sp.Rational(1, 2))**2
_P_DECAY = (sp.cos(4 * _PI * X) + sp.cos(4 * _PI * Y)) * _DECAY
_P_STEADY = sp.cos(4 * _PI * X) + sp.cos(4 * _PI * Y)
_PROFILE = Y * (Y - 1) * sp.cos(2 * _PI * Y)
_IN_WAVE = sp.exp(-200 * (X - sp.Rational(1, 10) - 40 * T)**2)
_OUT_WAVE = sp.exp(-200 * (X - sp.Rational(9, 10) + 40 * T)**2)

# id: (u, v, p, region)
_CATALOG = {
    "pres_num_d1": (
        (Y - 1) * sp.sin(2 * _PI * X) * sp.cos(2 * _PI * Y),
        -(Y - 1) * sp.sin(2 * _PI * Y) * sp.cos(2 * _PI * X),
        X**2 + sp.cos(4 * _PI * X),
        "square"),
    "pres_num_d5": (
        (Y - 1) * sp.sin(2 * _PI * X) * sp.cos(2 * _PI * Y),
        -(Y - 1) * sp.sin(2 * _PI * Y) * sp.cos(2 * _PI * X),
        sp.atan2((Y - sp.Rational(1, 2))**2, (X - sp.Rational(1, 2))**2),
        "annulus"),
    "slip_d1": (
        (Y - 1) * sp.sin(2 * _PI * X) * sp.cos(2 * _PI * Y) + 1,
        (Y - 1)**2 * sp.sin(2 * _PI * Y),
        _P_STEADY,
        "square"),
    "slip_d5": (
        (Y - sp.Rational(1, 2)) * sp.sin(2 * _PI * X) * sp.cos(2 * _PI * Y),
        -(X - sp.Rational(1, 2)) * sp.sin(2 * _PI * X) * sp.cos(2 * _PI * Y),
        _P_STEADY,
        "annulus"),
    "noslip_d1": (
        (1 - Y)**2 * _DECAY * sp.sin(2 * _PI * X) * sp.cos(2 * _PI * Y),
        -(1 - Y)**2 * _DECAY * sp.sin(2 * _PI * Y) * sp.cos(2 * _PI * X),
        _P_DECAY,
        "square"),
    "noslip_d5": (
        (-_R2 + sp.Rational(1, 16)) * _DECAY * sp.sin(2 * _PI * _R2),
        -(-_R2 + sp.Rational(1, 16)) * _DECAY * sp.cos(2 * _PI * _R2),
        _P_DECAY,
        "annulus"),
    "noslip_d6": (
        (-_R2 + sp.Rational(1, 4)) * _DECAY * sp.sin(2 * _PI * _R2),
        -(-_R2 + sp.Rational(1, 4)) * _DECAY * sp.cos(2 * _PI * _R2),
        _P_DECAY,
        "annulus"),
    "io_vel": (
        _PROFILE * _DECAY + 1,
        -X**2 * (X - 1)**2 * _DECAY * sp.sin(2 * _PI * Y),
        _P_DECAY,
        "channel"),
    "in_vel_wave": (
        X**2 * _PROFILE * _IN_WAVE + 1,
        sp.Integer(0),
        _P_STEADY,
        "channel"),
    "out_vel_wave": (
        (X - 1)**2 * _PROFILE * _OUT_WAVE + 1,
        sp.Integer(0),
        _P_STEADY,
        "channel"),
    "io_pres": (
        _PROFILE * _DECAY + 1,
        -X * (X - 1) * _DECAY * sp.sin(2 * _PI * Y),
        _PROFILE * _DECAY,
        "channel"),
    "in_pres_wave": (
        _PROFILE + 1,
        sp.Integer(0),
        X**2 * _IN_WAVE * sp.cos(2 * _PI * Y),
        "channel"),
    "out_pres_wave": (
        _PROFILE + 1,
        sp.Integer(0),
        (X - 1)**2 * _OUT_WAVE * sp.cos(2 * _PI * Y),
        "channel"),
}

MS_IDS = tuple(_CATALOG)
WAVE_IDS = ("in_vel_wave", "out_vel_wave", "in_pres_wave", "out_pres_wave")


def _compile(expr):
    func = sp.lambdify(_ARGS, expr, "numpy")

    def evaluate(x, y, t, c, rho0, nu):
        x, y, t = np.broadcast_arrays(
            np.asarray(x, dtype=float), np.asarray(y, dtype=float),
            np.asarray(t, dtype=float))
        # constant expressions come back as scalars
        return np.zeros(x.shape) + func(x, y, t, c, rho0, nu)
    return evaluate


class ManufacturedSolution:
    """Compiled fields, derivatives and residues of one catalog entry."""

    def __init__(self, ms_id):
        if ms_id not in _CATALOG:
            raise ValueError(f"Unsupported manufactured solution {ms_id}")
        u, v, p, region = _CATALOG[ms_id]
        self.id = ms_id
        self.region = region
        self.wave = ms_id in WAVE_IDS
        rho = RHO0 + p / C**2
        vel = (u, v)
        self.exprs = {"u": u, "v": v, "p": p, "rho": rho}
        grad = [[sp.diff(f, s) for s in (X, Y)] for f in vel]
        div = grad[0][0] + grad[1][1]
        residues = {}
        for material in (True, False):
            advect_rho = (u * sp.diff(rho, X) + v * sp.diff(rho, Y)) if material else 0
            cont = sp.diff(rho, T) + advect_rho + rho * div
            mom = []
            for a, f in enumerate(vel):
                advect_u = (u * grad[a][0] + v * grad[a][1]) if material else 0
                lap = sp.diff(f, X, 2) + sp.diff(f, Y, 2)
                mom.append(sp.diff(f, T) + advect_u
                           + sp.diff(p, (X, Y)[a]) / rho - NU * lap)
            residues[material] = (cont, *mom)
        self._fields = {key: _compile(expr) for key, expr in self.exprs.items()}
        self._grad_u = [[_compile(g) for g in row] for row in grad]
        self._grad_p = [_compile(sp.diff(p, s)) for s in (X, Y)]
        self._residues = {key: [_compile(r) for r in value]
                          for key, value in residues.items()}

    def __repr__(self):
        return f"ManufacturedSolution({self.id!r})"

    def evaluate(self, x, y, t, c_o=20., rho_o=1.):
        """Return (u, v, p, rho) arrays."""
        return tuple(self._fields[key](x, y, t, c_o, rho_o, 0.)
                     for key in ("u", "v", "p", "rho"))

    def velocity_gradient(self, x, y, t):
        """Return G with G[..., a, b] = d u_a / d x_b."""
        rows = [np.stack([g(x, y, t, 1., 1., 0.) for g in row], axis=-1)
                for row in self._grad_u]
        return np.stack(rows, axis=-2)

    def pressure_gradient(self, x, y, t):
        return np.stack([g(x, y, t, 1., 1., 0.) for g in self._grad_p], axis=-1)

    def residue(self, x, y, t, c_o, rho_o, nu, material=True):
        """Return (R_cont, R_mom) with R_mom of shape (..., 2)."""
        cont, mx, my = (f(x, y, t, c_o, rho_o, nu)
                        for f in self._residues[bool(material)])
        return cont, np.stack((mx, my), axis=-1)


@lru_cache(maxsize=None)
def get_solution(ms_id):
    """Compiled solution for ``ms_id``; compiled once per process."""
    return ManufacturedSolution(ms_id)


def ms_eval(ms_id, x, y, t, c_o=20., rho_o=1.):
    """Exact (u, v, p, rho) of a manufactured solution."""
    return get_solution(ms_id).evaluate(x, y, t, c_o, rho_o)


def ms_residue(ms_id, x, y, t, cfg, material=True):
    """Exact source terms (R_cont, R_mom) for the scheme settings in cfg."""
    return get_solution(ms_id).residue(x, y, t, cfg.c_o, cfg.rho_o, cfg.nu,
                                       material=material)


def ms_apply_sources(ms_id, particles, t, cfg, material=None):
    """Fill the source fields of fluid particles at time t.

    Gravity is added by the momentum equation, so it is removed from the
    momentum source to keep the manufactured field a solution.
    """
    from ._particles import Tag

    material = cfg.advect if material is None else material
    fluid = particles.mask(Tag.FLUID)
    pos = particles.position[fluid]
    cont, mom = ms_residue(ms_id, pos[:, 0], pos[:, 1], t, cfg, material=material)
    particles.src_continuity[:] = 0.
    particles.src_momentum[:] = 0.
    particles.src_continuity[fluid] = cont
    particles.src_momentum[fluid] = mom - np.asarray(cfg.gravity, dtype=float)
    return particles


def fd_residue(ms_id, x, y, t, cfg, material=True, hx=1e-5, ht=1e-6):
    """Residues recomputed by central finite differences of :func:`ms_eval`."""
    def fields(dx=0., dy=0., dt=0.):
        u, v, p, rho = ms_eval(ms_id, x + dx, y + dy, t + dt, cfg.c_o, cfg.rho_o)
        return np.stack((u, v, p, rho))

    f0 = fields()
    fxp, fxm = fields(dx=hx), fields(dx=-hx)
    fyp, fym = fields(dy=hx), fields(dy=-hx)
    ft = (fields(dt=ht) - fields(dt=-ht)) / (2. * ht)
    fx = (fxp - fxm) / (2. * hx)
    fy = (fyp - fym) / (2. * hx)
    lap = (fxp + fxm + fyp + fym - 4. * f0) / hx**2
    u, v, p, rho = f0
    div = fx[0] + fy[1]
    cont = ft[3] + rho * div
    mom = np.stack([ft[a] + (fx[2], fy[2])[a] / rho - cfg.nu * lap[a]
                    for a in range(2)], axis=-1)
    if material:
        cont = cont + u * fx[3] + v * fy[3]
        mom = mom + np.stack([u * fx[a] + v * fy[a] for a in range(2)], axis=-1)
    return cont, mom


def sample_points(ms_id, n, rng=None, t_max=0.05):
    """Random (x, y, t) samples inside the region of a solution."""
    rng = np.random.default_rng(rng)
    region = get_solution(ms_id).region
    if region == "annulus":
        r = rng.uniform(0.2, 0.55, n)
        theta = rng.uniform(0., 2. * np.pi, n)
        x = 0.5 + r * np.cos(theta)
        y = 0.5 + r * np.sin(theta)
    else:
        x = rng.uniform(0., 1., n)
        y = rng.uniform(0., 1., n)
    t = rng.uniform(0., t_max, n)
    return x, y, t


def ms_dump(ms_id, grid, t, cfg, material=True):
    """Fields and residues of a solution on a grid x grid lattice of the unit square.

    Returns
    -------
    pandas.DataFrame
        Columns x, y, u, v, p, rho, R_cont, R_mom_x, R_mom_y.
    """
    coords = (np.arange(grid) + 0.5) / grid
    x, y = (a.ravel() for a in np.meshgrid(coords, coords, indexing='ij'))
    u, v, p, rho = ms_eval(ms_id, x, y, t, cfg.c_o, cfg.rho_o)
    cont, mom = ms_residue(ms_id, x, y, t, cfg, material=material)
    return pd.DataFrame({
        "x": x, "y": y, "u": u, "v": v, "p": p, "rho": rho,
        "R_cont": cont, "R_mom_x": mom[:, 0], "R_mom_y": mom[:, 1],
    })
