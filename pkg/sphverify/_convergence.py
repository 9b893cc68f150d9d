"""Convergence studies with manufactured solutions.

A study runs one boundary method on one test configuration at several
resolutions, measures the L1 error of pressure and velocity against the
manufactured solution at a few saved instants and fits the observed order
of convergence.

Solid-wall studies hold the particles at their lattice positions and use
the local form of the source terms; open-boundary studies advect particles
through the inlet and outlet buffers and use the material form. In both,
the surface under test receives only the tested property from the method
(pressure for the Neumann condition, velocity otherwise); all other
boundary state is taken from the manufactured solution.
"""

import logging
import math
import time
from collections import Counter
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import pandas as pd

from ._geometry import TEST_SURFACE, DomainSpec, generate_domain
from ._mms import WAVE_IDS, get_solution, ms_apply_sources
from ._openbc import OpenBoundary, recycle_particles
from ._particles import Tag
from ._scheme import SchemeConfig, SimulationDiverged, eos_density
from ._simulation import Simulation
from ._solidbc import SolidBoundary
from .utils import run_mp

SOLID_METHODS = ("marrone", "adami", "colagrossi", "takeda", "randles",
                 "hashemi", "marongiu", "mms", "mms2l")
OPEN_METHODS = ("donothing", "mirror", "simple-mirror", "hybrid")
SOLID_DOMAINS = ("straight", "convex", "concave", "packed_convex",
                 "packed_concave")

# (condition, domain) -> manufactured solution
_SOLID_SOLUTIONS = {
    ("pressure", "straight"): "pres_num_d1",
    ("slip", "straight"): "slip_d1",
    ("noslip", "straight"): "noslip_d1",
    ("pressure", "curved"): "pres_num_d5",
    ("slip", "curved"): "slip_d5",
    ("noslip", "convex"): "noslip_d5",
    ("noslip", "concave"): "noslip_d6",
}

# case -> (manufactured solution, buffer under test, tested property)
OPEN_CASES = {
    "vel-in": ("io_vel", "inlet", "velocity"),
    "pres-in": ("io_pres", "inlet", "pressure"),
    "vel-wave-in": ("in_vel_wave", "inlet", "velocity"),
    "pres-wave-in": ("in_pres_wave", "inlet", "pressure"),
    "vel-out": ("io_vel", "outlet", "velocity"),
    "pres-out": ("io_pres", "outlet", "pressure"),
    "vel-wave-out": ("out_vel_wave", "outlet", "velocity"),
    "pres-wave-out": ("out_pres_wave", "outlet", "pressure"),
}

DEFAULT_RESOLUTIONS = (50, 100, 200)
WAVE_SOUND_SPEED = 40.

# kind, method, condition or case, domain, field(s), bound, comparator
ACCEPTANCE = [
    ("solid", "mms", "pressure", "straight", "p,u", (2., 0.3), "pm"),
    ("solid", "mms", "noslip", "straight", "p,u", (2., 0.3), "pm"),
    ("solid", "marrone", "pressure", "packed_concave", "p", 1.8, ">="),
    ("solid", "adami", "pressure", "packed_concave", "p", 1.8, ">="),
    ("solid", "adami", "noslip", "packed_concave", "u", 0.5, "<"),
    ("solid", "colagrossi", "slip", "packed_concave", "u", 0.5, "<"),
    ("solid", "hashemi", "pressure", "packed_concave", "p", 1.0, "<"),
    ("open", "hybrid", "vel-wave-in", "io_channel", "u", 1.7, ">="),
    ("open", "hybrid", "pres-wave-in", "io_channel", "p", 1.7, ">="),
    ("open", "hybrid", "vel-wave-out", "io_channel", "u", 1.7, ">="),
    ("open", "hybrid", "pres-wave-out", "io_channel", "p", 1.7, ">="),
    ("open", "donothing", "pres-out", "io_channel", "p", 1.7, ">="),
    ("open", "mirror", "pres-wave-out", "io_channel", "p", 0., "<"),
    ("open", "simple-mirror", "pres-wave-out", "io_channel", "p", 0., "<"),
    ("open", "mirror", "vel-in", "io_channel", "u", 1.7, ">="),
    ("open", "mirror", "vel-out", "io_channel", "u", 1.7, ">="),
    ("open", "simple-mirror", "vel-in", "io_channel", "u", 1.7, ">="),
    ("open", "simple-mirror", "vel-out", "io_channel", "u", 1.7, ">="),
    ("open", "hybrid", "vel-in", "io_channel", "u", 5e-3, "plateau"),
    ("open", "hybrid", "vel-out", "io_channel", "u", 5e-3, "plateau"),
]


def solid_solution(condition, domain):
    """Manufactured solution used for a wall condition on a domain."""
    shape = domain.replace("packed_", "")
    keys = [(condition, shape)]
    if shape != "straight":
        keys.append((condition, "curved"))
    for key in keys:
        if key in _SOLID_SOLUTIONS:
            return _SOLID_SOLUTIONS[key]
    raise ValueError(f"Unsupported combination {condition} on {domain}")


@dataclass
class VerificationCase:
    """One row of the study matrix."""

    kind: str
    method: str
    condition: str
    domain: str
    solution: str
    field: str
    steps: int
    c_o: float

    @property
    def name(self):
        return f"{self.kind}:{self.method}:{self.condition}:{self.domain}"


def solid_case(method, condition, domain, steps=None, c_o=20.):
    """Describe a solid-wall study."""
    if method not in SOLID_METHODS:
        raise ValueError(f"Unsupported solid boundary method {method}")
    if domain not in SOLID_DOMAINS:
        raise ValueError(f"Unsupported domain shape {domain}")
    solution = solid_solution(condition, domain)
    return VerificationCase(
        "solid", method, condition, domain, solution,
        "p" if condition == "pressure" else "u",
        100 if steps is None else steps, c_o)


def open_case(method, case, steps=None, c_o=20.):
    """Describe an open-boundary study; wave cases use c_o = 40 and 500 steps."""
    if method not in OPEN_METHODS:
        raise ValueError(f"Unsupported open boundary method {method}")
    if case not in OPEN_CASES:
        raise ValueError(f"Unsupported open boundary case {case}")
    solution, _, target = OPEN_CASES[case]
    wave = solution in WAVE_IDS
    return VerificationCase(
        "open", method, case, "io_channel", solution,
        "p" if target == "pressure" else "u",
        (500 if wave else 100) if steps is None else steps,
        WAVE_SOUND_SPEED if wave else c_o)


def load_solution(particles, solution, t, cfg, index=None, grad=True):
    """Set the state of ``index`` (default: all particles) from the solution."""
    index = np.arange(len(particles)) if index is None else index
    if not len(index):
        return
    ms = get_solution(solution)
    pos = particles.position[index]
    u, v, p, rho = ms.evaluate(pos[:, 0], pos[:, 1], t, cfg.c_o, cfg.rho_o)
    particles.pressure[index] = p + cfg.p_background
    particles.density[index] = rho
    particles.velocity[index] = np.column_stack((u, v))
    particles.velocity_slip[index] = particles.velocity[index]
    if grad:
        particles.grad_u[index] = ms.velocity_gradient(pos[:, 0], pos[:, 1], t)


class ManufacturedPinning:
    """Stage hooks imposing the manufactured solution around a tested boundary.

    :meth:`before` fills the fluid sources and the fully pinned particles;
    :meth:`after` runs once the method has acted and restores the
    untested properties of the tested particles.
    """

    def __init__(self, solution, cfg, tested, field):
        self.solution = solution
        self.cfg = cfg
        self.tested = tested
        self.field = field

    def before(self, particles, t, stage, dt):
        ms_apply_sources(self.solution, particles, t, self.cfg)
        load_solution(particles, self.solution, t, self.cfg,
                      np.flatnonzero(particles.pinned))

    def after(self, particles, t, stage, dt):
        index = np.flatnonzero(self.tested(particles) & ~particles.pinned)
        if not len(index):
            return
        ms = get_solution(self.solution)
        pos = particles.position[index]
        u, v, p, _ = ms.evaluate(pos[:, 0], pos[:, 1], t, self.cfg.c_o,
                                 self.cfg.rho_o)
        if self.field == "p":
            particles.velocity[index] = np.column_stack((u, v))
            particles.velocity_slip[index] = particles.velocity[index]
        else:
            pressure = p + self.cfg.p_background
            particles.pressure[index] = pressure
            particles.density[index] = eos_density(pressure, self.cfg)


def l1_sums(particles, solution, t, cfg):
    """Sums of |p - p_o| and |u - u_o| over fluid particles and their count."""
    fluid = particles.tag == Tag.FLUID
    pos = particles.position[fluid]
    u, v, p, _ = get_solution(solution).evaluate(pos[:, 0], pos[:, 1], t,
                                                  cfg.c_o, cfg.rho_o)
    err_p = np.abs(particles.pressure[fluid] - cfg.p_background - p)
    err_u = np.linalg.norm(particles.velocity[fluid] - np.column_stack((u, v)),
                           axis=1)
    return err_p.sum(), err_u.sum(), int(fluid.sum())


def l1_error(particles, solution, t, field, cfg):
    """Mean absolute error of ``p`` or ``u`` over the fluid particles."""
    if field not in ("p", "u"):
        raise ValueError(f"Unsupported field {field}")
    sum_p, sum_u, n = l1_sums(particles, solution, t, cfg)
    if not n:
        return math.nan
    return (sum_p if field == "p" else sum_u) / n


def fit_order(errors, dxs):
    """Least-squares slope of log(error) against log(dx).

    Non-positive or non-finite errors are dropped with a warning; nan is
    returned when fewer than two points remain.
    """
    errors = np.asarray(errors, dtype=float)
    dxs = np.asarray(dxs, dtype=float)
    if len(errors) != len(dxs):
        raise ValueError("errors and dxs must have the same length")
    if len(errors) < 2:
        raise ValueError("At least two resolutions are needed to fit an order")
    usable = np.isfinite(errors) & (errors > 0.) & (dxs > 0.)
    if not usable.all():
        logging.warning(
            f"Excluding {np.count_nonzero(~usable)} non-positive or failed "
            "errors from the order fit")
    if np.count_nonzero(usable) < 2:
        return math.nan
    slope, _ = np.polyfit(np.log(dxs[usable]), np.log(errors[usable]), 1)
    return float(slope)


@dataclass
class ConvergenceReport:
    """Errors and fitted orders of one study."""

    case: str
    method: str
    condition: str
    domain: str
    kernel: str
    c_o: float
    dx: list
    L1_p: list
    L1_u: list
    failed: list
    wall_time: list
    diagnostics: list = field(default_factory=list)
    order_p: float = math.nan
    order_u: float = math.nan

    def order(self, field_name):
        return self.order_p if field_name == "p" else self.order_u

    def to_frame(self):
        """One row per resolution."""
        frame = pd.DataFrame({
            "case": self.case, "method": self.method,
            "condition": self.condition, "domain": self.domain,
            "kernel": self.kernel, "c_o": self.c_o, "dx": self.dx,
            "L1_p": self.L1_p, "L1_u": self.L1_u,
            "wall_time": self.wall_time, "failed": self.failed,
        })
        if self.diagnostics:
            diag = pd.DataFrame(self.diagnostics).fillna(0).astype(int)
            frame = pd.concat([frame, diag.add_prefix("diag_")], axis=1)
        return frame

    def to_dict(self):
        """JSON-friendly summary."""
        data = asdict(self)
        for key in ("order_p", "order_u"):
            if math.isnan(data[key]):
                data[key] = None
        return data


def _build_solid(case, dx, cfg, kernel):
    domain = DomainSpec(case.domain, dx)
    method = SolidBoundary.gettype(
        case.method, case.condition, domain.test_interface(), cfg,
        solution=case.solution)
    spec = replace(method.domain_spec(case.domain, dx), kernel=kernel)
    particles = generate_domain(spec)
    load_solution(particles, case.solution, 0., cfg)
    pin = ManufacturedPinning(
        case.solution, cfg,
        lambda ps: (ps.tag == Tag.SOLID) & (ps.surface == TEST_SURFACE),
        case.field)
    return particles, [pin.before, method, pin.after], [], None


def _build_open(case, dx, cfg, options):
    spec = DomainSpec("io_channel", dx, pinned_layers=6,
                      kernel=options.get("kernel", "quintic"))
    particles = generate_domain(spec)
    load_solution(particles, case.solution, 0., cfg)
    _, side, target = OPEN_CASES[case.condition]
    ms = get_solution(case.solution)

    def prescribed(pos, t):
        u, v, _, _ = ms.evaluate(pos[:, 0], pos[:, 1], t, cfg.c_o, cfg.rho_o)
        return np.column_stack((u, v))

    method = OpenBoundary.gettype(
        case.method, side, cfg, target=target, prescribed=prescribed,
        intensity_threshold=options.get("intensity_threshold", 0.05),
        average_window=options.get("average_window", 50))
    tested_tag = Tag.INLET if side == "inlet" else Tag.OUTLET
    pinned_tag = Tag.OUTLET if side == "inlet" else Tag.INLET

    def recycle(ps, t):
        recycle_particles(ps, spec.inlet_x(), spec.outlet_x(), spec.pinned_layers)
        ps.pinned[:] = (ps.tag == Tag.SOLID) | (ps.tag == pinned_tag)

    recycle(particles, 0.)
    pin = ManufacturedPinning(case.solution, cfg,
                              lambda ps: ps.tag == tested_tag, case.field)
    return particles, [pin.before, method, pin.after], [recycle], spec.admits


def _run_resolution(item):
    """Run one resolution of a study; module level so worker pools can pickle it."""
    case, dx, cfg_kwargs, n_saves, options = item
    cfg = SchemeConfig(**cfg_kwargs)
    start = time.perf_counter()
    row = {"dx": dx, "failed": False}
    if case.kind == "solid":
        particles, hooks, step_hooks, admits = _build_solid(
            case, dx, cfg, options.get("kernel", "quintic"))
    else:
        particles, hooks, step_hooks, admits = _build_open(case, dx, cfg, options)
    sim = Simulation(particles, cfg, hooks, step_hooks, admits=admits,
                     output=options.get("output"))
    totals = {"p": 0., "u": 0., "n": 0}

    def save(ps, t, step):
        sum_p, sum_u, n = l1_sums(ps, case.solution, t, cfg)
        totals["p"] += sum_p
        totals["u"] += sum_u
        totals["n"] += n

    try:
        sim.prepare(0.)
        if case.steps == 0:
            save(particles, 0., 0)
        else:
            save_every = max(case.steps // max(n_saves, 1), 1)
            sim.run(case.steps, save_every=save_every, on_save=save)
    except SimulationDiverged as e:
        logging.error(f"{case.name} at dx={dx:g} failed: {e}")
        row["failed"] = True
    n = max(totals["n"], 1)
    row["L1_p"] = math.nan if row["failed"] else totals["p"] / n
    row["L1_u"] = math.nan if row["failed"] else totals["u"] / n
    row["wall_time"] = time.perf_counter() - start
    row["diagnostics"] = dict(sim.particles.diagnostics)
    return row


def study_config(case, resolutions, **overrides):
    """Scheme settings of a study, with Δt fixed by the finest resolution."""
    kwargs = {"c_o": case.c_o, "advect": case.kind == "open"}
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    cfg = SchemeConfig(**kwargs)
    if cfg.dt is None:
        finest = 1. / max(resolutions)
        cfg = replace(cfg, dt=cfg.auto_dt(1.2 * finest))
    return cfg


def run_case(case, resolutions=DEFAULT_RESOLUTIONS, n_saves=5, nproc=1,
             kernel="quintic", progress=False, options=None, **overrides):
    """Run a study at every resolution and fit the orders.

    ``resolutions`` are particle counts per unit length (dx = 1/n).
    """
    options = dict({} if options is None else options, kernel=kernel)
    resolutions = sorted(int(n) for n in resolutions)
    cfg = study_config(case, resolutions, **overrides)
    cfg_kwargs = asdict(cfg)
    items = [(case, 1. / n, cfg_kwargs, n_saves, options) for n in resolutions]
    rows = list(run_mp(nproc, func=_run_resolution, l=items, unordered=False,
                       total=len(items), desc=case.name, bar=progress))
    rows.sort(key=lambda row: -row["dx"])
    report = ConvergenceReport(
        case=case.condition, method=case.method,
        condition=(case.condition if case.kind == "solid"
                   else OPEN_CASES[case.condition][2]),
        domain=case.domain, kernel=kernel, c_o=cfg.c_o,
        dx=[row["dx"] for row in rows], L1_p=[row["L1_p"] for row in rows],
        L1_u=[row["L1_u"] for row in rows],
        failed=[row["failed"] for row in rows],
        wall_time=[row["wall_time"] for row in rows],
        diagnostics=[row["diagnostics"] for row in rows])
    if len(rows) >= 2:
        report.order_p = fit_order(report.L1_p, report.dx)
        report.order_u = fit_order(report.L1_u, report.dx)
    total = Counter()
    for row in rows:
        total.update(row["diagnostics"])
    if total:
        logging.warning(f"{case.name} diagnostics: {dict(total)}")
    return report


def acceptance_cases(kind=None):
    """The acceptance table as (VerificationCase, field, bound, comparator)."""
    out = []
    for entry_kind, method, condition, domain, field_name, bound, cmp in ACCEPTANCE:
        if kind is not None and entry_kind != kind:
            continue
        if entry_kind == "solid":
            case = solid_case(method, condition, domain)
        else:
            case = open_case(method, condition)
        out.append((case, field_name, bound, cmp))
    return out


def check_acceptance(report, field_name, bound, comparator):
    """True when the fitted order satisfies the bound.

    ``field_name`` is ``p``, ``u`` or both joined by a comma, in which case
    every field must pass. ``pm`` takes ``bound = (centre, tolerance)``.
    ``plateau`` bounds the error at the finest resolution instead of the order.
    """
    fields = field_name.split(",")
    if len(fields) > 1:
        return all(check_acceptance(report, name, bound, comparator)
                   for name in fields)
    if comparator == "plateau":
        errors = report.L1_p if field_name == "p" else report.L1_u
        finest = errors[-1] if errors else math.nan
        return bool(np.isfinite(finest) and finest <= bound)
    order = report.order(field_name)
    if math.isnan(order):
        return False
    if comparator == ">=":
        return order >= bound
    if comparator == "<":
        return order < bound
    if comparator == "pm":
        centre, tolerance = bound
        return abs(order - centre) <= tolerance
    raise ValueError(f"Unsupported comparator {comparator}")
