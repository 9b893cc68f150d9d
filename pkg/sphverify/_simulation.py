"""Time loop shared by the convergence studies and the cylinder run."""

import logging

from tqdm.auto import tqdm

from ._scheme import InteractionCache, SimulationDiverged, ipst_shift, rk2_step


class Simulation:
    """Drive :func:`rk2_step` with boundary hooks, shifting and saving.

    Parameters
    ----------
    particles : ParticleSet
    cfg : SchemeConfig
    hooks : sequence of callables
        Stage hooks ``hook(particles, t, stage, dt)`` run before every
        right-hand-side evaluation, in order.
    step_hooks : sequence of callables
        ``hook(particles, t)`` run once before every step (particle
        recycling, role flags).
    admits : callable, optional
        Predicate on positions restricting shifted particles to the fluid
        region.
    output : str, optional
        Prefix of the snapshot written when the run diverges.
    """

    def __init__(self, particles, cfg, hooks=(), step_hooks=(), admits=None,
                 output=None, progress=False):
        self.particles = particles
        self.cfg = cfg
        self.hooks = list(hooks)
        self.step_hooks = list(step_hooks)
        self.admits = admits
        self.output = output
        self.progress = progress
        self.cache = InteractionCache(cfg.neighbor_method)
        self.t = 0.
        self.step = 0

    @property
    def dt(self):
        if self.cfg.dt is not None:
            return self.cfg.dt
        return self.cfg.auto_dt(self.particles.h)

    def prepare(self, t=None):
        """Run the stage hooks once so boundary particles hold a valid state."""
        t = self.t if t is None else t
        for hook in self.step_hooks:
            hook(self.particles, t)
        for hook in self.hooks:
            hook(self.particles, t, 0, 0.)

    def run(self, steps, save_every=None, on_save=None, desc="steps"):
        """Advance ``steps`` steps, calling ``on_save(particles, t, step)``.

        Raises
        ------
        SimulationDiverged
            With ``step``, ``t`` and ``snapshot`` filled in.
        """
        dt = self.dt
        for _ in tqdm(range(steps), disable=not self.progress, desc=desc):
            for hook in self.step_hooks:
                hook(self.particles, self.t)
            try:
                rk2_step(self.particles, self.cfg, self.hooks, t=self.t, dt=dt,
                         cache=self.cache)
            except SimulationDiverged as e:
                self.particles.diagnostics["nan_abort"] += 1
                e.step = self.step
                e.snapshot = self.snapshot()
                logging.error(
                    f"Simulation diverged at step {e.step} (t={e.t:g}); "
                    f"snapshot written to {e.snapshot}")
                raise
            self.t += dt
            self.step += 1
            if (self.cfg.advect and self.cfg.shift_every
                    and self.step % self.cfg.shift_every == 0):
                ipst_shift(self.particles, self.cfg, admits=self.admits)
            if save_every and on_save is not None and self.step % save_every == 0:
                on_save(self.particles, self.t, self.step)
        return self.particles

    def snapshot(self):
        prefix = self.output if self.output is not None else "sphverify"
        filename = f"{prefix}.diverged.{self.step}.csv"
        self.particles.to_frame().to_csv(filename, index=False)
        return filename
