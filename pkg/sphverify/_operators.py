"""Consistency-corrected SPH operators and interpolants.

Gradients use kernel gradients premultiplied by the per-particle correction
matrix B_i = M_i^-1, with

    M_i = sum_j grad W_ij (x) (x_j - x_i) omega_j,

so that sum_j (f_j - f_i) B_i grad W_ij omega_j reproduces the gradient of
any linear field. For a radial kernel M_i is symmetric, hence it coincides
with sum_j (x_j - x_i) (x) grad W_ij omega_j. When M_i is too badly
conditioned the uncorrected gradient is used and the particle is counted in
the ``singular_correction`` diagnostic.

Interpolation at arbitrary points (ghost mirrors, buffer particles, finite
difference stencils) goes through :class:`PointSampler`, which offers Shepard
(zeroth order) and moving least squares (first order, basis {1, x, y})
evaluations.
"""

import logging

import numpy as np
import pandas as pd

from ._kernel import kernel_eval, kernel_grad
from ._neighbors import build_neighbors

COND_LIMIT = 1e8


def _inverse_2x2(m):
    a, b, c, d = m[:, 0, 0], m[:, 0, 1], m[:, 1, 0], m[:, 1, 1]
    det = a * d - b * c
    inv = np.empty_like(m)
    with np.errstate(divide='ignore', invalid='ignore'):
        inv[:, 0, 0] = d / det
        inv[:, 0, 1] = -b / det
        inv[:, 1, 0] = -c / det
        inv[:, 1, 1] = a / det
    return inv


def _safe_cond(m):
    cond = np.full(len(m), np.inf)
    finite = np.all(np.isfinite(m.reshape(len(m), -1)), axis=1)
    if finite.any():
        with np.errstate(divide='ignore', invalid='ignore'):
            cond[finite] = np.linalg.cond(m[finite])
    return np.nan_to_num(cond, nan=np.inf)


class Interactions:
    """Neighbor pairs of a particle set with kernel data and corrections.

    Everything here depends only on positions, so one instance can be
    reused as long as ``particles.version`` is unchanged.
    """

    def __init__(self, particles, method="cells", cutoff=None):
        self.version = particles.version
        self.spec = particles.kernel
        cutoff = self.spec.support_radius if cutoff is None else cutoff
        self.nbrs = build_neighbors(particles.position, cutoff, method=method)
        self.dst, self.src = self.nbrs.dst, self.nbrs.src
        self.xij = particles.position[self.dst] - particles.position[self.src]
        self.w = kernel_eval(self.xij, self.spec)
        self.dw = kernel_grad(self.xij, self.spec)
        self.volume = summation_volume(self)
        self.correction, self.singular = correction_matrices(self, self.volume)
        if self.singular.any():
            particles.diagnostics["singular_correction"] += int(self.singular.sum())
        self.dwc = corrected_gradient_weights(self)

    def sum(self, values):
        return self.nbrs.sum(values)


def summation_volume(inter):
    """omega_i = 1 / sum_j W_ij, self contribution included."""
    w0 = inter.spec.value(0.)
    return 1. / (w0 + inter.nbrs.sum(inter.w))


def correction_matrices(inter, volume):
    """Return (B, singular) with B the inverse moment matrix per particle."""
    xji = -inter.xij
    moment = inter.nbrs.sum(
        inter.dw[:, :, np.newaxis] * xji[:, np.newaxis, :]
        * volume[inter.src, np.newaxis, np.newaxis])
    singular = _safe_cond(moment) > COND_LIMIT
    correction = np.broadcast_to(np.eye(2), moment.shape).copy()
    if (~singular).any():
        correction[~singular] = _inverse_2x2(moment[~singular])
    return correction, singular


def corrected_gradient_weights(inter):
    """Per-pair corrected kernel gradients B_i grad W_ij."""
    return np.einsum('pab,pb->pa', inter.correction[inter.dst], inter.dw)


def gradient(inter, values, volume=None, source_values=None, pair_mask=None):
    """sum_j (f_j - f_i) grad~W_ij omega_j.

    Scalars give (n, 2) gradients; vectors give (n, 2, 2) tensors with
    G[a, b] = d f_a / d x_b. ``source_values`` substitutes the values read on
    the source side (e.g. slip velocities on solids); ``pair_mask`` restricts
    the sources.
    """
    volume = inter.volume if volume is None else volume
    values = np.asarray(values, dtype=float)
    source_values = values if source_values is None else source_values
    diff = source_values[inter.src] - values[inter.dst]
    weight = inter.dwc * volume[inter.src, np.newaxis]
    if pair_mask is not None:
        weight = weight * pair_mask[:, np.newaxis]
    if diff.ndim == 1:
        return inter.sum(diff[:, np.newaxis] * weight)
    return inter.sum(diff[:, :, np.newaxis] * weight[:, np.newaxis, :])


def divergence(inter, velocity, volume=None, source_velocity=None):
    """sum_j (u_j - u_i) . grad~W_ij omega_j."""
    grad = gradient(inter, velocity, volume, source_velocity)
    return grad[:, 0, 0] + grad[:, 1, 1]


def viscous_operator(inter, grad_u, nu, volume=None):
    """nu sum_j (grad u_j - grad u_i) . grad~W_ij omega_j."""
    volume = inter.volume if volume is None else volume
    diff = grad_u[inter.src] - grad_u[inter.dst]
    weight = inter.dwc * volume[inter.src, np.newaxis]
    return nu * inter.sum(np.einsum('pab,pb->pa', diff, weight))


class PointSampler:
    """Kernel pairs between evaluation points and a subset of particles.

    The pairs are built once; Shepard and MLS evaluations of any number of
    fields then reuse them.
    """

    def __init__(self, points, particles, source_mask=None, method="cells",
                 cutoff=None):
        self.version = particles.version
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        self.n_points = len(points)
        spec = particles.kernel
        self.h = spec.h
        if source_mask is None:
            source_mask = np.ones(len(particles), dtype=bool)
        index = np.flatnonzero(source_mask)
        cutoff = spec.support_radius if cutoff is None else cutoff
        nbrs = build_neighbors(points, cutoff, sources=particles.position[index],
                               method=method)
        self.nbrs = nbrs
        self.dst = nbrs.dst
        self.src = index[nbrs.src]
        self.xji = particles.position[self.src] - points[self.dst]
        self.w = kernel_eval(self.xji, spec)
        self.wsum = nbrs.sum(self.w)
        self.support = self.wsum > 0.
        self._mls = None

    def shepard(self, values):
        """sum_j f_j W_j / sum_j W_j and the support flags."""
        values = np.asarray(values, dtype=float)
        weighted = values[self.src] * self.w.reshape(-1, *([1] * (values.ndim - 1)))
        total = self.nbrs.sum(weighted)
        denominator = np.where(self.support, self.wsum, 1.)
        result = total / denominator.reshape(-1, *([1] * (values.ndim - 1)))
        return result, self.support

    def _prepare_mls(self, volume):
        basis = np.column_stack((np.ones(len(self.w)), self.xji / self.h))
        weight = self.w * volume[self.src]
        moment = self.nbrs.sum(weight[:, np.newaxis, np.newaxis]
                               * basis[:, :, np.newaxis] * basis[:, np.newaxis, :])
        ok = _safe_cond(moment) <= COND_LIMIT
        inverse = np.zeros_like(moment)
        if ok.any():
            inverse[ok] = np.linalg.inv(moment[ok])
        self._mls = (basis, weight, inverse, ok)

    def mls(self, values, volume):
        """Linear moving least squares value and gradient at each point.

        Points whose moment matrix is singular fall back to Shepard with a
        zero gradient; their flag in the returned ``ok`` array is False.
        """
        if self._mls is None:
            self._prepare_mls(volume)
        basis, weight, inverse, ok = self._mls
        values = np.asarray(values, dtype=float)
        flat = values.reshape(len(values), -1)
        rhs = self.nbrs.sum(
            (weight[:, np.newaxis] * basis)[:, :, np.newaxis] * flat[self.src][:, np.newaxis, :])
        coef = np.einsum('pab,pbk->pak', inverse, rhs)
        value = coef[:, 0, :]
        grad = np.moveaxis(coef[:, 1:, :], 1, 2) / self.h
        if (~ok).any():
            fallback, _ = self.shepard(flat)
            value[~ok] = fallback[~ok]
            grad[~ok] = 0.
        trailing = values.shape[1:]
        return (value.reshape((self.n_points, *trailing)),
                grad.reshape((self.n_points, *trailing, 2)), ok & self.support)


def shepard_interpolate(points, particles, values, source_mask=None):
    """Shepard interpolation of ``values`` at ``points``; returns (f, support)."""
    return PointSampler(points, particles, source_mask).shepard(values)


def mls_interpolate(points, particles, values, source_mask=None, volume=None):
    """First-order consistent interpolation; returns (f, grad f, ok)."""
    volume = particles.volume if volume is None else volume
    return PointSampler(points, particles, source_mask).mls(values, volume)


def _check_fields(position):
    x, y = position[:, 0], position[:, 1]
    k = 4. * np.pi
    velocity = np.column_stack((np.sin(k * (x + y)), np.cos(k * (x + y))))
    pressure = np.sin(k * x) + np.sin(k * y)
    grad_p = np.column_stack((k * np.cos(k * x), k * np.cos(k * y)))
    laplacian = -2. * k * k * velocity
    div = k * np.cos(k * (x + y)) - k * np.sin(k * (x + y))
    return velocity, pressure, grad_p, laplacian, div


def unit_lattice(dx, extent=1.):
    n = int(round(extent / dx))
    coords = (np.arange(n) + 0.5) * dx
    xx, yy = np.meshgrid(coords, coords, indexing='ij')
    return np.column_stack((xx.ravel(), yy.ravel()))


def layer_skip_test(resolutions, n_skip, kernel="wendland_c2", hdx=1.2):
    """L1 errors of corrected operators on a unit square without ghosts.

    Errors are averaged over particles inside the box shrunk by n_skip
    particle layers on every side.

    The velocity gradient of particles with a truncated support is only
    first order, so the Laplacian built on it carries an O(1) error in a band
    about two supports wide. With n_skip = 0 that band drags the fitted order
    of L1_lap towards one as dx shrinks; skipping two layers restores second
    order over the usual 1/50 to 1/200 range with the default Wendland C2
    kernel. With the quintic spline the band is wider and the n_skip = 2
    order is about 1.85 over the same range.

    Returns
    -------
    pandas.DataFrame
        Columns n_skip, dx, L1_grad, L1_lap, L1_div.
    """
    from ._particles import ParticleSet

    rows = []
    for dx in resolutions:
        particles = ParticleSet(unit_lattice(dx), dx, hdx=hdx, kernel=kernel)
        velocity, pressure, grad_p, laplacian, div = _check_fields(particles.position)
        inter = Interactions(particles)
        grad_u = gradient(inter, velocity)
        approx_grad = gradient(inter, pressure)
        approx_lap = viscous_operator(inter, grad_u, 1.)
        approx_div = grad_u[:, 0, 0] + grad_u[:, 1, 1]
        margin = n_skip * dx
        x, y = particles.position[:, 0], particles.position[:, 1]
        inner = (x > margin) & (x < 1. - margin) & (y > margin) & (y < 1. - margin)
        rows.append({
            "n_skip": n_skip, "dx": dx,
            "L1_grad": np.mean(np.linalg.norm(approx_grad - grad_p, axis=1)[inner]),
            "L1_lap": np.mean(np.linalg.norm(approx_lap - laplacian, axis=1)[inner]),
            "L1_div": np.mean(np.abs(approx_div - div)[inner]),
        })
        logging.info(
            f"Layer test n={n_skip} dx={dx:g}: grad {rows[-1]['L1_grad']:.3e}, "
            f"laplacian {rows[-1]['L1_lap']:.3e}")
    return pd.DataFrame(rows)
