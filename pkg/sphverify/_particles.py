"""Particle storage.

All particle state lives in one structure of arrays. Fluid, solid, inlet and
outlet particles share the same arrays and are told apart by ``tag``. Solid
particles additionally belong to a numbered ``surface`` so several walls with
different boundary treatments can coexist; ``pinned`` marks particles whose
state is prescribed from a manufactured solution. ``mirror`` particles are
regenerated at every evaluation and always sit at the tail of the arrays.

Positions and membership changes bump ``version`` so cached neighbor
information can be invalidated.
"""

from collections import Counter
from enum import IntEnum

import numpy as np
import pandas as pd

from ._kernel import KernelSpec


class Tag(IntEnum):
    """Particle kinds."""

    FLUID = 0
    SOLID = 1
    INLET = 2
    OUTLET = 3
    VIRTUAL = 4

    def __str__(self):
        return self.name.lower()


# name: (trailing shape, dtype, default)
FIELDS = {
    "position": ((2,), float, 0.),
    "velocity": ((2,), float, 0.),
    "velocity_slip": ((2,), float, 0.),
    "density": ((), float, 1.),
    "pressure": ((), float, 0.),
    "volume": ((), float, 0.),
    "normal": ((2,), float, 0.),
    "grad_u": ((2, 2), float, 0.),
    "src_momentum": ((2,), float, 0.),
    "src_continuity": ((), float, 0.),
    "acceleration": ((2,), float, 0.),
    "acc_viscous": ((2,), float, 0.),
    "p_ref": ((), float, np.nan),
    "u_ref": ((2,), float, np.nan),
    "tag": ((), np.int8, int(Tag.FLUID)),
    "surface": ((), np.int16, -1),
    "pinned": ((), bool, False),
    "mirror": ((), bool, False),
}


class ParticleSet:
    """Columnar particle arrays with a constant smoothing length."""

    def __init__(self, position, dx, hdx=1.2, kernel="quintic", **fields):
        position = np.asarray(position, dtype=float).reshape(-1, 2)
        self.dx = float(dx)
        self.hdx = float(hdx)
        self.kernel = KernelSpec(h=hdx * self.dx, family=kernel)
        self.version = 0
        self.diagnostics = Counter()
        n = len(position)
        for name, (shape, dtype, default) in FIELDS.items():
            setattr(self, name, np.full((n, *shape), default, dtype=dtype))
        self.position[:] = position
        for name, value in fields.items():
            if name not in FIELDS:
                raise ValueError(f"Unsupported particle field {name}")
            getattr(self, name)[:] = value

    @property
    def h(self):
        return self.kernel.h

    def __len__(self):
        return len(self.position)

    def mask(self, *tags):
        """Boolean mask of particles carrying any of the tags."""
        return np.isin(self.tag, [int(tag) for tag in tags])

    def touch(self):
        """Mark positions or membership as changed."""
        self.version += 1

    def take(self, index):
        """Return a new set holding the selected particles."""
        new = self._empty_like()
        for name in FIELDS:
            setattr(new, name, getattr(self, name)[index].copy())
        return new

    def copy(self):
        new = self.take(slice(None))
        new.version = self.version
        new.diagnostics = self.diagnostics.copy()
        return new

    def extend(self, other):
        """Append the particles of another set."""
        for name in FIELDS:
            setattr(self, name, np.concatenate(
                (getattr(self, name), getattr(other, name))))
        self.touch()

    def remove(self, mask):
        """Delete the masked particles, preserving the order of the rest."""
        keep = ~np.asarray(mask, dtype=bool)
        for name in FIELDS:
            setattr(self, name, getattr(self, name)[keep])
        self.touch()

    def check(self):
        """Validate physical invariants; raise ValueError on violation."""
        if np.any(self.density <= 0.):
            raise ValueError("Non-positive density found")
        if np.any(self.volume <= 0.):
            raise ValueError("Non-positive volume found")
        norms = np.linalg.norm(self.normal, axis=1)
        defined = norms > 0.
        if np.any(np.abs(norms[defined] - 1.) > 1e-12):
            raise ValueError("Normals must be unit vectors")

    def to_frame(self):
        """Flatten the state into a DataFrame for dumps and snapshots."""
        speed = np.linalg.norm(self.velocity, axis=1)
        return pd.DataFrame({
            "x": self.position[:, 0], "y": self.position[:, 1],
            "u": self.velocity[:, 0], "v": self.velocity[:, 1], "speed": speed,
            "p": self.pressure, "rho": self.density, "volume": self.volume,
            "nx": self.normal[:, 0], "ny": self.normal[:, 1],
            "tag": [str(Tag(tag)) for tag in self.tag],
            "surface": self.surface, "pinned": self.pinned,
        })

    def _empty_like(self):
        new = ParticleSet.__new__(ParticleSet)
        new.dx = self.dx
        new.hdx = self.hdx
        new.kernel = self.kernel
        new.version = 0
        new.diagnostics = Counter()
        return new
