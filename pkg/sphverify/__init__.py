"""sphverify."""

__date__ = '2021-06-14'
__update__ = '2021-11-02'

import matplotlib as mpl
mpl.use("svg")  # noqa

from . import _logging
from ._version import __version__
from .verify import ConvergenceStudy

__all__ = ['ConvergenceStudy']
