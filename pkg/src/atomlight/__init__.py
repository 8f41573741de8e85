"""atomlight: collective light scattering from fixed two-level atom arrays.

Two solver families share one set of geometry/coupling primitives:

* exact   -- dense density-matrix Lindblad dynamics (the small-N oracle)
* cumulant -- mean-field hierarchies of order 1, 2 and 3, closed by setting
  the next cumulant to zero, including two-time photon correlations g2(tau)

Natural units: the single-atom decay rate and the transition wavelength are
both 1.
"""

from . import core, cumulant, exact, integrate, kernel, observables, twotime
from .core import (AtomArray, DetectionDirection, DriveField, NaturalUnits,
                   TransitionKind, build_line_array, build_standing_wave_array,
                   eigenmode_drive, plane_wave_drive)
from .kernel import CouplingSet, coupling_set

__version__ = "0.1.0"
