"""Finite-difference approximation of free-discontinuity energies."""

__version__ = "0.1.0"

from .errors import DomainError, UnsupportedError
from .families import PhiEpsFamily, PhiSpec, PsiSpec, eval_phi_eps, probe_hypotheses
from .kernels import Kernel, c_pn, j_alpha, omega, s_phi, sectionable_lift
from .energy1d import AnalyticSignal1D, Signal1D, f_eps_1d
from .energynd import Field2D, StencilQuadrature, f_eps_nd, mollify
from .limit import Sbv1D, limit_energy_1d, limit_energy_2d, target_limit
from .minimizer import DenoiseProblem, discrete_energy, eps_continuation, gradient, solve
