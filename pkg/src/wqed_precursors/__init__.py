"""Broadband pulse transients in waveguide-QED emitter arrays."""
from .errors import (ConfigError, ContourGeometryError, ConvergenceError,
                     DegenerateSpectrumError, EigensolverError, FitError, NumericalError,
                     ResolutionError, RoutingError, SingularityError, StepSizeError, WQEDError)
from .model import (ArrayConfig, EITConfig, Edge, LevelScheme, PulseSpec, build_array,
                    build_eit, build_pulse, edge_spectrum, lattice, square_pulse_spectrum)
from .modes import ModeSet, array_modes, classify_modes, coupling_matrix, eigenmodes
from .response import (LinearDispersion, ResponseFn, t_cont, t_eit, t_finite_n, t_large_n,
                       t_nonmarkov, t_resolvent)
from .transients import (TimeSeries, bessel_transient, contour_residue_fallback,
                         edge_transient, eit_delay_estimate, eit_poles, full_pulse,
                         residue_transient_eit, residue_transient_qubits)
from .oracle import SpectralGrid, ode_propagate_qubits, ode_propagate_qutrits, spectral_propagate

__version__ = "0.1.0"
