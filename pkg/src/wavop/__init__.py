"""Wavelet-generated operators with measure convolution: construction and empirical bounds."""
from .atoms import (Atom, admissible_p_range, atom_image_report, atom_sweep, make_atom,
                    moment_order, verify_atom)
from .grids import Grid, GridFunction, wave_packets
from .kernels import (KernelSpec, convolved_decay_check, decay_scan, effective_wavelet,
                      kernel_derivative_eval, kernel_eval)
from .lattice import (SeriesSpec, circular_partial_sum, quadratic_partial_sum,
                      series_closed_form_bound, series_limit)
from .measures import BorelMeasure, GaussianDensity, BoxDensity, SingularPart, convolve, dirac
from .operator_core import (OperatorSpec, WeightRule, analyze, apply_operator, l2_certificate,
                            synthesize)
from .wavelets import IndexWindow, WaveletIndex, build_pair, build_system

__version__ = "0.1.0"
