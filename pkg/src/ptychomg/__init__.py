"""Ptychographic phase retrieval: PIE, LBFGS, truncated Newton and MG/OPT."""

from .field import (GeometryError, ProbeWindow, ScanGeometry, apply_probe, fft2,
                    generate_raster_scan, ifft2, real_inner, standard_scan)
from .forward import DiffractionStack, GroundTruth, NoiseSpec, add_noise, build_ground_truth, simulate
from . import kernels
from .metrics import convergence_factor, magnitude_rel_error, phase_ssim, relative_error
from .multigrid import (Hierarchy, build_coarse_level, build_hierarchy, mgopt_cycle, mgopt_driver,
                        prolong_field, restrict_data, restrict_field)
from .objectives import (DISTANCE, INTENSITY, DomainError, Objective, ObjectiveEval, eval_shifted,
                         phi_distance, phi_intensity_gaussian, project_modulus)
from .solvers import (EvalCounter, SolverConfig, SolverReport, backtracking_linesearch, lbfgs, pie,
                      truncated_newton)

__version__ = "0.1.0"
