"""Cyclic S-matrix aperture multiplexing for single-element ultrasound receivers, in simulation."""
from .codes import (CodeKind, CodeMatrix, MaskPattern, build_code, build_cyclic_s_matrix,
                    build_sylvester_hadamard, is_valid_s_order, mask_pattern_from_code,
                    quadratic_residue_sequence, s_matrix_inverse)
from .multiplex import (GainEstimate, NoiseModel, SignalMatrix, SignalRole, average_mse, demultiplex,
                        monte_carlo_gain, multiplex_measure, noise_covariance, snr_gain, theoretical_gain)
from .experiments import (ExperimentReport, ScanConfig, run_angular_response, run_field_map,
                          run_gain_benchmark, run_scenario, run_uniformity_scan)

__version__ = "0.1.0"
