from importlib import metadata

from rfwave.base import Base, NumericalError, smoothstep
from rfwave.Grid import Grid, make_grid
from rfwave.Field import Decomposition, Field, decompose, shift_interpolate
from rfwave.Bistable import Bistable, ClampedBistable
from rfwave.RieszFeller import (
        IntegralCoeffs,
        RFParams,
        apply,
        apply_integral,
        apply_integral_small_alpha,
        apply_reflected,
        apply_spectral,
        coeffs,
        derivative_bound,
        estimate_bound,
        levy_coefficients,
        optimal_cutoff,
        symbol
    )
from rfwave.StableKernel import KernelReport, KernelTable, direct_inversion
from rfwave.StableKernel import build as build_kernel
from rfwave.CauchySolver import (
        ComparisonReport,
        SolverConfig,
        Trajectory,
        compare_evolutions,
        eta_lower_bound,
        evolve,
        far_field_ode,
        picard_iterate
    )
from rfwave.TravelingWave import (
        StabilityFit,
        TailFit,
        UniquenessReport,
        WaveExtraction,
        align,
        extract_wave,
        fit_tail,
        front_width,
        initial_zeta,
        predicted_tail_amplitude,
        speed_bound,
        speed_formula,
        speed_from_formula,
        stability_experiment,
        track_level,
        uniqueness_check
    )
from rfwave.Certificates import (
        Certificate,
        certify_wave_barriers,
        certify_ramp_barriers,
        check_selection,
        delta_star
    )
from rfwave.read_config import (
        ExperimentConfig,
        parse_config,
        read_config,
        read_experiment_config
    )


__all__ = [
        "Base",
        "NumericalError",
        "smoothstep",
        "Grid",
        "make_grid",
        "Decomposition",
        "Field",
        "decompose",
        "shift_interpolate",
        "Bistable",
        "ClampedBistable",
        "IntegralCoeffs",
        "RFParams",
        "apply",
        "apply_integral",
        "apply_integral_small_alpha",
        "apply_reflected",
        "apply_spectral",
        "coeffs",
        "derivative_bound",
        "estimate_bound",
        "levy_coefficients",
        "optimal_cutoff",
        "symbol",
        "KernelReport",
        "KernelTable",
        "build_kernel",
        "direct_inversion",
        "ComparisonReport",
        "SolverConfig",
        "Trajectory",
        "compare_evolutions",
        "eta_lower_bound",
        "evolve",
        "far_field_ode",
        "picard_iterate",
        "StabilityFit",
        "TailFit",
        "UniquenessReport",
        "WaveExtraction",
        "align",
        "extract_wave",
        "fit_tail",
        "front_width",
        "initial_zeta",
        "predicted_tail_amplitude",
        "speed_bound",
        "speed_formula",
        "speed_from_formula",
        "stability_experiment",
        "track_level",
        "uniqueness_check",
        "Certificate",
        "certify_wave_barriers",
        "certify_ramp_barriers",
        "check_selection",
        "delta_star",
        "ExperimentConfig",
        "parse_config",
        "read_config",
        "read_experiment_config",
    ]

__version__ = metadata.version("rfwave")
