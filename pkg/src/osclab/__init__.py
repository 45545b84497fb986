"""Numerical laboratory for sharp L^p -> L^p' exponents of oscillatory
convolution operators with A-type phase surfaces."""

__version__ = "0.1.0"

from .orders import FLAT, parse_order, format_order
from .phase_model import (
    AmplitudeCutoff,
    PolynomialPhase,
    SmoothPhase,
    corpus_names,
    corpus_phase,
    eval_partial,
    make_bump,
    make_chi0,
    make_chi1,
)
from .normal_form import SurfaceProfile, analyze, decompose, trace_fold_curve, vanishing_order
from .exponents import ExponentQuery, ExponentResult, branch_crossover, k_sharp, sugimoto_upper
from .osc_quad import OscSample, eval_I1, eval_I_direct, reduce_in_x2, vdc_probe_1d
from .decay_lab import DecayFit, RegionProbe, decay_fit, lq_decay, region_probe, sup_decay
from .sharpness_lab import GrowthReport, WitnessSpec, build_witness, growth_fit, predicted_growth

__all__ = [
    "FLAT", "parse_order", "format_order",
    "AmplitudeCutoff", "PolynomialPhase", "SmoothPhase", "corpus_names", "corpus_phase",
    "eval_partial", "make_bump", "make_chi0", "make_chi1",
    "SurfaceProfile", "analyze", "decompose", "trace_fold_curve", "vanishing_order",
    "ExponentQuery", "ExponentResult", "branch_crossover", "k_sharp", "sugimoto_upper",
    "OscSample", "eval_I1", "eval_I_direct", "reduce_in_x2", "vdc_probe_1d",
    "DecayFit", "RegionProbe", "decay_fit", "lq_decay", "region_probe", "sup_decay",
    "GrowthReport", "WitnessSpec", "build_witness", "growth_fit", "predicted_growth",
]
