from .torus.torus_geometry import TorusPoint, minimal_displacement, torus_distance
from .torus.coverage_grid import CoverageGrid
from .systems.exact_vector import ExactVector, SymbolBasis
from .systems.system_descriptor import AffineMap, Automorphism, ProductSystem, SystemDescriptor, Translation
from .systems.subshift import Subshift, SubshiftDescriptor, SymbolicPoint
from .flow.slowed_field import SlowedLinearField
from .flow.flow_integrator import IntegratorConfig, TimeSMap, integrate, time_s_map
from .constructions.example_builder import build_product_pm_flow, build_slowed_system, build_translation_factor_product
from .analysis.orbit_analyzer import classify_orbit, coverage_experiment, residue_limit_sets
from .analysis.stability_estimator import equicontinuity_modulus
from .decider.smith_form import smith_normal_form
from .decider.affine_decider import MinimalityVerdict, Verdict, decide_affine_minimality
from .set_dynamics.raster_set import RasterDomain, RasterMap, RasterSet
from .set_dynamics.set_chains import birkhoff_chain, preimage_intersection_chain
from .reporting.report_store import ReportStore
from .interface.experiment_runner import ExperimentRunner

__all__ = [
    'TorusPoint',
    'minimal_displacement',
    'torus_distance',
    'CoverageGrid',
    'ExactVector',
    'SymbolBasis',
    'SystemDescriptor',
    'Translation',
    'AffineMap',
    'Automorphism',
    'ProductSystem',
    'Subshift',
    'SubshiftDescriptor',
    'SymbolicPoint',
    'SlowedLinearField',
    'IntegratorConfig',
    'TimeSMap',
    'integrate',
    'time_s_map',
    'build_slowed_system',
    'build_product_pm_flow',
    'build_translation_factor_product',
    'classify_orbit',
    'coverage_experiment',
    'residue_limit_sets',
    'equicontinuity_modulus',
    'smith_normal_form',
    'MinimalityVerdict',
    'Verdict',
    'decide_affine_minimality',
    'RasterDomain',
    'RasterMap',
    'RasterSet',
    'birkhoff_chain',
    'preimage_intersection_chain',
    'ReportStore',
    'ExperimentRunner'
]
