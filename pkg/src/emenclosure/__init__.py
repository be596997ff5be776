"""Time-domain enclosure-method toolkit for penetrable electromagnetic obstacles.

Single-shot workflow: simulate (or synthesize) electric field data on a
small source ball, Laplace-transform the finite record, form the enclosure
indicator, and read off the distance to the obstacle and its material class
from the indicator's large-parameter behavior.
"""

from .geometry import (Box, Ellipsoid, GeometryError, ReflectorReport, Shape,
                       Sphere, Union, UnsupportedGeometryError, dist_D_B,
                       distance_to_boundary, first_reflector)
from .materials import (BackgroundMedium, InvalidMaterialError,
                        MaterialClassification, ObstacleSpec, classify_material,
                        hard_margin, reciprocal_map, region_membership,
                        soft_margin)
from .source import (DegeneratePulseError, InvalidPulseError, PolyRamp,
                     PulseSpec, RampedSine, SourceSpec, laplace_pulse,
                     pulse_eval, verify_pulse_decay)
from .fdtd import (BackgroundStore, ConfigurationError, DependencyError,
                   GridSpec, InstabilityError, TraceRecord, YeeSimulation,
                   build_grid, causality_slack, discrete_energy,
                   leapfrog_energy, run_background_with_store, run_scattered,
                   run_simulation)
from .analytic import (BranchError, LaplaceParams, background_residual,
                       eval_background_fields, eval_exterior_fields,
                       interior_branch_selfcheck, log_field_norms_exterior,
                       radial_potential)
from .indicator import (DistanceEstimate, ExtractionError, IndicatorCurve,
                        NoDecayError, classify_by_sign, combine_indicators,
                        difference_trace, extract_distance, indicator_curve,
                        indicator_curve_analytic_bg, laplace_transform_trace)
from .scaling import (IndicatorBounds, ScalingReport, fit_log_curve,
                      indicator_bounds, log_J_full, log_J_perp,
                      region_log_integral, scaling_report)
from .config import ExperimentConfig
from .pipeline import StalenessError, simulate as run_experiment

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
