"""wzmap: vehicle behavior maps for road maintenance work zones.

Turns raw GPS (1 Hz) + accelerometer (20 Hz) vehicle passes into
per-behavior spatial density rasters: short-time-energy endpoint detection
segments each trajectory, an RBF SVM labels the detected maneuvers, and a
quadratic-kernel density surface with percentage calibration maps where
each behavior concentrates.
"""

__version__ = "0.1.0"

from .classify import (ClassifyConfig, LabeledPeriod, Segment,
                       SegmentTimeline, classify_timeline, combine_schemes)
from .endpoint import (EnergyFrameConfig, EnergySeries, Poi, Thresholds,
                       adaptive_thresholds, determinative_threshold,
                       detect_pois, short_time_energy)
from .errors import ConfigError, DataError, WzmapError
from .features import FeatureVector, extract_features
from .kde import (BehaviorDistribution, BehaviorPoint, Calibration,
                  DensityRaster, KdeConfig, build_distribution,
                  calibrate_reference, kde, segment_to_points, to_percentage)
from .labels import POI_LABELS, BehaviorLabel
from .svm import SvmModel, grid_search, load_model, save_model, train_svm
from .synth import (ManeuverScript, ManeuverStep, NoiseModel, generate,
                    generate_fleet)
from .trajectory import (CsvSchema, TimeInterval, Trajectory,
                         TrajectorySample, ingest_csv, load_trajectories,
                         local_project)

__all__ = [name for name in dir() if not name.startswith("_")]
