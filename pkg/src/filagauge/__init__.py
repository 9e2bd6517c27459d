"""filagauge: optical filament diameter gauge built on one camera and two mirrors.

Modules
-------
acquisition   frames, rig configuration, ROI cropping
segmentation  per-slice edges, masks, centerlines, rectification
calibration   pinhole projection and the separation -> scale-factor line
measurement   calibrated diameters, ovality, tolerance flags, length log
texture       pseudo-surface patches and anomaly scoring
spool         spool winding lengths and speed schedule
synth         deterministic synthetic frames with ground truth
cli           ``filagauge`` command line
"""

__version__ = "0.1.0"

from .acquisition import Frame, RigConfig, Roi, extract_roi, load_frame, load_rig_config, scan_sequence
from .calibration import (
    CalibrationModel,
    PinholeModel,
    fit_calibration,
    load_calibration,
    project,
    px_to_mm,
    save_calibration,
    scale_for,
    separation,
)
from .measurement import (
    Flag,
    FrameMeasurement,
    MeasurementLog,
    append_log,
    calibrate_rig,
    flag_tolerance,
    measure_frame,
    ovality,
)
from .segmentation import EdgePair, build_mask, centerline, detect_edges, rectify, segment_strip
from .spool import SpoolSpec, layer_length, speed_schedule, total_length
from .synth import SynthScene, default_rig, render_frame, render_sequence
from .texture import PseudoSurfacePatch, TextureBaseline, anomaly_score, assemble_patch, slice_profile
