"""Multi-speaker DOA estimation for moving microphone arrays.

Library layout:

    arraymodel    geometries, direction grids, steering-vector sets
    stft          multichannel short-time Fourier analysis + band selection
    spectrum      directional spectrum, smoothing, per-bin estimates
    udm           array-reliability map and per-bin reliability weights
    clustering    subtractive weighted clustering with cluster quality
    scene         synthetic STFT-domain scenes with exact ground truth
    segmentation  interval segmentation and motion classification
    pipeline      end-to-end estimation over a session
    evaluation    scoring against truth, subset curves, report files
    cli           the lsdd-doa command-line tool
"""

from .arraymodel import (
    ArrayGeometry,
    DirectionGrid,
    SteeringVectorSet,
    build_direction_grid,
    free_field_steering,
    line_geometry,
    load_steering_set,
    ring_geometry,
    save_steering_set,
)
from .clustering import (
    ClusterResult,
    WeightedHistogram,
    accumulate,
    cluster_doa,
    cluster_interval,
    quality,
    subtractive_cluster,
)
from .config import PipelineConfig, load_config
from .errors import (
    BandError,
    ConfigError,
    DegenerateInputError,
    FormatError,
    InputTooShortError,
    LsddError,
    ParameterError,
)
from .evaluation import EvalReport, EvalRow, emit_report, evaluate
from .ingest import SessionMeta, ingest_wav, parse_pose_vad
from .pipeline import SessionEstimate, prepare_udm, run_estimation
from .scene import SceneSpec, SceneTruth, SourceSpec, Trajectory, load_scene, synthesize_stft
from .segmentation import IntervalRecord, classify_dynamic, segment_intervals, to_room_frame
from .spectrum import (
    BinEstimate,
    SpectrumTensor,
    compute_spectrum,
    cosine_similarity,
    directional_spectrum,
    estimate_bins,
    smooth_spectrum,
)
from .stft import STFTTensor, analyze, band_indices, load_stft_tensor, save_stft_tensor
from .udm import (
    UDM,
    DirectivityTensor,
    binarize_directivity,
    build_udm,
    compute_directivity,
    count_near_far,
    load_udm,
    rank_and_normalize,
    reliability_weight,
    save_udm,
)

__version__ = "0.1.0"
