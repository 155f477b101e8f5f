"""EMD-based visual tracking toolkit.

Exact transportation-simplex EMD with weight sensitivities, sparse-coding
histogram appearance models, the iterative gradient tracking loop with
template update, gyro-aided motion compensation, and a benchmark harness.
"""

from .appearance import (
    Dictionary,
    GroundParams,
    PatchScheme,
    Signature,
    SparseCode,
    build_dictionary,
    build_histogram,
    encode_patch,
    ground_distance_matrix,
    kernel_weight_gradient,
    kernel_weights,
    load_dictionary,
    max_alignment_pool,
    nonneg_lasso,
    save_dictionary,
)
from .benchmark import SequenceReport, run_benchmark, track_sequence
from .emd import (
    FlowSolution,
    TransportProblem,
    WeightLinearForm,
    evaluate_form,
    russell_initial_solution,
    solve_emd,
    transportation_simplex,
    weight_linear_form,
)
from .gyro import (
    CameraIntrinsics,
    GyroSample,
    HomographyState,
    Quaternion,
    gyro_homography,
    integrate_interval,
    integrate_step,
    predict_center,
    quaternion_to_rotation,
)
from .metrics import EvalResult, relative_overlap, success_curve
from .sequences import Sequence, SynthSpec, load_sequence, make_synthetic_sequence, write_sequence
from .tracker import (
    BoundingBox,
    Tracker,
    TrackerConfig,
    TrackerState,
    maybe_update_template,
    spawn_seeds,
    template_update_weight,
    track_frame,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
