"""Structure and motion recovery from multi-frame point correspondences."""

from .errors import RigidRecoverError
from .feasibility import (
    FeasibilityReport,
    ProblemInstance,
    dof_balance,
    feasibility_table,
    reference_table,
)
from .geometry import (
    ORTHOGONAL,
    PERSPECTIVE,
    FrameObservation,
    PoseParams,
    RigidBodyModel,
    SegmentLengthSet,
    procrustes_align,
    project_orthogonal,
    project_perspective,
    relative_pose,
    shape_distance,
    view_angle,
)
from .ortho_solver import (
    RecoveryResult,
    SquaredSystem,
    TriangleRelation,
    extract_motion,
    lengths_to_structure,
    solve_p3f3,
    solve_p3f4_linear,
    solve_p4f2,
    solve_p4f3_linear,
    solve_p5f2_linear,
    squared_triangle_row,
    triangle_residual,
)
from .persp_solver import (
    AmbiguityFamily,
    AnchoredScene,
    LineParams,
    PerspectiveSolution,
    PoseVars,
    camera_orientation,
    meet_residual,
    place_f1,
    place_f2,
    solve_five_point_two_frame,
    trace_ambiguity_family,
)
from .scene_io import Scene, load_scene, save_scene
from .synth import SynthSpec, generate, mirror_body

__version__ = "0.1.0"
