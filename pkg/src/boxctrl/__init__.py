"""Control synthesis and spectral analysis for a quantum particle in a
one-dimensional box whose walls translate and dilate.

The package is organized around one reduction: for wall motions whose length
and position changes stay proportional, the moving-boundary problem maps to a
fixed box with a time-dependent interaction built from the momentum and
dilation operators.  ``operators`` holds the matrix building blocks,
``propagation`` the piecewise-constant/linear evolution schemes, ``control``
the transfer synthesis pipeline, ``resonance`` the spectral non-degeneracy
machinery, and ``stability`` the quantitative lifting estimates that justify
approximating smooth profiles by sawtooth ones.
"""

from .control import (
    SynthesisResult,
    TransferProblem,
    aligned_l2_error,
    append_final_segment,
    fidelity,
    lift_control,
    reduce_motion,
    solve_transfer,
    synthesize_pc_control,
)
from .errors import (
    BoxctrlError,
    BudgetExceeded,
    ConfigError,
    DegenerateMatching,
    InfeasibleRamp,
    NoImprovement,
    UnsupportedMotion,
    WallCollision,
)
from .operators import (
    BoxGeometry,
    HermitianOperator,
    MotionParams,
    SpectralState,
    dilation_matrix,
    dirichlet_eigenvalues,
    frame_map,
    frame_map_deficiency,
    interaction_matrix,
    momentum_matrix,
    parity_projector,
)
from .propagation import (
    PiecewiseControl,
    Propagator,
    evolve_moving_box,
    minus_norm,
    plus_norm,
    propagate_auxiliary,
    propagate_transformed,
    trajectory,
)
from .reporting import __version__
from .resonance import (
    ResonanceReport,
    SpectrumCurve,
    certify_chain,
    find_resonances_at_zero,
    scan_for_nonresonant_eta,
    second_derivative_formula,
    spectrum_vs_eta,
)
from .stability import (
    CoefficientFamily,
    ConvergenceStudy,
    StabilityCheck,
    StabilityConstants,
    compute_constants,
    form_bound_constants,
    interaction_form_bound,
    lifting_convergence_study,
    verify_stability_bound,
)

__all__ = [
    "__version__",
    # errors
    "BoxctrlError",
    "ConfigError",
    "UnsupportedMotion",
    "WallCollision",
    "InfeasibleRamp",
    "NoImprovement",
    "BudgetExceeded",
    "DegenerateMatching",
    # operators
    "BoxGeometry",
    "MotionParams",
    "SpectralState",
    "HermitianOperator",
    "dirichlet_eigenvalues",
    "momentum_matrix",
    "dilation_matrix",
    "interaction_matrix",
    "parity_projector",
    "frame_map",
    "frame_map_deficiency",
    # propagation
    "PiecewiseControl",
    "Propagator",
    "propagate_auxiliary",
    "propagate_transformed",
    "evolve_moving_box",
    "trajectory",
    "plus_norm",
    "minus_norm",
    # control
    "TransferProblem",
    "SynthesisResult",
    "reduce_motion",
    "fidelity",
    "aligned_l2_error",
    "synthesize_pc_control",
    "lift_control",
    "append_final_segment",
    "solve_transfer",
    # resonance
    "SpectrumCurve",
    "ResonanceReport",
    "find_resonances_at_zero",
    "spectrum_vs_eta",
    "second_derivative_formula",
    "certify_chain",
    "scan_for_nonresonant_eta",
    # stability
    "form_bound_constants",
    "interaction_form_bound",
    "StabilityConstants",
    "CoefficientFamily",
    "compute_constants",
    "StabilityCheck",
    "verify_stability_bound",
    "ConvergenceStudy",
    "lifting_convergence_study",
]
