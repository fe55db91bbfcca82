"""alignsim: numerical verification of delayed-feedback interference alignment schemes.

Implements and checks, in simulation, linear transmission schemes whose
degrees of freedom exceed what is achievable without feedback: two
retrospective delayed-CSIT schemes (two-user X channel at 8/7, 3-user
interference channel at 9/8), two delayed-output-feedback schemes (X channel
at 4/3, 3-user interference channel with own-receiver feedback at 6/5) and a
two-antenna broadcast baseline at 4/3.  Feedback causality is enforced
mechanically, decoding is verified exactly at zero noise, and the DoF are
estimated from the slope of deterministic rate curves.
"""

from .channel import (
    AccessLog,
    CausalityViolation,
    ChannelTensor,
    FeedbackKind,
    FeedbackModel,
    SignalRecord,
    TxInformationView,
    apply_channel,
    audit_feedback_usage,
    generate_channel,
    make_tx_view,
)
from .evaluate import (
    DofEstimate,
    RunReport,
    SchemeFailure,
    TrialResult,
    dof_by_counting,
    estimate_dof,
    run_trials,
)
from .numerics import (
    RankDeficient,
    Singular,
    Tolerances,
    left_null_basis,
    null_vector,
    numerical_rank,
    sample_complex_gaussian,
    solve_square,
)
from .registry import SCHEMES, get_scheme

__version__ = "0.1.0"

__all__ = [
    "AccessLog",
    "CausalityViolation",
    "ChannelTensor",
    "DofEstimate",
    "FeedbackKind",
    "FeedbackModel",
    "RankDeficient",
    "RunReport",
    "SCHEMES",
    "SchemeFailure",
    "SignalRecord",
    "Singular",
    "Tolerances",
    "TrialResult",
    "TxInformationView",
    "apply_channel",
    "audit_feedback_usage",
    "dof_by_counting",
    "estimate_dof",
    "generate_channel",
    "get_scheme",
    "left_null_basis",
    "make_tx_view",
    "null_vector",
    "numerical_rank",
    "run_trials",
    "sample_complex_gaussian",
    "solve_square",
    "__version__",
]
