"""Symbol error rates and capacities of optical PPM receivers: direct
detection, conditional pulse nulling (exact, displaced, and squeezed), and the
Helstrom quantum limit."""

from .analytic import (
    cpn_error,
    cpn_error_baseline,
    cpn_error_darkfree,
    dd_error,
    dd_error_ideal,
    helstrom_ppm,
    p_no_click,
    symbol_error,
    transition_probs,
)
from .capacity import (
    blahut_arimoto,
    efficiency_sweep,
    holevo_pure_loss,
    mary_symmetric_capacity,
    ppm_dd_erasure_capacity,
)
from .core import (
    ClickProbs,
    ConfusionMatrix,
    DetectorModel,
    DomainError,
    McEstimate,
    ModulationConfig,
    NullingMode,
    NullingPolicy,
    derived_n1,
)
from .optimizer import OptimizationResult, optimize_policy
from .simulator import ReceiverKind, ReceiverSpec, channel_matrix, enumerate_exact, simulate

__version__ = "0.1.0"
