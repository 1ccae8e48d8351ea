"""syncforge: couplings that stabilize synchronization of oscillator networks.

Workflow: scan the Master Stability Function of a model to find where it is
negative, synthesize a tridiagonal zero-row-sum Laplacian whose nonzero
eigenvalues sit inside that region, then validate by simulating the coupled
network.
"""

from .dynamics import (
    BlowUpError,
    NetworkSystem,
    OscillatorModel,
    SyncSeries,
    attractor_warmup,
    model,
    network_rhs,
    perturbed_sync_ic,
    rk4_integrate,
    simulate_network,
)
from .msf import (
    LyapunovSettings,
    MsfCurve,
    default_lyapunov_settings,
    diffusive_feasibility,
    largest_lyapunov,
    msf_scan,
    negative_intervals,
    required_sigma,
    variational_rhs,
)
from .synthesis import (
    SpectrumSpec,
    SynthesisError,
    SynthesisReport,
    TridiagonalLaplacian,
    bidiagonal_optimal_laplacian,
    diag2trid,
    diffusive_laplacian,
    place_eigenvalues,
    symmetric_3x3_feasible,
    synthesize,
    trid_zero_row_sum,
)
from .tridiag import (
    TridiagonalMatrix,
    diag_similarity,
    eigenvalues,
    householder_tridiagonalize,
    null_vector,
    sturm_sequence,
)

__version__ = "0.1.0"
