"""Quickest change detection of optical transmission loss with
quantum-augmented probes: per-pulse relative entropies for coherent,
squeezed, entangled-block, nulling-receiver, and single-photon schemes;
CUSUM detection on sampled receiver outputs; Monte-Carlo average-run-length
threshold calibration; and a CSV-emitting scenario CLI."""

from .errors import (
    DomainError,
    LosswatchError,
    NumericalError,
    ResourceError,
    TargetRangeError,
    UsageError,
)
from .gaussian_core import (
    Gaussian1D,
    GaussianVec,
    PhaseSpaceState,
    apply_loss,
    entangled_block_cov_closed,
    entangled_block_cov_oracle,
    hadamard_real_form,
    homodyne_marginal,
    kl_gaussian_1d,
    kl_gaussian_nd,
)
from .schemes import (
    INFINITE_CRE,
    Binary,
    ChannelPair,
    DVHomodyne,
    EnergyParams,
    Mixture2,
    Modulation,
    ObservationModel,
    Scheme,
    SchemeKind,
    bpsk_awgn_capacity,
    cre,
    cre_coherent,
    cre_dv_homodyne,
    cre_entangled,
    cre_entangled_fixed_seed,
    cre_kennedy,
    cre_single_photon_spd,
    cre_squeezed,
    cre_squeezed_derivative,
    cre_squeezed_given_r,
    cre_squeezed_limit,
    dv_homodyne_cdf,
    dv_homodyne_pdf,
    observation_models,
    squeezing_threshold,
)
from .samplers import SeededStream, dv_inverse_cdf, sample
from .detector import (
    CusumRun,
    DetectionReport,
    LatencyResult,
    cusum_step,
    decision_path,
    llr,
    make_llr,
    run_detection,
)
from .calibration import ArlTable, estimate_arl, threshold_for_arl

__version__ = "0.1.0"
