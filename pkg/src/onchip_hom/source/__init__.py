"""Type-II SPDC source: dispersion, spectra, pair statistics and sampling."""

from .sampling import PairEvent, PairStream, pump_detuning, sample_pair_stream
from .sellmeier import (
    CrystalConfig,
    SellmeierSet,
    detuning_slope_from_dispersion,
    load_sellmeier,
    phase_matched_crystal,
    phase_mismatch,
    sellmeier_index,
)
from .spectra import (
    GAUSSIAN,
    SINC,
    SourceSpectralModel,
    bandwidth_from_sigma,
    marginal_spectrum,
    phase_matching_amplitude,
    shg_tuning_curve,
    sigma_from_bandwidth,
    spectral_overlap,
    two_photon_overlap,
)
from .statistics import (
    PairStatistics,
    mean_pair_number,
    multipair_factor,
    mu_from_squeezing,
    pair_number_distribution,
    squeezing_from_mu,
)
