"""beamforge: ultrasound receive beamforming from RF simulation to images.

Submodules:
    core      -- arrays, transmit schemes, pulses, grids, phantoms
    sim       -- synthetic RF channel data (point-scatterer model)
    migrate   -- time-of-flight tables, fractional delays, time-to-space migration
    beamform  -- DAS, MVDR/eigenspace-MV, CF/Wiener/iMAP postfilters, compounding
    neural    -- trainable per-pixel apodization network, losses, Adam, AdaIN
    image     -- envelope detection, log compression, image-quality metrics
    flopcount -- per-pixel FLOP ledger for the beamformers
    containers-- RF container, PGM images, CSV tables
    config    -- JSON configuration documents
    cli       -- simulate / beamform / train / eval / flops subcommands
"""

from .core import (
    AcquisitionSetup,
    AnechoicDisk,
    ArrayGeometry,
    ImagingGrid,
    MediumParams,
    Phantom,
    PulseSpec,
    TransmitScheme,
    make_diverging_scheme,
    make_focused_scheme,
    make_grid,
    make_linear_array,
    make_plane_wave_scheme,
    make_speckle_phantom,
    make_synthetic_aperture_scheme,
)
from .sim import RfDataCube, pulse_waveform, simulate_rf, transmit_delay
from .migrate import (
    DelayedDataTensor,
    SubsamplingMask,
    TofTable,
    compute_tof,
    delay_fourier_domain,
    delay_time_domain,
    make_mask,
    migrate,
)
from .beamform import (
    ApodizationTensor,
    BeamformedImage,
    CovarianceEstimate,
    beamform_image,
    coherence_factor,
    coherence_factor_map,
    compound,
    das,
    eigenspace_mv,
    estimate_covariance,
    imap,
    imap_images,
    mvdr_images,
    mvdr_weights,
    split_events,
    subarray_output,
    wiener_images,
    wiener_postfilter,
    window_weights,
)
from .image import (
    BmodeImage,
    MetricsReport,
    annulus_mask,
    envelope,
    log_compress,
    measure_contrast,
    measure_fwhm,
    peak_sidelobe_level,
    region_mask,
)
from .flopcount import flop_ledger
from .neural import (
    LossSpec,
    PixelDataset,
    WeightNetwork,
    adain,
    antirectifier,
    distortionless_penalty,
    gradient_check,
    load_network,
    loss_l1,
    loss_mse,
    loss_smsle,
    loss_ssim,
    save_network,
    ssim,
    train,
)
from .containers import read_rf, write_pgm, write_rf
from .config import load_config, parse_config

__version__ = "0.1.0"
