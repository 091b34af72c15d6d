"""SNR-controlled whistle/noise synthesis and evaluation of generated audio.

The package builds labeled datasets of upsweep whistles mixed into noise at
exact signal-to-noise ratios, then scores candidate audio (from an external
generator's WAV output or a built-in SNR-shift simulator) three ways:
frequency-spectrum correlation, spectrogram pixel-intensity correlation,
and metric-learning embeddings with nearest-centroid / KNN SNR recovery.
"""

from .audio import AudioClip, read_wav, rms, write_wav
from .dsp import (
    FrequencySpectrum,
    GreySpectrogram,
    PixelIntensityDistribution,
    average_spectrum,
    fft_magnitude,
    pearson,
    pixel_intensity_distribution,
    stft_spectrogram,
    write_pgm,
)
from .embedder import (
    AdamState,
    EmbedderConfig,
    EmbedderNetwork,
    TripletDataset,
    adam_init,
    adam_step,
    batch_triplet_loss,
    embed_images,
    forward_embed,
    hyper_search,
    init_network,
    load_checkpoint,
    resize_pixels,
    resize_spectrogram,
    save_checkpoint,
    semi_hard_triplets,
    train,
    triplet_loss,
)
from .errors import (
    DataError,
    MultiChannelError,
    NumericError,
    SnrgeError,
    UndefinedCorrelationError,
    UnsupportedEncodingError,
    WavError,
)
from .harness import (
    EvalReport,
    LevelRecord,
    SimulatorSource,
    WavDirectorySource,
    dataset_to_triplets,
    emit_report,
    load_report,
    merge_reports,
    resolve_source_clips,
    run_individual_snn_workflow,
    run_single_snn_workflow,
    run_spectral_workflow,
    save_report,
    write_source_wavs,
)
from .inference import (
    CentroidSet,
    KnnConfig,
    KSelection,
    compute_centroids,
    find_knee,
    knn_curves,
    knn_predict_snr,
    label_to_linear,
    linear_to_snr_db,
    nc_predict,
    noise_binary_accuracy,
    rmsde,
    select_k_elbow,
    snr_db_to_linear,
)
from .metrics import (
    ReferencePair,
    SnrScore,
    evaluate_snr_level,
    score_sample_frequency,
    score_sample_pixels,
)
from .synth import (
    DatasetConfig,
    DatasetManifest,
    ManifestEntry,
    MixResult,
    SnrLabel,
    WhistleRanges,
    WhistleSpec,
    build_dataset,
    compute_beta,
    gen_noise,
    gen_whistle,
    load_manifest,
    measured_snr_db,
    mix_at_snr,
    mix_components,
    simulate_generator,
)
from .tsne import Projection2D, tsne_project
from .figures import emit_line_chart, emit_scatter

__version__ = "0.1.0"
