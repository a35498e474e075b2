"""Multichannel personal speech enhancement toolkit.

Library layout:
    audio    -- WaveBuffer and 16-bit PCM WAV I/O
    stft     -- forward/inverse STFT with overlap-add
    spatial  -- short/long-term RTFs, spatial coherence maps, IPD planes
    room     -- image-source RIRs, rendering, SNR-controlled mixing
    speaker  -- speaker-embedding forward pass and embedding files
    crn      -- target-speech sifting network inference and mask ops
    metrics  -- intelligibility and scale-invariant SDR, report emission
    harness  -- dataset synthesis / enhancement / evaluation orchestration
    tensorio -- the named-tensor container interchange format
"""

__version__ = "0.1.0"

from .audio import WaveBuffer, read_wav, write_wav
from .stft import StftConfig, MultiChannelSpectrogram, stft, istft, magnitude
from .spatial import (
    FeatureStack,
    LstscMap,
    LongTermRtfState,
    short_term_rtf,
    whiten,
    update_long_term,
    lstsc,
    lstsc_map,
    ipd_feature,
    build_feature_stack,
)
from .room import (
    ArrayGeometry,
    RoomScene,
    Rir,
    uca,
    ula,
    parse_geometry,
    place_scene,
    simulate_rir,
    render,
    mix_at_snr,
    estimate_t60,
)
from .speaker import (
    SpeakerEmbedding,
    EncoderWeights,
    SlidingWindowConfig,
    embed_utterance,
    load_embedding,
    store_embedding,
)
from .crn import (
    CrnWeights,
    crn_forward,
    apply_mask,
    mse_masked_loss,
    load_weights,
    store_weights,
)
from .metrics import stoi, si_sdr, ClipMetrics, EvalReport
