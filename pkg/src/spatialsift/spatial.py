"""Spatial features from multichannel spectrograms.

The pipeline per time-frequency bin: a short-term relative transfer
function (RTF) against the reference microphone, estimated over a few
adjacent frames; phase-only "whitening" of each entry; a recursive
long-term average of the whitened vectors with forgetting factor lam; and
the long/short-term spatial coherence (LSTSC) gamma in [-1, 1], the mean
cosine of the per-channel phase difference between the short-term vector
and the long-term one. A large lam (e.g. 0.999) tracks the spatially
stationary interferer (global view); a small lam (e.g. 0.1) tracks
instantaneous directional activity (local view). Bins dominated by the
stationary source score near +1; bins where the target speaker breaks in
score lower.

Gamma depends only on inter-channel phase, so it is invariant to
per-channel positive gains and to a common complex scaling, and its shape
(frames, bins) never depends on the microphone count or layout. The
interchannel phase difference (IPD) baseline is also provided; unlike the
coherence it yields one plane per non-reference microphone.
"""

import numpy as np
from dataclasses import dataclass, field

from .stft import magnitude

MODULUS_FLOOR = 1e-12
GLOBAL_LAMBDA = 0.999
LOCAL_LAMBDA = 0.1
DEFAULT_AVG_FRAMES = 2  # R: short-term RTF averages R + 1 adjacent frames

FEATURE_KINDS = ("none", "g-lstsc", "gl-lstsc", "ipd")


def short_term_rtf(spec, ref_channel=0, R=DEFAULT_AVG_FRAMES):
    """Short-term RTF of every channel against the reference.

    For each frame l and bin f, cross- and auto-spectral densities are
    summed over the R + 1 frames n = l - R/2 .. l + R/2 (clamped to the
    clip, so edge windows shrink) and their ratio is the RTF estimate.
    The autospectrum denominator is floored at 1e-12 times the mean
    reference power; floored bins are flagged invalid.

    Args:
        spec: MultiChannelSpectrogram with at least two channels.
        ref_channel: index of the reference microphone.
        R: even number of extra frames averaged around the current one.

    Returns:
        (rtf, valid): complex array (frames, bins, channels - 1) with the
        non-reference channels in their original order, and a boolean
        (frames, bins) map that is False where the denominator was floored.
    """
    M = spec.num_channels
    if M < 2:
        raise ValueError(f"short-term RTF needs at least 2 channels, got {M}")
    if R < 0 or R % 2 != 0:
        raise ValueError(f"frame-averaging count R must be even and >= 0, got {R}")
    if not 0 <= ref_channel < M:
        raise ValueError(f"ref_channel {ref_channel} out of range for {M} channels")

    ref = spec.data[ref_channel]  # (T, F)
    others = np.delete(spec.data, ref_channel, axis=0)  # (M-1, T, F)
    cross = others * np.conj(ref)[np.newaxis]
    power = ref.real**2 + ref.imag**2

    half = R // 2
    num = _windowed_sum(cross, half, axis=1)
    den = _windowed_sum(power, half, axis=0)

    floor = MODULUS_FLOOR * max(np.mean(power), np.finfo(np.float64).tiny)
    valid = den >= floor
    den = np.maximum(den, floor)
    rtf = np.moveaxis(num / den, 0, -1)  # (T, F, M-1)
    return rtf, valid


def _windowed_sum(x, half, axis):
    # Sum of x over offsets -half..half along `axis`, window clamped to the
    # array. Shifted adds rather than cumsum differences: no cancellation.
    out = x.copy()
    T = x.shape[axis]
    src = [slice(None)] * x.ndim
    dst = [slice(None)] * x.ndim
    for off in range(1, half + 1):
        if off >= T:
            break
        src[axis] = slice(off, T)
        dst[axis] = slice(0, T - off)
        out[tuple(dst)] += x[tuple(src)]
        src[axis] = slice(0, T - off)
        dst[axis] = slice(off, T)
        out[tuple(dst)] += x[tuple(src)]
    return out


def whiten(values, floor=MODULUS_FLOOR):
    """Divide each complex entry by its modulus, keeping phase only.

    Entries with modulus below `floor` cannot be whitened; they are set to
    the placeholder 1+0j and flagged False in the returned validity mask.

    Returns:
        (whitened, valid) with the same shape as `values`.
    """
    values = np.asarray(values, dtype=np.complex128)
    mod = np.abs(values)
    valid = mod >= floor
    out = np.where(valid, values / np.where(valid, mod, 1.0), 1.0 + 0.0j)
    return out, valid


@dataclass
class LongTermRtfState:
    """Recursive average of whitened RTF vectors, re-whitened each step.

    `values` holds one unit-modulus complex entry per tracked element (any
    leading shape; the last axis is the channel axis). `initialized` marks
    entries that have seen at least one valid observation. One state per
    audio stream, single writer; the update is in-place.
    """

    lam: float
    values: np.ndarray
    initialized: np.ndarray

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"forgetting factor must be in [0, 1], got {self.lam}")

    @classmethod
    def empty(cls, shape, lam):
        return cls(
            lam=float(lam),
            values=np.ones(shape, dtype=np.complex128),
            initialized=np.zeros(shape, dtype=bool),
        )


def update_long_term(state, r, valid=None):
    """One recursion step of the long-term RTF.

    Entries seeing their first valid observation are initialized to it
    directly (a zero start would make re-whitening undefined). Initialized
    entries blend lam * previous + (1 - lam) * current and are re-whitened.
    Invalid observations, and blends that land below the modulus floor,
    leave the previous state untouched.

    Args:
        state: LongTermRtfState, mutated in place and returned.
        r: whitened observation, same shape as state.values.
        valid: optional boolean mask for usable entries of r.
    """
    r = np.asarray(r, dtype=np.complex128)
    if r.shape != state.values.shape:
        raise ValueError(f"shape mismatch: state {state.values.shape}, input {r.shape}")
    if valid is None:
        valid = np.ones(r.shape, dtype=bool)
    fresh = valid & ~state.initialized
    state.values[fresh] = r[fresh]
    state.initialized |= fresh
    if state.lam == 1.0:
        return state  # blend degenerates to the identity
    update = valid & state.initialized & ~fresh
    if np.any(update):
        blended = state.lam * state.values[update] + (1.0 - state.lam) * r[update]
        white, ok = whiten(blended)
        sel = np.where(update)
        keep = tuple(ix[ok] for ix in sel)
        state.values[keep] = white[ok]
    return state


def lstsc(r, r_bar, valid=None):
    """Long/short-term spatial coherence of two whitened vectors.

    Per entry the coherence is Re(conj(r) * r_bar) / |conj(r) * r_bar|,
    the cosine of the phase difference; gamma is the mean over valid
    entries, clamped to [-1, 1]. With no valid entry, gamma is 0.

    Args:
        r, r_bar: whitened vectors (last axis = channels); any common
            leading shape is broadcast elementwise.
        valid: optional boolean mask of entries to include.

    Returns:
        gamma with the entries' leading shape (a scalar for 1-D input).
    """
    gamma, _ = _coherence(r, r_bar, valid)
    if gamma.ndim == 0:
        return float(gamma)
    return gamma


def _coherence(r, r_bar, valid=None):
    r = np.asarray(r, dtype=np.complex128)
    r_bar = np.asarray(r_bar, dtype=np.complex128)
    if r.shape != r_bar.shape:
        raise ValueError(f"shape mismatch: {r.shape} vs {r_bar.shape}")
    z = np.conj(r) * r_bar
    mod = np.abs(z)
    ok = mod >= MODULUS_FLOOR
    if valid is not None:
        ok = ok & valid
    entry = np.where(ok, z.real / np.where(ok, mod, 1.0), 0.0)
    count = ok.sum(axis=-1)
    gamma = entry.sum(axis=-1) / np.maximum(count, 1)
    gamma = np.clip(gamma, -1.0, 1.0)
    return gamma, count == 0


@dataclass
class LstscMap:
    """Coherence plane gamma(frame, bin) for one forgetting factor.

    `degenerate` marks bins where no channel pair was valid (gamma set 0).
    """

    gamma: np.ndarray
    lam: float
    degenerate: np.ndarray = field(default=None)

    def __post_init__(self):
        self.gamma = np.asarray(self.gamma, dtype=np.float64)
        if np.any(self.gamma > 1.0 + 1e-9) or np.any(self.gamma < -1.0 - 1e-9):
            raise ValueError("coherence values outside [-1, 1]")
        if self.degenerate is None:
            self.degenerate = np.zeros(self.gamma.shape, dtype=bool)


def lstsc_map(spec, ref_channel=0, R=DEFAULT_AVG_FRAMES, lam=GLOBAL_LAMBDA):
    """Coherence map of a whole clip.

    Frames are streamed in time order with one recursion state per
    frequency bin: each frame is scored against the long-term state built
    from the frames before it, then absorbed into the state. Scoring
    before absorbing keeps the local (small-lam) plane discriminative; a
    state that has already swallowed the current frame is nearly identical
    to it at small lam, which would pin gamma at 1 everywhere. For the
    global lam the two orderings agree to about 1e-3. The result is
    identical bit-for-bit to stepping the constituent operations frame by
    frame.
    """
    rtf, den_valid = short_term_rtf(spec, ref_channel=ref_channel, R=R)
    white, w_valid = whiten(rtf)
    valid = w_valid & den_valid[..., np.newaxis]
    return _lstsc_from_whitened(white, valid, lam)


def _lstsc_from_whitened(white, valid, lam):
    num_frames, num_bins, _ = white.shape
    state = LongTermRtfState.empty(white.shape[1:], lam)
    gamma = np.zeros((num_frames, num_bins))
    degenerate = np.zeros((num_frames, num_bins), dtype=bool)
    for l in range(num_frames):
        pair_valid = valid[l] & state.initialized
        gamma[l], degenerate[l] = _coherence(white[l], state.values, pair_valid)
        update_long_term(state, white[l], valid[l])
    return LstscMap(gamma=gamma, lam=lam, degenerate=degenerate)


def ipd_feature(spec, ref_channel=0, average_pairs=False):
    """Interchannel phase difference planes, encoded as cosines.

    One plane per non-reference microphone: cos(angle(Y_m) - angle(Y_ref)).
    The plane count is M - 1, so this feature's dimensionality changes
    with the microphone count (the coherence planes never do). With
    average_pairs=True the planes are reduced to their mean, a single
    geometry-independent plane.

    Returns:
        float array (planes, frames, bins).
    """
    M = spec.num_channels
    if M < 2:
        raise ValueError(f"IPD needs at least 2 channels, got {M}")
    ref_phase = np.angle(spec.data[ref_channel])
    others = np.delete(spec.data, ref_channel, axis=0)
    planes = np.cos(np.angle(others) - ref_phase[np.newaxis])
    if average_pairs:
        planes = planes.mean(axis=0, keepdims=True)
    return planes


@dataclass
class FeatureStack:
    """Ordered real feature planes sharing one (frames, bins) grid.

    Plane order is fixed: the reference-channel magnitude spectrogram
    first, then the spatial planes in the order listed in `names`.
    """

    planes: np.ndarray
    names: tuple

    def __post_init__(self):
        self.planes = np.asarray(self.planes, dtype=np.float64)
        if self.planes.ndim != 3:
            raise ValueError(f"planes must be (count, frames, bins), got {self.planes.shape}")
        if len(self.names) != self.planes.shape[0]:
            raise ValueError("one name per plane required")

    @property
    def plane_count(self):
        return self.planes.shape[0]

    @property
    def num_frames(self):
        return self.planes.shape[1]

    @property
    def num_bins(self):
        return self.planes.shape[2]


def build_feature_stack(
    spec,
    kind="g-lstsc",
    ref_channel=0,
    R=DEFAULT_AVG_FRAMES,
    lambdas=(GLOBAL_LAMBDA, LOCAL_LAMBDA),
):
    """Assemble the network input planes for one clip.

    Kinds: "none" = magnitude only; "g-lstsc" = magnitude + global
    coherence; "gl-lstsc" = magnitude + global + local coherence;
    "ipd" = magnitude + one cosine-IPD plane per non-reference microphone.
    """
    kind = kind.lower()
    if kind not in FEATURE_KINDS:
        raise ValueError(f"unknown feature kind {kind!r}, expected one of {FEATURE_KINDS}")
    mag = magnitude(spec)[ref_channel]
    planes = [mag]
    names = ["magnitude"]
    if kind in ("g-lstsc", "gl-lstsc"):
        rtf, den_valid = short_term_rtf(spec, ref_channel=ref_channel, R=R)
        white, w_valid = whiten(rtf)
        valid = w_valid & den_valid[..., np.newaxis]
        planes.append(_lstsc_from_whitened(white, valid, lambdas[0]).gamma)
        names.append("g_lstsc")
        if kind == "gl-lstsc":
            planes.append(_lstsc_from_whitened(white, valid, lambdas[1]).gamma)
            names.append("l_lstsc")
    elif kind == "ipd":
        ipd = ipd_feature(spec, ref_channel=ref_channel)
        for i in range(ipd.shape[0]):
            planes.append(ipd[i])
            names.append(f"ipd_{i + 1}")
    return FeatureStack(planes=np.stack(planes), names=tuple(names))
