"""Gaussian Approximation reliability ordering and shuffled-dataset generation.

GA propagates mean LLRs through the polar recursion: starting from
m = 2/sigma^2, a check node maps m -> phi^{-1}(1 - (1 - phi(m))^2) and a
variable node maps m -> 2m. phi uses the usual two-piece approximation
(coefficients in PHI_COEFFS); its inverse is found by bisection in the
log domain so very reliable channels stay finite.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .channel import ChannelConfig, MonteCarloConfig, FerEstimate, estimate_fer
from .codec import CodeSpec, DecoderConfig, FrozenMask
from .errors import InvalidArgument, InvalidState, NumericError, PolarLabError

__all__ = [
    "ReliabilityOrder",
    "ShuffleConfig",
    "DatasetRecord",
    "ga_reliabilities",
    "build_mask",
    "generate_dataset",
    "select_shuffle_range",
    "PHI_COEFFS",
]

log = logging.getLogger(__name__)

# phi(x) = exp(a*x^b + c) for 0 < x <= 10, sqrt(pi/x) e^{-x/4} (1 - 10/(7x))
# above; recorded in dataset headers for auditability
PHI_COEFFS = {"a": -0.4527, "b": 0.86, "c": 0.0218, "split": 10.0}


@dataclass
class ReliabilityOrder:
    """Positions sorted ascending by GA mean LLR (least reliable first)."""

    order: np.ndarray
    reliabilities: np.ndarray

    def __post_init__(self):
        self.order = np.asarray(self.order, dtype=np.int64)
        self.reliabilities = np.asarray(self.reliabilities, dtype=np.float64)
        n = self.order.size
        if not np.array_equal(np.sort(self.order), np.arange(n)):
            raise InvalidArgument("order must be a permutation")
        if np.any(np.diff(self.reliabilities[self.order]) < 0):
            raise InvalidArgument("order must sort reliabilities ascending")


@dataclass(frozen=True)
class ShuffleConfig:
    """Window half-width r, number of variants D, and the shuffle seed."""

    range_r: int
    count_d: int
    seed: int = 0

    def __post_init__(self):
        if self.range_r < 1:
            raise InvalidArgument("range_r must be >= 1")
        if self.count_d < 1:
            raise InvalidArgument("count_d must be >= 1")


@dataclass
class DatasetRecord:
    mask: FrozenMask
    fer_estimate: FerEstimate


def _log_phi(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    a, b, c, split = (PHI_COEFFS[k] for k in ("a", "b", "c", "split"))
    small = a * np.power(x, b, where=x > 0, out=np.zeros_like(x)) + c
    with np.errstate(divide="ignore", invalid="ignore"):
        big = 0.5 * np.log(np.pi / x) - x / 4.0 + np.log1p(-10.0 / (7.0 * x))
    return np.where(x <= split, small, big)


def _inv_log_phi(target: np.ndarray) -> np.ndarray:
    """Solve log phi(x) = target by bisection (phi is decreasing)."""
    target = np.asarray(target, dtype=np.float64)
    lo = np.full_like(target, 1e-12)
    hi = np.maximum(100.0, -4.0 * target + 20.0)
    for _ in range(120):
        mid = 0.5 * (lo + hi)
        too_small = _log_phi(mid) > target
        lo = np.where(too_small, mid, lo)
        hi = np.where(too_small, hi, mid)
    return 0.5 * (lo + hi)


def _check_update(m: np.ndarray) -> np.ndarray:
    """GA check-node update phi^{-1}(1 - (1 - phi(m))^2) in log domain."""
    lp = _log_phi(m)
    # log(2 phi - phi^2) = log phi + log(2 - phi)
    target = lp + np.log(2.0 - np.exp(lp))
    out = np.where(m > 0, _inv_log_phi(target), 0.0)
    if not np.all(np.isfinite(out)):
        raise NumericError("GA check update produced non-finite means")
    return out


def ga_reliabilities(spec: CodeSpec, design_ebn0_db: float) -> ReliabilityOrder:
    """GA mean LLRs for every position, sorted least reliable first."""
    sigma2 = ChannelConfig(design_ebn0_db, spec.rate).noise_variance
    means = np.array([2.0 / sigma2])
    # interleave so the outermost (channel-level) split is applied first:
    # position bits read MSB->LSB give the check/variable sequence
    for _ in range(spec.stages):
        new = np.empty(2 * means.size)
        new[0::2] = _check_update(means)
        new[1::2] = 2.0 * means
        means = new
    order = np.argsort(means, kind="stable")
    return ReliabilityOrder(order, means)


def build_mask(spec: CodeSpec, order: ReliabilityOrder) -> FrozenMask:
    """Freeze the N-K least reliable positions."""
    bits = np.zeros(spec.n_bits, dtype=np.uint8)
    bits[order.order[:spec.n_bits - spec.k_info]] = 1
    return FrozenMask(bits)


def _window_bounds(spec: CodeSpec, order: ReliabilityOrder, r: int):
    boundary = spec.n_bits - spec.k_info
    lo, hi = boundary - r, boundary + r
    if lo < 0 or hi > spec.n_bits:
        raise InvalidArgument(
            f"shuffle window [{lo}, {hi}) exceeds [0, {spec.n_bits})")
    return lo, hi


def _shuffled_mask(spec, order, lo, hi, rng) -> FrozenMask:
    """Permute the order entries with ranks in [lo, hi), rebuild the mask."""
    shuffled = order.order.copy()
    window = shuffled[lo:hi]
    shuffled[lo:hi] = window[rng.permutation(hi - lo)]
    bits = np.zeros(spec.n_bits, dtype=np.uint8)
    bits[shuffled[:spec.n_bits - spec.k_info]] = 1
    return FrozenMask(bits)


def generate_dataset(
    spec: CodeSpec,
    order: ReliabilityOrder,
    shuffle: ShuffleConfig,
    decoder: DecoderConfig,
    channel: ChannelConfig,
    mc: MonteCarloConfig,
    progress=None,
) -> list[DatasetRecord]:
    """D shuffled variants around the frozen/info boundary, deduplicated
    before simulation, each paired with its Monte Carlo FER."""
    lo, hi = _window_bounds(spec, order, shuffle.range_r)
    unique: dict[bytes, FrozenMask] = {}
    for d in range(shuffle.count_d):
        rng = np.random.default_rng([shuffle.seed, d])
        mask = _shuffled_mask(spec, order, lo, hi, rng)
        unique.setdefault(mask.bits.tobytes(), mask)

    records = []
    for i, mask in enumerate(unique.values()):
        seed = int(np.random.SeedSequence([mc.seed, i]).generate_state(1)[0])
        per_record = MonteCarloConfig(seed, mc.target_frame_errors,
                                      mc.max_frames, mc.workers)
        try:
            est = estimate_fer(spec, mask, decoder, channel, per_record)
        except PolarLabError as exc:
            log.warning("skipping mask %d: simulation failed (%s)", i, exc)
            continue
        records.append(DatasetRecord(mask, est))
        if progress is not None:
            progress(i + 1, len(unique))
    return records


def select_shuffle_range(
    spec: CodeSpec,
    order: ReliabilityOrder,
    decoder: DecoderConfig,
    channel: ChannelConfig,
    pilot_size: int,
    candidate_rs: list[int],
    seed: int = 0,
    max_frames: int = 200_000,
    ratio_target: float = 10.0,
) -> int:
    """Largest candidate r whose pilot max/min FER ratio stays <= target.

    Pilots run at reduced precision (30 frame errors). Falls back to the
    smallest candidate when every ratio overshoots.
    """
    if not candidate_rs or sorted(candidate_rs) != list(candidate_rs):
        raise InvalidArgument("candidate_rs must be non-empty and ascending")
    best = None
    any_pilot = False
    for r in candidate_rs:
        lo, hi = _window_bounds(spec, order, r)
        fers = []
        for p in range(pilot_size):
            rng = np.random.default_rng([seed, r, p])
            mask = _shuffled_mask(spec, order, lo, hi, rng)
            mc = MonteCarloConfig(
                int(np.random.SeedSequence([seed, r, p]).generate_state(1)[0]),
                target_frame_errors=30, max_frames=max_frames)
            try:
                fers.append(estimate_fer(spec, mask, decoder, channel, mc).fer)
            except PolarLabError as exc:
                log.warning("pilot r=%d shuffle %d failed (%s)", r, p, exc)
        if not fers:
            continue
        any_pilot = True
        if min(fers) > 0 and max(fers) / min(fers) <= ratio_target:
            best = r
    if not any_pilot:
        raise InvalidState("every pilot simulation failed")
    if best is None:
        best = candidate_rs[0]
        log.warning("no candidate met ratio <= %g; falling back to r=%d",
                    ratio_target, best)
    return best
