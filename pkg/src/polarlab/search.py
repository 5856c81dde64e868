"""Straight-through projected gradient descent over relaxed frozen masks.

The search runs on the surrogate's kept (non-constant) coordinates in the
signed {-1,+1} domain. Each iteration quantizes the relaxed vector with a
rank projection that keeps the frozen-bit count exact, evaluates the
surrogate at the quantized point, and applies that point's input gradient
to the relaxed vector. Constant coordinates are re-attached from the base
mask before any candidate leaves this module.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .channel import (ChannelConfig, FerEstimate, MonteCarloConfig,
                      estimate_fer)
from .codec import CodeSpec, DecoderConfig, FrozenMask
from .errors import InvalidArgument, NumericError, PolarLabError
from .surrogate import MlpParams, Standardizer, output_and_input_gradient

__all__ = ["PgdConfig", "CandidateReport", "quantize", "pgd_run",
           "search_and_validate"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PgdConfig:
    iterations_i: int = 5000
    step_mu: float = 0.1
    restarts: int = 1
    seed: int = 0
    top_k: int = 8

    def __post_init__(self):
        if self.iterations_i < 1:
            raise InvalidArgument("iterations_i must be >= 1")
        if self.step_mu < 0:
            raise InvalidArgument("step_mu must be >= 0")
        if self.restarts < 1:
            raise InvalidArgument("restarts must be >= 1")


@dataclass
class CandidateReport:
    mask: FrozenMask
    predicted_fer: float
    validated: FerEstimate | None
    restart_index: int
    best_iteration: int


def quantize(relaxed: np.ndarray, frozen_quota: int) -> np.ndarray:
    """Rank projection: the frozen_quota largest values become +1 (frozen),
    the rest -1; ties keep the lower index. Equals the median rule when the
    quota is half the length."""
    relaxed = np.asarray(relaxed, dtype=np.float64)
    if frozen_quota > relaxed.size:
        raise InvalidArgument("frozen_quota exceeds vector length")
    out = np.full(relaxed.size, -1.0)
    top = np.argsort(-relaxed, kind="stable")[:frozen_quota]
    out[top] = 1.0
    return out


def _attach_constant(base_mask: FrozenMask, kept: np.ndarray,
                     signed: np.ndarray) -> FrozenMask:
    bits = base_mask.bits.copy()
    bits[kept] = (signed > 0).astype(np.uint8)
    return FrozenMask(bits)


def pgd_run(
    params: MlpParams,
    standardizer: Standardizer,
    config: PgdConfig,
    base_mask: FrozenMask,
    restart_index: int = 0,
) -> CandidateReport:
    """One restart of Algorithm-style PGD; returns the best quantized mask
    (tracked over every iteration, not just the last)."""
    kept = standardizer.kept_indices
    quota = int(base_mask.bits[kept].sum())
    rng = np.random.default_rng([config.seed, restart_index])
    relaxed = np.full(kept.size, -1.0)
    relaxed[rng.permutation(kept.size)[:quota]] = 1.0

    best_pred = np.inf
    best_q = None
    best_iter = -1

    def evaluate(q, iteration):
        nonlocal best_pred, best_q, best_iter
        y, g_std = output_and_input_gradient(
            params.config, params, standardizer.transform_signed(q))
        if not (np.isfinite(y) and np.all(np.isfinite(g_std))):
            raise NumericError(
                f"non-finite surrogate output/gradient at iteration "
                f"{iteration} of restart {restart_index}")
        pred = float(np.exp(standardizer.inverse_log_fer(y)))
        if pred < best_pred:
            best_pred, best_q, best_iter = pred, q, iteration
        # chain the standardized-space gradient back to the signed domain
        return g_std / standardizer.in_std

    for it in range(config.iterations_i):
        q = quantize(relaxed, quota)
        grad = evaluate(q, it)
        relaxed = relaxed - config.step_mu * grad
    evaluate(quantize(relaxed, quota), config.iterations_i)

    return CandidateReport(_attach_constant(base_mask, kept, best_q),
                           best_pred, None, restart_index, best_iter)


def search_and_validate(
    params: MlpParams,
    standardizer: Standardizer,
    config: PgdConfig,
    spec: CodeSpec,
    decoder: DecoderConfig,
    channel: ChannelConfig,
    mc: MonteCarloConfig,
    base_mask: FrozenMask,
    progress=None,
) -> list[CandidateReport]:
    """Run all restarts, dedupe, validate the top_k best-predicted masks by
    Monte Carlo, and rank: validated candidates by measured FER first."""
    reports = []
    for j in range(config.restarts):
        try:
            reports.append(pgd_run(params, standardizer, config, base_mask,
                                   restart_index=j))
        except NumericError as exc:
            log.warning("restart %d aborted: %s", j, exc)
        if progress is not None:
            progress(j + 1, config.restarts)

    unique: dict[bytes, CandidateReport] = {}
    for rep in sorted(reports, key=lambda r: r.restart_index):
        unique.setdefault(rep.mask.bits.tobytes(), rep)
    ranked = sorted(unique.values(),
                    key=lambda r: (r.predicted_fer, r.restart_index))

    for rank, rep in enumerate(ranked[:config.top_k]):
        seed = int(np.random.SeedSequence([mc.seed, rank]).generate_state(1)[0])
        per = MonteCarloConfig(seed, mc.target_frame_errors, mc.max_frames,
                               mc.workers)
        try:
            rep.validated = estimate_fer(spec, rep.mask, decoder, channel, per)
        except PolarLabError as exc:
            log.warning("validation of candidate %d failed: %s", rank, exc)

    def key(rep):
        if rep.validated is not None:
            return (0, rep.validated.fer, rep.predicted_fer)
        return (1, rep.predicted_fer, 0.0)

    return sorted(ranked, key=key)
