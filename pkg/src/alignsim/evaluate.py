"""Trial running, decode verification, rate evaluation and DoF estimation.

One trial is one block of a scheme on a fresh channel draw: encode through
causality-checked views, decode at every receiver, compare against the sent
symbols and collect the scheme's structural certificates.  Degenerate draws
(rank-deficient alignment systems, vanishing pivots) are measure-zero events;
they are discarded and the trial is resampled with a fresh deterministic
seed, up to a fixed retry cap.  A causality violation or a failed
certificate is never resampled: it aborts the run as a scheme failure.

Rates use the zero-forcing SINR of the linear decoders.  Every decode here
is complex-linear in the received block, and every signal-path coefficient
carries exactly one factor of the amplitude ``sqrt(power)`` while injected
noise carries none, so the per-symbol estimation error at power ``P`` is
exactly ``1/sqrt(P)`` times a fixed linear image of the unit noise block.
The per-symbol noise weight (the squared norm of that image, measured once
per trial by injecting a unit impulse at each receiver/slot position) turns
into an exact per-symbol SINR ``P / weight`` at every operating point, which
makes rate curves deterministic and smooth enough for slope fitting.

Seeding: trial ``t``, attempt ``a`` of a run with ``base_seed`` uses
``numpy.random.SeedSequence((base_seed, t, a))`` split into independent
channel / offline / message streams, so runs are reproducible trial by
trial, independent of execution order and worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .base import Scheme
from .channel import (
    AccessLog,
    ChannelTensor,
    SignalRecord,
    apply_channel,
    audit_feedback_usage,
    generate_channel,
    make_tx_view,
    outputs_own_receiver_only,
)
from .numerics import RankDeficient, Singular, Tolerances
from .output_feedback import ScheduledScheme  # noqa: F401  (re-exported for tests)
from .registry import get_scheme
from .retro_csit_ic3 import DegenerateCoefficients
from .retro_csit_x import DegenerateNormalization

__all__ = [
    "SchemeFailure",
    "DISCARDABLE",
    "MAX_ATTEMPTS",
    "DECODE_REL_TOL",
    "TrialResult",
    "RunReport",
    "DofEstimate",
    "simulate_block",
    "run_single_trial",
    "run_trials",
    "noise_transfer_weights",
    "sum_rate_bits",
    "estimate_dof",
    "dof_by_counting",
    "encode_transmissions",
    "future_perturbation_invariant",
]

#: Degenerate-draw exceptions that trigger discard-and-resample.
DISCARDABLE = (RankDeficient, Singular, DegenerateNormalization, DegenerateCoefficients)

#: Retry cap per trial index before the run is declared broken.
MAX_ATTEMPTS = 10

#: A noiseless decode counts as exact when the worst relative symbol error
#: stays below this.
DECODE_REL_TOL = 1e-6


class SchemeFailure(Exception):
    """A structural guarantee of a scheme failed; resampling would hide a bug."""


@dataclass
class TrialResult:
    """Outcome of one attempt of one trial."""

    scheme_id: str
    trial: int
    attempt: int
    decode_ok: bool
    max_rel_symbol_error: float | None
    interference_ranks: list[int]
    certificates: dict[str, float]
    csi_slots: list[int]
    outputs_own_receiver_only: bool
    discarded: bool = False
    discard_reason: str | None = None
    per_symbol_sinr: list[float] | None = None
    sum_rate_bits: float | None = None
    noise_weights: list[float] | None = None


@dataclass
class RunReport:
    """All results of a deterministic multi-trial run."""

    scheme_id: str
    base_seed: int
    num_trials: int
    results: list[TrialResult] = field(default_factory=list)
    discards: list[TrialResult] = field(default_factory=list)

    @property
    def all_decode_ok(self) -> bool:
        return all(r.decode_ok for r in self.results)

    @property
    def max_rel_symbol_error(self) -> float:
        return max((r.max_rel_symbol_error for r in self.results), default=0.0)

    def csi_slots_union(self) -> list[int]:
        slots: set[int] = set()
        for r in self.results:
            slots.update(r.csi_slots)
        return sorted(slots)


@dataclass
class DofEstimate:
    """Least-squares slope of average sum rate against log2 of the power.

    ``max_rel_symbol_error`` is the worst noiseless relative decode error of
    the underlying trials.  Signal-path coefficients all scale with the same
    amplitude, so this relative leakage is the same at every grid point; its
    square bounds the leaked-to-desired power ratio across the sweep.
    """

    scheme_id: str
    snr_grid_db: list[float]
    sum_rates: list[float]
    slope: float
    intercept: float
    r_squared: float
    trials_per_point: int
    discards: int
    max_rel_symbol_error: float


def _trial_rngs(base_seed: int, trial: int, attempt: int):
    seq = np.random.SeedSequence((base_seed, trial, attempt))
    return [np.random.default_rng(child) for child in seq.spawn(3)]


def simulate_block(
    scheme: Scheme,
    tensor: ChannelTensor,
    offline,
    msgs: np.ndarray,
    amp: float,
    tol: Tolerances,
    noise: np.ndarray | None = None,
    log: AccessLog | None = None,
    state: dict | None = None,
) -> SignalRecord:
    """Run one block slot by slot and return every signal involved.

    ``noise`` is an optional ``(num_rx, num_slots)`` array added at the
    receivers; transmitters doing output feedback see the noisy values, as
    they would on a real feedback link.  ``state`` carries cached
    channel-dependent constants between repeated blocks on the same
    (tensor, offline) pair.
    """
    num_tx, num_rx, num_slots = scheme.num_tx, scheme.num_rx, scheme.num_slots
    x = np.zeros((num_tx, num_slots), dtype=np.complex128)
    y_clean = np.zeros((num_rx, num_slots), dtype=np.complex128)
    y_noisy = np.zeros((num_rx, num_slots), dtype=np.complex128)
    if state is None:
        state = {}
    for n in range(num_slots):
        views = {
            entity: make_tx_view(entity, n, tensor, y_noisy, scheme.feedback, log)
            for entity in range(scheme.num_entities)
        }
        for j in range(num_tx):
            view = views[scheme.entity_of(j)]
            x[j, n] = scheme.transmit(j, n, view, msgs, offline, state, amp, tol)
        noise_slot = None if noise is None else noise[:, n]
        y_clean[:, n], y_noisy[:, n] = apply_channel(x[:, n], tensor, n, noise=noise_slot)
    return SignalRecord(x=x, y_clean=y_clean, y_noisy=y_noisy)


def _decode_block(scheme: Scheme, record: SignalRecord, ctx) -> np.ndarray:
    decoded = np.empty(scheme.num_symbols, dtype=np.complex128)
    for rx in range(scheme.num_rx):
        decoded[scheme.symbols_for_rx(rx)] = scheme.decode(rx, record.y_noisy[rx], ctx)
    return decoded


def noise_transfer_weights(
    scheme: Scheme,
    tensor: ChannelTensor,
    offline,
    ctx,
    tol: Tolerances,
    state: dict | None = None,
) -> np.ndarray:
    """Per-symbol squared norm of the decoder's unit-power noise image.

    Runs the block once per (receiver, slot) with zero messages and a unit
    noise impulse in that position, at unit amplitude; the decoded values are
    exactly one column of the linear noise-to-error map, so accumulating
    their squared magnitudes gives the variance of each symbol estimate
    under unit-variance noise.  At transmit power ``P`` the per-symbol SINR
    is then ``P / weight``.
    """
    zero_msgs = np.zeros(scheme.num_symbols, dtype=np.complex128)
    weights = np.zeros(scheme.num_symbols, dtype=np.float64)
    if state is None:
        state = {}
    for k0 in range(scheme.num_rx):
        for n0 in range(scheme.num_slots):
            noise = np.zeros((scheme.num_rx, scheme.num_slots), dtype=np.complex128)
            noise[k0, n0] = 1.0
            record = simulate_block(
                scheme, tensor, offline, zero_msgs, 1.0, tol, noise=noise, state=state
            )
            column = _decode_block(scheme, record, ctx)
            weights += np.abs(column) ** 2
    return weights


def sum_rate_bits(weights: np.ndarray, power: float, num_slots: int) -> float:
    """Sum rate in bits per channel use from per-symbol noise weights."""
    sinr = power / np.maximum(weights, 1e-300)
    return float(np.sum(np.log2(1.0 + sinr)) / num_slots)


def run_single_trial(
    scheme: Scheme,
    base_seed: int,
    trial: int,
    tol: Tolerances,
    snr_db: float | None = None,
    collect_weights: bool = False,
) -> tuple[TrialResult, list[TrialResult]]:
    """Run one trial, resampling discarded attempts; returns (result, discards)."""
    discards: list[TrialResult] = []
    for attempt in range(MAX_ATTEMPTS):
        rng_channel, rng_offline, rng_msgs = _trial_rngs(base_seed, trial, attempt)
        tensor = generate_channel(
            scheme.num_rx, scheme.num_tx, scheme.num_slots, rng_channel
        )
        offline = scheme.draw_offline(rng_offline)
        msgs = scheme.draw_messages(rng_msgs)
        log = AccessLog()
        state: dict = {}
        try:
            record = simulate_block(
                scheme, tensor, offline, msgs, 1.0, tol, log=log, state=state
            )
            ctx = scheme.decode_context(tensor, offline, tol, 1.0)
            decoded = _decode_block(scheme, record, ctx)
        except DISCARDABLE as exc:
            discards.append(
                TrialResult(
                    scheme_id=scheme.scheme_id,
                    trial=trial,
                    attempt=attempt,
                    decode_ok=False,
                    max_rel_symbol_error=None,
                    interference_ranks=[],
                    certificates={},
                    csi_slots=[],
                    outputs_own_receiver_only=True,
                    discarded=True,
                    discard_reason=f"{type(exc).__name__}: {exc}",
                )
            )
            continue
        certs = scheme.certificates(ctx)
        failures = scheme.check_certificates(certs, tol)
        if failures:
            raise SchemeFailure(
                f"{scheme.scheme_id} trial {trial}: certificate checks failed: {failures}"
            )
        csi_slots = sorted(audit_feedback_usage(log, scheme.num_slots))
        if Fraction(len(csi_slots), scheme.num_slots) > scheme.csi_slot_budget:
            raise SchemeFailure(
                f"{scheme.scheme_id} trial {trial}: transmitters read channel states "
                f"of slots {csi_slots}, above the budget {scheme.csi_slot_budget}"
            )
        scale = max(float(np.max(np.abs(msgs))), 1e-300)
        max_rel = float(np.max(np.abs(decoded - msgs))) / scale
        ranks = [
            int(certs[key])
            for key in getattr(scheme, "interference_rank_keys", [])
        ]
        result = TrialResult(
            scheme_id=scheme.scheme_id,
            trial=trial,
            attempt=attempt,
            decode_ok=bool(max_rel <= DECODE_REL_TOL),
            max_rel_symbol_error=max_rel,
            interference_ranks=ranks,
            certificates=certs,
            csi_slots=csi_slots,
            outputs_own_receiver_only=outputs_own_receiver_only(log),
        )
        if snr_db is not None or collect_weights:
            weights = noise_transfer_weights(scheme, tensor, offline, ctx, tol, state=state)
            if collect_weights:
                result.noise_weights = [float(w) for w in weights]
            if snr_db is not None:
                power = 10.0 ** (snr_db / 10.0)
                result.per_symbol_sinr = [float(power / max(w, 1e-300)) for w in weights]
                result.sum_rate_bits = sum_rate_bits(weights, power, scheme.num_slots)
        return result, discards
    raise SchemeFailure(
        f"{scheme.scheme_id} trial {trial}: exceeded {MAX_ATTEMPTS} attempts; "
        f"last discard: {discards[-1].discard_reason}"
    )


def _run_trial_range(args) -> tuple[list[TrialResult], list[TrialResult]]:
    scheme_id, base_seed, lo, hi, tol_pair, snr_db, collect_weights = args
    scheme = get_scheme(scheme_id)
    tol = Tolerances(*tol_pair)
    results: list[TrialResult] = []
    discards: list[TrialResult] = []
    for trial in range(lo, hi):
        result, trial_discards = run_single_trial(
            scheme, base_seed, trial, tol, snr_db=snr_db, collect_weights=collect_weights
        )
        results.append(result)
        discards.extend(trial_discards)
    return results, discards


def run_trials(
    scheme_id: str,
    num_trials: int,
    base_seed: int,
    tol: Tolerances = Tolerances(),
    snr_db: float | None = None,
    collect_weights: bool = False,
    threads: int = 1,
) -> RunReport:
    """Run ``num_trials`` deterministic trials of a scheme.

    The outcome is identical for any ``threads`` value; parallel workers
    just split the trial index range.
    """
    if num_trials < 1:
        raise ValueError("num_trials must be at least 1")
    report = RunReport(scheme_id=scheme_id, base_seed=base_seed, num_trials=num_trials)
    tol_pair = (tol.rank_rel, tol.residual_rel)
    if threads <= 1 or num_trials == 1:
        results, discards = _run_trial_range(
            (scheme_id, base_seed, 0, num_trials, tol_pair, snr_db, collect_weights)
        )
        report.results = results
        report.discards = discards
        return report
    workers = min(threads, num_trials)
    bounds = np.linspace(0, num_trials, workers + 1, dtype=int)
    chunks = [
        (scheme_id, base_seed, int(lo), int(hi), tol_pair, snr_db, collect_weights)
        for lo, hi in zip(bounds[:-1], bounds[1:])
        if hi > lo
    ]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for results, discards in pool.map(_run_trial_range, chunks):
            report.results.extend(results)
            report.discards.extend(discards)
    return report


def dof_by_counting(scheme: Scheme) -> Fraction:
    """Exact degrees of freedom: symbols delivered per slot of the block."""
    return Fraction(scheme.num_symbols, scheme.num_slots)


def estimate_dof(
    scheme_id: str,
    snr_grid_db: list[float],
    trials_per_point: int,
    base_seed: int,
    tol: Tolerances = Tolerances(),
    threads: int = 1,
) -> DofEstimate:
    """Fit the pre-log slope of the average sum rate over an SNR grid.

    The same seeded trials supply every grid point (their per-symbol noise
    weights are power-independent), so the grid points share randomness and
    the fit measures the slope, not the Monte Carlo noise.
    """
    if len(snr_grid_db) < 2:
        raise ValueError("the SNR grid needs at least two points to fit a slope")
    scheme = get_scheme(scheme_id)
    report = run_trials(
        scheme_id,
        trials_per_point,
        base_seed,
        tol=tol,
        collect_weights=True,
        threads=threads,
    )
    weight_rows = np.array([r.noise_weights for r in report.results], dtype=np.float64)
    sum_rates = []
    for snr_db in snr_grid_db:
        power = 10.0 ** (snr_db / 10.0)
        rates = [
            sum_rate_bits(row, power, scheme.num_slots) for row in weight_rows
        ]
        sum_rates.append(float(np.mean(rates)))
    log2_power = np.array([snr_db / 10.0 * math.log2(10.0) for snr_db in snr_grid_db])
    rates_arr = np.array(sum_rates)
    slope, intercept = np.polyfit(log2_power, rates_arr, 1)
    fitted = slope * log2_power + intercept
    ss_res = float(np.sum((rates_arr - fitted) ** 2))
    ss_tot = float(np.sum((rates_arr - rates_arr.mean()) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 1.0
    return DofEstimate(
        scheme_id=scheme_id,
        snr_grid_db=[float(s) for s in snr_grid_db],
        sum_rates=sum_rates,
        slope=float(slope),
        intercept=float(intercept),
        r_squared=float(r_squared),
        trials_per_point=trials_per_point,
        discards=len(report.discards),
        max_rel_symbol_error=report.max_rel_symbol_error,
    )


def encode_transmissions(
    scheme: Scheme,
    tensor: ChannelTensor,
    offline,
    msgs: np.ndarray,
    tol: Tolerances,
) -> np.ndarray:
    """Noiseless encode only; returns the (num_tx, num_slots) transmit block."""
    return simulate_block(scheme, tensor, offline, msgs, 1.0, tol).x


def future_perturbation_invariant(
    scheme: Scheme,
    base_seed: int,
    trial: int,
    perturb_from: int,
    tol: Tolerances,
) -> bool:
    """True when perturbing channel states of slots >= ``perturb_from`` leaves
    every transmit scalar of slots <= ``perturb_from`` bit-identical.

    The perturbation is a pure phase rotation, which keeps the tensor inside
    its magnitude band while changing every affected coefficient.
    """
    rng_channel, rng_offline, rng_msgs = _trial_rngs(base_seed, trial, 0)
    tensor = generate_channel(scheme.num_rx, scheme.num_tx, scheme.num_slots, rng_channel)
    offline = scheme.draw_offline(rng_offline)
    msgs = scheme.draw_messages(rng_msgs)
    x_ref = encode_transmissions(scheme, tensor, offline, msgs, tol)
    h2 = tensor.h.copy()
    h2[:, :, perturb_from:] *= np.exp(0.7j)
    perturbed = ChannelTensor(h=h2, mag_bounds=tensor.mag_bounds)
    x_alt = encode_transmissions(scheme, perturbed, offline, msgs, tol)
    upto = perturb_from + 1
    return bool(np.array_equal(x_ref[:, :upto], x_alt[:, :upto]))
