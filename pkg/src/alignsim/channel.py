"""Fading channel, feedback models and causality-audited transmitter views.

The channel is a dense tensor of i.i.d. complex Gaussian coefficients, one
per (receiver, transmitter, slot).  Receivers are assumed to know the whole
tensor (global receiver CSI, including the current slot).  Transmitters never
touch the tensor or the received signals directly: everything they learn goes
through a :class:`TxInformationView`, which enforces the feedback model's
delay and association rules and records every read in an :class:`AccessLog`.
A read that the model does not permit raises :class:`CausalityViolation`,
which is always a bug in a scheme, never a recoverable event.

Slot indices are 0-based throughout.  With the default one-slot delay, a view
for slot ``n`` exposes information of slots ``0 .. n-1`` only.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .numerics import sample_complex_gaussian

__all__ = [
    "CausalityViolation",
    "FeedbackKind",
    "FeedbackModel",
    "ChannelTensor",
    "SignalRecord",
    "generate_channel",
    "apply_channel",
    "AccessRecord",
    "AccessLog",
    "TxInformationView",
    "make_tx_view",
    "audit_feedback_usage",
    "outputs_own_receiver_only",
    "MAG_BOUNDS_DEFAULT",
]

MAG_BOUNDS_DEFAULT = (1e-3, 1e3)


class CausalityViolation(Exception):
    """A transmitter asked for information its feedback model does not grant."""


class FeedbackKind(enum.Enum):
    """What the feedback link carries back to the transmitters."""

    DELAYED_CSIT = "delayed_csit"
    DELAYED_OUTPUT = "delayed_output"
    DELAYED_SHANNON = "delayed_shannon"
    NONE = "none"


@dataclass(frozen=True)
class FeedbackModel:
    """Feedback kind, delay, and which transmitters see which receiver outputs.

    ``output_association`` maps a receiver index to the set of transmitter
    entities that are fed that receiver's output.  ``None`` means full
    association (every transmitter sees every output).  It is only consulted
    for the output-carrying kinds.
    """

    kind: FeedbackKind
    delay_slots: int = 1
    output_association: Mapping[int, frozenset[int]] | None = None

    def __post_init__(self) -> None:
        if self.delay_slots < 1:
            raise ValueError("delay_slots must be a positive integer")

    @property
    def provides_csi(self) -> bool:
        return self.kind in (FeedbackKind.DELAYED_CSIT, FeedbackKind.DELAYED_SHANNON)

    @property
    def provides_output(self) -> bool:
        return self.kind in (FeedbackKind.DELAYED_OUTPUT, FeedbackKind.DELAYED_SHANNON)

    def output_allowed(self, rx: int, tx: int) -> bool:
        if not self.provides_output:
            return False
        if self.output_association is None:
            return True
        return tx in self.output_association.get(rx, frozenset())


@dataclass(frozen=True)
class ChannelTensor:
    """Channel coefficients ``h[rx, tx, slot]`` with magnitude guarantees.

    Every coefficient satisfies ``mag_bounds[0] <= |h| <= mag_bounds[1]``;
    draws outside the band were rejected and resampled during generation,
    and ``num_rejections`` records how many.
    """

    h: np.ndarray
    mag_bounds: tuple[float, float] = MAG_BOUNDS_DEFAULT
    num_rejections: int = 0

    def __post_init__(self) -> None:
        if self.h.ndim != 3:
            raise ValueError(f"channel tensor must be 3-D, got shape {self.h.shape}")
        if not np.all(np.isfinite(self.h)):
            raise ValueError("channel coefficients must be finite")
        lo, hi = self.mag_bounds
        mags = np.abs(self.h)
        if mags.min() < lo or mags.max() > hi:
            raise ValueError("channel coefficient magnitude outside the configured band")

    @property
    def num_rx(self) -> int:
        return self.h.shape[0]

    @property
    def num_tx(self) -> int:
        return self.h.shape[1]

    @property
    def num_slots(self) -> int:
        return self.h.shape[2]


def generate_channel(
    num_rx: int,
    num_tx: int,
    num_slots: int,
    rng: np.random.Generator,
    mag_bounds: tuple[float, float] = MAG_BOUNDS_DEFAULT,
    max_rejections: int = 1000,
) -> ChannelTensor:
    """Draw an i.i.d. CN(0, 1) channel tensor, rejection-sampled to the magnitude band.

    Each coefficient is redrawn while its magnitude falls outside
    ``mag_bounds``, up to ``max_rejections`` redraws per coefficient; hitting
    the cap aborts with a diagnostic, since for the default band the
    per-draw rejection probability is about 1e-6 and the cap is unreachable
    for any healthy generator.
    """
    lo, hi = mag_bounds
    if not (0.0 < lo < hi):
        raise ValueError(f"invalid magnitude bounds {mag_bounds}")
    shape = (num_rx, num_tx, num_slots)
    h = sample_complex_gaussian(rng, int(np.prod(shape))).reshape(shape)
    rejections = 0
    mags = np.abs(h)
    bad = (mags < lo) | (mags > hi)
    rounds = 0
    while np.any(bad):
        rounds += 1
        if rounds > max_rejections:
            raise RuntimeError(
                f"rejection sampling failed to land in |h| within [{lo:g}, {hi:g}] "
                f"after {max_rejections} redraws per coefficient; "
                f"{int(bad.sum())} coefficients still outside the band"
            )
        rejections += int(bad.sum())
        redraw = sample_complex_gaussian(rng, int(bad.sum()))
        h[bad] = redraw
        mags = np.abs(h)
        bad = (mags < lo) | (mags > hi)
    return ChannelTensor(h=h, mag_bounds=mag_bounds, num_rejections=rejections)


def apply_channel(
    x_slot: np.ndarray,
    tensor: ChannelTensor,
    slot: int,
    noise_variance: float = 0.0,
    rng: np.random.Generator | None = None,
    noise: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Propagate one slot of transmit scalars through the channel.

    Returns ``(y_clean, y_noisy)`` where ``y_clean[k] = sum_j h[k, j, slot] *
    x_slot[j]`` evaluated through a single fixed arithmetic path, and
    ``y_noisy`` adds either the explicitly supplied ``noise`` vector or a
    fresh CN(0, noise_variance) draw from ``rng``.  With zero noise the two
    outputs are equal.
    """
    x_slot = np.asarray(x_slot, dtype=np.complex128)
    if x_slot.shape != (tensor.num_tx,):
        raise ValueError(f"expected {tensor.num_tx} transmit scalars, got shape {x_slot.shape}")
    y_clean = tensor.h[:, :, slot] @ x_slot
    if noise is not None:
        y_noisy = y_clean + np.asarray(noise, dtype=np.complex128)
    elif noise_variance > 0.0:
        if rng is None:
            raise ValueError("noise_variance > 0 requires an rng")
        z = sample_complex_gaussian(rng, tensor.num_rx) * np.sqrt(noise_variance)
        y_noisy = y_clean + z
    else:
        y_noisy = y_clean.copy()
    return y_clean, y_noisy


@dataclass(frozen=True)
class SignalRecord:
    """All scalars of one simulated block.

    ``x[j, n]`` is what antenna ``j`` sent at slot ``n``; ``y_clean`` is the
    noise-free superposition at each receiver and ``y_noisy`` what the
    receivers actually observed (equal to ``y_clean`` in noiseless runs).
    """

    x: np.ndarray
    y_clean: np.ndarray
    y_noisy: np.ndarray


@dataclass(frozen=True)
class AccessRecord:
    """One read through a transmitter view.

    ``kind`` is ``"csi"`` for a channel coefficient ``h[item_rx, item_tx,
    item_slot]`` and ``"output"`` for a received value ``y[item_rx,
    item_slot]`` (``item_tx`` is None in that case).  ``slot`` is the slot
    being encoded when the read happened.
    """

    tx: int
    slot: int
    kind: str
    item_rx: int
    item_tx: int | None
    item_slot: int


@dataclass
class AccessLog:
    """Append-only record of every transmitter-side information read."""

    records: list[AccessRecord] = field(default_factory=list)

    def append(self, record: AccessRecord) -> None:
        self.records.append(record)

    def csi_slots(self) -> frozenset[int]:
        return frozenset(r.item_slot for r in self.records if r.kind == "csi")

    def output_reads(self) -> list[AccessRecord]:
        return [r for r in self.records if r.kind == "output"]

    def max_lag_violations(self, delay_slots: int) -> int:
        """Count records that broke the delay rule (always 0 unless views are bypassed)."""
        return sum(1 for r in self.records if r.item_slot > r.slot - delay_slots)


class TxInformationView:
    """Everything transmitter entity ``tx`` may legally read while encoding slot ``slot``.

    Channel coefficients are available only under a CSI-carrying feedback
    kind, received outputs only under an output-carrying kind and only for
    receivers associated with this transmitter; both only for slots at least
    ``delay_slots`` in the past.  Each successful read is appended to the log
    (one record per scalar), so the log doubles as a usage certificate.
    """

    def __init__(
        self,
        tx: int,
        slot: int,
        tensor: ChannelTensor,
        outputs: np.ndarray,
        model: FeedbackModel,
        log: AccessLog | None = None,
    ) -> None:
        self.tx = tx
        self.slot = slot
        self._tensor = tensor
        self._outputs = outputs
        self.model = model
        self._log = log

    def _check_item_slot(self, item_slot: int, what: str) -> None:
        latest = self.slot - self.model.delay_slots
        if not (0 <= item_slot <= latest):
            raise CausalityViolation(
                f"transmitter {self.tx} encoding slot {self.slot} asked for {what} "
                f"of slot {item_slot}; only slots 0..{latest} are visible"
            )

    def channel_coeff(self, rx: int, tx_col: int, item_slot: int) -> complex:
        """Read ``h[rx, tx_col, item_slot]``, enforcing delay and model kind."""
        if not self.model.provides_csi:
            raise CausalityViolation(
                f"feedback kind {self.model.kind.value} carries no channel state"
            )
        self._check_item_slot(item_slot, "channel state")
        if self._log is not None:
            self._log.append(
                AccessRecord(self.tx, self.slot, "csi", rx, tx_col, item_slot)
            )
        return complex(self._tensor.h[rx, tx_col, item_slot])

    def channel_states(self, slots: Iterable[int]) -> np.ndarray:
        """Read the full coefficient matrix for each given past slot.

        Returns an array of shape ``(num_rx, num_tx, len(slots))``.  Every
        scalar goes through :meth:`channel_coeff`, so all reads are checked
        and logged individually.
        """
        slots = list(slots)
        out = np.empty((self._tensor.num_rx, self._tensor.num_tx, len(slots)), dtype=np.complex128)
        for idx, m in enumerate(slots):
            for k in range(self._tensor.num_rx):
                for j in range(self._tensor.num_tx):
                    out[k, j, idx] = self.channel_coeff(k, j, m)
        return out

    def output(self, rx: int, item_slot: int) -> complex:
        """Read the value receiver ``rx`` observed at ``item_slot``."""
        if not self.model.provides_output:
            raise CausalityViolation(
                f"feedback kind {self.model.kind.value} carries no receiver outputs"
            )
        if not self.model.output_allowed(rx, self.tx):
            raise CausalityViolation(
                f"output of receiver {rx} is not fed back to transmitter {self.tx}"
            )
        self._check_item_slot(item_slot, f"output of receiver {rx}")
        if self._log is not None:
            self._log.append(
                AccessRecord(self.tx, self.slot, "output", rx, None, item_slot)
            )
        return complex(self._outputs[rx, item_slot])


def make_tx_view(
    tx: int,
    slot: int,
    tensor: ChannelTensor,
    outputs: np.ndarray,
    model: FeedbackModel,
    log: AccessLog | None = None,
) -> TxInformationView:
    """Build the information view of transmitter entity ``tx`` for slot ``slot``."""
    return TxInformationView(tx, slot, tensor, outputs, model, log)


def audit_feedback_usage(log: AccessLog, num_slots: int) -> frozenset[int]:
    """Set of slot indices whose channel states any transmitter read.

    The CSI usage fraction of a scheme is ``len(result) / num_slots``.
    """
    slots = log.csi_slots()
    out_of_range = [m for m in slots if not (0 <= m < num_slots)]
    if out_of_range:
        raise ValueError(f"access log references slots outside the block: {out_of_range}")
    return slots


def outputs_own_receiver_only(log: AccessLog) -> bool:
    """True when every output read was of the reading transmitter's own receiver.

    Only meaningful for schemes that pair transmitter ``j`` with receiver
    ``j``; vacuously true when no outputs were read.
    """
    return all(r.item_rx == r.tx for r in log.output_reads())
