"""Seven-slot delayed-CSIT scheme for the two-user X channel (8 symbols / 7 slots).

Two transmitters each carry one two-symbol message for each of two receivers.
Message symbols are ``u[k, j, i]``: the i-th symbol (i in {0, 1}) from
transmitter ``j`` to receiver ``k``; the flat index is ``4k + 2j + i``.

Slot plan (0-based):

* Slots 0-2: each transmitter sends offline random combinations of its own
  four symbols.  No channel knowledge is used.
* Slots 3-6: each transmitter sends offline random combinations of its two
  second-layer variables ``s[j, k] = u[k, j, 0] - gamma[j, k] * u[k, j, 1]``.
  The constants ``gamma`` are chosen, from the slot-0..2 channel states that
  the one-slot feedback delay has made available, so that at each receiver
  the two cross interference symbols arrive along a single direction.

For receiver 0 the constants come from the unique null vector
``(gamma[0, 1], 1, -beta * gamma[1, 1], -beta)`` of the 3x4 matrix whose
columns are the slot-0..2 receive directions of the four symbols intended
for receiver 1, and symmetrically for receiver 1 (constants ``gamma[., 0]``
and ``delta``).  After the block, each receiver solves the four phase-2
slots for all four layer variables, strips them from its phase-1
observations, and is left with a 3x3 system in its two remaining desired
symbols plus one aligned interference coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .base import Scheme
from .channel import FeedbackKind, FeedbackModel
from .numerics import Tolerances, null_vector, sample_complex_gaussian, solve_square

__all__ = [
    "DegenerateNormalization",
    "XOffline",
    "XAlignmentConstants",
    "interference_system",
    "alignment_constants",
    "layer2_vars",
    "XRetroCsitScheme",
]

NUM_SLOTS = 7
PHASE1_SLOTS = 3
PHASE2_SLOTS = 4


class DegenerateNormalization(Exception):
    """A pinned null-vector entry was too small to divide by (discardable draw)."""


@dataclass(frozen=True)
class XOffline:
    """Coefficients agreed on before the block, independent of the channel.

    ``phase1[k, j, i, n]`` weights symbol ``u[k, j, i]`` in transmitter j's
    slot-n scalar, n in 0..2, normalized to unit power per (j, n).
    ``phase2[j, m, p]`` weights layer variable ``s[j, m]`` in transmitter j's
    slot-(3+p) scalar.
    """

    phase1: np.ndarray
    phase2: np.ndarray


@dataclass(frozen=True)
class XAlignmentConstants:
    """Retrospective constants computed from the phase-1 channel states.

    ``gamma[j, k]`` couples the two symbols of message (k, j); ``beta`` and
    ``delta`` are the interference co-linearity factors at receivers 0 and 1.
    """

    gamma: np.ndarray
    beta: complex
    delta: complex


def interference_system(h3: np.ndarray, phase1: np.ndarray, rx: int) -> np.ndarray:
    """3x4 matrix of phase-1 receive directions, at ``rx``, of the other receiver's symbols.

    ``h3`` is the slot-0..2 channel block ``(2, 2, 3)``.  Column order:
    (tx 0, sym 0), (tx 0, sym 1), (tx 1, sym 0), (tx 1, sym 1).
    """
    other = 1 - rx
    cols = []
    for j in range(2):
        for i in range(2):
            cols.append(h3[rx, j, :] * phase1[other, j, i, :])
    return np.stack(cols, axis=1)


def alignment_constants(
    h3: np.ndarray, phase1: np.ndarray, tol: Tolerances
) -> XAlignmentConstants:
    """Extract gamma, beta, delta from the two 3x4 interference systems.

    Each system has a one-dimensional null space for generic draws; the
    constants are ratios of null-vector entries, so they are independent of
    the vector's scale and phase convention.  Raises
    :class:`DegenerateNormalization` when an entry that must be pinned to 1
    is numerically zero, and propagates :class:`~alignsim.numerics.\
    RankDeficient` for rank-deficient draws; both are discard events.
    """
    v = null_vector(interference_system(h3, phase1, 0), tol)
    w = null_vector(interference_system(h3, phase1, 1), tol)
    for vec in (v, w):
        if min(abs(vec[1]), abs(vec[3])) < tol.rank_rel * np.linalg.norm(vec):
            raise DegenerateNormalization("null vector entry too small to pin to unity")
    gamma = np.empty((2, 2), dtype=np.complex128)
    # Null vector at receiver 0 is (gamma[0,1], 1, -beta*gamma[1,1], -beta)
    # up to scale; receiver 1 gives (gamma[0,0], 1, -delta*gamma[1,0], -delta).
    gamma[0, 1] = v[0] / v[1]
    gamma[1, 1] = v[2] / v[3]
    beta = -v[3] / v[1]
    gamma[0, 0] = w[0] / w[1]
    gamma[1, 0] = w[2] / w[3]
    delta = -w[3] / w[1]
    return XAlignmentConstants(gamma=gamma, beta=beta, delta=delta)


def layer2_vars(u: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """Second-layer variables ``s[j, k] = u[k, j, 0] - gamma[j, k] u[k, j, 1]``."""
    s = np.empty((2, 2), dtype=np.complex128)
    for j in range(2):
        for k in range(2):
            s[j, k] = u[k, j, 0] - gamma[j, k] * u[k, j, 1]
    return s


def _phase2_norm(c: np.ndarray, gamma_j: np.ndarray) -> float:
    """Power normalizer for a phase-2 scalar expressed in the unit-power symbol basis."""
    return float(
        np.sqrt(
            abs(c[0]) ** 2 * (1.0 + abs(gamma_j[0]) ** 2)
            + abs(c[1]) ** 2 * (1.0 + abs(gamma_j[1]) ** 2)
        )
    )


@dataclass(frozen=True)
class _XDecodeContext:
    constants: XAlignmentConstants
    phase2_mats: tuple[np.ndarray, np.ndarray]   # 4x4 per receiver
    strip_mats: tuple[np.ndarray, np.ndarray]    # 3x4 per receiver
    final_mats: tuple[np.ndarray, np.ndarray]    # 3x3 per receiver
    colinearity: tuple[float, float]
    align_residuals: tuple[float, float]
    tol: Tolerances


class XRetroCsitScheme(Scheme):
    """X channel, delayed CSIT, 8 symbols over 7 slots."""

    scheme_id = "x_retro_csit"
    num_slots = NUM_SLOTS
    num_rx = 2
    num_tx = 2
    num_entities = 2
    num_symbols = 8
    dof = Fraction(8, 7)
    feedback = FeedbackModel(kind=FeedbackKind.DELAYED_CSIT)
    csi_slot_budget = Fraction(PHASE1_SLOTS, NUM_SLOTS)

    def symbols_for_rx(self, rx: int) -> list[int]:
        return [4 * rx + 2 * j + i for j in range(2) for i in range(2)]

    def draw_offline(self, rng: np.random.Generator) -> XOffline:
        phase1 = sample_complex_gaussian(rng, 2 * 2 * 2 * PHASE1_SLOTS).reshape(
            2, 2, 2, PHASE1_SLOTS
        )
        # Unit transmit power per (transmitter, slot): the scalar sent is
        # amp * sum of coefficient * unit-power symbol.
        for j in range(2):
            for n in range(PHASE1_SLOTS):
                phase1[:, j, :, n] /= np.linalg.norm(phase1[:, j, :, n])
        phase2 = sample_complex_gaussian(rng, 2 * 2 * PHASE2_SLOTS).reshape(
            2, 2, PHASE2_SLOTS
        )
        return XOffline(phase1=phase1, phase2=phase2)

    # -- encoding ---------------------------------------------------------

    def transmit(self, antenna, slot, view, msgs, offline, state, amp, tol):
        u = msgs.reshape(2, 2, 2)
        j = antenna
        if slot < PHASE1_SLOTS:
            coeff = offline.phase1[:, j, :, slot]
            return amp * complex(np.sum(coeff * u[:, j, :]))
        key = ("constants", view.tx)
        if key not in state:
            # First phase-2 slot: the delay has made slots 0..2 visible.
            h3 = view.channel_states(range(PHASE1_SLOTS))
            state[key] = alignment_constants(h3, offline.phase1, tol)
        constants = state[key]
        s = layer2_vars(u, constants.gamma)
        c = offline.phase2[j, :, slot - PHASE1_SLOTS]
        raw = c[0] * s[j, 0] + c[1] * s[j, 1]
        return amp * raw / _phase2_norm(c, constants.gamma[j])

    # -- decoding ---------------------------------------------------------

    def _directions(self, h, phase1, constants, amp, rx, sym_rx, j):
        """Phase-1 receive direction, at ``rx``, of ``u[sym_rx, j, 1]`` after substitution."""
        v = phase1[sym_rx, j, :, :]  # (2 syms, 3 slots)
        comb = v[0, :] * constants.gamma[j, sym_rx] + v[1, :]
        return h[rx, j, :PHASE1_SLOTS] * amp * comb

    def decode_context(self, tensor, offline, tol, amp):
        h = tensor.h
        constants = alignment_constants(h[:, :, :PHASE1_SLOTS], offline.phase1, tol)
        gamma = constants.gamma
        residuals = []
        for rx in range(2):
            a = interference_system(h[:, :, :PHASE1_SLOTS], offline.phase1, rx)
            vec = np.array(
                [
                    gamma[0, 1 - rx],
                    1.0,
                    -(constants.beta if rx == 0 else constants.delta) * gamma[1, 1 - rx],
                    -(constants.beta if rx == 0 else constants.delta),
                ],
                dtype=np.complex128,
            )
            residuals.append(
                float(np.linalg.norm(a @ vec) / (np.linalg.norm(a) * np.linalg.norm(vec)))
            )
        phase2_mats = []
        strip_mats = []
        final_mats = []
        colinearity = []
        for rx in range(2):
            other = 1 - rx
            g = np.empty((PHASE2_SLOTS, 4), dtype=np.complex128)
            for p in range(PHASE2_SLOTS):
                for j in range(2):
                    c = offline.phase2[j, :, p]
                    norm = _phase2_norm(c, gamma[j])
                    for m in range(2):
                        g[p, 2 * j + m] = h[rx, j, PHASE1_SLOTS + p] * amp * c[m] / norm
            phase2_mats.append(g)
            w = np.empty((PHASE1_SLOTS, 4), dtype=np.complex128)
            for n in range(PHASE1_SLOTS):
                for j in range(2):
                    for m in range(2):
                        w[n, 2 * j + m] = h[rx, j, n] * amp * offline.phase1[m, j, 0, n]
            strip_mats.append(w)
            own0 = self._directions(h, offline.phase1, constants, amp, rx, rx, 0)
            own1 = self._directions(h, offline.phase1, constants, amp, rx, rx, 1)
            cross0 = self._directions(h, offline.phase1, constants, amp, rx, other, 0)
            cross1 = self._directions(h, offline.phase1, constants, amp, rx, other, 1)
            final_mats.append(np.stack([own0, own1, cross0], axis=1))
            sv = np.linalg.svd(np.stack([cross0, cross1], axis=1), compute_uv=False)
            colinearity.append(float(sv[1] / sv[0]))
        return _XDecodeContext(
            constants=constants,
            phase2_mats=(phase2_mats[0], phase2_mats[1]),
            strip_mats=(strip_mats[0], strip_mats[1]),
            final_mats=(final_mats[0], final_mats[1]),
            colinearity=(colinearity[0], colinearity[1]),
            align_residuals=(residuals[0], residuals[1]),
            tol=tol,
        )

    def decode(self, rx, y_row, ctx):
        tol = ctx.tol
        # Layer variables from the four phase-2 slots, ordered
        # (s[0,0], s[0,1], s[1,0], s[1,1]).
        s = solve_square(ctx.phase2_mats[rx], y_row[PHASE1_SLOTS:], tol)
        # Strip their phase-1 contribution; what remains lives on the two
        # desired second symbols plus one aligned interference coordinate.
        d = y_row[:PHASE1_SLOTS] - ctx.strip_mats[rx] @ s
        sol = solve_square(ctx.final_mats[rx], d, tol)
        gamma = ctx.constants.gamma
        out = np.empty(4, dtype=np.complex128)
        for j in range(2):
            second = sol[j]
            first = s[2 * j + rx] + gamma[j, rx] * second
            out[2 * j + 0] = first
            out[2 * j + 1] = second
        return out

    def certificates(self, ctx):
        det_product = abs(np.linalg.det(ctx.final_mats[0])) * abs(
            np.linalg.det(ctx.final_mats[1])
        )
        return {
            "colinearity_rx0": ctx.colinearity[0],
            "colinearity_rx1": ctx.colinearity[1],
            "align_residual_rx0": ctx.align_residuals[0],
            "align_residual_rx1": ctx.align_residuals[1],
            "det_product": det_product,
        }

    def check_certificates(self, certs, tol):
        failures = []
        for rx in range(2):
            if certs[f"colinearity_rx{rx}"] > tol.rank_rel:
                failures.append(f"colinearity_rx{rx}")
            if certs[f"align_residual_rx{rx}"] > tol.residual_rel:
                failures.append(f"align_residual_rx{rx}")
        if not certs["det_product"] > 0.0:
            failures.append("det_product")
        return failures
