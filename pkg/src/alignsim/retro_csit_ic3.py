"""Eight-slot delayed-CSIT scheme for the 3-user interference channel (9 symbols / 8 slots).

Transmitter ``k`` carries three symbols ``u[k, 0..2]`` for receiver ``k``
(flat index ``3k + i``).  Slot plan (0-based):

* Slots 0-4: each transmitter sends offline random combinations of its own
  three symbols.  No channel knowledge is used.
* Slots 5-7: each transmitter repeats a single retrospectively chosen
  combination ``s[k] = c[k] . u[k]``, three times, using no channel
  knowledge of the current slots.

At receiver ``k``, the phase-1 interference from its two interferers spans a
five-dimensional subspace of the 8-slot receive space with a one-dimensional
annihilator ``alpha[k]`` (the null vector of the 5x6 matrix of interfering
receive directions, interferer of lower index first).  The coefficient
triple ``c[k]`` is the cross product of the two sub-triples of
``alpha[.]`` that constrain transmitter ``k`` at the receivers it
interferes with, which forces each phase-2 repetition to stay inside the
interference space already spanned during phase 1.  Interference at each
receiver therefore occupies exactly 5 of 8 dimensions, leaving a
3-dimensional interference-free projection in which the three desired
symbols are solved.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .base import Scheme
from .channel import FeedbackKind, FeedbackModel
from .numerics import (
    Tolerances,
    left_null_basis,
    null_vector,
    numerical_rank,
    sample_complex_gaussian,
    solve_square,
)

__all__ = [
    "DegenerateCoefficients",
    "InterferenceRankUnexpected",
    "ICOffline",
    "interferers",
    "alpha_system",
    "compute_alphas",
    "phase2_coefficients",
    "effective_precoders",
    "IC3RetroCsitScheme",
]

NUM_SLOTS = 8
PHASE1_SLOTS = 5
EXPECTED_INTERFERENCE_RANK = 5


class DegenerateCoefficients(Exception):
    """A phase-2 coefficient cross product vanished (discardable draw)."""


class InterferenceRankUnexpected(Exception):
    """Interference occupied a different number of dimensions than the design guarantees.

    This is a structural failure of the construction, never a resampling
    event.
    """


@dataclass(frozen=True)
class ICOffline:
    """Phase-1 coefficients ``phase1[k, i, n]``, unit power per (k, n)."""

    phase1: np.ndarray


def interferers(rx: int) -> tuple[int, int]:
    """The two transmitters interfering at ``rx``, lower index first."""
    return tuple(j for j in range(3) if j != rx)


def alpha_system(h5: np.ndarray, phase1: np.ndarray, rx: int) -> np.ndarray:
    """5x6 matrix of phase-1 interfering receive directions at ``rx``.

    ``h5`` is the slot-0..4 channel block ``(3, 3, 5)``.  Columns 0-2 belong
    to the lower-indexed interferer, columns 3-5 to the higher-indexed one.
    """
    a, b = interferers(rx)
    cols = [h5[rx, j, :] * phase1[j, i, :] for j in (a, b) for i in range(3)]
    return np.stack(cols, axis=1)


def compute_alphas(h5: np.ndarray, phase1: np.ndarray, tol: Tolerances) -> np.ndarray:
    """Unit-norm annihilator vectors ``alpha[k]`` of the three interference systems.

    Each row ``alpha[k]`` has its first significant entry real positive, so
    every node computing it from the same channel states gets the same
    vector bit for bit.
    """
    return np.stack([null_vector(alpha_system(h5, phase1, rx), tol) for rx in range(3)])


def _alpha_sub(alphas: np.ndarray, rx: int, tx: int) -> np.ndarray:
    """Sub-triple of ``alpha[rx]`` that weights transmitter ``tx``'s columns."""
    a, b = interferers(rx)
    if tx == a:
        return alphas[rx, 0:3]
    if tx == b:
        return alphas[rx, 3:6]
    raise ValueError(f"transmitter {tx} does not interfere at receiver {rx}")


def phase2_coefficients(alphas: np.ndarray) -> np.ndarray:
    """Unit-norm combination triples ``c[k]`` for the phase-2 repetitions.

    ``c[k]`` must be orthogonal to the two alpha sub-triples that constrain
    transmitter ``k`` at the receivers it interferes with; the cross product
    of those sub-triples (taken in ascending receiver order) satisfies both
    constraints at once.  Raises :class:`DegenerateCoefficients` when the
    sub-triples are parallel and the cross product vanishes.
    """
    coeffs = np.empty((3, 3), dtype=np.complex128)
    for tx in range(3):
        lo, hi = interferers(tx)  # the receivers that see tx as interference
        c = np.cross(_alpha_sub(alphas, lo, tx), _alpha_sub(alphas, hi, tx))
        norm = np.linalg.norm(c)
        if norm < 1e-12:
            raise DegenerateCoefficients(
                f"phase-2 coefficient triple of transmitter {tx} vanished"
            )
        coeffs[tx] = c / norm
    return coeffs


def effective_precoders(
    h: np.ndarray, phase1: np.ndarray, tol: Tolerances
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(alphas, coeffs, precoders) where ``precoders[k, i, n]`` spans all 8 slots.

    ``precoders`` stacks the phase-1 coefficients with the repeated phase-2
    triple, so column ``i`` of transmitter ``k``'s effective 8x3 precoding
    matrix is ``precoders[k, i, :]``.
    """
    alphas = compute_alphas(h[:, :, :PHASE1_SLOTS], phase1, tol)
    coeffs = phase2_coefficients(alphas)
    precoders = np.empty((3, 3, NUM_SLOTS), dtype=np.complex128)
    precoders[:, :, :PHASE1_SLOTS] = phase1
    for n in range(PHASE1_SLOTS, NUM_SLOTS):
        precoders[:, :, n] = coeffs
    return alphas, coeffs, precoders


@dataclass(frozen=True)
class _ICDecodeContext:
    null_bases: tuple[np.ndarray, ...]      # 8x3 per receiver
    projected: tuple[np.ndarray, ...]       # 3x3 per receiver
    ranks: tuple[int, ...]
    full_dets: tuple[float, ...]
    alpha_residuals: tuple[float, ...]
    constraint_residual: float
    tol: Tolerances


class IC3RetroCsitScheme(Scheme):
    """3-user interference channel, delayed CSIT, 9 symbols over 8 slots."""

    scheme_id = "ic3_retro_csit"
    num_slots = NUM_SLOTS
    num_rx = 3
    num_tx = 3
    num_entities = 3
    num_symbols = 9
    dof = Fraction(9, 8)
    feedback = FeedbackModel(kind=FeedbackKind.DELAYED_CSIT)
    csi_slot_budget = Fraction(PHASE1_SLOTS, NUM_SLOTS)

    def symbols_for_rx(self, rx: int) -> list[int]:
        return [3 * rx + i for i in range(3)]

    def draw_offline(self, rng: np.random.Generator) -> ICOffline:
        phase1 = sample_complex_gaussian(rng, 3 * 3 * PHASE1_SLOTS).reshape(
            3, 3, PHASE1_SLOTS
        )
        for k in range(3):
            for n in range(PHASE1_SLOTS):
                phase1[k, :, n] /= np.linalg.norm(phase1[k, :, n])
        return ICOffline(phase1=phase1)

    # -- encoding ---------------------------------------------------------

    def transmit(self, antenna, slot, view, msgs, offline, state, amp, tol):
        u = msgs.reshape(3, 3)
        k = antenna
        if slot < PHASE1_SLOTS:
            return amp * complex(np.dot(offline.phase1[k, :, slot], u[k]))
        key = ("coeff", view.tx)
        if key not in state:
            # Transmitter k only needs the annihilators of the two receivers
            # it interferes with, and reads only their cross channels.
            subs = []
            for rx in interferers(k):
                a, b = interferers(rx)
                h5 = np.zeros((3, 3, PHASE1_SLOTS), dtype=np.complex128)
                for j in (a, b):
                    for n in range(PHASE1_SLOTS):
                        h5[rx, j, n] = view.channel_coeff(rx, j, n)
                alpha = null_vector(alpha_system(h5, offline.phase1, rx), tol)
                subs.append(alpha[0:3] if k == a else alpha[3:6])
            c = np.cross(subs[0], subs[1])
            norm = np.linalg.norm(c)
            if norm < 1e-12:
                raise DegenerateCoefficients(
                    f"phase-2 coefficient triple of transmitter {k} vanished"
                )
            state[key] = c / norm
        # The same scalar is repeated in every phase-2 slot.
        return amp * complex(np.dot(state[key], u[k]))

    # -- decoding ---------------------------------------------------------

    def decode_context(self, tensor, offline, tol, amp):
        h = tensor.h
        alphas, coeffs, precoders = effective_precoders(h, offline.phase1, tol)
        residuals = []
        for rx in range(3):
            a = alpha_system(h[:, :, :PHASE1_SLOTS], offline.phase1, rx)
            residuals.append(float(np.linalg.norm(a @ alphas[rx]) / np.linalg.norm(a)))
        # The defining orthogonality of the coefficient triples, checked in
        # exact arithmetic terms: c[tx] . alpha_sub(rx, tx) = 0.
        constraint = 0.0
        for tx in range(3):
            for rx in interferers(tx):
                constraint = max(
                    constraint, float(abs(np.dot(coeffs[tx], _alpha_sub(alphas, rx, tx))))
                )
        null_bases = []
        projected = []
        ranks = []
        full_dets = []
        for rx in range(3):
            a, b = interferers(rx)
            interference = np.concatenate(
                [
                    np.stack([h[rx, j, :] * amp * precoders[j, i, :] for i in range(3)], axis=1)
                    for j in (a, b)
                ],
                axis=1,
            )
            rank = numerical_rank(interference, tol)
            if rank != EXPECTED_INTERFERENCE_RANK:
                raise InterferenceRankUnexpected(
                    f"interference at receiver {rx} has rank {rank}, "
                    f"expected {EXPECTED_INTERFERENCE_RANK}"
                )
            ranks.append(rank)
            desired = np.stack(
                [h[rx, rx, :] * amp * precoders[rx, i, :] for i in range(3)], axis=1
            )
            basis = left_null_basis(interference, tol)
            null_bases.append(basis)
            projected.append(basis.conj().T @ desired)
            u_int = np.linalg.svd(interference, full_matrices=False)[0][:, :rank]
            full_dets.append(float(abs(np.linalg.det(np.concatenate([desired, u_int], axis=1)))))
        return _ICDecodeContext(
            null_bases=tuple(null_bases),
            projected=tuple(projected),
            ranks=tuple(ranks),
            full_dets=tuple(full_dets),
            alpha_residuals=tuple(residuals),
            constraint_residual=constraint,
            tol=tol,
        )

    def decode(self, rx, y_row, ctx):
        rhs = ctx.null_bases[rx].conj().T @ y_row
        return solve_square(ctx.projected[rx], rhs, ctx.tol)

    def certificates(self, ctx):
        certs = {f"interference_rank_rx{rx}": float(ctx.ranks[rx]) for rx in range(3)}
        for rx in range(3):
            certs[f"alpha_residual_rx{rx}"] = ctx.alpha_residuals[rx]
            certs[f"full_det_rx{rx}"] = ctx.full_dets[rx]
        certs["constraint_residual"] = ctx.constraint_residual
        return certs

    def check_certificates(self, certs, tol):
        failures = []
        for rx in range(3):
            if certs[f"interference_rank_rx{rx}"] != EXPECTED_INTERFERENCE_RANK:
                failures.append(f"interference_rank_rx{rx}")
            if certs[f"alpha_residual_rx{rx}"] > tol.residual_rel:
                failures.append(f"alpha_residual_rx{rx}")
            if not certs[f"full_det_rx{rx}"] > 0.0:
                failures.append(f"full_det_rx{rx}")
        if certs["constraint_residual"] > 1e-12:
            failures.append("constraint_residual")
        return failures

    @property
    def interference_rank_keys(self) -> list[str]:
        return [f"interference_rank_rx{rx}" for rx in range(3)]
