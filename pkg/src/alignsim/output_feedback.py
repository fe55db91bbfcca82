"""Short feedback-based schemes driven by explicit slot schedules.

Three constructions share one execution engine:

* ``bc_mat``: two-antenna broadcast channel with delayed CSIT, 4 symbols
  over 3 slots.  Slots 0 and 1 send each user's symbol pair; in slot 2 a
  single antenna sends the sum of the two interference combinations the
  users already observed, rebuilt at the transmitter from the now-available
  channel states.
* ``x_output_fb``: two-user X channel with delayed output feedback (every
  transmitter sees every receiver's outputs), 4 symbols over 3 slots.  Slots
  0 and 1 send the symbols for receivers 0 and 1; in slot 2 each transmitter
  replays an output that is interference to one receiver and a fresh desired
  equation to the other.
* ``ic3_output_fb``: 3-user interference channel where each transmitter is
  fed back only its own receiver's outputs, 6 symbols over 5 slots.  Three
  symbol slots are followed by two slots replaying overheard outputs, wired
  so every receiver can peel the replays it already knows and be left with
  two equations in its own two symbols.

A schedule assigns each (slot, antenna) a payload: an information symbol, a
stored received output, or a superposition of clean combinations rebuilt
from delayed CSIT.  Decoding follows a per-receiver cancellation plan: peel
steps recover one unknown replayed quantity per observation by subtracting
quantities the receiver already holds, and solve steps invert the 2x2
systems the recovered equations form.  Every plan only ever references
values the receiver observed itself or recovered in an earlier step.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .base import Scheme
from .channel import FeedbackKind, FeedbackModel
from .numerics import Singular, solve_square

__all__ = [
    "SymbolPayload",
    "OutputPayload",
    "ComboPayload",
    "Peel",
    "Solve2",
    "ScheduledScheme",
    "BcMatScheme",
    "XOutputFeedbackScheme",
    "IC3OutputFeedbackScheme",
]


@dataclass(frozen=True)
class SymbolPayload:
    """Send information symbol ``symbol`` scaled to full power."""

    symbol: int


@dataclass(frozen=True)
class OutputPayload:
    """Replay the value receiver ``rx`` observed at ``slot``, unscaled.

    The transmitter reads the stored output through its feedback view; it
    has no channel knowledge, so the replay cannot be renormalized and its
    power is proportional to, not exactly equal to, the slot budget.
    """

    rx: int
    slot: int


@dataclass(frozen=True)
class ComboPayload:
    """Send the sum of clean combinations ``refs``, rebuilt from delayed CSIT.

    Each ref ``(rx, slot)`` names the noise-free linear combination receiver
    ``rx`` observed at ``slot``.  The transmitter knows the symbols it sent
    and, once the feedback delay has passed, the channel states, so it can
    reconstruct the combinations exactly and normalize the sum to full
    power.
    """

    refs: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class Peel:
    """Recover one replayed quantity from the observation at ``observe_slot``.

    All other quantities carried by that observation must already be in the
    receiver's store; ``target`` is the one being solved for.
    """

    observe_slot: int
    target: tuple[int, int]


@dataclass(frozen=True)
class Solve2:
    """Solve two stored equations ``equations`` for the two ``unknowns``."""

    equations: tuple[tuple[int, int], tuple[int, int]]
    unknowns: tuple[int, int]


class ScheduledScheme(Scheme):
    """Execution engine for schedule plus cancellation-plan schemes.

    Subclasses provide ``schedule`` (per slot, per antenna payloads, ``None``
    for silence) and ``plans`` (per receiver step tuples).
    """

    schedule: tuple[tuple[object, ...], ...]
    plans: tuple[tuple[object, ...], ...]

    def symbols_for_rx(self, rx: int) -> list[int]:
        per_rx = self.num_symbols // self.num_rx
        return [per_rx * rx + i for i in range(per_rx)]

    # -- encoding ---------------------------------------------------------

    def _combo_norm(self, view, refs) -> float:
        """Norm of the symbol-basis coefficient vector of the rebuilt sum, per unit amp."""
        total = 0.0
        for r, m in refs:
            for j, payload in enumerate(self.schedule[m]):
                if isinstance(payload, SymbolPayload):
                    total += abs(view.channel_coeff(r, j, m)) ** 2
        return float(np.sqrt(total))

    def transmit(self, antenna, slot, view, msgs, offline, state, amp, tol):
        payload = self.schedule[slot][antenna]
        if payload is None:
            return 0j
        if isinstance(payload, SymbolPayload):
            return amp * complex(msgs[payload.symbol])
        if isinstance(payload, OutputPayload):
            return view.output(payload.rx, payload.slot)
        if isinstance(payload, ComboPayload):
            key = ("combo_norm", view.tx, slot)
            if key not in state:
                state[key] = self._combo_norm(view, payload.refs)
            total = 0j
            for r, m in payload.refs:
                for j, other in enumerate(self.schedule[m]):
                    if isinstance(other, SymbolPayload):
                        total += view.channel_coeff(r, j, m) * amp * msgs[other.symbol]
            return total / state[key]
        raise TypeError(f"unknown payload {payload!r}")

    # -- decoding ---------------------------------------------------------

    def decode_context(self, tensor, offline, tol, amp):
        return (tensor.h, amp, tol)

    def _replay_coefficients(self, h, slot, rx, amp):
        """Map ref -> coefficient with which it reaches ``rx`` at a replay slot."""
        coeffs: dict[tuple[int, int], complex] = {}
        for j, payload in enumerate(self.schedule[slot]):
            if payload is None or isinstance(payload, SymbolPayload):
                continue
            if isinstance(payload, OutputPayload):
                ref = (payload.rx, payload.slot)
                coeffs[ref] = coeffs.get(ref, 0j) + h[rx, j, slot]
            elif isinstance(payload, ComboPayload):
                norm = self._combo_norm_from_h(h, payload.refs)
                for ref in payload.refs:
                    coeffs[ref] = coeffs.get(ref, 0j) + h[rx, j, slot] / norm
        return coeffs

    def _combo_norm_from_h(self, h, refs) -> float:
        total = 0.0
        for r, m in refs:
            for j, payload in enumerate(self.schedule[m]):
                if isinstance(payload, SymbolPayload):
                    total += abs(h[r, j, m]) ** 2
        return float(np.sqrt(total))

    def _equation_row(self, h, ref, unknowns, amp):
        """Coefficients of ``unknowns`` in the stored equation ``ref``."""
        r, m = ref
        row = np.zeros(len(unknowns), dtype=np.complex128)
        for j, payload in enumerate(self.schedule[m]):
            if isinstance(payload, SymbolPayload):
                if payload.symbol not in unknowns:
                    raise LookupError(
                        f"equation ({r}, {m}) involves symbol {payload.symbol} "
                        f"outside the unknowns {unknowns}"
                    )
                row[unknowns.index(payload.symbol)] += h[r, j, m] * amp
        return row

    def decode(self, rx, y_row, ctx):
        h, amp, tol = ctx
        store: dict[tuple[int, int], complex] = {
            (rx, m): complex(y_row[m]) for m in range(self.num_slots)
        }
        recovered: dict[int, complex] = {}
        for step in self.plans[rx]:
            if isinstance(step, Peel):
                coeffs = self._replay_coefficients(h, step.observe_slot, rx, amp)
                if step.target not in coeffs:
                    raise LookupError(f"slot {step.observe_slot} does not carry {step.target}")
                pivot = coeffs[step.target]
                scale = max(abs(c) for c in coeffs.values())
                if abs(pivot) <= tol.rank_rel * scale:
                    raise Singular("replay coefficient too small to peel against")
                acc = complex(y_row[step.observe_slot])
                for ref, c in coeffs.items():
                    if ref == step.target:
                        continue
                    if ref not in store:
                        raise LookupError(
                            f"peel at slot {step.observe_slot} needs {ref} "
                            "before it was recovered"
                        )
                    acc -= c * store[ref]
                store[step.target] = acc / pivot
            elif isinstance(step, Solve2):
                unknowns = list(step.unknowns)
                rows = [self._equation_row(h, ref, unknowns, amp) for ref in step.equations]
                rhs = np.array([store[ref] for ref in step.equations], dtype=np.complex128)
                sol = solve_square(np.stack(rows), rhs, tol)
                for sym, val in zip(unknowns, sol):
                    recovered[sym] = val
            else:
                raise TypeError(f"unknown plan step {step!r}")
        return np.array([recovered[s] for s in self.symbols_for_rx(rx)], dtype=np.complex128)


class BcMatScheme(ScheduledScheme):
    """Two-antenna broadcast channel, delayed CSIT, 4 symbols over 3 slots.

    Symbols 0-1 are user 0's pair, symbols 2-3 user 1's.  Both antennas are
    driven by a single transmitter entity.
    """

    scheme_id = "bc_mat"
    num_slots = 3
    num_rx = 2
    num_tx = 2
    num_entities = 1
    num_symbols = 4
    dof = Fraction(4, 3)
    feedback = FeedbackModel(kind=FeedbackKind.DELAYED_CSIT)
    csi_slot_budget = Fraction(2, 3)

    schedule = (
        (SymbolPayload(0), SymbolPayload(1)),
        (SymbolPayload(2), SymbolPayload(3)),
        (ComboPayload(refs=((1, 0), (0, 1))), None),
    )
    plans = (
        (
            Peel(observe_slot=2, target=(1, 0)),
            Solve2(equations=((0, 0), (1, 0)), unknowns=(0, 1)),
        ),
        (
            Peel(observe_slot=2, target=(0, 1)),
            Solve2(equations=((1, 1), (0, 1)), unknowns=(2, 3)),
        ),
    )

    def entity_of(self, antenna: int) -> int:
        return 0


class XOutputFeedbackScheme(ScheduledScheme):
    """Two-user X channel, delayed output feedback, 4 symbols over 3 slots.

    Symbol ``2k + j`` travels from transmitter ``j`` to receiver ``k``.  In
    slot 2, transmitter 0 replays what receiver 1 observed in slot 0 and
    transmitter 1 replays what receiver 0 observed in slot 1; each replay is
    already known to one receiver and completes a 2x2 system at the other.
    """

    scheme_id = "x_output_fb"
    num_slots = 3
    num_rx = 2
    num_tx = 2
    num_entities = 2
    num_symbols = 4
    dof = Fraction(4, 3)
    feedback = FeedbackModel(kind=FeedbackKind.DELAYED_OUTPUT)
    csi_slot_budget = Fraction(0, 1)

    schedule = (
        (SymbolPayload(0), SymbolPayload(1)),
        (SymbolPayload(2), SymbolPayload(3)),
        (OutputPayload(rx=1, slot=0), OutputPayload(rx=0, slot=1)),
    )
    plans = (
        (
            Peel(observe_slot=2, target=(1, 0)),
            Solve2(equations=((0, 0), (1, 0)), unknowns=(0, 1)),
        ),
        (
            Peel(observe_slot=2, target=(0, 1)),
            Solve2(equations=((1, 1), (0, 1)), unknowns=(2, 3)),
        ),
    )


class IC3OutputFeedbackScheme(ScheduledScheme):
    """3-user interference channel, own-receiver output feedback, 6 symbols over 5 slots.

    Symbol ``2k + i`` is the i-th symbol for receiver ``k``.  Slots 0-2
    schedule two active transmitters each; slots 3-4 replay outputs that
    every receiver can either cancel directly or unlock with one earlier
    peel, after which each receiver holds two independent equations in its
    own symbol pair.
    """

    scheme_id = "ic3_output_fb"
    num_slots = 5
    num_rx = 3
    num_tx = 3
    num_entities = 3
    num_symbols = 6
    dof = Fraction(6, 5)
    feedback = FeedbackModel(
        kind=FeedbackKind.DELAYED_OUTPUT,
        output_association={
            0: frozenset({0}),
            1: frozenset({1}),
            2: frozenset({2}),
        },
    )
    csi_slot_budget = Fraction(0, 1)

    schedule = (
        (SymbolPayload(0), SymbolPayload(2), None),
        (SymbolPayload(1), None, SymbolPayload(4)),
        (None, SymbolPayload(3), SymbolPayload(5)),
        (None, OutputPayload(rx=1, slot=1), OutputPayload(rx=2, slot=0)),
        (OutputPayload(rx=0, slot=2), None, OutputPayload(rx=2, slot=0)),
    )
    plans = (
        (
            Peel(observe_slot=4, target=(2, 0)),
            Solve2(equations=((0, 0), (2, 0)), unknowns=(0, 2)),
            Peel(observe_slot=3, target=(1, 1)),
            Solve2(equations=((0, 1), (1, 1)), unknowns=(1, 4)),
        ),
        (
            Peel(observe_slot=3, target=(2, 0)),
            Solve2(equations=((1, 0), (2, 0)), unknowns=(0, 2)),
            Peel(observe_slot=4, target=(0, 2)),
            Solve2(equations=((1, 2), (0, 2)), unknowns=(3, 5)),
        ),
        (
            Peel(observe_slot=3, target=(1, 1)),
            Solve2(equations=((2, 1), (1, 1)), unknowns=(1, 4)),
            Peel(observe_slot=4, target=(0, 2)),
            Solve2(equations=((2, 2), (0, 2)), unknowns=(3, 5)),
        ),
    )
