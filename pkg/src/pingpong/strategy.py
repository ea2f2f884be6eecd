"""Party behaviours and the economics of cheating a ping-pong swap.

A cheater can only stop the exchange early and close the channel it
receives on; the schedule guarantees it is then ahead by at most one
micro-unit. Whether that is worth it depends on the channel fees it burns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import TYPE_CHECKING, Any, Mapping

if TYPE_CHECKING:
    from .swap import SwapTerms


class Strategy:
    """Honest behaviour; subclasses override the hooks they deviate on."""

    kind = "honest"

    def __deepcopy__(self, memo):
        return self

    def refuses(self, step: int) -> bool:
        """True if the party will not make its payment at schedule step ``step``."""
        return False

    def stall_ticks(self, step: int) -> float:
        return 0

    @property
    def closes(self) -> bool:
        return True

    @property
    def signs_refund(self) -> bool:
        return True

    def validate(self, n_steps: int) -> None:
        pass

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind}

    def __repr__(self) -> str:
        return f"{type(self).__name__}()"

    def __eq__(self, other: object) -> bool:
        return type(self) is type(other) and self.to_dict() == other.to_dict()

    def __hash__(self) -> int:
        return hash((type(self), tuple(self.to_dict().items())))


class Honest(Strategy):
    pass


HONEST = Honest()


@dataclass(frozen=True, eq=False, repr=True)
class AbortAt(Strategy):
    """Stop paying from schedule step ``step`` on and cash out the receiving channel."""

    step: int
    kind = "abort_at"

    def refuses(self, step: int) -> bool:
        return step >= self.step

    def validate(self, n_steps: int) -> None:
        if not 1 <= self.step <= n_steps:
            raise ValueError(f"abort step {self.step} outside 1..{n_steps}")

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "step": self.step}


@dataclass(frozen=True, eq=False, repr=True)
class Stall(Strategy):
    """Go silent for ``ticks`` before the payment at ``step``; ``inf`` never comes back.

    While silent the party takes no protocol action at all, closes included.
    """

    step: int
    ticks: float = math.inf
    kind = "stall"

    def __post_init__(self) -> None:
        if not self.ticks > 0:
            raise ValueError("stall ticks must be positive")

    def stall_ticks(self, step: int) -> float:
        return self.ticks if step == self.step else 0

    def validate(self, n_steps: int) -> None:
        if not 1 <= self.step <= n_steps:
            raise ValueError(f"stall step {self.step} outside 1..{n_steps}")

    def to_dict(self) -> dict[str, Any]:
        ticks = None if math.isinf(self.ticks) else int(self.ticks)
        return {"kind": self.kind, "step": self.step, "ticks": ticks}


class NeverClose(Strategy):
    kind = "never_close"

    @property
    def closes(self) -> bool:
        return False


class NeverSignRefund(Strategy):
    kind = "never_sign_refund"

    @property
    def signs_refund(self) -> bool:
        return False


_SIMPLE = {"honest": Honest, "never_close": NeverClose, "never_sign_refund": NeverSignRefund}


def parse_strategy(spec: str | Mapping[str, Any]) -> Strategy:
    """Build a strategy from its scenario-file form (a kind name or a mapping)."""
    if isinstance(spec, str):
        spec = {"kind": spec}
    kind = spec.get("kind")
    if kind in _SIMPLE:
        return _SIMPLE[kind]()
    if kind == "abort_at":
        return AbortAt(int(spec["step"]))
    if kind == "stall":
        ticks = spec.get("ticks")
        return Stall(int(spec["step"]), math.inf if ticks is None else int(ticks))
    raise ValueError(f"unknown strategy kind {kind!r}")


# -- outcomes -----------------------------------------------------------------------


@dataclass
class SwapOutcome:
    """Settlement accounting for one session. Chains are keyed by role, ``"a"``/``"b"``."""

    phase: str
    aborted_at: int | None = None
    reason: str | None = None
    culprit: str | None = None
    chains: dict[str, str] = field(default_factory=dict)
    balance_delta: dict[str, dict[str, int]] = field(default_factory=dict)
    fees_paid: dict[str, dict[str, int]] = field(default_factory=dict)
    chain_fees: dict[str, int] = field(default_factory=dict)
    signatures: dict[str, int] = field(default_factory=dict)
    updates: dict[str, int] = field(default_factory=dict)
    onchain_txs: dict[str, int] = field(default_factory=dict)
    confirmations_waited: dict[str, int] = field(default_factory=dict)
    unit_delta: dict[str, Fraction] = field(default_factory=dict)
    max_exposure: int = 0
    steps_completed: int = 0
    ticks_elapsed: int = 0
    value_delta: dict[str, int] = field(default_factory=dict)

    @property
    def completed(self) -> bool:
        return self.phase == "completed"

    @property
    def accepted_updates(self) -> int:
        return sum(self.updates.values())

    @property
    def signatures_total(self) -> int:
        return sum(self.signatures.values())

    def prefee_delta(self, party: str, role: str) -> int:
        return self.balance_delta[party][role] + self.fees_paid[party][role]


def net_value(outcome: SwapOutcome, terms: SwapTerms) -> dict[str, int]:
    """Each party's balance change valued in chain-A base units at the agreed price."""
    rate = terms.b_to_a
    return {
        party: math.floor(d.get("a", 0) + d.get("b", 0) * rate)
        for party, d in outcome.balance_delta.items()
    }


def cheat_profit(granularity: Fraction | int | str, total_value: int,
                 fees: tuple[int, int]) -> Fraction:
    """Best case for a cheater versus never trading: one micro-unit minus its channel fees.

    ``fees`` is (open_fee, close_fee) on the cheater's receiving chain; a
    negative result means cheating does not pay.
    """
    open_fee, close_fee = fees
    return Fraction(granularity) * total_value - (open_fee + close_fee)


@dataclass(frozen=True)
class CheatReport:
    unit_value: Fraction
    profit: Fraction
    savings_vs_honest: Fraction

    @property
    def profitable(self) -> bool:
        return self.profit > 0


def cheat_report(terms: SwapTerms, cheater: str, fees: tuple[int, int]) -> CheatReport:
    """Cheat economics for ``cheater`` with both readings of "profit".

    ``profit`` is measured against not trading at all; ``savings_vs_honest``
    against finishing honestly, where the channel fees are owed anyway.
    Values are in chain-A base units; ``fees`` are in the receiving chain's.
    """
    if cheater == terms.party_a:
        # A receives on chain B
        unit_value = terms.unit_b * terms.b_to_a
        fee_value = sum(fees) * terms.b_to_a
    elif cheater == terms.party_b:
        unit_value = Fraction(terms.unit_a)
        fee_value = Fraction(sum(fees))
    else:
        raise ValueError(f"{cheater!r} is not a party to the swap")
    return CheatReport(unit_value, unit_value - fee_value, unit_value)
