"""Two ping-pong swaps composed through a non-custodial exchange hub.

Each client keeps one channel into the hub and receives on one channel out
of it. Every schedule step becomes two payments: the client pays the hub,
the hub validates that update and only then forwards the same units to the
other client, minus its fee. The hub therefore never has value in flight.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

from .simchain import PartyId
from .strategy import HONEST, Strategy, SwapOutcome
from .swap import Hop, Leg, PingPongSession, Step

DIRECT_TXS_PER_TRADE = 4  # two channels, each opened and closed
HUB_CHANNELS = 4


@dataclass
class HubSession(PingPongSession):
    """A pays B through ``hub`` on chain A while B pays A through it on chain B."""

    hub: PartyId = "hub"
    hub_fee_per_unit: int = 0

    module = "hub"

    def __post_init__(self) -> None:
        t = self.terms
        if self.hub in (t.party_a, t.party_b):
            raise ValueError("hub must be a third party")
        if not 0 <= self.hub_fee_per_unit < min(t.unit_a, t.unit_b):
            raise ValueError("hub_fee_per_unit must be below one micro-unit on both chains")
        super().__post_init__()

    def plan(self) -> list[Leg]:
        t, hub, fee = self.terms, self.hub, self.hub_fee_per_unit
        return [
            Leg("leg_a_in", "a", t.party_a, hub, t.amount_a, t.refund_locktime_a),
            Leg("leg_a_out", "a", hub, t.party_b, t.amount_a - t.n * fee, t.refund_locktime_a),
            Leg("leg_b_in", "b", t.party_b, hub, t.amount_b, t.refund_locktime_b),
            Leg("leg_b_out", "b", hub, t.party_a, t.amount_b - t.n * fee, t.refund_locktime_b),
        ]

    def hops(self, step: Step) -> list[Hop]:
        t, fee = self.terms, self.hub_fee_per_unit
        if step.payer == "A":
            inbound, outbound, unit = self.legs[0], self.legs[1], t.unit_a
        else:
            inbound, outbound, unit = self.legs[2], self.legs[3], t.unit_b
        return [Hop(inbound, step.units * unit), Hop(outbound, step.units * (unit - fee))]

    def forwarding_gap(self, role: str) -> int:
        """Inbound minus outbound cumulative on chain ``role``; never negative."""
        names = ("leg_a_in", "leg_a_out") if role == "a" else ("leg_b_in", "leg_b_out")
        inbound, outbound = (self.leg(n).channel for n in names)
        if inbound is None or outbound is None:
            return 0
        return inbound.accepted_paid - outbound.accepted_paid


def run_hub_swap(session: HubSession, strategies: Mapping[PartyId, Strategy] | None = None,
                 ) -> SwapOutcome:
    """Run the composed swap; parties missing from ``strategies`` behave honestly."""
    strategies = dict(strategies or {})
    for party in (session.terms.party_a, session.terms.party_b, session.hub):
        strategies.setdefault(party, HONEST)
    return session.run(strategies)


def amortized_onchain_cost(trades: int, direct: bool) -> Fraction:
    """Average on-chain transactions per trade for one client pair.

    Direct swaps open and close two fresh channels per trade. Through a hub
    the four channels are opened once, reused while capacity lasts and closed
    at the end.
    """
    if trades < 1:
        raise ValueError("trades must be at least 1")
    if direct:
        return Fraction(DIRECT_TXS_PER_TRADE)
    return Fraction(2 * HUB_CHANNELS, trades)
