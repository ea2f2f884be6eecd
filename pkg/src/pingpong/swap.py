"""Ping-pong swaps: quantized terms, the 1-2-2-...-2-1 schedule and the session driver.

Party A pays on chain A, party B on chain B, each through a channel the payer
funds. The payments interleave so that after every step the two sides differ
by at most one micro-unit, which bounds what an aborting party can take.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Callable, Iterator, Mapping, NamedTuple, Sequence

from .channel import (
    ChannelError,
    ChannelParams,
    ChannelState,
    Phase,
    accept_update,
    broadcast_funding,
    pay,
    prepare_channel,
    submit_close,
    submit_refund,
    sync_channel,
)
from .events import EventLog
from .simchain import ChainParams, Keyring, Ledger, PartyId, Transaction, pay_to
from .strategy import HONEST, AbortAt, Stall, Strategy, SwapOutcome, net_value

# Message cost between parties, in ticks.
MESSAGE_TICKS = 1
# Default channel lifetime: one hour of one-second ticks.
DEFAULT_TIMELOCK_TICKS = 3600
MIN_TIMELOCK_BLOCKS = 6
# A payee stops accepting new payments this many blocks before its channel's
# refund could be broadcast, so its close still reaches the mempool first.
CLOSE_MARGIN_BLOCKS = 2
DEFAULT_SKEW_TOLERANCE = Fraction(1, 1000)


class SwapError(ValueError):
    def __init__(self, reason: str, detail: str = "") -> None:
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason


# -- terms ---------------------------------------------------------------------------


class Quantized(NamedTuple):
    amount_a: int
    amount_b: int
    unit_a: int
    unit_b: int
    remainder_a: int
    remainder_b: int


def _check_granularity(n: int) -> None:
    if n < 2 or n % 2:
        raise SwapError("invalid_granularity", f"N={n} must be even and >= 2")


def quantize_amounts(raw_a: int, raw_b: int, n: int) -> Quantized:
    """Round both amounts down to whole micro-units of 1/N."""
    _check_granularity(n)
    if raw_a <= 0 or raw_b <= 0:
        raise ValueError("amounts must be positive")
    unit_a, unit_b = raw_a // n, raw_b // n
    if unit_a == 0:
        raise SwapError("unit_too_small", f"side A: {raw_a} < N={n}")
    if unit_b == 0:
        raise SwapError("unit_too_small", f"side B: {raw_b} < N={n}")
    return Quantized(unit_a * n, unit_b * n, unit_a, unit_b,
                     raw_a - unit_a * n, raw_b - unit_b * n)


@dataclass(frozen=True)
class SwapTerms:
    party_a: PartyId
    party_b: PartyId
    amount_a: int
    amount_b: int
    price: Fraction  # chain-A coins per chain-B coin
    granularity_inverse: int
    refund_locktime_a: int | None = None
    refund_locktime_b: int | None = None
    units_per_coin_a: int = 100_000_000
    units_per_coin_b: int = 100_000_000
    skew_tolerance: Fraction = DEFAULT_SKEW_TOLERANCE

    def __deepcopy__(self, memo):
        return self

    def __post_init__(self) -> None:
        object.__setattr__(self, "price", Fraction(self.price))
        _check_granularity(self.granularity_inverse)
        if self.party_a == self.party_b:
            raise ValueError("a swap needs two distinct parties")
        if self.price <= 0:
            raise ValueError("price must be positive")
        n = self.granularity_inverse
        for side, amount in (("a", self.amount_a), ("b", self.amount_b)):
            if amount < n:
                raise SwapError("unit_too_small", f"amount_{side}={amount} < N={n}")
            if amount % n:
                raise SwapError("not_quantized", f"amount_{side}={amount} not a multiple of N={n}")
        if abs(self.value_skew) > self.skew_tolerance:
            raise SwapError("price_mismatch",
                            f"amounts differ by {float(self.value_skew):.4%} at the agreed price")

    @classmethod
    def from_raw(cls, party_a: PartyId, party_b: PartyId, raw_a: int, raw_b: int,
                 price: Fraction | str, n: int, **kw) -> SwapTerms:
        q = quantize_amounts(raw_a, raw_b, n)
        return cls(party_a, party_b, q.amount_a, q.amount_b, Fraction(price), n, **kw)

    @property
    def n(self) -> int:
        return self.granularity_inverse

    @property
    def granularity(self) -> Fraction:
        return Fraction(1, self.granularity_inverse)

    @property
    def unit_a(self) -> int:
        return self.amount_a // self.n

    @property
    def unit_b(self) -> int:
        return self.amount_b // self.n

    @property
    def b_to_a(self) -> Fraction:
        """Value of one chain-B base unit in chain-A base units."""
        return self.price * self.units_per_coin_a / self.units_per_coin_b

    @property
    def value_skew(self) -> Fraction:
        """Relative excess of side A's value over side B's at the agreed price."""
        return (self.amount_a - self.amount_b * self.b_to_a) / self.amount_a

    def unit(self, role: str) -> int:
        return self.unit_a if role == "a" else self.unit_b


# -- schedule --------------------------------------------------------------------------


class Step(NamedTuple):
    payer: str  # "A" or "B"
    units: int


@dataclass(frozen=True)
class Schedule:
    steps: tuple[Step, ...]
    prefix: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __deepcopy__(self, memo):
        return self

    def __post_init__(self) -> None:
        running, prefix = 0, [0]
        for s in self.steps:
            running += s.units if s.payer == "A" else -s.units
            prefix.append(running)
        object.__setattr__(self, "prefix", tuple(prefix))

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def n(self) -> int:
        return len(self.steps) - 1

    def payments(self, payer: str) -> int:
        return sum(1 for s in self.steps if s.payer == payer)

    def total_units(self, payer: str) -> int:
        return sum(s.units for s in self.steps if s.payer == payer)

    def exposure(self, k: int) -> int:
        """A's units sent minus B's after the first ``k`` steps."""
        if not 0 <= k <= len(self.steps):
            raise IndexError(f"step index {k} outside 0..{len(self.steps)}")
        return self.prefix[k]


def build_schedule(n: int) -> Schedule:
    _check_granularity(n)
    steps = [Step("A", 1)]
    for _ in range(n // 2 - 1):
        steps += [Step("B", 2), Step("A", 2)]
    steps += [Step("B", 2), Step("A", 1)]
    return Schedule(tuple(steps))


def exposure(session: PingPongSession | Schedule, step_index: int) -> int:
    schedule = session if isinstance(session, Schedule) else session.schedule
    return schedule.exposure(step_index)


# -- simulated world -------------------------------------------------------------------


class World:
    """Both chains plus the shared clock, keyring and event log.

    The clock counts ticks; chain ``role`` mines a block every
    ``block_interval_ticks``. Registered channels are re-synced after every block.
    """

    def __init__(self, chains: Mapping[str, ChainParams],
                 genesis: Mapping[str, Mapping[PartyId, int]] | None = None, *,
                 seed: int = 0, log: EventLog | None = None) -> None:
        self.seed = seed
        self.keyring = Keyring(seed)
        self.log = log if log is not None else EventLog()
        self.ledgers = {role: Ledger(p, self.keyring, self.log) for role, p in chains.items()}
        self.clock = 0
        self._next_block = {role: p.block_interval_ticks for role, p in chains.items()}
        self.channels: list[tuple[str, ChannelState]] = []
        self.parties: list[PartyId] = []
        for role, balances in (genesis or {}).items():
            self.ledgers[role].genesis(dict(balances))
            self._note_parties(balances)

    def _note_parties(self, parties) -> None:
        for p in parties:
            if p not in self.parties:
                self.parties.append(p)

    def params(self, role: str) -> ChainParams:
        return self.ledgers[role].params

    def register(self, role: str, ch: ChannelState) -> None:
        self.channels.append((role, ch))
        self._note_parties((ch.funder, ch.payee))

    def next_block_tick(self) -> int:
        return min(self._next_block.values())

    def advance(self, ticks: float) -> None:
        target = self.clock + ticks
        while self.next_block_tick() <= target:
            self._mine_next(target)
        self.clock = int(target)
        self.log.tick = self.clock

    def advance_to(self, tick: int) -> None:
        self.advance(max(0, tick - self.clock))

    def advance_to_next_block(self) -> None:
        self.advance_to(self.next_block_tick())

    def quiet(self, role: str) -> bool:
        """Nothing on chain ``role`` can change with further blocks."""
        ledger = self.ledgers[role]
        if ledger.mempool:
            return False
        need = ledger.params.required_confirmations
        for r, ch in self.channels:
            if r != role or ch.phase not in (Phase.FUNDED, Phase.OPEN):
                continue
            if ch.phase is Phase.FUNDED:
                return False
            spender = ledger.spent_by.get(ch.funding_outpoint)
            if spender is not None and ledger.confirmations(spender) < need:
                return False
        return True

    def _mine_next(self, target: float) -> None:
        role = min(self._next_block, key=lambda r: (self._next_block[r], r))
        ledger = self.ledgers[role]
        interval = ledger.params.block_interval_ticks
        if self.quiet(role):
            count = int(target - self._next_block[role]) // interval + 1
            ledger.skip_empty_blocks(count)
            self._next_block[role] += count * interval
            self.clock = self._next_block[role] - interval
            return
        self.clock = self._next_block[role]
        self.log.tick = self.clock
        ledger.advance_block()
        self._next_block[role] += interval
        for r, ch in self.channels:
            if r == role:
                sync_channel(ledger, ch)

    def tick_at_height(self, role: str, height: int) -> int:
        """Tick at which chain ``role`` mines block ``height`` (now if already mined)."""
        ledger = self.ledgers[role]
        ahead = height - ledger.height - 1
        if ahead < 0:
            return self.clock
        return self._next_block[role] + ahead * ledger.params.block_interval_ticks

    def open_channel(self, role: str, params: ChannelParams) -> ChannelState:
        """Open a channel outside any session, advancing the clock until it is usable."""
        ledger = self.ledgers[role]
        ch = prepare_channel(ledger, params)
        broadcast_funding(ledger, ch)
        self.register(role, ch)
        while ch.phase is not Phase.OPEN:
            self.advance_to_next_block()
        return ch

    def transfer(self, role: str, payer: PartyId, payee: PartyId, amount: int) -> Transaction:
        """Plain on-chain payment; returns once it has the required confirmations."""
        ledger = self.ledgers[role]
        tx = pay_to(ledger, payer, payee, amount)
        if tx is None or not ledger.submit_tx(tx):
            raise SwapError("insufficient_funds", f"{payer} cannot pay {amount} on chain {role}")
        self._note_parties((payer, payee))
        while ledger.confirmations(tx.tx_id) < ledger.params.required_confirmations:
            self.advance_to_next_block()
        return tx

    def holdings(self, party: PartyId, role: str) -> int:
        """Confirmed coins plus the party's share of live, confirmed channels."""
        ledger = self.ledgers[role]
        total = ledger.balance(party)
        for r, ch in self.channels:
            if (r == role and ch.funding_tx is not None
                    and ledger.confirmations(ch.funding_tx.tx_id) > 0
                    and ch.funding_outpoint not in ledger.spent_by):
                total += ch.share(party)
        return total


def default_locktime(ledger: Ledger, session_ticks: int = 0) -> int:
    """Refund height: an hour of blocks, stretched if the session itself runs longer.

    ``session_ticks`` is the expected opening plus ping-pong time; the close
    margin is kept clear on top of it.
    """
    interval = ledger.params.block_interval_ticks
    hour = math.ceil(DEFAULT_TIMELOCK_TICKS / interval)
    needed = math.ceil(session_ticks / interval) + CLOSE_MARGIN_BLOCKS
    return ledger.height + max(MIN_TIMELOCK_BLOCKS, hour, needed)


# -- sessions ------------------------------------------------------------------------------


class SessionPhase(str, Enum):
    SETUP = "setup"
    OPENING = "opening"
    PINGPONG = "pingpong"
    SETTLING = "settling"
    COMPLETED = "completed"
    ABORTED = "aborted"


@dataclass
class Leg:
    name: str
    role: str
    funder: PartyId
    payee: PartyId
    capacity: int
    locktime: int | None = None
    channel: ChannelState | None = None
    keep_open: bool = False


@dataclass(frozen=True)
class Hop:
    leg: Leg
    amount: int


@dataclass
class Abort:
    step: int
    reason: str
    culprit: PartyId | None = None


@dataclass
class _Baseline:
    parties: list[PartyId]
    holdings: dict[PartyId, dict[str, int]]
    txs: dict[str, int]
    fees: dict[str, int]
    signatures: dict[str, dict[PartyId, int]]
    clock: int


@dataclass
class PingPongSession:
    """Drives one swap through opening, ping-pong and settlement.

    Subclasses lay out the channels (``legs``) and expand each schedule step
    into one or more channel payments (``hops``).
    """

    world: World
    terms: SwapTerms
    stall_timeout_ticks: int | None = None
    settle: bool = True
    max_ticks: int = 10_000_000
    schedule: Schedule = field(init=False)
    legs: list[Leg] = field(init=False)
    cursor: int = field(init=False, default=0)
    phase: SessionPhase = field(init=False, default=SessionPhase.SETUP)
    abort: Abort | None = field(init=False, default=None)
    strategies: dict[PartyId, Strategy] = field(init=False, default_factory=dict)

    module = "swap"

    def __post_init__(self) -> None:
        self.schedule = build_schedule(self.terms.n)
        self.legs = self.plan()
        if self.stall_timeout_ticks is None:
            self.stall_timeout_ticks = min(l.params.block_interval_ticks
                                           for l in self.world.ledgers.values())

    def plan(self) -> list[Leg]:
        raise NotImplementedError

    def hops(self, step: Step) -> list[Hop]:
        raise NotImplementedError

    def leg(self, name: str) -> Leg:
        return next(l for l in self.legs if l.name == name)

    @property
    def clock(self) -> int:
        return self.world.clock

    def use_channel(self, name: str, ch: ChannelState, *, keep_open: bool = False) -> None:
        """Run over an already open channel instead of opening a new one."""
        leg = self.leg(name)
        if ch.phase is not Phase.OPEN or (ch.funder, ch.payee) != (leg.funder, leg.payee):
            raise ValueError(f"channel does not fit leg {name}")
        if ch.capacity - ch.cumulative_paid < leg.capacity:
            raise ValueError(f"channel for leg {name} lacks room for {leg.capacity}")
        leg.channel = ch
        leg.keep_open = keep_open
        if all(c is not ch for _, c in self.world.channels):
            self.world.register(leg.role, ch)

    def _emit(self, kind: str, **payload) -> None:
        self.world.log.emit(self.module, kind, **payload)

    def _abort(self, step: int, reason: str, culprit: PartyId | None = None) -> None:
        self.abort = Abort(step, reason, culprit)
        self._emit("aborted", step=step, reason=reason, culprit=culprit)

    # -- driver --

    def run(self, strategies: Mapping[PartyId, Strategy]) -> SwapOutcome:
        self.begin(strategies)
        if self.open():
            self.play()
        return self.finish()

    def strat(self, party: PartyId) -> Strategy:
        return self.strategies.get(party, HONEST)

    def begin(self, strategies: Mapping[PartyId, Strategy]) -> None:
        """Record the starting balances that the outcome is measured against."""
        for s in strategies.values():
            s.validate(len(self.schedule))
        self.strategies = dict(strategies)
        world = self.world
        parties = list(dict.fromkeys([*world.parties, *(p for l in self.legs
                                                        for p in (l.funder, l.payee))]))
        self._base = _Baseline(
            parties=parties,
            holdings={p: {r: world.holdings(p, r) for r in world.ledgers} for p in parties},
            txs={r: len(l.history) for r, l in world.ledgers.items()},
            fees={r: l.fees_collected for r, l in world.ledgers.items()},
            signatures={l.name: dict(l.channel.signatures) for l in self.legs if l.channel},
            clock=world.clock,
        )
        self._waited = {r: 0 for r in world.ledgers}
        self._max_exposure = 0
        self._accepted = {l.name: 0 for l in self.legs}
        self._stalled_since = 0
        self._emit("session_start", topology=self.module, n=self.terms.n,
                   steps=len(self.schedule))

    def fork(self, strategies: Mapping[PartyId, Strategy]) -> PingPongSession:
        """Independent copy of this session that continues under other strategies.

        Only sound between steps, and only if the new strategies would have
        behaved identically up to here.
        """
        for s in strategies.values():
            s.validate(len(self.schedule))
        clone = copy.deepcopy(self)
        clone.strategies = dict(strategies)
        return clone

    def open(self) -> bool:
        self.phase = SessionPhase.OPENING
        fresh = [l for l in self.legs if l.channel is None]
        prepared: list[tuple[Leg, ChannelState]] = []
        # Every refund is signed before any funding is broadcast, so a refusal
        # on either chain leaves both untouched.
        for leg in fresh:
            ledger = self.world.ledgers[leg.role]
            locktime = leg.locktime
            if locktime is None:
                locktime = default_locktime(ledger, self._expected_ticks())
            params = ChannelParams(leg.funder, leg.payee, leg.capacity, locktime,
                                   ledger.chain_id)
            try:
                ch = prepare_channel(ledger, params,
                                     payee_signs_refund=self.strat(leg.payee).signs_refund)
            except ChannelError as exc:
                culprit = leg.payee if exc.reason == "payee_refused_refund_signature" else leg.funder
                self._abort(0, exc.reason, culprit)
                return False
            prepared.append((leg, ch))
        for leg, ch in prepared:
            broadcast_funding(self.world.ledgers[leg.role], ch)
            leg.channel = ch
            self.world.register(leg.role, ch)
        for role in {leg.role for leg in fresh}:
            self._waited[role] += self.world.params(role).required_confirmations
        while not all(l.channel.phase is Phase.OPEN for l in self.legs):
            if self.world.clock > self.max_ticks:
                self._abort(0, "max_ticks")
                return False
            self.world.advance_to_next_block()
        self._emit("channels_open", height_a=self.world.ledgers["a"].height,
                   height_b=self.world.ledgers["b"].height)
        self.phase = SessionPhase.PINGPONG
        return True

    def _expected_ticks(self) -> int:
        opening = max(l.params.required_confirmations * l.params.block_interval_ticks
                      for l in self.world.ledgers.values())
        messages = sum(len(self.hops(step)) for step in self.schedule.steps)
        return opening + messages * MESSAGE_TICKS

    def _near_expiry(self) -> Leg | None:
        for leg in self.legs:
            if leg.keep_open:
                continue
            ledger = self.world.ledgers[leg.role]
            if ledger.height >= leg.channel.params.refund_locktime - CLOSE_MARGIN_BLOCKS:
                return leg
        return None

    def play(self, until: int | None = None) -> bool:
        """Run schedule steps after ``cursor`` up to ``until``; False once aborted."""
        if self.abort is not None:
            return False
        world = self.world
        steps = self.schedule.steps
        last = len(steps) if until is None else min(until, len(steps))
        for i in range(self.cursor + 1, last + 1):
            step = steps[i - 1]
            if self._near_expiry() is not None:
                self._abort(i, "timelock_margin")
                return False
            for hop in self.hops(step):
                leg, payer = hop.leg, hop.leg.funder
                s = self.strat(payer)
                if s.refuses(i):
                    self._abort(i, "counterparty_stopped", payer)
                    return False
                stall = s.stall_ticks(i)
                if stall:
                    if stall > self.stall_timeout_ticks:
                        world.advance(self.stall_timeout_ticks)
                        self._stalled_since = world.clock - self.stall_timeout_ticks
                        self._abort(i, "counterparty_stalled", payer)
                        return False
                    world.advance(stall)
                ch = leg.channel
                update = pay(ch, hop.amount)
                world.advance(MESSAGE_TICKS)
                error = accept_update(ch, update)
                if error is not None:
                    self._abort(i, f"invalid_update:{error.value}", payer)
                    return False
                self._accepted[leg.name] += 1
                if world.log.enabled:
                    self._emit("step", step=i, leg=leg.name, payer=payer, units=step.units,
                               amount=hop.amount, cumulative=ch.accepted_paid,
                               amount_display=world.params(leg.role).display(hop.amount))
            self.cursor = i
            self._max_exposure = max(self._max_exposure, abs(self.schedule.exposure(i)))
        return True

    def finish(self) -> SwapOutcome:
        """Settle every channel and report what each party gained or lost."""
        self._settle(self._dark_parties())
        self.phase = SessionPhase.ABORTED if self.abort else SessionPhase.COMPLETED
        self._emit("session_end", phase=self.phase.value, cursor=self.cursor)
        return self._outcome()

    def _dark_parties(self) -> dict[PartyId, float]:
        """Parties that went silent, mapped to the tick they come back."""
        dark: dict[PartyId, float] = {}
        if self.abort and self.abort.reason == "counterparty_stalled":
            s = self.strat(self.abort.culprit)
            assert isinstance(s, Stall)
            dark[self.abort.culprit] = self._stalled_since + s.ticks
        return dark

    def _try_close(self, leg: Leg) -> None:
        ch = leg.channel
        if not ch.closable:
            return
        try:
            submit_close(self.world.ledgers[leg.role], ch)
        except ChannelError as exc:
            self._emit("close_failed", leg=leg.name, reason=exc.reason)

    def _settle(self, dark: dict[PartyId, float]) -> None:
        self.phase = SessionPhase.SETTLING
        world = self.world
        legs = [l for l in self.legs if l.channel is not None and not l.keep_open]
        if not self.settle and self.abort is None:
            return
        pending: list[tuple[float, Leg]] = []
        for leg in legs:
            payee = leg.payee
            if payee in dark:
                if self.strat(payee).closes and math.isfinite(dark[payee]):
                    pending.append((dark[payee], leg))
            elif self.strat(payee).closes:
                self._try_close(leg)
        settle_roles: set[str] = set()
        while True:
            for tick, leg in [p for p in pending if p[0] <= world.clock]:
                pending.remove((tick, leg))
                self._try_close(leg)
            for leg in legs:
                ch = leg.channel
                ledger = world.ledgers[leg.role]
                if ch.close_tx is not None or ch.refund_broadcast is not None:
                    settle_roles.add(leg.role)
                # The funder's wallet broadcasts the refund one block before the
                # locktime whether or not its owner is still responsive.
                if (ch.phase is Phase.OPEN and ch.refund_broadcast is None
                        and ch.funding_outpoint not in ledger.spent_by
                        and ledger.height >= ch.params.refund_locktime - 1):
                    submit_refund(ledger, ch)
            if all(l.channel.settled for l in legs):
                break
            if world.clock > self.max_ticks:
                self._emit("unsettled", legs=[l.name for l in legs if not l.channel.settled])
                break
            targets = [t for t, _ in pending if math.isfinite(t)]
            for leg in legs:
                if leg.channel.settled:
                    continue
                if world.quiet(leg.role):
                    lock = leg.channel.params.refund_locktime
                    targets.append(world.tick_at_height(leg.role, lock - 1))
                else:
                    targets.append(world._next_block[leg.role])
            world.advance_to(int(min(targets)))
        for role in sorted(settle_roles):
            self._waited[role] += world.params(role).required_confirmations

    def _outcome(self) -> SwapOutcome:
        world = self.world
        base = self._base
        parties = base.parties
        roles = list(world.ledgers)
        delta = {p: {r: world.holdings(p, r) - base.holdings[p][r] for r in roles} for p in parties}
        fees = {p: {r: 0 for r in roles} for p in parties}
        signatures = {p: 0 for p in parties}
        updates = {p: 0 for p in parties}
        new_txs = {r: {t.tx_id for t in world.ledgers[r].history[base.txs[r]:]} for r in roles}
        for leg in self.legs:
            ch = leg.channel
            if ch is None:
                continue
            ledger = world.ledgers[leg.role]
            before = base.signatures.get(leg.name, {})
            for p, count in ch.signatures.items():
                signatures[p] += count - before.get(p, 0)
            for tx, payer in ((ch.funding_tx, ch.funder), (ch.close_tx, ch.payee),
                              (ch.refund_broadcast, ch.funder)):
                if tx is not None and tx.tx_id in new_txs[leg.role]:
                    fees[payer][leg.role] += ledger.fees_by_tx[tx.tx_id]
            updates[ch.funder] += self._accepted[leg.name]
        units = {
            p: sum((Fraction(delta[p][r] + fees[p][r], self.terms.unit(r)) for r in roles),
                   Fraction(0))
            for p in parties
        }
        outcome = SwapOutcome(
            phase=("aborted" if self.abort else "completed"),
            aborted_at=self.abort.step if self.abort else None,
            reason=self.abort.reason if self.abort else None,
            culprit=self.abort.culprit if self.abort else None,
            chains={r: world.ledgers[r].chain_id for r in roles},
            balance_delta=delta,
            fees_paid=fees,
            chain_fees={r: world.ledgers[r].fees_collected - base.fees[r] for r in roles},
            signatures=signatures,
            updates=updates,
            onchain_txs={r: len(world.ledgers[r].history) - base.txs[r] for r in roles},
            confirmations_waited=dict(self._waited),
            unit_delta=units,
            max_exposure=self._max_exposure,
            steps_completed=self.cursor,
            ticks_elapsed=world.clock - base.clock,
        )
        outcome.value_delta = net_value(outcome, self.terms)
        return outcome


class SwapSession(PingPongSession):
    """Direct swap: A funds ``channel_a`` to B on chain A, B funds ``channel_b`` to A on chain B."""

    def plan(self) -> list[Leg]:
        t = self.terms
        return [
            Leg("channel_a", "a", t.party_a, t.party_b, t.amount_a, t.refund_locktime_a),
            Leg("channel_b", "b", t.party_b, t.party_a, t.amount_b, t.refund_locktime_b),
        ]

    @property
    def channel_a(self) -> ChannelState | None:
        return self.leg("channel_a").channel

    @property
    def channel_b(self) -> ChannelState | None:
        return self.leg("channel_b").channel

    def hops(self, step: Step) -> list[Hop]:
        if step.payer == "A":
            return [Hop(self.legs[0], step.units * self.terms.unit_a)]
        return [Hop(self.legs[1], step.units * self.terms.unit_b)]


def run_swap(session: SwapSession, strategy_a: Strategy = HONEST,
             strategy_b: Strategy = HONEST) -> SwapOutcome:
    t = session.terms
    return session.run({t.party_a: strategy_a, t.party_b: strategy_b})


def abort_outcomes(make_session: Callable[[], PingPongSession],
                   cheaters: Sequence[PartyId]) -> Iterator[tuple[PartyId, int, SwapOutcome]]:
    """Outcome of ``AbortAt(k)`` for every schedule step ``k`` and every cheater.

    The honest run is walked once and each abort is forked off it at the
    step boundary, so the shared prefix is not replayed for every ``k``.
    """
    base = make_session()
    base.begin({})
    base.open()
    for k in range(1, len(base.schedule) + 1):
        for cheater in cheaters:
            fork = base.fork({cheater: AbortAt(k)})
            fork.play()
            yield cheater, k, fork.finish()
        base.play(k)
