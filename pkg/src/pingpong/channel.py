"""Spillman unidirectional payment channels on a :class:`~pingpong.simchain.Ledger`.

The funder locks ``capacity`` in a 2-of-2 output after the payee has signed a
timelocked refund. Every payment is a new funder-signed split of the funding
output with a strictly larger claim for the payee. Only the payee can close
early (by countersigning the best split it holds); only the funder can
refund, and only once the locktime is reached.

Fees: off-chain updates carry none. The close fee comes out of the payee's
output, the refund fee out of the funder's.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum

from .events import EventLog, NullLog
from .simchain import (
    Keyring,
    Ledger,
    MultiSig2of2,
    OutPoint,
    Output,
    PartyId,
    SingleKey,
    Transaction,
    build_tx,
)

# Signatures of a settled channel beyond its per-update ones: the payee's on
# the refund, the funder's on the (single-input) funding spend, and the
# settling one (payee's close countersignature or funder's refund signature).
SIGNATURE_OVERHEAD = 3


class Phase(str, Enum):
    INIT = "init"
    REFUND_SIGNED = "refund_signed"
    FUNDED = "funded"
    OPEN = "open"
    CLOSED = "closed"
    REFUNDED = "refunded"


class UpdateError(str, Enum):
    NON_MONOTONE = "non_monotone"
    BAD_SIGNATURE = "bad_signature"
    WRONG_VALUE_SPLIT = "wrong_value_split"


class ChannelError(Exception):
    def __init__(self, reason: str, detail: str = "") -> None:
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason


@dataclass(frozen=True)
class ChannelParams:
    funder: PartyId
    payee: PartyId
    capacity: int
    refund_locktime: int
    chain_id: str

    def __deepcopy__(self, memo):
        return self

    def __post_init__(self) -> None:
        if self.capacity <= 0:
            raise ValueError("capacity must be positive")
        if self.funder == self.payee:
            raise ValueError("funder and payee must differ")


@dataclass
class ChannelState:
    params: ChannelParams
    keyring: Keyring
    fee: int
    log: EventLog = field(default_factory=NullLog, repr=False)
    phase: Phase = Phase.INIT
    funding_tx: Transaction | None = None
    refund_tx: Transaction | None = None
    # funder's side
    cumulative_paid: int = 0
    update_seq: int = 0
    latest_update: Transaction | None = None
    # payee's side: the best split it has validated
    accepted_paid: int = 0
    accepted_update: Transaction | None = None
    accepted_seq: int = 0
    close_tx: Transaction | None = None
    refund_broadcast: Transaction | None = None
    signatures: Counter = field(default_factory=Counter)

    @property
    def funder(self) -> PartyId:
        return self.params.funder

    @property
    def payee(self) -> PartyId:
        return self.params.payee

    @property
    def capacity(self) -> int:
        return self.params.capacity

    @property
    def funding_outpoint(self) -> OutPoint:
        assert self.funding_tx is not None
        return self.funding_tx.outpoint(0)

    @property
    def settled(self) -> bool:
        return self.phase in (Phase.CLOSED, Phase.REFUNDED)

    @property
    def closable(self) -> bool:
        """Whether the payee gains anything by closing now."""
        return (self.phase is Phase.OPEN and self.close_tx is None
                and self.accepted_paid > self.fee)

    def share(self, party: PartyId) -> int:
        """Value ``party`` holds in the channel per the payee's best split (pre-fee)."""
        if party == self.payee:
            return self.accepted_paid
        if party == self.funder:
            return self.capacity - self.accepted_paid
        return 0

    def _sign(self, party: PartyId, tx: Transaction):
        self.signatures[party] += 1
        return self.keyring.sign(party, tx)

    def _emit(self, kind: str, **payload) -> None:
        if self.log.enabled:
            self.log.emit("channel", kind, chain=self.params.chain_id,
                          funder=self.funder, payee=self.payee, **payload)


# -- opening ----------------------------------------------------------------------


def prepare_channel(ledger: Ledger, params: ChannelParams, *,
                    payee_signs_refund: bool = True) -> ChannelState:
    """Build funding and refund; collect the payee's refund signature.

    Nothing touches the chain here, so any failure leaves no footprint.
    """
    if params.chain_id != ledger.chain_id:
        raise ValueError(f"channel for {params.chain_id} on ledger {ledger.chain_id}")
    if params.refund_locktime <= ledger.height:
        raise ValueError("refund_locktime must be in the future")
    fee = ledger.params.tx_fee
    ch = ChannelState(params, ledger.keyring, fee, ledger.log)

    coins = ledger.select_coins(params.funder, params.capacity + fee)
    if coins is None:
        raise ChannelError("insufficient_funds",
                           f"{params.funder} cannot fund {params.capacity} + fee {fee}")
    change = sum(o.value for _, o in coins) - params.capacity - fee
    outputs = [Output(params.capacity, MultiSig2of2(params.funder, params.payee))]
    if change:
        outputs.append(Output(change, SingleKey(params.funder)))
    ch.funding_tx = build_tx([op for op, _ in coins], outputs)

    refund = build_tx([ch.funding_outpoint],
                      [Output(params.capacity - fee, SingleKey(params.funder))],
                      locktime=params.refund_locktime)
    if not payee_signs_refund:
        ch._emit("refund_refused")
        raise ChannelError("payee_refused_refund_signature")
    ch.refund_tx = refund.signed_by(ch._sign(params.payee, refund))
    ch.phase = Phase.REFUND_SIGNED
    ch._emit("refund_signed", locktime=params.refund_locktime)
    return ch


def broadcast_funding(ledger: Ledger, ch: ChannelState) -> None:
    if ch.phase is not Phase.REFUND_SIGNED or ch.refund_tx is None:
        raise ChannelError("refund_not_signed")
    assert ch.funding_tx is not None
    sigs = [ch._sign(ch.funder, ch.funding_tx) for _ in ch.funding_tx.inputs]
    ch.funding_tx = ch.funding_tx.signed_by(*sigs)
    result = ledger.submit_tx(ch.funding_tx)
    if not result:
        raise ChannelError(result.reason.value, "funding rejected")
    ch.phase = Phase.FUNDED
    ch._emit("funding_broadcast", capacity=ch.capacity,
             capacity_display=ledger.params.display(ch.capacity))


def sync_channel(ledger: Ledger, ch: ChannelState) -> Phase:
    """Advance the phase from what the ledger shows."""
    need = ledger.params.required_confirmations
    if ch.phase is Phase.FUNDED:
        if ledger.confirmations(ch.funding_tx.tx_id) >= need:
            ch.phase = Phase.OPEN
            ch._emit("opened", height=ledger.height)
    if ch.phase is Phase.OPEN:
        spender = ledger.spent_by.get(ch.funding_outpoint)
        if spender is not None and ledger.confirmations(spender) >= need:
            if ch.close_tx is not None and spender == ch.close_tx.tx_id:
                ch.phase = Phase.CLOSED
                ch._emit("closed", paid=ch.accepted_paid, height=ledger.height)
            else:
                ch.phase = Phase.REFUNDED
                ch._emit("refunded", height=ledger.height)
    return ch.phase


def _mine_until(ledger: Ledger, ch: ChannelState, phases: tuple[Phase, ...],
                limit: int = 10_000) -> None:
    for _ in range(limit):
        if sync_channel(ledger, ch) in phases:
            return
        ledger.advance_block()
    raise ChannelError("timeout", f"channel never reached {phases}")


def open_channel(ledger: Ledger, params: ChannelParams, *,
                 payee_signs_refund: bool = True, wait: bool = True) -> ChannelState:
    """Refund signature first, then funding; mines blocks until open if ``wait``."""
    ch = prepare_channel(ledger, params, payee_signs_refund=payee_signs_refund)
    broadcast_funding(ledger, ch)
    if wait:
        _mine_until(ledger, ch, (Phase.OPEN,))
    return ch


# -- off-chain updates ------------------------------------------------------------------


def update_outputs(params: ChannelParams, claim: int, fee: int) -> tuple[Output, ...]:
    """Canonical split of the funding output giving the payee ``claim`` (pre-fee)."""
    outs = []
    if claim > fee:
        outs.append(Output(claim - fee, SingleKey(params.payee)))
    if params.capacity > claim:
        outs.append(Output(params.capacity - claim, SingleKey(params.funder)))
    return tuple(outs)


def claim_of(ch: ChannelState, update: Transaction) -> int:
    back = sum(o.value for o in update.outputs if o.lock == SingleKey(ch.funder))
    return ch.capacity - back


def build_update(ch: ChannelState, claim: int,
                 outputs: tuple[Output, ...] | None = None) -> Transaction:
    """Funder-signed split for ``claim``; ``outputs`` overrides the canonical split."""
    if outputs is None:
        outputs = update_outputs(ch.params, claim, ch.fee)
    tx = build_tx([ch.funding_outpoint], outputs)
    return tx.signed_by(ch._sign(ch.funder, tx))


def pay(ch: ChannelState, delta: int) -> Transaction:
    if ch.phase is not Phase.OPEN or ch.close_tx is not None:
        raise ChannelError("channel_not_open", ch.phase.value)
    if delta <= 0:
        raise ValueError("payment must be positive")
    if ch.cumulative_paid + delta > ch.capacity:
        raise ChannelError("over_capacity",
                           f"{ch.cumulative_paid} + {delta} > {ch.capacity}")
    update = build_update(ch, ch.cumulative_paid + delta)
    ch.cumulative_paid += delta
    ch.update_seq += 1
    ch.latest_update = update
    return update


def validate_update(ch: ChannelState, update: Transaction) -> UpdateError | None:
    """Payee-side check of an incoming split; ``None`` means acceptable."""
    if (len(update.inputs) != 1 or update.inputs[0].outpoint != ch.funding_outpoint
            or update.locktime != 0):
        return UpdateError.BAD_SIGNATURE
    if not any(s.signer == ch.funder and ch.keyring.verify(s, update)
               for s in update.inputs[0].signatures):
        return UpdateError.BAD_SIGNATURE
    claim = claim_of(ch, update)
    if not 0 <= claim <= ch.capacity or update.outputs != update_outputs(ch.params, claim, ch.fee):
        return UpdateError.WRONG_VALUE_SPLIT
    if claim <= ch.accepted_paid:
        return UpdateError.NON_MONOTONE
    return None


def accept_update(ch: ChannelState, update: Transaction) -> UpdateError | None:
    error = validate_update(ch, update)
    if error is None:
        ch.accepted_paid = claim_of(ch, update)
        ch.accepted_update = update
        ch.accepted_seq += 1
        ch._emit("update_accepted", seq=ch.accepted_seq, paid=ch.accepted_paid)
    return error


# -- settlement ---------------------------------------------------------------------


def submit_close(ledger: Ledger, ch: ChannelState) -> Transaction:
    """Payee countersigns its best split and broadcasts it."""
    if ch.phase is Phase.REFUNDED:
        raise ChannelError("double_spend", "funding output already refunded")
    if ch.phase is not Phase.OPEN:
        raise ChannelError("channel_not_open", ch.phase.value)
    if ch.accepted_update is None:
        raise ChannelError("nothing_to_close")
    if ch.accepted_paid <= ch.fee:
        raise ChannelError("uneconomic_close", f"claim {ch.accepted_paid} <= fee {ch.fee}")
    tx = ch.accepted_update.signed_by(ch._sign(ch.payee, ch.accepted_update))
    result = ledger.submit_tx(tx)
    if not result:
        raise ChannelError(result.reason.value, "close rejected")
    ch.close_tx = tx
    ch._emit("close_broadcast", paid=ch.accepted_paid)
    return tx


def close_channel(ledger: Ledger, ch: ChannelState, *, wait: bool = True) -> Phase:
    submit_close(ledger, ch)
    if wait:
        _mine_until(ledger, ch, (Phase.CLOSED, Phase.REFUNDED))
    return ch.phase


def submit_refund(ledger: Ledger, ch: ChannelState) -> bool:
    """Funder completes and broadcasts the refund; it waits in the mempool for the locktime."""
    if ch.refund_broadcast is not None:
        return True
    if ch.phase is not Phase.OPEN or ch.refund_tx is None:
        raise ChannelError("channel_not_open", ch.phase.value)
    tx = ch.refund_tx.signed_by(ch._sign(ch.funder, ch.refund_tx))
    if not ledger.submit_tx(tx):
        ch.signatures[ch.funder] -= 1  # signature never left the wallet
        return False
    ch.refund_broadcast = tx
    ch._emit("refund_broadcast", locktime=tx.locktime)
    return True


def refund_channel(ledger: Ledger, ch: ChannelState, *, wait: bool = True) -> Phase:
    submit_refund(ledger, ch)
    if wait:
        _mine_until(ledger, ch, (Phase.CLOSED, Phase.REFUNDED))
    return ch.phase
