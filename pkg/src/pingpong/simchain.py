"""A deterministic toy UTXO chain.

Enough of Bitcoin to host Spillman channels: single-key and 2-of-2 outputs,
transaction-level locktime, a FIFO mempool, flat fees and confirmation
counting. Signatures are abstract records bound to a transaction body; there
is no script interpreter, proof-of-work or reorg handling.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import NamedTuple, Union

from .events import EventLog, NullLog, display_amount

PartyId = str


@dataclass(frozen=True)
class ChainParams:
    chain_id: str
    block_interval_ticks: int = 600
    required_confirmations: int = 1
    tx_fee: int = 0
    unit_name: str = "satoshi"
    base_units_per_coin: int = 100_000_000

    def __deepcopy__(self, memo):
        return self

    def __post_init__(self) -> None:
        if self.block_interval_ticks < 1:
            raise ValueError("block_interval_ticks must be >= 1")
        if self.required_confirmations < 1:
            raise ValueError("required_confirmations must be >= 1")
        if self.base_units_per_coin < 1:
            raise ValueError("base_units_per_coin must be >= 1")
        if self.tx_fee < 0:
            raise ValueError("tx_fee must be >= 0")

    def display(self, value: int) -> str:
        return display_amount(value, self.base_units_per_coin, self.chain_id)


# -- locks and outputs -------------------------------------------------------


@dataclass(frozen=True)
class SingleKey:
    owner: PartyId

    def __deepcopy__(self, memo):
        return self

    @property
    def signers(self) -> frozenset[PartyId]:
        return frozenset((self.owner,))

    def encode(self) -> str:
        return f"key:{self.owner}"


@dataclass(frozen=True)
class MultiSig2of2:
    left: PartyId
    right: PartyId

    def __deepcopy__(self, memo):
        return self

    def __post_init__(self) -> None:
        if self.left == self.right:
            raise ValueError("2-of-2 multisig needs two distinct parties")

    @property
    def signers(self) -> frozenset[PartyId]:
        return frozenset((self.left, self.right))

    def encode(self) -> str:
        return f"2of2:{self.left}:{self.right}"


Lock = Union[SingleKey, MultiSig2of2]


@dataclass(frozen=True)
class Output:
    value: int
    lock: Lock

    def __deepcopy__(self, memo):
        return self

    def __post_init__(self) -> None:
        if self.value < 0:
            raise ValueError("output value must be non-negative")


class OutPoint(NamedTuple):
    tx_id: str
    index: int


# -- signatures ----------------------------------------------------------------


@dataclass(frozen=True)
class Signature:
    signer: PartyId
    commitment: str

    def __deepcopy__(self, memo):
        return self


class Keyring:
    """Per-party secret material derived from a seed.

    Stands in for key pairs: a signature is a digest of the signer's secret
    and the transaction body, so it cannot be produced for another party or
    moved to a different body.
    """

    def __deepcopy__(self, memo):
        return self

    def __init__(self, seed: int = 0) -> None:
        self.seed = seed
        self._keys: dict[PartyId, bytes] = {}

    def _key(self, party: PartyId) -> bytes:
        key = self._keys.get(party)
        if key is None:
            key = hashlib.sha256(f"pingpong-key:{self.seed}:{party}".encode()).digest()
            self._keys[party] = key
        return key

    def sign(self, party: PartyId, tx: Transaction) -> Signature:
        digest = hashlib.sha256(self._key(party) + tx.sighash).hexdigest()
        return Signature(party, digest)

    def verify(self, sig: Signature, tx: Transaction) -> bool:
        return self.sign(sig.signer, tx).commitment == sig.commitment


# -- transactions ----------------------------------------------------------------


@dataclass(frozen=True)
class TxInput:
    outpoint: OutPoint
    signatures: tuple[Signature, ...] = ()

    def __deepcopy__(self, memo):
        return self


@dataclass(frozen=True)
class Transaction:
    inputs: tuple[TxInput, ...]
    outputs: tuple[Output, ...]
    locktime: int = 0

    def __deepcopy__(self, memo):
        return self

    @cached_property
    def sighash(self) -> bytes:
        # Signatures are excluded so that dependent transactions can be signed
        # before their parents are broadcast.
        body = "|".join((
            ",".join(f"{i.outpoint.tx_id}:{i.outpoint.index}" for i in self.inputs),
            ",".join(f"{o.value}@{o.lock.encode()}" for o in self.outputs),
            str(self.locktime),
        ))
        return hashlib.sha256(body.encode()).digest()

    @property
    def tx_id(self) -> str:
        return self.sighash.hex()

    @property
    def output_total(self) -> int:
        return sum(o.value for o in self.outputs)

    def outpoint(self, index: int) -> OutPoint:
        return OutPoint(self.tx_id, index)

    def signed_by(self, *sigs: Signature) -> Transaction:
        """Copy with ``sigs`` attached to every input."""
        inputs = tuple(TxInput(i.outpoint, i.signatures + sigs) for i in self.inputs)
        signed = Transaction(inputs, self.outputs, self.locktime)
        signed.__dict__["sighash"] = self.sighash  # same body
        return signed

    def signers(self, input_index: int = 0) -> set[PartyId]:
        return {s.signer for s in self.inputs[input_index].signatures}


def build_tx(
    spends: list[OutPoint] | tuple[OutPoint, ...],
    outputs: list[Output] | tuple[Output, ...],
    locktime: int = 0,
) -> Transaction:
    return Transaction(tuple(TxInput(op) for op in spends), tuple(outputs), locktime)


# -- ledger ----------------------------------------------------------------------


class Rejection(str, Enum):
    MISSING_INPUT = "missing_input"
    BAD_SIGNATURE = "bad_signature"
    DOUBLE_SPEND = "double_spend"
    NEGATIVE_FEE = "negative_fee"


class SubmitResult(NamedTuple):
    accepted: bool
    reason: Rejection | None = None

    def __bool__(self) -> bool:
        return self.accepted


ACCEPTED = SubmitResult(True)


@dataclass
class Ledger:
    """One chain: UTXO set, mempool and confirmed history."""

    params: ChainParams
    keyring: Keyring = field(default_factory=Keyring)
    log: EventLog = field(default_factory=NullLog)
    height: int = 0
    utxo_set: dict[OutPoint, Output] = field(default_factory=dict)
    mempool: list[Transaction] = field(default_factory=list)
    confirmed: dict[str, int] = field(default_factory=dict)
    history: list[Transaction] = field(default_factory=list)
    spent_by: dict[OutPoint, str] = field(default_factory=dict)
    fees_collected: int = 0
    fees_by_tx: dict[str, int] = field(default_factory=dict)
    genesis_total: int = 0

    @property
    def chain_id(self) -> str:
        return self.params.chain_id

    def genesis(self, balances: dict[PartyId, int]) -> Transaction:
        """Seed one single-key output per party; confirmed at the current height."""
        outputs = tuple(Output(v, SingleKey(p)) for p, v in balances.items() if v > 0)
        tx = Transaction((), outputs, locktime=self.height)
        for i, out in enumerate(outputs):
            self.utxo_set[tx.outpoint(i)] = out
        self.confirmed[tx.tx_id] = self.height
        self.history.append(tx)
        self.genesis_total += tx.output_total
        self.log.emit("simchain", "genesis", chain=self.chain_id, tx_id=tx.tx_id[:16],
                      total=tx.output_total)
        return tx

    # -- queries --

    def confirmations(self, tx_id: str) -> int:
        at = self.confirmed.get(tx_id)
        return 0 if at is None else self.height - at + 1

    def in_mempool(self, tx_id: str) -> bool:
        return any(t.tx_id == tx_id for t in self.mempool)

    def balance(self, party: PartyId) -> int:
        """Confirmed value spendable by ``party`` alone."""
        return sum(o.value for o in self.utxo_set.values()
                   if isinstance(o.lock, SingleKey) and o.lock.owner == party)

    def spendable(self, party: PartyId) -> list[tuple[OutPoint, Output]]:
        """Confirmed single-key coins of ``party`` not already spent in the mempool."""
        reserved = {i.outpoint for t in self.mempool for i in t.inputs}
        coins = [(op, o) for op, o in self.utxo_set.items()
                 if isinstance(o.lock, SingleKey) and o.lock.owner == party
                 and op not in reserved]
        return sorted(coins, key=lambda c: (c[1].value, c[0]))

    def select_coins(self, party: PartyId, amount: int) -> list[tuple[OutPoint, Output]] | None:
        """Smallest single coin covering ``amount``, else largest-first accumulation."""
        coins = self.spendable(party)
        for coin in coins:
            if coin[1].value >= amount:
                return [coin]
        picked, total = [], 0
        for coin in reversed(coins):
            picked.append(coin)
            total += coin[1].value
            if total >= amount:
                return picked
        return None

    def lookup(self, outpoint: OutPoint) -> Output | None:
        out = self.utxo_set.get(outpoint)
        if out is not None:
            return out
        for t in self.mempool:
            if t.tx_id == outpoint.tx_id and outpoint.index < len(t.outputs):
                return t.outputs[outpoint.index]
        return None

    def total_value(self) -> int:
        return sum(o.value for o in self.utxo_set.values())

    # -- mutation --

    def submit_tx(self, tx: Transaction) -> SubmitResult:
        result = self._check(tx)
        if result:
            self.mempool.append(tx)
            self.log.emit("simchain", "tx_submitted", chain=self.chain_id,
                          tx_id=tx.tx_id[:16], locktime=tx.locktime)
        else:
            self.log.emit("simchain", "tx_rejected", chain=self.chain_id,
                          tx_id=tx.tx_id[:16], reason=result.reason.value)
        return result

    def _check(self, tx: Transaction) -> SubmitResult:
        seen: set[OutPoint] = set()
        inputs_value = 0
        for txin in tx.inputs:
            op = txin.outpoint
            if op in seen or op in self.spent_by:
                return SubmitResult(False, Rejection.DOUBLE_SPEND)
            seen.add(op)
            out = self.lookup(op)
            if out is None:
                return SubmitResult(False, Rejection.MISSING_INPUT)
            valid = {s.signer for s in txin.signatures if self.keyring.verify(s, tx)}
            if not out.lock.signers <= valid:
                return SubmitResult(False, Rejection.BAD_SIGNATURE)
            inputs_value += out.value
        if inputs_value < tx.output_total:
            return SubmitResult(False, Rejection.NEGATIVE_FEE)

        conflicts = [t for t in self.mempool
                     if any(i.outpoint in seen for i in t.inputs)]
        if conflicts:
            # A transaction that is not yet final cannot be in a real mempool,
            # so a final spend may displace it; otherwise first-seen wins.
            if tx.locktime > self.height + 1 or any(
                    t.locktime <= self.height + 1 for t in conflicts):
                return SubmitResult(False, Rejection.DOUBLE_SPEND)
            for t in conflicts:
                self._evict(t)
        return ACCEPTED

    def _evict(self, tx: Transaction) -> None:
        self.mempool.remove(tx)
        self.log.emit("simchain", "tx_evicted", chain=self.chain_id, tx_id=tx.tx_id[:16])
        children = [t for t in self.mempool
                    if any(i.outpoint.tx_id == tx.tx_id for i in t.inputs)]
        for child in children:
            self._evict(child)

    def advance_block(self) -> list[str]:
        """Mine one block: confirm every final, spendable mempool tx in FIFO order."""
        self.height += 1
        included: list[str] = []
        waiting: list[Transaction] = []
        for tx in self.mempool:
            if tx.locktime > self.height:
                waiting.append(tx)
                continue
            if any(i.outpoint in self.spent_by for i in tx.inputs):
                self.log.emit("simchain", "tx_dropped", chain=self.chain_id,
                              tx_id=tx.tx_id[:16], reason=Rejection.DOUBLE_SPEND.value)
                continue
            if not all(i.outpoint in self.utxo_set for i in tx.inputs):
                waiting.append(tx)  # parent still pending
                continue
            self._apply(tx)
            included.append(tx.tx_id)
        self.mempool = waiting
        if included:
            self.log.emit("simchain", "block", chain=self.chain_id, height=self.height,
                          confirmed=len(included))
        return included

    def skip_empty_blocks(self, count: int) -> None:
        """Mine ``count`` blocks at once; only valid while the mempool is empty."""
        if self.mempool:
            raise RuntimeError("cannot skip blocks with a non-empty mempool")
        self.height += count

    def _apply(self, tx: Transaction) -> None:
        tx_id = tx.tx_id
        fee = -tx.output_total
        for txin in tx.inputs:
            fee += self.utxo_set.pop(txin.outpoint).value
            self.spent_by[txin.outpoint] = tx_id
        for i, out in enumerate(tx.outputs):
            self.utxo_set[OutPoint(tx_id, i)] = out
        self.confirmed[tx_id] = self.height
        self.history.append(tx)
        self.fees_collected += fee
        self.fees_by_tx[tx_id] = fee
        self.log.emit("simchain", "tx_confirmed", chain=self.chain_id, tx_id=tx_id[:16],
                      height=self.height, fee=fee, fee_display=self.params.display(fee))


def submit_tx(ledger: Ledger, tx: Transaction) -> SubmitResult:
    return ledger.submit_tx(tx)


def advance_block(ledger: Ledger) -> list[str]:
    return ledger.advance_block()


def confirmations(ledger: Ledger, tx_id: str) -> int:
    return ledger.confirmations(tx_id)


def pay_to(ledger: Ledger, payer: PartyId, payee: PartyId, amount: int) -> Transaction | None:
    """Build and sign a plain transfer from ``payer``'s wallet, change back to payer."""
    fee = ledger.params.tx_fee
    coins = ledger.select_coins(payer, amount + fee)
    if coins is None:
        return None
    change = sum(o.value for _, o in coins) - amount - fee
    outputs = [Output(amount, SingleKey(payee))]
    if change:
        outputs.append(Output(change, SingleKey(payer)))
    tx = build_tx([op for op, _ in coins], outputs)
    return tx.signed_by(ledger.keyring.sign(payer, tx))
