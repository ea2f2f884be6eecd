from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pingpong.simchain import (
    ChainParams,
    Keyring,
    Ledger,
    MultiSig2of2,
    Output,
    Rejection,
    SingleKey,
    Transaction,
    advance_block,
    build_tx,
    confirmations,
    pay_to,
    submit_tx,
)

from .conftest import BTC, make_ledger


def coin(ledger: Ledger, party: str):
    (op, out), = [(op, o) for op, o in ledger.utxo_set.items() if o.lock == SingleKey(party)]
    return op, out


def funding(ledger: Ledger, amount: int = 10**8) -> Transaction:
    op, out = coin(ledger, "alice")
    tx = build_tx([op], [Output(amount, MultiSig2of2("alice", "bob")),
                         Output(out.value - amount - BTC.tx_fee, SingleKey("alice"))])
    return tx.signed_by(ledger.keyring.sign("alice", tx))


def confirmed_funding(ledger: Ledger) -> Transaction:
    tx = funding(ledger)
    assert submit_tx(ledger, tx)
    advance_block(ledger)
    return tx


def spend_multisig(ledger: Ledger, parent: Transaction, value: int, locktime: int = 0,
                   signers=("alice", "bob"), to: str = "bob") -> Transaction:
    tx = build_tx([parent.outpoint(0)], [Output(value, SingleKey(to))], locktime)
    return tx.signed_by(*(ledger.keyring.sign(p, tx) for p in signers))


class TestChainParams:
    @pytest.mark.parametrize("field", ["block_interval_ticks", "required_confirmations",
                                       "base_units_per_coin"])
    def test_rejects_zero(self, field):
        with pytest.raises(ValueError):
            ChainParams("X", **{field: 0})

    def test_rejects_negative_fee(self):
        with pytest.raises(ValueError):
            ChainParams("X", tx_fee=-1)

    def test_display_is_exact(self):
        assert BTC.display(100_000) == "0.00100000 BTC"
        assert BTC.display(1) == "0.00000001 BTC"


class TestLocksAndSignatures:
    def test_multisig_needs_distinct_parties(self):
        with pytest.raises(ValueError):
            MultiSig2of2("alice", "alice")

    def test_signature_binds_body(self):
        keys = Keyring(1)
        tx = build_tx([], [Output(5, SingleKey("bob"))])
        sig = keys.sign("alice", tx)
        assert keys.verify(sig, tx)
        mutated = build_tx([], [Output(6, SingleKey("bob"))])
        assert not keys.verify(sig, mutated)

    def test_signature_cannot_be_claimed_by_someone_else(self):
        keys = Keyring(1)
        tx = build_tx([], [Output(5, SingleKey("bob"))])
        sig = keys.sign("alice", tx)
        forged = type(sig)("bob", sig.commitment)
        assert not keys.verify(forged, tx)

    def test_tx_id_ignores_signatures(self, ledger):
        tx = funding(ledger)
        assert tx.tx_id == build_tx([i.outpoint for i in tx.inputs], tx.outputs).tx_id

    def test_tx_id_depends_on_locktime(self):
        a = build_tx([], [Output(1, SingleKey("x"))], locktime=0)
        b = build_tx([], [Output(1, SingleKey("x"))], locktime=5)
        assert a.tx_id != b.tx_id


class TestSubmit:
    def test_funding_with_owner_signature_accepted(self, ledger):
        assert submit_tx(ledger, funding(ledger)).accepted

    def test_mutated_output_rejected_bad_signature(self, ledger):
        tx = funding(ledger)
        mutated = Transaction(tx.inputs, (Output(tx.outputs[0].value + 1, tx.outputs[0].lock),
                                          tx.outputs[1]))
        assert submit_tx(ledger, mutated).reason is Rejection.BAD_SIGNATURE

    def test_missing_signature_rejected(self, ledger):
        tx = funding(ledger)
        bare = build_tx([i.outpoint for i in tx.inputs], tx.outputs)
        assert submit_tx(ledger, bare).reason is Rejection.BAD_SIGNATURE

    def test_multisig_needs_both(self, ledger):
        parent = confirmed_funding(ledger)
        one = spend_multisig(ledger, parent, 10**8 - 1000, signers=("alice",))
        assert submit_tx(ledger, one).reason is Rejection.BAD_SIGNATURE
        both = spend_multisig(ledger, parent, 10**8 - 1000)
        assert submit_tx(ledger, both)

    def test_missing_input(self, ledger):
        tx = build_tx([type(coin(ledger, "alice")[0])("00" * 32, 0)], [Output(1, SingleKey("a"))])
        assert submit_tx(ledger, tx).reason is Rejection.MISSING_INPUT

    def test_negative_fee(self, ledger):
        op, out = coin(ledger, "alice")
        tx = build_tx([op], [Output(out.value + 1, SingleKey("bob"))])
        tx = tx.signed_by(ledger.keyring.sign("alice", tx))
        assert submit_tx(ledger, tx).reason is Rejection.NEGATIVE_FEE

    def test_second_mempool_spend_rejected(self, ledger):
        first = pay_to(ledger, "alice", "bob", 1000)
        op = first.inputs[0].outpoint
        rival = build_tx([op], [Output(5000, SingleKey("carol"))])
        rival = rival.signed_by(ledger.keyring.sign("alice", rival))
        assert submit_tx(ledger, first)
        assert submit_tx(ledger, rival).reason is Rejection.DOUBLE_SPEND
        # oracle: linear scan of mempool inputs for the colliding outpoint
        holders = [t for t in ledger.mempool if any(i.outpoint == op for i in t.inputs)]
        assert holders == [first]

    def test_spend_of_confirmed_spent_outpoint_rejected(self, ledger):
        tx = pay_to(ledger, "alice", "bob", 1000)
        submit_tx(ledger, tx)
        advance_block(ledger)
        assert submit_tx(ledger, tx).reason is Rejection.DOUBLE_SPEND

    def test_child_of_mempool_parent_accepted_and_confirms_together(self, ledger):
        parent = funding(ledger)
        assert submit_tx(ledger, parent)
        child = spend_multisig(ledger, parent, 10**8 - 1000)
        assert submit_tx(ledger, child)
        assert set(advance_block(ledger)) == {parent.tx_id, child.tx_id}


class TestBlocks:
    def test_empty_block(self, ledger):
        assert advance_block(ledger) == []
        assert ledger.height == 1

    def test_locktime_boundary(self, ledger):
        parent = confirmed_funding(ledger)
        tx = spend_multisig(ledger, parent, 10**8 - 1000, locktime=ledger.height + 1)
        assert submit_tx(ledger, tx)
        assert advance_block(ledger) == [tx.tx_id]

    def test_held_until_locktime(self, ledger):
        parent = confirmed_funding(ledger)
        tx = spend_multisig(ledger, parent, 10**8 - 1000, locktime=ledger.height + 5)
        assert submit_tx(ledger, tx)
        for _ in range(4):
            assert advance_block(ledger) == []
        assert advance_block(ledger) == [tx.tx_id]
        assert ledger.confirmed[tx.tx_id] == tx.locktime

    def test_confirmation_counts(self, ledger):
        tx = pay_to(ledger, "alice", "bob", 1000)
        submit_tx(ledger, tx)
        assert confirmations(ledger, tx.tx_id) == 0
        ledger.height = 4
        advance_block(ledger)
        assert ledger.confirmed[tx.tx_id] == 5
        assert confirmations(ledger, tx.tx_id) == 1
        advance_block(ledger)
        assert confirmations(ledger, tx.tx_id) == 2

    @pytest.mark.parametrize("close_first", [True, False])
    def test_close_and_refund_race(self, close_first):
        # Oracle: replay both submission orders; exactly one spender confirms.
        ledger = make_ledger()
        parent = confirmed_funding(ledger)
        ledger.height = 10
        close = spend_multisig(ledger, parent, 10**8 - 1000, to="bob")
        refund = spend_multisig(ledger, parent, 10**8 - 1000, locktime=60, to="alice")
        if close_first:
            assert submit_tx(ledger, close)
            assert submit_tx(ledger, refund).reason is Rejection.DOUBLE_SPEND
        else:
            assert submit_tx(ledger, refund)
            assert submit_tx(ledger, close)  # final spend displaces the held refund
        while ledger.height < 70:
            advance_block(ledger)
        spenders = [t for t in ledger.history if any(i.outpoint == parent.outpoint(0)
                                                     for i in t.inputs)]
        assert [t.tx_id for t in spenders] == [close.tx_id]
        assert submit_tx(ledger, refund).reason is Rejection.DOUBLE_SPEND

    def test_held_refund_beats_late_close(self):
        ledger = make_ledger()
        parent = confirmed_funding(ledger)
        refund = spend_multisig(ledger, parent, 10**8 - 1000, locktime=ledger.height + 1,
                                to="alice")
        assert submit_tx(ledger, refund)
        close = spend_multisig(ledger, parent, 10**8 - 1000, to="bob")
        assert submit_tx(ledger, close).reason is Rejection.DOUBLE_SPEND

    def test_fifo_order(self, ledger):
        a = pay_to(ledger, "alice", "carol", 10)
        submit_tx(ledger, a)
        b = pay_to(ledger, "bob", "carol", 10)
        submit_tx(ledger, b)
        assert advance_block(ledger) == [a.tx_id, b.tx_id]


# -- properties ------------------------------------------------------------------------

PARTIES = ["alice", "bob", "carol"]
actions = st.lists(
    st.one_of(
        st.tuples(st.just("pay"), st.sampled_from(PARTIES), st.sampled_from(PARTIES),
                  st.integers(1, 3 * 10**8)),
        st.tuples(st.just("fund"), st.integers(10_000, 10**8), st.integers(0, 4)),
        st.tuples(st.just("block")),
    ),
    max_size=30,
)


def drive(ledger: Ledger, script) -> None:
    funded: list[Transaction] = []
    for action in script:
        if action[0] == "pay":
            _, payer, payee, amount = action
            tx = pay_to(ledger, payer, payee, amount)
            if tx is not None:
                submit_tx(ledger, tx)
        elif action[0] == "fund":
            _, amount, lock_ahead = action
            coins = ledger.select_coins("alice", amount + BTC.tx_fee)
            if coins is None:
                continue
            change = sum(o.value for _, o in coins) - amount - BTC.tx_fee
            outs = [Output(amount, MultiSig2of2("alice", "bob"))]
            if change:
                outs.append(Output(change, SingleKey("alice")))
            tx = build_tx([op for op, _ in coins], outs)
            tx = tx.signed_by(*(ledger.keyring.sign("alice", tx) for _ in coins))
            if submit_tx(ledger, tx):
                funded.append(tx)
                # a competing pair of spends: one timelocked, one final
                held = spend_multisig(ledger, tx, amount - BTC.tx_fee, to="alice",
                                      locktime=ledger.height + lock_ahead + 1)
                submit_tx(ledger, held)
        else:
            advance_block(ledger)
    for tx in funded[::2]:
        submit_tx(ledger, spend_multisig(ledger, tx, tx.outputs[0].value - BTC.tx_fee))
    for _ in range(8):
        advance_block(ledger)


def fresh() -> Ledger:
    return make_ledger({"alice": 3 * 10**8, "bob": 2 * 10**8, "carol": 10**8})


@settings(max_examples=60, deadline=None)
@given(actions)
def test_conservation(script):
    ledger = fresh()
    drive(ledger, script)
    assert ledger.total_value() + ledger.fees_collected == ledger.genesis_total
    assert all(fee >= 0 for fee in ledger.fees_by_tx.values())


@settings(max_examples=60, deadline=None)
@given(actions)
def test_no_double_spend_and_locktime_safety(script):
    ledger = fresh()
    drive(ledger, script)
    consumed = [i.outpoint for t in ledger.history for i in t.inputs]
    assert len(consumed) == len(set(consumed))
    for tx in ledger.history:
        assert ledger.confirmed[tx.tx_id] >= tx.locktime


@settings(max_examples=30, deadline=None)
@given(actions)
def test_determinism(script):
    one, two = fresh(), fresh()
    drive(one, script)
    drive(two, script)
    assert one.utxo_set == two.utxo_set
    assert one.height == two.height
    assert [t.tx_id for t in one.history] == [t.tx_id for t in two.history]
