from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pingpong.channel import Phase
from pingpong.strategy import HONEST, AbortAt, NeverClose, NeverSignRefund, Stall
from pingpong.swap import (
    MESSAGE_TICKS,
    SwapError,
    SwapSession,
    SwapTerms,
    abort_outcomes,
    build_schedule,
    default_locktime,
    exposure,
    quantize_amounts,
    run_swap,
)

from . import oracles
from .conftest import BTC, LTC, make_session, make_terms, make_world

UNIT_A, UNIT_B = 100_000, 28_400_000
even_n = st.integers(1, 150).map(lambda k: 2 * k)


class TestQuantize:
    def test_reference_terms(self):
        q = quantize_amounts(100_000_000, 28_400_000_000, 1000)
        assert (q.amount_a, q.amount_b, q.unit_a, q.unit_b) == (
            100_000_000, 28_400_000_000, 100_000, 28_400_000)
        assert 2 * q.unit_b == 56_800_000  # one B step

    def test_minimal_units(self):
        q = quantize_amounts(1000, 1000, 1000)
        assert (q.unit_a, q.unit_b) == (1, 1)

    def test_unit_too_small(self):
        with pytest.raises(SwapError) as err:
            quantize_amounts(999, 2000, 1000)
        assert err.value.reason == "unit_too_small"

    def test_remainder_is_reported(self):
        q = quantize_amounts(100_000_123, 28_400_000_999, 1000)
        assert (q.amount_a, q.remainder_a) == (100_000_000, 123)
        assert (q.amount_b, q.remainder_b) == (28_400_000_000, 999)

    @pytest.mark.parametrize("n", [0, -2, 3, 1001])
    def test_invalid_granularity(self, n):
        with pytest.raises(SwapError) as err:
            quantize_amounts(10**8, 10**8, n)
        assert err.value.reason == "invalid_granularity"


class TestTerms:
    def test_reference_terms_within_tolerance(self):
        t = make_terms()
        assert t.unit_a == UNIT_A and t.unit_b == UNIT_B
        assert abs(t.value_skew) < Fraction(1, 1000)

    def test_price_mismatch(self):
        with pytest.raises(SwapError) as err:
            SwapTerms("alice", "bob", 10**8, 300 * 10**8, Fraction("0.003521"), 1000)
        assert err.value.reason == "price_mismatch"

    def test_not_quantized(self):
        with pytest.raises(SwapError) as err:
            SwapTerms("alice", "bob", 10**8 + 1, 284 * 10**8, Fraction("0.003521"), 1000)
        assert err.value.reason == "not_quantized"


class TestSchedule:
    def test_reference_schedule(self):
        s = build_schedule(1000)
        assert len(s) == 1001
        assert s.payments("A") == 501 and s.payments("B") == 500

    def test_smallest(self):
        s = build_schedule(2)
        assert [tuple(x) for x in s.steps] == [("A", 1), ("B", 2), ("A", 1)]
        assert s.total_units("A") == s.total_units("B") == 2

    def test_n4(self):
        s = build_schedule(4)
        assert [tuple(x) for x in s.steps] == [("A", 1), ("B", 2), ("A", 2), ("B", 2), ("A", 1)]
        # oracle: exhaustive prefix scan
        a = b = 0
        for payer, units in s.steps:
            a, b = (a + units, b) if payer == "A" else (a, b + units)
            assert abs(a - b) <= 1

    def test_exposure_examples(self):
        s = build_schedule(1000)
        assert exposure(s, 1) == 1
        assert exposure(s, 2) == -1
        assert exposure(s, len(s)) == 0

    def test_exposure_out_of_range(self):
        s = build_schedule(4)
        with pytest.raises(IndexError):
            exposure(s, 6)
        with pytest.raises(IndexError):
            exposure(s, -1)

    @settings(max_examples=80, deadline=None)
    @given(even_n)
    def test_matches_oracle(self, n):
        s = build_schedule(n)
        assert [tuple(x) for x in s.steps] == oracles.schedule(n)
        assert s.total_units("A") == s.total_units("B") == n
        assert s.payments("A") == n // 2 + 1 and s.payments("B") == n // 2
        for k in range(len(s) + 1):
            assert exposure(s, k) == oracles.exposure(n, k)


@pytest.fixture(scope="module")
def run():
    session = make_session(1000)
    return session, run_swap(session)


class TestHonestRun:
    def test_completes(self, run):
        session, out = run
        assert out.completed and session.phase.value == "completed"
        assert out.updates == {"alice": 501, "bob": 500}
        assert out.accepted_updates == 1001

    def test_balances(self, run):
        _, out = run
        assert out.balance_delta["bob"]["a"] == 10**8 - BTC.tx_fee
        assert out.balance_delta["alice"]["b"] == 284 * 10**8 - LTC.tx_fee
        assert out.balance_delta["alice"]["a"] == -(10**8 + BTC.tx_fee)
        assert out.balance_delta["bob"]["b"] == -(284 * 10**8 + LTC.tx_fee)
        assert out.unit_delta == {"alice": 0, "bob": 0}

    def test_channels_fully_paid_and_closed(self, run):
        session, _ = run
        for ch, amount in ((session.channel_a, 10**8), (session.channel_b, 284 * 10**8)):
            assert ch.cumulative_paid == ch.accepted_paid == amount
            assert ch.phase is Phase.CLOSED

    def test_onchain_and_signatures(self, run):
        _, out = run
        assert out.onchain_txs == {"a": 2, "b": 2}
        assert out.signatures == {"alice": 501 + 3, "bob": 500 + 3}
        assert out.max_exposure == 1

    def test_fees(self, run):
        _, out = run
        assert out.fees_paid["alice"] == {"a": BTC.tx_fee, "b": LTC.tx_fee}
        assert out.chain_fees == {"a": 2 * BTC.tx_fee, "b": 2 * LTC.tx_fee}


def test_step_events_and_message_cost():
    session = SwapSession(make_world(), make_terms(10))
    out = run_swap(session)
    steps = session.world.log.find("step")
    assert [r.payload["step"] for r in steps] == list(range(1, 12))
    ticks = [r.tick for r in steps]
    assert all(b - a == MESSAGE_TICKS for a, b in zip(ticks, ticks[1:]))
    assert [r.payload["units"] for r in steps] == [u for _, u in oracles.schedule(10)]
    assert out.steps_completed == 11


def test_update_accepted_before_step_recorded():
    session = SwapSession(make_world(), make_terms(4))
    run_swap(session)
    log = [(r.kind, r.payload.get("step")) for r in session.world.log
           if r.kind in ("update_accepted", "step")]
    for i in range(0, len(log), 2):
        assert log[i][0] == "update_accepted" and log[i + 1][0] == "step"


class TestAborts:
    def test_bob_pockets_first_unit(self):
        out = run_swap(make_session(1000), HONEST, AbortAt(2))
        assert (out.phase, out.aborted_at, out.reason, out.culprit) == (
            "aborted", 2, "counterparty_stopped", "bob")
        assert out.prefee_delta("alice", "a") == -UNIT_A
        assert out.prefee_delta("bob", "a") == UNIT_A
        assert out.balance_delta["alice"]["a"] == -UNIT_A - BTC.tx_fee
        assert out.balance_delta["bob"]["a"] == UNIT_A - BTC.tx_fee
        assert out.unit_delta == {"alice": -1, "bob": 1}

    def test_alice_stops_after_receiving_two(self):
        out = run_swap(make_session(1000), AbortAt(3), HONEST)
        assert out.aborted_at == 3
        assert out.unit_delta == {"alice": 1, "bob": -1}
        assert out.prefee_delta("alice", "b") == 2 * UNIT_B
        assert out.prefee_delta("alice", "a") == -UNIT_A

    def test_abort_at_first_step_is_a_no_trade(self):
        out = run_swap(make_session(2), AbortAt(1), HONEST)
        assert out.unit_delta == {"alice": 0, "bob": 0}
        # both channels opened and, with nothing to close, refunded
        assert out.onchain_txs == {"a": 2, "b": 2}
        assert out.fees_paid["alice"]["a"] == 2 * BTC.tx_fee

    def test_never_sign_refund_has_no_footprint(self):
        out = run_swap(make_session(10), HONEST, NeverSignRefund())
        assert (out.aborted_at, out.reason, out.culprit) == (
            0, "payee_refused_refund_signature", "bob")
        assert out.onchain_txs == {"a": 0, "b": 0}
        assert all(v == 0 for d in out.balance_delta.values() for v in d.values())

    def test_defensive_close_by_victim(self):
        session = make_session(10)
        run_swap(session, HONEST, AbortAt(4))
        assert session.channel_a.phase is Phase.CLOSED  # bob cashes out
        assert session.channel_b.phase is Phase.CLOSED  # alice defends


class TestStalls:
    def test_short_stall_only_delays(self):
        base = run_swap(make_session(10))
        slow = run_swap(make_session(10), HONEST, Stall(4, 100))
        assert slow.completed
        assert slow.balance_delta == base.balance_delta

    def test_stall_beyond_timeout_aborts(self):
        session = make_session(10)
        out = run_swap(session, HONEST, Stall(4))
        assert (out.reason, out.culprit, out.aborted_at) == ("counterparty_stalled", "bob", 4)
        # bob is dark forever: alice closes on chain B, refunds chain A
        assert session.channel_b.phase is Phase.CLOSED
        assert session.channel_a.phase is Phase.REFUNDED
        assert out.unit_delta["alice"] >= 0

    def test_finite_long_stall_comes_back_to_close(self):
        session = make_session(10)
        out = run_swap(session, Stall(3, 1200), HONEST)
        assert out.reason == "counterparty_stalled"
        assert session.channel_b.phase is Phase.CLOSED  # alice returns in time

    def test_timeout_is_one_block_by_default(self):
        assert make_session(10).stall_timeout_ticks == LTC.block_interval_ticks


class TestNeverClose:
    def test_funder_refunds(self):
        session = make_session(10)
        out = run_swap(session, HONEST, NeverClose())
        assert out.completed
        assert session.channel_a.phase is Phase.REFUNDED
        assert out.balance_delta["alice"]["a"] == -2 * BTC.tx_fee


class TestLocktimes:
    def test_default_is_an_hour_of_blocks(self):
        world = make_world()
        assert default_locktime(world.ledgers["a"]) == 6
        assert default_locktime(world.ledgers["b"]) == 24

    def test_stretched_for_long_sessions(self):
        world = make_world()
        assert default_locktime(world.ledgers["a"], 10 * 600) == 12

    def test_tight_explicit_locktime_aborts_with_margin(self):
        terms = make_terms(1000, refund_locktime_a=4)
        out = SwapSession(make_world(), terms).run({})
        assert out.reason == "timelock_margin"
        assert out.aborted_at >= 1


def test_keep_open_channel_untouched():
    from pingpong.channel import ChannelParams
    world = make_world({"a": {"alice": 3 * 10**8}, "b": {"bob": 300 * 10**8}})
    ch = world.open_channel("a", ChannelParams("alice", "bob", 2 * 10**8, 500, "BTC"))
    session = SwapSession(world, make_terms(10))
    session.use_channel("channel_a", ch, keep_open=True)
    out = session.run({})
    assert out.completed and ch.phase is Phase.OPEN
    assert out.onchain_txs == {"a": 0, "b": 2}
    assert out.balance_delta["alice"]["a"] == -10**8


def test_use_channel_checks_room():
    from pingpong.channel import ChannelParams
    world = make_world()
    ch = world.open_channel("a", ChannelParams("alice", "bob", 10**7, 500, "BTC"))
    with pytest.raises(ValueError):
        SwapSession(world, make_terms(10)).use_channel("channel_a", ch)


# -- sweeps ------------------------------------------------------------------------------


@pytest.mark.parametrize("n", [2, 4, 6, 10])
def test_forked_outcomes_equal_fresh_runs(n):
    fresh = {}
    for cheater in ("alice", "bob"):
        for k in range(1, n + 2):
            fresh[cheater, k] = make_session(n, quiet=True).run({cheater: AbortAt(k)})
    forked = {(c, k): o for c, k, o in abort_outcomes(lambda: make_session(n, quiet=True),
                                                       ["alice", "bob"])}
    assert forked == fresh


@pytest.mark.parametrize("n", range(2, 21, 2))
def test_abort_sweep_matches_prefix_oracle(n):
    role = {"alice": "A", "bob": "B"}
    for cheater, k, out in abort_outcomes(lambda: make_session(n, quiet=True),
                                          ["alice", "bob"]):
        gain, done = oracles.abort_gain(n, role[cheater], k)
        victim = "bob" if cheater == "alice" else "alice"
        assert out.unit_delta[cheater] == gain, (cheater, k)
        assert out.unit_delta[victim] == -gain
        assert out.steps_completed == done
        assert gain in (0, 1)


@settings(max_examples=15, deadline=None)
@given(even_n.filter(lambda n: n <= 60), st.data())
def test_exposure_never_exceeds_one_unit(n, data):
    k = data.draw(st.integers(1, n + 1))
    cheater = data.draw(st.sampled_from(["alice", "bob"]))
    out = make_session(n, quiet=True).run({cheater: AbortAt(k)})
    assert out.max_exposure <= 1
    assert all(abs(u) <= 1 for u in out.unit_delta.values())


def test_skipped_blocks_keep_heights_on_the_clock():
    session = make_session(10)
    run_swap(session, HONEST, NeverClose())
    world = session.world
    for role, ledger in world.ledgers.items():
        interval = ledger.params.block_interval_ticks
        assert ledger.height == world.clock // interval
        assert world.next_block_tick() <= (ledger.height + 1) * interval


def test_event_log_ticks_non_decreasing():
    session = SwapSession(make_world(), make_terms(20))
    run_swap(session, HONEST, AbortAt(7))
    ticks = [r.tick for r in session.world.log]
    assert len(ticks) > 40 and ticks == sorted(ticks)
