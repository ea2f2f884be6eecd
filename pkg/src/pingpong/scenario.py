"""Declarative scenarios: JSON schema, presets, runner and abort sweep.

A scenario file is one JSON object::

    {
      "name": "...",
      "chains": {"a": {<ChainParams fields>}, "b": {...}},
      "genesis": {"a": {"alice": 200000000}, "b": {"bob": 30000000000}},
      "terms": {"party_a": "alice", "party_b": "bob", "amount_a": ..., "amount_b": ...,
                "price": "0.003521", "granularity_inverse": 1000},
      "topology": "direct" | "hub" | "peg",
      "hub": {"party": "exchange", "fee_per_unit": 0},
      "peg": {"custodian": "powpeg"},
      "pre_opened": {"channel_a": {"capacity": ..., "paid": ...}},
      "strategies": {"bob": {"kind": "abort_at", "step": 2}},
      "seed": 0, "max_ticks": 10000000, "sweep_bound": 200
    }

Amounts are integer base units and the price is a decimal or fraction string.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Mapping

from .channel import ChannelParams, accept_update, pay
from .events import EventLog, NullLog
from .hub import HubSession
from .simchain import ChainParams, PartyId
from .strategy import Strategy, SwapOutcome, net_value, parse_strategy
from .swap import (
    PingPongSession,
    SwapError,
    SwapSession,
    SwapTerms,
    World,
    abort_outcomes,
)

TOPOLOGIES = ("direct", "hub", "peg")
DEFAULT_SWEEP_BOUND = 200
EXIT_COMPLETED, EXIT_CONFIG, EXIT_ABORTED = 0, 1, 2


class ScenarioError(ValueError):
    """Invalid configuration; ``field`` is the dotted path of the offending entry."""

    def __init__(self, field: str, message: str) -> None:
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass
class Scenario:
    name: str
    chains: dict[str, ChainParams]
    genesis: dict[str, dict[PartyId, int]]
    terms: SwapTerms
    topology: str = "direct"
    strategies: dict[PartyId, Strategy] = field(default_factory=dict)
    hub: PartyId = "hub"
    hub_fee_per_unit: int = 0
    custodian: PartyId = "custodian"
    pre_opened: dict[str, dict[str, int]] = field(default_factory=dict)
    seed: int = 0
    max_ticks: int = 10_000_000
    sweep_bound: int = DEFAULT_SWEEP_BOUND

    @property
    def parties(self) -> list[PartyId]:
        extra = {"hub": [self.hub], "peg": [self.custodian]}.get(self.topology, [])
        return [self.terms.party_a, self.terms.party_b, *extra]


# -- parsing ---------------------------------------------------------------------------


def _get(data: Mapping[str, Any], key: str, path: str, default: Any = ...) -> Any:
    if not isinstance(data, Mapping):
        raise ScenarioError(path, "expected an object")
    if key not in data or data[key] is None:
        if default is ...:
            raise ScenarioError(f"{path}.{key}" if path else key, "missing")
        return default
    return data[key]


def _int(value: Any, path: str, *, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(path, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ScenarioError(path, f"must be at least {minimum}")
    return value


def _price(value: Any, path: str) -> Fraction:
    if isinstance(value, float):
        raise ScenarioError(path, "give the price as a string to keep it exact")
    try:
        price = Fraction(value)
    except (TypeError, ValueError, ZeroDivisionError):
        raise ScenarioError(path, f"not a rational number: {value!r}") from None
    if price <= 0:
        raise ScenarioError(path, "must be positive")
    return price


def _chain(data: Any, path: str) -> ChainParams:
    fields = {"chain_id": str, "block_interval_ticks": int, "required_confirmations": int,
              "tx_fee": int, "unit_name": str, "base_units_per_coin": int}
    minimum = {"block_interval_ticks": 1, "required_confirmations": 1, "tx_fee": 0,
               "base_units_per_coin": 1}
    if not isinstance(data, Mapping):
        raise ScenarioError(path, "expected an object")
    unknown = set(data) - set(fields)
    if unknown:
        raise ScenarioError(f"{path}.{sorted(unknown)[0]}", "unknown field")
    kwargs = {}
    for name, kind in fields.items():
        if name not in data:
            if name == "chain_id":
                raise ScenarioError(f"{path}.{name}", "missing")
            continue
        value = data[name]
        if kind is int:
            value = _int(value, f"{path}.{name}", minimum=minimum[name])
        elif not isinstance(value, str):
            raise ScenarioError(f"{path}.{name}", "expected a string")
        kwargs[name] = value
    try:
        return ChainParams(**kwargs)
    except ValueError as exc:
        raise ScenarioError(path, str(exc)) from None


def _terms(data: Any, units: dict[str, int]) -> SwapTerms:
    party_a = _get(data, "party_a", "terms")
    party_b = _get(data, "party_b", "terms")
    amount_a = _int(_get(data, "amount_a", "terms"), "terms.amount_a", minimum=1)
    amount_b = _int(_get(data, "amount_b", "terms"), "terms.amount_b", minimum=1)
    price = _price(_get(data, "price", "terms"), "terms.price")
    n = _int(_get(data, "granularity_inverse", "terms"), "terms.granularity_inverse",
             minimum=2)
    kw: dict[str, Any] = {"units_per_coin_a": units["a"], "units_per_coin_b": units["b"]}
    for side in "ab":
        lock = _get(data, f"refund_locktime_{side}", "terms", None)
        if lock is not None:
            kw[f"refund_locktime_{side}"] = _int(lock, f"terms.refund_locktime_{side}",
                                                 minimum=1)
    if "skew_tolerance" in data:
        kw["skew_tolerance"] = _price(data["skew_tolerance"], "terms.skew_tolerance")
    try:
        return SwapTerms(party_a, party_b, amount_a, amount_b, price, n, **kw)
    except SwapError as exc:
        where = {"price_mismatch": "terms.price", "not_quantized": "terms.granularity_inverse",
                 "invalid_granularity": "terms.granularity_inverse",
                 "unit_too_small": "terms.granularity_inverse"}.get(exc.reason, "terms")
        raise ScenarioError(where, str(exc)) from None
    except ValueError as exc:
        raise ScenarioError("terms", str(exc)) from None


def parse_scenario(data: Mapping[str, Any]) -> Scenario:
    """Validate a decoded scenario object; errors name the offending field."""
    if not isinstance(data, Mapping):
        raise ScenarioError("scenario", "expected a JSON object")
    chains_raw = _get(data, "chains", "")
    chains = {role: _chain(_get(chains_raw, role, "chains"), f"chains.{role}")
              for role in ("a", "b")}
    genesis_raw = _get(data, "genesis", "")
    genesis: dict[str, dict[PartyId, int]] = {}
    for role in ("a", "b"):
        balances = _get(genesis_raw, role, "genesis", {})
        if not isinstance(balances, Mapping):
            raise ScenarioError(f"genesis.{role}", "expected an object")
        genesis[role] = {p: _int(v, f"genesis.{role}.{p}", minimum=1)
                         for p, v in balances.items()}
    units = {r: c.base_units_per_coin for r, c in chains.items()}
    terms = _terms(_get(data, "terms", ""), units)

    topology = data.get("topology", "direct")
    if topology not in TOPOLOGIES:
        raise ScenarioError("topology", f"expected one of {', '.join(TOPOLOGIES)}")
    strategies = {}
    for party, spec in dict(data.get("strategies") or {}).items():
        try:
            strategies[party] = parse_strategy(spec)
            strategies[party].validate(terms.n + 1)
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioError(f"strategies.{party}", str(exc)) from None

    hub_raw = data.get("hub") or {}
    peg_raw = data.get("peg") or {}
    scenario = Scenario(
        name=str(data.get("name", "scenario")),
        chains=chains,
        genesis=genesis,
        terms=terms,
        topology=topology,
        strategies=strategies,
        hub=hub_raw.get("party", "hub"),
        hub_fee_per_unit=_int(hub_raw.get("fee_per_unit", 0), "hub.fee_per_unit", minimum=0),
        custodian=peg_raw.get("custodian", "custodian"),
        pre_opened=_pre_opened(data.get("pre_opened") or {}),
        seed=_int(data.get("seed", 0), "seed", minimum=0),
        max_ticks=_int(data.get("max_ticks", 10_000_000), "max_ticks", minimum=1),
        sweep_bound=_int(data.get("sweep_bound", DEFAULT_SWEEP_BOUND), "sweep_bound", minimum=2),
    )
    for party in scenario.strategies:
        if party not in scenario.parties:
            raise ScenarioError(f"strategies.{party}", "not a party to this scenario")
    _check_funding(scenario)
    return scenario


def _pre_opened(data: Mapping[str, Any]) -> dict[str, dict[str, int]]:
    out = {}
    for leg, spec in data.items():
        if leg != "channel_a":
            raise ScenarioError(f"pre_opened.{leg}", "only channel_a can be pre-opened")
        path = f"pre_opened.{leg}"
        out[leg] = {"capacity": _int(_get(spec, "capacity", path), f"{path}.capacity", minimum=1),
                    "paid": _int(spec.get("paid", 0), f"{path}.paid", minimum=0)}
        if out[leg]["paid"] > out[leg]["capacity"]:
            raise ScenarioError(f"{path}.paid", "exceeds capacity")
    return out


def _check_funding(s: Scenario) -> None:
    """Every funder must hold its channel capacity plus the opening fee."""
    t = s.terms
    need: dict[tuple[str, PartyId], int] = {}

    def owe(role: str, party: PartyId, amount: int) -> None:
        need[role, party] = need.get((role, party), 0) + amount + s.chains[role].tx_fee

    if s.topology == "peg":
        owe("a", t.party_a, t.amount_a)
        owe("b", s.custodian, t.amount_b)
    else:
        pre = s.pre_opened.get("channel_a")
        if pre is not None:
            owe("a", t.party_a, pre["capacity"])
            if pre["capacity"] - pre["paid"] < t.amount_a:
                raise ScenarioError("pre_opened.channel_a.capacity",
                                    "remaining room is below terms.amount_a")
        if s.topology == "hub":
            if s.hub_fee_per_unit >= min(t.unit_a, t.unit_b):
                raise ScenarioError("hub.fee_per_unit", "must be below one micro-unit")
            owe("a", s.hub, t.amount_a - t.n * s.hub_fee_per_unit)
            owe("b", s.hub, t.amount_b - t.n * s.hub_fee_per_unit)
        if pre is None:
            owe("a", t.party_a, t.amount_a)
        owe("b", t.party_b, t.amount_b)
    for (role, party), amount in need.items():
        have = s.genesis[role].get(party, 0)
        if have < amount:
            raise ScenarioError(f"genesis.{role}.{party}",
                                f"holds {have}, needs {amount} (capacity plus open fee)")


def load_scenario(source: str | Path) -> Scenario:
    """Load a preset by name or a scenario file by path."""
    if isinstance(source, str) and source in PRESETS:
        return parse_scenario(copy.deepcopy(PRESETS[source]))
    path = Path(source)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ScenarioError("scenario", f"no such file or preset: {source}") from None
    except json.JSONDecodeError as exc:
        raise ScenarioError("scenario", f"invalid JSON: {exc}") from None
    return parse_scenario(data)


# -- presets -----------------------------------------------------------------------------

_BTC = {"chain_id": "BTC", "block_interval_ticks": 600, "required_confirmations": 2,
        "tx_fee": 1000, "unit_name": "satoshi", "base_units_per_coin": 10**8}
_LTC = {"chain_id": "LTC", "block_interval_ticks": 150, "required_confirmations": 2,
        "tx_fee": 100_000, "unit_name": "litoshi", "base_units_per_coin": 10**8}
_RSK = {"chain_id": "RSK", "block_interval_ticks": 30, "required_confirmations": 2,
        "tx_fee": 1_260_000_000_000, "unit_name": "wei", "base_units_per_coin": 10**18}
_ETH = {"chain_id": "ETH", "block_interval_ticks": 12, "required_confirmations": 2,
        "tx_fee": 420_000_000_000_000, "unit_name": "wei", "base_units_per_coin": 10**18}

_BTC_LTC_TERMS = {"party_a": "alice", "party_b": "bob", "amount_a": 100_000_000,
                  "amount_b": 28_400_000_000, "price": "0.003521",
                  "granularity_inverse": 1000}
_WRAP_TERMS = {"party_a": "alice", "party_b": "bob", "amount_a": 50_000_000,
               "amount_b": 500_000_000_000_000_000, "price": "1",
               "granularity_inverse": 1000}

PRESETS: dict[str, dict[str, Any]] = {
    "btc_ltc_paper": {
        "name": "btc_ltc_paper",
        "chains": {"a": _BTC, "b": _LTC},
        "genesis": {"a": {"alice": 200_000_000}, "b": {"bob": 30_000_000_000}},
        "terms": _BTC_LTC_TERMS,
    },
    "wrap_rsk": {
        "name": "wrap_rsk",
        "chains": {"a": _BTC, "b": _RSK},
        "genesis": {"a": {"alice": 100_000_000}, "b": {"bob": 10**18}},
        "terms": _WRAP_TERMS,
    },
    "wrap_rsk_powpeg": {
        "name": "wrap_rsk_powpeg",
        "chains": {"a": dict(_BTC, required_confirmations=100), "b": _RSK},
        "genesis": {"a": {"alice": 100_000_000}, "b": {"powpeg": 10**19}},
        "terms": _WRAP_TERMS,
        "topology": "peg",
        "peg": {"custodian": "powpeg"},
    },
    "ln_rebalance": {
        "name": "ln_rebalance",
        "chains": {"a": _BTC, "b": _ETH},
        "genesis": {"a": {"alice": 200_000_000}, "b": {"bob": 10 * 10**18}},
        "terms": {"party_a": "alice", "party_b": "bob", "amount_a": 20_000_000,
                  "amount_b": 4 * 10**18, "price": "0.05", "granularity_inverse": 1000},
        "pre_opened": {"channel_a": {"capacity": 100_000_000, "paid": 30_000_000}},
    },
    "hub_composed": {
        "name": "hub_composed",
        "chains": {"a": _BTC, "b": _LTC},
        "genesis": {"a": {"alice": 200_000_000, "exchange": 200_000_000},
                    "b": {"bob": 30_000_000_000, "exchange": 30_000_000_000}},
        "terms": _BTC_LTC_TERMS,
        "topology": "hub",
        "hub": {"party": "exchange", "fee_per_unit": 0},
    },
}


# -- running -----------------------------------------------------------------------------


def build_session(s: Scenario, log: EventLog | None = None) -> PingPongSession:
    """Fresh world plus a session ready to run (pre-opened channels already in place)."""
    world = World(s.chains, s.genesis, seed=s.seed, log=log)
    if s.topology == "hub":
        return HubSession(world, s.terms, max_ticks=s.max_ticks, hub=s.hub,
                          hub_fee_per_unit=s.hub_fee_per_unit)
    session = SwapSession(world, s.terms, max_ticks=s.max_ticks)
    pre = s.pre_opened.get("channel_a")
    if pre is not None:
        ledger = world.ledgers["a"]
        lock = s.terms.refund_locktime_a or ledger.height + 10 * s.terms.n
        params = ChannelParams(s.terms.party_a, s.terms.party_b, pre["capacity"], lock,
                               ledger.chain_id)
        ch = world.open_channel("a", params)
        if pre["paid"]:
            accept_update(ch, pay(ch, pre["paid"]))
        session.use_channel("channel_a", ch, keep_open=True)
    return session


def run_peg(s: Scenario, log: EventLog | None = None) -> SwapOutcome:
    """Baseline without a swap: lock on chain A, custodian releases on chain B.

    The custodian only releases once the lock has chain A's required
    confirmations, which is the wait a ping-pong swap avoids.
    """
    world = World(s.chains, s.genesis, seed=s.seed, log=log)
    t = s.terms
    parties = [t.party_a, s.custodian]
    base = {p: {r: world.holdings(p, r) for r in world.ledgers} for p in parties}
    world.log.emit("peg", "lock", party=t.party_a, amount=t.amount_a)
    world.transfer("a", t.party_a, s.custodian, t.amount_a)
    world.log.emit("peg", "release", party=t.party_a, amount=t.amount_b)
    world.transfer("b", s.custodian, t.party_a, t.amount_b)
    fee = {r: world.params(r).tx_fee for r in world.ledgers}
    delta = {p: {r: world.holdings(p, r) - base[p][r] for r in world.ledgers} for p in parties}
    fees = {t.party_a: {"a": fee["a"], "b": 0}, s.custodian: {"a": 0, "b": fee["b"]}}
    outcome = SwapOutcome(
        phase="completed",
        chains={r: world.ledgers[r].chain_id for r in world.ledgers},
        balance_delta=delta,
        fees_paid=fees,
        chain_fees={r: world.ledgers[r].fees_collected for r in world.ledgers},
        signatures={t.party_a: 1, s.custodian: 1},
        updates={t.party_a: 0, s.custodian: 0},
        onchain_txs={"a": 1, "b": 1},
        confirmations_waited={r: world.params(r).required_confirmations for r in world.ledgers},
        unit_delta={p: sum((Fraction(delta[p][r] + fees[p][r], t.unit(r)) for r in "ab"),
                           Fraction(0)) for p in parties},
        ticks_elapsed=world.clock,
    )
    outcome.value_delta = net_value(outcome, t)
    world.log.emit("peg", "session_end", phase="completed")
    return outcome


def simulate(s: Scenario, log: EventLog | None = None) -> SwapOutcome:
    if s.topology == "peg":
        return run_peg(s, log)
    session = build_session(s, log)
    return session.run(s.strategies)


def build_report(s: Scenario, outcome: SwapOutcome) -> dict[str, Any]:
    """Machine-readable summary; field names are part of the output contract."""
    t = s.terms
    accepted = outcome.accepted_updates
    return {
        "scenario": s.name,
        "seed": s.seed,
        "topology": s.topology,
        "phase": outcome.phase,
        "aborted_at": outcome.aborted_at,
        "reason": outcome.reason,
        "culprit": outcome.culprit,
        "chains": outcome.chains,
        "n": t.n,
        "unit_a": t.unit_a,
        "unit_b": t.unit_b,
        "balance_delta": outcome.balance_delta,
        "fees_paid": outcome.fees_paid,
        "value_delta": outcome.value_delta,
        "unit_delta": {p: str(u) for p, u in outcome.unit_delta.items()},
        "updates": outcome.updates,
        "updates_a": outcome.updates.get(t.party_a, 0),
        "updates_b": outcome.updates.get(t.party_b, 0),
        "accepted_updates": accepted,
        "signatures": outcome.signatures,
        "signatures_total": outcome.signatures_total,
        "update_signatures": accepted,
        "onchain_txs": outcome.onchain_txs,
        "onchain_txs_total": sum(outcome.onchain_txs.values()),
        "confirmations_waited": outcome.confirmations_waited,
        "confirmations_waited_chain_a": outcome.confirmations_waited.get("a", 0),
        "confirmations_waited_chain_b": outcome.confirmations_waited.get("b", 0),
        "max_exposure": outcome.max_exposure,
        "steps_completed": outcome.steps_completed,
        "ticks_elapsed": outcome.ticks_elapsed,
    }


@dataclass
class RunResult:
    exit_code: int
    report: dict[str, Any]
    log: EventLog


def run_scenario(source: str | Path | Scenario,
                 overrides: Mapping[str, Any] | None = None) -> RunResult:
    """Run a scenario (or preset name). ``overrides`` may set ``seed`` and ``max_ticks``.

    Configuration errors raise :class:`ScenarioError`; the CLI maps them to exit 1.
    """
    s = source if isinstance(source, Scenario) else load_scenario(source)
    for key, value in (overrides or {}).items():
        if key not in ("seed", "max_ticks"):
            raise ScenarioError(key, "cannot be overridden")
        if value is not None:
            setattr(s, key, _int(value, key, minimum=0))
    log = EventLog()
    outcome = simulate(s, log)
    code = EXIT_COMPLETED if outcome.completed else EXIT_ABORTED
    return RunResult(code, build_report(s, outcome), log)


# -- abort sweep ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AbortRow:
    abort_step: int
    cheater: PartyId
    victim: PartyId
    reason: str | None
    steps_completed: int
    cheater_gain_units: Fraction
    victim_loss_units: Fraction
    cheater_gain: int
    victim_loss: int
    asset: str

    def as_dict(self) -> dict[str, Any]:
        row = dict(self.__dict__)
        row["cheater_gain_units"] = str(self.cheater_gain_units)
        row["victim_loss_units"] = str(self.victim_loss_units)
        return row


SWEEP_FIELDS = ("abort_step", "cheater", "victim", "reason", "steps_completed",
                "cheater_gain_units", "victim_loss_units", "cheater_gain", "victim_loss",
                "asset")


def sweep_aborts(s: Scenario) -> list[AbortRow]:
    """Outcome of each party aborting at each step, pre-fee, in micro-units and base units.

    The base-unit columns are in the asset the cheater receives, which is
    the asset the victim is short of.
    """
    if s.topology != "direct" or s.pre_opened:
        raise ScenarioError("topology", "the abort sweep covers fresh direct swaps only")
    t = s.terms
    if t.n > s.sweep_bound:
        raise ScenarioError("terms.granularity_inverse",
                            f"N={t.n} exceeds sweep_bound={s.sweep_bound}")
    received = {t.party_a: "b", t.party_b: "a"}
    rows = []
    make: Callable[[], PingPongSession] = lambda: build_session(s, NullLog())
    for cheater, k, o in abort_outcomes(make, [t.party_a, t.party_b]):
        victim = t.party_b if cheater == t.party_a else t.party_a
        role = received[cheater]
        gain = o.unit_delta[cheater]
        loss = -o.unit_delta[victim]
        rows.append(AbortRow(k, cheater, victim, o.reason, o.steps_completed, gain, loss,
                             int(gain * t.unit(role)), int(loss * t.unit(role)),
                             o.chains[role]))
    worst = max(r.cheater_gain_units for r in rows)
    if worst > 1:
        raise SwapError("exposure_bound_violated", f"a cheater gained {worst} micro-units")
    return rows
