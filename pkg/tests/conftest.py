from __future__ import annotations

from fractions import Fraction

import pytest

from pingpong.events import NullLog
from pingpong.simchain import ChainParams, Keyring, Ledger
from pingpong.swap import SwapSession, SwapTerms, World

BTC = ChainParams("BTC", 600, 2, 1000, "satoshi", 10**8)
LTC = ChainParams("LTC", 150, 2, 100_000, "litoshi", 10**8)
GENESIS = {"a": {"alice": 2 * 10**8}, "b": {"bob": 300 * 10**8}}


def make_terms(n: int = 1000, **kw) -> SwapTerms:
    return SwapTerms.from_raw("alice", "bob", 10**8, 284 * 10**8, Fraction("0.003521"), n, **kw)


def make_world(genesis=None, *, quiet: bool = False, seed: int = 0) -> World:
    return World({"a": BTC, "b": LTC}, genesis or GENESIS, seed=seed,
                 log=NullLog() if quiet else None)


def make_session(n: int = 1000, *, quiet: bool = False, **kw) -> SwapSession:
    return SwapSession(make_world(quiet=quiet), make_terms(n), **kw)


def make_ledger(balances=None, params: ChainParams = BTC) -> Ledger:
    ledger = Ledger(params, Keyring(7))
    ledger.genesis(balances or {"alice": 5 * 10**8, "bob": 10**8})
    return ledger


@pytest.fixture
def ledger() -> Ledger:
    return make_ledger()


# -- acceptance reporting -------------------------------------------------------------
#
# Tests tagged ``@pytest.mark.criterion(n, "title")`` are rolled up into one
# PASS/FAIL line per criterion at the end of the run.

_criteria: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    number, title = marker
    entry = _criteria.setdefault(number, {"title": title, "ok": True, "ran": False})
    if report.when == "call" or report.failed:
        entry["ran"] = True
    if report.failed:
        entry["ok"] = False


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().criterion = tuple(marker.args)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        entry = _criteria[number]
        verdict = "PASS" if entry["ok"] and entry["ran"] else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {verdict}  {entry['title']}")
