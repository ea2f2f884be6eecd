"""Route the reference swap through an exchange and compare with a direct swap.

Run with ``python demos/hub_vs_direct.py``.
"""

from __future__ import annotations

from pingpong.hub import amortized_onchain_cost
from pingpong.scenario import run_scenario


def main() -> None:
    direct = run_scenario("btc_ltc_paper").report
    hub = run_scenario("hub_composed").report
    print(f"{'':>8} {'direct':>28} {'via hub':>28}")
    for party in ("alice", "bob"):
        print(f"{party:>8} {str(direct['balance_delta'][party]):>28} "
              f"{str(hub['balance_delta'][party]):>28}")
    print(f"{'txs':>8} {direct['onchain_txs_total']:>28} {hub['onchain_txs_total']:>28}")
    print("\nOn-chain transactions per trade when the hub channels stay open:")
    for trades in (1, 2, 10, 100):
        cost = amortized_onchain_cost(trades, direct=False)
        print(f"  {trades:>3} trades: {float(cost):.2f} (direct: 4)")


if __name__ == "__main__":
    main()
