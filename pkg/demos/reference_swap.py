"""Walk through the 1 BTC for 284 LTC swap in one-per-mille steps.

Run with ``python demos/reference_swap.py``.
"""

from __future__ import annotations

from pingpong.scenario import run_scenario


def main() -> None:
    result = run_scenario("btc_ltc_paper")
    report = result.report
    steps = result.log.find("step")

    print("Opening: each side funds a channel towards the other.")
    for record in result.log.find("opened"):
        print(f"  tick {record.tick:>5}  {record.payload}")

    print("\nFirst steps of the ping-pong:")
    for record in steps[:5]:
        p = record.payload
        print(f"  step {p['step']:>4}  {p['payer']:>5} pays {p['amount_display']:>16}"
              f"  (running total {p['cumulative']})")
    print("  ...")
    last = steps[-1].payload
    print(f"  step {last['step']:>4}  {last['payer']:>5} pays {last['amount_display']:>16}")

    print(f"\n{report['updates_a']} updates from alice, {report['updates_b']} from bob, "
          f"{report['signatures_total']} signatures, "
          f"{report['onchain_txs_total']} on-chain transactions.")
    print("Net balance changes (base units, after fees):")
    for party, delta in report["balance_delta"].items():
        print(f"  {party}: {delta}")
    print(f"Largest exposure at any point: {report['max_exposure']} micro-unit.")


if __name__ == "__main__":
    main()
