"""What a party can gain by walking away mid-swap, and whether it pays.

Run with ``python demos/cheating.py``.
"""

from __future__ import annotations

import copy
from collections import Counter

from pingpong.scenario import PRESETS, load_scenario, parse_scenario, sweep_aborts
from pingpong.strategy import cheat_report


def main() -> None:
    data = copy.deepcopy(PRESETS["btc_ltc_paper"])
    data["terms"]["granularity_inverse"] = 20
    rows = sweep_aborts(parse_scenario(data))
    gains = Counter((r.cheater, r.cheater_gain_units) for r in rows)
    print("Abort sweep with N=20 (pre-fee gain in micro-units -> number of abort points):")
    for (cheater, gain), count in sorted(gains.items()):
        print(f"  {cheater:>5} gains {gain}: {count}")

    terms = load_scenario("btc_ltc_paper").terms
    print("\nDoes stopping early pay off for bob, who receives BTC?")
    for fees in [(1000, 1000), (50_000, 50_000), (60_000, 60_000)]:
        r = cheat_report(terms, "bob", fees)
        verdict = "profitable" if r.profitable else "not worth it"
        print(f"  fees {fees}: unit worth {r.unit_value} sat, profit {r.profit} -> {verdict}")


if __name__ == "__main__":
    main()
