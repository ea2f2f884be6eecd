"""Reference computations written independently of the package.

They restate the rules from scratch (no imports from ``pingpong``) so the
tests compare two implementations rather than one with itself.
"""

from __future__ import annotations

from fractions import Fraction


def schedule(n: int) -> list[tuple[str, int]]:
    """Steps 1..n+1: A on odd steps, B on even; the first and last steps carry 1 unit."""
    return [("A" if i % 2 else "B", 1 if i in (1, n + 1) else 2) for i in range(1, n + 2)]


def exposure(n: int, k: int) -> int:
    """A's units sent minus B's after k steps, in closed form."""
    if k in (0, n + 1):
        return 0
    return 1 if k % 2 else -1


def abort_gain(n: int, cheater: str, k: int) -> tuple[int, int]:
    """(cheater's net micro-units received, steps completed) for an abort from step k.

    The cheater makes every own payment before step k and none after; the
    other side pays as long as the run continues.
    """
    sent = received = done = 0
    for i, (payer, units) in enumerate(schedule(n), 1):
        if payer == cheater and i >= k:
            break
        if payer == cheater:
            sent += units
        else:
            received += units
        done = i
    return received - sent, done


def capacity_split(capacity: int, claim: int, fee: int) -> tuple[int, int]:
    """(payee output, funder output) when the payee closes a split worth ``claim``."""
    return max(claim - fee, 0), capacity - claim


def cheat_profit(g: Fraction, total_value: int, open_fee: int, close_fee: int) -> Fraction:
    return g * total_value - open_fee - close_fee

