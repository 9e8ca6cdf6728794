"""Crafted contract histories as raw tuples: (timestamp, counterparty, direction, wei).

Kept free of package types so oracles and tests can share them.
"""

ETH = 10**18
DAY = 86400
T0 = 17361 * DAY  # a UTC midnight

C1, C2, C3, C4, C5 = ("0x" + c * 40 for c in "12345")
K = "0x" + "6" * 40  # creator of every fixture
A, B, D, E, F, X = ("0x" + c * 40 for c in "abdef7")


def at(day, sec):
    return T0 + day * DAY + sec


FIXTURES = {
    # one 1 ETH deposit
    "single_deposit": (C1, K, [(100, X, "in", ETH)]),
    # creator invests and is paid; ties at one timestamp; crosses midnight inside 600 s
    "creator_invests": (C2, K, [
        (at(10, 86000), K, "in", 5 * ETH),
        (at(10, 86000), A, "in", ETH),
        (at(10, 86500), K, "out", ETH),
        (at(10, 86500), B, "in", 2 * ETH),
        (at(10, 86600), A, "out", 2 * ETH),
        (at(10, 86600), A, "out", 0),
    ]),
    # token-style: only zero-value calls, with an empty day in between
    "zero_value_calls": (C3, K, [
        (at(0, 10), A, "in", 0),
        (at(0, 20), B, "in", 0),
        (at(2, 30), A, "in", 0),
        (at(2, 40), D, "in", 0),
        (at(2, 50), E, "in", 0),
        (at(2, 60), A, "in", 0),
    ]),
    # pays out before anyone invests; values beyond 2^64 wei
    "payout_first": (C4, K, [
        (at(0, 5), A, "out", 123456789012345678901),
        (at(0, 6), B, "out", 1),
        (at(1, 0), A, "in", 7),
        (at(1, 1), A, "out", 10**20),
        (at(5, 0), B, "in", 0),
    ]),
    # 6 counterparties, 20 transactions, creator paid without investing, a silent day
    "mixed_twenty": (C5, K, [
        (at(0, 100), A, "in", 10 * ETH // 10),
        (at(0, 200), B, "in", 20 * ETH // 10),
        (at(0, 300), A, "in", 10 * ETH // 10),
        (at(0, 400), A, "out", 5 * ETH // 10),
        (at(1, 50), D, "in", 0),
        (at(1, 60), E, "in", 30 * ETH // 10),
        (at(1, 70), B, "out", 10 * ETH // 10),
        (at(1, 80), K, "out", 2 * ETH // 10),
        (at(1, 90), A, "out", 5 * ETH // 10),
        (at(3, 10), F, "in", 15 * ETH // 10),
        (at(3, 20), F, "out", 0),
        (at(3, 30), E, "out", 10 * ETH // 10),
        (at(3, 40), B, "in", 5 * ETH // 10),
        (at(3, 50), D, "out", 3 * ETH // 10),
        (at(4, 0), A, "in", 0),
        (at(4, 10), B, "out", 10 * ETH // 10),
        (at(4, 20), E, "out", 10 * ETH // 10),
        (at(4, 30), E, "out", 10 * ETH // 10),
        (at(4, 40), K, "in", 0),
        (at(4, 50), A, "out", 5 * ETH // 10),
    ]),
}
