"""Seeded synthetic contract histories for demos and tests.

Ponzi-like contracts take deposits from a growing investor pool and pay
earlier investors (and usually the creator) out of later deposits.
Ordinary contracts are a mix of wallets, token-style contracts (many
zero-value calls) and escrow-style contracts with few large transfers.
A fraction of each class is drawn from the other class's generator so the
task is learnable but not trivially separable.
"""

from __future__ import annotations

import numpy as np

from .chain_data import WEI_PER_ETH, ContractHistory, Direction, Label, LabeledDataset, Transaction

DAY = 86400
T0 = 1_450_000_000  # late 2015


def _address(rng: np.random.Generator) -> str:
    return "0x" + bytes(rng.integers(0, 256, size=20, dtype=np.uint8)).hex()


def _wei(rng, eth_scale: float) -> int:
    return int(rng.lognormal(np.log(eth_scale), 0.8) * WEI_PER_ETH)


def _ponzi(rng, creator: str) -> list[Transaction]:
    n_inv = int(rng.integers(5, 60))
    investors = [_address(rng) for _ in range(n_inv)]
    span = int(rng.integers(3, 200)) * DAY
    t = T0 + int(rng.integers(0, 400 * DAY))
    txs = []
    if rng.random() < 0.5:
        txs.append(Transaction(t, creator, Direction.IN, _wei(rng, 0.5)))
    pot = 0
    queue = []
    for k in range(int(rng.integers(n_inv, 3 * n_inv))):
        t += int(rng.exponential(span / (2 * n_inv)))
        who = investors[min(int(rng.exponential(n_inv / 3)), n_inv - 1)]
        amount = _wei(rng, 1.0)
        txs.append(Transaction(t, who, Direction.IN, amount))
        pot += amount
        queue.append((who, amount))
        # pay the oldest investor once enough has accumulated
        while queue and pot > 1.5 * queue[0][1]:
            payee, owed = queue.pop(0)
            pay = int(owed * 1.4)
            txs.append(Transaction(t + int(rng.integers(0, 600)), payee, Direction.OUT, pay))
            pot -= pay
            if rng.random() < 0.3:
                fee = pay // 10
                txs.append(Transaction(t + int(rng.integers(0, 600)), creator, Direction.OUT, fee))
                pot -= fee
    if rng.random() < 0.15:
        txs.append(Transaction(t + DAY, creator, Direction.OUT, max(pot, 0)))
    return txs


def _ordinary(rng, creator: str) -> list[Transaction]:
    kind = rng.choice(3, p=[0.4, 0.4, 0.2])
    t = T0 + int(rng.integers(0, 400 * DAY))
    txs = []
    if kind == 0:  # wallet: owner moves money in and out
        owners = [creator] + [_address(rng) for _ in range(int(rng.integers(0, 3)))]
        for _ in range(int(rng.integers(2, 40))):
            t += int(rng.exponential(5 * DAY))
            if rng.random() < 0.5:
                txs.append(Transaction(t, owners[int(rng.integers(len(owners)))], Direction.IN, _wei(rng, 2.0)))
            else:
                txs.append(Transaction(t, _address(rng), Direction.OUT, _wei(rng, 1.0)))
    elif kind == 1:  # token-style: many zero-value calls from many users
        users = [_address(rng) for _ in range(int(rng.integers(3, 80)))]
        for _ in range(int(rng.integers(5, 150))):
            t += int(rng.exponential(DAY))
            value = _wei(rng, 0.2) if rng.random() < 0.1 else 0
            txs.append(Transaction(t, users[int(rng.integers(len(users)))], Direction.IN, value))
        if rng.random() < 0.3:
            txs.append(Transaction(t + DAY, creator, Direction.OUT, _wei(rng, 1.0)))
    else:  # escrow: a few parties, large deposits, one release each
        parties = [_address(rng) for _ in range(int(rng.integers(1, 6)))]
        for p in parties:
            t += int(rng.exponential(3 * DAY))
            amount = _wei(rng, 5.0)
            txs.append(Transaction(t, p, Direction.IN, amount))
            t += int(rng.exponential(10 * DAY))
            txs.append(Transaction(t, _address(rng), Direction.OUT, amount))
    if not txs:
        txs.append(Transaction(t, creator, Direction.IN, 0))
    return txs


def generate_dataset(n_ponzi: int = 60, n_not: int = 340, seed: int = 0, flip: float = 0.08) -> LabeledDataset:
    """Labelled histories; ``flip`` is the share drawn from the other class's generator."""
    rng = np.random.default_rng(seed)
    contracts = []
    labels = [Label.PONZI] * n_ponzi + [Label.NOT_PONZI] * n_not
    for label in labels:
        address, creator = _address(rng), _address(rng)
        ponzi_like = (label == Label.PONZI) != (rng.random() < flip)
        txs = _ponzi(rng, creator) if ponzi_like else _ordinary(rng, creator)
        txs.sort(key=lambda tx: tx.timestamp)
        contracts.append(ContractHistory(address, creator, tuple(txs), label))
    order = rng.permutation(len(contracts))
    return LabeledDataset(tuple(contracts[i] for i in order))
