"""Transaction logs and contract labels.

Ingestion reads two flat CSV files:

* ``transactions.csv`` with header ``contract,timestamp,from,to,value_wei``
  (extra columns, e.g. a provenance tag, are accepted and ignored);
* ``labels.csv`` with header ``address,creator,label`` where label is
  ``1`` for Ponzi and ``0`` for not-Ponzi.

Every transaction is stored relative to its contract: ``IN`` when value or
a message reaches the contract, ``OUT`` when the contract pays out.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

WEI_PER_ETH = 10**18

TRANSACTION_COLUMNS = ("contract", "timestamp", "from", "to", "value_wei")
LABEL_COLUMNS = ("address", "creator", "label")

_ADDRESS_RE = re.compile(r"^0x[0-9a-f]{40}$")


class ParseError(ValueError):
    """Malformed input file; the message names the file line."""

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"line {line}: "
        elif where:
            where += " "
        super().__init__(where + message)


class Direction(enum.Enum):
    IN = "in"
    OUT = "out"


class Label(enum.IntEnum):
    NOT_PONZI = 0
    PONZI = 1


def normalize_address(raw: str) -> str:
    """Return the lowercase form of a ``0x``-prefixed 40-hex-digit address."""
    value = raw.strip().lower()
    if not _ADDRESS_RE.match(value):
        raise ValueError(f"malformed address {raw!r}")
    return value


@dataclass(frozen=True)
class Transaction:
    timestamp: int
    counterparty: str
    direction: Direction
    value: int  # wei

    def __post_init__(self):
        if self.timestamp < 0:
            raise ValueError("timestamp must be non-negative")
        if self.value < 0:
            raise ValueError("value must be non-negative")


@dataclass(frozen=True)
class ContractHistory:
    address: str
    creator: str | None
    transactions: tuple[Transaction, ...] = ()
    label: Label | None = None

    def __post_init__(self):
        ts = [t.timestamp for t in self.transactions]
        if any(a > b for a, b in zip(ts, ts[1:])):
            raise ValueError(f"transactions of {self.address} are not time-sorted")
        if self.creator is not None and self.creator == self.address:
            raise ValueError(f"creator of {self.address} equals the contract address")

    def with_label(self, creator: str, label: Label) -> "ContractHistory":
        return ContractHistory(self.address, creator, self.transactions, label)


@dataclass(frozen=True)
class LabeledDataset:
    contracts: tuple[ContractHistory, ...]
    unlabeled: int = 0  # histories present in the log but absent from the labels file
    class_counts: tuple[int, int] = field(init=False)

    def __post_init__(self):
        seen = set()
        n_ponzi = 0
        for c in self.contracts:
            if c.label is None:
                raise ValueError(f"contract {c.address} has no label")
            if c.address in seen:
                raise ValueError(f"duplicate contract {c.address}")
            seen.add(c.address)
            n_ponzi += int(c.label == Label.PONZI)
        object.__setattr__(self, "class_counts", (n_ponzi, len(self.contracts) - n_ponzi))

    def __len__(self):
        return len(self.contracts)

    @property
    def labels(self) -> list[int]:
        return [int(c.label) for c in self.contracts]

    def class_shares(self) -> tuple[float, float]:
        n = len(self.contracts)
        if n == 0:
            return (0.0, 0.0)
        return (self.class_counts[0] / n, self.class_counts[1] / n)


def _read_rows(path: Path, required: tuple[str, ...]):
    with open(path, encoding="utf-8", newline="") as fh:
        header_line = fh.readline()
        if not header_line:
            raise ParseError("empty file, header missing", path=str(path))
        header = header_line.rstrip("\r\n").split(",")
        missing = [c for c in required if c not in header]
        if missing:
            raise ParseError(f"header lacks columns {missing}", line=1, path=str(path))
        positions = [header.index(c) for c in required]
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\r\n")
            if not line:
                continue
            cells = line.split(",")
            if len(cells) != len(header):
                raise ParseError(
                    f"expected {len(header)} columns, got {len(cells)}",
                    line=lineno, path=str(path),
                )
            yield lineno, [cells[p].strip() for p in positions]


def _parse_uint(text: str, what: str, lineno: int, path: Path) -> int:
    if not (text.isascii() and text.isdigit()):
        raise ParseError(f"{what} {text!r} is not a non-negative integer", line=lineno, path=str(path))
    return int(text)


def _parse_address(text: str, what: str, lineno: int, path: Path) -> str:
    try:
        return normalize_address(text)
    except ValueError:
        raise ParseError(f"bad {what} address {text!r}", line=lineno, path=str(path)) from None


def load_transactions(path) -> dict[str, ContractHistory]:
    """Group a transactions CSV into one time-sorted history per contract.

    A row whose ``to`` is the contract is an incoming transaction, one whose
    ``from`` is the contract is outgoing. Rows touching neither endpoint are
    rejected. Sorting is stable, so equal timestamps keep file order.
    The returned histories carry neither creator nor label until
    :func:`load_labels` attaches them.
    """
    path = Path(path)
    grouped: dict[str, list[Transaction]] = {}
    for lineno, (contract, ts, src, dst, value) in _read_rows(path, TRANSACTION_COLUMNS):
        contract = _parse_address(contract, "contract", lineno, path)
        src = _parse_address(src, "from", lineno, path)
        dst = _parse_address(dst, "to", lineno, path)
        timestamp = _parse_uint(ts, "timestamp", lineno, path)
        wei = _parse_uint(value, "value_wei", lineno, path)
        if dst == contract:
            tx = Transaction(timestamp, src, Direction.IN, wei)
        elif src == contract:
            tx = Transaction(timestamp, dst, Direction.OUT, wei)
        else:
            raise ParseError(
                f"neither endpoint is the contract {contract}", line=lineno, path=str(path)
            )
        grouped.setdefault(contract, []).append(tx)

    return {
        addr: ContractHistory(addr, None, tuple(sorted(txs, key=lambda t: t.timestamp)))
        for addr, txs in grouped.items()
    }


def load_labels(path, histories: Mapping[str, ContractHistory]) -> LabeledDataset:
    """Attach creators and labels to histories, in label-file order.

    Histories without a label row are excluded and counted in
    ``LabeledDataset.unlabeled``.
    """
    path = Path(path)
    contracts = []
    seen = set()
    for lineno, (address, creator, label) in _read_rows(path, LABEL_COLUMNS):
        address = _parse_address(address, "contract", lineno, path)
        creator = _parse_address(creator, "creator", lineno, path)
        if address in seen:
            raise ParseError(f"duplicate address {address}", line=lineno, path=str(path))
        seen.add(address)
        if label not in ("0", "1"):
            raise ParseError(f"unknown label {label!r} (expected 0 or 1)", line=lineno, path=str(path))
        if address not in histories:
            raise ParseError(f"label for unknown address {address}", line=lineno, path=str(path))
        if creator == address:
            raise ParseError(f"creator equals contract {address}", line=lineno, path=str(path))
        contracts.append(histories[address].with_label(creator, Label(int(label))))
    unlabeled = sum(1 for a in histories if a not in seen)
    return LabeledDataset(tuple(contracts), unlabeled=unlabeled)


def load_dataset(transactions_path, labels_path) -> LabeledDataset:
    return load_labels(labels_path, load_transactions(transactions_path))


def write_transactions(path, histories: Iterable[ContractHistory]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(TRANSACTION_COLUMNS) + "\n")
        for h in histories:
            for t in h.transactions:
                if t.direction is Direction.IN:
                    src, dst = t.counterparty, h.address
                else:
                    src, dst = h.address, t.counterparty
                fh.write(f"{h.address},{t.timestamp},{src},{dst},{t.value}\n")


def write_labels(path, dataset: LabeledDataset) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(LABEL_COLUMNS) + "\n")
        for c in dataset.contracts:
            fh.write(f"{c.address},{c.creator},{int(c.label)}\n")
