"""Per-contract transaction features and the D1/D2/D3 feature matrices.

All 27 learnable features are computed from the contract's own log; the
contract address is carried alongside as an identifier only. Moments are
population moments computed from exact integer power sums, so constant
inputs give exactly zero spread and skewness. Ratios with an empty
denominator are 0.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .chain_data import WEI_PER_ETH, ContractHistory, Direction, LabeledDataset

SECONDS_PER_DAY = 86400

FEATURES = (
    "balance",
    "lifetime",
    "tx_in",
    "tx_out",
    "investment_in",
    "payment_out",
    "n_addr_paying",
    "n_addr_paid",
    "mean_v1",
    "mean_v2",
    "sdev_v1",
    "sdev_v2",
    "paid_rate",
    "paid_one",
    "known_rate",
    "n_maxpayment",
    "skew_v1",
    "skew_v2",
    "inv_in_over_tx_in",
    "pay_out_over_tx_out",
    "pct_days_tx_in",
    "sdev_tx_in",
    "pct_days_tx_out",
    "sdev_tx_out",
    "initiator_eth_wo_investing",
    "initiator_eth_investing",
    "initiator_no_eth",
)

# features introduced on top of the prior-work set
NEW_FEATURES = FEATURES[18:]

INITIATOR_FLAGS = FEATURES[24:]

D2_FEATURES = (
    "balance",
    "investment_in",
    "payment_out",
    "mean_v1",
    "mean_v2",
    "sdev_v1",
    "sdev_v2",
    "paid_rate",
    "paid_one",
    "known_rate",
    "n_maxpayment",
    "skew_v1",
    "skew_v2",
)

D3_REMOVED = ("payment_out", "initiator_eth_investing", "initiator_no_eth")
D3_FEATURES = tuple(f for f in FEATURES if f not in D3_REMOVED)


@dataclass(frozen=True)
class FeatureCatalog:
    variant: str
    active: tuple[str, ...]

    def __post_init__(self):
        unknown = [f for f in self.active if f not in FEATURES]
        if unknown:
            raise ValueError(f"unknown features {unknown}")
        if len(set(self.active)) != len(self.active):
            raise ValueError("duplicate features in catalog")
        if not self.active:
            raise ValueError("catalog must list at least one feature")

    def __len__(self):
        return len(self.active)

    @classmethod
    def named(cls, variant: str) -> "FeatureCatalog":
        key = variant.lower()
        if key == "d1":
            return cls("d1", FEATURES)
        if key == "d2":
            return cls("d2", D2_FEATURES)
        if key == "d3":
            return cls("d3", D3_FEATURES)
        if key.startswith("custom:"):
            return cls.from_file(variant[len("custom:"):])
        raise ValueError(f"unknown variant {variant!r} (expected d1, d2, d3 or custom:<file>)")

    @classmethod
    def from_file(cls, path) -> "FeatureCatalog":
        """One feature name per line; blank lines and ``#`` comments ignored.

        Names are put back into catalog order.
        """
        names = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                names.append(line)
        chosen = set(names)
        unknown = chosen - set(FEATURES)
        if unknown:
            raise ValueError(f"unknown features in {path}: {sorted(unknown)}")
        return cls("custom", tuple(f for f in FEATURES if f in chosen))

    def write(self, path) -> None:
        Path(path).write_text("".join(f + "\n" for f in self.active), encoding="utf-8")


@dataclass
class AddressFlow:
    count_in: int = 0
    count_out: int = 0
    wei_in: int = 0
    wei_out: int = 0

    @property
    def eth_in(self) -> float:
        return self.wei_in / WEI_PER_ETH

    @property
    def eth_out(self) -> float:
        return self.wei_out / WEI_PER_ETH

    def as_tuple(self) -> tuple[int, int, float, float]:
        return (self.count_in, self.count_out, self.eth_in, self.eth_out)


def per_address_flows(h: ContractHistory) -> dict[str, AddressFlow]:
    """Per-counterparty transaction counts and amounts in each direction."""
    flows: dict[str, AddressFlow] = {}
    for t in h.transactions:
        f = flows.setdefault(t.counterparty, AddressFlow())
        if t.direction is Direction.IN:
            f.count_in += 1
            f.wei_in += t.value
        else:
            f.count_out += 1
            f.wei_out += t.value
    return flows


def _moments(values: Sequence[int]) -> tuple[float, float, float]:
    """Mean, population std and population skewness of integer data.

    Uses n-scaled central sums, which are exact integers:
    n^2 m2 = n S2 - S1^2 and n^3 m3 = n^2 S3 - 3 n S1 S2 + 2 S1^3.
    Skewness is 0 for n < 3 or zero variance.
    """
    n = len(values)
    if n == 0:
        return 0.0, 0.0, 0.0
    s1 = sum(values)
    s2 = sum(v * v for v in values)
    spread = n * s2 - s1 * s1
    mean = s1 / n
    sdev = math.sqrt(spread) / n
    if n < 3 or spread == 0:
        return mean, sdev, 0.0
    s3 = sum(v * v * v for v in values)
    third = n * n * s3 - 3 * n * s1 * s2 + 2 * s1**3
    # third / spread^1.5, split to keep intermediates in float range
    skew = (third / spread) / math.sqrt(spread)
    return mean, sdev, skew


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def extract_features(h: ContractHistory) -> dict[str, float]:
    """All 27 features of one contract, keyed by name in catalog order."""
    txs = h.transactions
    ins = [t for t in txs if t.direction is Direction.IN]
    outs = [t for t in txs if t.direction is Direction.OUT]
    paying_in = [t for t in ins if t.value > 0]
    paying_out = [t for t in outs if t.value > 0]

    f: dict[str, float] = {}
    f["balance"] = (sum(t.value for t in ins) - sum(t.value for t in outs)) / WEI_PER_ETH
    f["lifetime"] = float(txs[-1].timestamp - txs[0].timestamp) if txs else 0.0
    f["tx_in"] = float(len(ins))
    f["tx_out"] = float(len(outs))
    f["investment_in"] = float(len(paying_in))
    f["payment_out"] = float(len(paying_out))

    investors = {t.counterparty for t in paying_in}
    payees = Counter(t.counterparty for t in paying_out)
    f["n_addr_paying"] = float(len(investors))
    f["n_addr_paid"] = float(len(payees))

    flows = per_address_flows(h).values()
    mean1, sdev1, skew1 = _moments([a.count_in - a.count_out for a in flows])
    mean2, sdev2, skew2 = _moments([a.wei_in - a.wei_out for a in flows])
    f["mean_v1"] = mean1
    f["mean_v2"] = mean2 / WEI_PER_ETH
    f["sdev_v1"] = sdev1
    f["sdev_v2"] = sdev2 / WEI_PER_ETH

    f["paid_rate"] = _ratio(len(ins), len(outs))
    f["paid_one"] = _ratio(sum(1 for a in investors if payees[a] >= 2), len(investors))

    first_investment: dict[str, int] = {}
    for t in paying_in:
        first_investment.setdefault(t.counterparty, t.timestamp)
    first_payment: dict[str, int] = {}
    for t in paying_out:
        first_payment.setdefault(t.counterparty, t.timestamp)
    known = sum(
        1 for a, paid_at in first_payment.items()
        if a in first_investment and first_investment[a] < paid_at
    )
    f["known_rate"] = _ratio(known, len(first_payment))
    f["n_maxpayment"] = float(max(payees.values(), default=0))
    f["skew_v1"] = skew1
    f["skew_v2"] = skew2

    f["inv_in_over_tx_in"] = _ratio(len(paying_in), len(ins))
    f["pay_out_over_tx_out"] = _ratio(len(paying_out), len(outs))

    if txs:
        first_day = txs[0].timestamp // SECONDS_PER_DAY
        span_days = txs[-1].timestamp // SECONDS_PER_DAY - first_day + 1
    else:
        first_day, span_days = 0, 0
    for name, group in (("in", ins), ("out", outs)):
        per_day = Counter(t.timestamp // SECONDS_PER_DAY - first_day for t in group)
        f[f"pct_days_tx_{name}"] = _ratio(len(per_day), span_days)
        daily = [per_day.get(d, 0) for d in range(span_days)]
        f[f"sdev_tx_{name}"] = _moments(daily)[1]

    creator = h.creator
    invested = any(t.counterparty == creator for t in paying_in)
    earned = any(t.counterparty == creator for t in paying_out)
    f["initiator_eth_wo_investing"] = float(earned and not invested)
    f["initiator_eth_investing"] = float(earned and invested)
    f["initiator_no_eth"] = float(not earned)

    return {name: f[name] for name in FEATURES}


@dataclass
class FeatureMatrix:
    """Rows of contracts, columns of features (catalog order)."""

    X: np.ndarray
    y: np.ndarray
    addresses: list[str]
    feature_names: tuple[str, ...]

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64).reshape(len(self.addresses), len(self.feature_names))
        self.y = np.asarray(self.y, dtype=np.int64)
        if len(self.y) != len(self.addresses):
            raise ValueError("labels and addresses differ in length")

    def __len__(self):
        return len(self.addresses)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def column(self, name: str) -> np.ndarray:
        try:
            return self.X[:, self.feature_names.index(name)]
        except ValueError:
            raise KeyError(f"feature {name!r} not in matrix") from None

    def select(self, names: Sequence[str]) -> "FeatureMatrix":
        missing = [n for n in names if n not in self.feature_names]
        if missing:
            raise KeyError(f"features {missing} not in matrix")
        cols = [self.feature_names.index(n) for n in names]
        return FeatureMatrix(self.X[:, cols], self.y, list(self.addresses), tuple(names))

    def project(self, catalog: FeatureCatalog) -> "FeatureMatrix":
        return self.select(catalog.active)

    def take(self, indices) -> "FeatureMatrix":
        idx = np.asarray(indices, dtype=np.int64)
        return FeatureMatrix(
            self.X[idx], self.y[idx], [self.addresses[i] for i in idx], self.feature_names
        )


def build_feature_matrix(ds: LabeledDataset, catalog: FeatureCatalog) -> FeatureMatrix:
    rows = [extract_features(c) for c in ds.contracts]
    X = np.array([[r[n] for n in catalog.active] for r in rows], dtype=np.float64)
    return FeatureMatrix(
        X.reshape(len(rows), len(catalog)),
        np.array(ds.labels, dtype=np.int64),
        [c.address for c in ds.contracts],
        catalog.active,
    )


def _fmt(v: float) -> str:
    return f"{v:.9g}"


def write_features_csv(path, m: FeatureMatrix) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(("address",) + m.feature_names + ("label",)) + "\n")
        for addr, row, label in zip(m.addresses, m.X, m.y):
            fh.write(",".join([addr, *map(_fmt, row), str(int(label))]) + "\n")


def read_features_csv(path) -> FeatureMatrix:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\r\n").split(",")
        if len(header) < 3 or header[0] != "address" or header[-1] != "label":
            raise ValueError(f"{path}: header must be address,<features...>,label")
        names = tuple(header[1:-1])
        unknown = [n for n in names if n not in FEATURES]
        if unknown:
            raise ValueError(f"{path}: unknown feature columns {unknown}")
        addresses, rows, labels = [], [], []
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\r\n")
            if not line:
                continue
            cells = line.split(",")
            if len(cells) != len(header):
                raise ValueError(f"{path}: line {lineno}: expected {len(header)} columns")
            addresses.append(cells[0])
            try:
                rows.append([float(c) for c in cells[1:-1]])
                labels.append(int(cells[-1]))
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: non-numeric value") from None
    X = np.array(rows, dtype=np.float64).reshape(len(addresses), len(names))
    return FeatureMatrix(X, np.array(labels, dtype=np.int64), addresses, names)


@dataclass(frozen=True)
class DistributionTable:
    """Plot data for one feature.

    ``kind`` is ``"cdf"`` (rows of class, value, cum_fraction) for continuous
    features or ``"share"`` (rows of class, value, percentage) for 0/1 flags.
    """

    feature: str
    kind: str
    rows: tuple[tuple[int, float, float], ...]


def _trimmed(values: np.ndarray) -> np.ndarray:
    lo, hi = np.percentile(values, [1, 99])
    return values[(values >= lo) & (values <= hi)]


def emit_distribution_data(m: FeatureMatrix, feature: str) -> DistributionTable:
    """Per-class empirical CDF (or 0/1 share table for binary flags).

    Continuous features are trimmed to their per-class [1st, 99th] percentile
    range before the CDF is formed.
    """
    col = m.column(feature)
    classes = sorted(set(int(v) for v in m.y))
    binary = feature in INITIATOR_FLAGS
    rows = []
    for cls in classes:
        values = col[m.y == cls]
        if binary:
            for v in (0.0, 1.0):
                rows.append((cls, v, 100.0 * float(np.mean(values == v))))
            continue
        kept = np.sort(_trimmed(values))
        uniq, counts = np.unique(kept, return_counts=True)
        cum = np.cumsum(counts) / len(kept)
        rows.extend((cls, float(v), float(c)) for v, c in zip(uniq, cum))
    return DistributionTable(feature, "share" if binary else "cdf", tuple(rows))


def write_distribution_csv(path, tables: Sequence[DistributionTable]) -> None:
    kind = {t.kind for t in tables}
    if len(kind) > 1:
        raise ValueError("cannot mix cdf and share tables in one file")
    last = "percentage" if kind == {"share"} else "cum_fraction"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"feature,class,value,{last}\n")
        for t in tables:
            for cls, v, frac in t.rows:
                fh.write(f"{t.feature},{cls},{_fmt(v)},{_fmt(frac)}\n")
