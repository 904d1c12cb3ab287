"""Parsing of account transaction histories and feature projection.

Accepts the public block-explorer account-txlist JSON (decimal-string
numerics) and a flat CSV schema. Wei amounts are kept as Python ints
(arbitrary precision, so values beyond 2^63 survive untouched) and only
converted to floats after unit scaling when a feature series is built.
"""

from __future__ import annotations

import csv
import enum
import json
import re
from dataclasses import dataclass

import numpy as np

from .errors import FieldError, ParseError, RowError, SchemaError
from .series import TimeSeries

_DECIMAL_RE = re.compile(r"^[0-9]+$")

CSV_HEADER = ["hash", "timestamp", "from", "to", "value", "gas_price", "gas_limit"]

WEI_PER_ETHER = 10**18
WEI_PER_GWEI = 10**9


@dataclass(frozen=True, order=True)
class Transaction:
    """One on-chain transfer record."""

    timestamp: int
    hash: str
    from_address: str
    to_address: str
    value: int
    gas_price: int
    gas_limit: int

    def __post_init__(self):
        if self.timestamp < 0:
            raise FieldError("timestamp must be non-negative", field="timestamp")
        for name in ("value", "gas_price", "gas_limit"):
            if getattr(self, name) < 0:
                raise FieldError(f"{name} must be non-negative", field=name)


class FeatureKind(enum.Enum):
    """The three detection features and their unit scaling."""

    PAYMENT_AMOUNT = "value"
    GAS_PRICE = "gasprice"
    GAS_LIMIT = "gaslimit"

    @property
    def scale(self) -> float:
        # wei -> ether, wei -> gwei; gas limit is already a plain count
        if self is FeatureKind.PAYMENT_AMOUNT:
            return 1.0 / WEI_PER_ETHER
        if self is FeatureKind.GAS_PRICE:
            return 1.0 / WEI_PER_GWEI
        return 1.0

    def raw(self, tx: Transaction) -> int:
        if self is FeatureKind.PAYMENT_AMOUNT:
            return tx.value
        if self is FeatureKind.GAS_PRICE:
            return tx.gas_price
        return tx.gas_limit


def _decimal_field(record: dict, key: str, index: int) -> int:
    if key not in record:
        raise SchemaError(f"record {index} is missing required field {key!r}")
    raw = record[key]
    if not isinstance(raw, str) or not _DECIMAL_RE.match(raw):
        raise FieldError(
            f"record {index} field {key!r} is not a decimal string: {raw!r}",
            record_index=index,
            field=key,
        )
    return int(raw)


def parse_explorer_json(raw: bytes | str, keep_failed: bool = True) -> list[Transaction]:
    """Parse a block-explorer account-txlist response.

    ``keep_failed`` retains transactions marked "isError"="1" (default,
    since failed sends are still account activity worth watching).
    """
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc.msg}", offset=exc.pos) from exc
    if not isinstance(doc, dict) or "result" not in doc:
        raise SchemaError('top-level object must contain a "result" list')
    result = doc["result"]
    if not isinstance(result, list):
        raise SchemaError('"result" must be a list of transaction records')
    txs = []
    for i, record in enumerate(result):
        if not isinstance(record, dict):
            raise SchemaError(f"record {i} is not an object")
        if not keep_failed and record.get("isError") == "1":
            continue
        for key in ("hash", "from", "to"):
            if key not in record:
                raise SchemaError(f"record {i} is missing required field {key!r}")
        txs.append(
            Transaction(
                timestamp=_decimal_field(record, "timeStamp", i),
                hash=str(record["hash"]),
                from_address=str(record["from"]),
                to_address=str(record["to"]),
                value=_decimal_field(record, "value", i),
                gas_price=_decimal_field(record, "gasPrice", i),
                gas_limit=_decimal_field(record, "gas", i),
            )
        )
    txs.sort(key=lambda t: (t.timestamp, t.hash))
    return txs


def read_csv(path) -> list[Transaction]:
    """Read transactions from the flat CSV schema (decimal integers only)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("empty CSV file, expected a header row") from None
        if header != CSV_HEADER:
            raise SchemaError(
                f"bad CSV header {header!r}, expected {CSV_HEADER!r}"
            )
        txs = []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(CSV_HEADER):
                raise RowError(
                    f"line {line_no}: expected {len(CSV_HEADER)} fields, got {len(row)}",
                    line=line_no,
                )
            for idx, name in ((1, "timestamp"), (4, "value"), (5, "gas_price"), (6, "gas_limit")):
                if not _DECIMAL_RE.match(row[idx]):
                    raise FieldError(
                        f"line {line_no}: field {name!r} is not a decimal integer: {row[idx]!r}",
                        record_index=line_no,
                        field=name,
                    )
            txs.append(
                Transaction(
                    timestamp=int(row[1]),
                    hash=row[0],
                    from_address=row[2],
                    to_address=row[3],
                    value=int(row[4]),
                    gas_price=int(row[5]),
                    gas_limit=int(row[6]),
                )
            )
    txs.sort(key=lambda t: (t.timestamp, t.hash))
    return txs


def write_csv(transactions: list[Transaction], path) -> None:
    """Write transactions sorted by (timestamp, hash); read_csv inverts this."""
    ordered = sorted(transactions, key=lambda t: (t.timestamp, t.hash))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for tx in ordered:
            writer.writerow(
                [
                    tx.hash,
                    str(tx.timestamp),
                    tx.from_address,
                    tx.to_address,
                    str(tx.value),
                    str(tx.gas_price),
                    str(tx.gas_limit),
                ]
            )


def to_feature_series(transactions: list[Transaction], feature: FeatureKind) -> TimeSeries:
    """Project transactions onto one feature as a sample-domain series.

    Unit scaling (wei -> ether / gwei) happens here so detector arithmetic
    stays in O(1)-magnitude ranges.
    """
    ts = np.array([tx.timestamp for tx in transactions], dtype=np.int64)
    scale = feature.scale
    vals = np.array([feature.raw(tx) * scale for tx in transactions], dtype=np.float64)
    return TimeSeries(ts, vals)
