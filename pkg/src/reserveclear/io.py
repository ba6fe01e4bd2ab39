"""Offer-book files and result serialisation."""

from __future__ import annotations

import csv
import io as _io
import json
import math
from pathlib import Path
from typing import Iterable

from .core import ClearingResult, Offer, ReserveError

OFFER_FIELDS = ("id", "volume_mw", "reliability", "price_per_mw", "source")
REQUIRED_FIELDS = OFFER_FIELDS[:4]


def _offer_from_record(rec: dict, where: str) -> Offer:
    missing = [f for f in REQUIRED_FIELDS if rec.get(f) in (None, "")]
    if missing:
        raise ReserveError(f"{where}: missing {', '.join(missing)}")
    try:
        volume = float(rec["volume_mw"])
        rel = float(rec["reliability"])
        price = float(rec["price_per_mw"])
    except (TypeError, ValueError):
        raise ReserveError(f"{where}: volume_mw, reliability and price_per_mw must be numbers") from None
    source = rec.get("source") or "unspecified"
    try:
        return Offer(str(rec["id"]).strip(), volume, price, rel, str(source).strip())
    except ReserveError as exc:
        raise ReserveError(f"{where}: {exc}") from None


def _collect(records: Iterable[tuple[str, dict]]) -> list[Offer]:
    offers: list[Offer] = []
    seen: dict[str, str] = {}
    for where, rec in records:
        offer = _offer_from_record(rec, where)
        if offer.id in seen:
            raise ReserveError(f"{where}: duplicate offer id {offer.id!r} (first at {seen[offer.id]})")
        seen[offer.id] = where
        offers.append(offer)
    if not offers:
        raise ReserveError("no offers")
    return offers


def parse_offers_csv(text: str) -> list[Offer]:
    lines = text.splitlines()
    if not any(line.strip() for line in lines):
        raise ReserveError("no offers")
    reader = csv.DictReader(_io.StringIO(text))
    header = [h.strip() for h in (reader.fieldnames or [])]
    absent = [f for f in REQUIRED_FIELDS if f not in header]
    if absent:
        raise ReserveError(f"line 1: header lacks column(s) {', '.join(absent)}; expected {','.join(OFFER_FIELDS)}")
    reader.fieldnames = header

    def records():
        for rec in reader:
            if not any((v or "").strip() for v in rec.values() if isinstance(v, str)):
                continue
            if rec.get(None):
                raise ReserveError(f"line {reader.line_num}: more fields than header columns")
            yield f"line {reader.line_num}", {k: (v.strip() if isinstance(v, str) else v) for k, v in rec.items()}

    return _collect(records())


def parse_offers_json(text: str) -> list[Offer]:
    try:
        data = json.loads(text) if text.strip() else []
    except json.JSONDecodeError as exc:
        raise ReserveError(f"line {exc.lineno}: invalid JSON ({exc.msg})") from None
    if isinstance(data, dict):
        data = data.get("offers", [])
    if not isinstance(data, list):
        raise ReserveError("JSON offer book must be a list of offers or an object with an 'offers' list")
    for j, rec in enumerate(data):
        if not isinstance(rec, dict):
            raise ReserveError(f"offer {j + 1}: expected an object")
    return _collect((f"offer {j + 1}", rec) for j, rec in enumerate(data))


def read_offers(path: str | Path) -> list[Offer]:
    """Read an offer book; ``.json`` files use the JSON mirror of the CSV columns."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ReserveError(f"cannot read {path}: {exc.strerror}") from None
    if path.suffix.lower() == ".json":
        return parse_offers_json(text)
    return parse_offers_csv(text)


def offers_to_csv(offers: Iterable[Offer]) -> str:
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(OFFER_FIELDS)
    for o in offers:
        writer.writerow([o.id, repr(o.volume), repr(o.reliability), repr(o.price), o.source])
    return buf.getvalue()


def write_offers_csv(offers: Iterable[Offer], path: str | Path) -> None:
    Path(path).write_text(offers_to_csv(offers))


# --------------------------------------------------------------------------
# results


def _finite_or_none(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _finite_or_none(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite_or_none(v) for v in obj]
    return obj


def dumps_json(data) -> str:
    """Deterministic JSON: sorted keys, non-finite numbers as null."""
    return json.dumps(_finite_or_none(data), indent=2, sort_keys=True, allow_nan=False) + "\n"


def result_to_json(result: ClearingResult, include_time: bool = False) -> str:
    return dumps_json(result.to_dict(include_time=include_time))


def result_from_json(text: str) -> ClearingResult:
    data = json.loads(text)
    if data.get("total_cost") is None:
        data["total_cost"] = math.inf
    return ClearingResult.from_dict(data)


def read_result(path: str | Path) -> ClearingResult:
    return result_from_json(Path(path).read_text())


__all__ = [
    "OFFER_FIELDS",
    "dumps_json",
    "offers_to_csv",
    "parse_offers_csv",
    "parse_offers_json",
    "read_offers",
    "read_result",
    "result_from_json",
    "result_to_json",
    "write_offers_csv",
]
