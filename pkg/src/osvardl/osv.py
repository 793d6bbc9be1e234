"""Parsing of OSV bulk-snapshot records into dated malware/vulnerability events.

A snapshot is a directory tree laid out like the osv.dev bulk export
(``<Ecosystem>/<id>.json`` or ``<Ecosystem>/all.zip``). Each record becomes one
:class:`EventRow` per studied ecosystem it affects.
"""

from __future__ import annotations

import csv
import datetime as dt
import enum
import json
import logging
import zipfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

logger = logging.getLogger(__name__)

MALWARE_PREFIX = "MAL-"
EVENT_CSV_HEADER = ("date", "ecosystem", "kind", "advisory_count", "article_count")


class Ecosystem(str, enum.Enum):
    CRAN = "CRAN"
    GO = "Go"
    MAVEN = "Maven"
    NPM = "npm"
    PYPI = "PyPI"
    RUBYGEMS = "RubyGems"
    OTHER = "Other"

    @classmethod
    def parse(cls, name: str | None) -> "Ecosystem":
        """Map an OSV ecosystem string to a variant; unknown names give OTHER.

        Suffixes such as ``"Debian:12"`` or ``"Maven:central"`` are stripped
        before lookup.
        """
        if not name:
            return cls.OTHER
        base = name.split(":", 1)[0].strip()
        for member in STUDIED_ECOSYSTEMS:
            if member.value == base:
                return member
        return cls.OTHER

    @property
    def studied(self) -> bool:
        return self is not Ecosystem.OTHER


STUDIED_ECOSYSTEMS = (
    Ecosystem.CRAN,
    Ecosystem.GO,
    Ecosystem.MAVEN,
    Ecosystem.NPM,
    Ecosystem.PYPI,
    Ecosystem.RUBYGEMS,
)


class RecordKind(str, enum.Enum):
    MALWARE = "malware"
    VULNERABILITY = "vulnerability"


class OsvError(Exception):
    """Base class for ingestion errors."""


class OsvParseError(OsvError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class OsvSchemaError(OsvError):
    pass


class EmptySnapshotError(OsvError):
    pass


@dataclass(frozen=True)
class OsvRecord:
    id: str
    ecosystem: Ecosystem
    published: dt.date | None
    modified: dt.date | None = None
    references: tuple[tuple[str, str], ...] = ()
    ecosystems: tuple[Ecosystem, ...] = ()
    withdrawn: bool = False

    def __post_init__(self):
        if not self.id:
            raise OsvSchemaError("record id is empty")
        if self.published is None and self.modified is None:
            raise OsvSchemaError(f"{self.id}: no published or modified date")
        if not self.ecosystems:
            object.__setattr__(self, "ecosystems", (self.ecosystem,))

    @property
    def date(self) -> dt.date:
        """Event date: ``published``, falling back to ``modified``."""
        return self.published if self.published is not None else self.modified

    @property
    def studied_ecosystems(self) -> tuple[Ecosystem, ...]:
        seen = []
        for eco in self.ecosystems:
            if eco.studied and eco not in seen:
                seen.append(eco)
        return tuple(seen)


@dataclass(frozen=True, order=True)
class EventRow:
    date: dt.date
    ecosystem: Ecosystem
    kind: RecordKind
    advisory_count: int = 0
    article_count: int = 0
    record_id: str = field(default="", compare=False)

    @property
    def is_malware(self) -> bool:
        return self.kind is RecordKind.MALWARE


def _parse_date(value) -> dt.date | None:
    if not value:
        return None
    text = str(value).strip()
    try:
        # RFC 3339 timestamps; the calendar date is taken in UTC.
        stamp = dt.datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError:
        try:
            return dt.date.fromisoformat(text[:10])
        except ValueError:
            raise OsvSchemaError(f"unparseable timestamp {text!r}") from None
    if stamp.tzinfo is not None:
        stamp = stamp.astimezone(dt.timezone.utc)
    return stamp.date()


def parse_record(json_text: str | bytes) -> OsvRecord:
    """Parse one OSV JSON document.

    The primary ecosystem is taken from the first ``affected`` entry; every
    distinct ecosystem across ``affected`` is kept in ``ecosystems``.
    References without a ``type`` are kept as ``"OTHER"``.

    Raises
    ------
    OsvParseError
        Malformed JSON; carries the byte offset of the failure.
    OsvSchemaError
        Missing id or missing both ``published`` and ``modified``.
    """
    text = json_text.decode("utf-8") if isinstance(json_text, bytes) else json_text
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise OsvParseError(exc.msg, len(text[: exc.pos].encode("utf-8"))) from None
    if not isinstance(doc, dict):
        raise OsvSchemaError("top-level JSON value is not an object")

    record_id = doc.get("id")
    if not isinstance(record_id, str) or not record_id:
        raise OsvSchemaError("record has no id")

    published = _parse_date(doc.get("published"))
    modified = _parse_date(doc.get("modified"))
    if published is None and modified is None:
        raise OsvSchemaError(f"{record_id}: no published or modified date")
    if published is not None and modified is not None and modified < published:
        # Some upstream feeds carry a stale modified stamp; published dates the event.
        modified = published

    ecosystems = []
    for entry in doc.get("affected") or ():
        package = (entry or {}).get("package") or {}
        eco = Ecosystem.parse(package.get("ecosystem"))
        if eco not in ecosystems:
            ecosystems.append(eco)
    primary = ecosystems[0] if ecosystems else Ecosystem.OTHER

    references = []
    for ref in doc.get("references") or ():
        if not isinstance(ref, dict):
            continue
        references.append((str(ref.get("type") or "OTHER"), str(ref.get("url") or "")))

    return OsvRecord(
        id=record_id,
        ecosystem=primary,
        published=published,
        modified=modified,
        references=tuple(references),
        ecosystems=tuple(ecosystems) or (primary,),
        withdrawn=bool(doc.get("withdrawn")),
    )


def classify_record(record: OsvRecord | str) -> RecordKind:
    record_id = record if isinstance(record, str) else record.id
    if record_id.startswith(MALWARE_PREFIX):
        return RecordKind.MALWARE
    return RecordKind.VULNERABILITY


def count_references(record: OsvRecord) -> tuple[int, int]:
    """Return ``(advisory_count, article_count)``; type match is case-sensitive."""
    advisories = sum(1 for ref_type, _ in record.references if ref_type == "ADVISORY")
    articles = sum(1 for ref_type, _ in record.references if ref_type == "ARTICLE")
    return advisories, articles


def record_events(record: OsvRecord) -> list[EventRow]:
    kind = classify_record(record)
    advisories, articles = count_references(record)
    return [
        EventRow(record.date, eco, kind, advisories, articles, record.id)
        for eco in record.studied_ecosystems
    ]


@dataclass
class ScanResult:
    rows: list[EventRow]
    records_read: int = 0
    dropped: int = 0
    unreadable: int = 0
    dropped_by_ecosystem: dict[str, int] = field(default_factory=dict)

    def __iter__(self) -> Iterator[EventRow]:
        return iter(self.rows)

    def __len__(self) -> int:
        return len(self.rows)


def _iter_documents(root: Path) -> Iterator[tuple[str, str, bytes | None]]:
    """Yield ``(source, directory_hint, payload)``; payload None means unreadable."""
    for path in sorted(root.rglob("*")):
        if not path.is_file():
            continue
        hint = path.parent.name if path.parent != root else ""
        suffix = path.suffix.lower()
        if suffix == ".json":
            try:
                yield str(path), hint, path.read_bytes()
            except OSError as exc:
                logger.warning("cannot read %s: %s", path, exc)
                yield str(path), hint, None
        elif suffix == ".zip":
            try:
                with zipfile.ZipFile(path) as archive:
                    for name in sorted(archive.namelist()):
                        if not name.lower().endswith(".json"):
                            continue
                        try:
                            yield f"{path}!{name}", hint, archive.read(name)
                        except (OSError, zipfile.BadZipFile, KeyError) as exc:
                            logger.warning("cannot read %s!%s: %s", path, name, exc)
                            yield f"{path}!{name}", hint, None
            except (OSError, zipfile.BadZipFile) as exc:
                logger.warning("cannot open archive %s: %s", path, exc)
                yield str(path), hint, None


def scan_snapshot(root: str | Path) -> ScanResult:
    """Read every OSV record under ``root`` and return sorted event rows.

    Rows are ordered by ``(date, ecosystem, record id)`` so the result does not
    depend on filesystem enumeration order. Records whose ``affected`` list is
    empty are attributed to their parent directory name.
    """
    root = Path(root)
    if not root.is_dir():
        raise EmptySnapshotError(f"snapshot root {root} is not a directory")

    result = ScanResult(rows=[])
    for source, hint, payload in _iter_documents(root):
        if payload is None:
            result.unreadable += 1
            continue
        try:
            record = parse_record(payload)
        except (OsvError, UnicodeDecodeError) as exc:
            logger.warning("skipping %s: %s", source, exc)
            result.unreadable += 1
            continue
        result.records_read += 1
        if record.ecosystems == (Ecosystem.OTHER,) and Ecosystem.parse(hint).studied:
            record = OsvRecord(
                record.id, Ecosystem.parse(hint), record.published, record.modified,
                record.references, (Ecosystem.parse(hint),), record.withdrawn,
            )
        rows = record_events(record)
        if not rows:
            result.dropped += 1
            label = hint or "unknown"
            result.dropped_by_ecosystem[label] = result.dropped_by_ecosystem.get(label, 0) + 1
            continue
        result.rows.extend(rows)

    if result.records_read == 0:
        raise EmptySnapshotError(f"no readable OSV records under {root}")
    result.rows.sort(key=lambda r: (r.date, r.ecosystem.value, r.record_id))
    return result


def write_events_csv(rows: Iterable[EventRow], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(EVENT_CSV_HEADER)
        for row in rows:
            writer.writerow(
                (row.date.isoformat(), row.ecosystem.value, row.kind.value,
                 row.advisory_count, row.article_count)
            )


def read_events_csv(path: str | Path) -> list[EventRow]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != EVENT_CSV_HEADER:
            raise OsvSchemaError(f"{path}: unexpected header {reader.fieldnames}")
        for line in reader:
            rows.append(
                EventRow(
                    dt.date.fromisoformat(line["date"]),
                    Ecosystem.parse(line["ecosystem"]),
                    RecordKind(line["kind"]),
                    int(line["advisory_count"]),
                    int(line["article_count"]),
                )
            )
    return rows
