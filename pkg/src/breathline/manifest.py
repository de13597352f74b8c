"""Dataset manifests.

The corpora themselves are not redistributable, so a corpus is described
by a CSV manifest (`id,source,label,speaker_id,outlet,duration_ms,
annotation_path`) whose sources are local paths or URLs. A small fetch
client downloads URL sources and records per-entry outcomes without
failing the batch.
"""

from __future__ import annotations

import csv
import hashlib
import json
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .errors import ValidationError

LABELS = ("real", "fake", "unlabeled")
MANIFEST_FIELDS = ["id", "source", "label", "speaker_id", "outlet", "duration_ms", "annotation_path"]


@dataclass
class ManifestEntry:
    id: str
    source: str
    label: str
    outlet: str
    speaker_id: Optional[str] = None
    duration_ms: Optional[float] = None
    annotation_path: Optional[str] = None

    def __post_init__(self):
        if not self.id:
            raise ValidationError("manifest entry id must be non-empty")
        if self.label not in LABELS:
            raise ValidationError(f"entry {self.id!r}: label must be one of {LABELS}, got {self.label!r}")
        if not self.outlet:
            raise ValidationError(f"entry {self.id!r}: outlet/show must be non-empty")
        if self.duration_ms is not None and self.duration_ms < 0:
            raise ValidationError(f"entry {self.id!r}: negative duration_ms")

    @property
    def is_url(self) -> bool:
        return self.source.startswith(("http://", "https://"))


def load_manifest(path) -> list[ManifestEntry]:
    """Read a manifest CSV, validating labels and id uniqueness."""
    entries = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != MANIFEST_FIELDS:
            raise ValidationError(
                f"{path}: manifest header must be {','.join(MANIFEST_FIELDS)}, got {reader.fieldnames}"
            )
        for lineno, row in enumerate(reader, start=2):
            duration = row.get("duration_ms") or None
            try:
                entries.append(
                    ManifestEntry(
                        id=row["id"],
                        source=row["source"],
                        label=row["label"],
                        speaker_id=row.get("speaker_id") or None,
                        outlet=row["outlet"],
                        duration_ms=float(duration) if duration is not None else None,
                        annotation_path=row.get("annotation_path") or None,
                    )
                )
            except (ValidationError, ValueError) as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from exc
    seen = set()
    for entry in entries:
        if entry.id in seen:
            raise ValidationError(f"{path}: duplicate manifest id {entry.id!r}")
        seen.add(entry.id)
    return entries


def save_manifest(path, entries: list[ManifestEntry]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_FIELDS)
        for e in entries:
            writer.writerow(
                [
                    e.id,
                    e.source,
                    e.label,
                    e.speaker_id or "",
                    e.outlet,
                    "" if e.duration_ms is None else format(e.duration_ms, "g"),
                    e.annotation_path or "",
                ]
            )


def fetch_manifest_sources(entries: list[ManifestEntry], dest_dir, timeout: float = 30.0) -> list[dict]:
    """Download every URL-sourced entry into dest_dir.

    Returns one report record per URL entry: {id, url, status, sha256,
    bytes}, with status 'ok' or 'failed(<reason>)'. Individual failures
    never abort the batch.
    """
    dest = Path(dest_dir)
    dest.mkdir(parents=True, exist_ok=True)
    report = []
    for entry in entries:
        if not entry.is_url:
            continue
        record = {"id": entry.id, "url": entry.source, "status": "ok", "sha256": None, "bytes": 0}
        try:
            with urllib.request.urlopen(entry.source, timeout=timeout) as resp:
                payload = resp.read()
            (dest / f"{entry.id}.bin").write_bytes(payload)
            record["sha256"] = hashlib.sha256(payload).hexdigest()
            record["bytes"] = len(payload)
        except urllib.error.HTTPError as exc:
            record["status"] = f"failed({exc.code})"
        except Exception as exc:  # network/socket errors recorded per entry
            record["status"] = f"failed({exc.__class__.__name__}: {exc})"
        report.append(record)
    return report


def save_fetch_report(path, report: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
