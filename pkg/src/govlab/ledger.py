"""Hash-chained, append-only event ledger.

Every entry commits to its position, its predecessor's digest, and its
payload: hash = SHA-256(index as decimal string || prev_hash hex || payload
bytes).  The genesis entry's prev_hash is 64 zero hex characters.  Any
in-place edit breaks every recomputation from the edited entry onward, so
verify_chain pinpoints the first bad index.  Truncating the tail is NOT
detectable from the file alone; publish the head hash out of band (the CLI
prints it after every run) to pin the expected length.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Any, Iterable

from .core import (
    CanonicalJsonError,
    GovlabError,
    canonical_json,
    is_canonical_json,
    loads_canonical,
)

GENESIS_PREV_HASH = "0" * 64
_HEX64 = frozenset("0123456789abcdef")


class LedgerError(GovlabError):
    """Malformed entry or payload handed to the ledger."""


def entry_hash(index: int, prev_hash: str, payload: str) -> str:
    """SHA-256 over index (decimal string) || prev_hash (hex) || payload bytes."""
    preimage = str(index).encode("ascii") + prev_hash.encode("ascii") + payload.encode("utf-8")
    return hashlib.sha256(preimage).hexdigest()


@dataclass(frozen=True, slots=True)
class LedgerEntry:
    index: int
    prev_hash: str
    payload: str  # canonical JSON text; the exact bytes are the hash preimage
    hash: str


def _check_hash_field(value: Any, label: str) -> str:
    if not isinstance(value, str) or len(value) != 64 or not set(value) <= _HEX64:
        raise LedgerError(f"{label} must be 64 lowercase hex chars: {value!r}")
    return value


class Ledger:
    """Append-only in-memory chain; single writer."""

    def __init__(self):
        self._entries: list[LedgerEntry] = []

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)

    def __getitem__(self, index: int) -> LedgerEntry:
        return self._entries[index]

    @property
    def entries(self) -> tuple[LedgerEntry, ...]:
        return tuple(self._entries)

    def head_hash(self) -> str:
        """Digest of the newest entry; all zeros for an empty chain."""
        return self._entries[-1].hash if self._entries else GENESIS_PREV_HASH

    def append(self, payload: Any) -> LedgerEntry:
        """Append an event; payload may be a JSON-able object or canonical text."""
        if isinstance(payload, str):
            if not is_canonical_json(payload):
                raise LedgerError("payload text is not canonical JSON")
            text = payload
        else:
            try:
                text = canonical_json(payload)
            except CanonicalJsonError as exc:
                raise LedgerError(f"payload is not canonical JSON: {exc}") from exc
        index = len(self._entries)
        prev = self.head_hash()
        entry = LedgerEntry(index=index, prev_hash=prev, payload=text, hash=entry_hash(index, prev, text))
        self._entries.append(entry)
        return entry


def verify_chain(entries: Iterable[LedgerEntry]) -> int | None:
    """Return the first broken index, or None when the whole chain checks out.

    An empty chain verifies clean.  Checks per entry: recorded index matches
    its position, prev_hash links to the predecessor (all-zero for genesis),
    and the recorded hash equals the recomputed digest.
    """
    prev = GENESIS_PREV_HASH
    for position, entry in enumerate(entries):
        if entry.index != position:
            return position
        if entry.prev_hash != prev:
            return position
        if entry.hash != entry_hash(entry.index, entry.prev_hash, entry.payload):
            return position
        prev = entry.hash
    return None


def dump_ndjson(entries: Iterable[LedgerEntry]) -> str:
    """Render entries as newline-delimited JSON, one entry per line.

    The payload is embedded as a JSON string so the exact hash preimage
    survives the round-trip byte for byte.
    """
    lines = []
    for e in entries:
        lines.append(
            canonical_json(
                {"index": e.index, "prev_hash": e.prev_hash, "payload": e.payload, "hash": e.hash}
            )
        )
    return "".join(line + "\n" for line in lines)


def load_ndjson(text: str) -> list[LedgerEntry]:
    """Parse a persisted ledger; raises LedgerError on malformed lines."""
    entries: list[LedgerEntry] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = loads_canonical(line)
        except CanonicalJsonError as exc:
            raise LedgerError(f"line {lineno}: {exc}") from exc
        if not isinstance(obj, dict) or set(obj) != {"index", "prev_hash", "payload", "hash"}:
            raise LedgerError(f"line {lineno}: not a ledger entry")
        index = obj["index"]
        if not isinstance(index, int) or isinstance(index, bool) or index < 0:
            raise LedgerError(f"line {lineno}: index must be a non-negative int")
        if not isinstance(obj["payload"], str):
            raise LedgerError(f"line {lineno}: payload must be a string")
        entries.append(
            LedgerEntry(
                index=index,
                prev_hash=_check_hash_field(obj["prev_hash"], "prev_hash"),
                payload=obj["payload"],
                hash=_check_hash_field(obj["hash"], "hash"),
            )
        )
    return entries


def write_ndjson(entries: Iterable[LedgerEntry], path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(dump_ndjson(entries))


def read_ndjson(path) -> list[LedgerEntry]:
    with open(path, "r", encoding="utf-8") as fh:
        return load_ndjson(fh.read())
