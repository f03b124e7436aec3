"""Data model for AI ecosystems: interaction records, histories and datasets.

An :class:`InteractionRecord` is one event ``<t, instance, system, user,
output, validity>``.  An :class:`EcosystemHistory` is an ordered sequence of
records; records sharing a timestep form the relation set of that step.
:class:`Dataset` is the numeric view (feature matrix + validity vector) that
predictors are fitted on.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from collections import defaultdict, deque
from dataclasses import dataclass, field, replace
from typing import IO, Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import ParseError, SchemaError, ValidationError

ROLE_PREFIXES = ("i_", "s_", "u_", "o_")
HISTORY_PREFIX = "h_"
FIXED_COLUMNS = ("t", "instance_id", "system_id", "user_id", "validity", "self_confidence")
MODES = ("anticipative", "reactive")
VALIDITY_KINDS = ("binary", "graded")

# derived feature names appended when a history window is requested
H_MEAN_VALIDITY = "h_sys_mean_validity"
H_PRIOR_COUNT = "h_sys_prior_count"
# value of the mean-validity feature when the system has no prior records
NO_HISTORY_MEAN = 0.5


@dataclass(frozen=True, slots=True)
class FeatureVector:
    """Ordered ``(name, value)`` pairs with unique names and finite values."""

    entries: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        seen = set()
        for name, value in self.entries:
            if name in seen:
                raise ValidationError(f"duplicate feature name {name!r}")
            seen.add(name)
            if not math.isfinite(value):
                raise ValidationError(f"feature {name!r} is not finite: {value!r}")

    @classmethod
    def of(cls, mapping: Mapping[str, float] | Iterable[tuple[str, float]] = ()) -> "FeatureVector":
        items = mapping.items() if isinstance(mapping, Mapping) else mapping
        return cls(tuple((str(k), float(v)) for k, v in items))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.entries)

    @property
    def values(self) -> tuple[float, ...]:
        return tuple(value for _, value in self.entries)

    def as_dict(self) -> dict[str, float]:
        return dict(self.entries)

    def get(self, name: str, default: float | None = None) -> float | None:
        for key, value in self.entries:
            if key == name:
                return value
        return default

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[tuple[str, float]]:
        return iter(self.entries)

    def __add__(self, other: "FeatureVector") -> "FeatureVector":
        return FeatureVector(self.entries + other.entries)


EMPTY_FEATURES = FeatureVector()


def _check_prefix(vector: FeatureVector, prefix: str, role: str) -> None:
    for name, _ in vector.entries:
        if not name.startswith(prefix):
            raise ValidationError(f"{role} feature {name!r} must start with {prefix!r}")


@dataclass(frozen=True, slots=True)
class InteractionRecord:
    t: int
    instance_id: str
    system_id: str
    user_id: str
    instance_features: FeatureVector = EMPTY_FEATURES
    system_features: FeatureVector = EMPTY_FEATURES
    user_features: FeatureVector = EMPTY_FEATURES
    output_features: FeatureVector = EMPTY_FEATURES
    validity: float = 0.0
    self_confidence: float | None = None

    def __post_init__(self):
        if isinstance(self.t, bool) or not isinstance(self.t, (int, np.integer)) or self.t < 0:
            raise ValidationError(f"timestep must be a non-negative integer, got {self.t!r}")
        if not (0.0 <= self.validity <= 1.0):
            raise ValidationError(f"validity {self.validity!r} outside [0, 1]")
        if self.self_confidence is not None and not (0.0 <= self.self_confidence <= 1.0):
            raise ValidationError(f"self_confidence {self.self_confidence!r} outside [0, 1]")
        _check_prefix(self.instance_features, "i_", "instance")
        _check_prefix(self.system_features, "s_", "system")
        _check_prefix(self.user_features, "u_", "user")
        _check_prefix(self.output_features, "o_", "output")

    @property
    def key(self) -> str:
        """Identifier used to attach externally recorded predictions."""
        return f"{self.t}:{self.instance_id}:{self.system_id}:{self.user_id}"

    @property
    def stream(self) -> tuple[str, str]:
        return (self.system_id, self.user_id)


@dataclass(frozen=True)
class EcosystemHistory:
    """Records sorted by timestep (ties keep input order) plus metadata."""

    records: tuple[InteractionRecord, ...] = ()
    name: str = "history"
    validity_kind: str = "graded"

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        if self.validity_kind not in VALIDITY_KINDS:
            raise ValidationError(f"validity_kind must be one of {VALIDITY_KINDS}, got {self.validity_kind!r}")
        prev = -1
        for n, rec in enumerate(self.records, start=1):
            if rec.t < prev:
                raise ValidationError(f"timesteps must be non-decreasing (t={rec.t} after t={prev})", row=n)
            prev = rec.t
            if self.validity_kind == "binary" and rec.validity not in (0.0, 1.0):
                raise ValidationError(f"binary history has fractional validity {rec.validity!r}", row=n)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[InteractionRecord]:
        return iter(self.records)

    def __getitem__(self, idx):
        return self.records[idx]

    @property
    def timesteps(self) -> tuple[int, ...]:
        return tuple(sorted({r.t for r in self.records}))

    def relation_sets(self) -> dict[int, tuple[InteractionRecord, ...]]:
        """Group records by timestep (the relation set of each step)."""
        groups: dict[int, list[InteractionRecord]] = defaultdict(list)
        for rec in self.records:
            groups[rec.t].append(rec)
        return {t: tuple(recs) for t, recs in groups.items()}

    def validities(self) -> np.ndarray:
        return np.fromiter((r.validity for r in self.records), dtype=float, count=len(self.records))


def make_history(records: Iterable[InteractionRecord], name: str = "history",
                 validity_kind: str | None = None) -> EcosystemHistory:
    """Build a history, stably sorting records by timestep.

    ``validity_kind=None`` infers ``binary`` when every validity is 0 or 1.
    """
    records = sorted(records, key=lambda r: r.t)
    if validity_kind is None:
        validity_kind = infer_validity_kind(r.validity for r in records)
    return EcosystemHistory(tuple(records), name=name, validity_kind=validity_kind)


def infer_validity_kind(validities: Iterable[float]) -> str:
    return "binary" if all(v in (0.0, 1.0) for v in validities) else "graded"


def slice_history(history: EcosystemHistory, t: int) -> EcosystemHistory:
    """Prefix of ``history`` holding every record with timestep ``<= t``."""
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    kept = tuple(r for r in history.records if r.t <= t)
    if len(kept) == len(history.records):
        return history
    return replace(history, records=kept)


# ---------------------------------------------------------------------------
# featurization


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


def _base_entries(record: InteractionRecord, mode: str) -> tuple[tuple[str, float], ...]:
    entries = record.instance_features.entries + record.system_features.entries + record.user_features.entries
    if mode == "reactive":
        if not record.output_features.entries:
            raise SchemaError(
                f"record {record.key} has no output features; the dataset is anticipative-only")
        entries = entries + record.output_features.entries
    return entries


def _history_entries(prior_validities: Sequence[float], prior_count: int) -> tuple[tuple[str, float], ...]:
    mean = sum(prior_validities) / len(prior_validities) if prior_validities else NO_HISTORY_MEAN
    return ((H_MEAN_VALIDITY, float(mean)), (H_PRIOR_COUNT, float(prior_count)))


def featurize(record: InteractionRecord, mode: str = "anticipative", history_window: int | None = None,
              prior: Sequence[InteractionRecord] = ()) -> FeatureVector:
    """Feature vector for one record.

    Anticipative mode concatenates instance, system and user features;
    reactive mode also appends output features.  With ``history_window=w``
    the mean validity of the same system over its last ``w`` records in
    ``prior`` and the count of all its prior records are appended.
    """
    _check_mode(mode)
    entries = _base_entries(record, mode)
    if history_window:
        same = [r for r in prior if r.system_id == record.system_id]
        recent = [r.validity for r in same[-history_window:]]
        entries = entries + _history_entries(recent, len(same))
    return FeatureVector(entries)


@dataclass(frozen=True)
class Dataset:
    """Numeric view of a history: one row per record.

    ``self_confidence`` holds NaN where a record carries none.
    """

    names: tuple[str, ...]
    X: np.ndarray
    v: np.ndarray
    keys: tuple[str, ...]
    t: np.ndarray
    system_ids: tuple[str, ...]
    instance_ids: tuple[str, ...]
    user_ids: tuple[str, ...]
    self_confidence: np.ndarray
    mode: str = "anticipative"
    validity_kind: str = "graded"
    history_window: int | None = None
    _index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {name: j for j, name in enumerate(self.names)})

    def __len__(self) -> int:
        return len(self.v)

    @property
    def binary(self) -> bool:
        return self.validity_kind == "binary"

    def has(self, name: str) -> bool:
        return name in self._index

    def missing(self, names: Iterable[str]) -> tuple[str, ...]:
        return tuple(n for n in names if n not in self._index)

    def columns(self, names: Sequence[str] | None = None) -> np.ndarray:
        """Feature matrix restricted to ``names`` (all columns when ``None``)."""
        if names is None:
            return self.X
        missing = self.missing(names)
        if missing:
            raise SchemaError(f"dataset lacks feature(s): {', '.join(missing)}", missing)
        return self.X[:, [self._index[n] for n in names]]

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=int)
        pick = lambda seq: tuple(seq[i] for i in idx)  # noqa: E731
        return replace(
            self, X=self.X[idx], v=self.v[idx], keys=pick(self.keys), t=self.t[idx],
            system_ids=pick(self.system_ids), instance_ids=pick(self.instance_ids),
            user_ids=pick(self.user_ids), self_confidence=self.self_confidence[idx])

    def with_targets(self, v: np.ndarray) -> "Dataset":
        return replace(self, v=np.asarray(v, dtype=float))

    @classmethod
    def from_history(cls, history: EcosystemHistory, mode: str = "anticipative",
                     history_window: int | None = None) -> "Dataset":
        _check_mode(mode)
        records = history.records
        rows: list[tuple[tuple[str, float], ...]] = []
        if history_window:
            recent: dict[str, deque] = defaultdict(lambda: deque(maxlen=history_window))
            counts: dict[str, int] = defaultdict(int)
        for rec in records:
            entries = _base_entries(rec, mode)
            if history_window:
                window = recent[rec.system_id]
                entries = entries + _history_entries(window, counts[rec.system_id])
                window.append(rec.validity)
                counts[rec.system_id] += 1
            rows.append(entries)

        names: list[str] = []
        seen: set[str] = set()
        for entries in rows:
            for name, _ in entries:
                if name not in seen:
                    seen.add(name)
                    names.append(name)
        index = {name: j for j, name in enumerate(names)}
        X = np.full((len(rows), len(names)), np.nan)
        for r, entries in enumerate(rows):
            if len(entries) != len(names):
                have = {n for n, _ in entries}
                lacking = tuple(n for n in names if n not in have)
                raise SchemaError(f"record {records[r].key} lacks feature(s): {', '.join(lacking)}", lacking)
            for name, value in entries:
                X[r, index[name]] = value

        conf = np.array([np.nan if r.self_confidence is None else r.self_confidence for r in records], dtype=float)
        return cls(
            names=tuple(names), X=X, v=history.validities(),
            keys=tuple(r.key for r in records),
            t=np.array([r.t for r in records], dtype=np.int64),
            system_ids=tuple(r.system_id for r in records),
            instance_ids=tuple(r.instance_id for r in records),
            user_ids=tuple(r.user_id for r in records),
            self_confidence=conf, mode=mode, validity_kind=history.validity_kind,
            history_window=history_window)


# ---------------------------------------------------------------------------
# persistence


def _fmt_real(x: float) -> str:
    # repr gives the shortest string that round-trips (at most 17 significant digits)
    return repr(float(x))


def feature_columns(history: EcosystemHistory) -> list[str]:
    """Feature column order: grouped by role, first appearance within a role."""
    groups: dict[str, list[str]] = {p: [] for p in ROLE_PREFIXES}
    seen: set[str] = set()
    for rec in history.records:
        for vec in (rec.instance_features, rec.system_features, rec.user_features, rec.output_features):
            for name, _ in vec.entries:
                if name not in seen:
                    seen.add(name)
                    groups[name[:2]].append(name)
    return [name for p in ROLE_PREFIXES for name in groups[p]]


def write_history_csv(history: EcosystemHistory, dest: str | os.PathLike | IO[str],
                      comments: Sequence[str] = ()) -> None:
    """Write ``interactions.csv``.  ``comments`` become leading ``#`` lines."""
    if hasattr(dest, "write"):
        _write_csv(history, dest, comments)
        return
    with open(dest, "w", encoding="utf-8", newline="") as fh:
        _write_csv(history, fh, comments)


def _write_csv(history: EcosystemHistory, fh: IO[str], comments: Sequence[str]) -> None:
    for line in comments:
        fh.write(f"# {line}\n")
    feats = feature_columns(history)
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(list(FIXED_COLUMNS) + feats)
    for rec in history.records:
        values: dict[str, float] = {}
        for vec in (rec.instance_features, rec.system_features, rec.user_features, rec.output_features):
            values.update(vec.entries)
        conf = "" if rec.self_confidence is None else _fmt_real(rec.self_confidence)
        row = [str(rec.t), rec.instance_id, rec.system_id, rec.user_id, _fmt_real(rec.validity), conf]
        row += [_fmt_real(values[n]) if n in values else "" for n in feats]
        writer.writerow(row)


def history_to_csv_text(history: EcosystemHistory) -> str:
    buf = io.StringIO()
    _write_csv(history, buf, ())
    return buf.getvalue()


def _parse_real(cell: str, column: str, row: int) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise ParseError(f"column {column!r}: cannot parse {cell!r} as a number", row) from None
    if not math.isfinite(value):
        raise ParseError(f"column {column!r}: non-finite value {cell!r}", row)
    return value


def load_history(source: str | os.PathLike | IO[str] | Iterable[str], validity_kind: str | None = None,
                 name: str | None = None) -> EcosystemHistory:
    """Parse an ``interactions.csv`` stream into a validated history.

    ``source`` may be a path, an open text file or an iterable of lines.
    Lines starting with ``#`` are ignored.  ``validity_kind=None`` infers the
    kind from the data.
    """
    if isinstance(source, (str, os.PathLike)):
        if name is None:
            name = os.path.splitext(os.path.basename(os.fspath(source)))[0]
        with open(source, encoding="utf-8", newline="") as fh:
            return _load_lines(fh, validity_kind, name)
    return _load_lines(source, validity_kind, name or "history")


def _load_lines(lines: Iterable[str], validity_kind: str | None, name: str) -> EcosystemHistory:
    numbered = ((n, line) for n, line in enumerate(lines, start=1) if not line.lstrip().startswith("#"))
    numbered = ((n, line) for n, line in numbered if line.strip())
    line_numbers: list[int] = []

    def tracked():
        for n, line in numbered:
            line_numbers.append(n)
            yield line

    reader = csv.reader(tracked())
    header = next(reader, None)
    if header is None:
        return EcosystemHistory((), name=name, validity_kind=validity_kind or "graded")
    header = [h.strip() for h in header]
    while header and header[-1] == "":
        header.pop()
    if tuple(header[: len(FIXED_COLUMNS)]) != FIXED_COLUMNS:
        raise ParseError(f"header must start with {','.join(FIXED_COLUMNS)}", line_numbers[-1])
    feats = header[len(FIXED_COLUMNS):]
    for col in feats:
        if col[:2] not in ROLE_PREFIXES:
            raise ParseError(f"feature column {col!r} lacks an i_/s_/u_/o_ prefix", line_numbers[-1])
    if len(set(header)) != len(header):
        raise ParseError("duplicate column names in header", line_numbers[-1])

    records = []
    width = len(header)
    for cells in reader:
        row = line_numbers[-1]
        if len(cells) > width and all(c == "" for c in cells[width:]):
            cells = cells[:width]
        if len(cells) != width:
            raise ParseError(f"expected {width} cells, found {len(cells)}", row)
        try:
            t = int(cells[0])
        except ValueError:
            raise ParseError(f"timestep {cells[0]!r} is not an integer", row) from None
        validity = _parse_real(cells[4], "validity", row)
        conf = None if cells[5] == "" else _parse_real(cells[5], "self_confidence", row)
        groups: dict[str, list[tuple[str, float]]] = {p: [] for p in ROLE_PREFIXES}
        for col, cell in zip(feats, cells[len(FIXED_COLUMNS):]):
            if cell != "":
                groups[col[:2]].append((col, _parse_real(cell, col, row)))
        try:
            records.append(InteractionRecord(
                t=t, instance_id=cells[1], system_id=cells[2], user_id=cells[3],
                instance_features=FeatureVector(tuple(groups["i_"])),
                system_features=FeatureVector(tuple(groups["s_"])),
                user_features=FeatureVector(tuple(groups["u_"])),
                output_features=FeatureVector(tuple(groups["o_"])),
                validity=validity, self_confidence=conf))
        except ValidationError as exc:
            raise ValidationError(str(exc), row) from None
        if validity_kind == "binary" and validity not in (0.0, 1.0):
            raise ValidationError(f"binary history has fractional validity {validity!r}", row)
    if validity_kind is None:
        validity_kind = infer_validity_kind(r.validity for r in records)
    # stable sort keeps the input order of equal timesteps
    records.sort(key=lambda r: r.t)
    return EcosystemHistory(tuple(records), name=name, validity_kind=validity_kind)


def history_to_json(history: EcosystemHistory) -> dict:
    return {
        "metadata": {"name": history.name, "validity_kind": history.validity_kind},
        "records": [
            {
                "t": r.t,
                "instance_id": r.instance_id,
                "system_id": r.system_id,
                "user_id": r.user_id,
                "validity": r.validity,
                "self_confidence": r.self_confidence,
                "instance_features": r.instance_features.as_dict(),
                "system_features": r.system_features.as_dict(),
                "user_features": r.user_features.as_dict(),
                "output_features": r.output_features.as_dict(),
            }
            for r in history.records
        ],
    }


def history_from_json(payload: dict) -> EcosystemHistory:
    meta = payload.get("metadata", {})
    records = []
    for n, item in enumerate(payload.get("records", []), start=1):
        try:
            records.append(InteractionRecord(
                t=int(item["t"]), instance_id=str(item["instance_id"]), system_id=str(item["system_id"]),
                user_id=str(item["user_id"]), validity=float(item["validity"]),
                self_confidence=None if item.get("self_confidence") is None else float(item["self_confidence"]),
                instance_features=FeatureVector.of(item.get("instance_features", {})),
                system_features=FeatureVector.of(item.get("system_features", {})),
                user_features=FeatureVector.of(item.get("user_features", {})),
                output_features=FeatureVector.of(item.get("output_features", {}))))
        except KeyError as exc:
            raise ParseError(f"missing field {exc.args[0]!r}", n) from None
        except ValidationError as exc:
            raise ValidationError(str(exc), n) from None
    return make_history(records, name=meta.get("name", "history"), validity_kind=meta.get("validity_kind"))


def save_history_json(history: EcosystemHistory, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(history_to_json(history), fh, indent=1)
        fh.write("\n")


def load_history_json(path: str | os.PathLike) -> EcosystemHistory:
    with open(path, encoding="utf-8") as fh:
        return history_from_json(json.load(fh))
