"""Reformatting records, scFv signatures and label derivation."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import IO, Iterable, Optional

logger = logging.getLogger(__name__)

AMINO_ACIDS = "ACDEFGHIKLMNPQRSTVWY"
_AA_SET = frozenset(AMINO_ACIDS)

RECORD_COLUMNS = (
    "record_id",
    "vh_seq",
    "vl_seq",
    "linker_id",
    "orientation",
    "parental_family",
    "campaign",
    "qc_pass",
    "yield_ng_per_ul",
    "sec_main_peak_pct",
)

QC_PASS_THRESHOLD = 0.5
SEC_PURITY_THRESHOLD = 90.0


class DataError(ValueError):
    """Fatal data-integrity problem in an input file."""


class Orientation(str, Enum):
    VH_VL = "VH_VL"
    VL_VH = "VL_VH"


@dataclass(frozen=True)
class ReformatRecord:
    record_id: str
    vh_seq: str
    vl_seq: str
    linker_id: str
    orientation: Orientation
    parental_family: str
    campaign: str
    qc_pass: Optional[int] = None
    yield_ng_per_ul: Optional[float] = None
    sec_main_peak_pct: Optional[float] = None

    @property
    def sig_key(self) -> tuple[str, str, str, str]:
        return (self.vh_seq, self.vl_seq, self.linker_id, self.orientation.value)


@dataclass(frozen=True)
class ScfvSignature:
    vh_seq: str
    vl_seq: str
    linker_id: str
    orientation: Orientation
    parental_family: str
    campaign: str
    qc_mean: Optional[float]
    qc_label: Optional[int]
    yield_mean: Optional[float]
    sec_label: Optional[int]
    replicate_count: int
    sec_mean: Optional[float] = None

    @property
    def sig_key(self) -> tuple[str, str, str, str]:
        return (self.vh_seq, self.vl_seq, self.linker_id, self.orientation.value)

    @property
    def sig_id(self) -> str:
        return signature_id(self.sig_key)

    def to_dict(self) -> dict:
        return {
            "sig_id": self.sig_id,
            "vh_seq": self.vh_seq,
            "vl_seq": self.vl_seq,
            "linker_id": self.linker_id,
            "orientation": self.orientation.value,
            "parental_family": self.parental_family,
            "campaign": self.campaign,
            "qc_mean": self.qc_mean,
            "qc_label": self.qc_label,
            "yield_mean": self.yield_mean,
            "sec_mean": self.sec_mean,
            "sec_label": self.sec_label,
            "replicate_count": self.replicate_count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScfvSignature":
        return cls(
            vh_seq=d["vh_seq"],
            vl_seq=d["vl_seq"],
            linker_id=d["linker_id"],
            orientation=Orientation(d["orientation"]),
            parental_family=d["parental_family"],
            campaign=d["campaign"],
            qc_mean=d.get("qc_mean"),
            qc_label=d.get("qc_label"),
            yield_mean=d.get("yield_mean"),
            sec_label=d.get("sec_label"),
            replicate_count=int(d["replicate_count"]),
            sec_mean=d.get("sec_mean"),
        )


def signature_id(sig_key: tuple[str, str, str, str]) -> str:
    """Short stable identifier for a signature, used to name per-signature files."""
    return hashlib.sha1("|".join(sig_key).encode()).hexdigest()[:16]


def sequence_id(seq: str) -> str:
    return hashlib.sha1(seq.encode()).hexdigest()[:16]


@dataclass
class SignatureSet:
    signatures: list[ScfvSignature]
    family_index: dict[str, list[int]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.family_index:
            self.family_index = build_family_index(self.signatures)

    def __len__(self) -> int:
        return len(self.signatures)

    def __getitem__(self, i: int) -> ScfvSignature:
        return self.signatures[i]

    def __iter__(self):
        return iter(self.signatures)

    @property
    def families(self) -> list[str]:
        return sorted(self.family_index)

    def family_of(self) -> list[str]:
        return [s.parental_family for s in self.signatures]

    def to_jsonl(self, fh: IO[str]) -> None:
        for s in self.signatures:
            fh.write(json.dumps(s.to_dict(), sort_keys=True) + "\n")

    @classmethod
    def from_jsonl(cls, fh: IO[str]) -> "SignatureSet":
        sigs = [ScfvSignature.from_dict(json.loads(line)) for line in fh if line.strip()]
        return cls(sigs)


def build_family_index(signatures: list[ScfvSignature]) -> dict[str, list[int]]:
    index: dict[str, list[int]] = {}
    for i, s in enumerate(signatures):
        index.setdefault(s.parental_family, []).append(i)
    return index


@dataclass(frozen=True)
class RowDiagnostic:
    row: int
    message: str

    def __str__(self) -> str:
        return f"row {self.row}: {self.message}"


def _opt_float(cell: str) -> Optional[float]:
    cell = cell.strip()
    if cell == "":
        return None
    value = float(cell)
    if not math.isfinite(value):
        raise ValueError(f"non-finite value {cell!r}")
    return value


def _check_sequence(name: str, seq: str) -> None:
    if not seq:
        raise ValueError(f"{name} is empty")
    bad = sorted(set(seq) - _AA_SET)
    if bad:
        raise ValueError(f"{name} contains invalid amino-acid letter(s) {','.join(bad)}")


def _parse_row(row: dict[str, str]) -> ReformatRecord:
    vh = row["vh_seq"].strip().upper()
    vl = row["vl_seq"].strip().upper()
    _check_sequence("vh_seq", vh)
    _check_sequence("vl_seq", vl)
    try:
        orientation = Orientation(row["orientation"].strip())
    except ValueError:
        raise ValueError(f"unknown orientation {row['orientation']!r}") from None

    qc = _opt_float(row["qc_pass"])
    if qc is not None:
        if qc not in (0.0, 1.0):
            raise ValueError(f"qc_pass must be 0 or 1, got {row['qc_pass']!r}")
        qc = int(qc)
    yld = _opt_float(row["yield_ng_per_ul"])
    if yld is not None and yld < 0:
        raise ValueError(f"negative yield {yld}")
    sec = _opt_float(row["sec_main_peak_pct"])
    if sec is not None and not 0.0 <= sec <= 100.0:
        raise ValueError(f"sec_main_peak_pct out of [0,100]: {sec}")
    if qc is None and yld is None and sec is None:
        raise ValueError("no target present")

    return ReformatRecord(
        record_id=row["record_id"].strip(),
        vh_seq=vh,
        vl_seq=vl,
        linker_id=row["linker_id"].strip(),
        orientation=orientation,
        parental_family=row["parental_family"].strip(),
        campaign=row["campaign"].strip(),
        qc_pass=qc,
        yield_ng_per_ul=yld,
        sec_main_peak_pct=sec,
    )


def parse_records(
    stream: IO[str] | str,
    diagnostics: Optional[list[RowDiagnostic]] = None,
) -> list[ReformatRecord]:
    """Parse comma-delimited reformatting records.

    Malformed rows are skipped and reported (logged, and appended to
    ``diagnostics`` when a list is passed). Row numbers count the header
    as row 1.

    Raises
    ------
    DataError
        If the header lacks a required column.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    reader = csv.DictReader(stream)
    header = reader.fieldnames or []
    missing = [c for c in RECORD_COLUMNS if c not in header]
    if missing:
        raise DataError(f"missing required column(s): {', '.join(missing)}")

    records: list[ReformatRecord] = []
    for rownum, row in enumerate(reader, start=2):
        try:
            records.append(_parse_row(row))
        except (ValueError, TypeError) as exc:
            diag = RowDiagnostic(rownum, str(exc))
            logger.warning("rejected %s", diag)
            if diagnostics is not None:
                diagnostics.append(diag)
    if not records:
        logger.warning("no records parsed")
    return records


def write_records(records: Iterable[ReformatRecord], fh: IO[str]) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(RECORD_COLUMNS)

    def fmt(v):
        if v is None:
            return ""
        if isinstance(v, float):
            return repr(v)
        return str(v)

    for r in records:
        writer.writerow(
            [
                r.record_id,
                r.vh_seq,
                r.vl_seq,
                r.linker_id,
                r.orientation.value,
                r.parental_family,
                r.campaign,
                fmt(r.qc_pass),
                fmt(r.yield_ng_per_ul),
                fmt(r.sec_main_peak_pct),
            ]
        )


def sec_label(purity_pct: float) -> int:
    """Binary SEC purity label: 1 iff main-peak area is at least 90%."""
    if not 0.0 <= purity_pct <= 100.0 or math.isnan(purity_pct):
        raise ValueError(f"purity must lie in [0, 100], got {purity_pct}")
    return int(purity_pct >= SEC_PURITY_THRESHOLD)


def _mean(values: list[float]) -> Optional[float]:
    return math.fsum(values) / len(values) if values else None


def aggregate_by_signature(records: Iterable[ReformatRecord]) -> SignatureSet:
    """Merge records sharing (VH, VL, linker, orientation) and average targets.

    ``qc_label`` is 1 iff the mean QC outcome is at least 0.5 (ties pass).
    The SEC label is derived from the mean main-peak purity.

    Raises
    ------
    DataError
        If two records with the same signature name different parental families.
    """
    groups: dict[tuple, list[ReformatRecord]] = {}
    for r in records:
        groups.setdefault(r.sig_key, []).append(r)

    signatures = []
    for key in sorted(groups):
        group = groups[key]
        families = {r.parental_family for r in group}
        if len(families) > 1:
            raise DataError(
                f"signature {signature_id(key)} maps to multiple families: {sorted(families)}"
            )
        qc_mean = _mean([float(r.qc_pass) for r in group if r.qc_pass is not None])
        yield_mean = _mean([r.yield_ng_per_ul for r in group if r.yield_ng_per_ul is not None])
        sec_mean = _mean([r.sec_main_peak_pct for r in group if r.sec_main_peak_pct is not None])
        first = group[0]
        signatures.append(
            ScfvSignature(
                vh_seq=first.vh_seq,
                vl_seq=first.vl_seq,
                linker_id=first.linker_id,
                orientation=first.orientation,
                parental_family=first.parental_family,
                campaign=first.campaign,
                qc_mean=qc_mean,
                qc_label=None if qc_mean is None else int(qc_mean >= QC_PASS_THRESHOLD),
                yield_mean=yield_mean,
                sec_label=None if sec_mean is None else sec_label(sec_mean),
                replicate_count=len(group),
                sec_mean=sec_mean,
            )
        )
    return SignatureSet(signatures)


def expand_signatures(sigset: SignatureSet) -> list[ReformatRecord]:
    """One record per signature carrying its aggregated targets.

    ``qc_pass`` holds the (possibly fractional) QC mean, so re-aggregating the
    output reproduces every target and label.
    """
    out = []
    for i, s in enumerate(sigset):
        out.append(
            ReformatRecord(
                record_id=f"sig{i}",
                vh_seq=s.vh_seq,
                vl_seq=s.vl_seq,
                linker_id=s.linker_id,
                orientation=s.orientation,
                parental_family=s.parental_family,
                campaign=s.campaign,
                qc_pass=s.qc_mean,
                yield_ng_per_ul=s.yield_mean,
                sec_main_peak_pct=s.sec_mean,
            )
        )
    return out

