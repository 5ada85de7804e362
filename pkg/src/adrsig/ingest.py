"""Loading and validating the patient, prescription and event files.

All three inputs are delimited UTF-8 text with ISO dates:

    patients       patient_id, registration_date
    prescriptions  patient_id, drug_code, date
    events         patient_id, readcode, date

A header row is optional; it is recognised by its first field.
"""
from __future__ import annotations

import csv
import logging
from collections import Counter
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Iterable, NamedTuple

from adrsig.errors import DuplicatePatientId, EmptyCohort, FormatError, IoError, MalformedCode
from adrsig.readcode import ReadCode, parse_readcode

log = logging.getLogger(__name__)

PATIENT_COLUMNS = ("patient_id", "registration_date")
PRESCRIPTION_COLUMNS = ("patient_id", "drug_code", "date")
EVENT_COLUMNS = ("patient_id", "readcode", "date")


class PatientRecord(NamedTuple):
    patient_id: str
    registration_date: date


class PrescriptionRecord(NamedTuple):
    patient_id: str
    drug_code: str
    date: date


class EventRecord(NamedTuple):
    patient_id: str
    readcode: ReadCode
    date: date


@dataclass
class RecordSet:
    patients: list[PatientRecord] = field(default_factory=list)
    prescriptions: list[PrescriptionRecord] = field(default_factory=list)
    events: list[EventRecord] = field(default_factory=list)
    rejects: Counter = field(default_factory=Counter)

    @property
    def total_rejects(self) -> int:
        return sum(self.rejects.values())


@dataclass(frozen=True)
class Cohort:
    """Eligible exposed patients in grouping order, plus their events.

    ``patients`` holds ``(patient_id, index_date)`` pairs sorted by
    ``(index_date, patient_id)``.
    """

    patients: tuple[tuple[str, date], ...]
    events: tuple[EventRecord, ...]

    @property
    def N(self) -> int:
        return len(self.patients)

    def __len__(self):
        return len(self.patients)


class _Rejected(Exception):
    pass


_date_cache: dict[str, date] = {}


def _parse_date(text: str) -> date:
    d = _date_cache.get(text)
    if d is None:
        if len(text) != 10:
            raise _Rejected(f"bad date {text!r}")
        try:
            d = date.fromisoformat(text)
        except ValueError:
            raise _Rejected(f"bad date {text!r}") from None
        if len(_date_cache) < 200_000:
            _date_cache[text] = d
    return d


def _parse_code(text: str) -> ReadCode:
    try:
        return parse_readcode(text)
    except MalformedCode as exc:
        raise _Rejected(str(exc)) from None


def _read_rows(path, columns, delimiter):
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh, delimiter=delimiter)
        for lineno, row in enumerate(reader, start=1):
            if lineno == 1 and row and row[0].strip() == columns[0]:
                continue
            if not row:
                continue
            yield lineno, row


def _load(path, columns, convert, delimiter, strict, rejects, kind):
    out = []
    n = len(columns)
    for lineno, row in _read_rows(path, columns, delimiter):
        try:
            if len(row) != n:
                raise _Rejected(f"expected {n} fields, got {len(row)}")
            out.append(convert(row))
        except _Rejected as exc:
            if strict:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
            rejects[kind] += 1
    return out


def _patient(row):
    pid = row[0].strip()
    if not pid:
        raise _Rejected("empty patient_id")
    return PatientRecord(pid, _parse_date(row[1].strip()))


def _prescription(row):
    pid, drug = row[0].strip(), row[1].strip()
    if not pid or not drug:
        raise _Rejected("empty patient_id or drug_code")
    return PrescriptionRecord(pid, drug, _parse_date(row[2].strip()))


def _event(row):
    pid = row[0].strip()
    if not pid:
        raise _Rejected("empty patient_id")
    return EventRecord(pid, _parse_code(row[1].strip()), _parse_date(row[2].strip()))


def load_records(patients, prescriptions, events, delimiter: str = ",", strict: bool = False) -> RecordSet:
    """Load the three input files.

    Malformed lines are counted per file in ``RecordSet.rejects``; with
    ``strict`` the first one raises FormatError instead.  A repeated
    patient_id in the patient file always raises DuplicatePatientId.
    """
    rs = RecordSet()
    rs.patients = _load(patients, PATIENT_COLUMNS, _patient, delimiter, strict, rs.rejects, "patients")
    seen = set()
    for p in rs.patients:
        if p.patient_id in seen:
            raise DuplicatePatientId(f"patient_id {p.patient_id!r} appears more than once in {patients}")
        seen.add(p.patient_id)
    rs.prescriptions = _load(
        prescriptions, PRESCRIPTION_COLUMNS, _prescription, delimiter, strict, rs.rejects, "prescriptions"
    )
    rs.events = _load(events, EVENT_COLUMNS, _event, delimiter, strict, rs.rejects, "events")
    for kind, count in rs.rejects.items():
        if count:
            log.warning("%s: %d malformed line(s) rejected", kind, count)
    return rs


def build_cohort(records: RecordSet, drug_codes: Iterable[str], min_registration_days: int = 365) -> Cohort:
    """Select exposed patients registered long enough before first exposure.

    The index date is the earliest prescription whose drug_code is in
    ``drug_codes``; a patient qualifies when
    ``registration_date + min_registration_days <= index_date``.
    """
    drugs = set(drug_codes)
    first: dict[str, date] = {}
    for rx in records.prescriptions:
        if rx.drug_code in drugs:
            cur = first.get(rx.patient_id)
            if cur is None or rx.date < cur:
                first[rx.patient_id] = rx.date
    min_gap = timedelta(days=min_registration_days)
    registered = {p.patient_id: p.registration_date for p in records.patients}
    eligible = []
    for pid, index in first.items():
        reg = registered.get(pid)
        if reg is not None and reg + min_gap <= index:
            eligible.append((index, pid))
    if not eligible:
        raise EmptyCohort("no patient satisfies the exposure and registration rules")
    eligible.sort()
    ids = {pid for _, pid in eligible}
    events = tuple(ev for ev in records.events if ev.patient_id in ids)
    return Cohort(tuple((pid, index) for index, pid in eligible), events)
