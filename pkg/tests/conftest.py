import csv
import sys
from datetime import date, timedelta
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from adrsig.ingest import EventRecord, PatientRecord, PrescriptionRecord, RecordSet  # noqa: E402
from adrsig.readcode import parse_readcode  # noqa: E402

DAY0 = date(2010, 1, 1)


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header:
            w.writerow(header)
        w.writerows(rows)
    return path


def make_records(spec, drug="ASP", reg_gap=400):
    """Records from ``{patient_id: (index_day, [(code, offset_days), ...])}``.

    Index days count from DAY0; event offsets are relative to the index date.
    """
    rs = RecordSet()
    for pid, (index_day, events) in spec.items():
        index = DAY0 + timedelta(days=index_day)
        rs.patients.append(PatientRecord(pid, index - timedelta(days=reg_gap)))
        rs.prescriptions.append(PrescriptionRecord(pid, drug, index))
        for code, offset in events:
            rs.events.append(EventRecord(pid, parse_readcode(code), index + timedelta(days=offset)))
    return rs


@pytest.fixture
def write_inputs(tmp_path):
    def _write(records, name="in"):
        d = tmp_path / name
        d.mkdir(exist_ok=True)
        p = write_csv(d / "patients.csv", ("patient_id", "registration_date"),
                      [(r.patient_id, r.registration_date.isoformat()) for r in records.patients])
        rx = write_csv(d / "prescriptions.csv", ("patient_id", "drug_code", "date"),
                       [(r.patient_id, r.drug_code, r.date.isoformat()) for r in records.prescriptions])
        ev = write_csv(d / "events.csv", ("patient_id", "readcode", "date"),
                       [(r.patient_id, str(r.readcode), r.date.isoformat()) for r in records.events])
        return p, rx, ev

    return _write


_ACCEPTANCE = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py::" in report.nodeid:
        _ACCEPTANCE.append((report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}")
