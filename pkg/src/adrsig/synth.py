"""Seeded synthetic cohorts with injected drug-event associations.

Randomness comes from NumPy's Philox 4x64 counter-based generator.  Each
patient draws from its own stream keyed by ``(seed, patient_index)``;
spec-level choices (code universe, baselines, injected codes) use the key
``(seed, 2**64 - 1)``.  Output therefore depends only on the spec, never on
generation order.

Events are independent per patient, code and day: before the index date a
code fires with its baseline daily probability, after it with the baseline
times its multiplier (capped at 1).  The number of event days in a window is
drawn as Binomial(window, p) and the days as a uniform subset, which is the
same distribution as day-by-day Bernoulli draws.
"""
from __future__ import annotations

import configparser
import csv
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

import numpy as np

from adrsig.errors import InvalidSpec, IoError
from adrsig.featmat import SparseFeatureMatrix
from adrsig.ingest import EventRecord, PatientRecord, PrescriptionRecord, RecordSet
from adrsig.readcode import ReadCode, parse_readcode, render
from adrsig.signal import SignalReport

EPOCH = date(2000, 1, 1)
_SPEC_STREAM = (1 << 64) - 1
_CODE_CHARS = "0123456789ABCDEFGHJKLMNPQRSTUVWXYZabcdefghijkmnpqrstuvwxyz"
_CHAPTERS = "ABCDEFGHJKMN"

FILE_NAMES = {
    "patients": "patients.csv",
    "prescriptions": "prescriptions.csv",
    "events": "events.csv",
    "truth": "truth.tsv",
}


@dataclass(frozen=True)
class SynthSpec:
    seed: int
    n_patients: int
    code_universe: tuple[tuple[ReadCode, float], ...]
    injected: tuple[tuple[ReadCode, float], ...] = ()
    window_days: int = 60
    drug_code: str = "DRUG"

    def __post_init__(self):
        if not 0 <= self.seed < (1 << 64):
            raise InvalidSpec("seed must be a 64-bit unsigned integer")
        if self.n_patients < 1:
            raise InvalidSpec("n_patients must be >= 1")
        if self.window_days < 1:
            raise InvalidSpec("window_days must be >= 1")
        if not self.drug_code:
            raise InvalidSpec("drug_code must be non-empty")
        universe = set()
        for code, p in self.code_universe:
            if not 0.0 <= p <= 1.0:
                raise InvalidSpec(f"baseline probability {p} for {render(code)} outside [0, 1]")
            if code in universe:
                raise InvalidSpec(f"duplicate universe code {render(code)}")
            universe.add(code)
        for code, mult in self.injected:
            if not mult > 0:
                raise InvalidSpec(f"multiplier for {render(code)} must be > 0, got {mult}")
            if code not in universe:
                raise InvalidSpec(f"injected code {render(code)} is not in the code universe")

    @property
    def multipliers(self) -> dict[ReadCode, float]:
        return dict(self.injected)

    @property
    def signal_codes(self) -> list[ReadCode]:
        """Injected codes whose multiplier actually changes the rate."""
        return [c for c, m in self.injected if m != 1.0]


@dataclass(frozen=True)
class DetectionOutcome:
    recovered: frozenset
    ranks: dict = field(default_factory=dict)
    recall: float = 0.0


def _spec_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.array([seed, _SPEC_STREAM], dtype=np.uint64)))


def _patient_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.array([seed, index], dtype=np.uint64)))


def synthetic_codes(n: int) -> list[ReadCode]:
    """``n`` distinct codes, deterministic in ``n``.

    Codes come in families of four sharing a level-3 prefix: one level-4
    code and three level-5 children, so level 1-3 aggregation merges them.
    """
    base = len(_CODE_CHARS)
    out = []
    for i in range(n):
        family, child = divmod(i, 4)
        chapter = _CHAPTERS[family % len(_CHAPTERS)]
        k = family // len(_CHAPTERS)
        if k >= base * base:
            raise InvalidSpec(f"cannot build {n} distinct synthetic codes")
        prefix = chapter + _CODE_CHARS[k // base] + _CODE_CHARS[k % base] + "1"
        out.append(ReadCode(prefix + ("." if child == 0 else _CODE_CHARS[child]), "00"))
    return out


def make_spec(
    seed: int,
    n_patients: int,
    n_codes: int,
    baseline_range: tuple[float, float] = (1e-4, 2e-3),
    n_injected: int = 10,
    multiplier: float = 3.0,
    window_days: int = 60,
    drug_code: str = "DRUG",
) -> SynthSpec:
    """Spec with a generated code universe and randomly chosen injected codes."""
    lo, hi = baseline_range
    if not 0.0 <= lo <= hi <= 1.0:
        raise InvalidSpec(f"bad baseline range {baseline_range}")
    if not 0 <= n_injected <= n_codes:
        raise InvalidSpec("n_injected must be between 0 and n_codes")
    if not multiplier > 0:
        raise InvalidSpec(f"multiplier must be > 0, got {multiplier}")
    rng = _spec_rng(seed)
    codes = synthetic_codes(n_codes)
    probs = rng.uniform(lo, hi, size=n_codes)
    chosen = sorted(rng.choice(n_codes, size=n_injected, replace=False).tolist())
    return SynthSpec(
        seed=seed,
        n_patients=n_patients,
        code_universe=tuple(zip(codes, probs.tolist())),
        injected=tuple((codes[i], float(multiplier)) for i in chosen),
        window_days=window_days,
        drug_code=drug_code,
    )


def _rates(spec: SynthSpec):
    codes = [c for c, _ in spec.code_universe]
    base = np.array([p for _, p in spec.code_universe], dtype=np.float64)
    mult = np.ones(len(codes))
    position = {c: j for j, c in enumerate(codes)}
    for code, m in spec.injected:
        mult[position[code]] = m
    return codes, np.stack([base, np.minimum(1.0, base * mult)])


def _draw_patient(spec: SynthSpec, i: int, rates: np.ndarray):
    """Dates (as day offsets from EPOCH) and per-window event counts for one patient."""
    rng = _patient_rng(spec.seed, i)
    reg = int(rng.integers(0, 3650))
    index = reg + 365 + int(rng.integers(0, 1000))
    repeat = index + int(rng.integers(1, 120))
    counts = rng.binomial(spec.window_days, rates)
    return rng, reg, index, repeat, counts


def simulate(spec: SynthSpec) -> RecordSet:
    """The records :func:`generate` would write, kept in memory."""
    codes, rates = _rates(spec)
    names = [render(c) for c in codes]
    name_rank = np.argsort(np.argsort(np.array(names, dtype=object)))
    w = spec.window_days
    epoch = EPOCH.toordinal()
    day_cache: dict[int, date] = {}

    def day(offset):
        d = day_cache.get(offset)
        if d is None:
            d = day_cache[offset] = date.fromordinal(epoch + offset)
        return d

    rs = RecordSet()
    for i in range(spec.n_patients):
        rng, reg, index, repeat, k = _draw_patient(spec, i, rates)
        pid = f"P{i:07d}"
        rs.patients.append(PatientRecord(pid, day(reg)))
        rs.prescriptions.append(PrescriptionRecord(pid, spec.drug_code, day(index)))
        # a repeat prescription that must not move the index date
        rs.prescriptions.append(PrescriptionRecord(pid, spec.drug_code, day(repeat)))
        side, col = np.nonzero(k)
        if not len(col):
            continue
        kk = k[side, col]
        order = np.argsort(rng.random((len(col), w)), axis=1)
        take = np.arange(w)[None, :] < kk[:, None]
        which = np.repeat(np.arange(len(col)), kk)
        offsets = order[take] + np.where(side[which] == 0, index - w, index)
        cidx = col[which]
        perm = np.lexsort((name_rank[cidx], offsets))
        for o, c in zip(offsets[perm].tolist(), cidx[perm].tolist()):
            rs.events.append(EventRecord(pid, codes[c], day(o)))
    return rs


def simulate_matrices(spec: SynthSpec) -> tuple[SparseFeatureMatrix, SparseFeatureMatrix]:
    """Before/after incidence matrices of the simulated cohort, without records.

    Draws the same per-patient streams as :func:`simulate`, so the result
    equals building level-5 window matrices from the generated files.
    """
    codes, rates = _rates(spec)
    n = spec.n_patients
    index_day = np.empty(n, dtype=np.int64)
    hits = np.zeros((2, n, len(codes)), dtype=bool)
    for i in range(n):
        _, _, index, _, k = _draw_patient(spec, i, rates)
        index_day[i] = index
        hits[:, i, :] = k > 0
    # cohort order is (index date, patient id) and ids sort like indices
    order = np.lexsort((np.arange(n), index_day))
    hits = hits[:, order, :]
    present = hits.any(axis=(0, 1))
    names = [render(c) for c in codes]
    keep = sorted(np.nonzero(present)[0].tolist(), key=lambda j: names[j])
    columns = tuple(codes[j] for j in keep)
    out = []
    for s in range(2):
        rows, cols = np.nonzero(hits[s][:, keep])
        out.append(SparseFeatureMatrix(n, columns, rows.astype(np.int64), cols.astype(np.int64)))
    return out[0], out[1]


def generate(spec: SynthSpec, out_dir) -> dict[str, Path]:
    """Write the ingest input files and a ground-truth file into ``out_dir``."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {out_dir}: {exc}") from exc
    rs = simulate(spec)
    paths = {k: out_dir / v for k, v in FILE_NAMES.items()}
    try:
        _write_csv(paths["patients"], ("patient_id", "registration_date"),
                   ((p.patient_id, p.registration_date.isoformat()) for p in rs.patients))
        _write_csv(paths["prescriptions"], ("patient_id", "drug_code", "date"),
                   ((r.patient_id, r.drug_code, r.date.isoformat()) for r in rs.prescriptions))
        _write_csv(paths["events"], ("patient_id", "readcode", "date"),
                   ((e.patient_id, render(e.readcode), e.date.isoformat()) for e in rs.events))
        _write_csv(paths["truth"], ("code", "multiplier"),
                   ((render(c), repr(m)) for c, m in spec.injected), delimiter="\t")
    except OSError as exc:
        raise IoError(f"cannot write synthetic data: {exc}") from exc
    return paths


def _write_csv(path, header, rows, delimiter=","):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def evaluate(spec: SynthSpec, report: SignalReport) -> DetectionOutcome:
    """Which injected signals the report recovered, and at what rank."""
    targets = {render(c) for c in spec.signal_codes}
    ranks = {render(r.code): r.rank for r in report.rows if render(r.code) in targets and r.p_value < report.alpha}
    recall = len(ranks) / len(targets) if targets else 0.0
    return DetectionOutcome(frozenset(ranks), ranks, recall)


def _parse_pairs(text: str) -> list[tuple[str, float]]:
    out = []
    for item in text.replace("\n", ",").split(","):
        item = item.strip()
        if not item:
            continue
        code, _, value = item.rpartition(":")
        if not code:
            raise InvalidSpec(f"expected CODE:VALUE, got {item!r}")
        try:
            out.append((code.strip(), float(value)))
        except ValueError:
            raise InvalidSpec(f"bad number in {item!r}") from None
    return out


def load_spec(path) -> SynthSpec:
    """Read a spec from an INI file with a ``[synth]`` section.

    Either list the universe explicitly (``universe = CODE:prob, ...`` and
    ``injected = CODE:multiplier, ...``) or generate it with ``n_codes``,
    ``baseline_min``, ``baseline_max``, ``n_injected`` and ``multiplier``.
    """
    path = Path(path)
    if not path.is_file():
        raise IoError(f"spec file not found: {path}")
    cp = configparser.ConfigParser()
    try:
        cp.read(path, encoding="utf-8")
    except (OSError, configparser.Error) as exc:
        raise InvalidSpec(f"cannot parse {path}: {exc}") from exc
    if not cp.has_section("synth"):
        raise InvalidSpec(f"{path}: missing [synth] section")
    sec = cp["synth"]
    try:
        seed = sec.getint("seed", 0)
        n_patients = sec.getint("n_patients", 1000)
        window = sec.getint("window_days", 60)
        drug = sec.get("drug_code", "DRUG").strip()
        if "universe" in sec:
            universe = tuple((parse_readcode(c), p) for c, p in _parse_pairs(sec["universe"]))
            injected = tuple((parse_readcode(c), m) for c, m in _parse_pairs(sec.get("injected", "")))
            return SynthSpec(seed, n_patients, universe, injected, window, drug)
        return make_spec(
            seed=seed,
            n_patients=n_patients,
            n_codes=sec.getint("n_codes", 100),
            baseline_range=(sec.getfloat("baseline_min", 1e-4), sec.getfloat("baseline_max", 2e-3)),
            n_injected=sec.getint("n_injected", 10),
            multiplier=sec.getfloat("multiplier", 3.0),
            window_days=window,
            drug_code=drug,
        )
    except ValueError as exc:
        if isinstance(exc, InvalidSpec):
            raise
        raise InvalidSpec(f"{path}: {exc}") from exc


def null_spec(spec: SynthSpec, seed: int | None = None) -> SynthSpec:
    """Same universe with every multiplier set to 1."""
    return SynthSpec(
        seed=spec.seed if seed is None else seed,
        n_patients=spec.n_patients,
        code_universe=spec.code_universe,
        injected=tuple((c, 1.0) for c, _ in spec.injected),
        window_days=spec.window_days,
        drug_code=spec.drug_code,
    )

