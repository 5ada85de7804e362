"""Significance filtering, ranking and rendering of detected signals."""
from __future__ import annotations

import csv
import io
import math
import sys
from dataclasses import dataclass, replace
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable, Literal, Sequence, TextIO

from adrsig.errors import FormatError, IoError
from adrsig.readcode import CodeDictionary, ReadCode, parse_readcode, render
from adrsig.stats import EventStats

_CENT = Decimal("0.01")

Mode = Literal["by_p", "by_r1", "prefix_filtered"]

_MODE_ALIASES = {"p": "by_p", "by_p": "by_p", "r1": "by_r1", "by_r1": "by_r1"}

HEADER = ("Rank", "Readcode", "MedicalEvent", "NB", "NA", "R1", "R2", "p")
STATS_HEADER = ("code", "N_B", "N_A", "t_stat", "df", "p_value", "R1", "R2", "degenerate")


@dataclass(frozen=True)
class SignalRow:
    rank: int
    code: ReadCode
    N_B: int
    N_A: int
    R1: float
    R2: float
    p_value: float
    t_stat: float = 0.0
    df: float = 0.0
    degenerate: bool = False


@dataclass(frozen=True)
class SignalReport:
    mode: str
    alpha: float
    rows: tuple[SignalRow, ...]
    base_mode: str = ""
    prefix: str = ""

    def __len__(self):
        return len(self.rows)

    def codes(self) -> list[str]:
        return [render(r.code) for r in self.rows]


def normalize_mode(mode: str) -> str:
    try:
        return _MODE_ALIASES[mode]
    except KeyError:
        raise ValueError(f"unknown report mode {mode!r}") from None


def rank_signals(
    stats: Iterable[EventStats], mode: str = "by_p", alpha: float = 0.05, top_k: int | None = None
) -> SignalReport:
    """Keep events with p < alpha and rank them.

    ``by_p`` sorts by ascending p, ``by_r1`` by descending R1; ties fall back
    to the canonical code string.
    """
    mode = normalize_mode(mode)
    kept = [s for s in stats if s.p_value < alpha]
    if mode == "by_p":
        kept.sort(key=lambda s: (s.p_value, render(s.code)))
    else:
        kept.sort(key=lambda s: (-s.R1, render(s.code)))
    if top_k is not None:
        if top_k < 0:
            raise ValueError("top_k must be non-negative")
        kept = kept[:top_k]
    rows = tuple(
        SignalRow(i, s.code, s.N_B, s.N_A, s.R1, s.R2, s.p_value, s.t_stat, s.df, s.degenerate)
        for i, s in enumerate(kept, start=1)
    )
    return SignalReport(mode, alpha, rows, base_mode=mode)


def filter_prefix(report: SignalReport, prefix: str) -> SignalReport:
    """Rows whose 5-character code starts with ``prefix``, re-ranked in order."""
    if not prefix:
        raise ValueError("prefix must be non-empty")
    kept = [r for r in report.rows if r.code.code.startswith(prefix)]
    rows = tuple(replace(r, rank=i) for i, r in enumerate(kept, start=1))
    return SignalReport("prefix_filtered", report.alpha, rows, base_mode=report.base_mode or report.mode, prefix=prefix)


def format_2dp(x: float) -> str:
    """Two-decimal rendering, rounding halves away from zero (3.625 -> 3.63)."""
    if not math.isfinite(x):
        return repr(x)
    return str(Decimal(repr(x)).quantize(_CENT, rounding=ROUND_HALF_UP))


def _fmt_p(p: float) -> str:
    return f"{p:.3e}"


def _cells(row: SignalRow, dictionary: CodeDictionary) -> list[str]:
    return [
        str(row.rank),
        render(row.code),
        dictionary.describe(row.code),
        str(row.N_B),
        str(row.N_A),
        format_2dp(row.R1),
        format_2dp(row.R2),
        _fmt_p(row.p_value),
    ]


def format_report(report: SignalReport, dictionary: CodeDictionary | None = None, fmt: str = "tsv", show_p: bool = True) -> str:
    dictionary = dictionary if dictionary is not None else CodeDictionary()
    lines = [_cells(r, dictionary) for r in report.rows]
    if fmt == "tsv":
        out = ["\t".join(HEADER)]
        out += ["\t".join(cells) for cells in lines]
        return "\n".join(out) + "\n"
    if fmt not in ("text", "aligned_text"):
        raise ValueError(f"unknown report format {fmt!r}")
    header = list(HEADER)
    if not show_p:
        header = header[:-1]
        lines = [cells[:-1] for cells in lines]
    else:
        for cells, r in zip(lines, report.rows):
            if r.degenerate:
                cells[-1] += "*"
    widths = [max(len(h), *(len(c[i]) for c in lines)) if lines else len(h) for i, h in enumerate(header)]
    numeric = {0, 3, 4, 5, 6, 7}

    def fmt_line(cells):
        parts = [c.rjust(w) if i in numeric else c.ljust(w) for i, (c, w) in enumerate(zip(cells, widths))]
        return "  ".join(parts).rstrip()

    out = [fmt_line(header)] + [fmt_line(c) for c in lines]
    if show_p and any(r.degenerate for r in report.rows):
        out.append("* zero-variance difference; p set to 0")
    return "\n".join(out) + "\n"


def emit_report(
    report: SignalReport,
    dictionary: CodeDictionary | None = None,
    sink: str | TextIO | None = None,
    fmt: str = "tsv",
    show_p: bool = True,
) -> None:
    """Write the report to a path or text stream (stdout when ``sink`` is None)."""
    text = format_report(report, dictionary, fmt, show_p)
    if sink is None:
        sys.stdout.write(text)
    elif isinstance(sink, (str, bytes)) or hasattr(sink, "__fspath__"):
        try:
            with open(sink, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        except OSError as exc:
            raise IoError(f"cannot write report {sink}: {exc}") from exc
    else:
        sink.write(text)


def parse_report_tsv(text: str) -> list[dict]:
    reader = csv.reader(io.StringIO(text), delimiter="\t")
    header = next(reader)
    if tuple(header) != HEADER:
        raise FormatError(f"unexpected report header {header}")
    return [dict(zip(header, row)) for row in reader]


def write_stats(stats: Sequence[EventStats], path) -> None:
    """Dump per-event statistics losslessly so reports can be replayed."""
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\t".join(STATS_HEADER) + "\n")
            for s in stats:
                fh.write(
                    "\t".join(
                        (
                            render(s.code),
                            str(s.N_B),
                            str(s.N_A),
                            repr(s.t_stat),
                            repr(s.df),
                            repr(s.p_value),
                            repr(s.R1),
                            repr(s.R2),
                            "1" if s.degenerate else "0",
                        )
                    )
                    + "\n"
                )
    except OSError as exc:
        raise IoError(f"cannot write stats {path}: {exc}") from exc


def read_stats(path) -> list[EventStats]:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise IoError(f"cannot read stats {path}: {exc}") from exc
    if not lines or tuple(lines[0].split("\t")) != STATS_HEADER:
        raise FormatError(f"{path}: not a stats dump")
    out = []
    for lineno, line in enumerate(lines[1:], start=2):
        f = line.split("\t")
        if len(f) != len(STATS_HEADER):
            raise FormatError(f"{path}:{lineno}: expected {len(STATS_HEADER)} fields")
        try:
            out.append(
                EventStats(
                    parse_readcode(f[0]),
                    int(f[1]),
                    int(f[2]),
                    float(f[3]),
                    float(f[4]),
                    float(f[5]),
                    float(f[6]),
                    float(f[7]),
                    f[8] == "1",
                )
            )
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
    return out
