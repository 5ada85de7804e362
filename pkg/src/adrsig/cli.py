"""Command line entry point: ``adrsig synth | detect | report``.

Every detect/report flag can also be given in an INI file passed with
``--config`` (section ``[detect]`` or ``[report]``, keys spelled like the
flags with underscores).  Flags win over the file.
"""
from __future__ import annotations

import argparse
import configparser
import logging
import os
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from adrsig import kernels
from adrsig.errors import AdrError, ConfigError, IoError
from adrsig.featmat import write_grouped, write_triplets
from adrsig.ingest import load_records
from adrsig.pipeline import detect, make_report
from adrsig.readcode import CodeDictionary
from adrsig.signal import emit_report, read_stats, write_stats
from adrsig.synth import generate, load_spec

_REMAINDER = {"merge": "merge_last", "merge_last": "merge_last", "drop": "drop"}
_TEST = {"paired": "paired", "two-sample": "two_sample", "two_sample": "two_sample"}
_MODE = {"p": "by_p", "r1": "by_r1", "by_p": "by_p", "by_r1": "by_r1"}


def _bool(text):
    if isinstance(text, bool):
        return text
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _opt_int(text):
    if text is None or str(text).strip() in ("", "none"):
        return None
    return int(text)


@dataclass
class RunConfig:
    patients: str | None = None
    prescriptions: str | None = None
    events: str | None = None
    stats: str | None = None
    dict: str | None = None
    dict_header: bool = False
    drug_codes: str = ""
    level: int = 5
    window_days: int = 60
    group_size: int = 100
    remainder: str = "merge_last"
    test: str = "paired"
    alpha: float = 0.05
    mode: str = "by_p"
    prefix: str = ""
    top_k: int | None = None
    out: str | None = None
    stats_out: str | None = None
    dump_dir: str | None = None
    format: str = "tsv"
    hide_p: bool = False
    threads: int = 0
    strict: bool = False
    delimiter: str = ","
    min_registration_days: int = 365
    keep_terms: bool = False

    def validate(self) -> None:
        if self.level not in (3, 5):
            raise ConfigError("level must be 5 (codes at levels 1-5) or 3 (levels 1-3)")
        if self.window_days < 1:
            raise ConfigError("window_days must be >= 1")
        if self.group_size < 1:
            raise ConfigError("group_size must be >= 1")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError("alpha must be in [0, 1]")
        if self.top_k is not None and self.top_k < 0:
            raise ConfigError("top_k must be >= 0")
        if self.threads < 0:
            raise ConfigError("threads must be >= 0")
        if self.min_registration_days < 0:
            raise ConfigError("min_registration_days must be >= 0")
        if self.format not in ("tsv", "text"):
            raise ConfigError("format must be tsv or text")
        if len(self.delimiter) != 1:
            raise ConfigError("delimiter must be a single character")

    @property
    def drug_code_set(self) -> set[str]:
        return {c.strip() for c in self.drug_codes.split(",") if c.strip()}


_CONVERT = {
    "dict_header": _bool,
    "level": int,
    "window_days": int,
    "group_size": int,
    "remainder": lambda v: _choice(_REMAINDER, v, "remainder"),
    "test": lambda v: _choice(_TEST, v, "test"),
    "alpha": float,
    "mode": lambda v: _choice(_MODE, v, "mode"),
    "top_k": _opt_int,
    "hide_p": _bool,
    "threads": int,
    "strict": _bool,
    "min_registration_days": int,
    "keep_terms": _bool,
}


def _choice(table, value, name):
    try:
        return table[str(value).strip()]
    except KeyError:
        raise ConfigError(f"bad value {value!r} for {name}; choose from {sorted(table)}") from None


def _from_config_file(path, section) -> dict:
    if not Path(path).is_file():
        raise IoError(f"config file not found: {path}")
    cp = configparser.ConfigParser()
    try:
        cp.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not cp.has_section(section):
        return {}
    known = {f.name for f in fields(RunConfig)}
    out = {}
    for key, value in cp[section].items():
        key = key.replace("-", "_")
        if key not in known:
            raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
        out[key] = value
    return out


def effective_config(args: argparse.Namespace, section: str) -> RunConfig:
    values: dict = {}
    if args.config:
        values.update(_from_config_file(args.config, section))
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    for key, conv in _CONVERT.items():
        if key in values:
            try:
                values[key] = conv(values[key])
            except ValueError as exc:
                if isinstance(exc, ConfigError):
                    raise
                raise ConfigError(f"bad value for {key}: {values[key]!r}") from None
    cfg = RunConfig(**values)
    if cfg.threads == 0:
        cfg.threads = os.cpu_count() or 1
    cfg.validate()
    return cfg


def _echo(cfg: RunConfig, keys) -> None:
    d = asdict(cfg)
    for k in keys:
        print(f"config: {k}={d[k]}", file=sys.stderr)


def _add_report_flags(p):
    p.add_argument("--dict", help="two-column code/description file (tab separated)")
    p.add_argument("--dict-header", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--alpha", type=float)
    p.add_argument("--mode", choices=["p", "r1"])
    p.add_argument("--prefix", help="keep only codes starting with this prefix")
    p.add_argument("--top-k", type=int)
    p.add_argument("--out", help="report path (default: stdout)")
    p.add_argument("--format", choices=["tsv", "text"])
    p.add_argument("--hide-p", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--config", help="INI file with default values for these flags")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adrsig", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("synth", help="generate a synthetic cohort")
    ps.add_argument("spec", help="INI file with a [synth] section")
    ps.add_argument("--out-dir", default=".", help="directory for the generated files")

    pd = sub.add_parser("detect", help="run the detection pipeline")
    pd.add_argument("--patients")
    pd.add_argument("--prescriptions")
    pd.add_argument("--events")
    pd.add_argument("--drug-codes", help="comma separated drug codes defining exposure")
    pd.add_argument("--level", type=int, choices=[5, 3])
    pd.add_argument("--window-days", type=int)
    pd.add_argument("--group-size", type=int)
    pd.add_argument("--remainder", choices=["merge", "drop"])
    pd.add_argument("--test", choices=["paired", "two-sample"])
    pd.add_argument("--threads", type=int, help="worker threads (default: all cores)")
    pd.add_argument("--strict", action=argparse.BooleanOptionalAction, default=None)
    pd.add_argument("--delimiter")
    pd.add_argument("--min-registration-days", type=int)
    pd.add_argument("--keep-terms", action=argparse.BooleanOptionalAction, default=None,
                    help="count distinct term codes as distinct events at level 5")
    pd.add_argument("--stats-out", help="stats dump path (default: next to --out)")
    pd.add_argument("--dump-dir", help="write sparse matrix and grouped count dumps here")
    _add_report_flags(pd)

    pr = sub.add_parser("report", help="re-rank an existing stats dump")
    pr.add_argument("--stats", help="stats dump written by detect")
    _add_report_flags(pr)
    return parser


def _load_dict(cfg: RunConfig) -> CodeDictionary:
    if not cfg.dict:
        return CodeDictionary()
    return CodeDictionary.load(cfg.dict, header=cfg.dict_header)


def _write_report(cfg: RunConfig, stats) -> None:
    report = make_report(stats, cfg.mode, cfg.alpha, cfg.prefix or None, cfg.top_k)
    emit_report(report, _load_dict(cfg), cfg.out, "tsv" if cfg.format == "tsv" else "aligned_text", not cfg.hide_p)
    print(f"report: {len(report)} signal(s) at alpha={cfg.alpha}", file=sys.stderr)


def run_synth(args) -> int:
    spec = load_spec(args.spec)
    paths = generate(spec, args.out_dir)
    for name, path in paths.items():
        print(f"wrote {name}: {path}", file=sys.stderr)
    return 0


def run_detect(args) -> int:
    cfg = effective_config(args, "detect")
    for name in ("patients", "prescriptions", "events"):
        if not getattr(cfg, name):
            raise ConfigError(f"--{name} is required")
    if not cfg.drug_code_set:
        raise ConfigError("--drug-codes is required")
    _echo(cfg, [f.name for f in fields(RunConfig) if f.name != "stats"])
    print(f"kernels: {kernels.BACKEND}", file=sys.stderr)
    records = load_records(cfg.patients, cfg.prescriptions, cfg.events, cfg.delimiter, cfg.strict)
    if records.total_rejects:
        print(f"rejected lines: {dict(sorted(records.rejects.items()))}", file=sys.stderr)
    result = detect(
        records,
        cfg.drug_code_set,
        min_registration_days=cfg.min_registration_days,
        level=cfg.level,
        window_days=cfg.window_days,
        group_size=cfg.group_size,
        remainder_policy=cfg.remainder,
        variant=cfg.test,
        threads=cfg.threads,
        keep_terms=cfg.keep_terms,
    )
    print(result.summary(), file=sys.stderr)
    stats_out = cfg.stats_out
    if stats_out is None and cfg.out:
        out = Path(cfg.out)
        stats_out = str(out.with_name(out.stem + ".stats.tsv"))
    if stats_out:
        write_stats(result.stats, stats_out)
    if cfg.dump_dir:
        d = Path(cfg.dump_dir)
        d.mkdir(parents=True, exist_ok=True)
        write_triplets(result.before, d / "before_triplets.tsv")
        write_triplets(result.after, d / "after_triplets.tsv")
        write_grouped(result.X, d / "before_grouped.tsv")
        write_grouped(result.Y, d / "after_grouped.tsv")
    _write_report(cfg, result.stats)
    return 0


def run_report(args) -> int:
    cfg = effective_config(args, "report")
    if not cfg.stats:
        raise ConfigError("--stats is required")
    _echo(cfg, ["stats", "dict", "alpha", "mode", "prefix", "top_k", "out", "format", "hide_p"])
    _write_report(cfg, read_stats(cfg.stats))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {"synth": run_synth, "detect": run_detect, "report": run_report}
    try:
        return handlers[args.command](args)
    except AdrError as exc:
        print(f"error[{exc.tag}]: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error[IoError]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
