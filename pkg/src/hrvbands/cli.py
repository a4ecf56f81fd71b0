"""
Command-line front end.

    hrvbands analyze INPUT -o OUT [options]
    hrvbands synth SPEC -o OUT [--seed N]
    hrvbands plotdata OUT [-o PLOTDIR]
    hrvbands selftest

Exit status: 0 success, 1 unreadable or invalid input, 2 invalid
configuration, 3 internal invariant violation.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from . import __version__
from .ingest import (FORMATS, POLICIES, RRFormatError, UniformSeries, clean_artifacts, parse_rr,
                     resample)
from .segmentation import (K_MAX, MIN_SEGMENT_LENGTH, STABILITY_FRACTION, parse_clock,
                           index_to_clock, penalty_path, report_csv, report_rows, report_text,
                           select_segmentation)
from .synth import SpecError, dumps_spec, generate, load_spec, planted_truth
from .transform import wavelet_coefficients
from .wavelets import DEFAULT_BANDS, DEFAULT_HALF_WIDTH, BandSpec, fit_wavelet

log = logging.getLogger("hrvbands")

EXIT_INPUT, EXIT_CONFIG, EXIT_INVARIANT = 1, 2, 3
INPUT_FORMATS = FORMATS + ("uniform",)
FAMILIES = ("gabor", "daubechies")


class ConfigError(ValueError):
    pass


class InputError(ValueError):
    pass


class InvariantError(RuntimeError):
    pass


def _default_bands():
    return [{"lo": b.lo, "hi": b.hi, "name": b.name} for b in DEFAULT_BANDS]


@dataclass
class RunConfig:
    input: Optional[str] = None
    format: str = "peak-times"
    bands: List[dict] = field(default_factory=_default_bands)
    family: str = "gabor"
    sample_step: float = 0.25
    b_step: float = 1.0
    half_width: float = DEFAULT_HALF_WIDTH
    vanishing_moments: int = 6
    k_max: int = K_MAX
    min_segment_length: int = MIN_SEGMENT_LENGTH
    stability_fraction: float = STABILITY_FRACTION
    artifact_policy: str = "linear"
    recording_start: Optional[str] = None
    squared: bool = False
    include_edges: bool = False
    workers: int = 1
    output: Optional[str] = None
    seed: int = 0

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config: top level must be an object")
        known = {f.name for f in dataclasses.fields(cls)}
        for key in data:
            if key.replace("-", "_") not in known:
                raise ConfigError(f"config: unknown field {key!r}")
        cfg = cls(**{k.replace("-", "_"): v for k, v in data.items()})
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def band_specs(self) -> List[BandSpec]:
        return [BandSpec(float(b["lo"]), float(b["hi"]), str(b.get("name") or f"band{i}"))
                for i, b in enumerate(self.bands)]

    def validate(self):
        def num(name, kind=float, lo=None, strict=True):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"{name}: expected a number, got {v!r}")
            if kind is int and int(v) != v:
                raise ConfigError(f"{name}: expected an integer, got {v!r}")
            if not math.isfinite(v):
                raise ConfigError(f"{name}: must be finite")
            if lo is not None and (v <= lo if strict else v < lo):
                raise ConfigError(f"{name}: must be {'>' if strict else '>='} {lo}, got {v!r}")
            setattr(self, name, kind(v))

        if self.format not in INPUT_FORMATS:
            raise ConfigError(f"format: must be one of {INPUT_FORMATS}, got {self.format!r}")
        if self.family not in FAMILIES:
            raise ConfigError(f"family: must be one of {FAMILIES}, got {self.family!r}")
        if self.artifact_policy not in POLICIES:
            raise ConfigError(f"artifact_policy: must be one of {POLICIES}, got {self.artifact_policy!r}")
        num("sample_step", lo=0)
        num("b_step", lo=0)
        num("half_width", lo=0)
        num("vanishing_moments", int, lo=2, strict=False)
        if self.vanishing_moments > 10:
            raise ConfigError("vanishing_moments: must be <= 10")
        num("k_max", int, lo=1, strict=False)
        num("min_segment_length", int, lo=1, strict=False)
        num("stability_fraction", lo=0)
        num("workers", int, lo=1, strict=False)
        num("seed", int)
        for name in ("squared", "include_edges"):
            if not isinstance(getattr(self, name), bool):
                raise ConfigError(f"{name}: expected true or false")
        if self.recording_start is not None:
            try:
                parse_clock(self.recording_start)
            except ValueError as exc:
                raise ConfigError(f"recording_start: {exc}") from None
        if not isinstance(self.bands, list) or not self.bands:
            raise ConfigError("bands: expected a non-empty list")
        names = set()
        for i, b in enumerate(self.bands):
            if not isinstance(b, dict) or "lo" not in b or "hi" not in b:
                raise ConfigError(f"bands[{i}]: expected an object with 'lo' and 'hi'")
            for key in ("lo", "hi"):
                v = b[key]
                if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                    raise ConfigError(f"bands[{i}].{key}: expected a number, got {v!r}")
            if not 0 < b["lo"] < b["hi"]:
                raise ConfigError(f"bands[{i}].lo: need 0 < lo < hi, got lo={b['lo']} hi={b['hi']}")
            name = str(b.get("name") or f"band{i}")
            if not name.replace("_", "").replace("-", "").isalnum():
                raise ConfigError(f"bands[{i}].name: {name!r} is not a valid file-name label")
            if name in names:
                raise ConfigError(f"bands[{i}].name: duplicate band name {name!r}")
            names.add(name)
        ordered = sorted(self.bands, key=lambda b: b["lo"])
        for a, b in zip(ordered, ordered[1:]):
            if b["lo"] < a["hi"]:
                raise ConfigError(f"bands: {a.get('name')} and {b.get('name')} overlap")
        top = max(b["hi"] for b in self.bands)
        if self.format != "uniform" and self.sample_step > 0.5 / top:
            raise ConfigError(
                f"sample_step: {self.sample_step} s exceeds the Nyquist limit {0.5 / top} s "
                f"for the highest band edge {top} Hz")


# config assembly: defaults < config file < flags

_FLAG_FIELDS = ("format", "family", "sample_step", "b_step", "half_width", "vanishing_moments",
                "k_max", "min_segment_length", "stability_fraction", "artifact_policy",
                "recording_start", "squared", "include_edges", "workers", "seed")


def _parse_band(text: str) -> dict:
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise ConfigError(f"bands: expected LO:HI[:NAME], got {text!r}")
    try:
        lo, hi = float(parts[0]), float(parts[1])
    except ValueError:
        raise ConfigError(f"bands: cannot parse {text!r}") from None
    return {"lo": lo, "hi": hi, "name": parts[2] if len(parts) == 3 else None}


def build_config(args) -> RunConfig:
    data = {}
    if getattr(args, "config", None):
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"config: cannot read {args.config}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: invalid JSON in {args.config}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config: top level must be an object")
    for name in _FLAG_FIELDS:
        v = getattr(args, name, None)
        if v is not None:
            data[name] = v
    if getattr(args, "band", None):
        bands = [_parse_band(b) for b in args.band]
        for i, b in enumerate(bands):
            if b["name"] is None:
                b["name"] = f"band{i}"
        data["bands"] = bands
    if getattr(args, "input", None):
        data["input"] = args.input
    if getattr(args, "output", None):
        data["output"] = args.output
    try:
        return RunConfig.from_dict(data)
    except TypeError as exc:
        raise ConfigError(f"config: {exc}") from None


# analyze

def load_signal(cfg: RunConfig) -> UniformSeries:
    if not cfg.input:
        raise InputError("no input file given")
    try:
        with open(cfg.input, "r", encoding="utf-8") as fh:
            text = fh.read()
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read {cfg.input}: {exc}") from None
    try:
        if cfg.format == "uniform":
            return UniformSeries.from_csv(text)
        rr = parse_rr(text, cfg.format)
        n_bad = int(rr.artifact_mask.sum())
        if n_bad:
            log.info("%d artifact interval(s), policy %s", n_bad, cfg.artifact_policy)
        return resample(clean_artifacts(rr, cfg.artifact_policy), cfg.sample_step)
    except (RRFormatError, ValueError) as exc:
        raise InputError(f"{cfg.input}: {exc}") from None


@dataclass
class BandResult:
    band: BandSpec
    wavelet: object
    coeffs: object
    positions: np.ndarray    # interior positions that were segmented (s)
    series: np.ndarray       # segmented values
    segmentation: object
    time_offset: int         # grid steps from position b to the wavelet centre
    rows: list


def analyze_band(signal: UniformSeries, band: BandSpec, cfg: RunConfig) -> BandResult:
    w = fit_wavelet(band, cfg.family, cfg.half_width, cfg.vanishing_moments)
    try:
        co = wavelet_coefficients(signal, w, cfg.b_step, cfg.include_edges, cfg.workers)
    except ValueError as exc:
        raise InputError(f"band {band.name}: {exc}") from None
    keep = co.interior
    values = co.modulus[keep] ** 2 if cfg.squared else co.modulus[keep]
    positions = co.positions[keep]
    if len(values) < 2 * cfg.min_segment_length:
        raise InputError(f"band {band.name}: only {len(values)} interior coefficients, "
                         f"too few to segment")
    path = penalty_path(values, cfg.k_max, cfg.min_segment_length)
    seg = select_segmentation(path, cfg.stability_fraction)
    _check_segmentation(seg, len(values), cfg.min_segment_length)
    offset = int(round(w.centre / cfg.b_step))
    first = int(co.grid_index[keep][0]) + offset
    rows = report_rows(seg, band.name, first, cfg.b_step, _start_seconds(cfg))
    return BandResult(band, w, co, positions, values, seg, offset, rows)


def _start_seconds(cfg):
    if cfg.recording_start is None:
        return None
    # clock of grid index 0 = clock of the first sample
    return parse_clock(cfg.recording_start)


def _check_segmentation(seg, n, m):
    tau = (0, *seg.change_points, n)
    if any(b - a < m for a, b in zip(tau[:-1], tau[1:])):
        raise InvariantError("segmentation violates the ordering or minimum-length constraint")
    if int(np.sum(seg.sizes)) != n:
        raise InvariantError("segment sizes do not sum to the series length")


def _summary_rows(res: BandResult, signal: UniformSeries, cfg: RunConfig):
    seg = res.segmentation
    rows = []
    t = signal.times
    for k, (a, b) in enumerate(seg.bounds):
        b0, b1 = res.positions[a], res.positions[b - 1]
        c = res.wavelet.centre
        sel = (t >= b0 + c - 1e-9) & (t < b1 + c + cfg.b_step - 1e-9)
        rr_mean = float(np.mean(signal.values[sel])) if sel.any() else float("nan")
        i0 = int(round(b0 / cfg.b_step)) + res.time_offset
        i1 = int(round(b1 / cfg.b_step)) + res.time_offset
        start = _start_seconds(cfg)
        clk = ("", "") if start is None else (index_to_clock(i0, cfg.b_step, start),
                                              index_to_clock(i1, cfg.b_step, start))
        rows.append((res.band.name, k, f"{b0:.1f}", f"{b1:.1f}", i0, i1, clk[0], clk[1],
                     int(seg.sizes[k]), f"{seg.means[k]:.8e}", f"{seg.variances[k]:.8e}",
                     f"{rr_mean:.6f}"))
    return rows


SUMMARY_HEADER = ("band,segment,b_start,b_end,index_start,index_end,clock_start,clock_end,"
                  "n,modulus_mean,modulus_var,rr_mean")


def run_analyze(cfg: RunConfig) -> Dict[str, str]:
    """All output files as ``{name: text}``; nothing is written here."""
    if not cfg.output:
        raise ConfigError("output: no output directory given")
    signal = load_signal(cfg)
    if cfg.format == "uniform":
        top = max(b.hi for b in cfg.band_specs())
        if signal.step > 0.5 / top + 1e-12:
            raise InputError(f"{cfg.input}: sample step {signal.step} s too coarse for {top} Hz")
    files = {"signal.csv": signal.to_csv()}
    summary = [SUMMARY_HEADER]
    for band in cfg.band_specs():
        t0 = time.perf_counter()
        res = analyze_band(signal, band, cfg)
        log.info("band %s: %d coefficients, K=%d (%.2f s)", band.name, len(res.coeffs),
                 res.segmentation.K, time.perf_counter() - t0)
        files[f"coefficients_{band.name}.csv"] = res.coeffs.to_csv()
        files[f"segmentation_{band.name}.csv"] = report_csv(res.rows)
        files[f"segmentation_{band.name}.txt"] = report_text(res.rows, band.name)
        summary.extend(",".join(map(str, r)) for r in _summary_rows(res, signal, cfg))
    files["summary.csv"] = "\n".join(summary) + "\n"
    files["effective_config.json"] = json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n"
    return files


def write_outputs(outdir: str, files: Dict[str, str]):
    os.makedirs(outdir, exist_ok=True)
    for name in sorted(files):
        path = os.path.join(outdir, name)
        tmp = path + ".tmp"
        with open(tmp, "w", encoding="utf-8", newline="") as fh:
            fh.write(files[name])
        os.replace(tmp, path)


# synth

def run_synth(cfg: RunConfig, spec_path: str) -> Dict[str, str]:
    if not cfg.output:
        raise ConfigError("output: no output directory given")
    try:
        spec = load_spec(spec_path)
    except OSError as exc:
        raise InputError(f"cannot read spec {spec_path}: {exc.strerror}") from None
    except SpecError as exc:
        raise ConfigError(f"spec {spec_path}: {exc}") from None
    series = generate(spec, cfg.seed)
    truth = planted_truth(spec, cfg.b_step)
    return {
        "signal.csv": series.to_csv(),
        "truth.txt": "".join(f"{i}\n" for i in truth),
        "spec.ini": dumps_spec(spec),
        "effective_config.json": json.dumps({"seed": cfg.seed, "b_step": cfg.b_step,
                                             "spec": os.path.abspath(spec_path)},
                                            indent=2, sort_keys=True) + "\n",
    }


# plotdata

def _read_csv(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return list(csv.DictReader(fh))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def run_plotdata(indir: str) -> Dict[str, str]:
    cfg_path = os.path.join(indir, "effective_config.json")
    try:
        with open(cfg_path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {cfg_path}: {exc}") from None
    if "bands" not in cfg:
        raise InputError(f"{cfg_path} is not an analyze configuration")
    b_step = float(cfg.get("b_step", 1.0))
    files = {}
    sig = _read_csv(os.path.join(indir, "signal.csv"))
    files["rr.dat"] = "# t rr\n" + "".join(f"{r['t']} {r['rr']}\n" for r in sig)
    summary = _read_csv(os.path.join(indir, "summary.csv"))
    for i, b in enumerate(cfg["bands"]):
        name = str(b.get("name") or f"band{i}")
        coeffs = _read_csv(os.path.join(indir, f"coefficients_{name}.csv"))
        changes = _read_csv(os.path.join(indir, f"segmentation_{name}.csv"))
        files[f"{name}_modulus.dat"] = "# b modulus edge\n" + "".join(
            f"{r['b']} {r['modulus']} {r['edge']}\n" for r in coeffs)
        files[f"{name}_changes.dat"] = "# t index clock\n" + "".join(
            f"{int(r['index']) * b_step:.1f} {r['index']} {r['clock_time'] or '-'}\n"
            for r in changes)
        segs = [r for r in summary if r["band"] == name]
        lines = ["# b segment_mean"]
        for r in coeffs:
            if r["edge"] == "1":
                continue
            b_val = float(r["b"])
            for s in segs:
                if float(s["b_start"]) - 1e-6 <= b_val <= float(s["b_end"]) + 1e-6:
                    lines.append(f"{r['b']} {s['modulus_mean']}")
                    break
        files[f"{name}_segmeans.dat"] = "\n".join(lines) + "\n"
    return files


# selftest

def run_selftest(out=sys.stdout) -> bool:
    from .synth import two_regime_spec
    from .wavelets import ORTHOSYMPATHETIC, PARASYMPATHETIC, fit_daubechies, fit_gabor

    checks = []

    def check(name, ok, detail=""):
        checks.append(ok)
        print(f"{'PASS' if ok else 'FAIL'} {name} {detail}".rstrip(), file=out)

    for band in (ORTHOSYMPATHETIC, PARASYMPATHETIC):
        for w in (fit_gabor(band), fit_daubechies(band)):
            n = w.norm()
            check(f"unit norm {w.family}/{band.name}", abs(n - 1) < 1e-6, f"{n:.9f}")
            lo, hi = w.freq_support
            check(f"fitted support {w.family}/{band.name}",
                  abs(lo - band.lo) < 1e-9 and abs(hi - band.hi) < 1e-9)
    from .segmentation import optimal_partition
    rng = np.random.default_rng(0)
    x = np.r_[rng.normal(0, 1, 20), rng.normal(5, 1, 20)]
    check("planted mean shift", optimal_partition(x, 2).change_points == (20,))
    spec = two_regime_spec(duration=3600.0, change=1800.0)
    cfg = RunConfig(format="uniform")
    sig = generate(spec, 1)
    res = analyze_band(sig, PARASYMPATHETIC, cfg)
    idx = [r[0] for r in res.rows]
    check("end-to-end change point", len(idx) == 1 and abs(idx[0] - 1800) <= 30, str(idx))
    return all(checks)


# entry point

def _add_common(p):
    p.add_argument("--config", help="JSON config file (flags override it)")
    p.add_argument("-o", "--output", help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hrvbands",
                                 description="Band-limited wavelet energy of RR series and "
                                             "change-point segmentation.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="transform and segment an RR recording")
    a.add_argument("input", nargs="?", help="RR file (peak times, intervals or uniform CSV)")
    _add_common(a)
    a.add_argument("--format", choices=INPUT_FORMATS)
    a.add_argument("--band", action="append", metavar="LO:HI[:NAME]",
                   help="frequency band in Hz; repeat for several (default: the two autonomic bands)")
    a.add_argument("--family", choices=FAMILIES)
    a.add_argument("--sample-step", type=float, dest="sample_step")
    a.add_argument("--b-step", type=float, dest="b_step")
    a.add_argument("--half-width", type=float, dest="half_width", help="Gabor pseudo-support L")
    a.add_argument("--vanishing-moments", type=int, dest="vanishing_moments")
    a.add_argument("--k-max", type=int, dest="k_max")
    a.add_argument("--min-segment-length", type=int, dest="min_segment_length")
    a.add_argument("--stability-fraction", type=float, dest="stability_fraction")
    a.add_argument("--artifact-policy", choices=POLICIES, dest="artifact_policy")
    a.add_argument("--recording-start", dest="recording_start", metavar="HH:MM:SS")
    a.add_argument("--squared", action="store_true", default=None,
                   help="segment |W|^2 instead of |W|")
    a.add_argument("--include-edges", action="store_true", default=None, dest="include_edges")
    a.add_argument("--workers", type=int)

    s = sub.add_parser("synth", help="generate a synthetic piecewise-stationary signal")
    s.add_argument("spec", help="INI signal description")
    _add_common(s)
    s.add_argument("--seed", type=int)
    s.add_argument("--b-step", type=float, dest="b_step")

    p = sub.add_parser("plotdata", help="emit gnuplot data files from analyze outputs")
    p.add_argument("input", help="analyze output directory")
    p.add_argument("-o", "--output", help="destination (default: INPUT/plot)")
    p.add_argument("-v", "--verbose", action="store_true")

    t = sub.add_parser("selftest", help="run quick built-in consistency checks")
    t.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    ap = make_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        if args.command == "analyze":
            cfg = build_config(args)
            files = run_analyze(cfg)
            write_outputs(cfg.output, files)
        elif args.command == "synth":
            cfg = build_config(args)
            files = run_synth(cfg, args.spec)
            write_outputs(cfg.output, files)
        elif args.command == "plotdata":
            files = run_plotdata(args.input)
            write_outputs(args.output or os.path.join(args.input, "plot"), files)
        else:
            return 0 if run_selftest() else EXIT_INVARIANT
    except InputError as exc:
        print(f"hrvbands: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConfigError as exc:
        print(f"hrvbands: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantError as exc:
        print(f"hrvbands: internal error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    return 0


if __name__ == "__main__":
    sys.exit(main())
