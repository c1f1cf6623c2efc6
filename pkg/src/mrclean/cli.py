"""Command-line interface: one subcommand per stage plus ``run-all``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure. Configuration comes from a JSON file (``--config``) and
``--key=value`` overrides with dotted keys, e.g. ``--ga.window_reps=31``.
``TRIO_THREADS`` caps the BLAS/OpenMP thread pools.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import os
import sys
import time
from pathlib import Path
from typing import Optional

import numpy as np

from . import evaluate as ev
from .cca import CcaParams, CCADenoiser
from .gradient import GaParams, GradientArtifactCorrector, detect_gradient_onsets
from .io import (
    ContainerError,
    ensure_parent,
    load_recording,
    quantize,
    read_markers,
    save_recording,
    write_markers,
    write_table,
)
from .pulse import BcgParams, NoPeaksError, PulseArtifactCorrector, detect_r_peaks
from .recording import MarkerList, Modality
from .synth import SessionConfig, generate_session
from .validation import NotARecordingError

log = logging.getLogger("mrclean")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


class ConfigError(ValueError):
    pass


# Configuration ------------------------------------------------------------------

_frozen = dataclasses.dataclass(frozen=True)


@_frozen
class StageToggles:
    ga: bool = True
    bcg: bool = True
    cca: bool = True


@_frozen
class CcaOptions:
    rho_threshold: float = 0.4
    ridge: float = 1e-8
    max_reject: Optional[int] = None
    reject: Optional[tuple] = None
    window_s: Optional[float] = None

    def __post_init__(self):
        self.params()
        if self.window_s is not None and not self.window_s > 0:
            raise ValueError(f"window_s must be positive, got {self.window_s}")

    def params(self) -> CcaParams:
        return CcaParams(self.rho_threshold, self.ridge, self.max_reject)


@_frozen
class EvalOptions:
    epoch_label: str = "GO"
    pre_s: float = 1.0
    post_s: float = 1.0
    # None: a multiple of the detected gradient period, about 0.5 Hz resolution
    n_fft: Optional[int] = None


@_frozen
class PipelineConfig:
    input: Optional[str] = None
    output: Optional[str] = None
    ga: GaParams = GaParams()
    bcg: BcgParams = BcgParams()
    cca: CcaOptions = CcaOptions()
    evaluation: EvalOptions = EvalOptions()
    stages: StageToggles = StageToggles()
    keep_intermediate: bool = False

    def __post_init__(self):
        if self.input is not None and self.output is not None:
            if Path(self.input).resolve() == Path(self.output).resolve():
                raise ConfigError("input and output paths must differ")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_SECTIONS = {"ga": GaParams, "bcg": BcgParams, "cca": CcaOptions,
             "evaluation": EvalOptions, "stages": StageToggles}


def _build(cls, values: dict, where: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(values) - names
    if unknown:
        raise ConfigError(f"unknown {where} key(s): {', '.join(sorted(unknown))}")
    values = {k: tuple(v) if isinstance(v, list) else v for k, v in values.items()}
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {where}: {exc}") from None


def _unwrap_report(d: dict) -> dict:
    # a run report carries the exact configuration under "config"
    if "config" in d and isinstance(d["config"], dict) and "status" in d:
        return d["config"]
    return d


def pipeline_config_from_dict(d: dict) -> PipelineConfig:
    """Build a :class:`PipelineConfig`; a run report is accepted too."""
    d = dict(_unwrap_report(d))
    # accept the short path keys used on the command line
    for short, full in (("in", "input"), ("out", "output")):
        if short in d:
            d[full] = d.pop(short)
    kwargs = {}
    for key, value in d.items():
        if key in _SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"section {key!r} must be an object")
            kwargs[key] = _build(_SECTIONS[key], value, key)
        else:
            kwargs[key] = value
    return _build(PipelineConfig, kwargs, "config")


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_overrides(tokens) -> dict:
    """``["--ga.window_reps=31", ...]`` to a nested dict."""
    out: dict = {}
    for tok in tokens:
        if not tok.startswith("--") or "=" not in tok:
            raise ConfigError(f"unrecognized argument {tok!r} (overrides use --key=value)")
        key, value = tok[2:].split("=", 1)
        parts = key.replace("-", "_").split(".")
        node = out
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} conflicts with a scalar value")
        node[parts[-1]] = _parse_value(value)
    return out


def _merge(base: dict, extra: dict) -> dict:
    out = dict(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _read_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return data


def load_pipeline_config(args, overrides: dict) -> PipelineConfig:
    d = _unwrap_report(_read_json(args.config)) if args.config else {}
    d = _merge(d, overrides)
    if getattr(args, "input", None):
        d["input"] = args.input
    if getattr(args, "out", None):
        d["output"] = args.out
    return pipeline_config_from_dict(d)


def load_session_config(args, overrides: dict) -> SessionConfig:
    d = _read_json(args.config) if args.config else {}
    d = _merge(d, overrides)
    try:
        return SessionConfig.from_dict(d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid simulation config: {exc}") from None


# Pipeline --------------------------------------------------------------------------

def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _json_safe(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def _gradient_spectrum_bands(rate_hz: float, period: int, n_fft: Optional[int], n: int):
    if n_fft is None:
        n_fft = period * max(int(math.ceil(2 * rate_hz / period)), 1)
    n_fft = min(n_fft, n)
    f0 = rate_hz / period
    n_harm = int(math.floor((rate_hz / 2 - f0) / f0)) if f0 < rate_hz / 2 else 0
    if n_harm < 1:
        return None
    return ev.HarmonicBands(f0, n_harm, n_fft)


def _ga_stage(rec, cfg: PipelineConfig, onsets=None):
    est = GradientArtifactCorrector(**cfg.ga.to_dict()).fit(rec, onsets=onsets)
    return est, quantize(est.transform(rec))


def _bcg_stage(rec, cfg: PipelineConfig, peaks=None):
    b = cfg.bcg
    est = PulseArtifactCorrector(b.delay_s, b.span_fraction, b.window_beats, b.method)
    est.fit(rec, peaks=peaks)
    return est, quantize(est.transform(rec))


def _cca_stage(rec, cfg: PipelineConfig):
    c = cfg.cca
    est = CCADenoiser(c.rho_threshold, c.ridge, c.max_reject,
                      None if c.reject is None else list(c.reject), window_s=c.window_s)
    est.fit(rec)
    return est, quantize(est.transform(rec))


def _erp_peak(rec, opts: EvalOptions):
    if not rec.markers.select(opts.epoch_label):
        return None
    eeg = rec.picks(Modality.EEG)
    ep = ev.epoch(rec, opts.epoch_label, opts.pre_s, opts.post_s)
    if ep.n_trials == 0:
        return None
    return ev.erp_peak_amplitude(ev.average_erp(ep)[eeg])


class StageError(Exception):
    def __init__(self, stage, exc):
        super().__init__(f"{stage}: {exc}")
        self.stage = stage
        self.exc = exc


def run_pipeline(config: PipelineConfig, save: bool = True):
    """Run the enabled stages in the fixed order GA, BCG, CCA.

    Each stage output is rounded to float32, so the result matches running
    the individual subcommands in sequence on saved containers.

    Returns
    -------
    (int, dict)
        Exit status and the run report, which is also written to
        ``<output>/report.json`` when ``save`` is set.
    """
    out_dir = Path(config.output) if config.output else None
    report = {"status": "running", "config": config.to_dict(), "stages": {},
              "completed": [], "outputs": {}}
    t_start = time.perf_counter()
    status = EXIT_OK
    try:
        try:
            rec = load_recording(config.input)
        except (ContainerError, OSError) as exc:
            raise StageError("load", exc) from None
        report["input"] = {"n_channels": rec.n_channels, "n_samples": rec.n_samples,
                           "rate_hz": rec.rate_hz, "n_markers": len(rec.markers)}
        enabled = [s for s in ("ga", "bcg", "cca") if getattr(config.stages, s)]
        if not enabled:
            report["status"] = "no-op"
        current = rec
        eeg = rec.picks(Modality.EEG) if any(c.modality == Modality.EEG for c in rec.channels) else None

        if config.stages.ga:
            try:
                est, after = _ga_stage(current, config)
                info = {"params": config.ga.to_dict(), "n_onsets": len(est.onsets_),
                        "period_samples": est.period_samples_}
                bands = _gradient_spectrum_bands(rec.rate_hz, est.period_samples_,
                                                 config.evaluation.n_fft, rec.n_samples)
                if bands is not None and eeg is not None:
                    info["harmonic_attenuation_db"] = ev.artifact_attenuation(current, after, bands, eeg)
                    info["harmonic_bands"] = dataclasses.asdict(bands)
            except Exception as exc:
                raise StageError("ga", exc) from None
            current = after
            report["stages"]["ga"] = info
            report["completed"].append("ga")
            if save and config.keep_intermediate:
                save_recording(current, out_dir / "after_ga.trio")
                write_markers(est.onsets_, out_dir / "ga_onsets.csv")
                report["outputs"]["after_ga"] = str(out_dir / "after_ga.trio")

        if config.stages.bcg:
            try:
                est, after = _bcg_stage(current, config)
                info = {"params": config.bcg.to_dict(), "n_peaks": len(est.peaks_),
                        "n_suspects": len(est.report_.suspects),
                        "rr_median_s": est.report_.rr_median_s}
                if eeg is not None:
                    lock = ev.CardiacLock(est.peaks_, 0.0, est.report_.rr_median_s * 0.8)
                    info["cardiac_attenuation_db"] = ev.artifact_attenuation(current, after, lock, eeg)
            except Exception as exc:
                raise StageError("bcg", exc) from None
            current = after
            report["stages"]["bcg"] = info
            report["completed"].append("bcg")
            if save and config.keep_intermediate:
                save_recording(current, out_dir / "after_bcg.trio")
                write_markers(est.peaks_, out_dir / "r_peaks.csv")
                report["outputs"]["after_bcg"] = str(out_dir / "after_bcg.trio")

        if config.stages.cca:
            try:
                before_peak = _erp_peak(current, config.evaluation)
                est, after = _cca_stage(current, config)
                info = {"params": dataclasses.asdict(config.cca),
                        "rejected": est.rejected_,
                        "correlations": [r.correlations for r in est.results_],
                        "windows": est.windows_,
                        "erp_peak_before_uv": before_peak,
                        "erp_peak_after_uv": _erp_peak(after, config.evaluation)}
            except Exception as exc:
                raise StageError("cca", exc) from None
            current = after
            report["stages"]["cca"] = info
            report["completed"].append("cca")

        if save:
            save_recording(current, out_dir / "cleaned.trio")
            report["outputs"]["cleaned"] = str(out_dir / "cleaned.trio")
        if report["status"] == "running":
            report["status"] = "ok"
    except StageError as err:
        status = _exit_code_for(err.exc)
        report["status"] = "failed"
        report["failed_stage"] = err.stage
        report["error"] = f"{type(err.exc).__name__}: {err.exc}"
        # anything written so far is intermediate only
        report["partial_outputs"] = sorted(report["outputs"].values())
    report["elapsed_s"] = time.perf_counter() - t_start
    report = _json_safe(report)
    if save and out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "report.json", "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2)
            fh.write("\n")
    return status, report


def _exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, (np.linalg.LinAlgError, FloatingPointError, OverflowError)):
        return EXIT_NUMERICAL
    if isinstance(exc, (ContainerError, OSError, NotARecordingError, NoPeaksError,
                        ValueError, KeyError, IndexError)):
        return EXIT_DATA
    return EXIT_NUMERICAL


# Subcommands ---------------------------------------------------------------------------

def _require(value, flag):
    if not value:
        raise ConfigError(f"{flag} is required")
    return value


def _load_input(cfg: PipelineConfig):
    return load_recording(_require(cfg.input, "--in"))


def _maybe_markers(path) -> Optional[MarkerList]:
    return read_markers(path) if path else None


def cmd_simulate(args, overrides):
    cfg = load_session_config(args, overrides)
    out = Path(_require(args.out, "--out"))
    truth = generate_session(cfg, seed=args.seed)
    save_recording(truth.contaminated, out / "contaminated.trio")
    save_recording(truth.clean_eeg, out / "clean.trio")
    write_markers(truth.true_onsets, out / "truth_markers.csv")
    np.savez(out / "addends.npz", base=truth.base, **truth.addends)
    meta = {"seed": args.seed, "config": cfg.to_dict(),
            "contamination_scale": truth.contamination_scale,
            "mixing_truth": {k: v for k, v in truth.mixing_truth.items() if k != "sources"}}
    with open(out / "truth.json", "w", encoding="utf-8") as fh:
        json.dump(_json_safe(meta), fh, indent=2)
        fh.write("\n")
    log.info("wrote simulated session to %s", out)
    return EXIT_OK


def cmd_ga_detect(args, overrides):
    cfg = load_pipeline_config(args, overrides)
    onsets = detect_gradient_onsets(_load_input(cfg), cfg.ga)
    write_markers(onsets, ensure_parent(_require(args.out, "--out")))
    log.info("%d gradient onsets", len(onsets))
    return EXIT_OK


def cmd_ga_correct(args, overrides):
    cfg = load_pipeline_config(args, overrides)
    _, out = _ga_stage(_load_input(cfg), cfg, onsets=_maybe_markers(args.onsets))
    save_recording(out, _require(args.out, "--out"))
    return EXIT_OK


def cmd_rpeaks(args, overrides):
    cfg = load_pipeline_config(args, overrides)
    report = detect_r_peaks(_load_input(cfg))
    out = ensure_parent(_require(args.out, "--out"))
    write_markers(report.peaks, out)
    suspects = Path(args.suspects) if args.suspects else out.with_name(out.stem + "_suspects.csv")
    idx = [i for i, _ in report.suspects]
    write_table(ensure_parent(suspects), {
        "peak_index": np.array(idx, dtype=np.int64),
        "sample": report.peaks.samples[idx] if idx else np.array([], dtype=np.int64),
        "reason": np.array([r for _, r in report.suspects], dtype=object),
    })
    log.info("%d R-peaks, %d suspect", len(report.peaks), len(report.suspects))
    return EXIT_OK


def cmd_bcg_correct(args, overrides):
    cfg = load_pipeline_config(args, overrides)
    _, out = _bcg_stage(_load_input(cfg), cfg, peaks=_maybe_markers(args.peaks))
    save_recording(out, _require(args.out, "--out"))
    return EXIT_OK


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def cmd_cca_clean(args, overrides):
    if args.rho is not None:
        overrides = _merge(overrides, {"cca": {"rho_threshold": args.rho}})
    if args.reject is not None:
        overrides = _merge(overrides, {"cca": {"reject": args.reject}})
    cfg = load_pipeline_config(args, overrides)
    rec = _load_input(cfg)
    est, out = _cca_stage(rec, cfg)
    save_recording(out, _require(args.out, "--out"))
    out_dir = Path(args.out)
    rows = {"window": [], "index": [], "rho": [], "rejected": []}
    for w, (res, rej) in enumerate(zip(est.results_, est.rejected_)):
        for k, rho in enumerate(res.correlations):
            rows["window"].append(w)
            rows["index"].append(k)
            rows["rho"].append(float(rho))
            rows["rejected"].append(k in rej)
    report_path = Path(args.report) if args.report else out_dir.with_name(out_dir.stem + "_components.csv")
    write_table(ensure_parent(report_path), {k: np.array(v, dtype=object) for k, v in rows.items()})
    if args.components:
        eeg = rec.picks(Modality.EEG)
        cols = {"sample": np.arange(rec.n_samples)}
        for w, ((start, stop), res) in enumerate(zip(est.windows_, est.results_)):
            comps = res.eeg_components(rec.data[eeg, start:stop])
            for k in range(comps.shape[0]):
                cols.setdefault(f"u{k}", np.zeros(rec.n_samples))[start:stop] = comps[k]
        write_table(ensure_parent(args.components), cols)
    log.info("rejected components %s", est.rejected_)
    return EXIT_OK


def cmd_epoch_erp(args, overrides):
    cfg = load_pipeline_config(args, overrides)
    rec = _load_input(cfg)
    opts = cfg.evaluation
    label = args.label or opts.epoch_label
    ep = ev.epoch(rec, label, opts.pre_s, opts.post_s)
    erp = ev.average_erp(ep, baseline=tuple(args.baseline) if args.baseline else None)
    ev.write_erp_csv(ensure_parent(_require(args.out, "--out")), erp, ep.times_s, rec.ch_names)
    if args.truth:
        truth = load_recording(args.truth)
        tep = ev.epoch(truth, label, opts.pre_s, opts.post_s, markers=rec.markers)
        terp = ev.average_erp(tep, baseline=tuple(args.baseline) if args.baseline else None)
        picks = rec.picks(truth.ch_names)
        summary = ev.erp_channel_correlation(erp[picks], terp)
        corr_path = args.corr_out or str(Path(args.out).with_name(Path(args.out).stem + "_corr.csv"))
        ev.write_correlation_csv(ensure_parent(corr_path), summary, truth.ch_names)
        log.info("ERP correlation mean %.3f (sd %.3f)", summary.mean, summary.sd)
    return EXIT_OK


def cmd_spectra(args, overrides):
    cfg = load_pipeline_config(args, overrides)
    rec = _load_input(cfg)
    picks = rec.picks(args.channels or "all")
    spectra = {rec.ch_names[i]: ev.magnitude_spectrum(rec.data[i], rec.rate_hz, args.n_fft)
               for i in picks}
    ev.write_spectra_csv(ensure_parent(_require(args.out, "--out")), spectra)
    return EXIT_OK


def cmd_drift(args, overrides):
    if args.input:
        rec = load_recording(args.input)
        start, stop = rec.markers.select(args.start_label), rec.markers.select(args.stop_label)
        if not start or not stop:
            raise ValueError(f"need {args.start_label} and {args.stop_label} markers for the trigger span")
        span = (stop.samples[-1] - start.samples[0]) / rec.rate_hz
    elif args.span is not None:
        span = args.span
    else:
        raise ConfigError("give --span or --in with scanner start/stop markers")
    drift = ev.estimate_drift(args.frames, args.frame_period, span, reference=args.reference)
    result = {"drift_ms_per_s": drift, "span_s": span, "frames": args.frames,
              "frame_period_s": args.frame_period, "reference": args.reference,
              "exceeds_frame": ev.drift_exceeds_frame(drift, args.frame_period)}
    _emit_json(result, args.out)
    return EXIT_OK


def _load_array(path):
    path = str(path)
    if path.endswith(".npy"):
        return np.load(path)
    return np.loadtxt(path, delimiter=",", ndmin=2)


def cmd_snr(args, overrides):
    image = _load_array(args.image)
    value = ev.roi_snr(image, _load_array(args.roi) != 0, _load_array(args.noise) != 0)
    _emit_json({"snr": value}, args.out)
    return EXIT_OK


def cmd_run_all(args, overrides):
    if args.keep_intermediate:
        overrides = _merge(overrides, {"keep_intermediate": True})
    cfg = load_pipeline_config(args, overrides)
    _require(cfg.input, "--in")
    _require(cfg.output, "--out")
    status, report = run_pipeline(cfg)
    if status != EXIT_OK:
        log.error("run failed in stage %s: %s", report.get("failed_stage"), report.get("error"))
    else:
        log.info("run %s in %.1f s", report["status"], report["elapsed_s"])
    return status


def _emit_json(obj, out):
    text = json.dumps(_json_safe(obj), indent=2)
    if out:
        with open(ensure_parent(out), "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)


# Parser ------------------------------------------------------------------------------------

def _common(p, need_in=True):
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--config", help="JSON configuration file")
    p.add_argument("--out", help="output path")
    if need_in:
        p.add_argument("--in", dest="input", help="input TRIO container")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mrclean",
        description="Artifact suppression for EEG/EMG/EOG/ECG recorded during real-time MRI.",
        epilog="Any configuration field can be overridden with --section.key=value.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic session with ground truth")
    _common(p, need_in=False)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ga-detect", help="detect gradient artifact onsets (markers CSV)")
    _common(p)
    p.set_defaults(func=cmd_ga_detect)

    p = sub.add_parser("ga-correct", help="subtract the gradient artifact")
    _common(p)
    p.add_argument("--onsets", help="markers CSV overriding onset detection")
    p.set_defaults(func=cmd_ga_correct)

    p = sub.add_parser("rpeaks", help="detect R-peaks (markers CSV plus suspects CSV)")
    _common(p)
    p.add_argument("--suspects", help="suspect-beat report path (default <out>_suspects.csv)")
    p.set_defaults(func=cmd_rpeaks)

    p = sub.add_parser("bcg-correct", help="subtract the pulse artifact")
    _common(p)
    p.add_argument("--peaks", help="reviewed R-peak markers CSV overriding detection")
    p.set_defaults(func=cmd_bcg_correct)

    p = sub.add_parser("cca-clean", help="remove reference-correlated CCA components")
    _common(p)
    p.add_argument("--rho", type=float, default=None, help="rejection threshold (default 0.4)")
    p.add_argument("--reject", type=_int_list, default=None,
                   help="explicit component indices, e.g. 0,2,4")
    p.add_argument("--report", help="component report CSV (default <out stem>_components.csv)")
    p.add_argument("--components", help="write EEG component time courses to this CSV")
    p.set_defaults(func=cmd_cca_clean)

    p = sub.add_parser("epoch-erp", help="epoch around markers and write the ERP")
    _common(p)
    p.add_argument("--label", help="marker label (default from config, GO)")
    p.add_argument("--baseline", type=float, nargs=2, metavar=("START", "STOP"),
                   help="baseline window in seconds relative to the marker")
    p.add_argument("--truth", help="clean TRIO container to correlate against")
    p.add_argument("--corr-out", help="correlation CSV path")
    p.set_defaults(func=cmd_epoch_erp)

    p = sub.add_parser("spectra", help="Welch magnitude spectra per channel")
    _common(p)
    p.add_argument("--n-fft", type=int, default=10000, help="segment length (default 10000)")
    p.add_argument("--channels", nargs="+", help="channel names or modalities")
    p.set_defaults(func=cmd_spectra)

    p = sub.add_parser("drift", help="EEG/MRI clock drift in ms/s")
    _common(p)
    p.add_argument("--frames", type=int, required=True, help="number of MRI video frames")
    p.add_argument("--frame-period", type=float, default=ev.FRAME_PERIOD_S,
                   help="frame period in seconds (default 0.0101)")
    p.add_argument("--span", type=float, help="EEG trigger span in seconds")
    p.add_argument("--start-label", default="SCAN_START")
    p.add_argument("--stop-label", default="SCAN_STOP")
    p.add_argument("--reference", choices=("mri", "eeg"), default="mri",
                   help="duration used as the denominator")
    p.set_defaults(func=cmd_drift)

    p = sub.add_parser("snr", help="ROI signal-to-noise ratio of an image")
    _common(p, need_in=False)
    p.add_argument("--image", required=True, help=".npy or CSV image")
    p.add_argument("--roi", required=True, help="ROI mask (.npy or CSV, nonzero = inside)")
    p.add_argument("--noise", required=True, help="noise mask (.npy or CSV)")
    p.set_defaults(func=cmd_snr)

    p = sub.add_parser("run-all", help="GA, BCG and CCA correction with a JSON report")
    _common(p)
    p.add_argument("--keep-intermediate", action="store_true",
                   help="also write the output of each stage")
    p.set_defaults(func=cmd_run_all)
    return parser


def _thread_limit():
    value = os.environ.get("TRIO_THREADS")
    if value is None or value == "":
        return None
    try:
        n = int(value)
    except ValueError:
        raise ConfigError(f"TRIO_THREADS must be a positive integer, got {value!r}") from None
    if n < 1:
        raise ConfigError(f"TRIO_THREADS must be a positive integer, got {value!r}")
    return n


def main(argv=None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        overrides = parse_overrides(extra)
        limit = _thread_limit()
        if limit is None:
            return args.func(args, overrides)
        from threadpoolctl import threadpool_limits
        with threadpool_limits(limits=limit):
            return args.func(args, overrides)
    except ConfigError as exc:
        print(f"mrclean: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (np.linalg.LinAlgError, FloatingPointError, OverflowError) as exc:
        print(f"mrclean: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ContainerError, OSError, NotARecordingError, ValueError, KeyError, IndexError) as exc:
        print(f"mrclean: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
