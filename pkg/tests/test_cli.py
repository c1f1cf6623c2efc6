import csv
import json

import numpy as np
import pytest

from mrclean.cli import (
    EXIT_CONFIG,
    EXIT_DATA,
    EXIT_OK,
    PipelineConfig,
    main,
    parse_overrides,
    pipeline_config_from_dict,
    run_pipeline,
)
from mrclean.io import load_recording, read_markers

SHORT = ["--protocol.n_trials=3", "--protocol.rest_s=5.0"]


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _same(a, b):
    ra, rb = load_recording(a), load_recording(b)
    return (np.array_equal(ra.data, rb.data) and ra.ch_names == rb.ch_names
            and list(ra.markers) == list(rb.markers))


@pytest.fixture(scope="module")
def sim(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert main(["simulate", "--seed", "3", "--out", str(out)] + SHORT) == EXIT_OK
    return out


def test_simulate_outputs(sim):
    for name in ("contaminated.trio", "clean.trio", "truth_markers.csv", "addends.npz", "truth.json"):
        assert (sim / name).exists()
    meta = json.loads((sim / "truth.json").read_text())
    assert meta["seed"] == 3 and meta["config"]["protocol"]["n_trials"] == 3
    rec = load_recording(sim / "contaminated.trio")
    assert rec.n_channels == 15 and rec.rate_hz == 5000.0


def test_simulate_is_deterministic(sim, tmp_path):
    assert main(["simulate", "--seed", "3", "--out", str(tmp_path)] + SHORT) == EXIT_OK
    for name in ("header.json", "data.f32", "markers.csv"):
        a = (tmp_path / "contaminated.trio" / name).read_bytes()
        assert a == (sim / "contaminated.trio" / name).read_bytes()


def test_run_all_report(sim, tmp_path):
    out = tmp_path / "run"
    code = main(["run-all", "--in", str(sim / "contaminated.trio"), "--out", str(out),
                 "--keep-intermediate"])
    assert code == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert report["status"] == "ok"
    assert report["completed"] == ["ga", "bcg", "cca"]
    assert report["config"]["cca"]["rho_threshold"] == 0.4
    assert report["config"]["ga"]["window_reps"] == 21
    assert report["stages"]["ga"]["n_onsets"] > 0
    assert report["stages"]["bcg"]["n_peaks"] > 0
    assert isinstance(report["stages"]["cca"]["rejected"], list)
    for name in ("cleaned.trio", "after_ga.trio", "after_bcg.trio", "ga_onsets.csv", "r_peaks.csv"):
        assert (out / name).exists()


def test_run_all_equals_subcommands_in_sequence(sim, tmp_path):
    src = str(sim / "contaminated.trio")
    run = tmp_path / "run"
    assert main(["run-all", "--in", src, "--out", str(run)]) == EXIT_OK
    ga, bcg, cca = tmp_path / "ga.trio", tmp_path / "bcg.trio", tmp_path / "cca"
    assert main(["ga-correct", "--in", src, "--out", str(ga)]) == EXIT_OK
    assert main(["bcg-correct", "--in", str(ga), "--out", str(bcg)]) == EXIT_OK
    assert main(["cca-clean", "--in", str(bcg), "--out", str(cca / "cleaned.trio"),
                 "--report", str(cca / "components.csv")]) == EXIT_OK
    assert _same(run / "cleaned.trio", cca / "cleaned.trio")


def test_rerun_from_report_is_bit_identical(sim, tmp_path):
    first = tmp_path / "a"
    assert main(["run-all", "--in", str(sim / "contaminated.trio"), "--out", str(first),
                 "--ga.window_reps=31", "--cca.rho_threshold=0.5"]) == EXIT_OK
    report = json.loads((first / "report.json").read_text())
    assert report["config"]["ga"]["window_reps"] == 31
    cfg = pipeline_config_from_dict(report)
    second = tmp_path / "b"
    status, _ = run_pipeline(PipelineConfig(**{**cfg.__dict__, "output": str(second)}))
    assert status == EXIT_OK
    assert _same(first / "cleaned.trio", second / "cleaned.trio")
    # the report file itself is an accepted --config
    third = tmp_path / "c"
    assert main(["run-all", "--config", str(first / "report.json"), "--out", str(third)]) == EXIT_OK
    assert _same(first / "cleaned.trio", third / "cleaned.trio")


def test_all_stages_off_is_noop(sim, tmp_path):
    out = tmp_path / "noop"
    code = main(["run-all", "--in", str(sim / "contaminated.trio"), "--out", str(out),
                 "--stages.ga=false", "--stages.bcg=false", "--stages.cca=false"])
    assert code == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert report["status"] == "no-op"
    assert _same(out / "cleaned.trio", sim / "contaminated.trio")


def test_missing_input(tmp_path, capsys):
    code = main(["run-all", "--in", str(tmp_path / "nope.trio"), "--out", str(tmp_path / "o")])
    assert code != EXIT_OK
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["status"] == "failed" and report["failed_stage"] == "load"
    code = main(["ga-detect", "--in", str(tmp_path / "nope.trio"), "--out", str(tmp_path / "x.csv")])
    assert code == EXIT_DATA
    assert "nope.trio" in capsys.readouterr().err


@pytest.mark.parametrize("extra", [
    ["--ga.window_reps=4"], ["--bogus=1"], ["--cca.rho_threshold=2"], ["stray"],
])
def test_config_errors_exit_2(sim, tmp_path, extra):
    argv = ["run-all", "--in", str(sim / "contaminated.trio"), "--out", str(tmp_path / "o")]
    assert main(argv + extra) == EXIT_CONFIG


def test_bad_config_file(sim, tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    argv = ["run-all", "--config", str(bad), "--in", str(sim / "contaminated.trio"),
            "--out", str(tmp_path / "o")]
    assert main(argv) == EXIT_CONFIG
    assert "configuration error" in capsys.readouterr().err


def test_same_input_and_output_rejected(sim):
    path = str(sim / "contaminated.trio")
    assert main(["run-all", "--in", path, "--out", path]) == EXIT_CONFIG


def test_config_file_and_override_precedence(sim, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"ga": {"window_reps": 11}, "cca": {"rho_threshold": 0.6}}))
    out = tmp_path / "o"
    assert main(["run-all", "--config", str(cfg), "--in", str(sim / "contaminated.trio"),
                 "--out", str(out), "--cca.rho_threshold=0.45"]) == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert report["config"]["ga"]["window_reps"] == 11
    assert report["config"]["cca"]["rho_threshold"] == 0.45


def test_parse_overrides():
    assert parse_overrides(["--ga.window-reps=31", "--stages.cca=false", "--evaluation.epoch_label=STIM"]) == {
        "ga": {"window_reps": 31}, "stages": {"cca": False}, "evaluation": {"epoch_label": "STIM"}}


def test_ga_detect_matches_truth(sim, tmp_path):
    out = tmp_path / "onsets.csv"
    assert main(["ga-detect", "--in", str(sim / "contaminated.trio"), "--out", str(out)]) == EXIT_OK
    found = read_markers(out)
    truth = read_markers(sim / "truth_markers.csv").select("GA_ONSET")
    np.testing.assert_array_equal(found.samples, truth.samples)


def test_rpeaks_markers_and_suspects(sim, tmp_path):
    ga = tmp_path / "ga.trio"
    assert main(["ga-correct", "--in", str(sim / "contaminated.trio"), "--out", str(ga)]) == EXIT_OK
    out = tmp_path / "peaks.csv"
    assert main(["rpeaks", "--in", str(ga), "--out", str(out)]) == EXIT_OK
    peaks = read_markers(out)
    truth = read_markers(sim / "truth_markers.csv").select("R_PEAK")
    assert set(peaks.labels) == {"R_PEAK"}
    np.testing.assert_array_equal(peaks.samples, truth.samples)
    header = _rows(tmp_path / "peaks_suspects.csv")
    assert isinstance(header, list)
    # reviewed peaks feed back into bcg-correct
    bcg = tmp_path / "bcg.trio"
    assert main(["bcg-correct", "--in", str(ga), "--peaks", str(out), "--out", str(bcg)]) == EXIT_OK


def test_cca_clean_manual_reject_and_report(sim, tmp_path):
    out = tmp_path / "cca"
    comps = tmp_path / "u.csv"
    assert main(["cca-clean", "--in", str(sim / "contaminated.trio"), "--out", str(out / "c.trio"),
                 "--reject", "0,2", "--components", str(comps)]) == EXIT_OK
    rows = _rows(out / "c_components.csv")
    assert [r["rejected"] for r in rows] == ["True", "False", "True", "False", "False"]
    assert all(0.0 <= float(r["rho"]) <= 1.0 for r in rows)
    assert set(_rows(comps)[0]) == {"sample", "u0", "u1", "u2", "u3", "u4"}


def test_epoch_erp_and_spectra(sim, tmp_path):
    erp = tmp_path / "erp.csv"
    assert main(["epoch-erp", "--in", str(sim / "contaminated.trio"), "--out", str(erp),
                 "--truth", str(sim / "clean.trio"), "--baseline", "-0.5", "0"]) == EXIT_OK
    rows = _rows(erp)
    assert len(rows) == 10000 and "FPz" in rows[0]
    corr = _rows(tmp_path / "erp_corr.csv")
    assert [r["channel"] for r in corr][-2:] == ["mean", "sd"]
    spec = tmp_path / "spec.csv"
    assert main(["spectra", "--in", str(sim / "contaminated.trio"), "--out", str(spec),
                 "--channels", "C3", "ECG", "--n-fft", "5000"]) == EXIT_OK
    rows = _rows(spec)
    assert set(rows[0]) == {"freq_hz", "C3", "ECG"} and len(rows) == 2501


def test_drift(sim, tmp_path, capsys):
    assert main(["drift", "--frames", "9900", "--span", "99.16"]) == EXIT_OK
    result = json.loads(capsys.readouterr().out)
    assert result["drift_ms_per_s"] == pytest.approx(8.3, abs=0.05)
    assert result["exceeds_frame"] is False
    out = tmp_path / "d.json"
    assert main(["drift", "--frames", "100", "--in", str(sim / "contaminated.trio"),
                 "--out", str(out)]) == EXIT_OK
    assert json.loads(out.read_text())["span_s"] > 0
    assert main(["drift", "--frames", "100"]) == EXIT_CONFIG


def test_snr(tmp_path, capsys):
    img = np.zeros((8, 8))
    img[:, :4] = np.tile([-2.0, 2.0], (8, 2))
    img[5:7, 5:7] = 5.0
    roi = np.zeros((8, 8))
    roi[5:7, 5:7] = 1
    noise = np.zeros((8, 8))
    noise[:, :4] = 1
    for name, arr in (("img", img), ("roi", roi), ("noise", noise)):
        np.save(tmp_path / f"{name}.npy", arr)
    argv = ["snr", "--image", str(tmp_path / "img.npy"), "--roi", str(tmp_path / "roi.npy"),
            "--noise", str(tmp_path / "noise.npy")]
    assert main(argv) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["snr"] == pytest.approx(2.5)
    np.save(tmp_path / "img.npy", np.ones((8, 8)))
    assert main(argv) == EXIT_DATA
    assert "zero noise deviation" in capsys.readouterr().err


def test_thread_cap(sim, tmp_path, monkeypatch):
    monkeypatch.setenv("TRIO_THREADS", "1")
    assert main(["ga-detect", "--in", str(sim / "contaminated.trio"),
                 "--out", str(tmp_path / "o.csv")]) == EXIT_OK
    monkeypatch.setenv("TRIO_THREADS", "many")
    assert main(["ga-detect", "--in", str(sim / "contaminated.trio"),
                 "--out", str(tmp_path / "o.csv")]) == EXIT_CONFIG


def test_help_exits_cleanly(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    for cmd in ("simulate", "ga-detect", "ga-correct", "rpeaks", "bcg-correct", "cca-clean",
                "epoch-erp", "spectra", "drift", "snr", "run-all"):
        assert cmd in out
