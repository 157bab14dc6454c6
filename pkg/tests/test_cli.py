import csv
import io

import numpy as np
import pytest

from proxrate.cli import TRACE_HEADER, fmt, main
from proxrate.instances import save_pgm, synthetic_image


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture(scope="module")
def trace_5000(tmp_path_factory):
    path = tmp_path_factory.mktemp("run") / "trace.csv"
    code = main(["run", "--variant", "fista_canonical", "--step-frac-of-inv-l", "0.9",
                 "--iters", "5000", "--trace-out", str(path)])
    return code, path


def test_run_writes_header_and_all_rows(trace_5000):
    code, path = trace_5000
    assert code == 0
    rows = read_rows(path)
    assert tuple(rows[0]) == TRACE_HEADER
    assert len(rows) == 5002
    assert [int(r[0]) for r in rows[1:]] == list(range(5001))


def test_run_values_round_trip(trace_5000):
    _, path = trace_5000
    for row in read_rows(path)[1:50]:
        for cell in row[1:]:
            assert cell == "NA" or fmt(float(cell)) == cell


def test_run_is_byte_deterministic(tmp_path):
    outs = []
    for name in ("a.csv", "b.csv"):
        path = tmp_path / name
        assert main(["run", "--seed", "3", "--iters", "300", "--trace-out", str(path)]) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_fmt():
    assert fmt(None) == "NA"
    assert fmt(float("nan")) == "NA"
    assert fmt(0.1) == "0.1"
    assert fmt(3) == "3.0"


def test_certificates_none_renders_na(tmp_path):
    path = tmp_path / "t.csv"
    assert main(["run", "--iters", "20", "--certificates", "none", "--trace-out", str(path)]) == 0
    for row in read_rows(path)[1:]:
        assert row[5:] == ["NA"] * 4


def test_no_reference_renders_gap_na(tmp_path):
    path = tmp_path / "t.csv"
    assert main(["run", "--iters", "20", "--ref-eps", "0", "--trace-out", str(path)]) == 0
    rows = read_rows(path)[1:]
    assert all(r[2] == "NA" for r in rows)
    assert all(r[3] != "NA" for r in rows)


def test_outside_hypothesis_no_claim(tmp_path):
    path = tmp_path / "t.csv"
    code = main(["run", "--step-frac-of-inv-l", "3", "--iters", "2000", "--trace-out", str(path)])
    assert code in (3, 5)


def test_start_at_reference_is_constant(tmp_path):
    path = tmp_path / "t.csv"
    assert main(["run", "--x0", "reference", "--iters", "50", "--trace-out", str(path)]) == 0
    rows = read_rows(path)[1:]
    phis = {float(r[1]) for r in rows}
    assert max(phis) - min(phis) <= 1e-12


def test_empty_args_prints_help(capsys):
    assert main([]) == 0
    assert "usage" in capsys.readouterr().out


def test_bad_flag_is_usage_error(capsys):
    with pytest.raises(SystemExit) as info:
        main(["run", "--no-such-flag"])
    assert info.value.code == 1


def test_conflicting_step_flags(capsys):
    with pytest.raises(SystemExit) as info:
        main(["run", "--step-size", "0.1", "--step-frac-of-inv-l", "0.5"])
    assert info.value.code == 1


def test_missing_instance_file_is_io_error(tmp_path):
    assert main(["run", "--instance-in", str(tmp_path / "absent.inst")]) == 2


def test_corrupt_instance_file_is_io_error(tmp_path):
    bad = tmp_path / "bad.inst"
    bad.write_bytes(b"not an instance")
    assert main(["run", "--instance-in", str(bad)]) == 2


def test_gen_and_reload_round_trip(tmp_path):
    inst = tmp_path / "x.inst"
    assert main(["gen", "--seed", "2", "--instance-out", str(inst)]) == 0
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["run", "--seed", "2", "--iters", "100", "--trace-out", str(a)]) == 0
    assert main(["run", "--instance-in", str(inst), "--iters", "100", "--trace-out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# trial\niters = 30\nvariant = fista_canonical\nstep_frac_of_inv_l = 0.5\n")
    path = tmp_path / "t.csv"
    assert main(["run", "--config", str(cfg), "--iters", "10", "--trace-out", str(path)]) == 0
    assert len(read_rows(path)) == 12
    cfg.write_text("bogus = 1\n")
    assert main(["run", "--config", str(cfg)]) == 1


def test_deblur_run_from_pgm(tmp_path):
    img = tmp_path / "img.pgm"
    save_pgm(synthetic_image(16), img)
    path = tmp_path / "t.csv"
    code = main(["run", "--kind", "deblur", "--image-in", str(img), "--kernel-sigma", "1.0",
                 "--variant", "fista_canonical", "--iters", "30", "--trace-out", str(path)])
    assert code == 0
    rows = read_rows(path)[1:]
    assert len(rows) == 31
    assert float(rows[-1][1]) < float(rows[0][1])


def write_trace(path, ks, gap, gs):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for k, a, b in zip(ks, gap, gs):
            w.writerow([k, fmt(a), fmt(a), fmt(b), fmt(b), "NA", "NA", "NA", "NA"])


def test_rates_recovers_power_law(tmp_path, capsys):
    ks = np.arange(1, 10_001)
    path = tmp_path / "synthetic.csv"
    write_trace(path, ks, ks ** -2.0, ks ** -3.0)
    assert main(["rates", str(path)]) == 0
    out = capsys.readouterr().out
    lines = {ln.split(":")[0].strip(): ln.rsplit(":", 1)[1].strip() for ln in out.splitlines()[1:]}
    assert float(lines["phi_gap slope [1000, 10000]"]) == pytest.approx(-2.0, abs=1e-6)
    assert float(lines["min_gs_norm_sq slope [1000, 10000]"]) == pytest.approx(-3.0, abs=1e-6)
    assert float(lines["tail ratio k^3 min_gs_norm_sq a(10000)/a(1000)"]) == pytest.approx(1.0)


def test_rates_reports_na_on_zeros(tmp_path, capsys):
    ks = np.arange(0, 2001)
    path = tmp_path / "zeros.csv"
    write_trace(path, ks, np.zeros(ks.size), np.zeros(ks.size))
    assert main(["rates", "--k-max", "2000", "--tail-hi", "2000", str(path)]) == 0
    assert "NA" in capsys.readouterr().out


def test_rates_too_few_points(tmp_path):
    ks = np.arange(1, 6)
    path = tmp_path / "short.csv"
    write_trace(path, ks, ks ** -2.0, ks ** -3.0)
    assert main(["rates", "--k-min", "1", "--k-max", "5", str(path)]) == 1


def test_rates_rejects_wrong_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n")
    assert main(["rates", str(path)]) == 1


def test_verify_subset_passes(capsys):
    assert main(["verify", "--criteria", "3,9"]) == 0
    out = capsys.readouterr().out
    assert "criterion  3: PASS" in out and "criterion  9: PASS" in out


def test_verify_negative_control_fails(capsys):
    assert main(["verify", "--criteria", "4,7", "--corrupt-step-frac", "1.5"]) == 4
    assert "FAIL" in capsys.readouterr().out


def test_verify_unknown_criterion():
    assert main(["verify", "--criteria", "12"]) == 1
