import pytest

from spectra_lab.cli import main
from spectra_lab.fixture import write_fixture


@pytest.fixture(scope="module")
def case(tmp_path_factory):
    d = tmp_path_factory.mktemp("case")
    paths = write_fixture(d)
    assert main(["instrument", str(paths["program"]), "-o", str(d / "tv.i.mc"),
                 "--manifest", str(d / "m.txt"), "--scope", "dispatch",
                 "--scenario", str(paths["scenario"])]) == 0
    assert main(["run", "--scenario", str(paths["scenario"]), "--program", str(paths["program"]),
                 "--manifest", str(d / "m.txt"), "--spectra", str(d / "s.log"),
                 "--load", str(d / "load.csv"), "--events", str(d / "ev.txt")]) == 0
    return d


def test_run_outputs(case):
    assert (case / "load.csv").read_text().startswith("second,load\n0,")
    assert len((case / "load.csv").read_text().splitlines()) == 151
    assert (case / "s.log").read_text().count("\n") == 150
    assert (case / "m.txt").read_text().splitlines()[10] == "10\ttxt_page_poll"


def test_diagnose_with_truth(case, capsys):
    out = case / "r.txt"
    assert main(["diagnose", "--spectra", str(case / "s.log"), "--pass", "10..19",
                 "--fail", "100..109", "--manifest", str(case / "m.txt"),
                 "--truth", str(case / "truth.txt"), "-o", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[:2] == ["# pass=10..19 spectra=10", "# fail=100..109 spectra=10"]
    assert lines[3:] == ["SUSPECT 10 txt_page_poll evidence=10/10",
                         "SUSPECT 11 txt_cache_sweep evidence=10/10",
                         "accuracy=0.50"]
    assert "accuracy=0.50" in capsys.readouterr().out


def test_diagnose_without_truth_omits_accuracy(case):
    out = case / "r2.txt"
    assert main(["diagnose", "--spectra", str(case / "s.log"), "--pass", "10..19",
                 "--fail", "100..109", "-o", str(out)]) == 0
    text = out.read_text()
    assert "accuracy" not in text and "SUSPECT 10 #10 evidence=10/10" in text


def test_report_table(case, capsys):
    out = case / "plot.dat"
    assert main(["report", "--load", str(case / "load.csv"), "-o", str(out),
                 "--window", "TV1=10..59", "--window", "TV2=90..149"]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "# second load"
    assert lines[1].startswith("0 ")
    assert lines[-1].startswith("# delta TV2-TV1 = +")
    assert "TV1 10..59 mean=" in capsys.readouterr().out


def test_report_to_stdout(case, capsys):
    assert main(["report", "--load", str(case / "load.csv")]) == 0
    assert capsys.readouterr().out.splitlines()[1].startswith("0 ")


def test_run_is_repeatable(case, tmp_path):
    d = tmp_path
    assert main(["run", "--scenario", str(case / "case_study.scn"), "--program",
                 str(case / "tv.mc"), "--manifest", str(case / "m.txt"),
                 "--spectra", str(d / "s.log"), "--load", str(d / "load.csv"),
                 "--events", str(d / "ev.txt")]) == 0
    for name in ("s.log", "load.csv", "ev.txt"):
        assert (d / name).read_bytes() == (case / name).read_bytes()


def test_instrument_all_calls(tmp_path, capsys):
    src = tmp_path / "p.mc"
    src.write_text("int f() { return 1; }\nint main() { return f() + f(); }\n")
    assert main(["instrument", str(src), "-o", str(tmp_path / "o.mc"),
                 "--manifest", str(tmp_path / "m.txt")]) == 0
    assert "(__probe(0), f())" in (tmp_path / "o.mc").read_text()
    assert (tmp_path / "m.txt").read_text() == "0\tf\n"
    assert main(["instrument", str(tmp_path / "o.mc"), "-o", str(tmp_path / "o2.mc"),
                 "--manifest", str(tmp_path / "m2.txt")]) == 5


def test_exit_codes(tmp_path, case):
    bad = tmp_path / "bad.mc"
    bad.write_text("int f( {")
    out = ["-o", str(tmp_path / "x"), "--manifest", str(tmp_path / "y")]
    assert main(["instrument", str(bad)] + out) == 3
    assert main(["instrument", str(tmp_path / "missing.mc")] + out) == 4
    assert main(["instrument", str(case / "tv.mc"), "--scope", "dispatch"] + out) == 2

    scn = tmp_path / "bad.scn"
    scn.write_text((case / "case_study.scn").read_text().replace("handler rc_key 2",
                                                                 "handler rc_key 9"))
    run = ["run", "--program", str(case / "tv.mc"), "--manifest", str(case / "m.txt"),
           "--spectra", str(tmp_path / "s"), "--load", str(tmp_path / "l")]
    assert main(run + ["--scenario", str(scn)]) == 6
    wrong = tmp_path / "m.txt"
    wrong.write_text("0\tboot_init\n")
    assert main(["run", "--scenario", str(case / "case_study.scn"), "--program",
                 str(case / "tv.mc"), "--manifest", str(wrong), "--spectra",
                 str(tmp_path / "s"), "--load", str(tmp_path / "l")]) == 6
    assert main(["run", "--scenario", str(case / "case_study.scn"), "--program",
                 str(case / "tv.mc"), "--manifest", str(case / "m.txt"), "--spectra",
                 str(tmp_path / "s"), "--load", str(tmp_path / "s")]) == 2

    diag = ["diagnose", "--spectra", str(case / "s.log"), "-o", str(tmp_path / "r")]
    assert main(diag + ["--pass", "500..510", "--fail", "100..109"]) == 7
    assert main(diag + ["--pass", "x", "--fail", "100..109"]) == 2
    assert main(diag + ["--pass", "1..2", "--fail", "3", "--truth", str(case / "truth.txt")]) == 2

    empty = tmp_path / "empty.csv"
    empty.write_text("second,load\n")
    assert main(["report", "--load", str(empty)]) == 4
    assert main(["report", "--load", str(case / "load.csv"), "--window", "W=1"]) == 2
    assert main(["report", "--load", str(case / "load.csv"), "--window", "W=500..600"]) == 2


def test_usage_error_exits_2():
    with pytest.raises(SystemExit) as info:
        main(["diagnose"])
    assert info.value.code == 2
