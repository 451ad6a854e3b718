import subprocess
import sys

import pytest

from ksymplectic.cli import main, real

SCHEME2 = "A\n1/8 0\n1/4 3/8\nB\n1/4 0\n1/2 1/4\nalpha\n1/4 3/4\nbeta\n1/2 1/2\n"


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def usage_error(argv, capsys):
    with pytest.raises(SystemExit) as info:
        main(argv)
    capsys.readouterr()
    return info.value.code


def data_rows(text):
    lines = [l for l in text.splitlines() if not l.startswith("#")]
    return lines[0], lines[1:]


@pytest.mark.parametrize("text, value", [("0.125", 0.125), ("1/8", 0.125), ("2^-3", 0.125), ("-2", -2.0)])
def test_real_parser(text, value):
    assert real(text) == value


class TestTableauCheck:
    def test_builtin(self, capsys):
        for sid in ("1", "2", "3", "4"):
            code, out, _ = run(["tableau", "check", "--builtin", sid], capsys)
            assert code == 0
            assert "symplectic_residual: 0.000e+00" in out
            assert out.strip().endswith("PASS")

    def test_scheme2_family(self, capsys):
        code, out, _ = run(["tableau", "check", "--builtin", "2", "--a11", "0.3", "--b11", "1/10"], capsys)
        assert code == 0 and "PASS" in out
        assert usage_error(["tableau", "check", "--builtin", "2", "--a11", "0.7"], capsys) == 2
        assert usage_error(["tableau", "check", "--builtin", "1", "--a11", "0.3"], capsys) == 2

    def test_file(self, tmp_path, capsys):
        f = tmp_path / "s2.txt"
        f.write_text(SCHEME2)
        code, out, _ = run(["tableau", "check", str(f)], capsys)
        assert code == 0 and "explicit: no" in out

    def test_perturbed_file_fails(self, tmp_path, capsys):
        f = tmp_path / "bad.txt"
        f.write_text(SCHEME2.replace("3/8", "0.4"))
        code, out, _ = run(["tableau", "check", str(f)], capsys)
        assert code == 1 and out.strip().endswith("FAIL")

    def test_malformed_file(self, tmp_path, capsys):
        f = tmp_path / "broken.txt"
        f.write_text(SCHEME2.replace("3/8", "3/x"))
        code, _, err = run(["tableau", "check", str(f)], capsys)
        assert code == 2
        assert "line 3, column 5" in err

    def test_missing_file(self, tmp_path, capsys):
        code, _, _ = run(["tableau", "check", str(tmp_path / "nope.txt")], capsys)
        assert code == 2

    def test_needs_one_source(self, capsys):
        assert usage_error(["tableau", "check"], capsys) == 2


class TestSimulate:
    ARGS = ["simulate", "--scheme", "4", "--h", "0.03125", "--T", "1", "--seed", "7"]

    def test_row_count_and_header(self, capsys):
        code, out, _ = run(self.ARGS, capsys)
        assert code == 0
        assert out.startswith("# seed=7\n")
        header, rows = data_rows(out)
        assert header == "t,x,y"
        assert len(rows) == 33
        assert all(float(v) > 0 for r in rows for v in r.split(",")[1:])

    def test_deterministic_file(self, tmp_path, capsys):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert run(self.ARGS + ["-o", str(a)], capsys)[0] == 0
        assert run(self.ARGS + ["-o", str(b)], capsys)[0] == 0
        assert a.read_bytes() == b.read_bytes()

    def test_em_violation_warns(self, capsys):
        code, out, err = run(["simulate", "--scheme", "em", "--h", "0.5", "--T", "20", "--sigma1", "3"], capsys)
        assert code == 0
        assert "warning" in err and "positive quadrant" in err
        assert len(data_rows(out)[1]) == 41

    def test_convergence_failure_exits_1(self, capsys):
        code, _, err = run(["simulate", "--scheme", "1", "--h", "1", "--T", "2", "--x0", "10", "--y0", "10",
                            "--sigma1", "0"], capsys)
        assert code == 1
        assert "step 0" in err

    @pytest.mark.parametrize(
        "extra",
        [["--h", "0.3"], ["--h", "-1"], ["--x0", "0"], ["--gamma1", "-1"], ["--scheme", "rk4"], ["--a11", "0.2"]],
    )
    def test_usage_errors(self, extra, capsys):
        assert usage_error(["simulate", "--T", "1"] + extra, capsys) == 2


class TestStudies:
    def test_convergence(self, tmp_path, capsys):
        common = ["convergence", "--n-paths", "30", "--h-list", "2^-4,2^-5,2^-6", "--h-ref", "2^-8"]
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        code, _, err = run(common + ["-o", str(a)], capsys)
        assert code == 0
        assert err.count("slope") == 4
        assert run(common + ["--threads", "3", "-o", str(b)], capsys)[0] == 0
        assert a.read_bytes() == b.read_bytes()
        header, rows = data_rows(a.read_text())
        assert header == "scheme,h,l1_error,stderr,violations"
        assert len(rows) == 4 * 3
        assert "# seed=42" in a.read_text()

    def test_paper_scale_clash(self, capsys):
        assert usage_error(["convergence", "--paper-scale", "--n-paths", "10"], capsys) == 2
        assert usage_error(["convergence", "--paper-scale", "--h-list", "0.5"], capsys) == 2

    def test_incompatible_grid(self, capsys):
        assert usage_error(["convergence", "--n-paths", "4", "--h-list", "0.1", "--h-ref", "2^-8"], capsys) == 2

    def test_table(self, capsys):
        code, out, err = run(["table", "--T", "0.5,1,5,10,20", "--n-paths", "4", "--h-ref", "2^-7",
                              "--schemes", "1,4"], capsys)
        assert code == 0
        header, rows = data_rows(out)
        assert header == "scheme,T,l1_error"
        assert len(rows) == 10
        first = err.splitlines()[0].split()
        assert first[0] == "T" and len(first) == 6

    def test_phase_area_defaults(self, capsys):
        code, out, err = run(["phase-area", "--h-ref", "2^-9"], capsys)
        assert code == 0
        assert "# triangle=1,7,7,1,2,8\n" in out
        header, rows = data_rows(out)
        assert header == "t,scheme,area,area_ref,abs_error,log_area"
        assert len(rows) == 2 * 7
        assert rows[0].split(",")[:4] == ["0", "1", "6", "6"]
        assert "milstein" in err

    def test_phase_area_bad_triangle(self, capsys):
        assert usage_error(["phase-area", "--triangle", "1,2,3"], capsys) == 2

    def test_defect(self, capsys):
        code, out, err = run(["defect", "--n-states", "3", "--schemes", "1,em"], capsys)
        assert code == 0
        header, rows = data_rows(out)
        assert header == "scheme,x,y,h,J,defect"
        assert len(rows) == 2 * 3 * 2 * 3
        assert len(err.splitlines()) == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "ksymplectic", "tableau", "check", "--builtin", "4"],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert "PASS" in res.stdout
