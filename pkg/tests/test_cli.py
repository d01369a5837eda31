import json

import pytest

from coxmal.cli import UsageError, build_config, build_parser, main, read_config


def run(argv, capsys):
    rc = main(argv)
    out = capsys.readouterr()
    return rc, out.out, out.err


def test_read_config(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text(
        "# comment line\n"
        "[verify]\n"
        "group = B3\n"
        "q = 0.5, 1, 2\n"
        "seed = 7\n"
        'out = "results dir"\n'
        "strict = true\n"
        "\n"
        "[sample]\n"
        "samples = 500\n"
    )
    cfg = read_config(str(p))
    assert cfg["verify"]["group"] == "B3"
    assert cfg["verify"]["q"] == [0.5, 1, 2]
    assert cfg["verify"]["seed"] == 7
    assert cfg["verify"]["out"] == "results dir"
    assert cfg["verify"]["strict"] is True
    assert cfg["sample"]["samples"] == 500


def test_read_config_rejects_junk(tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_text("[verify]\nthis line has no equals sign\n")
    with pytest.raises(UsageError):
        read_config(str(p))


def test_config_precedence(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("[sample]\ngroup = B3\nseed = 11\nsamples = 250\n")
    parser = build_parser()
    args = parser.parse_args(
        ["sample", "--config", str(p), "--seed", "3"]
    )
    cfg = build_config(args)
    assert cfg.group == "B3"  # from file
    assert cfg.seed == 3  # flag wins
    assert cfg.samples == 250


def test_verify_small_grid_passes(capsys):
    rc, out, _ = run(["verify", "--group", "B3", "--q", "0.5,1"], capsys)
    assert rc == 0
    assert "PASS" in out
    assert "FAIL" not in out


def test_verify_rejects_d3(capsys):
    rc, _, err = run(["verify", "--group", "D3"], capsys)
    assert rc == 2
    assert "rank" in err


def test_verify_fails_with_zero_tolerances(tmp_path, capsys):
    p = tmp_path / "broken.cfg"
    p.write_text("[verify]\nrel_tol = 0\ntv_tol = 0\nrecon_tol = 0\n")
    rc, out, _ = run(
        ["verify", "--group", "B3,B4", "--q", "1", "--config", str(p)], capsys
    )
    assert rc == 1
    assert "FAIL" in out


def test_verify_writes_report(tmp_path, capsys):
    out_path = tmp_path / "report.json"
    rc, _, _ = run(
        ["verify", "--group", "B2", "--q", "1", "--out", str(out_path)], capsys
    )
    assert rc == 0
    report = json.loads(out_path.read_text())
    assert report["command"] == "verify"
    assert report["all_passed"] is True
    assert any(r["name"].startswith("normalization") for r in report["results"])


def test_sample_deterministic(capsys):
    argv = ["sample", "--group", "B3", "--q", "0.5", "--seed", "4", "--samples", "40"]
    rc1, out1, _ = run(argv, capsys)
    rc2, out2, _ = run(argv + ["--threads", "3"], capsys)
    assert rc1 == rc2 == 0
    strip = lambda s: [l for l in s.splitlines() if not l.startswith("#")]
    assert strip(out1) == strip(out2)
    vals = [int(l) for l in strip(out1) if l.isdigit()]
    assert len(vals) == 40 and all(0 <= v <= 6 for v in vals)


def test_exact_dist_csv(capsys):
    rc, out, _ = run(["exact-dist", "--group", "B3", "--q", "1"], capsys)
    assert rc == 0
    rows = [l for l in out.splitlines() if l and not l.startswith("#")]
    header, body = rows[0], rows[1:]
    assert header.split(",")[:2] == ["value", "probability"]
    body = [r for r in body if r[0].isdigit()]
    total = sum(float(r.split(",")[1]) for r in body)
    assert abs(total - 1.0) < 1e-12
    # t = 1 and t = 5 carry no mass in B3: des(w) + des(w^-1) = 1 would
    # force one of the pair to be the identity
    assert [int(r.split(",")[0]) for r in body] == [0, 2, 3, 4, 6]


def test_moments_exact_table(capsys):
    rc, out, _ = run(["moments", "--group", "B4", "--q", "1", "--mode", "exact"], capsys)
    assert rc == 0
    row = [l for l in out.splitlines() if l.startswith("B4,")][0]
    cells = row.split(",")
    assert float(cells[5]) == 4.0  # mean formula 2nq/(1+q)
    assert cells[7] == "yes"


def test_moments_mc_within_slack(capsys):
    rc, out, _ = run(
        ["moments", "--group", "B3", "--q", "0.5", "--mode", "mc",
         "--samples", "20000", "--seed", "8"],
        capsys,
    )
    assert rc == 0
    assert "FAIL" not in out


def test_clt_trend(capsys):
    rc, out, _ = run(
        ["clt", "--group", "B8,B16", "--q", "1", "--samples", "8000", "--seed", "2"],
        capsys,
    )
    assert rc == 0
    assert "clt-distance" in out


def test_clt_zero_variance_is_usage_error(capsys):
    rc, _, err = run(
        ["clt", "--group", "A1 x A1", "--q", "1e-9", "--samples", "100"], capsys
    )
    assert rc == 2
    assert "variance" in err.lower()


def test_bad_mode_and_missing_command(capsys):
    rc, _, _ = run(["sample", "--group", "B3", "--mode", "nope"], capsys)
    assert rc == 2


def test_main_no_args_returns_usage(capsys):
    assert main([]) == 2
