import json
import os

import numpy as np
import pytest

from dbar_fiber.cli import main
from dbar_fiber.config import parse_config_text
from dbar_fiber.errors import ConfigError

FAST_QUAD = """
quad.n_r = 16
quad.n_theta = 32
quad.tol_abs = 1e-7
quad.tol_tail = 1e-3
quad.max_refinements = 2
"""


def write_config(tmp_path, body, name="run.cfg"):
    path = tmp_path / name
    path.write_text(body)
    return str(path)


def read_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    return header, rows


# --- config parsing ---------------------------------------------------------


def test_parse_config_happy_path():
    cfg = parse_config_text(
        """
        # comment
        form = gaussian_form
        quad.n_r = 8   # trailing comment
        grid.w_re = -1:1:3
        """
    )
    assert cfg.form_name == "gaussian_form"
    assert cfg.quadrature_spec().n_r == 8
    pts = cfg.grid_w_points(1)
    assert len(pts) == 3 * 5


def test_parse_config_rejects_unknown_key():
    with pytest.raises(ConfigError):
        parse_config_text("form = gaussian_form\nbogus.key = 1\n")


def test_parse_config_rejects_duplicates_and_bad_lines():
    with pytest.raises(ConfigError):
        parse_config_text("form = gaussian_form\nform = rational_form\n")
    with pytest.raises(ConfigError):
        parse_config_text("just a line\n")


def test_parse_config_value_errors():
    cfg = parse_config_text("form = gaussian_form\nquad.n_r = soup\n")
    with pytest.raises(ConfigError):
        cfg.quadrature_spec()
    cfg = parse_config_text("form = gaussian_form\ngrid.w_re = 0:1\n")
    with pytest.raises(ConfigError):
        cfg.grid_w_points(1)


def test_config_missing_form():
    cfg = parse_config_text("quad.n_r = 8\n")
    with pytest.raises(ConfigError):
        cfg.form_name


# --- solve ------------------------------------------------------------------


def test_solve_zero_form_writes_zero_column(tmp_path):
    cfg = write_config(tmp_path, "form = zero_form\ngrid.w_re = -1:1:3\ngrid.w_im = 0:0:1\n" + FAST_QUAD)
    out = str(tmp_path / "out")
    assert main(["solve", "--config", cfg, "--out", out, "--quiet"]) == 0
    header, rows = read_csv(os.path.join(out, "solution.csv"))
    assert header == ["re_w1", "im_w1", "re_B", "im_B", "abs_B", "err_estimate"]
    assert all(float(row[header.index("abs_B")]) == 0.0 for row in rows)


def test_solve_gaussian_grid_hits_oracle(tmp_path):
    cfg = write_config(
        tmp_path,
        "form = gaussian_form\ngrid.w_re = 1:1:1\ngrid.w_im = 0:0:1\n" + FAST_QUAD,
    )
    out = str(tmp_path / "out")
    assert main(["solve", "--config", cfg, "--out", out, "--quiet"]) == 0
    header, rows = read_csv(os.path.join(out, "solution.csv"))
    value = float(rows[0][header.index("abs_B")])
    assert value == pytest.approx(0.6321205588, abs=1e-6)


def test_solve_rational_grid_hits_oracle(tmp_path):
    # tol_tail drives the truncation radius, so ask for the accuracy we assert
    cfg = write_config(
        tmp_path,
        "form = rational_form\ngrid.w_re = 1:1:1\ngrid.w_im = 0:0:1\n"
        "quad.n_r = 16\nquad.n_theta = 32\nquad.tol_abs = 1e-8\nquad.tol_tail = 1e-6\n",
    )
    out = str(tmp_path / "out")
    assert main(["solve", "--config", cfg, "--out", out, "--quiet"]) == 0
    header, rows = read_csv(os.path.join(out, "solution.csv"))
    assert float(rows[0][header.index("abs_B")]) == pytest.approx(0.5, abs=1e-6)


def test_solve_grid_z_mismatch_is_config_error(tmp_path):
    cfg = write_config(tmp_path, "form = gaussian_form\ngrid.z = 1,2\n")
    assert main(["solve", "--config", cfg, "--out", str(tmp_path), "--quiet"]) == 2


# --- verify -----------------------------------------------------------------


def test_verify_gaussian_passes(tmp_path):
    cfg = write_config(tmp_path, "form = gaussian_form\ngrid.w_re = -2:2:3\ngrid.w_im = -2:2:3\n" + FAST_QUAD)
    out = str(tmp_path / "out")
    assert main(["verify", "--config", cfg, "--out", out, "--quiet"]) == 0
    report = json.load(open(os.path.join(out, "report.json")))
    assert report["overall_pass"] is True
    names = [c["name"] for c in report["checks"]]
    assert "oracle_gap" in names and "dbar_residual" in names
    assert report["metadata"]["timestamp"] is None
    assert all(c["claim"] for c in report["checks"])


def test_verify_product_includes_slot_independence(tmp_path):
    cfg = write_config(
        tmp_path,
        "form = product_form_k2\ngrid.w_re = -1:1:3\ngrid.w_im = 0:0:1\n" + FAST_QUAD,
    )
    out = str(tmp_path / "out")
    assert main(["verify", "--config", cfg, "--out", out, "--quiet"]) == 0
    report = json.load(open(os.path.join(out, "report.json")))
    assert any(c["name"] == "slot_independence" and c["passed"] for c in report["checks"])


def test_verify_wrong_budget_fails_with_exit_1(tmp_path):
    cfg = write_config(
        tmp_path,
        "form = gaussian_form\nform.c_bound = 0.2\ngrid.radii = 0.5,1,2\n" + FAST_QUAD,
    )
    out = str(tmp_path / "out")
    assert main(["verify", "--config", cfg, "--out", out, "--quiet"]) == 1
    report = json.load(open(os.path.join(out, "report.json")))
    failing = [c["name"] for c in report["checks"] if not c["passed"]]
    assert "decay_b_envelope" in failing


def test_verify_determinism_byte_identical(tmp_path):
    cfg = write_config(tmp_path, "form = gaussian_form\n" + FAST_QUAD)
    out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
    assert main(["verify", "--config", cfg, "--out", out1, "--quiet"]) == 0
    assert main(["verify", "--config", cfg, "--out", out2, "--quiet"]) == 0
    bytes1 = open(os.path.join(out1, "report.json"), "rb").read()
    bytes2 = open(os.path.join(out2, "report.json"), "rb").read()
    assert bytes1 == bytes2


# --- bounds -----------------------------------------------------------------


def test_bounds_tables(tmp_path):
    cfg = write_config(
        tmp_path,
        "form = gaussian_form\nbounds.epsilons = 0.5,1,2\nbounds.xs = 0,1,2,4\n"
        "quad.n_r = 10\nquad.n_theta = 64\nquad.tol_abs = 1e-5\nquad.tol_tail = 2e-3\nquad.max_refinements = 2\n",
    )
    out = str(tmp_path / "out")
    assert main(["bounds", "--config", cfg, "--out", out, "--quiet"]) == 0

    header, rows = read_csv(os.path.join(out, "bounds.csv"))
    eps_col = header.index("epsilon")
    row1 = next(r for r in rows if float(r[eps_col]) == 1.0)
    assert float(row1[header.index("kernel_mass_numeric")]) == pytest.approx(2 * np.pi ** 2, rel=1e-6)
    assert float(row1[header.index("kernel_mass_bound")]) == pytest.approx(8 * np.pi, rel=1e-9)
    assert row1[header.index("kernel_mass_pass")] == "true"
    assert float(row1[header.index("line_integral_numeric")]) == pytest.approx(np.pi, rel=1e-6)
    assert float(row1[header.index("line_integral_bound")]) == pytest.approx(4.0)
    assert all(r[header.index("kernel_mass_pass")] == "true" for r in rows)

    fheader, frows = read_csv(os.path.join(out, "f_profile.csv"))
    by_eps = {}
    for r in frows:
        by_eps.setdefault(r[fheader.index("epsilon")], []).append(float(r[fheader.index("f_value")]))
    for eps, values in by_eps.items():
        assert all(b <= a + 1e-6 for a, b in zip(values, values[1:])), eps


# --- profile ----------------------------------------------------------------


def test_profile_command(tmp_path):
    cfg = write_config(tmp_path, "form = gaussian_form\ngrid.radii = 1,2,4\n" + FAST_QUAD)
    out = str(tmp_path / "out")
    assert main(["profile", "--config", cfg, "--out", out, "--quiet"]) == 0
    header, rows = read_csv(os.path.join(out, "decay_profile.csv"))
    assert header == ["radius", "abs_B", "err_estimate", "envelope"]
    values = [float(r[1]) for r in rows]
    assert values[0] == pytest.approx(1 - np.exp(-1), abs=1e-5)
    assert values[-1] < values[0]


# --- bundle -----------------------------------------------------------------


def test_bundle_product_passes(tmp_path):
    cfg = write_config(
        tmp_path,
        "form = gaussian_form\nbundle.m = 0\nbundle.form = gaussian_form\nbundle.samples = 4\n" + FAST_QUAD,
    )
    out = str(tmp_path / "out")
    assert main(["bundle", "--config", cfg, "--out", out, "--quiet"]) == 0


def test_bundle_opm_passes_and_writes_overlap(tmp_path):
    cfg = write_config(tmp_path, "form = opm_metric_form\nbundle.m = 1\nbundle.samples = 5\n" + FAST_QUAD)
    out = str(tmp_path / "out")
    assert main(["bundle", "--config", cfg, "--out", out, "--quiet"]) == 0
    header, rows = read_csv(os.path.join(out, "overlap.csv"))
    assert len(rows) == 5
    gap_col = header.index("gap")
    err_col = header.index("err_sum")
    assert all(float(r[gap_col]) <= float(r[err_col]) + 1e-6 for r in rows)
    report = json.load(open(os.path.join(out, "bundle_report.json")))
    assert report["overall_pass"] is True


def test_bundle_perturbed_fails_and_lists_points(tmp_path):
    cfg = write_config(
        tmp_path,
        "form = opm_metric_form\nbundle.m = 1\nbundle.samples = 4\nbundle.perturb = 0.05\n" + FAST_QUAD,
    )
    out = str(tmp_path / "out")
    assert main(["bundle", "--config", cfg, "--out", out, "--quiet"]) == 1
    header, rows = read_csv(os.path.join(out, "overlap.csv"))
    within = header.index("within_bound")
    assert any(r[within] == "false" for r in rows)
    report = json.load(open(os.path.join(out, "bundle_report.json")))
    glue = next(c for c in report["checks"] if c["name"] == "overlap_consistency")
    assert not glue["passed"] and "z=" in glue["detail"]


# --- top level --------------------------------------------------------------


def test_missing_config_is_exit_2(tmp_path, capsys):
    assert main(["solve", "--config", str(tmp_path / "nope.cfg"), "--quiet"]) == 2
    assert "config error" in capsys.readouterr().err


def test_unknown_form_is_exit_2(tmp_path):
    cfg = write_config(tmp_path, "form = not_a_form\n")
    assert main(["solve", "--config", cfg, "--out", str(tmp_path), "--quiet"]) == 2


def test_numerical_failure_is_exit_3(tmp_path):
    # impossible tail target under a tiny radius cap
    cfg = write_config(
        tmp_path,
        "form = gaussian_form\nquad.tol_tail = 1e-12\nquad.r_cap = 64\ngrid.w_re = 0:0:1\ngrid.w_im = 0:0:1\n",
    )
    assert main(["solve", "--config", cfg, "--out", str(tmp_path), "--quiet"]) == 3
