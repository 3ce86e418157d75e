import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import load_reference

from wg3d import catalog, graded, perturbed_random, run_study, uniform
from wg3d.analysis import (CSV_COLUMNS, NORM_NAMES, ErrorNorms, StudyReport, StudyRow, compare, error_norms,
                           rates)
from wg3d.cli import read_reference
from wg3d.quadrature import cell_averages
from wg3d.study import solve

TABLE1_H1 = [1.8494e-01, 4.8626e-02, 1.2310e-02, 3.0872e-03]


def test_rate_examples():
    h = [0.5, 0.25, 0.125]
    r = rates(h, [1.0, 0.5, 0.25])
    assert r.pairwise == pytest.approx((1.0, 1.0), abs=1e-14)
    r2 = rates(h, np.square(h))
    assert r2.lsq_slope == pytest.approx(2.0, abs=1e-12)


def test_lsq_slope_of_table1_column():
    assert rates([1 / 4, 1 / 8, 1 / 16, 1 / 32], TABLE1_H1).lsq_slope == pytest.approx(1.97, abs=0.03)


def test_rate_errors():
    with pytest.raises(ValueError):
        rates([0.5, 0.5], [1.0, 0.5])
    with pytest.raises(ValueError):
        rates([0.5], [1.0])
    assert math.isnan(rates([0.5, 0.25], [1.0, 0.0]).lsq_slope)


def test_case1_at_8_cubed():
    sol = solve(uniform(8), catalog(1), rho=6.0)
    assert sol.norms.h1_db == pytest.approx(4.8626e-02, rel=1e-4)


row_strategy = st.builds(
    StudyRow,
    level=st.integers(0, 9),
    mesh=st.from_regex(r"[1-9][0-9]{0,2}x[1-9][0-9]{0,2}x[1-9][0-9]{0,2}", fullmatch=True),
    h=st.floats(1e-6, 1.0),
    dofs=st.integers(0, 10**7),
    norms=st.builds(ErrorNorms, *[st.floats(0, 1e3, allow_subnormal=True)] * 5),
    iters=st.integers(0, 10**5),
    solve_s=st.floats(0, 1e4),
)


@given(rows=st.lists(row_strategy, max_size=6))
@settings(max_examples=100)
def test_csv_round_trip(rows):
    report = StudyReport(rows)
    text = report.to_csv()
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
    back = StudyReport.from_csv(text)
    assert back.rows == report.rows


def test_csv_missing_column():
    with pytest.raises(ValueError, match="missing"):
        StudyReport.from_csv("level,mesh\n0,2x2x2\n")


@given(alpha=st.floats(-50, 50).filter(lambda a: abs(a) > 1e-3), seed=st.integers(0, 100))
@settings(max_examples=25, deadline=None)
def test_norm_homogeneity(alpha, seed):
    mesh = perturbed_random(3, seed=seed)
    prob = catalog(2)
    u_b = solve(mesh, prob).u_b
    scaled = dataclasses.replace(
        prob,
        u=lambda x, y, z: alpha * prob.u(x, y, z),
        grad_u=lambda x, y, z: alpha * prob.grad_u(x, y, z),
        hess_u=lambda x, y, z: alpha * prob.hess_u(x, y, z),
    )
    a = np.array(error_norms(mesh, prob, u_b).as_tuple())
    b = np.array(error_norms(mesh, scaled, alpha * u_b).as_tuple())
    np.testing.assert_allclose(b, abs(alpha) * a, rtol=1e-12)


@pytest.mark.parametrize("mesh", [uniform(4), graded(3, 4, 5, stretch=1.0), perturbed_random(4, seed=9)])
def test_h1_db_through_commutative_identity(mesh):
    prob = catalog(3)
    sol = solve(mesh, prob)
    G = np.zeros((mesh.element_count, 3))
    from wg3d import element

    G = np.einsum("eki,ei->ek", element.weak_gradient_map(mesh.element_e), sol.u_b[mesh.element_faces])
    qgrad = cell_averages(prob.grad_u, mesh, order=6)
    direct = math.sqrt(float(np.sum(mesh.element_volume * np.sum((qgrad - G) ** 2, axis=1))))
    assert direct == pytest.approx(sol.norms.h1_db, rel=1e-8)


def test_norms_vanish_on_exact_face_data():
    from wg3d.checks import linear_problem
    from wg3d.quadrature import face_averages

    mesh = graded(3, 2, 4, stretch=2.0)
    prob = linear_problem(0.5, (1.0, -2.0, 3.0))
    assert max(error_norms(mesh, prob, face_averages(prob.u, mesh)).as_tuple()) < 1e-12
    with pytest.raises(ValueError):
        error_norms(mesh, prob, np.zeros(3))


@pytest.fixture(scope="module")
def table1_report():
    return run_study(catalog(1), "uniform:4x4x4", levels=4, rho=6.0, h_def="diag")


def test_table_output(table1_report):
    text = table1_report.to_table()
    assert "1.8494e-01" in text and "3.0872e-03" in text
    assert "Rate (lsq)" in text and "Rate (last)" in text
    last = [ln for ln in text.splitlines() if ln.startswith("Rate (last)")][0]
    printed = [float(v) for v in last.split()[2:]]
    assert printed == [round(table1_report.rates()[c].pairwise[-1], 2) for c in NORM_NAMES]
    expected = load_reference("reference_rates")
    row = list(expected["table"]).index(1.0)
    np.testing.assert_allclose(printed, [expected[c][row] for c in NORM_NAMES], atol=0.011)


def test_compare_with_itself(table1_report):
    result = compare(table1_report, table1_report.to_csv())
    assert result.passed and all(dev == 0.0 for dev, _ in result.worst.values())


@pytest.mark.parametrize("order", [3, 4, 6, 8])
def test_quadrature_order_insensitivity(order):
    rep = run_study(catalog(1), "uniform:4x4x4", levels=4, rho=6.0, h_def="diag", order=order)
    assert compare(rep, read_reference("table01"), 0.02).passed


def test_two_point_rule_still_gets_h1_db():
    # two points per direction leave an O(h^2) error in the linear moments, the same
    # order as the superconvergent norms, so only h1_db stays within 2%
    rep = run_study(catalog(1), "uniform:4x4x4", levels=4, rho=6.0, h_def="diag", order=2)
    assert compare(rep, read_reference("table01"), {"h1_db": 0.02, "inf_star": 0.03, "l2_e0": 0.02,
                                                    "w11_star": 0.04, "w11_semi": 0.08}).passed


def test_compare_subset_and_tolerances(table1_report):
    ref = "mesh,h1_db\n4x4x4,1.8494e-01\n8x8x8,4.8626e-02\n16x16x16,1.2310e-02\n32x32x32,3.0872e-03\n"
    assert compare(table1_report, ref, 1e-4).passed
    assert list(compare(table1_report, ref).worst) == ["h1_db"]
    off = ref.replace("4.8626e-02", "4.9626e-02")
    result = compare(table1_report, off, {"h1_db": 0.01})
    assert not result.passed and result.worst["h1_db"][1] == 1
    assert "FAIL" in result.summary()


@pytest.mark.parametrize("ref, msg", [
    ("mesh,h1_db\n4x4x4,0.18\n", "row count"),
    ("mesh,foo\n4x4x4,1\n8x8x8,1\n16x16x16,1\n32x32x32,1\n", "no norm columns"),
    ("mesh,h1_db\n4x4x4,1\n8x8x8,1\n16x16x16,1\n33x32x32,1\n", "does not match"),
    ("mesh,h1_db\n", "no rows"),
])
def test_compare_schema_errors(table1_report, ref, msg):
    with pytest.raises(ValueError, match=msg):
        compare(table1_report, ref)


def test_all_norm_names_in_csv():
    assert set(NORM_NAMES) <= set(CSV_COLUMNS)
