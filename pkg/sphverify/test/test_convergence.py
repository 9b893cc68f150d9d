"""Test convergence studies, reports and the study driver."""

import json
import logging
import math
import os

import numpy as np
import pandas as pd
import pytest

import sphverify._convergence
from sphverify import ConvergenceStudy
from sphverify._convergence import (ACCEPTANCE, ConvergenceReport,
                                    ManufacturedPinning, acceptance_cases,
                                    check_acceptance, fit_order, l1_error,
                                    load_solution, open_case, run_case,
                                    solid_case, solid_solution)
from sphverify._geometry import TEST_SURFACE, DomainSpec, generate_domain
from sphverify._mms import get_solution
from sphverify._particles import Tag
from sphverify._report import merge_reports, write_report
from sphverify._scheme import SchemeConfig, SimulationDiverged
from sphverify._simulation import Simulation


@pytest.fixture(autouse=True)
def chdir(tmp_path):
    start_directory = os.getcwd()
    os.chdir(tmp_path)
    yield
    os.chdir(start_directory)


def _report(order_p=2., order_u=math.nan, **kwargs):
    data = dict(case="pressure", method="marrone", condition="pressure",
                domain="straight", kernel="quintic", c_o=20.,
                dx=[0.1, 0.05, 0.025], L1_p=[4e-2, 1e-2, 2.5e-3],
                L1_u=[1e-2, 6e-3, 4e-3], failed=[False] * 3,
                wall_time=[0.1, 0.2, 0.4], order_p=order_p, order_u=order_u)
    data.update(kwargs)
    return ConvergenceReport(**data)


class TestFitOrder:
    def test_second_order(self):
        assert fit_order([4e-2, 1e-2, 2.5e-3], [0.1, 0.05, 0.025]) == pytest.approx(2.)

    def test_first_order_unsorted(self):
        assert fit_order([1e-2, 2e-2], [0.05, 0.1]) == pytest.approx(1.)

    def test_drops_failed_points(self, caplog):
        with caplog.at_level(logging.WARNING):
            order = fit_order([4e-2, np.nan, 2.5e-3], [0.1, 0.05, 0.025])
        assert order == pytest.approx(2.)
        assert "Excluding 1" in caplog.text

    def test_too_few_usable(self):
        assert math.isnan(fit_order([1e-2, 0.], [0.1, 0.05]))

    @pytest.mark.parametrize("errors, dxs", [([1.], [0.1]), ([1., 2.], [0.1])])
    def test_invalid(self, errors, dxs):
        with pytest.raises(ValueError):
            fit_order(errors, dxs)


class TestCases:
    @pytest.mark.parametrize("condition, domain, solution", [
        ("pressure", "straight", "pres_num_d1"),
        ("noslip", "packed_convex", "noslip_d5"),
        ("noslip", "concave", "noslip_d6"),
        ("slip", "packed_concave", "slip_d5"),
        ("pressure", "convex", "pres_num_d5"),
    ])
    def test_solid_solution(self, condition, domain, solution):
        assert solid_solution(condition, domain) == solution

    def test_solid_case(self):
        case = solid_case("adami", "noslip", "packed_concave")
        assert (case.field, case.steps, case.c_o) == ("u", 100, 20.)
        assert case.name == "solid:adami:noslip:packed_concave"
        with pytest.raises(ValueError):
            solid_case("adami", "noslip", "io_channel")
        with pytest.raises(ValueError):
            solid_case("sponge", "noslip", "straight")
        with pytest.raises(ValueError):
            solid_case("adami", "periodic", "straight")

    def test_open_case(self):
        wave = open_case("hybrid", "vel-wave-in")
        assert (wave.field, wave.steps, wave.c_o, wave.domain) == ("u", 500, 40., "io_channel")
        plain = open_case("mirror", "pres-out", steps=7)
        assert (plain.field, plain.steps, plain.c_o) == ("p", 7, 20.)
        with pytest.raises(ValueError):
            open_case("marrone", "pres-out")
        with pytest.raises(ValueError):
            open_case("mirror", "pres-sideways")

    def test_acceptance_cases(self):
        assert len(acceptance_cases()) == len(ACCEPTANCE)
        assert all(case.kind == "open" for case, *_ in acceptance_cases("open"))


class TestErrors:
    @pytest.fixture()
    def setup(self):
        cfg = SchemeConfig(c_o=20.)
        particles = generate_domain(DomainSpec("straight", 0.1))
        load_solution(particles, "pres_num_d1", 0.02, cfg)
        return particles, cfg

    def test_exact_state_has_no_error(self, setup):
        particles, cfg = setup
        assert l1_error(particles, "pres_num_d1", 0.02, "p", cfg) == pytest.approx(0., abs=1e-14)
        assert l1_error(particles, "pres_num_d1", 0.02, "u", cfg) == pytest.approx(0., abs=1e-14)

    def test_offset(self, setup):
        particles, cfg = setup
        particles.pressure[particles.tag == Tag.FLUID] += 0.1
        particles.pressure[particles.tag == Tag.SOLID] += 5.
        assert l1_error(particles, "pres_num_d1", 0.02, "p", cfg) == pytest.approx(0.1)

    def test_unknown_field(self, setup):
        particles, cfg = setup
        with pytest.raises(ValueError):
            l1_error(particles, "pres_num_d1", 0.02, "rho", cfg)

    def test_pinning_restores_untested_property(self, setup):
        particles, cfg = setup
        tested = (particles.tag == Tag.SOLID) & (particles.surface == TEST_SURFACE)
        particles.velocity[tested] = 7.
        particles.pressure[tested] = 7.
        pin = ManufacturedPinning("pres_num_d1", cfg,
                                  lambda ps: (ps.tag == Tag.SOLID) & (ps.surface == TEST_SURFACE),
                                  "p")
        pin.after(particles, 0.02, 0, 0.)
        x, y = particles.position[tested].T
        u, v, _, _ = get_solution("pres_num_d1").evaluate(x, y, 0.02, cfg.c_o, cfg.rho_o)
        np.testing.assert_allclose(particles.velocity[tested], np.column_stack((u, v)))
        np.testing.assert_array_equal(particles.pressure[tested], 7.)


class TestRunCase:
    def test_initial_state_is_exact(self):
        case = solid_case("mms", "pressure", "straight", steps=0)
        report = run_case(case, [20, 10])
        assert report.dx == [0.1, 0.05]
        np.testing.assert_allclose(report.L1_p, 0., atol=1e-12)
        np.testing.assert_allclose(report.L1_u, 0., atol=1e-12)
        assert report.failed == [False, False]
        assert math.isnan(report.order_p)

    def test_kernel_option(self):
        case = solid_case("mms", "noslip", "straight", steps=0)
        report = run_case(case, [10, 20], kernel="wendland_c2")
        assert report.kernel == "wendland_c2"

    @pytest.mark.parametrize("case", [
        solid_case("mms", "noslip", "straight", steps=0),
        open_case("mirror", "pres-out", steps=0),
    ], ids=["solid", "open"])
    def test_kernel_reaches_generation(self, case, mocker):
        spy = mocker.spy(sphverify._convergence, "generate_domain")
        run_case(case, [10], kernel="wendland_c2")
        assert spy.call_count == 1
        assert spy.call_args.args[0].kernel == "wendland_c2"
        assert spy.spy_return.kernel.family == "wendland_c2"

    def test_short_run(self):
        case = solid_case("mms", "pressure", "straight", steps=2)
        report = run_case(case, [10, 20], n_saves=2)
        assert not any(report.failed)
        assert np.all(np.isfinite(report.L1_p))
        assert report.c_o == 20.

    def test_open_report_condition(self):
        case = open_case("mirror", "pres-out", steps=0)
        report = run_case(case, [10, 20])
        assert (report.case, report.condition, report.domain) == ("pres-out", "pressure", "io_channel")

    def test_divergence_marks_failure(self, mocker):
        mocker.patch.object(Simulation, "run",
                            side_effect=SimulationDiverged("boom", 0, 0.))
        case = solid_case("mms", "pressure", "straight", steps=2)
        report = run_case(case, [10, 20])
        assert report.failed == [True, True]
        assert all(math.isnan(e) for e in report.L1_p)
        assert math.isnan(report.order_p)


class TestAcceptance:
    def test_order_bounds(self):
        report = _report(order_p=1.9)
        assert check_acceptance(report, "p", 1.7, ">=")
        assert not check_acceptance(report, "p", 0.5, "<")
        assert not check_acceptance(report, "u", 0.5, "<")

    def test_plateau(self):
        report = _report()
        assert check_acceptance(report, "u", 5e-3, "plateau")
        assert not check_acceptance(report, "u", 1e-3, "plateau")

    def test_two_sided_on_both_fields(self):
        bound = (2., 0.3)
        assert check_acceptance(_report(order_p=2.011, order_u=2.018), "p,u", bound, "pm")
        assert not check_acceptance(_report(order_p=2.011, order_u=1.6), "p,u", bound, "pm")
        assert not check_acceptance(_report(order_p=2.4, order_u=2.), "p,u", bound, "pm")
        assert not check_acceptance(_report(order_p=2.), "p,u", bound, "pm")
        assert check_acceptance(_report(order_p=2.), "p", bound, "pm")

    def test_reference_rows_check_both_fields(self):
        rows = [row for row in ACCEPTANCE if row[1] == "mms"]
        assert {row[2] for row in rows} == {"pressure", "noslip"}
        assert all(row[4:] == ("p,u", (2., 0.3), "pm") for row in rows)

    def test_unknown_comparator(self):
        with pytest.raises(ValueError):
            check_acceptance(_report(), "p", 1., "~")


class TestReports:
    def test_to_dict(self):
        data = _report().to_dict()
        assert data["order_p"] == 2.
        assert data["order_u"] is None

    def test_diagnostic_columns(self):
        frame = _report(diagnostics=[{"no_support": 2}, {}, {}]).to_frame()
        assert frame["diag_no_support"].tolist() == [2, 0, 0]

    def test_write_report(self):
        verdict = {"name": "solid:marrone:pressure:straight", "field": "p",
                   "bound": 1.8, "comparator": ">=", "passed": True}
        frame = write_report([_report()], "study", [verdict])
        assert len(frame) == 3
        assert os.path.isfile("study.csv")
        assert os.path.isfile("study.svg")
        with open("study.json") as f:
            summary = json.load(f)
        assert summary[0]["order_u"] is None
        assert summary[0]["acceptance"]["passed"] is True
        assert summary[0]["wall_time_total"] == pytest.approx(0.7)

    def test_merge_reports(self):
        frame = _report().to_frame()
        frame.iloc[:2].to_csv("a.csv", index=False)
        frame.iloc[1:].to_csv("b.csv", index=False)
        summary = merge_reports(["a.csv", "b.csv"], "summary.csv")
        assert len(summary) == 1
        row = summary.iloc[0]
        assert row["n_resolutions"] == 3
        assert row["order_p"] == pytest.approx(2.)
        assert row["finest_L1_p"] == pytest.approx(2.5e-3)
        assert len(pd.read_csv("summary.csv")) == 1

    def test_merge_invalid(self):
        with pytest.raises(ValueError):
            merge_reports([], "summary.csv")
        pd.DataFrame({"dx": [0.1]}).to_csv("bad.csv", index=False)
        with pytest.raises(ValueError):
            merge_reports(["bad.csv"], "summary.csv")


class TestConvergenceStudy:
    @pytest.mark.parametrize("kwargs", [
        {"method": "marrone"},
        {"kind": "mixed", "method": "marrone"},
        {"kind": "solid", "method": "marrone", "colour": "red"},
        {"kind": "solid", "method": "marrone", "hdx": 1.3},
        {"kind": "solid"},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            ConvergenceStudy(**kwargs)

    def test_domain_alias(self):
        study = ConvergenceStudy(kind="solid", method="marrone", condition="pressure",
                                 domain="packed-concave", resolutions=50)
        assert study.domain == "packed_concave"
        assert study.resolutions == [50]

    @pytest.mark.parametrize("order, passed", [(2., True), (1., False)])
    def test_acceptance(self, mocker, order, passed):
        run_case = mocker.patch("sphverify.verify.run_case",
                                return_value=_report(order_p=order, order_u=order,
                                                     method="mms"))
        study = ConvergenceStudy(kind="solid", method="mms", condition="pressure",
                                 domain="straight", acceptance=True, progress=False,
                                 plot=False, output="accept", nu=0.02)
        assert study.run() is passed
        assert run_case.call_count == 1
        assert run_case.call_args.kwargs["nu"] == 0.02
        assert "c_o" not in run_case.call_args.kwargs
        with open("accept.json") as f:
            assert json.load(f)[0]["acceptance"]["passed"] is passed

    def test_no_matching_case(self):
        study = ConvergenceStudy(kind="open", case="vel-sideways", acceptance=True)
        with pytest.raises(ValueError):
            study.run()
