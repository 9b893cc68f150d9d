"""sphverify: convergence verification of SPH boundary conditions.

A weakly-compressible SPH scheme with second-order corrected operators is
run against manufactured solutions to measure how the order of
convergence of the interior scheme survives the treatment of solid walls,
inlets and outlets.

==================
Features
==================
* Corrected-gradient WCSPH scheme with particle shifting
* Thirteen manufactured solutions with symbolic source terms
* Seven solid wall treatments and four inlet/outlet treatments
* L1 errors, fitted orders and SVG convergence plots
* Parallel runs over resolutions

==================
Simple example
==================
Order of the Marrone wall with a Neumann pressure condition on the packed
concave domain:
$ sphverify verify --bc marrone --condition pressure --domain packed-concave

Wave leaving through a hybrid outlet:
$ sphverify verify-io --method hybrid --case pres-wave-out

Run the following command for help:
$ sphverify -h
"""

import gc
import logging
import time
from enum import Enum

from . import __version__, __date__, __update__
from ._convergence import (DEFAULT_RESOLUTIONS, acceptance_cases,
                           check_acceptance, open_case, run_case, solid_case)
from ._report import write_report
from .utils import SharedStudyData, must_be_list


class ConvergenceStudy:
    """Run one or more convergence studies and report them."""

    def __init__(self, **kwargs):
        """Init ConvergenceStudy."""
        logging.info(__doc__)
        logging.info(
            f"Version: {__version__}  Creation date: {__date__}  Update date: {__update__}")

        # process kwargs
        necessary_key = ['kind']
        default_value = {"resolutions": list(DEFAULT_RESOLUTIONS), "n_saves": 5,
                         "nproc": 1, "output": "sphverify", "acceptance": False,
                         "kernel": "quintic", "intensity_threshold": 0.05,
                         "average_window": 50, "progress": True, "plot": True,
                         }
        none_key = ['method', 'condition', 'domain', 'case', 'steps']
        scheme_key = ['c_o', 'rho_o', 'nu', 'dt', 'shift_every', 'delta',
                      'p_background', 'gravity', 'neighbor_method', 'hdx']
        accept_keys = ['cases', 'reports', 'verdicts', 'passed']
        if not set(necessary_key).issubset(set(kwargs)):
            raise ValueError("Must give neccessary key: %s" % ", ".join(necessary_key))
        unsupported = set(kwargs) - (set(necessary_key) | set(default_value)
                                     | set(none_key) | set(scheme_key))
        if unsupported:
            raise ValueError("Unsupported key: %s" % ", ".join(sorted(unsupported)))
        if kwargs["kind"] not in ("solid", "open"):
            raise ValueError(f"Unsupported study kind {kwargs['kind']}")
        for kk in default_value:
            kwargs.setdefault(kk, default_value[kk])
            if kwargs[kk] is None:
                kwargs[kk] = default_value[kk]
        for kk in none_key + scheme_key + accept_keys:
            kwargs.setdefault(kk, None)
        if kwargs["hdx"] not in (None, 1.2):
            raise ValueError("Studies use h = 1.2 dx")
        kwargs["resolutions"] = [int(n) for n in must_be_list(kwargs["resolutions"])]
        if kwargs["domain"] is not None:
            kwargs["domain"] = kwargs["domain"].replace("-", "_")
        if kwargs["method"] is None and not kwargs["acceptance"]:
            raise ValueError("Must give a method unless running the acceptance table")
        self.scheme_key = scheme_key
        self.__dict__.update(kwargs)

    def run(self):
        """Run the studies, write reports and check acceptance.

        Returns
        -------
        bool
            False when an acceptance entry misses its bound.
        """
        processthing = [self.Status.SETUP, self.Status.RUN]
        if self.acceptance:
            processthing.append(self.Status.ACCEPT)
        processthing.append(self.Status.REPORT)
        self._process(processthing)
        return self.passed is not False

    class Status(Enum):
        """ConvergenceStudy status."""

        INIT = "Init"
        SETUP = "Collect verification cases"
        RUN = "Run simulations at every resolution"
        REPORT = "Write reports"
        ACCEPT = "Check acceptance bounds"

        def __str__(self):
            """Return description of the status."""
            return self.value

    def _process(self, steps):
        timearray = [time.perf_counter()]
        for i, runstep in enumerate(steps, 1):
            if runstep == self.Status.SETUP:
                _CollectCases(self).collect()
            elif runstep == self.Status.RUN:
                _RunCases(self).run()
            elif runstep == self.Status.REPORT:
                _WriteReports(self).write()
            elif runstep == self.Status.ACCEPT:
                _CheckAcceptance(self).check()
            gc.collect()
            timearray.append(time.perf_counter())
            logging.info(
                f"Step {i}: Done! Time consumed (s): {timearray[-1]-timearray[-2]:.3f} ({runstep})")

        # Summary
        logging.info("====== Summary ======")
        for report in self.reports or []:
            logging.info(
                f"{report.method} {report.case} {report.domain}: "
                f"order p = {report.order_p:.3f}, order u = {report.order_u:.3f}")
        for verdict in self.verdicts or []:
            if verdict is not None:
                logging.info(
                    f"{verdict['name']}: order {verdict['field']} "
                    f"{verdict['comparator']} {verdict['bound']} -> "
                    f"{'PASS' if verdict['passed'] else 'FAIL'}")
        logging.info(f"Total time(s): {timearray[-1]-timearray[0]:.3f} s")


class _CollectCases(SharedStudyData):
    def __init__(self, study):
        SharedStudyData.__init__(self, study, [
            'kind', 'method', 'condition', 'domain', 'case', 'steps',
            'acceptance', 'c_o'], ['cases'])

    def collect(self):
        entries = []
        if self.acceptance:
            for case, field_name, bound, comparator in acceptance_cases(self.kind):
                if self.method is not None and case.method != self.method:
                    continue
                if self._selected(case):
                    if self.steps is not None:
                        case.steps = self.steps
                    entries.append((case, (field_name, bound, comparator)))
        if not entries and self.method is not None:
            entries.append((self._case(), None))
        if not entries:
            raise ValueError("No verification case matches the selection")
        self.cases = entries
        logging.info(f"{len(entries)} verification case(s) collected")
        self.returnkeys()

    def _selected(self, case):
        if self.kind == "solid":
            return ((self.condition is None or case.condition == self.condition)
                    and (self.domain is None or case.domain == self.domain))
        return self.case is None or case.condition == self.case

    def _case(self):
        c_o = 20. if self.c_o is None else self.c_o
        if self.kind == "solid":
            if self.condition is None or self.domain is None:
                raise ValueError("Solid studies need a condition and a domain")
            return solid_case(self.method, self.condition, self.domain,
                              steps=self.steps, c_o=c_o)
        if self.case is None:
            raise ValueError("Open boundary studies need a case")
        case = open_case(self.method, self.case, steps=self.steps, c_o=c_o)
        if self.c_o is not None:
            case.c_o = self.c_o
        return case


class _RunCases(SharedStudyData):
    def __init__(self, study):
        SharedStudyData.__init__(self, study, [
            'cases', 'resolutions', 'n_saves', 'nproc', 'kernel', 'progress',
            'intensity_threshold', 'average_window', 'scheme_key', 'output'],
            ['reports'])
        self.overrides = {key: getattr(study, key) for key in self.scheme_key
                          if key not in ('hdx', 'c_o')}

    def run(self):
        options = {"intensity_threshold": self.intensity_threshold,
                   "average_window": self.average_window, "output": self.output}
        self.reports = [
            run_case(case, self.resolutions, n_saves=self.n_saves,
                     nproc=self.nproc, kernel=self.kernel,
                     progress=self.progress, options=options, **self.overrides)
            for case, _ in self.cases]
        self.returnkeys()


class _WriteReports(SharedStudyData):
    def __init__(self, study):
        SharedStudyData.__init__(self, study, [
            'reports', 'verdicts', 'output', 'plot'], [])

    def write(self):
        write_report(self.reports, self.output, self.verdicts, plot=self.plot)


class _CheckAcceptance(SharedStudyData):
    def __init__(self, study):
        SharedStudyData.__init__(self, study, ['reports', 'cases'],
                                 ['verdicts', 'passed'])

    def check(self):
        self.verdicts = []
        for report, (case, entry) in zip(self.reports, self.cases):
            if entry is None:
                self.verdicts.append(None)
                continue
            field_name, bound, comparator = entry
            passed = check_acceptance(report, field_name, bound, comparator)
            if not passed:
                orders = ", ".join(f"{name} = {report.order(name):.3g}"
                                   for name in field_name.split(","))
                logging.error(
                    f"{case.name} misses its bound: order {orders} "
                    f"(required {comparator} {bound})")
            self.verdicts.append({"name": case.name, "field": field_name,
                                  "bound": bound, "comparator": comparator,
                                  "passed": passed})
        self.passed = all(v["passed"] for v in self.verdicts if v is not None)
        self.returnkeys()
