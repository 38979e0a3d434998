import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heatlab import presets
from heatlab.errors import NoConvergence
from heatlab.verification import (FREE_VALUE, CheckReport, _report, _run_one, check_mehler_oracle,
                                  check_semigroup_defect, check_synge_examples,
                                  hermitian_symmetry_check, mehler_heat_residual, mehler_oracle,
                                  report_document, run_suite, semigroup_defect)


def test_mehler_oracle_solves_heat_equation():
    assert mehler_heat_residual() < 1e-6
    assert mehler_heat_residual(omega=1.7, x=-0.4, y=0.5, tau=0.2) < 1e-6
    assert float(mehler_oracle(1e-7, 1.0, 0.0, 0.5)) == pytest.approx(0.24197, abs=1e-5)
    assert float(mehler_oracle(0, 1.0, 0.0, 0.5)) == pytest.approx(FREE_VALUE, rel=1e-15)
    assert check_mehler_oracle().passed


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 2.0), st.floats(-1, 1), st.floats(-1, 1), st.floats(0.05, 1.0))
def test_mehler_oracle_symmetric_and_positive(omega, x, y, tau):
    a, b = float(mehler_oracle(omega, x, y, tau)), float(mehler_oracle(omega, y, x, tau))
    assert a > 0
    assert a == pytest.approx(b, rel=1e-14)


def test_semigroup_defect():
    assert semigroup_defect(0.5, 0.5, 0.5, 0.5) > 1e-3
    assert semigroup_defect(1e-4, 1e-4, 0.5, 0.5) < 1e-8
    assert semigroup_defect(0.5, 0.5, 0.5, 0.5, (-math.inf, math.inf)) < 1e-10
    assert semigroup_defect(0.3, 0.2, 0.1, -0.4, (-math.inf, math.inf)) < 1e-10
    rep = check_semigroup_defect()
    assert rep.passed and rep.tolerance == 1.0


def test_report_single_part_keeps_raw_tolerance():
    rep = _report("x", [("err", 3e-7, 1e-6)])
    assert rep.residual == 3e-7 and rep.tolerance == 1e-6 and rep.passed
    assert rep.quantities == {"err": 3e-7, "err_tol": 1e-6}


def test_report_normalises_mixed_parts():
    rep = _report("x", [("a", 5e-7, 1e-6), ("b", 2e-3, 1e-3, "ge")], extra=1)
    assert rep.tolerance == 1.0
    assert rep.residual == pytest.approx(0.5)
    assert rep.passed and rep.quantities["extra"] == 1
    bad = _report("x", [("a", 5e-7, 1e-6), ("b", 5e-4, 1e-3, "ge")])
    assert bad.residual == pytest.approx(2.0) and not bad.passed
    assert not _report("x", [("b", 0.0, 1e-3, "ge")]).passed
    assert _report("x", [("a", 0.0, 0.0), ("c", 0.0, 1.0)]).passed


def test_run_one_converts_library_errors():
    def fails(seed):
        raise NoConvergence("nope")
    rep = _run_one("broken", fails, 0)
    assert not rep.passed and rep.residual == math.inf
    assert "NoConvergence" in rep.quantities["error"]


def test_report_document_excludes_runtime():
    reps = [CheckReport("a", {"v": 1.0}, 1.0, 0.5, True, runtime_ms=12)]
    doc = report_document(reps, "fast", 3)
    assert doc == {"suite": "fast", "seed": 3, "all_passed": True,
                   "checks": [{"check_id": "a", "quantities": {"v": 1.0}, "tolerance": 1.0,
                               "residual": 0.5, "passed": True}]}
    assert reps[0].as_dict(with_runtime=True)["runtime_ms"] == 12


def test_fast_suite_deterministic_and_thread_independent():
    a = run_suite("fast", seed=0)
    b = run_suite("fast", seed=0, threads=3)
    assert a[0].check_id == "mehler-oracle-validation"
    assert [r.check_id for r in a] == [r.check_id for r in b]
    assert json.dumps(report_document(a, "fast", 0), default=repr, sort_keys=True) == \
        json.dumps(report_document(b, "fast", 0), default=repr, sort_keys=True)
    assert all(r.passed for r in a)


def test_hermitian_symmetry_abelian():
    # anti-Hermitian Abelian connection: a_k(x, y)^dagger = a_k(y, x)
    prob = presets.constant_abelian((0.3, -0.2), anti_hermitian=True)
    rep = hermitian_symmetry_check(prob, K=1, n_pairs=3, seed=5)
    assert rep.passed
    assert rep.quantities["n_pairs"] == 3


def test_synge_examples_check():
    rep = check_synge_examples()
    assert rep.passed
    assert rep.quantities["sphere_quadratic_coef"] == pytest.approx(1 / 6, abs=1e-3)
