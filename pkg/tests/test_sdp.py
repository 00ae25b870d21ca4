import json
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stars_isac.sdp import (ConicProgram, LinExpr, MatExpr, SolverError, Status, check_kkt,
                            coords_to_herm, dump_problem, epigraph_frobenius,
                            epigraph_trace_inverse, herm_basis, herm_embed, herm_extract,
                            herm_to_coords, solve)
from stars_isac.validation import (analytic_sdp_cases, certificate_instance, check_sdp_corpus,
                                   check_trace_inverse)


def _eigen_lp():
    p = ConicProgram()
    X = p.add_hermitian("X", 2)
    p.minimize(X.inner(np.diag([1.0, 2.0])))
    p.add_eq(X.trace(), 1.0)
    return p, X


def _fix(prog, var, values):
    for i, v in enumerate(values):
        prog.add_eq(LinExpr(np.array([var.offset + i]), np.array([1.0])), float(v))


def test_eigenvalue_lp():
    p, X = _eigen_lp()
    sol = solve(p, tol=1e-9)
    assert sol.status == Status.OPTIMAL
    assert sol.objective_value == pytest.approx(1.0, abs=1e-7)
    np.testing.assert_allclose(sol.value(X), np.diag([1.0, 0.0]), atol=1e-6)
    rep = check_kkt(p, sol)
    assert max(rep.primal_residual, rep.dual_residual, abs(rep.gap)) < 1e-6


def test_two_by_two_psd_boundary():
    p = ConicProgram()
    t = p.add_free("t")
    p.add_lmi(MatExpr.from_entries([[t[0], 1.0], [None, t[0]]]))
    p.minimize(t[0])
    sol = solve(p, tol=1e-9)
    assert sol.value(t)[0] == pytest.approx(1.0, abs=1e-6)


def test_perturbed_solution_residual():
    p, X = _eigen_lp()
    sol = solve(p, tol=1e-9)
    x = sol.x.copy()
    x[X.offset:X.offset + 2] += 0.1
    rep = check_kkt(p, replace(sol, x=x))
    assert rep.primal_residual == pytest.approx(0.2, abs=1e-6)


def test_infeasible_program():
    p = ConicProgram()
    X = p.add_hermitian("X", 2)
    p.minimize(X.trace())
    p.add_eq(X.trace(), -1.0)
    sol = solve(p, tol=1e-8)
    assert sol.status == Status.INFEASIBLE
    rep = check_kkt(p, sol)
    assert not rep.gap_defined and np.isnan(rep.gap)


def test_solve_rejects_nonpositive_tol():
    p, _ = _eigen_lp()
    with pytest.raises(ValueError):
        solve(p, tol=0.0)


@pytest.mark.parametrize("U0,val", [(np.eye(2), 2.0), (np.diag([2.0, 4.0]), 0.75)])
def test_trace_inverse_fixed(U0, val):
    p = ConicProgram()
    U = p.add_symmetric("U", 2, psd=False)
    _fix(p, U, herm_to_coords(U0, real=True))
    epigraph_trace_inverse(p, U)
    assert solve(p, tol=1e-9).objective_value == pytest.approx(val, abs=1e-6)


def test_trace_inverse_random_hermitian():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    U0 = A @ A.conj().T + np.eye(3)
    p = ConicProgram()
    U = p.add_hermitian("U", 3, psd=False)
    _fix(p, U, herm_to_coords(U0))
    epigraph_trace_inverse(p, U)
    ref = np.real(np.trace(np.linalg.inv(U0)))
    assert abs(solve(p, tol=1e-9).objective_value - ref) / ref < 1e-6


@pytest.mark.parametrize("E,val", [(np.zeros(4), 0.0), (np.array([1.0, 2.0, 2.0, 0.0]), 9.0)])
def test_frobenius_epigraph(E, val):
    p = ConicProgram()
    e = p.add_free("e", E.size)
    _fix(p, e, E)
    t = epigraph_frobenius(p, e.linmap(np.eye(E.size)))
    sol = solve(p, tol=1e-9)
    assert sol.value(t)[0] == pytest.approx(val, abs=1e-6)


def test_arrow_forms_agree():
    p, _ = certificate_instance(np.random.default_rng(1), n=3, m=3)
    X = p.variables["X"]
    epigraph_frobenius(p, X.linmap(np.eye(X.size)), weight=0.5)
    a = solve(p, tol=1e-9, lower_arrows=True)
    b = solve(p, tol=1e-9, lower_arrows=False)
    assert a.objective_value == pytest.approx(b.objective_value, abs=1e-6)


def test_analytic_corpus_values():
    for prog, val in analytic_sdp_cases():
        sol = solve(prog, tol=1e-9)
        assert sol.status == Status.OPTIMAL
        assert sol.objective_value == pytest.approx(val, abs=1e-6)


def test_certificate_instances_small():
    assert check_sdp_corpus(certificates=3, seed=5).passed
    assert check_trace_inverse(count=2).passed


def test_duplicate_variable_rejected():
    p = ConicProgram()
    p.add_free("x")
    with pytest.raises(ValueError):
        p.add_free("x")


def test_dump_round_trip(tmp_path):
    p, _ = _eigen_lp()
    text = dump_problem(p, tmp_path / "prog.json")
    doc = json.loads((tmp_path / "prog.json").read_text())
    assert json.loads(text) == doc
    assert doc["n"] == p.n and len(doc["eq"]) == 1 and doc["variables"][0]["name"] == "X"


def test_solver_error_carries_status():
    err = SolverError(Status.MAX_ITER, "block")
    assert err.status is Status.MAX_ITER and "MaxIter" in str(err)


def test_basis_is_orthonormal():
    B = herm_basis(3)
    G = np.real(np.einsum("aij,bji->ab", B, B))
    np.testing.assert_allclose(G, np.eye(9), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2 ** 31 - 1), st.booleans())
def test_coordinates_round_trip(d, seed, real):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((d, d)) + (0 if real else 1j) * rng.standard_normal((d, d))
    X = A + A.conj().T
    x = herm_to_coords(X, real=real)
    np.testing.assert_allclose(coords_to_herm(x, d, real=real), X, atol=1e-12)
    # coordinates are isometric for the real trace inner product
    assert x @ x == pytest.approx(np.real(np.trace(X @ X)), rel=1e-9, abs=1e-9)
    np.testing.assert_allclose(herm_extract(herm_embed(X)), X, atol=1e-12)
    # the real embedding has each eigenvalue twice
    w = np.linalg.eigvalsh(X)
    np.testing.assert_allclose(np.linalg.eigvalsh(herm_embed(X)), np.sort(np.repeat(w, 2)), atol=1e-9)
