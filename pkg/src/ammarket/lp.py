"""Dual-reporting linear-program layer.

Problems are stated in one canonical minimization form

    min c'x  s.t.  A_eq x = b_eq,  A_ub x <= b_ub,  lb <= x <= ub,

and solved with scipy's HiGHS backend. Returned multipliers follow the
Lagrangian

    L = c'x + lam'(A_eq x - b_eq) + mu'(A_ub x - b_ub)
        + sig_lb'(lb - x) + sig_ub'(x - ub),

with mu, sig_lb, sig_ub >= 0, so the envelope derivative of the optimal value
with respect to any parameter p is dV/dp = dL/dp evaluated at the optimum.
Every Optimal solve is re-certified (primal/dual feasibility, complementary
slackness, strong duality) before it is returned.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog


class LpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class SolverFailure(RuntimeError):
    """Numerical failure or an uncertified solution; never a silent wrong answer."""


def _as_csr(a, n):
    if a is None:
        return sp.csr_matrix((0, n))
    return sp.csr_matrix(a)


@dataclass(eq=False)
class LinearProgram:
    """One immutable minimization problem with labeled variables."""

    c: np.ndarray
    a_ub: sp.csr_matrix | None = None
    b_ub: np.ndarray | None = None
    a_eq: sp.csr_matrix | None = None
    b_eq: np.ndarray | None = None
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None
    var_labels: list[str] | None = None
    ub_row_labels: list[str] | None = None
    eq_row_labels: list[str] | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        n = self.c.shape[0]
        self.a_ub = _as_csr(self.a_ub, n)
        self.a_eq = _as_csr(self.a_eq, n)
        self.b_ub = np.zeros(0) if self.b_ub is None else np.asarray(self.b_ub, dtype=float)
        self.b_eq = np.zeros(0) if self.b_eq is None else np.asarray(self.b_eq, dtype=float)
        self.lb = np.zeros(n) if self.lb is None else np.asarray(self.lb, dtype=float)
        self.ub = np.full(n, np.inf) if self.ub is None else np.asarray(self.ub, dtype=float)
        if self.var_labels is None:
            self.var_labels = [f"x[{i}]" for i in range(n)]
        if self.ub_row_labels is None:
            self.ub_row_labels = [f"r_ub[{i}]" for i in range(self.a_ub.shape[0])]
        if self.eq_row_labels is None:
            self.eq_row_labels = [f"r_eq[{i}]" for i in range(self.a_eq.shape[0])]
        if self.a_ub.shape != (self.b_ub.shape[0], n) or self.a_eq.shape != (self.b_eq.shape[0], n):
            raise ValueError("constraint matrix shapes do not match rhs/variable counts")
        if self.lb.shape != (n,) or self.ub.shape != (n,):
            raise ValueError("bounds must have one entry per variable")
        if len(self.var_labels) != n or len(set(self.var_labels)) != n:
            raise ValueError("variable labels must be unique and cover every variable")
        if len(self.ub_row_labels) != self.a_ub.shape[0] or len(self.eq_row_labels) != self.a_eq.shape[0]:
            raise ValueError("row labels must match row counts")
        if np.any(self.lb > self.ub):
            raise ValueError("lower bounds exceed upper bounds")

    @property
    def n_vars(self) -> int:
        return self.c.shape[0]

    def to_lp_text(self) -> str:
        """LP-style text serialization for debugging against external solvers."""

        def expr(row):
            terms = []
            row = row.tocoo()
            for j, v in zip(row.col, row.data):
                sign = "+" if v >= 0 else "-"
                terms.append(f"{sign} {abs(v):.12g} {self.var_labels[j]}")
            return " ".join(terms) if terms else "0"

        lines = ["Minimize", " obj: " + expr(sp.csr_matrix(self.c))]
        lines.append("Subject To")
        for i in range(self.a_eq.shape[0]):
            lines.append(f" {self.eq_row_labels[i]}: {expr(self.a_eq.getrow(i))} = {self.b_eq[i]:.12g}")
        for i in range(self.a_ub.shape[0]):
            lines.append(f" {self.ub_row_labels[i]}: {expr(self.a_ub.getrow(i))} <= {self.b_ub[i]:.12g}")
        lines.append("Bounds")
        for j, name in enumerate(self.var_labels):
            lo = "-inf" if np.isneginf(self.lb[j]) else f"{self.lb[j]:.12g}"
            hi = "+inf" if np.isposinf(self.ub[j]) else f"{self.ub[j]:.12g}"
            lines.append(f" {lo} <= {name} <= {hi}")
        lines.append("End")
        return "\n".join(lines)


@dataclass(eq=False)
class LpSolution:
    """Certified primal/dual pair (sign conventions in the module docstring)."""

    status: LpStatus
    primal: np.ndarray | None = None
    obj_value: float | None = None
    eq_duals: np.ndarray | None = None  # lam, free sign
    ineq_duals: np.ndarray | None = None  # mu >= 0
    lb_duals: np.ndarray | None = None  # sig_lb >= 0
    ub_duals: np.ndarray | None = None  # sig_ub >= 0


def _certify(lp: LinearProgram, sol: LpSolution, tol: float):
    x, lam, mu = sol.primal, sol.eq_duals, sol.ineq_duals
    slb, sub = sol.lb_duals, sol.ub_duals
    scale_b = max(1.0, np.abs(lp.b_ub).max(initial=0.0), np.abs(lp.b_eq).max(initial=0.0))
    scale_c = max(1.0, np.abs(lp.c).max(initial=0.0))
    scale_x = max(1.0, np.abs(x).max(initial=0.0))

    checks = {}
    checks["primal_eq"] = np.abs(lp.a_eq @ x - lp.b_eq).max(initial=0.0) / scale_b
    checks["primal_ub"] = np.maximum(lp.a_ub @ x - lp.b_ub, 0.0).max(initial=0.0) / scale_b
    fin_lb = np.isfinite(lp.lb)
    fin_ub = np.isfinite(lp.ub)
    checks["primal_bounds"] = max(
        np.maximum(lp.lb[fin_lb] - x[fin_lb], 0.0).max(initial=0.0),
        np.maximum(x[fin_ub] - lp.ub[fin_ub], 0.0).max(initial=0.0),
    ) / scale_x
    checks["dual_sign"] = max(
        np.maximum(-mu, 0.0).max(initial=0.0),
        np.maximum(-slb, 0.0).max(initial=0.0),
        np.maximum(-sub, 0.0).max(initial=0.0),
    ) / scale_c
    stationarity = lp.c + lp.a_eq.T @ lam + lp.a_ub.T @ mu - slb + sub
    checks["stationarity"] = np.abs(stationarity).max(initial=0.0) / scale_c
    slack = lp.b_ub - lp.a_ub @ x
    comp_scale = max(1.0, scale_b * max(1.0, np.abs(mu).max(initial=0.0)))
    checks["comp_ub"] = np.abs(mu * slack).max(initial=0.0) / comp_scale
    gap_lb = np.where(fin_lb, x - lp.lb, 0.0)
    gap_ub = np.where(fin_ub, lp.ub - x, 0.0)
    comp_scale_x = max(1.0, scale_x * max(1.0, np.abs(slb).max(initial=0.0), np.abs(sub).max(initial=0.0)))
    checks["comp_bounds"] = max(
        np.abs(slb * gap_lb).max(initial=0.0), np.abs(sub * gap_ub).max(initial=0.0)
    ) / comp_scale_x
    dual_obj = (
        -lp.b_eq @ lam
        - lp.b_ub @ mu
        + np.sum(lp.lb[fin_lb] * slb[fin_lb])
        - np.sum(lp.ub[fin_ub] * sub[fin_ub])
    )
    checks["duality_gap"] = abs(sol.obj_value - dual_obj) / max(1.0, abs(sol.obj_value))

    worst = max(checks.values())
    if worst > tol * 10:
        detail = ", ".join(f"{k}={v:.3e}" for k, v in checks.items())
        raise SolverFailure(f"optimal solution failed certification: {detail}")


def solve_lp(lp: LinearProgram, tol: float = 1e-7) -> LpSolution:
    """Solve the program, returning a certified primal/dual pair at optimality.

    Raises SolverFailure on numerical breakdown or a solution that does not
    pass certification; infeasible and unbounded models are reported by status.
    """
    bounds = np.column_stack([lp.lb, lp.ub])
    res = linprog(
        lp.c,
        A_ub=lp.a_ub if lp.a_ub.shape[0] else None,
        b_ub=lp.b_ub if lp.b_ub.size else None,
        A_eq=lp.a_eq if lp.a_eq.shape[0] else None,
        b_eq=lp.b_eq if lp.b_eq.size else None,
        bounds=bounds,
        method="highs",
        options={"primal_feasibility_tolerance": tol, "dual_feasibility_tolerance": tol},
    )
    if res.status == 2:
        return LpSolution(status=LpStatus.INFEASIBLE)
    if res.status == 3:
        return LpSolution(status=LpStatus.UNBOUNDED)
    if res.status != 0:
        raise SolverFailure(f"LP solve failed: {res.message}")

    n_eq = lp.a_eq.shape[0]
    n_ub = lp.a_ub.shape[0]
    # scipy marginals are d(obj)/d(rhs); convert to the module's Lagrangian signs.
    eq_duals = -np.asarray(res.eqlin.marginals) if n_eq else np.zeros(0)
    ineq_duals = -np.asarray(res.ineqlin.marginals) if n_ub else np.zeros(0)
    lb_duals = np.maximum(np.asarray(res.lower.marginals, dtype=float), 0.0)
    ub_duals = np.maximum(-np.asarray(res.upper.marginals, dtype=float), 0.0)
    sol = LpSolution(
        status=LpStatus.OPTIMAL,
        primal=np.asarray(res.x, dtype=float),
        obj_value=float(res.fun),
        eq_duals=eq_duals,
        ineq_duals=ineq_duals,
        lb_duals=lb_duals,
        ub_duals=ub_duals,
    )
    _certify(lp, sol, tol)
    return sol
