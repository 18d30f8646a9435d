"""Exact solver for the audit LP and its dual optimal face.

The audit value of a distribution f is

    max  l'(Pi'1 - f)   over transport plans Pi >= 0
    s.t. <C, Pi> <= epsilon,   <D, Pi> = 0,   Pi 1 = f.

Forbidden moves (D entries of 1) are removed from the variable set
before solving rather than carried as a constraint row; the reported
multiplier for the indicator matrix is reconstructed afterwards as the
smallest nonnegative value that makes the eliminated entries dual
feasible.

Multiplier sign convention: the certificate stores the nonnegative
multipliers (nu, mu, lambda) of the minimization dual

    min  epsilon*nu + f'lambda
    s.t. nu*C_ij + mu*D_ij + lambda_i >= l_j   for all i, j,

so nu, mu >= 0 and lambda >= l entrywise. Published treatments of this
dual sometimes negate all multipliers; negating the stored values
recovers that form. The one-sided directional derivative of the audit
value at f in direction h is

    min { (lambda - l)'h : (nu, mu, lambda) dual optimal },

the usual subgradient formula for a concave piecewise-linear value
function.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import simplex
from .errors import DegenerateFaceError, SolverError
from .sample_space import CostStructure

FEAS_TOL = 1e-8
SIMPLEX_TOL = 1e-10


def _as_prob_vector(f, K: int) -> np.ndarray:
    f = np.asarray(getattr(f, "f", f), dtype=float)
    if f.shape != (K,):
        raise ValueError(f"distribution has shape {f.shape}, expected ({K},)")
    if f.min(initial=0.0) < -SIMPLEX_TOL:
        raise ValueError("distribution has negative entries")
    if abs(f.sum() - 1.0) > SIMPLEX_TOL:
        raise ValueError(f"distribution sums to {f.sum():.12f}, not 1")
    return f


@dataclass(frozen=True, eq=False)
class AuditProblem:
    """Loss vector, transport costs, forbidden moves, and budget."""

    l: np.ndarray
    C: np.ndarray
    D: np.ndarray
    epsilon: float
    _template: dict = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        l = np.asarray(self.l, dtype=float)
        if l.ndim != 1 or not np.isfinite(l).all() or (l < 0).any():
            raise ValueError("losses must be a finite nonnegative vector")
        CostStructure(C=self.C, D=self.D)  # shared invariants: symmetry, zero diagonals
        C = np.asarray(self.C, dtype=float)
        D = np.asarray(self.D, dtype=np.int8)
        K = l.shape[0]
        if C.shape != (K, K):
            raise ValueError("cost matrix shape does not match the loss vector")
        if not np.isfinite(self.epsilon) or self.epsilon < 0:
            raise ValueError("budget epsilon must be finite and nonnegative")
        for a in (l, C, D):
            a.flags.writeable = False
        object.__setattr__(self, "l", l)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)
        object.__setattr__(self, "epsilon", float(self.epsilon))
        object.__setattr__(self, "_template", self._build_template())

    @property
    def K(self) -> int:
        return self.l.shape[0]

    def _build_template(self) -> dict:
        """Columns of the audit LP with forbidden pairs eliminated."""
        K = self.K
        src, dst = np.nonzero(self.D == 0)
        nvar = src.size + 1  # allowed pairs plus the budget slack
        A = np.zeros((K + 1, nvar))
        A[0, :-1] = self.C[src, dst]
        A[0, -1] = 1.0
        A[1 + src, np.arange(src.size)] = 1.0
        c = np.concatenate([self.l[dst], [0.0]])
        diag_cols = np.flatnonzero(src == dst)
        if diag_cols.size != K:
            raise ValueError("corrupted indicator matrix: diagonal moves must stay allowed")
        basis0 = np.concatenate([diag_cols, [nvar - 1]])
        return {"src": src, "dst": dst, "A": A, "c": c, "basis0": basis0}


@dataclass(frozen=True, eq=False)
class TransportPlan:
    """Nonnegative coupling whose rows marginalize to the audited f."""

    Pi: np.ndarray

    def __post_init__(self):
        Pi = np.asarray(self.Pi, dtype=float)
        Pi.flags.writeable = False
        object.__setattr__(self, "Pi", Pi)

    def validate(self, problem: AuditProblem, f) -> None:
        f = _as_prob_vector(f, problem.K)
        if self.Pi.min() < -FEAS_TOL:
            raise AssertionError("plan has negative mass")
        if np.abs(self.Pi.sum(axis=1) - f).max() > FEAS_TOL:
            raise AssertionError("plan rows do not marginalize to f")
        if float((problem.C * self.Pi).sum()) > problem.epsilon + FEAS_TOL:
            raise AssertionError("plan exceeds the transport budget")
        if np.abs(self.Pi[problem.D == 1]).max(initial=0.0) > 0.0:
            raise AssertionError("plan uses a forbidden move")


@dataclass(frozen=True, eq=False)
class DualCertificate:
    """Nonnegative multipliers certifying the optimum (see module docstring)."""

    nu: float
    mu: float
    lam: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float)
        lam.flags.writeable = False
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "nu", float(self.nu))
        object.__setattr__(self, "mu", float(self.mu))

    def objective(self, problem: AuditProblem, f) -> float:
        f = _as_prob_vector(f, problem.K)
        return problem.epsilon * self.nu + float(f @ self.lam)

    def feasibility_margin(self, problem: AuditProblem) -> float:
        """Smallest slack of nu*C_ij + mu*D_ij + lambda_i - l_j; >= -1e-8 when valid."""
        lhs = self.nu * problem.C + self.mu * np.asarray(problem.D, dtype=float)
        lhs = lhs + self.lam[:, None] - problem.l[None, :]
        return float(lhs.min())

    def validate(self, problem: AuditProblem, f, primal_value: float) -> None:
        if self.nu < -FEAS_TOL or self.mu < -FEAS_TOL:
            raise AssertionError("multipliers must be nonnegative")
        if self.feasibility_margin(problem) < -FEAS_TOL:
            raise AssertionError("dual certificate is infeasible")
        f = _as_prob_vector(f, problem.K)
        lp_optimum = primal_value + float(problem.l @ f)
        if abs(self.objective(problem, f) - lp_optimum) > FEAS_TOL * (1.0 + abs(lp_optimum)):
            raise AssertionError("dual objective does not reproduce the primal optimum")


@dataclass(frozen=True, eq=False)
class LpSolution:
    """Audit value with its optimal plan and dual certificate."""

    value: float
    plan: TransportPlan
    dual: DualCertificate
    budget_active: bool
    f: np.ndarray = None

    def dual_optimum(self, problem: AuditProblem) -> float:
        """Optimal value of the LP objective l'Pi'1, i.e. value + l'f."""
        return self.value + float(problem.l @ self.f)

    def validate(self, problem: AuditProblem) -> None:
        self.plan.validate(problem, self.f)
        self.dual.validate(problem, self.f, self.value)
        direct = float(problem.l @ (self.plan.Pi.sum(axis=0) - self.f))
        if abs(direct - self.value) > FEAS_TOL:
            raise AssertionError("stored value disagrees with the plan objective")
        if self.value < -FEAS_TOL:
            raise AssertionError("audit value must be nonnegative")


def solve_audit_lp(problem: AuditProblem, f) -> LpSolution:
    """Solve the audit LP at distribution f exactly.

    Returns a vertex-optimal plan, the audit value, and a dual
    certificate. The identity plan diag(f) together with the budget
    slack is always a feasible starting basis, so no phase-1 work is
    needed here.
    """
    f = _as_prob_vector(f, problem.K)
    t = problem._template
    b = np.concatenate([[problem.epsilon], f])
    res = simplex.solve_standard_form(t["c"], t["A"], b, basis=t["basis0"].copy())
    if res.status != simplex.OPTIMAL:
        raise SolverError(f"audit LP terminated with status {res.status}")

    K = problem.K
    Pi = np.zeros((K, K))
    Pi[t["src"], t["dst"]] = res.x[:-1]
    np.clip(Pi, 0.0, None, out=Pi)

    nu = max(0.0, float(res.y[0]))
    lam = res.y[1:].copy()
    forbidden = problem.D == 1
    if forbidden.any():
        i_idx, j_idx = np.nonzero(forbidden)
        deficit = problem.l[j_idx] - nu * problem.C[i_idx, j_idx] - lam[i_idx]
        mu = max(0.0, float(deficit.max()))
    else:
        mu = 0.0

    value = float(problem.l @ (Pi.sum(axis=0) - f))
    if value < 0.0:
        if value < -FEAS_TOL:
            raise SolverError(f"negative audit value {value}")
        value = 0.0
    spent = float((problem.C * Pi).sum())
    budget_active = problem.epsilon - spent <= FEAS_TOL * (1.0 + problem.epsilon)

    f_frozen = f.copy()
    f_frozen.flags.writeable = False
    return LpSolution(
        value=value,
        plan=TransportPlan(Pi=Pi),
        dual=DualCertificate(nu=nu, mu=mu, lam=lam),
        budget_active=budget_active,
        f=f_frozen,
    )


class DualFace:
    """Linear optimization over the dual optimal face at a fixed f.

    The face program min{h'lambda} over dual optimal (nu, mu, lambda)
    is solved through its own dual, which keeps the simplex basis at
    K+1 rows regardless of how many dual-feasibility constraints the
    face carries:

        max  sum_a pi_a * l_dst(a) + t * v
        s.t. sum_{a in row i} pi_a + t f_i = h_i        (one row per i)
             sum_a pi_a C_a + epsilon * t + u = 0
             pi >= 0, u >= 0, t free,

    where a ranges over allowed moves and v is the LP optimum
    value + l'f passed by the caller.
    """

    def __init__(self, problem: AuditProblem, f, dual_optimum: float):
        self.problem = problem
        self.f = _as_prob_vector(f, problem.K)
        self.dual_optimum = float(dual_optimum)
        t = problem._template
        K = problem.K
        na = t["src"].size
        # columns: pi_a, t+, t-, u
        A = np.zeros((K + 1, na + 3))
        A[t["src"], np.arange(na)] = 1.0
        A[:K, na] = self.f
        A[:K, na + 1] = -self.f
        A[K, :na] = problem.C[t["src"], t["dst"]]
        A[K, na] = problem.epsilon
        A[K, na + 1] = -problem.epsilon
        A[K, na + 2] = 1.0
        c = np.concatenate([problem.l[t["dst"]], [self.dual_optimum, -self.dual_optimum, 0.0]])
        self._A = A
        self._c = c
        self._K = K

    def minimize(self, h) -> float:
        """min over the face of h'lambda."""
        h = np.asarray(h, dtype=float)
        if h.shape != (self._K,):
            raise ValueError(f"direction has shape {h.shape}, expected ({self._K},)")
        b = np.concatenate([h, [0.0]])
        res = simplex.solve_standard_form(self._c, self._A, b)
        if res.status == simplex.UNBOUNDED:
            raise DegenerateFaceError(
                "dual face is empty; the supplied dual optimum is not tight"
            )
        if res.status == simplex.INFEASIBLE:
            raise DegenerateFaceError(
                "directional derivative is unbounded below along this direction"
            )
        return res.value

    def derivative(self, h) -> float:
        """One-sided derivative of the audit value at f in direction h."""
        h = np.asarray(h, dtype=float)
        return self.minimize(h) - float(self.problem.l @ h)


def optimize_over_dual_face(problem: AuditProblem, f, direction, dual_optimum: float) -> float:
    """Exact directional derivative of the audit value function.

    ``dual_optimum`` must be the LP optimum for the same (problem, f),
    i.e. ``solution.dual_optimum(problem)``. Raises DegenerateFaceError
    when the face program is empty or unbounded.
    """
    return DualFace(problem, f, dual_optimum).derivative(direction)


def is_dual_unique(problem: AuditProblem, f, tol: float = 1e-7) -> bool:
    """Whether the dual optimal face is a single point in lambda.

    Checks the spread of each lambda coordinate over the face. A
    singleton face makes the audit value differentiable at f, so its
    sampling distribution is Gaussian; spreads above ``tol`` mean the
    non-Gaussian regime is in play.
    """
    sol = solve_audit_lp(problem, f)
    face = DualFace(problem, f, sol.dual_optimum(problem))
    K = problem.K
    for k in range(K):
        e = np.zeros(K)
        e[k] = 1.0
        lo = face.minimize(e)
        try:
            hi = -face.minimize(-e)
        except DegenerateFaceError:
            return False
        if hi - lo > tol:
            return False
    return True
