"""Kernel SVMs trained by SMO with second-order working-set selection.

Both solvers work on the signed kernel matrix ``Q_ij = y_i y_j K(x_i, x_j)``.

* C-SVC: ``min 1/2 a'Qa - e'a`` s.t. ``y'a = 0``, ``0 <= a <= C``.
* nu-SVC: ``min 1/2 a'Qa`` s.t. ``y'a = 0``, ``e'a = nu * l``, ``0 <= a <= 1``.
  Both equality constraints are kept by only ever updating two multipliers
  that share a label.  The solution is rescaled by the margin ``r`` so the
  decision function has unit functional margin.

Multiclass problems are split one-vs-one; each sample gets one vote per
pair and ties go to the lower class index.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import ConvergenceWarning

TAU = 1e-12


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


def linear_kernel(A: np.ndarray, B: np.ndarray, gamma: float = 1.0) -> np.ndarray:
    return A @ B.T


KERNELS = {"rbf": rbf_kernel, "linear": linear_kernel}


class DegenerateNuError(ValueError):
    """The nu-SVC optimum has zero margin, so no unit-margin classifier exists."""


@dataclass
class DualSolution:
    alpha: np.ndarray  # multipliers on the solver's own scale
    rho: float
    r: float  # nu-SVC margin; 1.0 for C-SVC
    n_iter: int
    converged: bool
    gradient: np.ndarray


def _pair_update(alpha, G, Q, QD, y, i, j, Ci, Cj):
    """Analytic two-variable step with box clipping."""
    Qi, Qj = Q[i], Q[j]
    ai, aj = alpha[i], alpha[j]
    if y[i] != y[j]:
        quad = max(QD[i] + QD[j] + 2.0 * Qi[j], TAU)
        delta = (-G[i] - G[j]) / quad
        diff = ai - aj
        ni, nj = ai + delta, aj + delta
        if diff > 0:
            if nj < 0:
                nj, ni = 0.0, diff
        elif ni < 0:
            ni, nj = 0.0, -diff
        if diff > Ci - Cj:
            if ni > Ci:
                ni, nj = Ci, Ci - diff
        elif nj > Cj:
            nj, ni = Cj, Cj + diff
    else:
        quad = max(QD[i] + QD[j] - 2.0 * Qi[j], TAU)
        delta = (G[i] - G[j]) / quad
        total = ai + aj
        ni, nj = ai - delta, aj + delta
        if total > Ci:
            if ni > Ci:
                ni, nj = Ci, total - Ci
        elif nj < 0:
            nj, ni = 0.0, total
        if total > Cj:
            if nj > Cj:
                nj, ni = Cj, total - Cj
        elif ni < 0:
            ni, nj = 0.0, total
    G += Qi * (ni - ai) + Qj * (nj - aj)
    alpha[i], alpha[j] = ni, nj


def solve_c_svc(K: np.ndarray, y: np.ndarray, C: float, eps: float = 1e-3, max_iter: int | None = None):
    n = y.size
    Q = (y[:, None] * y[None, :]) * K
    QD = np.diag(Q).copy()
    alpha = np.zeros(n)
    G = -np.ones(n)
    max_iter = max_iter or max(10_000, 100 * n)
    pos, neg = y > 0, y < 0
    converged = False
    it = 0
    for it in range(max_iter):
        up = (pos & (alpha < C)) | (neg & (alpha > 0))
        low = (pos & (alpha > 0)) | (neg & (alpha < C))
        yG = y * G
        if not up.any() or not low.any():
            converged = True
            break
        minus_yG = np.where(up, -yG, -np.inf)
        i = int(np.argmax(minus_yG))
        gmax = minus_yG[i]
        gmax2 = np.max(np.where(low, yG, -np.inf))
        if gmax + gmax2 < eps:
            converged = True
            break
        b = gmax + yG
        quad = QD[i] + QD - 2.0 * y[i] * y * Q[i]
        quad = np.where(quad > 0, quad, TAU)
        obj = np.where(low & (b > 0), -(b * b) / quad, np.inf)
        j = int(np.argmin(obj))
        if not np.isfinite(obj[j]):
            converged = True
            break
        _pair_update(alpha, G, Q, QD, y, i, j, C, C)
    else:
        it = max_iter
    rho = _rho_c(alpha, G, y, C)
    return DualSolution(alpha, rho, 1.0, it, converged, G)


def _rho_c(alpha, G, y, C):
    yG = y * G
    at_ub, at_lb = alpha >= C, alpha <= 0
    free = ~at_ub & ~at_lb
    if free.any():
        return float(yG[free].mean())
    ub_set = (at_ub & (y < 0)) | (at_lb & (y > 0))
    lb_set = (at_ub & (y > 0)) | (at_lb & (y < 0))
    ub = yG[ub_set].min() if ub_set.any() else np.inf
    lb = yG[lb_set].max() if lb_set.any() else -np.inf
    return float((ub + lb) / 2)


def nu_feasible(y: np.ndarray, nu: float) -> bool:
    n_pos, n_neg = int((y > 0).sum()), int((y < 0).sum())
    return nu * y.size / 2 <= min(n_pos, n_neg) + 1e-12


def solve_nu_svc(K: np.ndarray, y: np.ndarray, nu: float, eps: float = 1e-3, max_iter: int | None = None):
    n = y.size
    if not nu_feasible(y, nu):
        raise ValueError(f"nu={nu} is infeasible for class sizes {(y > 0).sum()}/{(y < 0).sum()}")
    Q = (y[:, None] * y[None, :]) * K
    QD = np.diag(Q).copy()
    alpha = np.zeros(n)
    for mask in (y > 0, y < 0):
        remaining = nu * n / 2
        for t in np.flatnonzero(mask):
            alpha[t] = min(1.0, remaining)
            remaining -= alpha[t]
    G = Q @ alpha
    max_iter = max_iter or max(10_000, 100 * n)
    pos, neg = y > 0, y < 0
    converged = False
    it = 0
    for it in range(max_iter):
        not_ub, not_lb = alpha < 1.0, alpha > 0.0
        sel_p = np.where(pos & not_ub, -G, -np.inf)
        sel_n = np.where(neg & not_lb, G, -np.inf)
        ip, in_ = int(np.argmax(sel_p)), int(np.argmax(sel_n))
        gmaxp, gmaxn = sel_p[ip], sel_n[in_]
        gmaxp2 = np.max(np.where(pos & not_lb, G, -np.inf))
        gmaxn2 = np.max(np.where(neg & not_ub, -G, -np.inf))
        if max(gmaxp + gmaxp2, gmaxn + gmaxn2) < eps:
            converged = True
            break
        b_p = gmaxp + G
        b_n = gmaxn - G
        quad_p = QD[ip] + QD - 2.0 * Q[ip]
        quad_n = QD[in_] + QD - 2.0 * Q[in_]
        quad_p = np.where(quad_p > 0, quad_p, TAU)
        quad_n = np.where(quad_n > 0, quad_n, TAU)
        obj = np.full(n, np.inf)
        cp = pos & not_lb & (b_p > 0) & np.isfinite(gmaxp)
        cn = neg & not_ub & (b_n > 0) & np.isfinite(gmaxn)
        obj[cp] = -(b_p[cp] ** 2) / quad_p[cp]
        obj[cn] = -(b_n[cn] ** 2) / quad_n[cn]
        j = int(np.argmin(obj))
        if not np.isfinite(obj[j]):
            converged = True
            break
        i = ip if y[j] > 0 else in_
        _pair_update(alpha, G, Q, QD, y, i, j, 1.0, 1.0)
    else:
        it = max_iter
    rho, r = _rho_nu(alpha, G, y)
    return DualSolution(alpha, rho, r, it, converged, G)


def _rho_nu(alpha, G, y):
    def side(mask):
        at_ub, at_lb = mask & (alpha >= 1.0), mask & (alpha <= 0.0)
        free = mask & ~at_ub & ~at_lb
        if free.any():
            return float(G[free].mean())
        ub = G[at_lb].min() if at_lb.any() else np.inf
        lb = G[at_ub].max() if at_ub.any() else -np.inf
        return float((ub + lb) / 2)

    r1, r2 = side(y > 0), side(y < 0)
    return (r1 - r2) / 2, (r1 + r2) / 2


@dataclass
class BinarySVM:
    """One pairwise machine: ``f(x) = sum(coef * K(sv, x)) - rho``."""

    pos_class: int
    neg_class: int
    sv_index: np.ndarray  # rows of the training matrix
    coef: np.ndarray  # y_i * alpha_i on the C-SVC scale
    rho: float
    alpha: np.ndarray  # full multiplier vector on the solver's scale
    members: np.ndarray  # training rows in this subproblem
    y: np.ndarray
    upper: float
    converged: bool
    r: float = 1.0  # margin the solver's multipliers were divided by


class KernelSVC:
    """Soft-margin SVM; ``formulation`` is ``"C"`` or ``"nu"``."""

    def __init__(
        self,
        formulation: str = "C",
        C: float = 1.0,
        nu: float = 0.5,
        kernel: str = "rbf",
        gamma: float | str = "scale",
        tol: float = 1e-3,
        max_iter: int | None = None,
    ):
        if formulation not in ("C", "nu"):
            raise ValueError("formulation must be 'C' or 'nu'")
        if formulation == "C" and not C > 0:
            raise ValueError("C must be > 0")
        if formulation == "nu" and not 0 < nu < 1:
            raise ValueError("nu must lie in (0, 1)")
        if kernel not in KERNELS:
            raise ValueError(f"unknown kernel {kernel!r}")
        self.formulation = formulation
        self.C = C
        self.nu = nu
        self.kernel = kernel
        self.gamma = gamma
        self.tol = tol
        self.max_iter = max_iter

    def _gamma(self, X):
        if self.gamma == "scale":
            var = X.var()
            return 1.0 / (X.shape[1] * var) if var > 0 else 1.0
        g = float(self.gamma)
        if not g > 0:
            raise ValueError("gamma must be > 0")
        return g

    def fit(self, X, y_idx, n_classes):
        X = np.asarray(X, dtype=np.float64)
        self.gamma_ = self._gamma(X)
        kfun = KERNELS[self.kernel]
        K = kfun(X, X, self.gamma_)
        self.machines_ = []
        for a in range(n_classes):
            for b in range(a + 1, n_classes):
                members = np.flatnonzero((y_idx == a) | (y_idx == b))
                if not ((y_idx == a).any() and (y_idx == b).any()):
                    continue
                ys = np.where(y_idx[members] == a, 1.0, -1.0)
                Ks = K[np.ix_(members, members)]
                if self.formulation == "C":
                    sol = solve_c_svc(Ks, ys, self.C, self.tol, self.max_iter)
                    coef, rho, upper = ys * sol.alpha, sol.rho, self.C
                else:
                    sol = solve_nu_svc(Ks, ys, self.nu, self.tol, self.max_iter)
                    if not sol.r > 0:
                        # nu below the attainable minimum: the margin collapses and 1/r is meaningless
                        raise DegenerateNuError(
                            f"nu={self.nu} gives a non-positive margin ({sol.r:.3g}) for classes {a} vs {b}; raise nu"
                        )
                    coef, rho, upper = ys * sol.alpha / sol.r, sol.rho / sol.r, 1.0
                if not sol.converged:
                    warnings.warn(
                        f"SMO hit the iteration cap for classes {a} vs {b}", ConvergenceWarning, stacklevel=2
                    )
                sv = sol.alpha > 0
                self.machines_.append(
                    BinarySVM(
                        a, b, members[sv], coef[sv], float(rho), sol.alpha, members, ys, upper, sol.converged, sol.r
                    )
                )
        used = np.unique(np.concatenate([m.sv_index for m in self.machines_])) if self.machines_ else np.empty(0, int)
        self.support_ = used
        self.support_vectors_ = X[used]
        self.n_classes_ = n_classes
        return self

    def decision_pairs(self, X) -> np.ndarray:
        """Pairwise decision values, one column per machine."""
        X = np.asarray(X, dtype=np.float64)
        K = KERNELS[self.kernel](self.support_vectors_, X, self.gamma_)
        lookup = {int(s): i for i, s in enumerate(self.support_)}
        out = np.empty((X.shape[0], len(self.machines_)))
        for c, m in enumerate(self.machines_):
            rows = [lookup[int(s)] for s in m.sv_index]
            out[:, c] = m.coef @ K[rows] - m.rho
        return out

    def predict_index(self, X) -> np.ndarray:
        dec = self.decision_pairs(X)
        votes = np.zeros((dec.shape[0], self.n_classes_), dtype=int)
        for c, m in enumerate(self.machines_):
            win = np.where(dec[:, c] > 0, m.pos_class, m.neg_class)
            np.add.at(votes, (np.arange(dec.shape[0]), win), 1)
        return np.argmax(votes, axis=1)

    def dual_audit(self, X_train) -> list[dict]:
        """Per-machine dual feasibility and nu-property figures.

        A margin error is a training point with ``y f(x) < 1``.  The solver
        stops at KKT violation ``tol`` on its own scale, which is ``tol / r``
        on the unit-margin scale, so that is the slack allowed here.
        """
        X_train = np.asarray(X_train, dtype=np.float64)
        dec = self.decision_pairs(X_train)
        out = []
        for c, m in enumerate(self.machines_):
            l = m.members.size
            margin = m.y * dec[m.members, c]
            slack = self.tol / m.r
            out.append(
                {
                    "classes": (m.pos_class, m.neg_class),
                    "n": l,
                    "alpha_min": float(m.alpha.min()),
                    "alpha_max": float(m.alpha.max()),
                    "upper": m.upper,
                    "equality_residual": float(abs(m.y @ m.alpha)),
                    "alpha_sum": float(m.alpha.sum()),
                    "sv_fraction": float((m.alpha > 0).sum() / l),
                    "margin_error_fraction": float((margin < 1 - slack).sum() / l),
                    "bound_fraction": float((m.alpha >= m.upper).sum() / l),
                    "converged": m.converged,
                }
            )
        return out

    def get_state(self) -> dict:
        return {
            "gamma": self.gamma_,
            "n_classes": self.n_classes_,
            "support_vectors": self.support_vectors_.tolist(),
            "support": self.support_.tolist(),
            "machines": [
                {
                    "pos": m.pos_class,
                    "neg": m.neg_class,
                    "sv_index": m.sv_index.tolist(),
                    "coef": m.coef.tolist(),
                    "rho": m.rho,
                }
                for m in self.machines_
            ],
        }

    def set_state(self, st: dict):
        self.gamma_ = st["gamma"]
        self.n_classes_ = st["n_classes"]
        self.support_vectors_ = np.asarray(st["support_vectors"], dtype=np.float64).reshape(len(st["support"]), -1)
        self.support_ = np.asarray(st["support"], dtype=np.int64)
        self.machines_ = [
            BinarySVM(
                d["pos"], d["neg"], np.asarray(d["sv_index"], dtype=np.int64), np.asarray(d["coef"]),
                d["rho"], np.empty(0), np.empty(0, int), np.empty(0), 0.0, True,
            )
            for d in st["machines"]
        ]
        return self
