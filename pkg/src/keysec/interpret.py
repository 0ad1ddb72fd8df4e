"""Couplings of two key distributions and the mixture-decomposition test.

A coupling is a joint distribution with prescribed marginals.  The maximal
coupling makes ``Pr[X != X']`` as small as possible, equal to the statistical
distance; the independent coupling is the product of the marginals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .probcore import ProbVec, stat_distance

TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Coupling:
    joint: np.ndarray

    def __post_init__(self) -> None:
        j = np.asarray(self.joint, dtype=float)
        if j.ndim != 2 or np.any(j < -TOL) or abs(j.sum() - 1.0) > 1e-12:
            raise ValueError("joint must be a nonnegative matrix summing to 1")
        object.__setattr__(self, "joint", np.clip(j, 0.0, None))

    @property
    def n_x(self) -> int:
        return self.joint.shape[0]

    @property
    def n_y(self) -> int:
        return self.joint.shape[1]

    def marginals(self) -> tuple[np.ndarray, np.ndarray]:
        return self.joint.sum(axis=1), self.joint.sum(axis=0)

    def pr_neq(self) -> float:
        return float(1.0 - np.trace(self.joint))


def _check_pair(p: ProbVec, q: ProbVec) -> tuple[np.ndarray, np.ndarray]:
    if p.n != q.n:
        raise ValueError(f"dimension mismatch: n={p.n} vs n={q.n}")
    return p.to_float().p, q.to_float().p


def maximal_coupling(p: ProbVec, q: ProbVec) -> Coupling:
    """Overlap ``min(p_i, q_i)`` on the diagonal, residuals moved off it in ascending index order."""
    a, b = _check_pair(p, q)
    overlap = np.minimum(a, b)
    joint = np.diag(overlap)
    rp, rq = a - overlap, b - overlap
    i = j = 0
    N = a.size
    # northwest-corner transport; rp and rq have disjoint supports so nothing lands on the diagonal
    while i < N and j < N:
        if rp[i] <= TOL:
            i += 1
            continue
        if rq[j] <= TOL:
            j += 1
            continue
        move = min(rp[i], rq[j])
        joint[i, j] += move
        rp[i] -= move
        rq[j] -= move
    return Coupling(joint)


def independent_coupling(p: ProbVec, q: ProbVec) -> Coupling:
    a, b = _check_pair(p, q)
    return Coupling(np.outer(a, b))


def min_disagreement_lp(p: ProbVec, q: ProbVec) -> float:
    """LP oracle: smallest ``Pr[X != X']`` over all couplings with marginals ``p`` and ``q``."""
    a, b = _check_pair(p, q)
    N = a.size
    cost = (1.0 - np.eye(N)).ravel()
    rows = np.kron(np.eye(N), np.ones((1, N)))
    cols = np.kron(np.ones((1, N)), np.eye(N))
    res = linprog(cost, A_eq=np.vstack([rows, cols]), b_eq=np.concatenate([a, b]),
                  bounds=(0, None), method="highs")
    if not res.success:
        raise RuntimeError(f"coupling LP failed: {res.message}")
    return float(res.fun)


@dataclass(frozen=True)
class Eq12Report:
    """Outcome of trying to write ``p = (1 - eps) q + eps P'`` with ``eps = delta(p, q)``.

    ``solved_pprime`` is ``(p - (1 - delta) q) / delta``; ``valid_pprime`` says
    whether it is a distribution.  Since ``P' - q = (p - q)/delta`` for the
    solved vector, its half-L1 distance to ``q`` is identically 1 and is kept
    only as ``delta_signed``.  The informative figure is ``delta_pprime_q``:
    the distance to ``q`` of the valid ``P'`` in the decomposition with the
    smallest weight ``eps_min``.  It equals ``delta/eps_min`` and reaches 1
    exactly when the decomposition holds at ``eps = delta``.
    """

    delta: float
    solved_pprime: tuple
    valid_pprime: bool
    delta_signed: float
    eps_min: float
    pprime_min: tuple
    delta_pprime_q: float
    iff_condition: bool
    supports_overlap: bool

    def row(self, p: ProbVec, q: ProbVec) -> dict:
        return {
            "delta": self.delta,
            "pr_neq_maximal": maximal_coupling(p, q).pr_neq(),
            "pr_neq_independent": independent_coupling(p, q).pr_neq(),
            "eq12_valid_Pprime": self.valid_pprime,
            "delta_Pprime_q": self.delta_pprime_q,
        }


def eq12_decomposition_test(p: ProbVec, q: ProbVec, tol: float = 1e-12) -> Eq12Report:
    a, b = _check_pair(p, q)
    eps = 0.5 * float(np.sum(np.abs(a - b)))
    if eps <= tol:
        raise ValueError("delta(p, q) = 0: the decomposition is trivial")
    solved = (a - (1.0 - eps) * b) / eps
    valid = bool(np.all(solved >= -tol))
    delta_signed = 0.5 * float(np.sum(np.abs(solved - b)))

    on_q = b > 0
    eps_min = float(1.0 - np.min(a[on_q] / b[on_q]))
    pmin = (a - (1.0 - eps_min) * b) / eps_min
    pmin = np.clip(pmin, 0.0, None)
    pmin = pmin / pmin.sum()
    d_min = 0.5 * float(np.sum(np.abs(pmin - b)))
    return Eq12Report(
        delta=eps,
        solved_pprime=tuple(solved.tolist()),
        valid_pprime=valid,
        delta_signed=delta_signed,
        eps_min=eps_min,
        pprime_min=tuple(pmin.tolist()),
        delta_pprime_q=d_min,
        iff_condition=abs(d_min - 1.0) <= 1e-9,
        supports_overlap=bool(np.any((a > 0) & (b > 0))),
    )


def coupling_summary(p: ProbVec, q: ProbVec) -> dict:
    """Distance, both couplings' disagreement and, for ``p != q``, the decomposition figures."""
    out = {
        "delta": float(stat_distance(p, q)),
        "pr_neq_maximal": maximal_coupling(p, q).pr_neq(),
        "pr_neq_independent": independent_coupling(p, q).pr_neq(),
    }
    if out["delta"] > TOL:
        rep = eq12_decomposition_test(p, q)
        out["eq12_valid_Pprime"] = rep.valid_pprime
        out["delta_Pprime_q"] = rep.delta_pprime_q
    return out
