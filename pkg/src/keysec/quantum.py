"""Density-operator checks of the trace-distance key criterion on small ensembles.

A classical-quantum ensemble assigns Eve a state ``rho_k`` for every key value
``k`` under a uniform prior.  The joint operator is block diagonal in the key
basis, ``rho_KE = (1/N) sum_k |k><k| (x) rho_k``, and the ideal reference is
``rho_U (x) rho_E`` with ``rho_E`` the average state.

Eigenvalues come from LAPACK's Hermitian driver through :func:`eigvalsh`.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import SizeGuardError
from .probcore import Cpd, ProbVec, stat_distance_to_uniform

HERM_TOL = 1e-10
DEFAULT_MAX_DIM = 256


def max_joint_dim() -> int:
    return int(os.environ.get("KEYSEC_MAX_DIM", DEFAULT_MAX_DIM))


def eigvalsh(a: np.ndarray) -> np.ndarray:
    """Ascending eigenvalues of a Hermitian matrix (symmetrized first to absorb rounding)."""
    a = np.asarray(a, dtype=complex)
    return np.linalg.eigvalsh(0.5 * (a + a.conj().T))


def trace_norm(a: np.ndarray) -> float:
    return float(np.sum(np.abs(eigvalsh(a))))


def _check_hermitian(m: np.ndarray, what: str) -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{what} must be square, got shape {m.shape}")
    if np.max(np.abs(m - m.conj().T), initial=0.0) > HERM_TOL:
        raise ValueError(f"{what} is not Hermitian within {HERM_TOL}")


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    entries: np.ndarray

    def __post_init__(self) -> None:
        m = np.array(self.entries, dtype=complex)
        _check_hermitian(m, "density matrix")
        if abs(np.trace(m) - 1) > HERM_TOL:
            raise ValueError(f"trace is {np.trace(m).real!r}, not 1")
        if eigvalsh(m)[0] < -HERM_TOL:
            raise ValueError("density matrix has a negative eigenvalue")
        m = 0.5 * (m + m.conj().T)
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def pure(cls, vec) -> "DensityMatrix":
        v = np.asarray(vec, dtype=complex)
        v = v / np.linalg.norm(v)
        return cls(np.outer(v, v.conj()))

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityMatrix":
        return cls(np.eye(dim) / dim)

    @classmethod
    def qubit(cls, bloch) -> "DensityMatrix":
        x, y, z = bloch
        return cls(0.5 * np.array([[1 + z, x - 1j * y], [x + 1j * y, 1 - z]]))

    @classmethod
    def random(cls, dim: int, rng: np.random.Generator, rank: Optional[int] = None) -> "DensityMatrix":
        """Induced-measure random state from a complex Gaussian ``dim x rank`` factor."""
        k = rank or dim
        g = rng.normal(size=(dim, k)) + 1j * rng.normal(size=(dim, k))
        m = g @ g.conj().T
        return cls(m / np.trace(m).real)

    def to_json(self) -> dict:
        return {"dim": self.dim, "re": self.entries.real.tolist(), "im": self.entries.imag.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "DensityMatrix":
        m = np.asarray(obj["re"], dtype=float) + 1j * np.asarray(obj.get("im", 0.0), dtype=float)
        if m.shape != (obj["dim"], obj["dim"]):
            raise ValueError("matrix shape does not match dim")
        return cls(m)


@dataclass(frozen=True, eq=False)
class CqEnsemble:
    """One state per key value of an n-bit key; Eve's prior on the key is uniform."""

    n: int
    states: tuple

    def __post_init__(self) -> None:
        states = tuple(self.states)
        object.__setattr__(self, "states", states)
        if len(states) != 1 << self.n:
            raise ValueError(f"need {1 << self.n} states for n={self.n}, got {len(states)}")
        if len({s.dim for s in states}) != 1:
            raise ValueError("all states must share one dimension")

    @property
    def N(self) -> int:
        return 1 << self.n

    @property
    def dim(self) -> int:
        return self.states[0].dim

    def average_state(self) -> np.ndarray:
        return sum(s.entries for s in self.states) / self.N

    def key_dependent(self, tol: float = 1e-12) -> bool:
        first = self.states[0].entries
        return any(np.max(np.abs(s.entries - first)) > tol for s in self.states[1:])

    def to_json(self) -> dict:
        return {"n": self.n, "states": [s.to_json() for s in self.states]}

    @classmethod
    def from_json(cls, obj: dict) -> "CqEnsemble":
        return cls(int(obj["n"]), tuple(DensityMatrix.from_json(s) for s in obj["states"]))

    @classmethod
    def identical(cls, n: int, state: DensityMatrix) -> "CqEnsemble":
        return cls(n, (state,) * (1 << n))

    @classmethod
    def random(cls, n: int, dim: int, rng: np.random.Generator, rank: Optional[int] = None) -> "CqEnsemble":
        return cls(n, tuple(DensityMatrix.random(dim, rng, rank) for _ in range(1 << n)))

    @classmethod
    def near_uniform(cls, n: int, dim: int, target_d: float, rng: np.random.Generator) -> "CqEnsemble":
        """States ``(1 - s) sigma + s tau_k`` scaled so that the d criterion equals ``target_d``.

        ``rho_k - rho_E`` is linear in ``s``, so d is too and one probe fixes the scale.
        """
        sigma = DensityMatrix.random(dim, rng).entries
        taus = [DensityMatrix.random(dim, rng).entries for _ in range(1 << n)]
        probe = cls(n, tuple(DensityMatrix(t) for t in taus))
        s = target_d / d_criterion(probe)
        if not 0 < s <= 1:
            raise ValueError(f"target d={target_d} not reachable from this draw")
        return cls(n, tuple(DensityMatrix((1 - s) * sigma + s * t) for t in taus))


@dataclass(frozen=True, eq=False)
class Povm:
    elements: tuple

    def __post_init__(self) -> None:
        els = tuple(np.array(e, dtype=complex) for e in self.elements)
        if not els:
            raise ValueError("POVM needs at least one element")
        dim = els[0].shape[0]
        for e in els:
            _check_hermitian(e, "POVM element")
            if e.shape != (dim, dim):
                raise ValueError("POVM elements differ in dimension")
            if eigvalsh(e)[0] < -HERM_TOL:
                raise ValueError("POVM element is not positive semidefinite")
        if np.max(np.abs(sum(els) - np.eye(dim))) > HERM_TOL:
            raise ValueError("POVM elements do not sum to the identity")
        object.__setattr__(self, "elements", els)

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]

    def __len__(self) -> int:
        return len(self.elements)

    @classmethod
    def projective(cls, unitary: np.ndarray) -> "Povm":
        """Rank-one projectors onto the columns of a unitary."""
        u = np.asarray(unitary, dtype=complex)
        return cls(tuple(np.outer(u[:, j], u[:, j].conj()) for j in range(u.shape[1])))

    @classmethod
    def computational(cls, dim: int) -> "Povm":
        return cls.projective(np.eye(dim))

    @classmethod
    def random_projective(cls, dim: int, rng: np.random.Generator) -> "Povm":
        g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        q, r = np.linalg.qr(g)
        return cls.projective(q * (np.diag(r) / np.abs(np.diag(r))))

    @classmethod
    def random(cls, dim: int, outcomes: int, rng: np.random.Generator) -> "Povm":
        """``S^{-1/2} A_j S^{-1/2}`` for random positive ``A_j`` with ``S = sum_j A_j``."""
        parts = []
        for _ in range(outcomes):
            g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
            parts.append(g @ g.conj().T)
        total = sum(parts)
        vals, vecs = np.linalg.eigh(total)
        inv_sqrt = vecs @ np.diag(vals ** -0.5) @ vecs.conj().T
        els = [inv_sqrt @ a @ inv_sqrt for a in parts]
        # fold residual rounding into the last element
        els[-1] = els[-1] + (np.eye(dim) - sum(els))
        return cls(tuple(0.5 * (e + e.conj().T) for e in els))

    @classmethod
    def helstrom(cls, rho0: DensityMatrix, rho1: DensityMatrix) -> "Povm":
        """Projector onto the nonnegative eigenspace of ``rho0 - rho1`` and its complement."""
        vals, vecs = np.linalg.eigh(rho0.entries - rho1.entries)
        pos = vecs[:, vals >= 0]
        p0 = pos @ pos.conj().T
        return cls((p0, np.eye(rho0.dim) - p0))


def outcome_distribution(rho: DensityMatrix, povm: Povm) -> np.ndarray:
    """Born-rule probabilities ``Tr(rho M_y)``, clipped at zero."""
    if rho.dim != povm.dim:
        raise ValueError(f"state dim {rho.dim} does not match POVM dim {povm.dim}")
    probs = np.array([np.real(np.trace(rho.entries @ m)) for m in povm.elements])
    return np.clip(probs, 0.0, None)


def trace_distance(a: DensityMatrix, b: DensityMatrix) -> float:
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return 0.5 * trace_norm(a.entries - b.entries)


def _guard(e: CqEnsemble) -> None:
    joint = e.N * e.dim
    if joint > max_joint_dim():
        raise SizeGuardError(f"joint dimension {joint} exceeds cap {max_joint_dim()} (KEYSEC_MAX_DIM)")


def joint_operators(e: CqEnsemble) -> tuple[np.ndarray, np.ndarray]:
    """``(rho_KE, rho_U (x) rho_E)`` as dense matrices on the key (x) probe space."""
    _guard(e)
    N, dim = e.N, e.dim
    rho_ke = np.zeros((N * dim, N * dim), dtype=complex)
    for k, s in enumerate(e.states):
        rho_ke[k * dim:(k + 1) * dim, k * dim:(k + 1) * dim] = s.entries / N
    ideal = np.kron(np.eye(N) / N, e.average_state())
    return rho_ke, ideal


def d_criterion(e: CqEnsemble) -> float:
    """Half the trace norm of ``rho_KE - rho_U (x) rho_E``, from the full joint operators."""
    rho_ke, ideal = joint_operators(e)
    return 0.5 * trace_norm(rho_ke - ideal)


@dataclass(frozen=True)
class BlockIdentity:
    lhs: float
    rhs: float
    rhs_without_half: float
    match: bool
    matching_convention: str


def d_block_identity(e: CqEnsemble, tol: float = 1e-9) -> BlockIdentity:
    """Compare d from the joint operator with ``(1/2) E_k ||rho_k - rho_E||_1``.

    Also reports the average without the one-half factor, and names whichever
    convention agrees with the joint computation.
    """
    lhs = d_criterion(e)
    avg = e.average_state()
    norms = [trace_norm(s.entries - avg) for s in e.states]
    mean = float(np.mean(norms))
    rhs = 0.5 * mean
    if abs(lhs - rhs) < tol:
        conv = "half" if abs(lhs - mean) >= tol else "both"
    elif abs(lhs - mean) < tol:
        conv = "no-half"
    else:
        conv = "neither"
    return BlockIdentity(lhs, rhs, mean, abs(lhs - rhs) < tol, conv)


def measurement_cpd(e: CqEnsemble, povm: Povm) -> Cpd:
    """Eve's posterior on the key for each outcome, weighted by the outcome probability.

    Outcomes of probability zero carry no posterior and are dropped.
    """
    likelihood = np.array([outcome_distribution(s, povm) for s in e.states])  # [k, y]
    p_y = likelihood.mean(axis=0)
    outcomes = []
    for y in range(len(povm)):
        if p_y[y] <= 0:
            continue
        post = likelihood[:, y] / (e.N * p_y[y])
        outcomes.append((p_y[y], ProbVec(e.n, post / post.sum())))
    weights = np.array([w for w, _ in outcomes])
    weights = weights / weights.sum()
    return Cpd(e.n, tuple((float(w), d) for w, (_, d) in zip(weights, outcomes)))


def helstrom_guess_prob(rho0: DensityMatrix, rho1: DensityMatrix) -> float:
    """Optimal equal-prior discrimination success ``1/2 + (1/4) ||rho0 - rho1||_1``."""
    return 0.5 + 0.25 * trace_norm(rho0.entries - rho1.entries)


@dataclass(frozen=True, eq=False)
class WitnessReport:
    d: float
    povm: Povm
    outcome: int
    outcome_prob: float
    cpd: ProbVec
    max_deviation: float
    delta_to_uniform: float

    def to_json(self) -> dict:
        return {"d": self.d, "outcome": self.outcome, "outcome_prob": self.outcome_prob,
                "cpd": self.cpd.to_json()["p"], "max_deviation": self.max_deviation,
                "delta_to_uniform": self.delta_to_uniform, "povm_outcomes": len(self.povm)}


def statement_A_witness(e: CqEnsemble, rng: Optional[np.random.Generator] = None,
                        trials: int = 0) -> WitnessReport:
    """Exhibit a measurement outcome whose posterior on the key is not uniform.

    Starts from the Helstrom measurement of the most distinguishable pair of
    states; ``trials`` extra random projective measurements (drawn from
    ``rng``) are also tried and the largest deviation wins.
    """
    if not e.key_dependent():
        raise ValueError("all states identical: every posterior is uniform, no witness exists")
    best_pair, best_dist = (0, 1), -1.0
    for i in range(e.N):
        for j in range(i + 1, e.N):
            t = trace_distance(e.states[i], e.states[j])
            if t > best_dist:
                best_pair, best_dist = (i, j), t
    candidates = [Povm.helstrom(e.states[best_pair[0]], e.states[best_pair[1]])]
    if trials:
        rng = rng or np.random.default_rng(0)
        candidates += [Povm.random_projective(e.dim, rng) for _ in range(trials)]

    d = d_criterion(e)
    best = None
    u = 1.0 / e.N
    for povm in candidates:
        cpd = measurement_cpd(e, povm)
        for y, (w, post) in enumerate(cpd.outcomes):
            dev = float(np.max(np.abs(post.p - u)))
            if best is None or dev > best.max_deviation:
                best = WitnessReport(d, povm, y, w, post, dev, float(stat_distance_to_uniform(post)))
    return best


@dataclass(frozen=True)
class Eq22Row:
    outcome: int
    p_y: float
    bound: float
    actual: float
    vacuous: bool
    holds: bool


@dataclass(frozen=True)
class Eq22Report:
    eps: float
    per_key_norms: tuple
    rows: tuple
    skipped: tuple

    @property
    def any_vacuous(self) -> bool:
        return any(r.vacuous for r in self.rows)

    def to_json(self) -> dict:
        return {"eps": self.eps, "per_key_norms": list(self.per_key_norms),
                "rows": [r.__dict__ for r in self.rows], "skipped": list(self.skipped)}


def eq22_bound(e: CqEnsemble, povm: Povm) -> Eq22Report:
    """Per-outcome bound ``eps U_k / P_y`` on ``|P(k|y) - U_k|`` next to the actual deviation.

    ``eps`` is the largest per-key trace norm ``||rho_k - rho_E||_1``.  Bounds
    above 1 say nothing about a probability and are flagged vacuous.
    """
    avg = e.average_state()
    norms = tuple(trace_norm(s.entries - avg) for s in e.states)
    eps = max(norms)
    likelihood = np.array([outcome_distribution(s, povm) for s in e.states])
    p_y = likelihood.mean(axis=0)
    u = 1.0 / e.N
    rows, skipped = [], []
    for y in range(len(povm)):
        if p_y[y] <= 0:
            skipped.append(y)
            continue
        post = likelihood[:, y] / (e.N * p_y[y])
        actual = float(np.max(np.abs(post - u)))
        bound = eps * u / float(p_y[y])
        rows.append(Eq22Row(y, float(p_y[y]), bound, actual, bound > 1.0, actual <= bound + 1e-12))
    return Eq22Report(eps, norms, tuple(rows), tuple(skipped))


@dataclass(frozen=True)
class Eq18Report:
    eps: float
    min_eigenvalue: float
    feasible: bool


def eq18_feasibility(e: CqEnsemble, eps: Optional[float] = None, tol: float = 1e-9) -> Eq18Report:
    """Can ``rho_KE = (1 - eps) rho_U (x) rho_E + eps sigma`` hold for some state ``sigma``?

    It can exactly when the residual ``rho_KE - (1 - eps) rho_U (x) rho_E`` is
    positive semidefinite (its trace is automatically ``eps``).
    """
    d = d_criterion(e)
    if eps is None:
        eps = d
    elif abs(eps - d) > tol:
        raise ValueError(f"eps={eps} differs from the ensemble's d={d}")
    rho_ke, ideal = joint_operators(e)
    min_eig = float(eigvalsh(rho_ke - (1 - eps) * ideal)[0])
    return Eq18Report(float(eps), min_eig, min_eig >= -HERM_TOL)
