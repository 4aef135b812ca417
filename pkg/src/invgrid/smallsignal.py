"""Linearization, reduction to the state Jacobian, eigenanalysis.

``J = f_x - f_y g_y^{-1} g_x`` is built from a central-difference Jacobian
of the stacked residual at an equilibrium.  Participation of state ``k`` in
mode ``i`` is ``|l_ki r_ki| / sum_k |l_ki r_ki|`` (``|r_ki|`` normalized for
defective modes, where the left and right vectors are orthogonal).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .dae import (
    DEFAULT_POLICY, DaeSystem, Equilibrium, EquilibriumError, NumericPolicy, assemble,
    fd_jacobian, find_equilibrium, richardson_entry,
)
from .lines import LineModel

__all__ = [
    "DegeneracyError",
    "EigenSolveError",
    "ReducedJacobian",
    "StabilityVerdict",
    "ModelComparison",
    "reduce_jacobian",
    "linearize",
    "eigensolve",
    "participation_factors",
    "analyze",
    "compare_line_models",
    "richardson_check",
    "write_eigen_csv",
]


class DegeneracyError(RuntimeError):
    def __init__(self, message: str, constraint: str, condition: float):
        super().__init__(message)
        self.constraint = constraint
        self.condition = condition


class EigenSolveError(RuntimeError):
    def __init__(self, message: str, matrix: np.ndarray):
        super().__init__(message)
        self.matrix = matrix


@dataclass(frozen=True)
class ReducedJacobian:
    matrix: np.ndarray
    state_names: tuple
    n: int
    m: int
    gy_condition: float
    full: np.ndarray | None = field(default=None, repr=False)

    @property
    def blocks(self) -> dict:
        """Shapes of f_x, f_y, g_x, g_y."""
        n, m = self.n, self.m
        return {"f_x": (n, n), "f_y": (n, m), "g_x": (m, n), "g_y": (m, m)}


def reduce_jacobian(full: np.ndarray, n: int, state_names=None, algebraic_names=None,
                    cond_limit: float = DEFAULT_POLICY.gy_cond_limit) -> ReducedJacobian:
    """Schur complement of the algebraic block of a full ``(n+m)`` Jacobian."""
    full = np.asarray(full, dtype=float)
    m = full.shape[0] - n
    names = tuple(state_names) if state_names is not None else tuple(f"x{k}" for k in range(n))
    if m == 0:
        return ReducedJacobian(full.copy(), names, n, 0, 1.0, full)
    fx, fy = full[:n, :n], full[:n, n:]
    gx, gy = full[n:, :n], full[n:, n:]
    u, sv, _ = np.linalg.svd(gy)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
    if not cond < cond_limit:
        # the constraint with the largest weight in the weakest left singular vector
        worst = int(np.argmax(np.abs(u[:, -1])))
        label = algebraic_names[worst] if algebraic_names is not None else f"g{worst}"
        raise DegeneracyError(f"algebraic Jacobian is singular (cond {cond:.3e}); worst constraint {label}",
                              label, cond)
    j = fx - fy @ np.linalg.solve(gy, gx)
    if not np.all(np.isfinite(j)):
        raise DegeneracyError("reduced Jacobian has non-finite entries", "", cond)
    return ReducedJacobian(j, names, n, m, cond, full)


def linearize(sys_: DaeSystem, eq: Equilibrium, policy: NumericPolicy = DEFAULT_POLICY) -> ReducedJacobian:
    full = fd_jacobian(sys_, eq.z, policy.fd_rel_step)
    return reduce_jacobian(full, sys_.n, sys_.state_names, sys_.algebraic_names, policy.gy_cond_limit)


def participation_factors(vl: np.ndarray, vr: np.ndarray) -> np.ndarray:
    """Column ``i`` holds the normalized participations of all states in mode ``i``."""
    p = np.abs(vl * vr)
    total = p.sum(axis=0)
    # defective modes have left and right vectors orthogonal; fall back to |r|
    degenerate = ~(total > np.finfo(float).tiny)
    if np.any(degenerate):
        p[:, degenerate] = np.abs(vr[:, degenerate])
        total[degenerate] = p[:, degenerate].sum(axis=0)
    total[total == 0] = 1.0
    return p / total


@dataclass(frozen=True)
class StabilityVerdict:
    eigenvalues: np.ndarray
    max_real: float
    least_stable: int
    participation: np.ndarray = field(repr=False)
    state_names: tuple = field(repr=False)
    dominant: tuple            # ((state, factor), ...) for the least stable mode
    zero_mode_flag: bool

    @property
    def stable(self) -> bool:
        return bool(self.max_real < 0)

    @property
    def damping_ratios(self) -> np.ndarray:
        lam = self.eigenvalues
        mag = np.abs(lam)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(mag > 0, -lam.real / mag, 1.0)

    def top_participants(self, mode: int, k: int = 3) -> list[tuple[str, float]]:
        col = self.participation[:, mode]
        order = np.argsort(-col, kind="stable")[:k]
        return [(self.state_names[i], float(col[i])) for i in order]

    @property
    def top_participant(self) -> str:
        return self.dominant[0][0] if self.dominant else ""


def eigensolve(jac, state_names=None, top_k: int = 5,
               zero_tol: float = DEFAULT_POLICY.zero_eig_tol) -> StabilityVerdict:
    """Dense eigen-decomposition with left and right vectors and participation factors."""
    if isinstance(jac, ReducedJacobian):
        state_names = jac.state_names
        a = jac.matrix
    else:
        a = np.asarray(jac, dtype=float)
    n = a.shape[0]
    names = tuple(state_names) if state_names is not None else tuple(f"x{k}" for k in range(n))
    if not np.all(np.isfinite(a)):
        raise EigenSolveError("matrix has non-finite entries", a)
    try:
        lam, vl, vr = scipy.linalg.eig(a, left=True, right=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenSolveError(f"eigensolver failed: {exc}", a) from exc
    p = participation_factors(vl, vr)
    # least stable: largest real part, upper half plane member of a conjugate pair
    key = np.lexsort((-lam.imag, -lam.real))
    k = int(key[0])
    max_real = float(np.max(lam.real))
    col = p[:, k]
    order = np.argsort(-col, kind="stable")[:top_k]
    dominant = tuple((names[i], float(col[i])) for i in order)
    zero = bool(np.any(np.abs(lam) < zero_tol))
    return StabilityVerdict(lam, max_real, k, p, names, dominant, zero)


def analyze(case, line_model="statpi", gains=None, *, n_segments: int = 5,
            policy: NumericPolicy = DEFAULT_POLICY, load_model: str = "impedance",
            z0=None):
    """Assemble, find equilibrium, linearize and eigensolve one configuration.

    Returns ``(system, equilibrium, reduced jacobian, verdict)``.
    """
    sys_ = assemble(case, line_model, gains, n_segments=n_segments, load_model=load_model)
    eq = find_equilibrium(sys_, z0, policy)
    jac = linearize(sys_, eq, policy)
    return sys_, eq, jac, eigensolve(jac, zero_tol=policy.zero_eig_tol)


@dataclass
class ModelComparison:
    verdicts: dict                     # model name -> StabilityVerdict or None
    errors: dict                       # model name -> message for unavailable models

    def differences(self) -> dict:
        out = {}
        names = [k for k, v in self.verdicts.items() if v is not None]
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                out[(a, b)] = self.verdicts[a].max_real - self.verdicts[b].max_real
        return out


def compare_line_models(case, gains=None, *, n_segments: int = 5,
                        policy: NumericPolicy = DEFAULT_POLICY, models=None) -> ModelComparison:
    """Run the full pipeline for each line model on identical dispatch."""
    models = models or [m.value for m in LineModel]
    verdicts, errors = {}, {}
    for name in models:
        try:
            verdicts[name] = analyze(case, name, gains, n_segments=n_segments, policy=policy)[3]
        except (EquilibriumError, DegeneracyError, EigenSolveError) as exc:
            verdicts[name] = None
            errors[name] = str(exc)
    return ModelComparison(verdicts, errors)


def richardson_check(sys_: DaeSystem, z: np.ndarray, jac_full: np.ndarray, entries,
                     h: float = 1e-4, rel_tol: float = 1e-5, abs_floor: float = 1e-6) -> list[dict]:
    """Compare Jacobian entries with Richardson-extrapolated central differences.

    An entry passes when ``|J - D| <= rel_tol * max(|D|, abs_floor)``.
    """
    out = []
    for r, c in entries:
        est, _ = richardson_entry(sys_, z, int(r), int(c), h * max(1.0, abs(z[c])))
        err = abs(jac_full[r, c] - est)
        out.append({"row": int(r), "col": int(c), "jacobian": float(jac_full[r, c]),
                    "richardson": float(est), "ok": bool(err <= rel_tol * max(abs(est), abs_floor))})
    return out


def write_eigen_csv(path, rows) -> None:
    """Rows of ``(sample_id, line_model, verdict)``; one CSV line per eigenvalue."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample_id", "line_model", "re", "im", "top_participant_state", "participation"])
        for sample_id, model, verdict in rows:
            for i, lam in enumerate(verdict.eigenvalues):
                state, share = verdict.top_participants(i, 1)[0]
                w.writerow([sample_id, model, repr(float(lam.real)), repr(float(lam.imag)), state,
                            repr(share)])
