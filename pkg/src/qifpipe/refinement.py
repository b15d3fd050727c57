"""Refinement between channels, decided exactly.

``a`` is refined by ``b`` (``a ⊑ b``) when some stochastic witness ``W`` has
``a @ W == b``; equivalently no analyst, under any prior and loss, does
worse with ``a`` than with ``b``. :func:`check_refinement` returns the
witness or a validated (prior, loss) pair showing an analyst who prefers
``b``.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

from .linalg import (
    ONE,
    ZERO,
    Channel,
    Matrix,
    invert,
    is_deterministic,
    is_stochastic,
    kron_power,
    left_inverse,
    matmul,
    matrix_to_json,
)
from .simplex import phase_one
from .utility import LossFunction, Prior, posterior_uncertainty


@dataclass(frozen=True)
class Certificate:
    """A prior and loss under which ``a`` is strictly worse than ``b``."""

    prior: Prior
    loss: LossFunction

    def utilities(self, a: Matrix, b: Matrix) -> tuple[Fraction, Fraction]:
        return (
            posterior_uncertainty(self.loss, self.prior, a),
            posterior_uncertainty(self.loss, self.prior, b),
        )

    def refutes(self, a: Matrix, b: Matrix) -> bool:
        ua, ub = self.utilities(a, b)
        return ua > ub


@dataclass(frozen=True)
class RefinementVerdict:
    refines: bool
    witness: Matrix | None = None
    certificate: Certificate | None = None
    stats: dict = field(default_factory=dict)

    def validate(self, a: Matrix, b: Matrix) -> bool:
        """Re-check the embedded evidence exactly."""
        if self.refines:
            return (
                self.witness is not None
                and is_stochastic(self.witness)
                and matmul(a, self.witness).entries_equal(b)
            )
        return self.certificate is not None and self.certificate.refutes(a, b)

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"refines": self.refines}
        if self.witness is not None:
            out["witness"] = matrix_to_json(self.witness)
        if self.certificate is not None:
            out["certificate"] = {
                "prior": matrix_to_json(self.certificate.prior.to_matrix()),
                "loss": matrix_to_json(self.certificate.loss),
            }
        out["stats"] = dict(self.stats)
        return out


def _witness_lp(a: Matrix, b: Matrix):
    if tuple(a.rows) != tuple(b.rows):
        raise ValueError("refinement compares channels over the same inputs")
    ny, nz = len(a.cols), len(b.cols)
    # Inputs whose (a-row, b-row) pair repeats give identical constraints.
    reps: dict[tuple, int] = {}
    for i in range(len(a.rows)):
        reps.setdefault((a.data[i], b.data[i]), i)
    kept = sorted(reps.values())
    A: list[list[Fraction]] = []
    rhs: list[Fraction] = []
    keys: list[tuple] = []
    for i in kept:
        ar = a.data[i]
        for z in range(nz):
            row = [ZERO] * (ny * nz)
            for y, v in enumerate(ar):
                if v:
                    row[y * nz + z] = v
            A.append(row)
            rhs.append(b.data[i][z])
            keys.append(("eq", i, z))
    for y in range(ny):
        row = [ZERO] * (ny * nz)
        for z in range(nz):
            row[y * nz + z] = ONE
        A.append(row)
        rhs.append(ONE)
        keys.append(("sum", y))
    return A, rhs, keys


def _solve(a: Matrix, b: Matrix):
    A, rhs, keys = _witness_lp(a, b)
    res = phase_one(A, rhs)
    stats = {"pivots": res.pivots, "variables": res.variables, "constraints": res.constraints}
    return res, keys, stats


def find_witness(a: Matrix, b: Matrix) -> Channel | None:
    """A stochastic W with a @ W == b, or None if there is none."""
    res, _, _ = _solve(a, b)
    return _witness_from(a, b, res) if res.feasible else None


def _witness_from(a: Matrix, b: Matrix, res) -> Channel:
    nz = len(b.cols)
    grid = [res.x[y * nz:(y + 1) * nz] for y in range(len(a.cols))]
    return Channel(a.cols, b.cols, grid)


def _farkas_loss(a: Matrix, b: Matrix, farkas, keys) -> LossFunction | None:
    g = [[ZERO] * len(b.cols) for _ in a.rows]
    for coef, key in zip(farkas, keys):
        if key[0] == "eq":
            g[key[1]][key[2]] = coef
    shifted = [[v - min(r) for v in r] for r in g]
    top = max(max(r) for r in shifted)
    if top <= 0:
        return None
    return LossFunction(a.rows, b.cols, [[v / top for v in r] for r in shifted])


def _random_certificate(a: Matrix, b: Matrix, rng: random.Random, attempts: int) -> Certificate | None:
    nx, nw = len(a.rows), len(b.cols)
    uniform = Prior.uniform(a.rows)
    for _ in range(attempts):
        loss = LossFunction(a.rows, b.cols, [[rng.randint(0, 1) for _ in range(nw)] for _ in range(nx)])
        cert = Certificate(uniform, loss)
        if cert.refutes(a, b):
            return cert
    return None


def check_refinement(a: Matrix, b: Matrix, *, seed: int = 0, fallback_attempts: int = 10_000) -> RefinementVerdict:
    res, keys, stats = _solve(a, b)
    if res.feasible:
        return RefinementVerdict(True, witness=_witness_from(a, b, res), stats=stats)
    cert = None
    loss = _farkas_loss(a, b, res.farkas, keys)
    if loss is not None:
        cand = Certificate(Prior.uniform(a.rows), loss)
        if cand.refutes(a, b):
            cert = cand
            stats["certificate_source"] = "farkas"
    if cert is None:
        cert = _random_certificate(a, b, random.Random(seed), fallback_attempts)
        stats["certificate_source"] = "random-search"
    if cert is None:
        raise RuntimeError("LP infeasible but no refuting loss function was found")
    return RefinementVerdict(False, certificate=cert, stats=stats)


def structural_stability_check(w: Matrix, p: Matrix) -> bool:
    """Whether P @ P^-1 @ W @ P == W @ P with the canonical left inverse.

    When this fails, P is not refined by W @ P.
    """
    if not is_deterministic(p):
        raise ValueError("post-processor must be deterministic")
    n = len(p.rows)
    if w.shape != (n, n):
        raise ValueError(f"witness of shape {w.shape} does not act on {n} observations")
    wp = matmul(w, p)
    lhs = matmul(matmul(p, left_inverse(p)), wp)
    return lhs.entries_equal(wp)


class Precheck(str, enum.Enum):
    UNSTABLE = "UNSTABLE"
    INCONCLUSIVE = "INCONCLUSIVE"


def instability_precheck(g: Matrix, g2: Matrix, p: Matrix) -> Precheck:
    """Detect that g @ P is not refined by g2 @ P without searching for a loss.

    Uses Q = g^-1 @ g2; if Q is a genuine witness and P fails the structural
    check against it, the post-processed pair cannot be in refinement.
    """
    q = matmul(invert(g), g2)
    if is_stochastic(q) and not structural_stability_check(q, p):
        return Precheck.UNSTABLE
    return Precheck.INCONCLUSIVE


def kron_refinement_witness(w: Matrix, n: int) -> Matrix:
    if not is_stochastic(w):
        raise ValueError("refinement witness must be stochastic")
    return kron_power(w, n)
