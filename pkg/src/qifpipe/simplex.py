"""Exact phase-1 simplex for equality-form feasibility problems.

Decides ``A x = b, x >= 0`` over the rationals using Bland's rule. When the
system is infeasible the final duals give a Farkas vector ``z`` with
``A^T z >= 0`` and ``b . z < 0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .linalg import ONE, ZERO


@dataclass
class FeasibilityResult:
    feasible: bool
    x: list[Fraction] | None
    farkas: list[Fraction] | None
    pivots: int
    variables: int
    constraints: int


def phase_one(A: Sequence[Sequence[Fraction]], b: Sequence[Fraction], max_pivots: int = 100_000) -> FeasibilityResult:
    m = len(A)
    n = len(A[0]) if m else 0
    sign = [ONE if bi >= 0 else -ONE for bi in b]
    width = n + m
    tab: list[list[Fraction]] = []
    rhs: list[Fraction] = []
    for i in range(m):
        row = [sign[i] * v for v in A[i]] + [ZERO] * m
        row[n + i] = ONE
        tab.append(row)
        rhs.append(sign[i] * b[i])
    basis = [n + i for i in range(m)]

    # Reduced costs for min sum(artificials) with the artificial basis.
    red = [ZERO] * width
    for j in range(n):
        red[j] = -sum((tab[i][j] for i in range(m)), ZERO)

    pivots = 0
    while True:
        enter = next((j for j in range(width) if red[j] < 0), None)
        if enter is None:
            break
        leave = None
        best = None
        for i in range(m):
            a = tab[i][enter]
            if a > 0:
                ratio = rhs[i] / a
                if best is None or ratio < best or (ratio == best and basis[i] < basis[leave]):
                    best, leave = ratio, i
        if leave is None:  # cannot happen: phase-1 objective is bounded below
            raise RuntimeError("phase-1 simplex reported unbounded")
        _pivot(tab, rhs, red, leave, enter)
        basis[leave] = enter
        pivots += 1
        if pivots > max_pivots:
            raise RuntimeError("simplex pivot limit exceeded")

    obj = sum((rhs[i] for i in range(m) if basis[i] >= n), ZERO)
    if obj == 0:
        x = [ZERO] * n
        for i, j in enumerate(basis):
            if j < n:
                x[j] = rhs[i]
        return FeasibilityResult(True, x, None, pivots, n, m)
    # Artificial column n+i has cost 1 and reduced cost 1 - y_i.
    y = [ONE - red[n + i] for i in range(m)]
    farkas = [-sign[i] * y[i] for i in range(m)]
    return FeasibilityResult(False, None, farkas, pivots, n, m)


def _pivot(tab, rhs, red, r, c) -> None:
    prow = tab[r]
    inv = ONE / prow[c]
    prow[:] = [v * inv for v in prow]
    rhs[r] *= inv
    nz = [(k, v) for k, v in enumerate(prow) if v]
    pr = rhs[r]
    for i, row in enumerate(tab):
        if i == r:
            continue
        f = row[c]
        if f:
            for k, v in nz:
                row[k] -= f * v
            rhs[i] -= f * pr
    f = red[c]
    if f:
        for k, v in nz:
            red[k] -= f * v
