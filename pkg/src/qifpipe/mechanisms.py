"""Randomised-response and truncated-geometric mechanisms as exact channels.

Mechanisms are parameterised by a rational truth probability ``p`` or decay
``alpha``; epsilon is only ever derived from them (as the exact ratio
``e**eps`` plus a float for display).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Hashable, Sequence

from .linalg import ONE, ZERO, Channel, Matrix, SingularMatrixError, invert, matmul, to_rational


@dataclass(frozen=True)
class RRParams:
    k: int
    p: Fraction

    def __post_init__(self):
        object.__setattr__(self, "p", to_rational(self.p))
        if self.k < 2:
            raise ValueError(f"randomised response needs k >= 2, got {self.k}")
        if not 0 <= self.p <= 1:
            raise ValueError(f"truth probability must lie in [0, 1], got {self.p}")

    @property
    def exp_epsilon(self) -> Fraction | None:
        """Exact ``e**eps = 1 + k*p/(1-p)``; None when p = 1 (no privacy)."""
        if self.p == 1:
            return None
        return 1 + self.k * self.p / (1 - self.p)

    @property
    def epsilon(self) -> float:
        return _log_or_inf(self.exp_epsilon)


@dataclass(frozen=True)
class GeomParams:
    n: int
    alpha: Fraction

    def __post_init__(self):
        object.__setattr__(self, "alpha", to_rational(self.alpha))
        if self.n < 2:
            raise ValueError(f"geometric mechanism needs n >= 2, got {self.n}")
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")

    @property
    def exp_epsilon(self) -> Fraction:
        return 1 / self.alpha

    @property
    def epsilon(self) -> float:
        return _log_or_inf(self.exp_epsilon)


def _log_or_inf(x: Fraction | None) -> float:
    return math.inf if x is None else math.log(x)


def random_response(params: RRParams, labels: Sequence[Hashable] | None = None) -> Channel:
    """K x K channel with p + (1-p)/K on the diagonal and (1-p)/K elsewhere."""
    k = params.k
    labels = tuple(range(k)) if labels is None else tuple(labels)
    if len(labels) != k:
        raise ValueError(f"{len(labels)} labels for k={k}")
    off = (1 - params.p) / k
    diag = params.p + off
    return Channel(labels, labels, [[diag if i == j else off for j in range(k)] for i in range(k)])


def truncated_geometric(params: GeomParams) -> Channel:
    """Truncated alpha-geometric channel on {0..n-1}.

    Interior columns follow (1-a)/(1+a) * a**|r-c|; the two boundary columns
    absorb the infinite tails, giving a**|r-c| / (1+a), so rows sum to 1.
    """
    n, a = params.n, params.alpha
    interior = (1 - a) / (1 + a)
    boundary = 1 / (1 + a)
    powers = [a**i for i in range(n)]
    data = []
    for r in range(n):
        row = []
        for c in range(n):
            coef = boundary if c in (0, n - 1) else interior
            row.append(coef * powers[abs(r - c)])
        data.append(row)
    return Channel(range(n), range(n), data)


# -- adjacency and realised epsilon ------------------------------------------


Distance = Callable[[Hashable, Hashable], Any]


@dataclass(frozen=True)
class Adjacency:
    """Which input pairs are compared, and how far apart they are.

    ``all-pairs`` treats every distinct pair as adjacent at distance 1;
    ``metric`` compares every distinct pair scaled by ``distance``.
    """

    kind: str = "all-pairs"
    distance: Distance | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("all-pairs", "metric"):
            raise ValueError(f"unknown adjacency kind {self.kind!r}")
        if self.kind == "metric" and self.distance is None:
            raise ValueError("metric adjacency needs a distance function")

    @classmethod
    def all_pairs(cls) -> "Adjacency":
        return cls("all-pairs")

    @classmethod
    def metric(cls, distance: Distance) -> "Adjacency":
        return cls("metric", distance)

    @classmethod
    def euclidean(cls) -> "Adjacency":
        return cls("metric", lambda x, y: abs(to_rational(x) - to_rational(y)))

    @classmethod
    def manhattan(cls, base: Distance | None = None) -> "Adjacency":
        """Sum of per-coordinate distances on tuple labels (Euclidean by default)."""
        base = base or (lambda x, y: abs(to_rational(x) - to_rational(y)))
        return cls("metric", lambda u, v: sum((to_rational(base(a, b)) for a, b in zip(u, v)), ZERO))

    def dist(self, x1: Hashable, x2: Hashable) -> Fraction:
        if self.kind == "all-pairs":
            return ONE
        d = to_rational(self.distance(x1, x2))
        if d <= 0:
            raise ValueError(f"distance between distinct inputs {x1!r}, {x2!r} must be positive")
        return d


@dataclass(frozen=True)
class MaxRatio:
    """Largest privacy ratio of a channel.

    ``ratio`` is the exact worst ``c[x1,y]/c[x2,y]`` (None when unbounded) and
    ``distance`` the metric distance of that pair, so ``epsilon`` is
    ``ln(ratio)/distance``.
    """

    ratio: Fraction | None
    distance: Fraction = ONE
    pair: tuple | None = None

    @property
    def unbounded(self) -> bool:
        return self.ratio is None

    @property
    def epsilon(self) -> float:
        if self.ratio is None:
            return math.inf
        return math.log(self.ratio) / float(self.distance)

    def __le__(self, other: "MaxRatio") -> bool:
        return not _scaled_gt(self, other)


def _scaled_gt(a: MaxRatio, b: MaxRatio) -> bool:
    """Exactly decide ratio_a**(1/d_a) > ratio_b**(1/d_b)."""
    if a.ratio is None:
        return b.ratio is not None
    if b.ratio is None:
        return False
    # r**(q/p) for d = p/q; raise both sides to p_a * p_b.
    ea = a.distance.denominator * b.distance.numerator
    eb = b.distance.denominator * a.distance.numerator
    return a.ratio**ea > b.ratio**eb


def realized_epsilon(c: Matrix, adj: Adjacency | None = None) -> MaxRatio:
    adj = adj or Adjacency.all_pairs()
    best = MaxRatio(ONE, ONE, None)
    rows = c.rows
    for i, x1 in enumerate(rows):
        r1 = c.data[i]
        for j, x2 in enumerate(rows):
            if i == j:
                continue
            r2 = c.data[j]
            d = adj.dist(x1, x2)
            for y, u, v in zip(c.cols, r1, r2):
                if u == 0:
                    continue
                if v == 0:
                    return MaxRatio(None, d, (x1, x2, y))
                cand = MaxRatio(u / v, d, (x1, x2, y))
                if _scaled_gt(cand, best):
                    best = cand
    return best


def satisfies_ratio_bound(c: Matrix, adj: Adjacency, base: Fraction) -> bool:
    """Exact check of c[x1,y] <= base**d(x1,x2) * c[x2,y] over all distinct pairs."""
    base = to_rational(base)
    for i, x1 in enumerate(c.rows):
        for j, x2 in enumerate(c.rows):
            if i == j:
                continue
            d = adj.dist(x1, x2)
            q, p = d.denominator, d.numerator
            factor = base**p
            for u, v in zip(c.data[i], c.data[j]):
                if u**q > factor * v**q:
                    return False
    return True


# -- family witnesses ---------------------------------------------------------


class NoWitnessError(ValueError):
    pass


def rr_witness(src: RRParams, dst: RRParams) -> Channel:
    """RR channel W with RR(src) @ W == RR(dst).

    (pI + (1-p)U)(qI + (1-q)U) = pq I + (1-pq) U, so q = p_dst / p_src.
    """
    if src.k != dst.k:
        raise ValueError(f"choice-set sizes differ: {src.k} vs {dst.k}")
    if src.p == 0:
        if dst.p != 0:
            raise NoWitnessError("uniform RR cannot be refined into a leakier one")
        q = ONE
    else:
        q = dst.p / src.p
    if q > 1:
        raise NoWitnessError(
            f"no RR witness: target p={dst.p} is leakier than source p={src.p}"
        )
    return random_response(RRParams(src.k, q))


def geometric_witness(src: GeomParams, dst: GeomParams) -> Matrix:
    """G_src^-1 @ G_dst; a refinement witness only if it turns out stochastic."""
    if src.n != dst.n:
        raise ValueError(f"domain sizes differ: {src.n} vs {dst.n}")
    g = truncated_geometric(src)
    try:
        inv = invert(g)
    except SingularMatrixError:
        raise SingularMatrixError(f"geometric mechanism with alpha={src.alpha} is singular") from None
    return matmul(inv, truncated_geometric(dst)).as_plain()


# -- JSON mechanism specs -----------------------------------------------------


def parse_mechanism_spec(spec: dict) -> RRParams | GeomParams:
    """``{"family": "rr", "k": 3, "p": "1/4"}`` or ``{"family": "geometric", "n": 7, "alpha": "2/7"}``."""
    family = spec.get("family")
    try:
        if family == "rr":
            return RRParams(int(spec["k"]), to_rational(str(spec["p"])))
        if family == "geometric":
            return GeomParams(int(spec["n"]), to_rational(str(spec["alpha"])))
    except KeyError as exc:
        raise ValueError(f"mechanism spec missing field {exc.args[0]!r}") from None
    raise ValueError(f"unknown mechanism family {family!r}")


def mechanism_spec(params: RRParams | GeomParams) -> dict:
    if isinstance(params, RRParams):
        return {"family": "rr", "k": params.k, "p": str(params.p)}
    return {"family": "geometric", "n": params.n, "alpha": str(params.alpha)}


def build_mechanism(params: RRParams | GeomParams) -> Channel:
    if isinstance(params, RRParams):
        return random_response(params)
    return truncated_geometric(params)


def with_parameter(family: dict, value: Any) -> RRParams | GeomParams:
    """Fill the free parameter of a family spec (``p`` or ``alpha``)."""
    key = "p" if family.get("family") == "rr" else "alpha"
    return parse_mechanism_spec({**family, key: str(value)})
