"""Priors, loss functions and Bayesian posterior uncertainty.

Utility is measured as expected loss (lower is more useful), computed
exactly:

    U(l, pi, M) = sum_y min_w sum_x pi[x] * M[x, y] * l[x, w]
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Hashable, Iterable, Sequence

from .linalg import ONE, ZERO, Matrix, to_rational


@dataclass(frozen=True)
class Prior:
    over: tuple
    probs: tuple

    def __post_init__(self):
        over = tuple(self.over)
        probs = tuple(to_rational(p) for p in self.probs)
        if len(over) != len(probs):
            raise ValueError(f"{len(probs)} probabilities for {len(over)} labels")
        if len(set(over)) != len(over):
            raise ValueError("prior labels are not unique")
        if any(p < 0 for p in probs):
            raise ValueError("prior has a negative probability")
        if sum(probs, ZERO) != ONE:
            raise ValueError(f"prior sums to {sum(probs, ZERO)}, not 1")
        object.__setattr__(self, "over", over)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def uniform(cls, labels: Iterable[Hashable]) -> "Prior":
        labels = tuple(labels)
        if not labels:
            raise ValueError("uniform prior over an empty set")
        p = Fraction(1, len(labels))
        return cls(labels, [p] * len(labels))

    @classmethod
    def point(cls, labels: Iterable[Hashable], at: Hashable) -> "Prior":
        labels = tuple(labels)
        return cls(labels, [ONE if lab == at else ZERO for lab in labels])

    def __getitem__(self, label: Hashable) -> Fraction:
        return self.probs[self.over.index(label)]

    def to_matrix(self, name: Hashable = "prior") -> Matrix:
        return Matrix([name], self.over, [self.probs])

    @classmethod
    def from_matrix(cls, m: Matrix) -> "Prior":
        if len(m.rows) != 1:
            raise ValueError(f"prior matrix must have one row, got {len(m.rows)}")
        return cls(m.cols, m.data[0])


class LossFunction(Matrix):
    """Nonnegative loss l[x, w], rows are secrets and columns are actions."""

    __slots__ = ()
    closed_under_products = False

    def _validate(self) -> None:
        if not self.rows or not self.cols:
            raise ValueError("loss function needs at least one secret and one action")
        for lab, r in zip(self.rows, self.data):
            if any(v < 0 for v in r):
                raise ValueError(f"negative loss in row {lab!r}")

    @property
    def secrets(self) -> tuple:
        return self.rows

    @property
    def actions(self) -> tuple:
        return self.cols


def _check_labels(**axes: Sequence) -> None:
    items = list(axes.items())
    name0, ref = items[0]
    for name, labels in items[1:]:
        if tuple(labels) != tuple(ref):
            raise ValueError(f"label mismatch between {name0} and {name}")


def posterior_uncertainty(l: LossFunction, pi: Prior, m: Matrix) -> Fraction:
    """Expected loss of the Bayes-optimal analyst observing ``m``'s output."""
    _check_labels(prior=pi.over, channel_rows=m.rows, loss_secrets=l.secrets)
    nact = len(l.cols)
    loss = l.data
    total = ZERO
    for j in range(len(m.cols)):
        joint = [(i, pi.probs[i] * m.data[i][j]) for i in range(len(m.rows))]
        joint = [(i, v) for i, v in joint if v]
        if not joint:
            continue
        total += min(sum((v * loss[i][w] for i, v in joint), ZERO) for w in range(nact))
    return total


def prior_uncertainty(l: LossFunction, pi: Prior) -> Fraction:
    _check_labels(prior=pi.over, loss_secrets=l.secrets)
    return min(
        sum((p * r[w] for p, r in zip(pi.probs, l.data)), ZERO) for w in range(len(l.cols))
    )


def _numeric(label) -> Fraction:
    if isinstance(label, (int, Rational)):
        return Fraction(label)
    raise ValueError(f"distance loss needs a numeric domain, got label {label!r}")


def builtin_loss(
    kind: str,
    domain: Iterable[Hashable],
    *,
    c: Fraction | int | str | None = None,
    actions: Iterable[Hashable] | None = None,
) -> LossFunction:
    """Standard losses on ``domain`` (actions default to the domain itself).

    kinds: ``bayes_risk`` (0 iff guessed right), ``linear_error`` |w-x|,
    ``mse`` (w-x)**2 and ``scaled_abs`` c*|w-x|.
    """
    secrets = tuple(domain)
    acts = secrets if actions is None else tuple(actions)
    if kind == "bayes_risk":
        data = [[ZERO if w == x else ONE for w in acts] for x in secrets]
    elif kind in ("linear_error", "mse", "scaled_abs"):
        xs = [_numeric(x) for x in secrets]
        ws = [_numeric(w) for w in acts]
        if kind == "linear_error":
            data = [[abs(w - x) for w in ws] for x in xs]
        elif kind == "mse":
            data = [[(w - x) ** 2 for w in ws] for x in xs]
        else:
            if c is None:
                raise ValueError("scaled_abs needs a scale c")
            scale = to_rational(c)
            data = [[scale * abs(w - x) for w in ws] for x in xs]
    else:
        raise ValueError(f"unknown loss kind {kind!r}")
    return LossFunction(secrets, acts, data)


def first_argmax(values: Sequence) -> int:
    """Index of the first maximal entry (strict-greater update)."""
    best = 0
    for i in range(1, len(values)):
        if values[i] > values[best]:
            best = i
    return best


def ama_loss(histograms: Iterable[Sequence[int]], k: int) -> LossFunction:
    """ArgMax-accuracy loss: 0 when the guess is the histogram's first mode, else 1."""
    hs = tuple(tuple(h) for h in histograms)
    data = [[ZERO if first_argmax(h) == kp else ONE for kp in range(k)] for h in hs]
    return LossFunction(hs, range(k), data)


def ghosh_remap(l: LossFunction, pi: Prior, m: Matrix) -> tuple[Fraction, dict]:
    """Best deterministic remapping of observations back onto secrets.

    Each observation's guess is chosen on its own (first label wins ties);
    the utility is then the remap's expected loss summed secret by secret.
    """
    if tuple(l.actions) != tuple(l.secrets):
        raise ValueError("remapping utility needs actions equal to secrets")
    _check_labels(prior=pi.over, channel_rows=m.rows, loss_secrets=l.secrets)
    n = len(m.rows)
    remap = {}
    for j, y in enumerate(m.cols):
        scores = [
            sum((pi.probs[x] * m.data[x][j] * l.data[x][g] for x in range(n)), ZERO)
            for g in range(n)
        ]
        remap[y] = l.actions[min(range(n), key=lambda g: (scores[g], g))]
    col = {y: l.col_index(remap[y]) for y in m.cols}
    value = sum(
        (
            pi.probs[x] * sum((m.data[x][j] * l.data[x][col[y]] for j, y in enumerate(m.cols)), ZERO)
            for x in range(n)
        ),
        ZERO,
    )
    return value, remap


def ghosh_remap_utility(l: LossFunction, pi: Prior, m: Matrix) -> Fraction:
    return ghosh_remap(l, pi, m)[0]
