"""Post-processors, pipelines and stability scans over parameter grids."""

from __future__ import annotations

import csv
import enum
import io
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Callable, Hashable, Iterable, Sequence, Union

from .linalg import ONE, ZERO, Channel, Matrix, format_rational, is_deterministic, kron_power, matmul
from .mechanisms import GeomParams, RRParams, build_mechanism, truncated_geometric, with_parameter
from .utility import LossFunction, Prior, first_argmax, posterior_uncertainty


class PostProcessor(Channel):
    """Deterministic channel: 0/1 entries, one 1 per row, every column used."""

    __slots__ = ()

    def _validate(self) -> None:
        if not is_deterministic(self):
            raise ValueError("post-processor must be deterministic with no unused column")

    @classmethod
    def from_function(cls, inputs: Iterable[Hashable], fn: Callable, outputs: Iterable[Hashable] | None = None):
        """Matrix form of the total function ``fn`` on ``inputs``."""
        inputs = tuple(inputs)
        images = [fn(x) for x in inputs]
        outs = tuple(outputs) if outputs is not None else tuple(dict.fromkeys(images))
        pos = {o: j for j, o in enumerate(outs)}
        data = []
        for img in images:
            row = [ZERO] * len(outs)
            row[pos[img]] = ONE
            data.append(row)
        return cls(inputs, outs, data)


@dataclass(frozen=True)
class Pipeline:
    perturber: Channel
    post: PostProcessor
    composed: Channel = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "composed", matmul(self.perturber, self.post))


def boolean_aggregator(domain: Iterable[Hashable], accepted: Iterable[Hashable]) -> PostProcessor:
    """Map each choice to True (in ``accepted``) or False; columns are (True, False)."""
    domain = tuple(domain)
    accepted = set(accepted)
    if not accepted <= set(domain):
        raise ValueError(f"accepted values {sorted(map(repr, accepted - set(domain)))} not in domain")
    if not accepted or accepted == set(domain):
        raise ValueError("aggregator subset must be neither empty nor the whole domain")
    return PostProcessor.from_function(domain, lambda y: y in accepted, (True, False))


def tally(n: int) -> PostProcessor:
    if n < 1:
        raise ValueError("tally needs n >= 1")
    rows = list(itertools.product((True, False), repeat=n))
    return PostProcessor.from_function(rows, sum, range(n + 1))


def counting_query(b: PostProcessor, n: int) -> PostProcessor:
    """Kronecker power of a Boolean aggregator followed by a tally."""
    if tuple(b.cols) != (True, False):
        raise ValueError("counting query needs a Boolean aggregator with columns (True, False)")
    return PostProcessor.from_matrix(matmul(kron_power(b, n), tally(n)))


def _require_numeric(domain: Sequence) -> None:
    for d in domain:
        if isinstance(d, bool) or not isinstance(d, (int, Rational)):
            raise ValueError(f"sum query needs numeric labels, got {d!r}")


def sum_query(domain: Iterable, n: int) -> PostProcessor:
    domain = tuple(domain)
    _require_numeric(domain)
    rows = list(itertools.product(domain, repeat=n))
    sums = sorted({sum(r) for r in rows})
    return PostProcessor.from_function(rows, sum, sums)


def histograms(k: int, n: int) -> list[tuple[int, ...]]:
    """All k-bar histograms with bars summing to n, in product order."""
    return [h for h in itertools.product(range(n + 1), repeat=k) if sum(h) == n]


def argmax_post(k: int, n: int) -> PostProcessor:
    """First index of the tallest bar, for every histogram in {0..n}^k."""
    if k < 1 or n < 0:
        raise ValueError("argmax needs k >= 1 and n >= 0")
    rows = list(itertools.product(range(n + 1), repeat=k))
    return PostProcessor.from_function(rows, first_argmax, range(k))


def histogram_preprocessor(k: int, n: int) -> PostProcessor:
    """Turn an n-tuple of choices in {0..k-1} into its k-bar histogram."""
    rows = list(itertools.product(range(k), repeat=n))

    def hist(t):
        h = [0] * k
        for v in t:
            h[v] += 1
        return tuple(h)

    return PostProcessor.from_function(rows, hist, histograms(k, n))


def noisy_argmax_pipeline(k: int, n: int, g: GeomParams) -> Channel:
    """Geometric noise on every bar, then ArgMax, for histograms summing to n.

    Equal to the Kronecker construction restricted to valid histograms, but
    computed from per-bar order statistics: with independent bars, output j
    wins iff it beats every earlier bar strictly and ties or beats every
    later one.
    """
    if g.n != n + 1:
        raise ValueError(f"geometric domain must be 0..{n}, got n={g.n}")
    gd = truncated_geometric(g)
    # lt[v][u] = P(bar < u | true height v); le likewise with <=.
    lt, le = [], []
    for v in range(n + 1):
        row = gd.data[v]
        acc = ZERO
        lt_v, le_v = [], []
        for u in range(n + 1):
            lt_v.append(acc)
            acc += row[u]
            le_v.append(acc)
        lt.append(lt_v)
        le.append(le_v)
    rows = histograms(k, n)
    data = []
    for h in rows:
        out = []
        for j in range(k):
            pj = gd.data[h[j]]
            total = ZERO
            for u in range(n + 1):
                term = pj[u]
                if not term:
                    continue
                for i in range(k):
                    if i < j:
                        term *= lt[h[i]][u]
                    elif i > j:
                        term *= le[h[i]][u]
                    if not term:
                        break
                total += term
            out.append(total)
        data.append(out)
    return Channel(rows, range(k), data)


def known_context_count(
    g: Matrix,
    known_values: Sequence[Hashable],
    target: Hashable,
    unknown_domain: Iterable[Hashable],
) -> Channel:
    """Channel from one unknown individual's value to the perturbed count of ``target``.

    Every individual perturbs independently through ``g``; the count is a
    Poisson-binomial over the known individuals plus the unknown one.
    """
    unknown_domain = tuple(unknown_domain)
    try:
        known_q = [g[v, target] for v in known_values]
        unknown_q = [g[x, target] for x in unknown_domain]
    except KeyError as exc:
        raise ValueError(f"label {exc.args[0]!r} not in perturber") from None
    base = [ONE]
    for q in known_q:
        base = _convolve(base, q)
    data = [_convolve(base, q) for q in unknown_q]
    return Channel(unknown_domain, range(len(known_q) + 2), data)


def _convolve(dist: list[Fraction], q: Fraction) -> list[Fraction]:
    out = [ZERO] * (len(dist) + 1)
    miss = 1 - q
    for c, v in enumerate(dist):
        if v:
            out[c] += v * miss
            out[c + 1] += v * q
    return out


# -- stability scans ----------------------------------------------------------


class Stability(str, enum.Enum):
    L_STABLE_ON_GRID = "L_STABLE_ON_GRID"
    UNSTABLE = "UNSTABLE"


@dataclass(frozen=True)
class GridPoint:
    param: Fraction
    exp_epsilon: Fraction | None
    epsilon_float: float
    utility: Fraction


@dataclass(frozen=True)
class StabilityReport:
    grid: tuple[GridPoint, ...]
    violations: tuple[tuple[int, int], ...]

    @property
    def verdict(self) -> Stability:
        return Stability.UNSTABLE if self.violations else Stability.L_STABLE_ON_GRID

    def flagged(self) -> list[bool]:
        flags = [False] * len(self.grid)
        for _, j in self.violations:
            flags[j] = True
        return flags

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["param", "epsilon", "utility_exact", "utility_float", "violation_flag"])
        for pt, flag in zip(self.grid, self.flagged()):
            w.writerow([
                format_rational(pt.param),
                repr(pt.epsilon_float),
                format_rational(pt.utility),
                repr(float(pt.utility)),
                int(flag),
            ])
        return buf.getvalue()


PostStage = Union[Matrix, Callable[[Channel, "RRParams | GeomParams"], Channel]]


def _eps_key(x: Fraction | None):
    return (1, 0) if x is None else (0, x)


def _perturber(family: dict, param) -> tuple[Channel, RRParams | GeomParams]:
    params = with_parameter({k: v for k, v in family.items() if k != "respondents"}, param)
    mech = build_mechanism(params)
    n = int(family.get("respondents", 1))
    if n != 1:
        mech = kron_power(mech, n)
    return mech, params


def stability_scan(
    family: dict,
    param_grid: Sequence,
    post: PostStage,
    loss: LossFunction,
    prior: Prior,
) -> StabilityReport:
    """Exact utility at each grid point; flag epsilon increases that lose utility.

    ``family`` is a mechanism spec without its free parameter (optionally with
    ``respondents`` for a Kronecker power); ``post`` is a post-processor
    matrix, or a function of (perturber, params) giving the released channel.
    """
    points = []
    for param in param_grid:
        mech, params = _perturber(family, param)
        channel = post(mech, params) if callable(post) else matmul(mech, post)
        u = posterior_uncertainty(loss, prior, channel)
        points.append(GridPoint(params.alpha if isinstance(params, GeomParams) else params.p,
                                params.exp_epsilon, params.epsilon, u))
    for a, b in zip(points, points[1:]):
        if _eps_key(b.exp_epsilon) < _eps_key(a.exp_epsilon):
            raise ValueError("grid must be sorted by increasing epsilon")
    violations = tuple(
        (i, i + 1)
        for i, (a, b) in enumerate(zip(points, points[1:]))
        if _eps_key(b.exp_epsilon) > _eps_key(a.exp_epsilon) and b.utility > a.utility
    )
    return StabilityReport(tuple(points), violations)
