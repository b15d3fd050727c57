"""Named, code-pinned experiments and config-driven scans.

Each experiment returns a :class:`ReportBundle`: a JSON verdict document
plus CSV tables. Bundles are deterministic for a given config and seed.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import random
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable

from .linalg import Matrix, format_rational, identity, kron_power, matmul, matrix_to_json, read_matrix_csv, to_rational, write_matrix_csv
from .mechanisms import (
    GeomParams,
    RRParams,
    geometric_witness,
    random_response,
    rr_witness,
    truncated_geometric,
    with_parameter,
)
from .pipelines import (
    PostProcessor,
    StabilityReport,
    boolean_aggregator,
    counting_query,
    histograms,
    known_context_count,
    noisy_argmax_pipeline,
    stability_scan,
    sum_query,
)
from .refinement import RefinementVerdict, check_refinement, instability_precheck, structural_stability_check
from .utility import LossFunction, Prior, ama_loss, builtin_loss

log = logging.getLogger(__name__)

NAMES = (
    "appendix-d",
    "sum-instability",
    "geo-counting",
    "outlier-stability",
    "argmax-sweep",
    "rr-counting-suite",
    "custom",
)


@dataclass
class ExperimentConfig:
    name: str
    parameters: dict = field(default_factory=dict)
    output: Path | None = None
    seed: int = 0

    def __post_init__(self):
        if self.name not in NAMES:
            raise ValueError(f"unknown experiment {self.name!r}; choose from {', '.join(NAMES)}")


@dataclass
class ReportBundle:
    name: str
    verdict: dict
    tables: dict[str, str] = field(default_factory=dict)

    def verdict_json(self) -> str:
        return json.dumps(self.verdict, indent=2, sort_keys=True) + "\n"

    def write(self, directory: Path | str) -> list[Path]:
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        written = [out / "verdict.json"]
        written[0].write_text(self.verdict_json(), encoding="utf-8")
        for fname, text in sorted(self.tables.items()):
            path = out / fname
            path.write_text(text, encoding="utf-8")
            written.append(path)
        return written


def emit_plot_data(report: StabilityReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epsilon_float", "loss_float", "violation_flag"])
    for pt, flag in zip(report.grid, report.flagged()):
        w.writerow([repr(pt.epsilon_float), repr(float(pt.utility)), int(flag)])
    return buf.getvalue()


def _scan_json(report: StabilityReport) -> dict:
    return {
        "verdict": report.verdict.value,
        "violations": [list(v) for v in report.violations],
        "grid": [
            {
                "param": format_rational(p.param),
                "epsilon_float": p.epsilon_float,
                "utility_exact": format_rational(p.utility),
                "utility_float": float(p.utility),
            }
            for p in report.grid
        ],
    }


def _refinement_json(verdict: RefinementVerdict, a: Matrix, b: Matrix) -> dict:
    out = verdict.to_json()
    out["verdict"] = "REFINEMENT" if verdict.refines else "NON_REFINEMENT"
    out["validated"] = verdict.validate(a, b)
    if verdict.certificate is not None:
        ua, ub = verdict.certificate.utilities(a, b)
        out["certificate"]["utility_a"] = format_rational(ua)
        out["certificate"]["utility_b"] = format_rational(ub)
    return out


# -- named experiments --------------------------------------------------------

KNOWN_CONTEXT_ALPHAS = (Fraction(2, 7), Fraction(100, 351))
KNOWN_CONTEXT_VALUES = (0, 1, 1)


def appendix_d(cfg: ExperimentConfig) -> ReportBundle:
    """Four individuals with values in 0..6, three known; count of zeros released."""
    domain = range(7)
    loss = builtin_loss("scaled_abs", domain, c=1000)
    prior = Prior.uniform(domain)
    tables = {}
    for alpha in KNOWN_CONTEXT_ALPHAS:
        tag = f"{alpha.numerator}_{alpha.denominator}"
        g = truncated_geometric(GeomParams(7, alpha))
        tables[f"perturber_alpha_{tag}.csv"] = write_matrix_csv(g)
        count = known_context_count(g, KNOWN_CONTEXT_VALUES, 0, domain)
        tables[f"count_channel_alpha_{tag}.csv"] = write_matrix_csv(count)
    report = stability_scan(
        {"family": "geometric", "n": 7},
        KNOWN_CONTEXT_ALPHAS,
        lambda g, _params: known_context_count(g, KNOWN_CONTEXT_VALUES, 0, domain),
        loss,
        prior,
    )
    tables["scan.csv"] = report.to_csv()
    tables["plot_data.csv"] = emit_plot_data(report)
    verdict = {"experiment": "appendix-d", "verdict": report.verdict.value, "scan": _scan_json(report)}
    return ReportBundle("appendix-d", verdict, tables)


def _rr_pair():
    return random_response(RRParams(3, Fraction(2, 5))), random_response(RRParams(3, Fraction(1, 4)))


def sum_instability(cfg: ExperimentConfig) -> ReportBundle:
    r3, r2 = _rr_pair()
    s = sum_query(range(3), 2)
    a = matmul(kron_power(r3, 2), s)
    b = matmul(kron_power(r2, 2), s)
    base = rr_witness(RRParams(3, Fraction(2, 5)), RRParams(3, Fraction(1, 4)))
    verdict = check_refinement(a, b, seed=cfg.seed)
    tables = {
        "R3.csv": write_matrix_csv(r3),
        "R2.csv": write_matrix_csv(r2),
        "S.csv": write_matrix_csv(s),
        "R3xR3_S.csv": write_matrix_csv(a),
        "R2xR2_S.csv": write_matrix_csv(b),
        "base_witness.csv": write_matrix_csv(base),
    }
    out = _refinement_json(verdict, a, b)
    out["experiment"] = "sum-instability"
    out["base_refinement_witness"] = matrix_to_json(base)
    return ReportBundle("sum-instability", out, tables)


def _geo_pair():
    return truncated_geometric(GeomParams(3, Fraction(1, 3))), truncated_geometric(GeomParams(3, Fraction(1, 2)))


def geo_counting(cfg: ExperimentConfig) -> ReportBundle:
    g3, g2 = _geo_pair()
    z = boolean_aggregator(range(3), {0})
    t = counting_query(z, 2)
    a, b = matmul(kron_power(g3, 2), t), matmul(kron_power(g2, 2), t)
    counting = check_refinement(a, b, seed=cfg.seed)
    s = sum_query(range(3), 2)
    sa, sb = matmul(kron_power(g3, 2), s), matmul(kron_power(g2, 2), s)
    summing = check_refinement(sa, sb, seed=cfg.seed)
    precheck = instability_precheck(g3, g2, z)
    out = {
        "experiment": "geo-counting",
        "counting_zeros": _refinement_json(counting, a, b),
        "sum": _refinement_json(summing, sa, sb),
        "precheck_single_respondent": precheck.value,
        "verdict": "NON_REFINEMENT" if not counting.refines else "REFINEMENT",
    }
    tables = {
        "G3.csv": write_matrix_csv(g3),
        "G2.csv": write_matrix_csv(g2),
        "count_zeros.csv": write_matrix_csv(t),
        "G3xG3_T.csv": write_matrix_csv(a),
        "G2xG2_T.csv": write_matrix_csv(b),
    }
    return ReportBundle("geo-counting", out, tables)


def outlier_stability(cfg: ExperimentConfig) -> ReportBundle:
    g3, g2 = _geo_pair()
    w = geometric_witness(GeomParams(3, Fraction(1, 3)), GeomParams(3, Fraction(1, 2)))
    agg = boolean_aggregator(range(3), {0, 2})
    structural = structural_stability_check(w, agg)
    out: dict[str, Any] = {
        "experiment": "outlier-stability",
        "witness": matrix_to_json(w),
        "structural_check": structural,
        "pipelines": {},
    }
    tables = {"witness.csv": write_matrix_csv(w), "L.csv": write_matrix_csv(agg)}
    all_refine = True
    for n in (1, 2, 3):
        t = counting_query(agg, n)
        a, b = matmul(kron_power(g3, n), t), matmul(kron_power(g2, n), t)
        v = check_refinement(a, b, seed=cfg.seed)
        all_refine &= v.refines
        out["pipelines"][str(n)] = _refinement_json(v, a, b)
    out["verdict"] = "REFINEMENT" if all_refine and structural else "NON_REFINEMENT"
    return ReportBundle("outlier-stability", out, tables)


ARGMAX_GRID = tuple(Fraction(x, 20) for x in (18, 16, 14, 12, 10, 8, 6, 4, 2, 1))


def argmax_sweep(cfg: ExperimentConfig) -> ReportBundle:
    k, n = 3, 20
    hs = histograms(k, n)
    report = stability_scan(
        {"family": "geometric", "n": n + 1},
        ARGMAX_GRID,
        lambda _g, params: noisy_argmax_pipeline(k, n, params),
        ama_loss(hs, k),
        Prior.uniform(hs),
    )
    verdict = {
        "experiment": "argmax-sweep",
        "histograms": len(hs),
        "verdict": report.verdict.value,
        "scan": _scan_json(report),
    }
    return ReportBundle("argmax-sweep", verdict, {"scan.csv": report.to_csv(), "plot_data.csv": emit_plot_data(report)})


def random_rr_counting_instance(rng: random.Random) -> dict:
    """One random (K, N, aggregator, p > p') instance for the RR counting suite."""
    k = rng.choice((2, 3))
    n = rng.choice((1, 2, 3))
    size = rng.randint(1, k - 1)
    accepted = sorted(rng.sample(range(k), size))
    den = rng.randint(2, 12)
    hi, lo = sorted(rng.sample(range(den + 1), 2), reverse=True)
    return {"k": k, "n": n, "accepted": accepted, "p": Fraction(hi, den), "p_prime": Fraction(lo, den)}


def rr_counting_check(inst: dict, seed: int = 0) -> tuple[RefinementVerdict, Matrix, Matrix]:
    t = counting_query(boolean_aggregator(range(inst["k"]), inst["accepted"]), inst["n"])
    r = random_response(RRParams(inst["k"], inst["p"]))
    rp = random_response(RRParams(inst["k"], inst["p_prime"]))
    a = matmul(kron_power(r, inst["n"]), t)
    b = matmul(kron_power(rp, inst["n"]), t)
    return check_refinement(a, b, seed=seed), a, b


def rr_counting_suite(cfg: ExperimentConfig, count: int = 50) -> ReportBundle:
    rng = random.Random(cfg.seed)
    count = int(cfg.parameters.get("count", count))
    # The three-respondent, single-choice tally instance comes first.
    instances = [{"k": 3, "n": 3, "accepted": [1], "p": Fraction(2, 5), "p_prime": Fraction(1, 4)}]
    instances += [random_rr_counting_instance(rng) for _ in range(count - 1)]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "n", "accepted", "p", "p_prime", "refines", "validated", "pivots"])
    ok = True
    for inst in instances:
        v, a, b = rr_counting_check(inst, cfg.seed)
        valid = v.validate(a, b)
        ok &= v.refines and valid
        w.writerow([inst["k"], inst["n"], " ".join(map(str, inst["accepted"])),
                    inst["p"], inst["p_prime"], int(v.refines), int(valid), v.stats["pivots"]])
    verdict = {
        "experiment": "rr-counting-suite",
        "instances": len(instances),
        "verdict": "REFINEMENT" if ok else "NON_REFINEMENT",
    }
    return ReportBundle("rr-counting-suite", verdict, {"instances.csv": buf.getvalue()})


# -- config-driven scans ------------------------------------------------------


def _load_loss(spec: dict, rows: tuple) -> LossFunction:
    kind = spec.get("kind", "bayes_risk")
    if kind == "ama":
        return ama_loss(rows, int(spec["k"]))
    if kind == "csv":
        return read_matrix_csv(spec["path"], LossFunction)
    actions = spec.get("actions")
    return builtin_loss(kind, rows, c=spec.get("c"), actions=actions)


def _load_prior(spec: Any, rows: tuple) -> Prior:
    if spec in (None, "uniform"):
        return Prior.uniform(rows)
    if "csv" in spec:
        return Prior.from_matrix(read_matrix_csv(spec["csv"]))
    return Prior(rows, [to_rational(str(p)) for p in spec["probs"]])


def build_scan(config: dict):
    """Turn a scan config into the arguments of :func:`stability_scan`."""
    try:
        family = dict(config["mechanism"])
        grid = [to_rational(str(g)) for g in config["grid"]]
        post = dict(config.get("post", {"kind": "identity"}))
    except KeyError as exc:
        raise ValueError(f"scan config missing {exc.args[0]!r}") from None
    if not grid:
        raise ValueError("scan grid is empty")
    kind = post.get("kind", "identity")
    probe_params = with_parameter(family, grid[0])
    labels = tuple(range(probe_params.k if isinstance(probe_params, RRParams) else probe_params.n))
    if kind == "identity":
        stage: Any = identity(labels)
    elif kind == "counting":
        n = int(post["n"])
        family["respondents"] = n
        stage = counting_query(boolean_aggregator(labels, post["accepted"]), n)
    elif kind == "sum":
        n = int(post["n"])
        family["respondents"] = n
        stage = sum_query(labels, n)
    elif kind == "argmax":
        k, n = int(post["k"]), int(post["n"])
        stage = lambda _g, params: noisy_argmax_pipeline(k, n, params)  # noqa: E731
    elif kind == "known_context_count":
        known = list(post["known"])
        target = post["target"]
        domain = tuple(post.get("domain", labels))
        stage = lambda g, _params: known_context_count(g, known, target, domain)  # noqa: E731
    elif kind == "matrix":
        stage = read_matrix_csv(post["csv"], PostProcessor)
    else:
        raise ValueError(f"unknown post kind {kind!r}")

    if callable(stage):
        probe = stage(truncated_geometric(probe_params) if isinstance(probe_params, GeomParams)
                      else random_response(probe_params), probe_params)
        rows = tuple(probe.rows)
    else:
        n = int(family.get("respondents", 1))
        rows = tuple(kron_power(identity(labels), n).rows) if n != 1 else labels
    loss_spec = dict(config.get("loss", {"kind": "bayes_risk"}))
    if loss_spec.get("kind") == "ama":
        loss_spec.setdefault("k", post.get("k"))
    loss = _load_loss(loss_spec, rows)
    prior = _load_prior(config.get("prior"), rows)
    return family, grid, stage, loss, prior


def run_scan(config: dict) -> StabilityReport:
    return stability_scan(*build_scan(config))


def custom(cfg: ExperimentConfig) -> ReportBundle:
    report = run_scan(cfg.parameters)
    verdict = {"experiment": "custom", "verdict": report.verdict.value, "scan": _scan_json(report)}
    return ReportBundle("custom", verdict, {"scan.csv": report.to_csv(), "plot_data.csv": emit_plot_data(report)})


RUNNERS: dict[str, Callable[[ExperimentConfig], ReportBundle]] = {
    "appendix-d": appendix_d,
    "sum-instability": sum_instability,
    "geo-counting": geo_counting,
    "outlier-stability": outlier_stability,
    "argmax-sweep": argmax_sweep,
    "rr-counting-suite": rr_counting_suite,
    "custom": custom,
}


def run_experiment(cfg: ExperimentConfig) -> ReportBundle:
    if cfg.name != "custom" and cfg.parameters:
        ignored = sorted(k for k in cfg.parameters if k != "count")
        if ignored:
            log.warning("experiment %s is pinned; ignoring parameters %s", cfg.name, ignored)
    bundle = RUNNERS[cfg.name](cfg)
    if cfg.output is not None:
        bundle.write(cfg.output)
    return bundle


# -- CSV ingestion --------------------------------------------------------------


def ingest_csv(path, column: str, value_map: dict, target_row: int) -> tuple[Prior, list]:
    """Empirical prior over the mapped domain, and the known values of every other row.

    ``target_row`` is the 0-based index of the data row treated as unknown.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty file")
        if column not in reader.fieldnames:
            raise ValueError(f"{path}: no column {column!r}")
        values = []
        for line_no, rec in enumerate(reader, start=2):
            token = (rec.get(column) or "").strip()
            if token not in value_map:
                raise ValueError(f"{path}: line {line_no}: unmapped value {token!r}")
            values.append(value_map[token])
    if not values:
        raise ValueError(f"{path}: no data rows")
    if not 0 <= target_row < len(values):
        raise ValueError(f"target row {target_row} outside 0..{len(values) - 1}")
    domain = sorted(set(value_map.values()))
    counts = {d: 0 for d in domain}
    for v in values:
        counts[v] += 1
    prior = Prior(domain, [Fraction(counts[d], len(values)) for d in domain])
    known = values[:target_row] + values[target_row + 1:]
    return prior, known
