"""Command line runner: declarative YAML experiment configs in, CSV/JSONL reports out.

    kloosterlab run CONFIG [--quick] [--out DIR]
    kloosterlab export INPUT --format {csv,jsonl} [--out PATH]

Exit status is 0 on success, 1 when an exact identity or equality audit
fails, and 2 for an unusable config.  Bound-ratio calibrations are reported
but never change the exit status.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Callable, Iterable, Literal

import numpy as np
import yaml
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    NonNegativeFloat,
    NonNegativeInt,
    PositiveFloat,
    PositiveInt,
    ValidationError,
    model_validator,
)

from . import analytic_kernels as ak
from . import congruence_lab as cl
from . import expsum_lab as ex
from . import moments as mo
from .arith_core import (
    PrimePowerModulus,
    gauss_sign,
    mod_inverse,
    num_divisors,
    quadratic_gauss_sum,
    square_classes,
)
from .hecke_forms import compute_coefficients

SCHEMA_VERSION = 1
log = logging.getLogger("kloosterlab")


# ---------------------------------------------------------------------------
# configs


class _Params(BaseModel):
    model_config = ConfigDict(extra="forbid")


class KloostermanAuditParams(_Params):
    primes: list[PositiveInt] = [5, 7, 11, 13]
    exponents: list[PositiveInt] = [2, 3, 4]
    draws: NonNegativeInt = 500
    tolerance: NonNegativeFloat = 1e-8
    gauss_primes: list[PositiveInt] = [3, 5, 7, 11, 13]
    gauss_max_exponent: NonNegativeInt = 4
    gauss_tolerance: NonNegativeFloat = 1e-9
    weil_draws: NonNegativeInt = 10_000
    weil_c_max: PositiveInt = 5000


class SigmaAuditParams(_Params):
    primes: list[PositiveInt] = [5, 7, 11]
    exponents: list[PositiveInt] = [2, 3]
    draws: NonNegativeInt = 200
    tolerance_factor: NonNegativeFloat = 1e-6


class CensusSweepParams(_Params):
    primes: list[PositiveInt] = [5, 7, 11]
    max_exponent: PositiveInt = 5
    hensel_draws: NonNegativeInt = 100
    singular_draws: NonNegativeInt = 6
    max_modulus: PositiveInt = 200_000


class Theorem5SweepParams(_Params):
    draws: NonNegativeInt = 200
    primes: list[PositiveInt] = [5, 7, 11, 13, 17, 19, 23]
    max_r: PositiveInt = 100_000
    components: list[PositiveInt] = [2, 3]


class JutilaParams(_Params):
    Q: list[PositiveInt] = [20, 50, 100]
    delta_exponents: list[float] = [1.0, 1.5, 2.0]


class VoronoiParams(_Params):
    weights: list[int] = [12, 16]
    moduli: list[PositiveInt] = [1, 2, 3, 4, 5]
    scales: list[PositiveFloat] = [5.0, 10.0, 20.0]
    tolerance: NonNegativeFloat = 1e-5
    threshold: PositiveFloat = 1e-10


class DiagonalParams(_Params):
    moduli: list[PositiveInt] = Field(default_factory=lambda: list(range(53, 500, 23)))
    pairs: list[tuple[int, int]] = [(12, 12), (12, 16)]
    convention: Literal["derived", "printed"] = "derived"


class MomentParams(_Params):
    moduli: list[PositiveInt] = [101, 151, 211, 307, 401]
    pairs: list[tuple[int, int]] = [(12, 12)]
    oracle_moduli: list[PositiveInt] = [13]
    oracle_tolerance: NonNegativeFloat = 1e-6
    convention: Literal["derived", "printed"] = "derived"


class ShiftedParams(_Params):
    draws: NonNegativeInt = 50
    pairs: list[tuple[int, int]] = [(12, 12)]
    N: PositiveFloat = 10_000.0
    M: PositiveFloat = 400.0
    d_values: list[PositiveInt] = [97, 199, 499, 997]


_PARAMS: dict[str, type[_Params]] = {
    "kloosterman-audit": KloostermanAuditParams,
    "sigma-audit": SigmaAuditParams,
    "census-sweep": CensusSweepParams,
    "theorem5-sweep": Theorem5SweepParams,
    "jutila": JutilaParams,
    "voronoi": VoronoiParams,
    "diagonal": DiagonalParams,
    "moment": MomentParams,
    "shifted-convolution": ShiftedParams,
}


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    experiment: Literal[tuple(_PARAMS)]  # type: ignore[valid-type]
    seed: int
    eps_power: float = 2.0
    params: dict[str, Any] = Field(default_factory=dict)
    quick: dict[str, Any] = Field(default_factory=dict)
    output: str | None = None

    @model_validator(mode="after")
    def _check_params(self) -> "ExperimentConfig":
        model = _PARAMS[self.experiment]
        model.model_validate(self.params)
        model.model_validate({**self.params, **self.quick})
        return self

    def resolved(self, quick: bool) -> _Params:
        data = {**self.params, **self.quick} if quick else dict(self.params)
        return _PARAMS[self.experiment].model_validate(data)


class ConfigError(Exception):
    pass


def load_config(path: Path) -> ExperimentConfig:
    try:
        raw = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"{path}:{where} {getattr(exc, 'problem', exc)}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        lines = [f"{path}: invalid config"]
        for err in exc.errors():
            loc = ".".join(str(x) for x in err["loc"]) or "<root>"
            lines.append(f"  {loc}: {err['msg']}")
        raise ConfigError("\n".join(lines)) from exc


# ---------------------------------------------------------------------------
# worker pool


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("KLOOSTERLAB_WORKERS", "1")))
    except ValueError:
        return 1


def _pool_map(fn: Callable, tasks: list) -> list:
    """Ordered map; results come back in task order whatever the worker count."""
    n = worker_count()
    if n == 1 or len(tasks) < 2:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * n))))


def _flatten(chunks: Iterable[list[dict]]) -> list[dict]:
    return [row for chunk in chunks for row in chunk]


def _audit(family: str, residual: float, tolerance: float, **meta) -> dict:
    return dict(family=family, residual=residual, tolerance=tolerance, ok=bool(residual < tolerance), **meta)


# ---------------------------------------------------------------------------
# experiments


def _explicit_task(args) -> list[dict]:
    p, s, pairs, tol = args
    q = PrimePowerModulus(p, s)
    worst = max(abs(ex.kloosterman(m, n, q.q) - ex.kloosterman_explicit(m, n, q)) for m, n in pairs)
    return [_audit("explicit", worst / q.q**0.5, tol, p=p, s=s, draws=len(pairs))]


def _weil_task(triples) -> list[dict]:
    worst = 0.0
    bad = 0
    for m, n, c in triples:
        val = abs(ex.kloosterman(m, n, c))
        bound = num_divisors(c) * math.gcd(math.gcd(m, n), c) ** 0.5 * c**0.5
        worst = max(worst, val / bound)
        bad += val > bound * (1 + 1e-12)
    return [dict(family="weil", lhs=worst, rhs=1.0, ratio=worst, violations=bad, draws=len(triples))]


def run_kloosterman_audit(P: KloostermanAuditParams, rng: np.random.Generator, eps_power: float) -> list[dict]:
    tasks = []
    for p in P.primes:
        for s in P.exponents:
            Q = p**s
            pairs = []
            while len(pairs) < P.draws:
                m, n = (int(x) for x in rng.integers(0, Q, 2))
                if m % p:
                    pairs.append((m, n))
            tasks.append((p, s, pairs, P.tolerance))
    rows = _flatten(_pool_map(_explicit_task, tasks))
    for p in P.gauss_primes:
        for s in range(1, P.gauss_max_exponent + 1):
            q = PrimePowerModulus(p, s)
            worst = max(abs(quadratic_gauss_sum(A, q.q) - q.q**0.5 * gauss_sign(A, q)) for A in range(1, p))
            rows.append(_audit("gauss", worst, P.gauss_tolerance, p=p, s=s))
    if P.weil_draws:
        c = rng.integers(1, P.weil_c_max + 1, P.weil_draws)
        m = rng.integers(0, P.weil_c_max, P.weil_draws)
        n = rng.integers(0, P.weil_c_max, P.weil_draws)
        triples = [(int(a), int(b), int(d)) for a, b, d in zip(m, n, c)]
        chunks = [triples[i : i + 1000] for i in range(0, len(triples), 1000)]
        weil = _pool_map(_weil_task, chunks)
        violations = sum(r[0]["violations"] for r in weil)
        worst = max(r[0]["lhs"] for r in weil)
        rows.append(_audit("weil-violations", float(violations), 0.5, draws=len(triples), max_ratio=worst))
    return rows


def _sigma_task(args) -> list[dict]:
    p, s, n1, n2, a, k, u, tol = args
    q = PrimePowerModulus(p, s)
    rep = ex.decomposition_audit(n1, n2, a, k, q)
    rows = [_audit("decomposition", rep.lhs, tol * q.q**2.5, p=p, s=s, n1=n1, n2=n2, a=a, k=k,
                   degenerate=rep.metadata.get("degenerate"))]
    A, B = n1, n2
    if a % p:
        direct = ex.sigma_reduced(A, B, a, k, q, u)
        reduced = ex.sigma_reduced_by_reduction(A, B, a, k, q, u)
        rows.append(_audit("reduction", abs(direct - reduced), tol * q.q**2.5, p=p, s=s, A=A, B=B, a=a, k=k, u=u))
    return rows


def run_sigma_audit(P: SigmaAuditParams, rng: np.random.Generator, eps_power: float) -> list[dict]:
    tasks = []
    for _ in range(P.draws):
        p = int(rng.choice(P.primes))
        s = int(rng.choice(P.exponents))
        Q = p**s
        n1, n2, a, k = (int(x) for x in rng.integers(1, Q, 4))
        u = int(rng.integers(1, p))
        tasks.append((p, s, n1, n2, a, k, u, P.tolerance_factor))
    return _flatten(_pool_map(_sigma_task, tasks))


def _admissible_residues(p: int, a: int, u: int) -> list[int]:
    sq = square_classes(p)
    ub = mod_inverse(u, p)
    return [m for m in range(1, p) if (m + a) % p and sq[m * ub % p] and sq[(m + a) * ub % p]]


def _hensel_task(args) -> list[dict]:
    p, s, A, B, a, k, u, nonsingular = args
    q = PrimePowerModulus(p, s)
    censuses, status = cl.hensel_audit(cl.PhaseParams(A, B, a, k, u, q), nonsingular_only=nonsingular)
    return [dict(family="hensel", p=p, s=s, A=A, B=B, a=a, k=k, u=u, nonsingular_only=nonsingular,
                 counts=" ".join(str(c.count) for c in censuses), status=status, ok=status != "varies")]


def _singular_task(args) -> list[dict]:
    p, s, A, a, u, m0 = args
    q = PrimePowerModulus(p, s)
    B = cl.singular_parameters(A, a, u, m0, q)
    sd = cl.singular_census(A, B, a, u, q)
    wk, wt = cl.singular_bound_sweep(A, B, a, u, q)
    meta = dict(p=p, s=s, A=A, B=B, a=a, u=u, omega=len(sd.roots))
    hypotheses = sd.g2_units
    return [
        dict(family="lift", ok=bool(sd.lifts_uniquely or not hypotheses), g2_units=hypotheses,
             level_counts=" ".join(map(str, sd.level_counts)), **meta),
        dict(family="singular-k", lhs=wk, rhs=1.0, ratio=wk, **meta),
        dict(family="singular-T", lhs=wt, rhs=1.0, ratio=wt, **meta),
    ]


def run_census_sweep(P: CensusSweepParams, rng: np.random.Generator, eps_power: float) -> list[dict]:
    moduli = [(p, s) for p in P.primes for s in range(2, P.max_exponent + 1) if p**s <= P.max_modulus]
    tasks = []
    for i in range(P.hensel_draws):
        p, s = moduli[int(rng.integers(len(moduli)))]
        Q = p**s
        A, B, a, k = (int(x) for x in rng.integers(0, Q, 4))
        u = int(rng.integers(1, p))
        tasks.append((p, s, A, B, a, k, u, bool(i % 2)))
    rows = _flatten(_pool_map(_hensel_task, tasks))
    tasks = []
    for p, s in moduli:
        Q = p**s
        for _ in range(P.singular_draws):
            a = int(rng.integers(1, p))
            u = int(rng.integers(1, p))
            cands = _admissible_residues(p, a, u)
            if not cands:
                continue
            m0 = int(rng.choice(cands)) + p * int(rng.integers(0, Q // p))
            A = int(rng.integers(1, Q))
            if A % p == 0:
                A += 1
            tasks.append((p, s, A, a, u, m0))
    return rows + _flatten(_pool_map(_singular_task, tasks))


def _random_r(rng: np.random.Generator, P: Theorem5SweepParams) -> tuple[int, list[int]]:
    while True:
        count = int(rng.choice(P.components))
        primes = sorted(int(x) for x in rng.choice(P.primes, count, replace=False))
        powers = [p ** int(rng.integers(1, 4)) for p in primes]
        r = math.prod(powers)
        if r <= P.max_r:
            return r, powers


def _theorem5_task(args) -> list[dict]:
    r, s, r1, A, M, n1, n2, H, eps_power = args
    spec = ex.ShortSumSpec(A=A, M=M, r=r, n1=n1, n2=n2, s=s)
    rows = [ex.theorem5_bound(spec, eps_power).as_row()]
    r2 = r // r1
    b1, b2 = ex.kloosterman_b_tables(n1, n2, r1, r2)
    rep = ex.weyl_completion_audit(b1, b2, r1, r2, H, int(M), int(A))
    rows += [x.as_row() for x in rep.reports()]
    return rows


def run_theorem5_sweep(P: Theorem5SweepParams, rng: np.random.Generator, eps_power: float) -> list[dict]:
    tasks = []
    for _ in range(P.draws):
        r, powers = _random_r(rng, P)
        mask = rng.integers(0, 2, len(powers))
        if not mask.any():
            mask[int(rng.integers(len(powers)))] = 1
        s = math.prod(pw for pw, keep in zip(powers, mask) if keep)
        r1 = s if s < r else powers[0]
        n1, n2 = (int(x) for x in rng.integers(1, r, 2))
        A = int(rng.integers(0, r))
        M = max(2, round(math.sqrt(r)))
        H = int(rng.integers(1, 3))
        tasks.append((r, s, r1, A, M, n1, n2, H, eps_power))
    return _flatten(_pool_map(_theorem5_task, tasks))


def run_jutila(P: JutilaParams, rng: np.random.Generator, eps_power: float) -> list[dict]:
    rows = []
    for Q in P.Q:
        for t in P.delta_exponents:
            ca = ak.CircleApprox.uniform(Q, Q**-t)
            l2, bound, mass = ak.jutila_approximation(ca, eps_power)
            rows.append(dict(family="jutila", Q=Q, delta=ca.delta, Lambda=ca.Lambda, lhs=l2, rhs=bound,
                             ratio=l2 / bound, mass=mass))
            rows.append(_audit("jutila-mass", abs(mass - 1), 1e-9, Q=Q, delta=ca.delta))
    return rows


def _voronoi_bump(x):
    return ak.smooth_bump(x, 2.0)


def _voronoi_task(args) -> list[dict]:
    weight, c, b, N, tol, threshold, n_table = args
    f = compute_coefficients(weight, n_table)
    res = ak.voronoi_residual(f, b, c, _voronoi_bump, N, threshold=threshold)
    return [_audit("voronoi", res.residual, tol, weight=weight, c=c, b=b, N=N, terms=res.terms, lhs=abs(res.lhs))]


def run_voronoi(P: VoronoiParams, rng: np.random.Generator, eps_power: float) -> list[dict]:
    tasks = []
    for w in P.weights:
        cut = ak.hankel_cutoff(_voronoi_bump, w, P.threshold)
        need = max(int(cut * c * c / N) + 2 for c in P.moduli for N in P.scales)
        for c in P.moduli:
            for b in range(c):
                if math.gcd(b, c) != 1:
                    continue
                for N in P.scales:
                    tasks.append((w, c, b, N, P.tolerance, P.threshold, need))
    return _flatten(_pool_map(_voronoi_task, tasks))


def run_diagonal(P: DiagonalParams, rng: np.random.Generator, eps_power: float) -> list[dict]:
    rows = []
    for k1, k2 in P.pairs:
        n_table = max(20_000, int(max(P.moduli) * 5) + 10)
        f1, f2 = compute_coefficients(k1, n_table), compute_coefficients(k2, n_table)
        for q in P.moduli:
            if q % 4 == 2:
                continue
            rep = mo.diagonal_report(f1, f2, q, convention=P.convention)
            row = rep.as_row()
            row["rhs"] = 5 * rep.rhs
            row["ratio"] = rep.lhs / row["rhs"]
            rows.append(row)
    return rows


def run_moment(P: MomentParams, rng: np.random.Generator, eps_power: float) -> list[dict]:
    rows = []
    for k1, k2 in P.pairs:
        x_cut = mo.w_support(k1, k2)
        n_table = max(3000, int(x_cut * max(P.moduli + P.oracle_moduli) ** 2) + 2)
        f1, f2 = compute_coefficients(k1, n_table), compute_coefficients(k2, n_table)
        for q in P.moduli:
            res = mo.moment_experiment(f1, f2, q, convention=P.convention)
            row = dict(family="moment", k1=k1, k2=k2, **res.as_row())
            row["deviation"] = abs(res.ratio - 1)
            rows.append(row)
            rows.append(_audit("moment-realness", res.imag_residue, 1e-6, k1=k1, k2=k2, q=q))
        for q in P.oracle_moduli:
            chars, vals = mo.moment_values(f1, f2, q)
            naive = np.array([mo.central_product(f1, f2, chi) for chi in chars])
            worst = float(np.max(np.abs(vals.real - naive) / (1 + np.abs(naive)))) if len(chars) else 0.0
            rows.append(_audit("moment-oracle", worst, P.oracle_tolerance, k1=k1, k2=k2, q=q, characters=len(chars)))
    return rows


def _shifted_task(args) -> list[dict]:
    k1, k2, h, d, N, M, eps_power = args
    n_table = int(2 * N) + 2
    f1, f2 = compute_coefficients(k1, n_table), compute_coefficients(k2, n_table)
    bump = ak.smooth_bump
    D = mo.shifted_convolution(f1, f2, 1, 1, h, N, M, bump, bump)
    S = mo.average_shifted(f1, f2, 1, 1, d, N, M, bump, bump)
    return [
        mo.individual_bound_report(D, N, M, eps_power, h=h, k1=k1, k2=k2).as_row(),
        mo.average_bound_report(S, d, N, M, eps_power, k1=k1, k2=k2).as_row(),
    ]


def run_shifted(P: ShiftedParams, rng: np.random.Generator, eps_power: float) -> list[dict]:
    tasks = []
    for k1, k2 in P.pairs:
        for _ in range(P.draws):
            # n - m = h with n in [N, 2N] and m in [M, 2M]
            h = int(rng.integers(int(P.N - 2 * P.M), int(2 * P.N - P.M) + 1))
            d = int(rng.choice(P.d_values))
            tasks.append((k1, k2, h, d, P.N, P.M, eps_power))
    return _flatten(_pool_map(_shifted_task, tasks))


RUNNERS: dict[str, Callable[[Any, np.random.Generator, float], list[dict]]] = {
    "kloosterman-audit": run_kloosterman_audit,
    "sigma-audit": run_sigma_audit,
    "census-sweep": run_census_sweep,
    "theorem5-sweep": run_theorem5_sweep,
    "jutila": run_jutila,
    "voronoi": run_voronoi,
    "diagonal": run_diagonal,
    "moment": run_moment,
    "shifted-convolution": run_shifted,
}


# ---------------------------------------------------------------------------
# export


def _fmt(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        text = format(float(v), ".12g")
        # keep floats recognisable as floats when the CSV is read back
        return text if any(ch in text for ch in ".ein") else text + ".0"
    return str(v)


def _json_value(v: Any) -> Any:
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        x = float(format(float(v), ".12g"))
        return x if math.isfinite(x) else str(x)
    return v


def columns_of(rows: list[dict]) -> list[str]:
    cols: list[str] = []
    seen = set()
    for row in rows:
        for key in row:
            if key not in seen:
                seen.add(key)
                cols.append(key)
    return cols


def schema_line(experiment: str) -> str:
    return f"# kloosterlab schema {SCHEMA_VERSION} experiment={experiment}"


def to_csv(rows: list[dict], experiment: str, columns: list[str] | None = None) -> str:
    cols = columns or columns_of(rows) or ["family"]
    buf = io.StringIO()
    buf.write(schema_line(experiment) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for row in rows:
        w.writerow([_fmt(row.get(c)) for c in cols])
    return buf.getvalue()


def to_jsonl(rows: list[dict], columns: list[str] | None = None) -> str:
    cols = columns or columns_of(rows)
    return "".join(json.dumps({c: _json_value(row.get(c)) for c in cols}) + "\n" for row in rows)


def summarize(rows: list[dict]) -> dict:
    """Per family: row count, max and median ratio (bound reports) and audit failures."""
    fams: dict[str, dict] = {}
    for row in rows:
        fam = str(row.get("family", ""))
        entry = fams.setdefault(fam, {"rows": 0, "ratios": [], "failures": 0})
        entry["rows"] += 1
        r = row.get("ratio")
        if isinstance(r, (int, float)) and math.isfinite(r):
            entry["ratios"].append(float(r))
        if row.get("ok") is False:
            entry["failures"] += 1
    out = {}
    for fam, e in fams.items():
        d: dict[str, Any] = {"rows": e["rows"], "failures": e["failures"]}
        if e["ratios"]:
            d["max_ratio"] = _json_value(max(e["ratios"]))
            d["median_ratio"] = _json_value(statistics.median(e["ratios"]))
        out[fam] = d
    return out


def hard_failures(rows: list[dict]) -> list[dict]:
    return [row for row in rows if row.get("ok") is False]


def write_reports(rows: list[dict], experiment: str, out_dir: Path) -> dict[str, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    cols = columns_of(rows)
    paths = {
        "csv": out_dir / f"{experiment}.csv",
        "jsonl": out_dir / f"{experiment}.jsonl",
        "summary": out_dir / "summary.json",
    }
    paths["csv"].write_text(to_csv(rows, experiment, cols))
    paths["jsonl"].write_text(to_jsonl(rows, cols))
    failures = hard_failures(rows)
    summary = dict(schema=SCHEMA_VERSION, experiment=experiment, rows=len(rows),
                   hard_failures=len(failures), families=summarize(rows))
    paths["summary"].write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return paths


def run(config: ExperimentConfig, quick: bool = False, out_dir: Path | None = None) -> tuple[int, list[dict]]:
    """Run one experiment, write its artifacts, return (exit status, rows)."""
    params = config.resolved(quick)
    rng = np.random.Generator(np.random.PCG64(config.seed))
    rows = RUNNERS[config.experiment](params, rng, config.eps_power)
    target = out_dir or Path(config.output or "out") / config.experiment
    write_reports(rows, config.experiment, target)
    failures = hard_failures(rows)
    for row in failures:
        log.error("audit failed: %s", {k: row[k] for k in row if k in ("family", "residual", "tolerance", "p", "s", "q", "status")})
    return (1 if failures else 0), rows


def _read_rows(path: Path) -> tuple[str, list[dict]]:
    text = path.read_text()
    if path.suffix == ".jsonl":
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        return path.stem, rows
    lines = text.splitlines()
    experiment = path.stem
    if lines and lines[0].startswith("# kloosterlab schema"):
        for part in lines[0].split():
            if part.startswith("experiment="):
                experiment = part.split("=", 1)[1]
        lines = lines[1:]
    reader = csv.DictReader(lines)
    rows = []
    for rec in reader:
        row: dict[str, Any] = {}
        for k, v in rec.items():
            row[k] = _parse_cell(v)
        rows.append(row)
    return experiment, rows


def _parse_cell(v: str) -> Any:
    if v == "":
        return None
    if v in ("true", "false"):
        return v == "true"
    try:
        return int(v)
    except ValueError:
        pass
    try:
        return float(v)
    except ValueError:
        return v


def export(input_path: Path, fmt: str, out: Path | None = None) -> Path:
    experiment, rows = _read_rows(input_path)
    target = out or input_path.with_suffix("." + fmt)
    text = to_csv(rows, experiment) if fmt == "csv" else to_jsonl(rows)
    target.write_text(text)
    return target


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="kloosterlab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config", type=Path)
    p_run.add_argument("--quick", action="store_true", help="apply the config's quick overrides")
    p_run.add_argument("--out", type=Path, default=None, help="output directory")
    p_exp = sub.add_parser("export", help="convert a report between CSV and JSONL")
    p_exp.add_argument("input", type=Path)
    p_exp.add_argument("--format", choices=("csv", "jsonl"), required=True)
    p_exp.add_argument("--out", type=Path, default=None)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")

    if args.command == "run":
        try:
            config = load_config(args.config)
        except ConfigError as exc:
            print(exc, file=sys.stderr)
            return 2
        status, rows = run(config, args.quick, args.out)
        summary = summarize(rows)
        for fam, d in summary.items():
            extra = f" max_ratio={d['max_ratio']:.4g} median_ratio={d['median_ratio']:.4g}" if "max_ratio" in d else ""
            print(f"{fam}: rows={d['rows']} failures={d['failures']}{extra}")
        return status
    try:
        path = export(args.input, args.format, args.out)
    except OSError as exc:
        print(f"export failed: {exc}", file=sys.stderr)
        return 1
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
