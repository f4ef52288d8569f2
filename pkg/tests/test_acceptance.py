"""The eleven acceptance criteria, each run at its stated tolerance and time limit.

Every test prints one line ``criterion N [name]: PASS|FAIL detail``.
"""

import math
import os
import statistics
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from kloosterlab import cli

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def params(name: str, **overrides):
    cfg = cli.load_config(CONFIG_DIR / f"{name}.yaml")
    return cfg, cfg.resolved(False).model_copy(update=overrides)


def run_rows(name: str, **overrides) -> tuple[list[dict], float]:
    cfg, P = params(name, **overrides)
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    start = time.perf_counter()
    rows = cli.RUNNERS[cfg.experiment](P, rng, cfg.eps_power)
    return rows, time.perf_counter() - start


def verdict(number: int, name: str, ok: bool, detail: str) -> None:
    print(f"\ncriterion {number} [{name}]: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, f"criterion {number} [{name}]: {detail}"


def family(rows, fam):
    return [r for r in rows if r["family"] == fam]


def test_criterion_1_explicit_evaluation():
    rows, secs = run_rows("kloosterman-audit", gauss_primes=[], weil_draws=0)
    rows = family(rows, "explicit")
    moduli = {(r["p"], r["s"]) for r in rows}
    worst = max(r["residual"] for r in rows)
    ok = (
        moduli == {(p, s) for p in (5, 7, 11, 13) for s in (2, 3, 4)}
        and all(r["draws"] == 500 for r in rows)
        and all(r["tolerance"] == 1e-8 and r["ok"] for r in rows)
        and secs < 30
    )
    verdict(1, "explicit evaluation", ok, f"max |S - S_explicit|/p^(s/2) = {worst:.2e} over {len(rows)} moduli, {secs:.1f}s")


def test_criterion_2_gauss_signs():
    rows, secs = run_rows("kloosterman-audit", primes=[], weil_draws=0)
    rows = family(rows, "gauss")
    worst = max(r["residual"] for r in rows)
    cover = {(r["p"], r["s"]) for r in rows} == {(p, s) for p in (3, 5, 7, 11, 13) for s in (1, 2, 3, 4)}
    ok = cover and all(r["ok"] and r["tolerance"] == 1e-9 for r in rows) and secs < 10
    verdict(2, "gauss signs", ok, f"max residual = {worst:.2e} over {len(rows)} moduli, {secs:.1f}s")


def test_criterion_3_decomposition_and_reduction():
    rows, secs = run_rows("sigma-audit")
    decomp = family(rows, "decomposition")
    reduc = family(rows, "reduction")
    scaled = [r["residual"] / (r["p"] ** r["s"]) ** 2.5 for r in decomp + reduc]
    ok = len(decomp) == 200 and reduc and all(r["ok"] for r in decomp + reduc) and max(scaled) < 1e-6 and secs < 120
    verdict(3, "decomposition/reduction", ok,
            f"max residual/q^2.5 = {max(scaled):.1e} ({len(decomp)} decompositions, {len(reduc)} reductions), {secs:.1f}s")


def test_criterion_4_hensel_censuses():
    rows, secs = run_rows("census-sweep")
    hensel = family(rows, "hensel")
    lift = family(rows, "lift")
    sing = family(rows, "singular-k") + family(rows, "singular-T")
    with_hyp = [r for r in hensel if r["status"] != "lemma hypotheses not met"]
    worst = max(r["ratio"] for r in sing)
    max_s = max(r["s"] for r in rows)
    ok = (
        len(hensel) == 100
        and all(r["status"] == "constant" for r in with_hyp)
        and all(r["ok"] for r in lift)
        and worst < 10
        and max_s <= 5
        and secs < 300
    )
    verdict(4, "hensel censuses", ok,
            f"{len(with_hyp)}/{len(hensel)} draws meet the lifting hypothesis, all constant; "
            f"{sum(r['ok'] for r in lift)}/{len(lift)} singular sets lift uniquely; "
            f"max singular-count constant {worst:.2f}, {secs:.1f}s")


def test_criterion_5_weil_bound():
    rows, secs = run_rows("kloosterman-audit", primes=[], gauss_primes=[])
    (row,) = family(rows, "weil-violations")
    ok = row["draws"] == 10_000 and row["residual"] == 0 and secs < 30
    verdict(5, "weil bound", ok,
            f"{int(row['residual'])} violations in {row['draws']} triples, max |S|/bound = {row['max_ratio']:.3f}, {secs:.1f}s")


def test_criterion_6_jutila():
    rows, secs = run_rows("jutila")
    j = family(rows, "jutila")
    worst = max(r["ratio"] for r in j)
    ok = len(j) == 9 and worst <= 1 and all(r["ok"] for r in family(rows, "jutila-mass")) and secs < 60
    verdict(6, "jutila", ok, f"max L2 error / bound = {worst:.3f} over {len(j)} (Q, delta), {secs:.1f}s")


def test_criterion_7_voronoi():
    rows, secs = run_rows("voronoi")
    worst = max(r["residual"] for r in rows)
    ok = (
        {r["weight"] for r in rows} == {12, 16}
        and max(r["c"] for r in rows) <= 5
        and max(r["N"] for r in rows) <= 20
        and all(r["ok"] and r["tolerance"] == 1e-5 for r in rows)
        and secs < 120
    )
    verdict(7, "voronoi", ok, f"max residual = {worst:.1e} over {len(rows)} (f, b, c, N), {secs:.1f}s")


def test_criterion_8_diagonal():
    rows, secs = run_rows("diagonal")
    moduli = {r["q"] for r in rows}
    pairs = {(r["k1"], r["k2"]) for r in rows}
    worst = max(r["ratio"] for r in rows)
    ok = (
        len(moduli) == 20
        and all(50 <= q <= 500 and q % 4 != 2 for q in moduli)
        and pairs == {(12, 12), (12, 16)}
        and worst < 1
        and secs < 300
    )
    verdict(8, "diagonal", ok,
            f"max deviation / (5 q^-1/2 log^2 q) = {worst:.3f}, max relative deviation "
            f"{max(r['lhs'] for r in rows):.1e} over {len(rows)} (q, pair), {secs:.1f}s")


def test_criterion_9_moment_trend():
    rows, secs = run_rows("moment")
    moments = sorted(family(rows, "moment"), key=lambda r: r["q"])
    real = family(rows, "moment-realness")
    oracle = family(rows, "moment-oracle")
    qs = [r["q"] for r in moments]
    dev = [abs(r["ratio"] - 1) for r in moments]
    half = len(dev) // 2
    lower, upper = statistics.median(dev[:half]), statistics.median(dev[-half:])
    finite = all(math.isfinite(r["ratio"]) for r in moments)
    realness = all(r["ok"] for r in real) and max(r["residual"] for r in real) < 1e-6
    oracle_ok = all(r["ok"] and r["q"] <= 60 and r["tolerance"] == 1e-6 for r in oracle) and len(oracle) >= 1
    ratios = ", ".join(f"{q}: {r['ratio']:.4f}" for q, r in zip(qs, moments))
    ok = qs == [101, 151, 211, 307, 401] and finite and realness and oracle_ok and upper <= lower and secs < 1200
    verdict(9, "moment trend", ok,
            f"ratios {ratios}; median |ratio-1| lower half {lower:.4f}, upper half {upper:.4f}; "
            f"realness {'ok' if realness else 'FAILED'}, naive oracle "
            f"{'ok' if oracle_ok else 'FAILED'} (max {max(r['residual'] for r in oracle):.1e}), {secs:.1f}s")


def test_criterion_10_short_sum_calibration():
    rows, secs = run_rows("theorem5-sweep")
    t5 = family(rows, "theorem5")
    t15 = family(rows, "weyl-completion")
    l13 = family(rows, "differencing")
    l14 = family(rows, "completion")
    r_ok = all(r["r"] <= 100_000 for r in t5)
    m5, m15 = max(r["ratio"] for r in t5), max(r["ratio"] for r in t15)
    m13, m14 = max(r["ratio"] for r in l13), max(r["ratio"] for r in l14)
    ok = len(t5) == 200 and r_ok and m5 < 50 and m15 < 50 and m13 < 20 and m14 < 20 and secs < 600
    verdict(10, "short-sum calibration", ok,
            f"max ratios theorem5 {m5:.3f}, weyl-completion {m15:.3f}, differencing {m13:.3f}, completion {m14:.3f} "
            f"over {len(t5)} draws, {secs:.1f}s")


def _cli_run(config: Path, out: Path, workers: int) -> subprocess.CompletedProcess:
    env = dict(os.environ, KLOOSTERLAB_WORKERS=str(workers))
    return subprocess.run([sys.executable, "-m", "kloosterlab.cli", "run", str(config), "--out", str(out)],
                          capture_output=True, text=True, env=env)


def test_criterion_11_determinism(tmp_path):
    configs = sorted(CONFIG_DIR.glob("*.yaml"))
    mismatched = []
    start = time.perf_counter()
    for config in configs:
        experiment = cli.load_config(config).experiment
        a = _cli_run(config, tmp_path / config.stem / "a", 1)
        b = _cli_run(config, tmp_path / config.stem / "b", 2)
        csv_a = tmp_path / config.stem / "a" / f"{experiment}.csv"
        csv_b = tmp_path / config.stem / "b" / f"{experiment}.csv"
        if a.returncode != 0 or a.returncode != b.returncode or not csv_a.exists() or csv_a.read_bytes() != csv_b.read_bytes():
            mismatched.append(config.stem)
    secs = time.perf_counter() - start
    verdict(11, "determinism", not mismatched,
            f"{len(configs) - len(mismatched)}/{len(configs)} configs byte-identical across two runs "
            f"(1 and 2 workers){'; differ: ' + ', '.join(mismatched) if mismatched else ''}, {secs:.1f}s")
