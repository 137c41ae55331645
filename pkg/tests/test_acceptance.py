"""Acceptance gate: one test per release criterion, each printing a
single PASS/FAIL line with its runtime against the stated budget.

Run with ``pytest -v tests/test_acceptance.py``.
"""

import json
import math
import time
import warnings

import numpy as np
import pytest

from slidesearch.barcode import (Barcode, BoB, hamming, minmax_binarize,
                                 pack_bits, slide_distance)
from slidesearch.cohort import load_manifest
from slidesearch.metrics import (Prediction, organ_summary, per_diagnosis_f1,
                                 pooled_f1)
from slidesearch.model_selection import assign_folds, fold_patient_counts
from slidesearch.cohort import Cohort, DiagnosisLabel, SlideRecord
from slidesearch.pipeline import (DEFAULT_RATES, RunConfig, run_benchmark,
                                  variant_name)
from slidesearch.stats import (GmmComponent, GmmFit, fit_gmm_1d,
                               gmm_intersection, holm_bonferroni)
from slidesearch.synth import SynthSpec, generate
from slidesearch.vector import SlideVector, knn_search
from slidesearch.retrieval import read_results


def _report(capsys, number, failures, elapsed, budget, detail):
    ok = not failures and elapsed < budget
    status = "PASS" if ok else "FAIL"
    budget_note = "" if math.isinf(budget) else f", budget {budget:.0f}s"
    with capsys.disabled():
        print(f"[criterion {number:02d}] {status} "
              f"({elapsed:.2f}s{budget_note}) {detail}")
    assert not failures, "; ".join(str(f) for f in failures)
    assert elapsed < budget, (
        f"criterion {number} took {elapsed:.2f}s, budget {budget}s")


# ---------------------------------------------------------------------
# shared end-to-end run: wide-separation cohort, all rates + vector path

BENCH_SPEC = SynthSpec(organs=2, diagnoses=3, patients=8, slides=1,
                       patches=64, dim=32, separation=50.0, seed=0)


@pytest.fixture(scope="module")
def bench_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("bench")
    start = time.perf_counter()
    manifest = generate(BENCH_SPEC, root / "data")
    config = RunConfig(manifest=str(manifest), out_dir=str(root / "out"),
                       rates=DEFAULT_RATES, vector_models=("meanvec",),
                       n_values=(1, 3), seed=0)
    report = run_benchmark(config)
    elapsed = time.perf_counter() - start
    return {"manifest": manifest, "out": root / "out", "report": report,
            "config": config, "elapsed": elapsed}


# ---------------------------------------------------------------------

def test_criterion_01_interval_reproduction(capsys):
    """Published (mean, sd, n=17) rows reproduce their 95% CIs."""
    start = time.perf_counter()
    rows = [
        # (mean, sd, expected_low, expected_high), published to 3 decimals
        (0.689, 0.209, 0.581, 0.796),
        (0.655, 0.20, 0.552, 0.758),
        (0.654, 0.20, 0.552, 0.756),
        (0.632, 0.21, 0.524, 0.741),
        (0.590, 0.20, 0.486, 0.693),
    ]
    rng = np.random.default_rng(0)
    failures = []
    for mean, sd, lo, hi in rows:
        z = rng.normal(size=17)
        z = (z - z.mean()) / z.std(ddof=1)
        stats = organ_summary(mean + sd * z)
        if abs(stats.ci_low - lo) > 0.002 or abs(stats.ci_high - hi) > 0.002:
            failures.append((mean, sd, stats.ci_low, stats.ci_high, lo, hi))
    elapsed = time.perf_counter() - start
    _report(capsys, 1, failures, elapsed, 1.0,
            f"{len(rows)} published intervals matched within 0.002")


def _holm_reference(p_values, alpha):
    m = len(p_values)
    order = sorted(range(m), key=lambda i: (p_values[i], i))
    rejected = set()
    for rank, i in enumerate(order, start=1):
        if p_values[i] < alpha / (m - rank + 1):
            rejected.add(i)
        else:
            break
    return rejected


def test_criterion_02_holm_oracle(capsys):
    start = time.perf_counter()
    rng = np.random.default_rng(1)
    failures = []
    for trial in range(1000):
        p = rng.random(9)
        if trial % 2:
            p = np.round(p, 2)  # force ties
        p = p.tolist()
        names = [f"c{i}" for i in range(9)]
        got = set(holm_bonferroni(p, 0.05, names).rejected_names())
        want = {f"c{i}" for i in _holm_reference(p, 0.05)}
        if got != want:
            failures.append((trial, p))
        bonferroni = {f"c{i}" for i in range(9) if p[i] < 0.05 / 9}
        if not bonferroni <= got:
            failures.append((trial, "holm lost a bonferroni rejection"))
    elapsed = time.perf_counter() - start
    _report(capsys, 2, failures, elapsed, 5.0,
            "1000 nine-way p-vectors match the step-down oracle")


def _median_of_min_oracle(qbits, cbits):
    mins = []
    for qrow in qbits:
        best = min(int(np.sum(qrow != crow)) for crow in cbits)
        mins.append(best)
    mins.sort()
    k = len(mins)
    if k % 2:
        return float(mins[k // 2])
    return (mins[k // 2 - 1] + mins[k // 2]) / 2.0


def test_criterion_03_median_of_min_oracle(capsys):
    start = time.perf_counter()
    rng = np.random.default_rng(2)
    failures = []
    for trial in range(500):
        nbits = int(rng.integers(2, 65))
        nq = int(rng.integers(1, 11))
        nc = int(rng.integers(1, 11))
        qbits = (rng.random((nq, nbits)) < 0.5).astype(np.uint8)
        cbits = (rng.random((nc, nbits)) < 0.5).astype(np.uint8)
        query = BoB("q", nbits, pack_bits(qbits))
        cand = BoB("c", nbits, pack_bits(cbits))
        got = slide_distance(query, cand)
        want = _median_of_min_oracle(qbits, cbits)
        if got != want:
            failures.append((trial, got, want))
    elapsed = time.perf_counter() - start
    _report(capsys, 3, failures, elapsed, 5.0,
            "500 random barcode bunches match the double-loop oracle")


def test_criterion_04_hamming_metric(capsys):
    start = time.perf_counter()
    rng = np.random.default_rng(3)
    failures = []
    for trial in range(10_000):
        nbits = int(rng.integers(1, 65))
        rows = (rng.random((3, nbits)) < 0.5).astype(np.uint8)
        a, b, c = (Barcode(nbits, pack_bits(r)) for r in rows)
        dab, dbc, dac = hamming(a, b), hamming(b, c), hamming(a, c)
        if dab < 0 or hamming(a, a) != 0:
            failures.append((trial, "identity"))
        if dab != hamming(b, a):
            failures.append((trial, "symmetry"))
        if dac > dab + dbc:
            failures.append((trial, "triangle"))
        # independent route: integer XOR + CPython popcount
        ints = [int.from_bytes(np.packbits(r, bitorder="little").tobytes(),
                               "little") for r in rows]
        if dab != ((ints[0] ^ ints[1]).bit_count()):
            failures.append((trial, "popcount"))
        if failures:
            break
    elapsed = time.perf_counter() - start
    _report(capsys, 4, failures, elapsed, 5.0,
            "10000 random triples satisfy metric laws; popcount equals "
            "bit-loop")


def _random_monotone(values, rng):
    """Random strictly increasing elementwise transform of ``values``."""
    kind = rng.integers(0, 4)
    if kind == 0:
        a = float(rng.uniform(0.1, 10.0))
        b = float(rng.uniform(-5.0, 5.0))
        return a * values + b
    if kind == 1:
        return np.exp(values)
    if kind == 2:
        return values ** 3
    # rank map: strictly increasing by construction
    order = np.argsort(values)
    gaps = rng.uniform(0.1, 1.0, size=values.size)
    heights = np.cumsum(gaps)
    out = np.empty_like(values)
    out[order] = heights
    return out


def test_criterion_05_minmax_invariance(capsys):
    start = time.perf_counter()
    rng = np.random.default_rng(4)
    failures = []
    for trial in range(1000):
        d = int(rng.integers(8, 65))
        v = rng.normal(size=d)
        base = minmax_binarize(v)
        if minmax_binarize(_random_monotone(v, rng)) != base:
            failures.append(trial)
    elapsed = time.perf_counter() - start
    _report(capsys, 5, failures, elapsed, 2.0,
            "1000 barcodes invariant under monotone transforms")


def test_criterion_06_lopo_soundness(capsys, bench_run):
    start = time.perf_counter()
    records = load_manifest(bench_run["manifest"])
    patient = {r.slide_id: r.patient_id for r in records}
    organ = {r.slide_id: r.organ for r in records}
    checked = 0
    failures = []
    result_files = sorted((bench_run["out"] / "results").glob("*.csv"))
    if not result_files:
        failures.append("no results files found")
    for path in result_files:
        for res in read_results(path):
            for nb in res.neighbors:
                checked += 1
                if patient[nb.slide_id] == patient[res.query_slide_id]:
                    failures.append((path.name, res.query_slide_id,
                                     nb.slide_id, "same patient"))
                if organ[nb.slide_id] != organ[res.query_slide_id]:
                    failures.append((path.name, res.query_slide_id,
                                     nb.slide_id, "cross organ"))
    elapsed = time.perf_counter() - start
    _report(capsys, 6, failures, elapsed, math.inf,
            f"{checked} retrieved neighbors all respect patient and organ "
            f"boundaries")


def _vector_run_mean_macro(root, separation, seed):
    spec = SynthSpec(organs=2, diagnoses=3, patients=8, slides=1,
                     patches=64, dim=32, separation=separation, seed=seed)
    data = root / f"sep{separation:g}_s{seed}"
    manifest = generate(spec, data)
    config = RunConfig(manifest=str(manifest), out_dir=str(data / "out"),
                       rates=(), vector_models=("meanvec",),
                       n_values=(1,), seed=seed)
    report = run_benchmark(config)
    organs = report["scores"]["1"]["meanvec"]
    return float(np.mean(list(organs.values())))


def test_criterion_07_separability_sweep(capsys, bench_run, tmp_path):
    start = time.perf_counter()
    failures = []
    # wide separation: every path perfect at top-1
    scores = bench_run["report"]["scores"]["1"]
    models = [variant_name(r) for r in DEFAULT_RATES] + ["meanvec"]
    for model in models:
        for organ, macro in scores[model].items():
            if macro != 1.0:
                failures.append((model, organ, macro))
    # zero separation: chance-level macro-F1 averaged over 20 seeds
    chance = [_vector_run_mean_macro(tmp_path, 0.0, seed)
              for seed in range(20)]
    chance_mean = float(np.mean(chance))
    if abs(chance_mean - 1.0 / 3.0) > 0.1:
        failures.append(("chance level", chance_mean))
    # monotone in separation, averaged over 10 seeds
    separations = [0.0, 1.0, 2.0, 4.0, 8.0, 50.0]
    means = []
    for sep in separations:
        vals = [_vector_run_mean_macro(tmp_path, sep, 100 + seed)
                for seed in range(10)]
        means.append(float(np.mean(vals)))
    for prev, cur, sep in zip(means, means[1:], separations[1:]):
        if cur < prev - 0.05:
            failures.append(("drop at separation", sep, prev, cur))
    elapsed = time.perf_counter() - start + bench_run["elapsed"]
    _report(capsys, 7, failures, elapsed, 120.0,
            f"perfect at wide separation; chance mean {chance_mean:.3f}; "
            f"sweep {['%.3f' % m for m in means]}")


def _weighted_density(comp, x):
    return (comp.weight / (comp.sd * math.sqrt(2 * math.pi))
            * math.exp(-0.5 * ((x - comp.mean) / comp.sd) ** 2))


def test_criterion_08_gmm_thresholds(capsys):
    start = time.perf_counter()
    failures = []
    symmetric = GmmFit(components=(GmmComponent(0.5, 0.0, 1.0),
                                   GmmComponent(0.5, 2.0, 1.0)),
                       loglik=0.0, loglik_path=(0.0,), n_iter=1,
                       converged=True)
    thr = gmm_intersection(symmetric)
    if abs(thr.threshold - 1.0) > 1e-9:
        failures.append(("symmetric", thr.threshold))
    rng = np.random.default_rng(5)
    for trial in range(100):
        n1 = int(rng.integers(20, 100))
        n2 = int(rng.integers(20, 100))
        gap = float(rng.uniform(0.5, 8.0))
        data = np.concatenate([
            rng.normal(0.0, rng.uniform(0.2, 1.5), size=n1),
            rng.normal(gap, rng.uniform(0.2, 1.5), size=n2)])
        fit = fit_gmm_1d(data, components=2, n_init=3, seed=trial)
        path = np.asarray(fit.loglik_path)
        if np.any(np.diff(path) < -1e-9):
            failures.append((trial, "log-likelihood decreased"))
        thr = gmm_intersection(fit)
        c1, c2 = thr.components
        resid = abs(_weighted_density(c1, thr.threshold)
                    - _weighted_density(c2, thr.threshold))
        if resid >= 1e-10:
            failures.append((trial, "residual", resid))
    elapsed = time.perf_counter() - start
    _report(capsys, 8, failures, elapsed, 30.0,
            "100 fitted mixtures: monotone EM, exact density crossings")


def test_criterion_09_fold_splitter(capsys):
    start = time.perf_counter()
    rng = np.random.default_rng(6)
    failures = []
    for trial in range(200):
        rows = []
        sid = 0
        for g in range(int(rng.integers(1, 6))):
            for p in range(int(rng.integers(1, 13))):
                pid = f"p{g}_{p}"
                for s in range(int(rng.integers(1, 4))):
                    rows.append(SlideRecord(f"s{sid}", pid, "lung",
                                            f"dx{g}", f"f{sid}.ssb", {}))
                    sid += 1
        cohort = Cohort.from_slides(rows)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            folds = assign_folds(cohort, k=3, seed=trial)
        patients = {r.patient_id for r in rows}
        if set(folds.assignment) != patients:
            failures.append((trial, "patient missing from assignment"))
        slide_folds = folds.slide_folds(rows)
        for rec in rows:
            if slide_folds[rec.slide_id] != folds.fold_of(rec.patient_id):
                failures.append((trial, "slide strayed from its patient"))
        for lab, counts in fold_patient_counts(folds, cohort).items():
            if sum(counts) >= 3 and max(counts) - min(counts) > 1:
                failures.append((trial, lab, counts))
        if failures:
            break
    # pooling a single fold must equal scoring it directly
    preds = [Prediction(f"s{i}", DiagnosisLabel("lung", f"dx{i % 3}"),
                        DiagnosisLabel("lung", f"dx{(i + i // 3) % 3}"), 1)
             for i in range(12)]
    if pooled_f1([preds]) != per_diagnosis_f1(preds):
        failures.append("single-fold pooling changed the scores")
    elapsed = time.perf_counter() - start
    _report(capsys, 9, failures, elapsed, 30.0,
            "200 random cohorts split soundly; single-fold pooling is "
            "the identity")


def test_criterion_10_knn_exactness(capsys):
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    failures = []
    for trial in range(500):
        size = int(rng.integers(5, 201))
        d = int(rng.choice([2, 8, 32, 128]))
        block = rng.normal(size=(size, d))
        # duplicated vectors force distance ties
        for _ in range(max(1, size // 10)):
            i, j = rng.integers(0, size, size=2)
            block[i] = block[j]
        ids = [f"s{i:03d}" for i in range(size)]
        patients = [f"p{i % 17}" for i in range(size)]
        organs = ["lung" if i % 4 else "skin" for i in range(size)]
        pool = [SlideVector(sid, "m", row)
                for sid, row in zip(ids, block)]
        q = rng.normal(size=d)
        n = int(rng.integers(1, 11))
        got = knn_search(SlideVector("q", "m", q), "p0", "lung",
                         pool, patients, organs, n)
        oracle = []
        for sid, row, pid, org in zip(ids, block, patients, organs):
            if org != "lung" or pid == "p0":
                continue
            diff = q - row
            oracle.append((float(np.sum(diff * diff)), sid))
        oracle.sort()
        want = [(sid, math.sqrt(d2)) for d2, sid in oracle[:n]]
        got_pairs = [(nb.slide_id, nb.distance) for nb in got.neighbors]
        if got_pairs != want:
            failures.append((trial, got_pairs[:3], want[:3]))
            break
    elapsed = time.perf_counter() - start
    _report(capsys, 10, failures, elapsed, 10.0,
            "500 random pools match full-sort ranking, ties included")


def test_criterion_11_determinism(capsys, bench_run, tmp_path):
    start = time.perf_counter()
    failures = []
    reports = []
    for tag in ("a", "b"):
        out = tmp_path / tag
        config = RunConfig(manifest=str(bench_run["manifest"]),
                           out_dir=str(out), rates=DEFAULT_RATES,
                           vector_models=("meanvec",), n_values=(1, 3),
                           seed=0)
        run_benchmark(config)
        reports.append(out)
    out_a, out_b = reports
    compared = 0
    for path_a in sorted(out_a.rglob("*")):
        if path_a.is_dir():
            continue
        rel = path_a.relative_to(out_a)
        path_b = out_b / rel
        if not path_b.exists():
            failures.append((str(rel), "missing in second run"))
            continue
        if rel.name == "report.json":
            docs = []
            for p in (path_a, path_b):
                doc = json.loads(p.read_text())
                del doc["timestamp"]
                del doc["config"]["out_dir"]
                docs.append(doc)
            if docs[0] != docs[1]:
                failures.append((str(rel), "differs after removing "
                                           "timestamp"))
        elif path_a.read_bytes() != path_b.read_bytes():
            failures.append((str(rel), "bytes differ"))
        compared += 1
    if compared < 10:
        failures.append(f"only {compared} files compared")
    elapsed = time.perf_counter() - start
    _report(capsys, 11, failures, elapsed, 240.0,
            f"{compared} output files byte-identical across identical runs")
