"""End-to-end benchmark: cohort -> search paths -> metrics -> stats.

Expensive stages (mosaics, barcode indexes, search results) are resumable:
their outputs live on disk under the run directory and are reused when
present. Scoring and statistics are cheap and recomputed every run, so
evaluation parameter tweaks never read stale tables.

All randomness derives from one master seed via sha256-based per-stage
tags, so partial re-runs and full runs agree.
"""

from __future__ import annotations

import csv
import json
import math
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields as dc_fields
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .barcode import build_index, encode_minmax, BarcodeIndex, search_slide
from .cohort import (Cohort, apply_exclusions, exclusion_reasons,
                     load_manifest)
from .errors import ConfigError, DataError, DegenerateDataError
from .io import read_feature_file, read_slide_vector
from .metrics import (aggregate_patient_predictions, majority_vote,
                      misclassification_profile, organ_macro_f1,
                      organ_summary, per_diagnosis_f1, win_counts)
from .mosaic import build_mosaic
from .retrieval import read_results, write_results
from .stats import fit_gmm_1d, gmm_intersection, holm_bonferroni, paired_t_test
from .vector import SlideVector, VectorPool, l2_normalize

DEFAULT_RATES = (0.05, 0.1, 0.2, 0.5, 1.0)
DEFAULT_N = (1, 3)
PATIENT_AGG_MODES = ("vote", "best-slide", "per-slide")


def variant_name(rate: float) -> str:
    """Barcode variant label for a sampling rate: 0.05 -> bob5."""
    pct = int(round(rate * 100))
    return f"bob{pct}"


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def parse_config_file(path) -> dict[str, str]:
    """Flat ``key = value`` file, # comments, later keys override."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    out: dict[str, str] = {}
    for line_no, raw in enumerate(path.read_text(encoding="utf-8").splitlines(),
                                  start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path} line {line_no}: expected key=value, "
                              f"got {raw!r}")
        out[key.strip()] = value.strip()
    return out


@dataclass(frozen=True)
class RunConfig:
    manifest: str
    out_dir: str
    vector_models: tuple[str, ...] = ("all",)
    rates: tuple[float, ...] = DEFAULT_RATES
    n_values: tuple[int, ...] = DEFAULT_N
    seed: int = 0
    k_chroma: int = 9
    min_patients: int = 4
    min_diagnoses: int = 2
    patient_agg: str = "per-slide"
    normalize_vectors: bool = False
    normalize_hamming: bool = False
    alpha: float = 0.05
    baseline: str = ""
    gmm_n_init: int = 5
    threads: int = 1

    def __post_init__(self):
        if not self.manifest:
            raise ConfigError("manifest path is required")
        if not self.out_dir:
            raise ConfigError("output directory is required")
        if not self.vector_models and not self.rates:
            raise ConfigError("need at least one model: vector models "
                              "and/or barcode rates")
        for rate in self.rates:
            if not 0.0 < rate <= 1.0:
                raise ConfigError(f"rate {rate} outside (0, 1]")
        names = [variant_name(r) for r in self.rates]
        if len(set(names)) != len(names):
            raise ConfigError(f"rates collide after naming: {names}")
        for n in self.n_values:
            if n < 1:
                raise ConfigError(f"n must be >= 1, got {n}")
        if not self.n_values:
            raise ConfigError("need at least one n value")
        if self.patient_agg not in PATIENT_AGG_MODES:
            raise ConfigError(f"patient_agg must be one of "
                              f"{PATIENT_AGG_MODES}, got {self.patient_agg!r}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha {self.alpha} outside (0, 1)")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        if self.k_chroma < 1:
            raise ConfigError(f"k_chroma must be >= 1, got {self.k_chroma}")
        if self.gmm_n_init < 1:
            raise ConfigError(f"gmm_n_init must be >= 1")

    def to_dict(self) -> dict:
        out = {}
        for f in dc_fields(self):
            value = getattr(self, f.name)
            out[f.name] = list(value) if isinstance(value, tuple) else value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        kwargs = dict(data)
        for key in ("vector_models", "rates", "n_values"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)

    @classmethod
    def from_strings(cls, mapping: dict[str, str]) -> "RunConfig":
        """Build from a flat string config (file or CLI key=value)."""
        known = {f.name for f in dc_fields(cls)} | {"models", "out", "n"}
        unknown = set(mapping) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs: dict = {}
        get = mapping.get
        if get("manifest"):
            kwargs["manifest"] = mapping["manifest"]
        out = get("out") or get("out_dir")
        if out:
            kwargs["out_dir"] = out
        models = get("models", get("vector_models"))
        if models is not None:
            kwargs["vector_models"] = tuple(
                m.strip() for m in models.split(",") if m.strip()
            ) if models.strip().lower() != "none" else ()
        rates = get("rates")
        if rates is not None:
            kwargs["rates"] = tuple(
                float(r) for r in rates.split(",") if r.strip()
            ) if rates.strip().lower() != "none" else ()
        n = get("n", get("n_values"))
        if n is not None:
            kwargs["n_values"] = tuple(
                int(v) for v in n.split(",") if v.strip())
        for key, conv in (("seed", int), ("k_chroma", int),
                          ("min_patients", int), ("min_diagnoses", int),
                          ("alpha", float), ("gmm_n_init", int),
                          ("threads", int), ("patient_agg", str),
                          ("baseline", str),
                          ("normalize_vectors", _parse_bool),
                          ("normalize_hamming", _parse_bool)):
            if get(key) is not None:
                try:
                    kwargs[key] = conv(mapping[key])
                except ValueError as exc:
                    raise ConfigError(f"bad value for {key}: "
                                      f"{mapping[key]!r}") from exc
        missing = {"manifest", "out_dir"} - set(kwargs)
        if missing:
            raise ConfigError(f"missing required config keys: "
                              f"{sorted(missing)} (use manifest=, out=)")
        return cls(**kwargs)


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _read_mosaic_csv(path: Path) -> dict[str, list[int]]:
    out: dict[str, list[int]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["slide_id", "row_index"]:
            raise DataError(f"unexpected mosaic header in {path}: {header}")
        for row in reader:
            if not row:
                continue
            out.setdefault(row[0], []).append(int(row[1]))
    return out


def _maybe_map(fn, items, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


class BenchmarkRun:
    """Stage driver bound to one config; see run_benchmark()."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.out = Path(config.out_dir)
        self.root = Path(config.manifest).parent
        self.excluded_rows: list[list] = []

    # ---------------- cohort ----------------

    def stage_cohort(self) -> Cohort:
        cfg = self.config
        records = load_manifest(cfg.manifest)
        if not records:
            raise DataError(f"manifest {cfg.manifest} has no slides")
        cohort = apply_exclusions(records, cfg.min_patients,
                                  cfg.min_diagnoses)
        for rec, reason in exclusion_reasons(records, cfg.min_patients,
                                             cfg.min_diagnoses):
            self.excluded_rows.append([rec.slide_id, rec.patient_id,
                                       rec.organ, rec.diagnosis, reason])
        if not cohort.slides:
            raise DataError("no slides survive the exclusion rules")
        _write_csv(self.out / "cohort.csv",
                   ["slide_id", "patient_id", "organ", "diagnosis"],
                   [[r.slide_id, r.patient_id, r.organ, r.diagnosis]
                    for r in cohort.slides])
        return cohort

    def resolve_models(self, cohort: Cohort) -> list[str]:
        available: set[str] = set()
        for rec in cohort.slides:
            available.update(rec.slide_vectors)
        wanted = self.config.vector_models
        if wanted == ("all",):
            return sorted(available)
        for name in wanted:
            if name not in available:
                raise ConfigError(
                    f"model {name!r} not present in manifest "
                    f"(available: {sorted(available)})")
        return list(wanted)

    # ---------------- barcode path ----------------

    def stage_mosaics(self, cohort: Cohort, rate: float) -> Path:
        cfg = self.config
        path = self.out / "mosaics" / f"{variant_name(rate)}.csv"
        if path.exists():
            return path
        def one(rec):
            try:
                patches = read_feature_file(self.root / rec.patch_features)
                mosaic = build_mosaic(patches, rate, k_chroma=cfg.k_chroma,
                                      seed=cfg.seed, slide_id=rec.slide_id)
            except Exception as exc:
                raise DataError(
                    f"mosaic stage failed for slide {rec.slide_id}: {exc}"
                ) from exc
            return mosaic
        mosaics = _maybe_map(one, cohort.slides, cfg.threads)
        rows = [[m.slide_id, int(i)] for m in mosaics
                for i in m.selected_indices]
        _write_csv(path, ["slide_id", "row_index"], rows)
        return path

    def stage_index(self, cohort: Cohort, rate: float,
                    mosaic_csv: Path) -> Path:
        path = self.out / "index" / f"{variant_name(rate)}.bob"
        if path.exists():
            return path
        selections = _read_mosaic_csv(mosaic_csv)
        def one(rec):
            rows = selections.get(rec.slide_id)
            if not rows:
                raise DataError(
                    f"index stage: slide {rec.slide_id} missing from "
                    f"{mosaic_csv}")
            patches = read_feature_file(self.root / rec.patch_features)
            bob = encode_minmax(patches.embeddings[np.asarray(rows)],
                                slide_id=rec.slide_id)
            return (rec.slide_id, rec.patient_id, rec.organ, rec.diagnosis,
                    bob)
        items = _maybe_map(one, cohort.slides, self.config.threads)
        index = build_index(items)
        path.parent.mkdir(parents=True, exist_ok=True)
        index.save(path)
        return path

    def stage_bob_search(self, cohort: Cohort, rate: float,
                         index_path: Path, n_search: int) -> Path:
        name = variant_name(rate)
        path = self.out / "results" / f"{name}.csv"
        if path.exists():
            return path
        index = BarcodeIndex.load(index_path)
        def one(rec):
            try:
                return search_slide(index, rec.slide_id, n_search,
                                    model_name=name,
                                    normalize=self.config.normalize_hamming)
            except Exception as exc:
                raise DataError(
                    f"search stage ({name}) failed for slide "
                    f"{rec.slide_id}: {exc}") from exc
        results = _maybe_map(one, cohort.slides, self.config.threads)
        path.parent.mkdir(parents=True, exist_ok=True)
        write_results(path, results, include_model=True)
        return path

    # ---------------- vector path ----------------

    def stage_vector_search(self, cohort: Cohort, model: str,
                            n_search: int) -> Path:
        path = self.out / "results" / f"{model}.csv"
        if path.exists():
            return path
        pool = VectorPool(model)
        vectors: dict[str, SlideVector] = {}
        raw = []
        for rec in cohort.slides:
            rel = rec.slide_vectors.get(model)
            if rel is None:
                raise DataError(
                    f"slide {rec.slide_id} has no vector for model "
                    f"{model!r}")
            raw.append(read_slide_vector(self.root / rel))
        if self.config.normalize_vectors:
            block = l2_normalize(np.stack(raw))
            raw = [block[i] for i in range(block.shape[0])]
        for rec, vec in zip(cohort.slides, raw):
            sv = SlideVector(rec.slide_id, model,
                             np.asarray(vec, dtype=np.float64))
            vectors[rec.slide_id] = sv
            pool.add(sv, rec.patient_id, rec.organ)
        def one(rec):
            try:
                return pool.search(vectors[rec.slide_id], rec.patient_id,
                                   rec.organ, n_search)
            except Exception as exc:
                raise DataError(
                    f"search stage ({model}) failed for slide "
                    f"{rec.slide_id}: {exc}") from exc
        results = _maybe_map(one, cohort.slides, self.config.threads)
        path.parent.mkdir(parents=True, exist_ok=True)
        write_results(path, results, include_model=True)
        return path

    # ---------------- evaluation ----------------

    def evaluate(self, cohort: Cohort, model_results: dict):
        """Score ranked results per model and n; writes the five tables.

        ``model_results`` maps model name to a results CSV path or an
        in-memory list of RetrievalResult.
        """
        cfg = self.config
        labels = cohort.slide_labels()
        patients = {r.slide_id: r.patient_id for r in cohort.slides}
        organs = cohort.organs
        per_diag_rows: list[list] = []
        per_organ_rows: list[list] = []
        summary_rows: list[list] = []
        wins_rows: list[list] = []
        mis_rows: list[list] = []
        report_scores: dict = {}
        for n in cfg.n_values:
            organ_matrix: dict[str, dict[str, float]] = {}
            diag_matrix: dict[str, dict[str, float]] = {}
            for model in sorted(model_results):
                results = model_results[model]
                if isinstance(results, (str, Path)):
                    results = read_results(results)
                preds = []
                for res in results:
                    if not res.neighbors:
                        continue
                    preds.append(majority_vote(
                        res, labels, n,
                        patient_id=patients[res.query_slide_id]))
                answered = {p.query_slide_id for p in preds}
                for rec in cohort.slides:
                    if rec.slide_id not in answered and n == cfg.n_values[0]:
                        self.excluded_rows.append(
                            [rec.slide_id, rec.patient_id, rec.organ,
                             rec.diagnosis, f"no_candidates:{model}"])
                preds = aggregate_patient_predictions(preds, cfg.patient_agg)
                macro_by_organ: dict[str, float] = {}
                for organ in organs:
                    organ_preds = [p for p in preds
                                   if p.true_label.organ == organ]
                    if not organ_preds:
                        continue
                    scores = per_diagnosis_f1(organ_preds)
                    macro = organ_macro_f1(scores)
                    macro_by_organ[organ] = macro
                    per_organ_rows.append(
                        [model, n, organ, macro,
                         sum(1 for s in scores if s.support > 0),
                         len(organ_preds)])
                    for s in scores:
                        per_diag_rows.append(
                            [model, n, s.label.organ, s.label.diagnosis,
                             s.precision, s.recall, s.f1, s.support])
                        if s.support > 0:
                            key = f"{s.label.organ}/{s.label.diagnosis}"
                            diag_matrix.setdefault(key, {})[model] = s.f1
                    organ_matrix.setdefault(organ, {})[model] = macro
                    profile = misclassification_profile(organ_preds)
                    for true_lab in sorted(profile):
                        for pred_lab in sorted(profile[true_lab]):
                            mis_rows.append(
                                [model, n, true_lab.organ,
                                 true_lab.diagnosis, pred_lab.diagnosis,
                                 profile[true_lab][pred_lab]])
                if macro_by_organ:
                    stats = organ_summary(
                        [macro_by_organ[o] for o in sorted(macro_by_organ)])
                    summary_rows.append(
                        [model, n, stats.mean, stats.sd, stats.ci_low,
                         stats.ci_high, stats.n])
                report_scores.setdefault(str(n), {})[model] = {
                    o: macro_by_organ[o] for o in sorted(macro_by_organ)}
            for model, count in win_counts(organ_matrix).items():
                wins_rows.append(["organ", n, model, count])
            for model, count in win_counts(
                    diag_matrix, skip_degenerate_ties=True).items():
                wins_rows.append(["diagnosis", n, model, count])
        _write_csv(self.out / "per_diagnosis.csv",
                   ["model", "n", "organ", "diagnosis", "precision",
                    "recall", "f1", "support"], per_diag_rows)
        _write_csv(self.out / "per_organ.csv",
                   ["model", "n", "organ", "macro_f1", "n_labels",
                    "n_evaluated"], per_organ_rows)
        _write_csv(self.out / "summary.csv",
                   ["model", "n", "mean_macro_f1", "sd", "ci_low", "ci_high",
                    "n_organs"], summary_rows)
        _write_csv(self.out / "wins.csv",
                   ["level", "n", "model", "wins"], wins_rows)
        _write_csv(self.out / "misclassification.csv",
                   ["model", "n", "organ", "true_diagnosis",
                    "predicted_diagnosis", "count"], mis_rows)
        return report_scores

    # ---------------- statistics ----------------

    def stage_stats(self, report_scores: dict):
        rows = ttest_table(report_scores, alpha=self.config.alpha,
                           baseline=self.config.baseline)
        _write_csv(self.out / "ttests.csv", TTEST_COLUMNS, rows)

    def stage_gmm(self):
        table = read_scatter(self.out / "per_diagnosis.csv")
        rows = gmm_table(table, n_init=self.config.gmm_n_init,
                         seed=self.config.seed)
        _write_csv(self.out / "thresholds.csv", THRESHOLD_COLUMNS, rows)


TTEST_COLUMNS = ["n", "model_a", "model_b", "n_pairs", "t_stat", "df",
                 "p_value", "rank", "threshold", "rejected", "note"]
THRESHOLD_COLUMNS = ["model", "n", "axis", "weight1", "mean1", "sd1",
                     "weight2", "mean2", "sd2", "threshold",
                     "between_means", "note"]


def ttest_table(report_scores: dict, alpha: float = 0.05,
                baseline: str = "") -> list[list]:
    """Paired t-tests of every model against the baseline, Holm-corrected.

    ``report_scores`` maps n (as str or int) -> model -> organ -> macro-F1.
    An empty baseline picks the model with the highest mean score. Pairs
    with zero-variance differences are listed but excluded from Holm.
    """
    rows: list[list] = []
    for n_key in sorted(report_scores, key=int):
        by_model = report_scores[n_key]
        models = sorted(by_model)
        if len(models) < 2:
            continue
        organs = sorted(set.intersection(
            *(set(by_model[m]) for m in models)))
        if len(organs) < 2:
            continue
        if baseline:
            if baseline not in models:
                raise ConfigError(
                    f"baseline {baseline!r} not among models {models}")
            base = baseline
        else:
            base = max(models,
                       key=lambda m: (np.mean([by_model[m][o]
                                               for o in organs]), m))
        tested, degenerate = [], []
        for other in (m for m in models if m != base):
            a = [by_model[base][o] for o in organs]
            b = [by_model[other][o] for o in organs]
            try:
                tested.append(paired_t_test(a, b, base, other))
            except DegenerateDataError:
                degenerate.append(other)
        if tested:
            decision = holm_bonferroni([t.p_value for t in tested],
                                       alpha=alpha,
                                       names=[t.model_b for t in tested])
            by_name = {it.name: it for it in decision.items}
            for t in tested:
                it = by_name[t.model_b]
                rows.append([int(n_key), t.model_a, t.model_b, t.n_pairs,
                             t.t_stat, t.df, t.p_value, it.rank,
                             it.threshold, str(it.rejected).lower(), ""])
        for other in degenerate:
            rows.append([int(n_key), base, other, len(organs), "", "", "",
                         "", "", "false", "degenerate_differences"])
    return rows


def read_scatter(per_diagnosis_csv) -> dict[tuple[str, int],
                                            list[tuple[int, float]]]:
    """(model, n) -> [(support, f1), ...] for supported labels."""
    path = Path(per_diagnosis_csv)
    if not path.exists():
        raise DataError(f"scores file not found: {path}")
    table: dict[tuple[str, int], list[tuple[int, float]]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"model", "n", "support", "f1"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise DataError(
                f"{path} must have columns {sorted(required)}")
        for rec in reader:
            if int(rec["support"]) <= 0:
                continue
            key = (rec["model"], int(rec["n"]))
            table.setdefault(key, []).append(
                (int(rec["support"]), float(rec["f1"])))
    return table


def read_organ_scores(path) -> dict[str, dict[str, dict[str, float]]]:
    """per_organ.csv -> n (str) -> model -> organ -> macro-F1."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"scores file not found: {path}")
    out: dict[str, dict[str, dict[str, float]]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"model", "n", "organ", "macro_f1"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise DataError(f"{path} must have columns {sorted(required)}")
        for rec in reader:
            out.setdefault(rec["n"], {}).setdefault(
                rec["model"], {})[rec["organ"]] = float(rec["macro_f1"])
    return out


def gmm_table(table: dict[tuple[str, int], list[tuple[int, float]]],
              n_init: int = 5, seed: int = 0,
              log_x: bool = False) -> list[list]:
    """Two-component GMM thresholds per (model, n) on both scatter axes.

    With ``log_x`` the case-count axis is fitted in log10 units and
    reported as axis ``log10_case_count`` (all values stay in log units).
    Degenerate fits become note rows instead of aborting the table.
    """
    rows: list[list] = []
    for (model, n) in sorted(table):
        points = table[(model, n)]
        counts = [float(c) for c, _ in points]
        if log_x:
            axes = [("log10_case_count",
                     [math.log10(c) for c in counts])]
        else:
            axes = [("case_count", counts)]
        axes.append(("f1", [f for _, f in points]))
        for axis, values in axes:
            try:
                fit = fit_gmm_1d(values, components=2, n_init=n_init,
                                 seed=seed)
                thr = gmm_intersection(fit, axis=axis)
            except (DegenerateDataError, ValueError) as exc:
                rows.append([model, n, axis] + [""] * 8 +
                            [str(exc).replace(",", ";")])
                continue
            c1, c2 = thr.components
            rows.append([model, n, axis, c1.weight, c1.mean, c1.sd,
                         c2.weight, c2.mean, c2.sd, thr.threshold,
                         str(thr.between_means).lower(), ""])
    return rows


def run_benchmark(config: RunConfig) -> dict:
    """Execute every stage; returns the report dict (also report.json)."""
    run = BenchmarkRun(config)
    run.out.mkdir(parents=True, exist_ok=True)
    cohort = run.stage_cohort()
    models = run.resolve_models(cohort)
    n_search = max(config.n_values)
    model_results: dict[str, Path] = {}
    for rate in config.rates:
        mosaic_csv = run.stage_mosaics(cohort, rate)
        index_path = run.stage_index(cohort, rate, mosaic_csv)
        model_results[variant_name(rate)] = run.stage_bob_search(
            cohort, rate, index_path, n_search)
    for model in models:
        model_results[model] = run.stage_vector_search(cohort, model,
                                                       n_search)
    if not model_results:
        raise ConfigError("no models to evaluate")
    report_scores = run.evaluate(cohort, model_results)
    run.stage_stats(report_scores)
    run.stage_gmm()
    _write_csv(run.out / "excluded.csv",
               ["slide_id", "patient_id", "organ", "diagnosis", "reason"],
               run.excluded_rows)
    return write_report(run.out, config, cohort, sorted(model_results),
                        report_scores, len(run.excluded_rows),
                        ("summary", "per_organ", "per_diagnosis", "wins",
                         "misclassification", "ttests", "thresholds",
                         "excluded"))


def write_report(out_dir, config: RunConfig, cohort: Cohort,
                 models: list[str], report_scores: dict,
                 n_excluded: int, table_names) -> dict:
    """Bundle config, versions and the emitted tables into report.json."""
    out_dir = Path(out_dir)
    report = {
        "config": config.to_dict(),
        "cohort": {
            "n_slides": len(cohort.slides),
            "n_organs": len(cohort.organs),
            "n_labels": len(cohort.labels),
            "n_excluded": n_excluded,
        },
        "models": list(models),
        "seed_derivation": "sha256('<master>:<tag>[:<tag>...]') "
                           "first 4 bytes little-endian",
        "scores": report_scores,
        "tables": {},
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "slidesearch": __version__,
        },
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    for name in table_names:
        path = out_dir / f"{name}.csv"
        with open(path, newline="", encoding="utf-8") as fh:
            report["tables"][name] = list(csv.reader(fh))
    with open(out_dir / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report
