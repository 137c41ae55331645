"""Command-line entry point for every pipeline stage.

Exit codes: 0 on success, 2 for configuration/usage errors, 3 for data
errors (missing or malformed inputs). Thread count for per-slide work
defaults from the SLIDESEARCH_THREADS environment variable.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

from .barcode import BarcodeIndex, build_index, encode_minmax, search_slide
from .cohort import apply_exclusions, exclusion_reasons, load_manifest
from .errors import ConfigError, DataError, DegenerateDataError
from .io import read_feature_file, read_slide_vector
from .mosaic import build_mosaic
from .pipeline import (BenchmarkRun, RunConfig, THRESHOLD_COLUMNS,
                       TTEST_COLUMNS, _maybe_map, _read_mosaic_csv,
                       _write_csv, gmm_table, parse_config_file,
                       read_organ_scores, read_scatter, run_benchmark,
                       ttest_table, write_report)
from .retrieval import read_results, write_results
from .synth import SynthSpec, generate
from .vector import SlideVector, VectorPool, l2_normalize

ENV_THREADS = "SLIDESEARCH_THREADS"


def _env_threads() -> int:
    raw = os.environ.get(ENV_THREADS, "1")
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{ENV_THREADS}={raw!r} is not an integer")
    if value < 1:
        raise ConfigError(f"{ENV_THREADS} must be >= 1, got {value}")
    return value


def _threads(args) -> int:
    return args.threads if args.threads is not None else _env_threads()


def cmd_synth(args) -> int:
    spec = SynthSpec(organs=args.organs, diagnoses=args.diagnoses,
                     patients=args.patients, slides=args.slides,
                     patches=args.patches, dim=args.dim,
                     separation=args.sep, seed=args.seed)
    manifest = generate(spec, args.out)
    print(f"wrote {spec.total_slides} slides to {manifest}")
    return 0


def cmd_cohort(args) -> int:
    records = load_manifest(args.manifest)
    cohort = apply_exclusions(records, args.min_patients,
                              args.min_diagnoses)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "cohort.csv",
               ["slide_id", "patient_id", "organ", "diagnosis"],
               [[r.slide_id, r.patient_id, r.organ, r.diagnosis]
                for r in cohort.slides])
    excluded = exclusion_reasons(records, args.min_patients,
                                 args.min_diagnoses)
    _write_csv(out / "excluded.csv",
               ["slide_id", "patient_id", "organ", "diagnosis", "reason"],
               [[r.slide_id, r.patient_id, r.organ, r.diagnosis, reason]
                for r, reason in excluded])
    print(f"kept {len(cohort.slides)}/{len(records)} slides, "
          f"{len(cohort.organs)} organs, {len(cohort.labels)} diagnoses; "
          f"excluded {len(excluded)}")
    return 0


def cmd_mosaic(args) -> int:
    records = load_manifest(args.manifest)
    root = Path(args.manifest).parent
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def one(rec):
        patches = read_feature_file(root / rec.patch_features)
        return build_mosaic(patches, args.rate, k_chroma=args.k_chroma,
                            seed=args.seed, slide_id=rec.slide_id)

    mosaics = _maybe_map(one, records, _threads(args))
    for mosaic in mosaics:
        _write_csv(out / f"{mosaic.slide_id}.csv",
                   ["slide_id", "row_index"],
                   [[mosaic.slide_id, int(i)]
                    for i in mosaic.selected_indices])
    total = sum(len(m) for m in mosaics)
    print(f"wrote {len(mosaics)} mosaics ({total} patches) to {out}")
    return 0


def _load_selections(mosaic_dir: Path) -> dict[str, list[int]]:
    if not mosaic_dir.is_dir():
        raise DataError(f"mosaic directory not found: {mosaic_dir}")
    merged: dict[str, list[int]] = {}
    for path in sorted(mosaic_dir.glob("*.csv")):
        for slide_id, rows in _read_mosaic_csv(path).items():
            if slide_id in merged:
                raise DataError(
                    f"slide {slide_id} appears in multiple mosaic files "
                    f"under {mosaic_dir}")
            merged[slide_id] = rows
    if not merged:
        raise DataError(f"no mosaic CSVs found under {mosaic_dir}")
    return merged


def cmd_index_build(args) -> int:
    import numpy as np
    records = load_manifest(args.manifest)
    root = Path(args.manifest).parent
    selections = _load_selections(Path(args.mosaic))

    def one(rec):
        rows = selections.get(rec.slide_id)
        if not rows:
            raise DataError(f"no mosaic for slide {rec.slide_id}")
        patches = read_feature_file(root / rec.patch_features)
        bob = encode_minmax(patches.embeddings[np.asarray(rows)],
                            slide_id=rec.slide_id)
        return (rec.slide_id, rec.patient_id, rec.organ, rec.diagnosis, bob)

    index = build_index(_maybe_map(one, records, _threads(args)))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    index.save(out)
    print(f"indexed {len(index)} slides ({index.nbits}-bit barcodes) "
          f"at {out}")
    return 0


def cmd_index_search(args) -> int:
    index = BarcodeIndex.load(args.index)
    result = search_slide(index, args.query, args.n,
                          normalize=args.normalize)
    if args.out:
        write_results(args.out, [result])
        print(f"wrote {len(result.neighbors)} neighbors to {args.out}")
    else:
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(["query_slide", "rank", "neighbor_slide",
                         "distance"])
        for rank, nb in enumerate(result.neighbors, start=1):
            writer.writerow([result.query_slide_id, rank, nb.slide_id,
                             repr(nb.distance)])
    if result.shortfall:
        print(f"note: only {len(result.neighbors)} candidates available "
              f"(requested {args.n})", file=sys.stderr)
    return 0


def cmd_vsearch(args) -> int:
    import numpy as np
    records = load_manifest(args.manifest)
    root = Path(args.manifest).parent
    pool = VectorPool(args.model)
    vectors = {}
    raw = []
    for rec in records:
        rel = rec.slide_vectors.get(args.model)
        if rel is None:
            raise DataError(
                f"slide {rec.slide_id} has no vector for model "
                f"{args.model!r}")
        raw.append(read_slide_vector(root / rel))
    if args.normalize:
        block = l2_normalize(np.stack(raw))
        raw = [block[i] for i in range(block.shape[0])]
    for rec, vec in zip(records, raw):
        sv = SlideVector(rec.slide_id, args.model,
                         np.asarray(vec, dtype=np.float64))
        vectors[rec.slide_id] = sv
        pool.add(sv, rec.patient_id, rec.organ)

    def one(rec):
        return pool.search(vectors[rec.slide_id], rec.patient_id,
                           rec.organ, args.n)

    results = _maybe_map(one, records, _threads(args))
    write_results(args.out, results, include_model=True)
    print(f"wrote rankings for {len(results)} queries to {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    n_values = tuple(args.n)
    config = RunConfig(manifest=args.manifest, out_dir=args.out,
                       n_values=n_values, patient_agg=args.patient_agg,
                       min_patients=args.min_patients,
                       min_diagnoses=args.min_diagnoses)
    run = BenchmarkRun(config)
    run.out.mkdir(parents=True, exist_ok=True)
    cohort = run.stage_cohort()
    known = {rec.slide_id for rec in cohort.slides}
    grouped: dict[str, list] = {}
    for res in read_results(args.results):
        model = res.model_name or args.model_name
        if res.query_slide_id not in known:
            raise DataError(
                f"results reference slide {res.query_slide_id!r} outside "
                f"the evaluated cohort (excluded or unknown)")
        for nb in res.neighbors:
            if nb.slide_id not in known:
                raise DataError(
                    f"results reference neighbor {nb.slide_id!r} outside "
                    f"the evaluated cohort")
        grouped.setdefault(model, []).append(res)
    if not grouped:
        raise DataError(f"no usable rows in {args.results}")
    report_scores = run.evaluate(cohort, grouped)
    _write_csv(run.out / "excluded.csv",
               ["slide_id", "patient_id", "organ", "diagnosis", "reason"],
               run.excluded_rows)
    write_report(run.out, config, cohort, sorted(grouped), report_scores,
                 len(run.excluded_rows),
                 ("summary", "per_organ", "per_diagnosis", "wins",
                  "misclassification", "excluded"))
    print(f"evaluated {sorted(grouped)} at n={list(n_values)}; "
          f"tables in {run.out}")
    return 0


def cmd_stats_ttest(args) -> int:
    scores = read_organ_scores(args.scores)
    rows = ttest_table(scores, alpha=args.alpha, baseline=args.baseline)
    _write_csv(Path(args.out), TTEST_COLUMNS, rows)
    n_rejected = sum(1 for r in rows if r[9] == "true")
    print(f"wrote {len(rows)} comparisons ({n_rejected} rejected) "
          f"to {args.out}")
    return 0


def cmd_stats_gmm(args) -> int:
    table = read_scatter(args.scatter)
    rows = gmm_table(table, n_init=args.n_init, seed=args.seed,
                     log_x=args.log_x)
    _write_csv(Path(args.out), THRESHOLD_COLUMNS, rows)
    print(f"wrote {len(rows)} thresholds to {args.out}")
    return 0


def cmd_run(args) -> int:
    mapping = parse_config_file(args.config) if args.config else {}
    overrides = {
        "manifest": args.manifest, "out": args.out, "models": args.models,
        "rates": args.rates, "n": args.n_csv, "seed": args.seed,
        "threads": args.threads, "patient_agg": args.patient_agg,
        "baseline": args.baseline, "alpha": args.alpha,
        "k_chroma": args.k_chroma, "min_patients": args.min_patients,
        "min_diagnoses": args.min_diagnoses,
        "normalize_vectors": args.normalize_vectors,
        "normalize_hamming": args.normalize_hamming,
        "gmm_n_init": args.gmm_n_init,
    }
    for key, value in overrides.items():
        if value is not None:
            mapping[key] = str(value)
    if "threads" not in mapping:
        mapping["threads"] = str(_env_threads())
    config = RunConfig.from_strings(mapping)
    report = run_benchmark(config)
    print(f"benchmark complete: {report['cohort']['n_slides']} slides, "
          f"models {report['models']}; report at "
          f"{Path(config.out_dir) / 'report.json'}")
    return 0


def _add_threads(parser) -> None:
    parser.add_argument("--threads", type=int, default=None,
                        help=f"worker threads (default: ${ENV_THREADS} "
                             f"or 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slidesearch",
        description="Slide retrieval benchmark: mosaic/barcode and "
                    "vector search with LOPO evaluation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic cohort")
    p.add_argument("--organs", type=int, default=2)
    p.add_argument("--diagnoses", type=int, default=3)
    p.add_argument("--patients", type=int, default=8)
    p.add_argument("--slides", type=int, default=1)
    p.add_argument("--patches", type=int, default=64)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--sep", type=float, default=4.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("cohort", help="apply exclusion rules to a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--min-patients", type=int, default=4)
    p.add_argument("--min-diagnoses", type=int, default=2)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_cohort)

    p = sub.add_parser("mosaic", help="select mosaic patches per slide")
    p.add_argument("--manifest", required=True)
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--k-chroma", type=int, default=9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _add_threads(p)
    p.set_defaults(func=cmd_mosaic)

    p = sub.add_parser("index", help="barcode index operations")
    isub = p.add_subparsers(dest="index_command", required=True)
    pb = isub.add_parser("build", help="build a BoB index from mosaics")
    pb.add_argument("--manifest", required=True)
    pb.add_argument("--mosaic", required=True,
                    help="directory of mosaic CSVs")
    pb.add_argument("--out", required=True)
    _add_threads(pb)
    pb.set_defaults(func=cmd_index_build)
    ps = isub.add_parser("search", help="LOPO search for an indexed slide")
    ps.add_argument("--index", required=True)
    ps.add_argument("--query", required=True, help="query slide_id")
    ps.add_argument("--n", type=int, required=True)
    ps.add_argument("--normalize", action="store_true",
                    help="divide Hamming medians by barcode length")
    ps.add_argument("--out", default="")
    ps.set_defaults(func=cmd_index_search)

    p = sub.add_parser("vsearch", help="slide-vector Euclidean search")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--normalize", action="store_true",
                   help="L2-normalize vectors before ranking")
    p.add_argument("--out", required=True)
    _add_threads(p)
    p.set_defaults(func=cmd_vsearch)

    p = sub.add_parser("evaluate", help="score ranked results")
    p.add_argument("--results", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--n", type=int, nargs="+", default=[1, 3])
    p.add_argument("--out", required=True)
    p.add_argument("--patient-agg", default="per-slide",
                   choices=["vote", "best-slide", "per-slide"])
    p.add_argument("--model-name", default="bob",
                   help="model label for results files without a model "
                        "column")
    p.add_argument("--min-patients", type=int, default=4)
    p.add_argument("--min-diagnoses", type=int, default=2)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("stats", help="statistical analyses")
    ssub = p.add_subparsers(dest="stats_command", required=True)
    pt = ssub.add_parser("ttest", help="paired t-tests with Holm correction")
    pt.add_argument("--scores", required=True, help="per_organ.csv")
    pt.add_argument("--baseline", default="",
                    help="baseline model (default: best mean)")
    pt.add_argument("--alpha", type=float, default=0.05)
    pt.add_argument("--out", default="ttests.csv")
    pt.set_defaults(func=cmd_stats_ttest)
    pg = ssub.add_parser("gmm", help="GMM thresholds on the "
                                     "prevalence-performance scatter")
    pg.add_argument("--scatter", required=True, help="per_diagnosis.csv")
    pg.add_argument("--n-init", type=int, default=5)
    pg.add_argument("--seed", type=int, default=0)
    pg.add_argument("--log-x", action="store_true",
                    help="fit case counts in log10 units")
    pg.add_argument("--out", default="thresholds.csv")
    pg.set_defaults(func=cmd_stats_gmm)

    p = sub.add_parser("run", help="end-to-end benchmark")
    p.add_argument("--config", default="",
                   help="key=value config file; flags override it")
    p.add_argument("--manifest")
    p.add_argument("--out")
    p.add_argument("--models", help="comma list of vector models, "
                                    "'all' or 'none'")
    p.add_argument("--rates", help="comma list of mosaic rates or 'none'")
    p.add_argument("--n", dest="n_csv", help="comma list of top-n values")
    p.add_argument("--seed", type=int)
    p.add_argument("--patient-agg",
                   choices=["vote", "best-slide", "per-slide"])
    p.add_argument("--baseline")
    p.add_argument("--alpha", type=float)
    p.add_argument("--k-chroma", type=int)
    p.add_argument("--min-patients", type=int)
    p.add_argument("--min-diagnoses", type=int)
    p.add_argument("--normalize-vectors", action="store_const", const=True)
    p.add_argument("--normalize-hamming", action="store_const", const=True)
    p.add_argument("--gmm-n-init", type=int)
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_run)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DegenerateDataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
