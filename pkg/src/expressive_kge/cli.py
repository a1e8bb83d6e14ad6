"""Command-line entry point: train, eval, certify, construct, inspect.

Exit codes: 0 ok, 1 internal error, 2 configuration error, 3 data or
checkpoint error, 4 resource cap exceeded.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

from . import evaluation, expressiveness, geometry, kg as kgmod, training
from .model import Variant, load_checkpoint, save_checkpoint

EXIT_OK, EXIT_INTERNAL, EXIT_CONFIG, EXIT_DATA, EXIT_CAP = 0, 1, 2, 3, 4

log = logging.getLogger("expressive_kge")


class DataError(Exception):
    pass


def sha256_of(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir: Path, command: str, config: dict, inputs: list[Path], artifacts: list[Path],
                   seed, started: float) -> Path:
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "inputs": {str(p): sha256_of(p) for p in inputs},
        "artifacts": {str(p): sha256_of(p) for p in artifacts},
        "wall_time": time.perf_counter() - started,
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path


def _dataset_files(data_dir: Path) -> list[Path]:
    return [p for p in (kgmod._find_split_file(data_dir, s) for s in kgmod.SPLITS) if p is not None]


def _load_data(data_dir, entities=None, relations=None) -> kgmod.KnowledgeGraph:
    try:
        return kgmod.load_dataset(data_dir, entities, relations)
    except (OSError, kgmod.ParseError, kgmod.SplitOverlapError) as exc:
        raise DataError(str(exc)) from exc


def _load_model(path):
    try:
        return load_checkpoint(path)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot load checkpoint {path}: {exc}") from exc


def _bound_data(model, data_dir):
    data = _load_data(data_dir, model.entity_ids, model.relation_ids)
    if not model.bound_to(data):
        raise DataError(
            f"dataset vocabularies ({data.n_entities} entities, {data.n_relations} relations) "
            f"do not match the checkpoint ({model.n_entities}, {model.n_relations})"
        )
    return data


# ---------------------------------------------------------------------------
# commands


def cmd_train(args) -> int:
    started = time.perf_counter()
    config, extra = training.load_config(args.config, args.set or [])
    dim = extra.get("dim", args.dim)
    variant = extra.get("variant", Variant.parse(args.variant))
    data = _load_data(args.data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model = training.init_model(data, dim, variant, seed=config.seed)
    result = training.train(data, model, config, log_path=out / "train_log.csv")
    ckpt = save_checkpoint(result.model, out / "checkpoint.json")
    snapshot = {**config.__dict__, "dim": dim, "variant": Variant.parse(variant).value}
    inputs = _dataset_files(Path(args.data)) + ([Path(args.config)] if args.config else [])
    write_manifest(out, "train", snapshot, inputs, [ckpt, out / "train_log.csv"], config.seed, started)
    last = result.log[-1] if result.log else None
    print(f"epochs {len(result.log)}" + (f"  valid MRR {last['mrr']:.4f}  Hits@10 {last['hits@10']:.4f}" if last else ""))
    return EXIT_OK


def cmd_eval(args) -> int:
    model = _load_model(args.checkpoint)
    data = _bound_data(model, args.data)
    flt = evaluation.build_evaluation_filter(data)
    try:
        report = evaluation.evaluate(model, data, flt, split=args.split)
    except ValueError as exc:
        raise DataError(f"{args.split} split: {exc}") from exc
    per_pattern = None
    if args.stratify == "relation":
        report.per_cardinality = {}
    elif args.stratify == "cardinality":
        report.per_relation = {}
    elif args.stratify == "pattern":
        if not args.patterns:
            raise training.ConfigError("--stratify pattern needs --patterns FILE")
        try:
            patterns = kgmod.read_patterns(Path(args.patterns).read_text(encoding="utf-8").splitlines())
        except (OSError, kgmod.ParseError) as exc:
            raise DataError(str(exc)) from exc
        per_pattern = {}
        for pattern in patterns:
            triples = sorted(kgmod.derive_pattern_testset(data, pattern, args.steps))
            if not triples:
                per_pattern[str(pattern)] = None
                continue
            sub = evaluation.evaluate(model, data, flt, triples=triples)
            per_pattern[str(pattern)] = {"mrr": sub.mrr, "n_queries": sub.n_queries,
                                         "hits_at": {str(k): v for k, v in sub.hits_at.items()}}
        report.per_relation, report.per_cardinality = {}, {}
    else:
        report.per_relation, report.per_cardinality = {}, {}
    doc = report.to_dict()
    if per_pattern is not None:
        doc["per_pattern"] = per_pattern
    print(report.to_table())
    if per_pattern is not None:
        for name, res in per_pattern.items():
            print(f"{name}: " + ("no derivable test triples" if res is None else f"MRR {res['mrr']:.4f} ({res['n_queries']} queries)"))
    if args.json:
        Path(args.json).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_certify(args) -> int:
    model = geometry.load_fixture(args.fixture) if args.fixture else _load_model(args.checkpoint)
    relations = [r.strip() for r in args.relations.split(",")] if args.relations else None
    try:
        certs = geometry.certify_patterns(model, relations, args.max_body_len, args.slack, args.include_failed)
    except (KeyError, ValueError) as exc:
        raise training.ConfigError(f"bad relation filter: {exc}") from exc
    text = json.dumps(geometry.certificates_to_json(certs), indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return EXIT_OK


def cmd_construct(args) -> int:
    try:
        lines = Path(args.graph).read_text(encoding="utf-8").splitlines()
        data = kgmod.parse_triples(lines)
    except (OSError, kgmod.ParseError) as exc:
        raise DataError(str(exc)) from exc
    model = expressiveness.build_capturing_model(data, margin=args.margin, cap=args.cap)
    report = expressiveness.verify_truth_table(model, data)
    out = Path(args.out)
    save_checkpoint(model, out)
    report_path = out.with_name(out.stem + ".verification.json")
    report_path.write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    print(f"exact: {str(report.exact).lower()}  dim: {report.dim}  triples checked: {report.n_triples}")
    return EXIT_OK if report.exact else EXIT_INTERNAL


def cmd_inspect(args) -> int:
    model = geometry.load_fixture(args.fixture) if args.fixture else _load_model(args.checkpoint)
    print(f"variant {model.variant.value}  dim {model.dim}  entities {model.n_entities}  relations {model.n_relations}")
    rel_ids = model.relation_ids or [f"r{i}" for i in range(model.n_relations)]
    chosen = [args.relation] if args.relation else rel_ids
    dims = [args.dim] if args.dim is not None else range(min(model.dim, args.max_dims))
    for name in chosen:
        rel = model.relation(model.relation_position(name))
        for j in dims:
            p = geometry.parallelogram_of(rel, j)
            iv = geometry.head_tail_intervals(p)
            line = (f"{name} [{j}] head |x - {p.head_band.center:.4g} - {p.head_band.slope:.4g}y| <= {p.head_band.width:.4g}"
                    f"  tail |y - {p.tail_band.center:.4g} - {p.tail_band.slope:.4g}x| <= {p.tail_band.width:.4g}")
            if p.bounded:
                center, _ = geometry.center_and_corners(p)
                line += f"  center ({center[0]:.4g}, {center[1]:.4g})"
            line += f"  H {_fmt_interval(iv.head_interval)}  T {_fmt_interval(iv.tail_interval)}"
            print(line)
    return EXIT_OK


def _fmt_interval(iv) -> str:
    return "empty" if iv is None else f"[{iv[0]:.4g}, {iv[1]:.4g}]"


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="expressive-kge", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model on a dataset directory")
    p.add_argument("--config", help="JSON or key=value file with training settings")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one setting (repeatable)")
    p.add_argument("--data", required=True, help="directory with train/valid/test .txt or .tsv files")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--dim", type=int, default=20, help="embedding dimension (default 20)")
    p.add_argument("--variant", default="Base", help="Base, Functional, EqSlopes, NoCenter or OneBand")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="filtered ranking evaluation of a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test", choices=kgmod.SPLITS)
    p.add_argument("--stratify", choices=("none", "relation", "cardinality", "pattern"), default="none")
    p.add_argument("--patterns", help="pattern file for --stratify pattern")
    p.add_argument("--steps", type=int, default=1, help="forward-chaining steps for pattern test sets")
    p.add_argument("--json", help="also write the report as JSON to this path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("certify", help="report inference patterns captured by the relation embeddings")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--checkpoint")
    src.add_argument("--fixture", choices=geometry.FIXTURES, help="use a bundled relation table")
    p.add_argument("--relations", help="comma-separated relation names to restrict to")
    p.add_argument("--slack", type=float, default=0.0)
    p.add_argument("--max-body-len", type=int, default=2, choices=(1, 2))
    p.add_argument("--include-failed", action="store_true", help="also list patterns that do not hold")
    p.add_argument("--out", help="write certificates here instead of stdout")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("construct", help="build a model capturing a small graph exactly")
    p.add_argument("--graph", required=True, help="tab-separated triples")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--cap", type=int, default=expressiveness.DEFAULT_CAP, help="limit on |E|*|R|")
    p.add_argument("--margin", type=float, default=expressiveness.DEFAULT_MARGIN)
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("inspect", help="print bands, centers and intervals per dimension")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--checkpoint")
    src.add_argument("--fixture", choices=geometry.FIXTURES)
    p.add_argument("--relation")
    p.add_argument("--dim", type=int)
    p.add_argument("--max-dims", type=int, default=4)
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except training.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except expressiveness.CapExceededError as exc:
        print(f"cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (DataError, training.SamplingExhaustedError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - last-resort report for scripts
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
