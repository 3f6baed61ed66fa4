"""Command-line front door for batch workflows.

Subcommands map one-to-one onto library operations: register-encoder,
ingest, query, prompt, evaluate, roc, synth, serve. Numeric output is
printed with full round-trip precision so anything shown on stdout
re-parses to exactly the values in the report JSON. Usage errors exit
with status 2; operational failures exit 1 after printing a single
machine-readable JSON error line to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import evaluation as ev
from .ensemble import FusionMode, ensemble_top_k
from .errors import CytoragError, MissingEmbeddingError
from .ingest import load_corpus
from .llm import LlmClientConfig, make_client
from .persistence import open_store, save_store
from .prompting import DEFAULT_TEMPLATE, assemble_prompt, examples_from_neighbors, load_template
from .reporting import fmt, render_accuracy_csv, roc_csv, write_report_files
from .retrieval import ExclusionFilter, ExclusionMode, top_k
from .service import ServiceConfig, serve
from .store import CaseStore
from .synth import DEFAULT_ENCODERS, SynthConfig, generate_corpus


def _fail(exc: CytoragError) -> int:
    sys.stderr.write(json.dumps({"error": exc.to_dict()}, sort_keys=True) + "\n")
    return 1


def _load(store_path: str) -> CaseStore:
    return open_store(store_path)


def _parse_ks(text: str) -> tuple[int, ...]:
    return tuple(int(part) for part in text.split(",") if part.strip())


def _exclusion(record, mode_name: str) -> ExclusionFilter:
    return ExclusionFilter.for_case(record, ExclusionMode(mode_name))


def cmd_register_encoder(args: argparse.Namespace) -> int:
    path = Path(args.store)
    store = _load(args.store) if path.exists() else CaseStore()
    store.register_encoder(args.name, args.dim)
    save_store(store, args.store)
    print(f"registered {args.name.strip().lower()} dim={args.dim} store_version={store.version}")
    return 0


def cmd_ingest(args: argparse.Namespace) -> int:
    path = Path(args.store)
    store = _load(args.store) if path.exists() else CaseStore()
    report = load_corpus(store, args.embeddings, args.metadata, strict=args.strict)
    save_store(store, args.store)
    print(
        f"ingested cases={report.cases_ingested} "
        f"embeddings={report.embeddings_attached} rejects={len(report.rejects)}"
    )
    for reject in report.rejects:
        print(f"reject {reject.path}:{reject.line_no} {reject.code}: {reject.message}")
    return 0


def cmd_query(args: argparse.Namespace) -> int:
    store = _load(args.store)
    snapshot = store.snapshot()
    record = snapshot.case(args.case)
    exclusion = _exclusion(record, args.exclude)
    rows = []
    if args.encoder == "ensemble":
        fused = ensemble_top_k(
            record.embeddings, args.k, snapshot, FusionMode.parse(args.fusion), exclusion
        )
        for i, f in enumerate(fused, start=1):
            rows.append((i, f.case_id, f.fused_score))
    else:
        embedding = record.embeddings.get(args.encoder.strip().lower())
        if embedding is None:
            raise MissingEmbeddingError(
                f"case {args.case!r} has no embedding under encoder {args.encoder!r}"
            )
        for n in top_k(embedding, args.k, snapshot, exclusion):
            rows.append((n.rank, n.case_id, n.score))
    print("rank\tcase_id\tscore\tdiagnosis\tbethesda")
    for rank, case_id, score in rows:
        meta = snapshot.case(case_id).metadata
        print(f"{rank}\t{case_id}\t{fmt(score)}\t{meta.surgical_diagnosis}\t{meta.bethesda.value}")
    return 0


def cmd_prompt(args: argparse.Namespace) -> int:
    store = _load(args.store)
    snapshot = store.snapshot()
    record = snapshot.case(args.case)
    exclusion = _exclusion(record, args.exclude)
    if args.encoder == "ensemble":
        neighbors = ensemble_top_k(
            record.embeddings, args.k, snapshot, FusionMode.parse(args.fusion), exclusion
        )
    else:
        embedding = record.embeddings.get(args.encoder.strip().lower())
        if embedding is None:
            raise MissingEmbeddingError(
                f"case {args.case!r} has no embedding under encoder {args.encoder!r}"
            )
        neighbors = top_k(embedding, args.k, snapshot, exclusion)
    template = load_template(args.template_file) if args.template_file else DEFAULT_TEMPLATE
    bundle = assemble_prompt(
        args.case, record.metadata, examples_from_neighbors(neighbors, snapshot), template
    )
    if args.interpret:
        client = make_client(LlmClientConfig(stub=True) if args.stub else LlmClientConfig(
            endpoint=args.endpoint or "", model=args.model_name or "", stub=False
        ))
        try:
            response = client.interpret(bundle)
        finally:
            client.close()
        print(bundle.rendered_text)
        print(f"--- interpretation (status={response.status}, attempts={response.attempts}) ---")
        print(response.text)
    else:
        print(bundle.rendered_text)
    return 0


def _eval_config(args: argparse.Namespace) -> ev.EvalConfig:
    tasks = tuple(ev.PredictionTask.parse(t) for t in args.task.split(",") if t.strip())
    return ev.EvalConfig(
        ks=_parse_ks(args.k),
        tasks=tasks,
        exclusion_mode=ExclusionMode(args.exclude),
        pool_k=args.pool_k,
        seed=args.seed,
    )


def cmd_evaluate(args: argparse.Namespace) -> int:
    store = _load(args.store)
    report = ev.evaluate_all(store.snapshot(), _eval_config(args))
    if args.out_dir:
        paths = write_report_files(report, args.out_dir)
        for path in paths:
            print(f"wrote {path}")
    for task in report.accuracy:
        print(f"task {task}")
        rows = {model: report.accuracy[task][model] for model in report.models}
        print(render_accuracy_csv(rows, report.config.ks), end="")
    print("auc")
    print("model,k,auc")
    for model in report.models:
        for k in sorted(report.roc[model]):
            print(f"{model},{k},{fmt(report.roc[model][k].auc)}")
    print(f"content_hash,{report.content_hash}")
    return 0


def cmd_roc(args: argparse.Namespace) -> int:
    store = _load(args.store)
    config = ev.EvalConfig(ks=(args.k,), exclusion_mode=ExclusionMode(args.exclude))
    report = ev.evaluate_all(store.snapshot(), config)
    if args.model not in report.roc or args.k not in report.roc[args.model]:
        raise MissingEmbeddingError(f"no ROC data for model {args.model!r} at k={args.k}")
    result = report.roc[args.model][args.k]
    text = roc_csv(result.curve)
    Path(args.out).write_text(text, encoding="utf-8")
    print(f"wrote {args.out} points={len(result.curve.fpr)} auc={fmt(result.auc)}")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    config = SynthConfig(
        n_cases=args.cases,
        n_classes=args.classes,
        dim=args.dim,
        separation=args.separation,
        seed=args.seed,
        patients_per_class=args.patients_per_class,
        encoders=tuple(e.strip().lower() for e in args.encoders.split(",") if e.strip()),
        shuffle_labels=args.shuffle_labels,
    )
    store = generate_corpus(config)
    save_store(store, args.out)
    print(
        f"synthesized cases={len(store)} classes={config.n_classes} dim={config.dim} "
        f"encoders={','.join(config.encoders)} seed={config.seed} -> {args.out}"
    )
    if args.export_jsonl:
        out_dir = Path(args.export_jsonl)
        out_dir.mkdir(parents=True, exist_ok=True)
        snapshot = store.snapshot()
        with open(out_dir / "metadata.jsonl", "w", encoding="utf-8") as meta_fh:
            for case_id in snapshot.case_ids():
                record = snapshot.case(case_id)
                row = {
                    "case_id": record.case_id,
                    "patient_id": record.patient_id,
                    "slide_id": record.slide_id,
                    "roi_id": record.roi_id,
                    **record.metadata.to_dict(),
                }
                meta_fh.write(json.dumps(row, sort_keys=True) + "\n")
        with open(out_dir / "embeddings.jsonl", "w", encoding="utf-8") as emb_fh:
            for case_id in snapshot.case_ids():
                record = snapshot.case(case_id)
                for encoder in sorted(record.embeddings):
                    emb = record.embeddings[encoder]
                    row = {
                        "case_id": record.case_id,
                        "encoder": encoder,
                        "dim": emb.dim,
                        "vector": [float(x) for x in emb.vector],
                    }
                    emb_fh.write(json.dumps(row, sort_keys=True) + "\n")
        print(f"exported JSONL corpus to {out_dir}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    config = ServiceConfig.load(
        args.config,
        host=args.host,
        port=args.port,
        store_path=args.store,
    )
    serve(config)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cytorag", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("register-encoder", help="register an encoder namespace")
    p.add_argument("--store", required=True)
    p.add_argument("--name", required=True)
    p.add_argument("--dim", type=int, required=True)
    p.set_defaults(func=cmd_register_encoder)

    p = sub.add_parser("ingest", help="load a JSONL corpus into a store file")
    p.add_argument("--store", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--metadata", required=True)
    p.add_argument("--strict", action="store_true", help="abort on the first bad line")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("query", help="top-k similar cases for a stored case")
    p.add_argument("--store", required=True)
    p.add_argument("--case", required=True)
    p.add_argument("--encoder", required=True, help="encoder id or 'ensemble'")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--fusion", default="raw", choices=["raw", "rrf"])
    p.add_argument("--exclude", default="same_case", choices=["none", "same_case", "same_patient"])
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("prompt", help="assemble (and optionally interpret) a prompt")
    p.add_argument("--store", required=True)
    p.add_argument("--case", required=True)
    p.add_argument("--encoder", required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--fusion", default="raw", choices=["raw", "rrf"])
    p.add_argument("--exclude", default="same_case", choices=["none", "same_case", "same_patient"])
    p.add_argument("--template-file")
    p.add_argument("--interpret", action="store_true")
    p.add_argument("--stub", action="store_true", help="use the offline stub client")
    p.add_argument("--endpoint")
    p.add_argument("--model-name")
    p.set_defaults(func=cmd_prompt)

    p = sub.add_parser("evaluate", help="run the full evaluation over a store")
    p.add_argument("--store", required=True)
    p.add_argument("--k", default="1,3,5", help="comma-separated cutoffs")
    p.add_argument("--task", default="diagnosis,bethesda")
    p.add_argument("--exclude", default="same_case", choices=["none", "same_case", "same_patient"])
    p.add_argument("--pool-k", type=int, default=None)
    p.add_argument("--seed", type=int, default=None, help="recorded into the report config")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("roc", help="emit one model's ROC points as CSV")
    p.add_argument("--store", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--exclude", default="same_case", choices=["none", "same_case", "same_patient"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_roc)

    p = sub.add_parser("synth", help="generate a seeded synthetic corpus")
    p.add_argument("--cases", type=int, required=True)
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--separation", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--patients-per-class", type=int, default=2)
    p.add_argument("--encoders", default=",".join(DEFAULT_ENCODERS))
    p.add_argument("--shuffle-labels", action="store_true")
    p.add_argument("--out", required=True)
    p.add_argument("--export-jsonl", help="also write metadata/embeddings JSONL here")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--config")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--store")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CytoragError as exc:
        return _fail(exc)
    except ValueError as exc:
        parser.exit(2, f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
