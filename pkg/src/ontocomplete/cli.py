"""Command-line interface: ``ontocomplete <command> ...``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from .dl import DLSyntaxError, Ontology, load_rules, parse_rule, write_rules
from .embeddings import EmbeddingStore, top_k_similar
from .evaluation import BenchConfig, compare_scorers, f1, run_benchmark
from .gnn import GnnModel, Hyper, TrainConfig, train
from .graph import ConceptGraph, build_graph
from .hybrid import HttpClient, HybridPredictor, MockClient
from .negatives import (LabeledRule, SplitSpec, finalize_annotations,
                        gen_hard_negative_candidates, gen_training_negatives,
                        read_labeled, read_worksheet, split, write_labeled,
                        write_worksheet)
from .synth import SynthSpec, write_benchmark
from .templates import TemplateIndex
from .verbalize import verbalize_rule

log = logging.getLogger("ontocomplete")


def cmd_verbalize(args):
    rules = [parse_rule(t) for t in args.rule] if args.rule else load_rules(args.rules)
    for r in rules:
        print(verbalize_rule(r, casing=args.casing).statement)


def cmd_embeddings(args):
    store = EmbeddingStore.load(args.vectors)
    print(f"{len(store)} vectors, dimension {store.dim}")
    if args.neighbors:
        pool = Ontology.load(args.ontology).atomic_concepts if args.ontology else store.tokens
        for name, score in top_k_similar(args.neighbors, args.k, store, pool):
            print(f"{name}\t{score:.6f}")


def cmd_split(args):
    spec = SplitSpec.large(args.seed) if args.large else SplitSpec(args.test_fraction,
                                                                  args.dev_fraction, args.seed)
    parts = split(Ontology.load(args.ontology), spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name in ("train", "dev", "test"):
        write_rules(getattr(parts, name), out / f"{name}.dlr")
        print(f"{name}: {len(getattr(parts, name))} rules")


def cmd_gen_negatives(args):
    positives = load_rules(args.train)
    protected = [r for p in args.protect for r in load_rules(p)]
    concepts = Ontology.load(args.ontology).atomic_concepts if args.ontology else None
    negs = gen_training_negatives(positives, concepts, args.seed, protected)
    write_labeled([LabeledRule(r, 1) for r in positives] + negs, args.out)
    print(f"{len(positives)} positives, {len(negs)} negatives")


def cmd_gen_hard_negatives(args):
    test = load_rules(args.test)
    onto = Ontology.load(args.ontology)
    store = EmbeddingStore.load(args.vectors)
    cands = gen_hard_negative_candidates(test, store, onto.atomic_concepts, args.k, args.seed,
                                         args.per_rule, protected=list(onto))
    write_labeled(cands, args.out)
    if args.worksheet:
        write_worksheet(cands, args.worksheet)
    print(f"{len(cands)} candidates")


def cmd_finalize(args):
    cands = read_labeled(args.candidates)
    kept, kappa = finalize_annotations(cands, read_worksheet(args.worksheet))
    positives = [LabeledRule(r, 1) for r in load_rules(args.test)] if args.test else []
    write_labeled(positives + kept, args.out)
    print(f"kept {len(kept)} of {len(cands)} candidates; Cohen's kappa {kappa:.4f}")


def cmd_extract_templates(args):
    index = TemplateIndex.build(load_rules(args.train), binary=not args.no_binary)
    index.to_tsv(args.out)
    print(f"{len(index.unary)} unary, {len(index.binary)} binary templates")


def cmd_build_graph(args):
    extra = Ontology.load(args.ontology).atomic_concepts if args.ontology else ()
    graph = build_graph(load_rules(args.train), EmbeddingStore.load(args.vectors), extra)
    graph.to_json(args.out)
    print(f"{len(graph)} nodes, {len(graph.edges)} edges")


def cmd_train(args):
    graph = ConceptGraph.from_json(args.graph)
    index = TemplateIndex.from_tsv(args.templates)
    pairs = lambda path: [(x.rule, x.label) for x in read_labeled(path)]  # noqa: E731
    hyper = Hyper(mode=args.mode, layers=args.layers, hidden=args.hidden, scorer=args.scorer)
    config = TrainConfig(epochs=args.epochs, seed=args.seed)
    model, history = train(graph, index, pairs(args.train), pairs(args.dev), hyper, config)
    model.save(args.out)
    best = max(history, key=lambda h: h["dev_f1"])
    print(f"best dev F1 {best['dev_f1']:.4f} at epoch {best['epoch']}")


def _client(args):
    if args.fallback == "none":
        return None
    if args.fallback == "http":
        return HttpClient(text_path=args.text_path)
    answers = {}
    if args.mock_true:
        answers = {verbalize_rule(r).statement: "True" for r in load_rules(args.mock_true)}
    return MockClient(answers)


def cmd_predict(args):
    graph = ConceptGraph.from_json(args.graph)
    index = TemplateIndex.from_tsv(args.templates)
    ut = GnnModel.load(args.ut) if args.ut else None
    bt = GnnModel.load(args.bt) if args.bt else None
    rules = load_rules(args.candidates)
    preds = HybridPredictor(index, graph, ut, bt, _client(args), args.prompt).predict(rules)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["rule_id", "probability", "provenance", "template_id"])
        for p in preds:
            w.writerow([p.rule_id, repr(p.probability), p.provenance, p.template_id or ""])
    print(f"{len(preds)} predictions written to {args.out}")


def cmd_evaluate(args):
    with open(args.predictions, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh, delimiter="\t"))
    probs = {r["rule_id"]: float(r["probability"]) for r in rows}
    gold = read_labeled(args.labels)
    missing = [x.rule.id for x in gold if x.rule.id not in probs]
    if missing:
        raise SystemExit(f"no prediction for {len(missing)} labelled rules, e.g. {missing[0]}")
    s = f1([probs[x.rule.id] for x in gold], [x.label for x in gold], args.threshold)
    print(f"precision {s.precision:.4f}  recall {s.recall:.4f}  F1 {s.f1:.4f}  "
          f"(tp {s.tp}, fp {s.fp}, fn {s.fn}, tn {s.tn})")


def _bench_config(args) -> BenchConfig:
    config = BenchConfig.from_file(args.config) if args.config else BenchConfig()
    return config.override(seed=args.seed, scorer=getattr(args, "scorer", None),
                           fallback=getattr(args, "fallback", None))


def cmd_bench(args):
    config = _bench_config(args)
    base = Path(args.config).parent if args.config else None
    report = run_benchmark(args.ontology, args.vectors, config, base=base)
    report.write(args.out)
    print(report.to_text(), end="")


def cmd_compare_scorers(args):
    config = _bench_config(args)
    base = Path(args.config).parent if args.config else None
    scores = compare_scorers(args.ontology, args.vectors, config, base=base)
    print("scorer\tprecision\trecall\tf1")
    for name, s in scores.items():
        print(f"{name}\t{s.precision:.4f}\t{s.recall:.4f}\t{s.f1:.4f}")


def cmd_synth(args):
    paths = write_benchmark(args.out, SynthSpec(families=args.families, seed=args.seed))
    for kind, path in paths.items():
        print(f"{kind}: {path}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ontocomplete",
                                     description="Ontology completion with rule templates and GNNs")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verbalize", help="render rules as natural language")
    p.add_argument("rule", nargs="*", help="rule text (otherwise --rules)")
    p.add_argument("--rules", help="rules file")
    p.add_argument("--casing", choices=("preserve", "lower"), default="preserve")
    p.set_defaults(func=cmd_verbalize)

    p = sub.add_parser("embeddings", help="inspect a vectors file")
    p.add_argument("--vectors", required=True)
    p.add_argument("--neighbors", metavar="CONCEPT")
    p.add_argument("--ontology", help="restrict neighbours to this ontology's concepts")
    p.add_argument("-k", type=int, default=5)
    p.set_defaults(func=cmd_embeddings)

    p = sub.add_parser("split", help="train/dev/test split of an ontology")
    p.add_argument("--ontology", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--test-fraction", type=float, default=0.20)
    p.add_argument("--dev-fraction", type=float, default=0.10)
    p.add_argument("--large", action="store_true", help="hold out 5%% for testing")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("gen-negatives", help="corrupted training negatives")
    p.add_argument("--train", required=True)
    p.add_argument("--ontology", help="source of replacement concepts")
    p.add_argument("--protect", nargs="*", default=[], help="rule files negatives must avoid")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_negatives)

    p = sub.add_parser("gen-hard-negatives", help="embedding-similar test negatives")
    p.add_argument("--test", required=True)
    p.add_argument("--ontology", required=True)
    p.add_argument("--vectors", required=True)
    p.add_argument("-k", type=int, default=5)
    p.add_argument("--per-rule", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--worksheet", help="also write an annotation worksheet")
    p.set_defaults(func=cmd_gen_hard_negatives)

    p = sub.add_parser("finalize-annotations", help="keep candidates both annotators rejected")
    p.add_argument("--candidates", required=True)
    p.add_argument("--worksheet", required=True)
    p.add_argument("--test", help="test positives to include in the output")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_finalize)

    p = sub.add_parser("extract-templates", help="witnessed templates of training rules")
    p.add_argument("--train", required=True)
    p.add_argument("--no-binary", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extract_templates)

    p = sub.add_parser("build-graph", help="concept co-occurrence graph")
    p.add_argument("--train", required=True)
    p.add_argument("--vectors", required=True)
    p.add_argument("--ontology", help="add all its concepts as nodes")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_graph)

    p = sub.add_parser("train", help="train a unary or binary template model")
    p.add_argument("--graph", required=True)
    p.add_argument("--templates", required=True)
    p.add_argument("--train", required=True, help="labelled TSV")
    p.add_argument("--dev", required=True, help="labelled TSV")
    p.add_argument("--mode", choices=("ut", "bt"), default="ut")
    p.add_argument("--scorer", choices=("distmult", "transe"), default="distmult")
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="hybrid prediction for candidate rules")
    p.add_argument("--candidates", required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--templates", required=True)
    p.add_argument("--ut")
    p.add_argument("--bt")
    p.add_argument("--fallback", choices=("mock", "http", "none"), default="none")
    p.add_argument("--mock-true", help="rules the mock fallback answers True for")
    p.add_argument("--text-path", default="text", help="response field holding the reply")
    p.add_argument("--prompt", type=int, default=1, choices=range(1, 6))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="precision/recall/F1 of a predictions file")
    p.add_argument("--predictions", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.set_defaults(func=cmd_evaluate)

    for name, func, text in (("bench", cmd_bench, "end-to-end benchmark"),
                             ("compare-scorers", cmd_compare_scorers, "DistMult vs TransE")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--ontology", required=True)
        p.add_argument("--vectors", required=True)
        p.add_argument("--config")
        p.add_argument("--seed", type=int)
        if name == "bench":
            p.add_argument("--scorer", choices=("distmult", "transe"))
            p.add_argument("--fallback", choices=("truth", "none", "http"))
            p.add_argument("--out", required=True)
        p.set_defaults(func=func)

    p = sub.add_parser("synth", help="write the synthetic benchmark")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--families", type=int, default=20)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "verbalize" and not args.rule and not args.rules:
        print("verbalize: give rule text or --rules", file=sys.stderr)
        return 2
    try:
        args.func(args)
    except (DLSyntaxError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
