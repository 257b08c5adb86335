"""Command-line pipelines.

Exit status: 0 on success, 2 for usage errors, 1 for data errors (one-line
diagnostic on stderr).
"""

from __future__ import annotations

import argparse
import logging
import sys

from apiembed import corpus, embedding, evaluation, relatedness, search, trainset

log = logging.getLogger("apiembed")


class DataError(Exception):
    pass


def _add_tokenizer_flags(p):
    p.add_argument("--stop-words", metavar="FILE", help="stop-word list, one per line (default: bundled English list)")


def _add_idf_flags(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--tuples", metavar="FILE", help="word-API tuple file (idf source)")
    src.add_argument("--stats", metavar="FILE", help="co-occurrence stats cache (idf source)")
    p.add_argument("--log-idf", action="store_true", help="use ln(N/df) instead of N/df")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="apiembed", description="Joint word/API embeddings and their applications.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("ingest", help="method records -> word-API tuples")
    p.add_argument("--input", required=True, metavar="FILE")
    p.add_argument("--output", required=True, metavar="FILE")
    p.add_argument("--allowlist", metavar="FILE", help="package prefixes, one per line (default: Java SE)")
    p.add_argument("--note-prefixes", default="note,test", help="comma-separated first-word prefixes to discard")
    _add_tokenizer_flags(p)

    p = sub.add_parser("trainset", help="word-API tuples -> training text")
    p.add_argument("--input", required=True, metavar="FILE")
    p.add_argument("--output", required=True, metavar="FILE")
    p.add_argument("--strategy", choices=trainset.STRATEGIES, default="shuffle")
    p.add_argument("--copies", "--shuffle-copies", type=int, default=10)
    p.add_argument("--support", type=float, default=0.0001)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train", help="training text -> model file")
    p.add_argument("--input", required=True, metavar="FILE")
    p.add_argument("--output", required=True, metavar="FILE")
    d = embedding.TrainConfig()
    p.add_argument("--dim", type=int, default=d.dim)
    p.add_argument("--window", type=int, default=d.window)
    p.add_argument("--min-count", type=int, default=d.min_count)
    p.add_argument("--sample", type=float, default=d.sample)
    p.add_argument("--negative", type=int, default=d.negative)
    p.add_argument("--iter", type=int, default=d.iterations, dest="iterations")
    p.add_argument("--alpha", type=float, default=d.alpha)
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--workers", type=int, default=d.workers)

    p = sub.add_parser("nearest", help="nearest vocabulary terms by cosine")
    p.add_argument("--model", required=True, metavar="FILE")
    p.add_argument("term")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--kind", choices=embedding.KINDS, default="all")

    p = sub.add_parser("rank", help="rank APIs related to a word")
    p.add_argument("word")
    p.add_argument("--method", choices=relatedness.METHODS, default="word2api")
    p.add_argument("--model", metavar="FILE")
    p.add_argument("--tuples", metavar="FILE")
    p.add_argument("--stats", metavar="FILE")
    p.add_argument("--save-stats", metavar="FILE", help="write the co-occurrence stats built from --tuples")
    p.add_argument("--k", type=int, default=100)

    for name, help_ in (("expand", "expand a query into weighted APIs"), ("recommend", "recommend API sequences for a query")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("query")
        p.add_argument("--model", required=True, metavar="FILE")
        _add_idf_flags(p)
        _add_tokenizer_flags(p)
        p.add_argument("--k", type=int, default=10)
        if name == "recommend":
            p.add_argument("--expand-k", type=int, default=10, help="APIs in the expanded query")
            p.add_argument("--search", metavar="FILE", help="tuples to search (default: the --tuples file)")

    p = sub.add_parser("link", help="link questions to API documents")
    p.add_argument("--questions", required=True, metavar="FILE")
    p.add_argument("--docs", required=True, metavar="FILE")
    p.add_argument("--method", choices=search.LINK_METHODS, default="vsm+word2api")
    p.add_argument("--alpha", type=float)
    p.add_argument("--model", metavar="FILE")
    p.add_argument("--tuples", metavar="FILE")
    p.add_argument("--stats", metavar="FILE")
    p.add_argument("--log-idf", action="store_true")
    p.add_argument("--k", type=int, default=10)
    _add_tokenizer_flags(p)

    p = sub.add_parser("tune-alpha", help="grid-search alpha on training questions")
    p.add_argument("--questions", required=True, metavar="FILE")
    p.add_argument("--docs", required=True, metavar="FILE")
    p.add_argument("--base-method", choices=("we", "word2api"), default="word2api")
    p.add_argument("--model", required=True, metavar="FILE")
    _add_idf_flags(p)
    p.add_argument("--k", type=int, default=10)
    _add_tokenizer_flags(p)

    p = sub.add_parser("eval", help="score rankings against judgments")
    p.add_argument("--rankings", required=True, metavar="FILE")
    p.add_argument("--judgments", required=True, metavar="FILE")
    p.add_argument("--ks", default="1,5,10", help="comma-separated cutoffs")
    p.add_argument("--depth", type=int, default=10, help="cutoff for MAP, MRR and FR")
    p.add_argument("--standard-ap", action="store_true", help="divide AvgP by the number of relevant items")
    return parser


def _validate(parser, args):
    if args.command == "rank":
        if args.method == "word2api" and not args.model:
            parser.error("rank --method word2api requires --model")
        if args.method != "word2api" and not (args.tuples or args.stats):
            parser.error(f"rank --method {args.method} requires --tuples or --stats")
        if args.save_stats and not args.tuples:
            parser.error("--save-stats requires --tuples")
    if args.command == "link":
        if args.method != "vsm" and not args.model:
            parser.error(f"link --method {args.method} requires --model")
        if args.method != "vsm" and not (args.tuples or args.stats):
            parser.error(f"link --method {args.method} requires --tuples or --stats")
        if args.alpha is not None and "+" not in args.method:
            parser.error("--alpha only applies to vsm+we and vsm+word2api")
    if args.command == "trainset" and args.copies < 1:
        parser.error("--copies must be >= 1")
    if args.command == "eval":
        try:
            args.ks = [int(k) for k in args.ks.split(",") if k]
        except ValueError:
            parser.error("--ks must be comma-separated integers")


def _stop_words(args):
    return corpus.load_stop_words(args.stop_words) if getattr(args, "stop_words", None) else None


def _stats(args):
    if args.stats:
        return relatedness.load_stats(args.stats)
    return relatedness.build_stats(corpus.read_tuples(args.tuples))


def _idf(args):
    return relatedness.idf_table(_stats(args), log=args.log_idf)


def cmd_ingest(args, out):
    allowlist = corpus.load_allowlist(args.allowlist)
    prefixes = [p for p in args.note_prefixes.split(",") if p]
    tuples = corpus.build_tuples(corpus.read_records(args.input), allowlist, _stop_words(args) or None, prefixes)
    n = corpus.write_tuples(tuples, args.output)
    log.info("wrote %d tuples to %s", n, args.output)


def cmd_trainset(args, out):
    tuples = corpus.read_tuples(args.input)
    text = trainset.make_training_text(tuples, args.strategy, args.copies, args.seed, args.support)
    text.write(args.output)
    log.info("wrote %d lines to %s", len(text), args.output)


def cmd_train(args, out):
    config = embedding.TrainConfig(
        dim=args.dim, window=args.window, min_count=args.min_count, sample=args.sample,
        negative=args.negative, iterations=args.iterations, alpha=args.alpha,
        seed=args.seed, workers=args.workers,
    )
    config.validate()
    model = embedding.train(trainset.read_training_text(args.input), config)
    embedding.save_model(model, args.output)
    log.info("trained %d vectors of dimension %d", len(model), model.dim)


def cmd_nearest(args, out):
    model = embedding.load_model(args.model)
    for line in relatedness.format_ranking(embedding.nearest_terms(model, args.term, args.k, args.kind)):
        out.write(line + "\n")


def cmd_rank(args, out):
    model = embedding.load_model(args.model) if args.model else None
    stats = None
    if args.method != "word2api" or args.save_stats:
        stats = _stats(args)
        if args.save_stats:
            relatedness.save_stats(stats, args.save_stats)
    ranking = relatedness.rank_apis(args.word, args.method, args.k, model=model, stats=stats)
    for line in relatedness.format_ranking(ranking):
        out.write(line + "\n")


def cmd_expand(args, out):
    model = embedding.load_model(args.model)
    expanded = search.expand_query(model, _idf(args), args.query, k=args.k, stop_words=_stop_words(args))
    for line in relatedness.format_ranking(expanded.entries):
        out.write(line + "\n")


def cmd_recommend(args, out):
    model = embedding.load_model(args.model)
    expanded = search.expand_query(model, _idf(args), args.query, k=args.expand_k, stop_words=_stop_words(args))
    source = args.search or args.tuples
    if not source:
        raise DataError("recommend needs --search when idf comes from --stats")
    for rank, rec in enumerate(search.recommend_sequences(expanded, corpus.read_tuples(source), args.k), 1):
        out.write(f"{rank} {rec.score:.6f} {' '.join(rec.tuple.apis)}\n")


def cmd_link(args, out):
    model = embedding.load_model(args.model) if args.model else None
    idf = _idf(args) if (args.tuples or args.stats) else None
    index = search.DocumentIndex(search.read_documents(args.docs), model, idf, _stop_words(args))
    alpha = args.alpha if args.alpha is not None else (0.18 if args.method == "vsm+we" else 0.36)
    for q in search.read_questions(args.questions):
        for rank, (doc_id, score) in enumerate(index.rank(q.text, args.method, alpha, args.k), 1):
            out.write(f"{q.qid} {rank} {score:.6f} {doc_id}\n")


def cmd_tune_alpha(args, out):
    model = embedding.load_model(args.model)
    index = search.DocumentIndex(search.read_documents(args.docs), model, _idf(args), _stop_words(args))
    questions = search.read_questions(args.questions)
    out.write(f"{search.tune_alpha(questions, index, args.base_method, k=args.k):.2f}\n")


def cmd_eval(args, out):
    rows = evaluation.evaluate_rankings(
        evaluation.read_rankings(args.rankings),
        evaluation.read_judgments(args.judgments),
        ks=args.ks, depth=args.depth, standard_ap=args.standard_ap,
    )
    out.write(evaluation.format_report(rows))


COMMANDS = {
    "ingest": cmd_ingest,
    "trainset": cmd_trainset,
    "train": cmd_train,
    "nearest": cmd_nearest,
    "rank": cmd_rank,
    "expand": cmd_expand,
    "recommend": cmd_recommend,
    "link": cmd_link,
    "tune-alpha": cmd_tune_alpha,
    "eval": cmd_eval,
}


def run(argv=None, out=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _validate(parser, args)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    out = out or sys.stdout
    try:
        COMMANDS[args.command](args, out)
    except (DataError, ValueError, LookupError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, LookupError) and exc.args else exc
        print(f"apiembed: error: {msg}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
