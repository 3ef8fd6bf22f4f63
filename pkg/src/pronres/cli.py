"""Command-line front end.

Every subcommand reads a ``key = value`` config (``--config``), applies flag
overrides, and writes the fully resolved config next to its outputs as
``<output>/<command>.config``.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import checkpoint
from .config import RunConfig, TrainConfig, format_config, load_config, train_dict
from .corpus_io import (
    CorpusFormatError,
    corpus_stats,
    format_stats_table,
    generate_synthetic_corpus,
    read_conll,
    serialize_conll,
    split_train_dev,
    synthetic_vocabulary,
    write_conll,
)
from .encoder import (
    load_precomputed,
    load_text_table,
    random_table,
    static_lookup_encoder,
    write_precomputed,
)
from .errors import ConfigError, PronresError
from .evaluator import report_table, report_tsv, score_links
from .learner import pretrain_detector, train
from .resolver import predict_corpus, predicted_document, resolve_pronouns

log = logging.getLogger("pronres")

EPS = "EPS"


class CommandError(Exception):
    """Input problem that should end the command with exit status 1."""


def _configure_logging():
    level = os.environ.get("PRN_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def _require(path: str, what: str) -> Path:
    if not path:
        raise CommandError(f"no {what} configured")
    p = Path(path)
    if not p.exists():
        raise CommandError(f"{what} not found: {path}")
    return p


def _output_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _echo(cfg: RunConfig, command: str, train_cfg: TrainConfig | None = None) -> None:
    values = cfg.to_dict()
    if train_cfg is not None:
        values.update(train_dict(train_cfg))
    (_output_dir(cfg) / f"{command}.config").write_text(format_config(values), encoding="utf-8")


def _load_pairs(cfg: RunConfig, docs):
    if cfg.static_embeddings:
        table, dim = load_text_table(_require(cfg.static_embeddings, "static embedding table"))
        encode = static_lookup_encoder(table, dim)
        return [(d, encode(d)) for d in docs]
    mats = load_precomputed(_require(cfg.embeddings, "embedding file"), docs)
    return [(d, mats[d.doc_id]) for d in docs]


# -- subcommands -----------------------------------------------------------------


def cmd_validate(cfg: RunConfig, paths: list[str]) -> int:
    paths = paths or [cfg.corpus]
    problems: list[CorpusFormatError] = []
    rows = []
    for path in paths:
        docs = read_conll(_require(path, "corpus"), on_error=problems.append)
        rows.append((path, corpus_stats(docs)))
    for exc in problems:
        print(f"error: {exc}", file=sys.stderr)
    if problems:
        return 2
    print(format_stats_table(rows), end="")
    return 0


def cmd_stats(cfg: RunConfig, paths: list[str]) -> int:
    paths = paths or [cfg.corpus]
    rows = [(path, corpus_stats(read_conll(_require(path, "corpus")))) for path in paths]
    if len(rows) > 1:
        total = rows[0][1]
        for _, s in rows[1:]:
            total = total + s
        rows.append(("Total", total))
    print(format_stats_table(rows), end="")
    return 0


def cmd_synth(cfg: RunConfig, paths: list[str]) -> int:
    if not cfg.corpus or not cfg.embeddings:
        raise CommandError("synth needs both 'corpus' and 'embeddings' output paths")
    seed = cfg.train.seed
    docs = generate_synthetic_corpus(seed, cfg.synth_docs, cfg.vocab_size)
    write_conll(cfg.corpus, docs)
    encode = static_lookup_encoder(random_table(synthetic_vocabulary(cfg.vocab_size), cfg.embedding_dim, seed),
                                   cfg.embedding_dim)
    write_precomputed(cfg.embeddings, [encode(d) for d in docs])
    _echo(cfg, "synth")
    print(format_stats_table([(cfg.corpus, corpus_stats(docs))]), end="")
    return 0


def _train_dev(cfg: RunConfig):
    docs = read_conll(_require(cfg.corpus, "corpus"))
    if cfg.dev_corpus:
        train_docs, dev_docs = docs, read_conll(_require(cfg.dev_corpus, "dev corpus"))
    else:
        train_docs, dev_docs = split_train_dev(docs, cfg.train.seed)
    return _load_pairs(cfg, train_docs), _load_pairs(cfg, dev_docs)


def cmd_pretrain(cfg: RunConfig, paths: list[str]) -> int:
    if not cfg.pretrain_checkpoint:
        raise CommandError("no 'pretrain_checkpoint' path configured")
    train_set, _ = _train_dev(cfg)
    params = pretrain_detector(train_set, cfg.train)
    checkpoint.save_checkpoint(cfg.pretrain_checkpoint, params, cfg.train)
    _echo(cfg, "pretrain")
    return 0


def cmd_train(cfg: RunConfig, paths: list[str]) -> int:
    train_set, dev_set = _train_dev(cfg)
    if cfg.pretrain_checkpoint:
        params, _ = checkpoint.load_checkpoint(_require(cfg.pretrain_checkpoint, "pretrain checkpoint"))
    else:
        params = pretrain_detector(train_set, cfg.train)
    params, history = train(train_set, dev_set, cfg.train, params)
    Path(cfg.checkpoint).parent.mkdir(parents=True, exist_ok=True)
    checkpoint.save_checkpoint(cfg.checkpoint, params, cfg.train)
    out = _output_dir(cfg)
    (out / "train.log").write_text(history.to_tsv(), encoding="utf-8")
    if cfg.figures and history.records:
        from .plotting import plot_training_curve

        plot_training_curve(history.records, out / "train_curve.png")
    _echo(cfg, "train")
    best = history.records[history.best_epoch - 1].dev if history.best_epoch else None
    if best is not None:
        print(f"best epoch {history.best_epoch}: dev F1 {best.f1:.2f}")
    return 0


def _inference_config(cfg: RunConfig, stored: TrainConfig) -> TrainConfig:
    """Scoring settings from the checkpoint, except keys set explicitly for this run."""
    overrides = {k: getattr(cfg.train, k) for k in ("max_span_width", "top_span_ratio", "max_antecedents",
                                                    "refine_rounds") if k in cfg.explicit}
    return stored.replace(**overrides)


def _format_span(span) -> str:
    return f"{EPS}\t{EPS}" if span is None else f"{span.start}\t{span.end}"


def cmd_predict(cfg: RunConfig, paths: list[str]) -> int:
    params, stored = checkpoint.load_checkpoint(_require(cfg.checkpoint, "checkpoint"))
    run_cfg = _inference_config(cfg, stored)
    docs = read_conll(_require(cfg.predict_corpus or cfg.corpus, "corpus"))
    outputs = predict_corpus(_load_pairs(cfg, docs), params, run_cfg.scoring, threads=cfg.threads)
    out = _output_dir(cfg)
    predicted, link_lines, score_lines, attn_lines = [], [], [], []
    for doc, scores, result in outputs:
        predicted.append(predicted_document(doc, result))
        for pronoun, ante in resolve_pronouns(doc, result).items():
            link_lines.append(f"{doc.doc_id}\t{pronoun.start}\t{pronoun.end}\t{_format_span(ante)}\n")
        if cfg.dump_scores:
            table = scores.table
            for i, span in enumerate(table.spans):
                for ante, score, prob in table.row(i):
                    score_lines.append(f"{doc.doc_id}\t{span.start}\t{span.end}\t{_format_span(ante)}\t{score:.6f}\t{prob:.6f}\n")
        if cfg.dump_attention:
            for k in scores.pruned.indices:
                span = scores.spans[k]
                weights = scores.attention[k, : span.width]
                top = np.argsort(-weights, kind="stable")[:3]
                parts = " ".join(f"{span.start + t}:{weights[t]:.4f}" for t in top)
                attn_lines.append(f"{doc.doc_id}\t{span.start}\t{span.end}\t{parts}\n")
    (out / "predictions.conll").write_text(serialize_conll(predicted), encoding="utf-8")
    (out / "links.tsv").write_text("".join(link_lines), encoding="utf-8")
    if cfg.dump_scores:
        (out / "scores.txt").write_text("".join(score_lines), encoding="utf-8")
    if cfg.dump_attention:
        (out / "attention.txt").write_text("".join(attn_lines), encoding="utf-8")
    _echo(cfg, "predict", run_cfg)
    return 0


def read_links(path) -> dict:
    from .corpus_io import Span

    links: dict[str, dict] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            cols = line.rstrip("\n").split("\t")
            if len(cols) != 5:
                raise CommandError(f"{path}:{line_no}: expected 5 tab-separated columns")
            doc_id, ps, pe, a_s, a_e = cols
            try:
                pronoun = Span(int(ps), int(pe))
                ante = None if a_s == EPS else Span(int(a_s), int(a_e))
            except ValueError:
                raise CommandError(f"{path}:{line_no}: bad span") from None
            links.setdefault(doc_id, {})[pronoun] = ante
    return links


def cmd_eval(cfg: RunConfig, paths: list[str]) -> int:
    gold = read_conll(_require(cfg.predict_corpus or cfg.corpus, "gold corpus"))
    links = read_links(_require(cfg.links or str(Path(cfg.output) / "links.tsv"), "links file"))
    report = score_links(links, gold, strict_nearest=cfg.strict_nearest)
    name = "strict-nearest" if cfg.strict_nearest else "pronoun links"
    rows = [(name, report)]
    print(report_table(rows), end="")
    out = _output_dir(cfg)
    (out / "report.tsv").write_text(report_tsv(rows), encoding="utf-8")
    if cfg.figures:
        from .plotting import plot_report

        plot_report(rows, out / "report.png")
    _echo(cfg, "eval")
    return 0


COMMANDS = {
    "validate": cmd_validate,
    "synth": cmd_synth,
    "pretrain": cmd_pretrain,
    "train": cmd_train,
    "predict": cmd_predict,
    "eval": cmd_eval,
    "stats": cmd_stats,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int)
    common.add_argument("--dump-scores", action="store_true", default=None)
    common.add_argument("--dump-attention", action="store_true", default=None)
    common.add_argument("--strict-nearest", action="store_true", default=None)
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key (repeatable)")
    parser = argparse.ArgumentParser(prog="pronres", description="Span-based pronoun resolution.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name in ("validate", "stats"):
            p.add_argument("paths", nargs="*", help="CoNLL files (default: the configured corpus)")
    return parser


def _overrides(args) -> dict[str, str]:
    pairs = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        pairs[key.strip()] = value.strip()
    if args.seed is not None:
        pairs["seed"] = str(args.seed)
    if args.threads is not None:
        pairs["threads"] = str(args.threads)
    for flag in ("dump_scores", "dump_attention", "strict_nearest"):
        if getattr(args, flag):
            pairs[flag] = "true"
    return pairs


def main(argv=None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, _overrides(args))
        return COMMANDS[args.command](cfg, getattr(args, "paths", []))
    except CorpusFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2 if args.command == "validate" else 1
    except (CommandError, PronresError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
