"""embedtool CLI: annotate, embed, llm-baseline, finetune-recipe.

    embedtool annotate     --articles corpus.csv --model lexicon --out sentiments.csv
    embedtool embed        --articles corpus.csv --encoder hashing64 --pooling mean \
                           --sentiment-model lexicon --out articles.emb
    embedtool llm-baseline --dataset dataset.json --articles corpus.csv \
                           --paradigm one --endpoint http://host/v1/chat/completions \
                           --model local-llm --out preds.csv
    embedtool finetune-recipe

Everything writes the fusion engine's documented file formats.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys

from .encoders import POOLINGS, embed_articles
from .llm import PARADIGMS, HTTPTransport, articles_by_date, load_dataset_rows, run_llm_baseline
from .records import load_articles
from .sentiment import annotate_sentiment

_FINETUNE_RECIPE = """\
Encoder fine-tuning recipe (not executed by this tool):

1. Corpus: a labeled financial-sentence dataset with columns
   (sentence, sentiment in {negative, neutral, positive}).
2. Head: sequence-classification head (3 classes) on top of the encoder.
3. Schedule: AdamW, lr 2e-5, batch 16-32, 2-4 epochs, weight decay 0.01,
   early stopping on validation F1.
4. Export: save the tuned checkpoint locally, then pass its path as the
   encoder name to `embedtool embed` (and as the model name to `annotate`
   if the tuned head should also score sentiment).
5. Verify: re-run the downstream evaluation with the new embedding file to
   compare against the frozen encoder's report.
"""


def cmd_annotate(args) -> int:
    records = load_articles(args.articles)
    scores = annotate_sentiment(records, args.model)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "article_id", "sentiment"])
        for rec, score in zip(records, scores):
            writer.writerow([rec.date.isoformat(), rec.article_id, repr(float(score))])
    print(f"annotated {len(records)} articles with {args.model!r} -> {args.out}")
    return 0


def cmd_embed(args) -> int:
    records = load_articles(args.articles)
    sentiments = annotate_sentiment(records, args.sentiment_model)
    dim = embed_articles(records, args.encoder, args.pooling, sentiments, args.out)
    print(f"embedded {len(records)} articles with {args.encoder!r} "
          f"(dim={dim}, pooling={args.pooling}) -> {args.out}")
    return 0


def cmd_llm_baseline(args) -> int:
    rows = load_dataset_rows(args.dataset)
    day_articles = articles_by_date(load_articles(args.articles))
    transport = HTTPTransport(args.endpoint, args.model, api_key=os.environ.get("LLM_API_KEY", ""))
    summary = run_llm_baseline(rows, day_articles, args.paradigm, transport, args.out)
    print(f"wrote {summary['written']} predictions ({args.paradigm}-shot) -> {args.out}")
    if summary["invalid"]:
        print(f"excluded {len(summary['invalid'])} invalid replies: {', '.join(summary['invalid'])}")
    return 0


def cmd_finetune_recipe(_args) -> int:
    print(_FINETUNE_RECIPE)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="embedtool",
                                     description="Data-prep companion for the fusion engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("annotate", help="score per-article sentiment")
    p.add_argument("--articles", required=True)
    p.add_argument("--model", default="lexicon", help="'lexicon' or a HF model name")
    p.add_argument("--out", required=True)

    p = sub.add_parser("embed", help="write an embedding file")
    p.add_argument("--articles", required=True)
    p.add_argument("--encoder", default="hashing64",
                   help="'hashing[<dim>]' or a HF encoder name")
    p.add_argument("--pooling", default="mean", choices=POOLINGS)
    p.add_argument("--sentiment-model", default="lexicon")
    p.add_argument("--out", required=True)

    p = sub.add_parser("llm-baseline", help="query an LLM endpoint for up/down calls")
    p.add_argument("--dataset", required=True, help="dataset.json from the fusion engine")
    p.add_argument("--articles", required=True)
    p.add_argument("--paradigm", default="zero", choices=PARADIGMS)
    p.add_argument("--endpoint", required=True, help="chat-completions URL")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)

    sub.add_parser("finetune-recipe", help="print the encoder fine-tuning recipe")
    return parser


_COMMANDS = {
    "annotate": cmd_annotate,
    "embed": cmd_embed,
    "llm-baseline": cmd_llm_baseline,
    "finetune-recipe": cmd_finetune_recipe,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, EnvironmentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
