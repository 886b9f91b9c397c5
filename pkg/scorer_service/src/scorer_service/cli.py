"""Command line: ``serve --config <json>`` and ``train --pairs <jsonl> --out <dir>``."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ScorerServiceConfig
from .training import DEFAULT_BATCH, DEFAULT_EPOCHS, DEFAULT_LR, TrainHyper, TrainingError, train


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="scorer-service", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="serve a trained checkpoint over HTTP")
    p.add_argument("--config", default=None, help="service config JSON")
    p.add_argument("--model", default=None, help="checkpoint directory (overrides config)")
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--device", default=None)

    p = sub.add_parser("train", help="fine-tune the pair classifier on sampled pairs")
    p.add_argument("--pairs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--model", default="mini", help="'mini' or a pretrained encoder id")
    p.add_argument("--lr", type=float, default=DEFAULT_LR)
    p.add_argument("--epochs", type=int, default=DEFAULT_EPOCHS)
    p.add_argument("--batch", type=int, default=DEFAULT_BATCH)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-seq-len", type=int, default=128)
    p.add_argument("--device", default="cpu")

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO)

    if args.command == "train":
        try:
            _, losses = train(
                args.pairs, args.out,
                TrainHyper(lr=args.lr, epochs=args.epochs, batch=args.batch,
                           seed=args.seed, max_seq_len=args.max_seq_len),
                model=args.model, device=args.device,
            )
        except TrainingError as exc:
            print(f"training error: {exc}", file=sys.stderr)
            return 2
        print(f"objective: {losses[0]:.4f} -> {losses[-1]:.4f} ({args.epochs} epochs)")
        print(f"checkpoint written to {args.out}")
        return 0

    config = ScorerServiceConfig.load(args.config) if args.config else ScorerServiceConfig()
    if args.model:
        config.model = args.model
    if args.port:
        config.port = args.port
    if args.device:
        config.device = args.device
    from .service import serve

    serve(config)
    return 0


if __name__ == "__main__":
    sys.exit(main())
