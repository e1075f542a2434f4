"""Sidecar command line: pretrain the base, train soft prompts, serve."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .model import ModelBundle, ModelConfig, state_digest


def _template_ids_arg(value: str) -> list[str] | None:
    if value == "all":
        return None
    return [v.strip() for v in value.split(",") if v.strip()]


def _cmd_pretrain(args) -> int:
    from .training import pretrain

    config = ModelConfig(
        d_model=args.d_model,
        prefix_length=args.prefix_length,
        dropout=args.dropout,
        seed=args.seed,
    )
    bundle, curve = pretrain(
        Path(args.data),
        config,
        template_ids=_template_ids_arg(args.templates),
        epochs=args.epochs,
        batch_size=args.batch_size,
        lr=args.lr,
    )
    bundle.save(Path(args.model_dir))
    print(f"pretrained base saved to {args.model_dir}")
    print(f"vocab={len(bundle.vocab)} final_loss={curve[-1]:.4f} digest={state_digest(bundle.model)[:12]}")
    return 0


def _cmd_train_prefixes(args) -> int:
    from .training import train_prefixes

    model_dir = Path(args.model_dir)
    bundle = ModelBundle.load(model_dir)
    store, curves = train_prefixes(
        bundle,
        Path(args.data),
        template_ids=_template_ids_arg(args.templates),
        epochs=args.epochs,
        batch_size=args.batch_size,
        lr=args.lr,
    )
    store.save(model_dir / "prefixes.pt")
    for template_id, curve in curves.items():
        print(f"{template_id}\tfirst={curve[0]:.4f}\tlast={curve[-1]:.4f}")
    print(f"{len(store)} prefixes saved to {model_dir / 'prefixes.pt'}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    app = create_app(model_dir=args.model_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bvsp-sidecar", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pretrain", help="train the base model on rendered targets, then freeze")
    p.add_argument("--data", required=True, help="quad-lines training file")
    p.add_argument("--model-dir", required=True, dest="model_dir")
    p.add_argument("--templates", default="all", help="'all' or comma-separated ids")
    p.add_argument("--epochs", type=int, default=None, help="default: config value (20)")
    p.add_argument("--batch-size", type=int, default=None, dest="batch_size")
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--d-model", type=int, default=64, dest="d_model")
    p.add_argument("--prefix-length", type=int, default=8, dest="prefix_length")
    p.add_argument("--dropout", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_pretrain)

    p = sub.add_parser("train-prefixes", help="fit per-template soft prompts, base frozen")
    p.add_argument("--data", required=True, help="quad-lines support/training file")
    p.add_argument("--model-dir", required=True, dest="model_dir")
    p.add_argument("--templates", default="all")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None, dest="batch_size")
    p.add_argument("--lr", type=float, default=None)
    p.set_defaults(func=_cmd_train_prefixes)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--model-dir", required=True, dest="model_dir")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8732)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (RuntimeError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
