"""Command-line entry points: corpus generation and the query service."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .data import write_catalog, write_interactions
from .synth import SyntheticSpec, generate_synthetic, write_planted_truth, write_thumbnails


def _cmd_gen(args) -> int:
    spec = SyntheticSpec(
        num_items=args.items,
        num_users=args.users,
        num_interactions=args.interactions,
        F=args.feature_dim,
        K_true=args.k_true,
        seed=args.seed,
        num_epochs=args.epochs,
    )
    catalog, interactions, truth = generate_synthetic(spec)
    os.makedirs(args.out, exist_ok=True)
    write_catalog(catalog, os.path.join(args.out, "catalog.tsv"))
    write_interactions(interactions, os.path.join(args.out, "interactions.tsv"))
    write_planted_truth(truth, os.path.join(args.out, "planted_truth.txt"))
    if not args.no_thumbnails:
        write_thumbnails(catalog, truth, os.path.join(args.out, "thumbs"))
    config = {
        "catalog_path": "catalog.tsv",
        "interactions_path": "interactions.tsv",
        "model_path": "model.bin",
        "port": args.port,
        "epoch_granularity": "calendar_year",
        "hyperparams": {"iterations": args.train_iterations, "seed": args.seed},
        "tsne": {"iterations": 500, "seed": args.seed},
        "map_sample_cap": min(2000, args.items),
        "static_dir": ".",
    }
    with open(os.path.join(args.out, "config.json"), "w", encoding="utf-8") as fh:
        json.dump(config, fh, indent=2)
        fh.write("\n")
    print(f"wrote {len(catalog)} items, {len(interactions)} interactions to {args.out}/")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app, load_config

    config_path = args.config or os.environ.get("FASHIONISTA_CONFIG")
    if not config_path:
        print("no config: pass --config or set FASHIONISTA_CONFIG", file=sys.stderr)
        return 2
    config = load_config(config_path)
    if args.port is not None:
        config.port = args.port
    if args.seed is not None:
        config.hyperparams.seed = args.seed
        config.tsne.seed = args.seed
    app = create_app(config, force_train=args.train)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = argparse.ArgumentParser(prog="fashionista")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic corpus with planted structure")
    gen.add_argument("--out", required=True)
    gen.add_argument("--items", type=int, default=1000)
    gen.add_argument("--users", type=int, default=200)
    gen.add_argument("--interactions", type=int, default=20000)
    gen.add_argument("--epochs", type=int, default=4)
    gen.add_argument("--feature-dim", type=int, default=64)
    gen.add_argument("--k-true", type=int, default=10)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--port", type=int, default=8080)
    gen.add_argument("--train-iterations", type=int, default=300_000)
    gen.add_argument("--no-thumbnails", action="store_true")
    gen.set_defaults(func=_cmd_gen)

    serve = sub.add_parser("serve", help="start the query service")
    serve.add_argument("--config", help="config path (or FASHIONISTA_CONFIG)")
    serve.add_argument("--train", action="store_true", help="retrain even if a model file exists")
    serve.add_argument("--port", type=int)
    serve.add_argument("--seed", type=int)
    serve.set_defaults(func=_cmd_serve)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
