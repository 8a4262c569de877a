"""CLI for the inference sidecar."""

from __future__ import annotations

import argparse
import sys

from .server import SidecarConfig, build_engine, serve_http, serve_stdio


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gardenlens-sidecar",
        description="Serve the inference wire protocol over stdio or HTTP.")
    parser.add_argument("--mode", choices=("stub", "model"), default="stub")
    parser.add_argument("--transport", choices=("stdio", "http"), default="stdio")
    parser.add_argument("--port", type=int, default=8900, help="HTTP port (0 picks one)")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--segmentation-model", default=None)
    parser.add_argument("--classification-model", default=None)
    parser.add_argument("--sentiment-model", default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    config = SidecarConfig(
        mode=args.mode, transport=args.transport, port=args.port,
        segmentation_model=args.segmentation_model,
        classification_model=args.classification_model,
        sentiment_model=args.sentiment_model)
    try:
        engine = build_engine(config)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.transport == "stdio":
        serve_stdio(engine)
    else:
        serve_http(engine, port=args.port, host=args.host)
    return 0


if __name__ == "__main__":
    sys.exit(main())
