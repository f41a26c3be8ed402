"""Serve a pretrained model behind the provider protocol."""

from __future__ import annotations

import argparse
import logging

import uvicorn

from .engine import EngineConfig, InferenceEngine
from .service import create_app


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="pecan-sidecar", description=__doc__)
    parser.add_argument("--model", required=True, help="model id or local path")
    parser.add_argument("--device", default="cpu", help="torch device (default: cpu)")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8191)
    parser.add_argument("--window", type=int, default=4096, help="context window in tokens")
    parser.add_argument("--max-sessions", type=int, default=64, help="LRU session capacity")
    parser.add_argument("--summary-max-tokens", type=int, default=256)
    parser.add_argument("--answer-max-tokens", type=int, default=128)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--log-level", default="info")
    args = parser.parse_args(argv)

    logging.basicConfig(level=args.log_level.upper())
    engine = InferenceEngine.from_pretrained(
        EngineConfig(
            model_id=args.model,
            device=args.device,
            window=args.window,
            max_sessions=args.max_sessions,
            summary_max_new=args.summary_max_tokens,
            answer_max_new=args.answer_max_tokens,
            seed=args.seed,
        )
    )
    uvicorn.run(create_app(engine), host=args.host, port=args.port, log_level=args.log_level)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
