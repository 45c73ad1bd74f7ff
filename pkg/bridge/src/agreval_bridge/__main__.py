"""Entry point: load a model (or the stub) and serve the protocol on stdio."""

import argparse
import sys

from .server import serve


def main() -> None:
    parser = argparse.ArgumentParser(
        prog="agreval-bridge",
        description="Serve masked-LM sentence scores over a line-delimited JSON protocol.",
    )
    parser.add_argument(
        "--model",
        default=None,
        help="Hugging Face model id or local path (default: the pinned German model).",
    )
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--max-len", type=int, default=512)
    parser.add_argument(
        "--no-deterministic",
        action="store_true",
        help="Skip seeding / deterministic-algorithm setup.",
    )
    parser.add_argument(
        "--stub",
        action="store_true",
        help="Serve the deterministic hash-based stub instead of a real model.",
    )
    args = parser.parse_args()

    if args.stub:
        from .models import StubModel

        model = StubModel()
    else:
        from .models import DEFAULT_MODEL, MaskedLanguageModel

        try:
            model = MaskedLanguageModel(
                model_id=args.model or DEFAULT_MODEL,
                device=args.device,
                max_len=args.max_len,
                deterministic=not args.no_deterministic,
            )
        except Exception as exc:
            print(f"agreval-bridge: fatal: could not load model: {exc}", file=sys.stderr)
            sys.exit(1)
    serve(model)


if __name__ == "__main__":
    main()
