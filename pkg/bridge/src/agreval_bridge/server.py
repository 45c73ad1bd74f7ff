"""Line-delimited JSON request loop for the scoring protocol.

One request per line on stdin, one response per line on stdout; nothing
else is ever written to stdout.  Requests are served strictly in order
(the hello response advertises concurrency_limit 1).

  -> {"op": "hello"}
  <- {"op": "hello", "name": ..., "vocab_size": ..., "max_len": ...,
      "capabilities": ["score", "masked"], "concurrency_limit": 1}
  -> {"id": 7, "op": "score", "text": "Der Autor lacht ."}
  <- {"id": 7, "num_tokens": 4, "sum_nll": ..., "mean_nll": ...}
  -> {"id": 8, "op": "masked", "text": ..., "char_span": [s, e],
      "candidates": ["lacht", "lachen"]}
  <- {"id": 8, "candidate_logprobs": [...], "candidate_num_subwords": [...]}
  -> {"op": "bye"}

Failures produce {"id": <request id or -1>, "error": "..."}.
"""

from __future__ import annotations

import json
import sys

from .models import ModelError


def handle_request(request: dict, model) -> dict | None:
    """Response object for one parsed request; None means shut down."""
    op = request.get("op")
    rid = request.get("id", -1)
    if op == "hello":
        return {"op": "hello", **model.describe()}
    if op == "bye":
        return None
    try:
        if op == "score":
            num_tokens, nlls = model.score(request["text"])
            total = sum(nlls)
            return {
                "id": rid,
                "num_tokens": num_tokens,
                "sum_nll": total,
                "mean_nll": total / num_tokens,
            }
        if op == "masked":
            logprobs, pieces = model.masked(
                request["text"], tuple(request["char_span"]), request["candidates"]
            )
            return {
                "id": rid,
                "candidate_logprobs": logprobs,
                "candidate_num_subwords": pieces,
            }
    except ModelError as exc:
        return {"id": rid, "error": str(exc)}
    except KeyError as exc:
        return {"id": rid, "error": f"missing field {exc}"}
    return {"id": rid, "error": f"unsupported op {op!r}"}


def serve(model, reader=None, writer=None) -> None:
    reader = reader if reader is not None else sys.stdin
    writer = writer if writer is not None else sys.stdout

    def emit(obj: dict) -> None:
        writer.write(json.dumps(obj, ensure_ascii=False) + "\n")
        writer.flush()

    for line in reader:
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
        except json.JSONDecodeError:
            rid = -1
            # salvage an id if the line is close enough to JSON to carry one
            try:
                prefix = line.split('"id"', 1)
                if len(prefix) == 2:
                    rid = int(prefix[1].lstrip(" :").split(",")[0].split("}")[0])
            except (ValueError, IndexError):
                rid = -1
            emit({"id": rid, "error": "malformed request line"})
            continue
        if not isinstance(request, dict):
            emit({"id": -1, "error": "request must be a JSON object"})
            continue
        try:
            response = handle_request(request, model)
        except Exception as exc:  # keep the loop alive on unexpected bugs
            emit({"id": request.get("id", -1), "error": f"internal error: {exc}"})
            continue
        if response is None:
            break
        emit(response)
