"""Scoring models behind the bridge: a real masked LM and a test stub.

Both expose the same three calls:

  score(text)  -> (num_content_tokens, [per-token negative log-likelihood])
  masked(text, span, candidates) -> ([logprob or None], [piece count])
  describe()   -> dict for the hello response

Scores are natural-log.  Special tokens take part in the forward pass but
are excluded from the returned counts and sums.
"""

from __future__ import annotations

import hashlib
import math

DEFAULT_MODEL = "dbmdz/bert-base-german-cased"


class ModelError(RuntimeError):
    """Per-request failure (over-length input, bad span)."""


class StubModel:
    """Deterministic hash-based scorer; no ML dependencies.

    Words longer than eight characters count as two sub-word pieces, so a
    corpus tokenized by this stub exercises the unequal-length discard path.
    """

    PIECE_LIMIT = 8

    name = "stub"
    vocab_size = 30000
    max_len = 512

    def _pieces(self, word: str) -> int:
        return 2 if len(word) > self.PIECE_LIMIT else 1

    @staticmethod
    def _unit(key: str) -> float:
        digest = hashlib.sha256(key.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "big") / 2**64

    def score(self, text: str):
        words = text.split()
        if not words:
            raise ModelError("empty input")
        nlls = []
        for i, word in enumerate(words):
            for piece in range(self._pieces(word)):
                nlls.append(self._unit(f"{text}\x00{i}\x00{piece}") * 10.0)
        return len(nlls), nlls

    def masked(self, text: str, span, candidates):
        start, end = span
        if not (0 <= start < end <= len(text)):
            raise ModelError(f"span {span} outside text")
        logprobs, pieces = [], []
        for candidate in candidates:
            count = self._pieces(candidate)
            pieces.append(count)
            if count > 1:
                logprobs.append(None)
            else:
                logprobs.append(-self._unit(f"{text}\x00{start}:{end}\x00{candidate}") * 10.0)
        return logprobs, pieces

    def describe(self) -> dict:
        return {
            "name": self.name,
            "vocab_size": self.vocab_size,
            "max_len": self.max_len,
            "capabilities": ["score", "masked"],
            "concurrency_limit": 1,
        }


class MaskedLanguageModel:
    """A pretrained masked LM scored in a single unmasked forward pass."""

    def __init__(self, model_id: str = DEFAULT_MODEL, device: str = "cpu",
                 max_len: int = 512, deterministic: bool = True):
        import torch
        from transformers import AutoModelForMaskedLM, AutoTokenizer

        self._torch = torch
        if deterministic:
            torch.manual_seed(0)
            torch.use_deterministic_algorithms(True, warn_only=True)
        self.tokenizer = AutoTokenizer.from_pretrained(model_id)
        self.model = AutoModelForMaskedLM.from_pretrained(model_id).to(device).eval()
        self.device = device
        self.name = model_id
        self.vocab_size = len(self.tokenizer)
        self.max_len = min(max_len, getattr(self.model.config, "max_position_embeddings", max_len))

    def _encode(self, text: str):
        encoding = self.tokenizer(text, return_tensors="pt", return_special_tokens_mask=True)
        if encoding["input_ids"].shape[1] > self.max_len:
            raise ModelError(
                f"input of {encoding['input_ids'].shape[1]} tokens exceeds max_len {self.max_len}"
            )
        return encoding

    def score(self, text: str):
        torch = self._torch
        encoding = self._encode(text)
        special = encoding.pop("special_tokens_mask")[0].bool()
        inputs = {k: v.to(self.device) for k, v in encoding.items()}
        with torch.no_grad():
            logits = self.model(**inputs).logits[0]
        log_probs = torch.log_softmax(logits.double(), dim=-1)
        ids = inputs["input_ids"][0]
        token_nll = -log_probs[torch.arange(ids.shape[0]), ids]
        content = token_nll[~special]
        return int(content.shape[0]), [float(v) for v in content]

    def masked(self, text: str, span, candidates):
        torch = self._torch
        start, end = span
        if not (0 <= start < end <= len(text)):
            raise ModelError(f"span {span} outside text")
        if (start > 0 and not text[start - 1].isspace()) or (
            end < len(text) and not text[end].isspace()
        ):
            raise ModelError(f"span {span} does not cover a whole whitespace token")
        masked_text = text[:start] + self.tokenizer.mask_token + text[end:]
        encoding = self._encode(masked_text)
        encoding.pop("special_tokens_mask")
        inputs = {k: v.to(self.device) for k, v in encoding.items()}
        mask_positions = (
            (inputs["input_ids"][0] == self.tokenizer.mask_token_id).nonzero().flatten()
        )
        if mask_positions.shape[0] != 1:
            raise ModelError("expected exactly one mask position")
        with torch.no_grad():
            logits = self.model(**inputs).logits[0]
        log_probs = torch.log_softmax(logits[mask_positions[0]].double(), dim=-1)
        logprobs, pieces = [], []
        for candidate in candidates:
            token_ids = self.tokenizer(candidate, add_special_tokens=False)["input_ids"]
            pieces.append(len(token_ids))
            if len(token_ids) != 1:
                logprobs.append(None)
            else:
                logprobs.append(float(log_probs[token_ids[0]]))
        return logprobs, pieces

    def describe(self) -> dict:
        return {
            "name": self.name,
            "vocab_size": self.vocab_size,
            "max_len": self.max_len,
            "capabilities": ["score", "masked"],
            "concurrency_limit": 1,
        }
