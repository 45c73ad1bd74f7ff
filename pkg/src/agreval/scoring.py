"""Sentence scoring: whole-sentence cross-entropy and scorer backends.

A sentence score is the mean per-token negative log-likelihood in nats;
lower means more probable.  Cross-entropy over a logit matrix uses the
standard per-position partition over the vocabulary, computed with
overflow-safe log-sum-exp.

Built-in backends: an oracle over a known grammatical set (0 for members,
1 otherwise), a uniform scorer (constant log V), an add-k n-gram model,
a seeded pseudo-random scorer for calibration tests, and a client for
external scorers speaking the line-delimited JSON protocol over a child
process's standard streams or a TCP socket.
"""

from __future__ import annotations

import hashlib
import json
import math
import shlex
import socket
import subprocess
import threading
from collections import Counter
from dataclasses import dataclass

import numpy as np

SCORE_REL_TOL = 1e-9


class BackendError(RuntimeError):
    """A scorer backend failed (transport, handshake, or per-request error)."""


@dataclass(frozen=True)
class SentenceScore:
    num_tokens: int
    mean_nll: float
    sum_nll: float

    def __post_init__(self):
        if self.num_tokens < 1:
            raise ValueError("num_tokens must be >= 1")
        expected = self.mean_nll * self.num_tokens
        scale = max(abs(self.sum_nll), abs(expected), 1.0)
        if abs(self.sum_nll - expected) > SCORE_REL_TOL * scale:
            raise ValueError(
                f"inconsistent score: sum {self.sum_nll} != mean {self.mean_nll} * {self.num_tokens}"
            )

    @classmethod
    def from_sum(cls, num_tokens: int, sum_nll: float) -> "SentenceScore":
        return cls(num_tokens, sum_nll / num_tokens, sum_nll)


def cross_entropy(logits: np.ndarray, target_ids) -> SentenceScore:
    """Mean negative log-likelihood of target_ids under row-wise softmax."""
    logits = np.asarray(logits, dtype=np.float64)
    targets = np.asarray(target_ids, dtype=np.int64)
    if logits.ndim != 2:
        raise ValueError("logits must be a T x V matrix")
    if not np.all(np.isfinite(logits)):
        raise ValueError("logits must be finite")
    T, V = logits.shape
    if targets.shape != (T,):
        raise ValueError(f"{len(targets)} targets for {T} logit rows")
    if np.any(targets < 0) or np.any(targets >= V):
        raise ValueError("target id out of vocabulary range")
    row_max = logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(logits - row_max).sum(axis=1)) + row_max[:, 0]
    picked = logits[np.arange(T), targets]
    nll = log_z - picked
    return SentenceScore.from_sum(T, float(nll.sum()))


# --- native backends ---------------------------------------------------------


class OracleBackend:
    """Membership scorer over a known grammatical set: 0 if present, 1 otherwise."""

    name = "oracle"
    concurrency_limit = 1024
    supports_masked = False

    def __init__(self, grammatical_sentences):
        self._known = {" ".join(s.split()) for s in grammatical_sentences}
        self.vocab_size = len({t for s in self._known for t in s.split()})

    def score_sentence(self, text: str) -> SentenceScore:
        tokens = text.split()
        nll = 0.0 if " ".join(tokens) in self._known else 1.0
        return SentenceScore(len(tokens), nll, nll * len(tokens))

    def close(self):
        pass


class UniformBackend:
    """Assigns every token probability 1/V: mean_nll is the constant log V."""

    name = "uniform"
    concurrency_limit = 1024
    supports_masked = False

    def __init__(self, vocab_size: int):
        if vocab_size < 1:
            raise ValueError("vocab_size must be positive")
        self.vocab_size = vocab_size

    def score_sentence(self, text: str) -> SentenceScore:
        tokens = text.split()
        return SentenceScore.from_sum(len(tokens), len(tokens) * math.log(self.vocab_size))

    def close(self):
        pass


class RandomScoreBackend:
    """Seeded pseudo-random scorer; identical (seed, text) gives identical scores."""

    name = "random"
    concurrency_limit = 1024
    supports_masked = False
    vocab_size = 2

    def __init__(self, seed: int):
        self.seed = seed

    def score_sentence(self, text: str) -> SentenceScore:
        digest = hashlib.sha256(f"{self.seed}\x00{text}".encode()).digest()
        value = int.from_bytes(digest[:8], "big") / 2**64
        tokens = text.split()
        return SentenceScore.from_sum(len(tokens), value * len(tokens))

    def close(self):
        pass


BOS = "<s>"
EOS = "</s>"
OOV = "<unk>"


class NgramBackend:
    """Add-k smoothed n-gram scorer with sentence-boundary padding."""

    supports_masked = False
    concurrency_limit = 1024

    def __init__(self, order: int, k: float, counts, context_counts, vocab):
        self.name = f"{order}gram"
        self.order = order
        self.k = k
        self._counts = counts
        self._context = context_counts
        self._vocab = vocab
        self.vocab_size = len(vocab)

    def _prob(self, context: tuple[str, ...], token: str) -> float:
        num = self._counts.get(context + (token,), 0) + self.k
        den = self._context.get(context, 0) + self.k * self.vocab_size
        return num / den

    def score_sentence(self, text: str) -> SentenceScore:
        tokens = [t if t in self._vocab else OOV for t in text.split()]
        padded = [BOS] * (self.order - 1) + tokens + [EOS]
        nll = 0.0
        for i in range(self.order - 1, len(padded)):
            context = tuple(padded[i - self.order + 1 : i])
            nll -= math.log(self._prob(context, padded[i]))
        # one prediction per content token plus the end marker
        return SentenceScore.from_sum(len(tokens) + 1, nll)

    def close(self):
        pass


def train_ngram(corpus, order: int = 2, k: float = 0.1) -> NgramBackend:
    """Train an add-k n-gram backend on a corpus of token lists."""
    if order not in (2, 3):
        raise ValueError("order must be 2 or 3")
    if k <= 0:
        raise ValueError("smoothing constant k must be positive")
    corpus = list(corpus)
    if not corpus:
        raise ValueError("empty training corpus")
    vocab = {EOS, OOV}
    for tokens in corpus:
        vocab.update(tokens)
    counts: Counter = Counter()
    contexts: Counter = Counter()
    for tokens in corpus:
        padded = [BOS] * (order - 1) + list(tokens) + [EOS]
        for i in range(order - 1, len(padded)):
            gram = tuple(padded[i - order + 1 : i + 1])
            counts[gram] += 1
            contexts[gram[:-1]] += 1
    return NgramBackend(order, k, dict(counts), dict(contexts), frozenset(vocab))


# --- external protocol client -------------------------------------------------


class _LineTransport:
    """Line-delimited JSON over a child process or a stream socket."""

    def __init__(self, command: str | None = None, address: str | None = None):
        self._proc = None
        self._sock = None
        if command:
            self._proc = subprocess.Popen(
                shlex.split(command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                encoding="utf-8",
            )
            self._reader = self._proc.stdout
            self._writer = self._proc.stdin
        elif address:
            host, _, port = address.rpartition(":")
            self._sock = socket.create_connection((host or "127.0.0.1", int(port)))
            fh = self._sock.makefile("rw", encoding="utf-8", newline="\n")
            self._reader = fh
            self._writer = fh
        else:
            raise ValueError("external backend needs a launch command or an address")

    def send(self, obj: dict) -> None:
        try:
            self._writer.write(json.dumps(obj, ensure_ascii=False) + "\n")
            self._writer.flush()
        except (BrokenPipeError, OSError) as exc:
            raise BackendError(f"backend transport failure: {exc}") from exc

    def receive(self) -> dict | None:
        line = self._reader.readline()
        if not line:
            return None
        try:
            return json.loads(line)
        except json.JSONDecodeError as exc:
            raise BackendError(f"malformed backend response: {line!r}") from exc

    def close(self) -> None:
        try:
            if self._proc is not None:
                self._proc.stdin.close()
                self._proc.wait(timeout=10)
            if self._sock is not None:
                self._sock.close()
        except Exception:
            pass


class ExternBackend:
    """Client for external scorers speaking the line-delimited JSON protocol.

    Requests carry correlation ids; responses may arrive out of order.  A
    background reader resolves pending requests, and a semaphore enforces the
    backend's advertised concurrency limit.
    """

    def __init__(self, command: str | None = None, address: str | None = None):
        self._transport = _LineTransport(command, address)
        self._lock = threading.Lock()
        self._pending: dict[int, dict] = {}
        self._events: dict[int, threading.Event] = {}
        self._next_id = 0
        self._failed: str | None = None

        self._transport.send({"op": "hello"})
        hello = self._transport.receive()
        if not hello or hello.get("op") != "hello":
            self._transport.close()
            raise BackendError(f"handshake failed: {hello!r}")
        self.name = hello.get("name", "extern")
        self.vocab_size = int(hello.get("vocab_size", 0))
        self.max_len = int(hello.get("max_len", 0))
        self.capabilities = list(hello.get("capabilities", []))
        self.concurrency_limit = int(hello.get("concurrency_limit", 1))
        self.supports_masked = "masked" in self.capabilities
        self._slots = threading.Semaphore(max(1, self.concurrency_limit))

        self._reader_thread = threading.Thread(target=self._read_loop, daemon=True)
        self._reader_thread.start()

    def _read_loop(self) -> None:
        while True:
            try:
                response = self._transport.receive()
            except BackendError as exc:
                self._fail(str(exc))
                return
            if response is None:
                self._fail("backend closed the connection")
                return
            rid = response.get("id")
            with self._lock:
                event = self._events.get(rid)
                if event is not None:
                    self._pending[rid] = response
                    event.set()

    def _fail(self, message: str) -> None:
        with self._lock:
            self._failed = message
            for event in self._events.values():
                event.set()

    def _request(self, payload: dict, timeout: float = 300.0) -> dict:
        with self._slots:
            with self._lock:
                if self._failed:
                    raise BackendError(self._failed)
                rid = self._next_id
                self._next_id += 1
                event = threading.Event()
                self._events[rid] = event
            self._transport.send({"id": rid, **payload})
            if not event.wait(timeout):
                raise BackendError(f"backend timed out on request {rid}")
            with self._lock:
                response = self._pending.pop(rid, None)
                self._events.pop(rid, None)
                if response is None:
                    raise BackendError(self._failed or "backend returned no response")
        if "error" in response:
            raise BackendError(f"backend error: {response['error']}")
        return response

    def score_sentence(self, text: str) -> SentenceScore:
        response = self._request({"op": "score", "text": text})
        return SentenceScore(
            int(response["num_tokens"]),
            float(response["mean_nll"]),
            float(response["sum_nll"]),
        )

    def masked_candidates(self, text: str, char_span, candidates) -> list[dict]:
        """Log-probability per candidate at the masked span; null means skipped."""
        if not self.supports_masked:
            raise BackendError(f"backend {self.name} does not support masked scoring")
        response = self._request(
            {
                "op": "masked",
                "text": text,
                "char_span": [int(char_span[0]), int(char_span[1])],
                "candidates": list(candidates),
            }
        )
        logprobs = response["candidate_logprobs"]
        pieces = response.get("candidate_num_subwords", [None] * len(logprobs))
        return [
            {"candidate": c, "logprob": lp, "num_subwords": n, "skipped": lp is None}
            for c, lp, n in zip(candidates, logprobs, pieces)
        ]

    def close(self) -> None:
        try:
            self._transport.send({"op": "bye"})
        except BackendError:
            pass
        self._transport.close()
