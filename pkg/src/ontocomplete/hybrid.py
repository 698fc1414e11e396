"""Hybrid prediction: unary-template model, then binary-template model, then
a true/false language-model fallback for rules no template covers."""

from __future__ import annotations

import json
import logging
import os
import re
import threading
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Protocol, Sequence

from .dl import Rule
from .gnn import GnnModel, Prediction, predict_rules
from .graph import ConceptGraph
from .templates import TemplateIndex
from .verbalize import verbalize_rule

__all__ = ["PROMPTS", "build_prompt", "NliVerdict", "parse_verdict", "FallbackError",
           "MockClient", "HttpClient", "HybridPredictor"]

log = logging.getLogger(__name__)

_REPLY = "Reply with only one word: True or False."
PROMPTS = {
    1: f"Classify the text into True or False. {_REPLY} Determine if the following statement is valid:",
    2: f"Assess the validity of the following statement. {_REPLY} Determine if the following statement is valid:",
    3: f"Assess the validity of the following rule. {_REPLY} Determine if the following rule is valid:",
    4: f"Classify the text into True or False. {_REPLY} Determine if the following is a valid rule:",
    5: f"Classify the text into True or False. {_REPLY} Determine if the following is valid statement:",
}


def build_prompt(rule: Rule, variant: int = 1) -> str:
    if variant not in PROMPTS:
        raise ValueError(f"prompt variant must be 1..5, got {variant}")
    return f"{PROMPTS[variant]} {verbalize_rule(rule).statement}."


@dataclass(frozen=True)
class NliVerdict:
    label: str  # "true" | "false" | "unparseable"
    raw_text: str


_WORD = re.compile(r"[A-Za-z]+")


def parse_verdict(raw_text: str) -> NliVerdict:
    m = _WORD.search(raw_text or "")
    word = m.group(0).lower() if m else ""
    label = word if word in ("true", "false") else "unparseable"
    return NliVerdict(label, raw_text)


class FallbackError(RuntimeError):
    def __init__(self, rule_id: str, cause: Exception | str):
        super().__init__(f"fallback failed for {rule_id}: {cause}")
        self.rule_id = rule_id


class Client(Protocol):
    def complete(self, prompt: str) -> str: ...


class MockClient:
    """Answers from a statement -> reply table (default reply otherwise) and
    records every prompt it receives."""

    def __init__(self, answers: dict[str, str] | None = None, default: str = "False",
                 error: Exception | None = None):
        self.answers = dict(answers or {})
        self.default = default
        self.error = error
        self.calls: list[str] = []
        self._lock = threading.Lock()

    def complete(self, prompt: str) -> str:
        with self._lock:
            self.calls.append(prompt)
        if self.error is not None:
            raise self.error
        for statement, reply in self.answers.items():
            if prompt.endswith(f" {statement}."):
                return reply
        return self.default


class HttpClient:
    """JSON-over-HTTP completion: POST {prompt, max_tokens, temperature: 0}.

    Endpoint, bearer token and timeout default to ``NLI_ENDPOINT``,
    ``NLI_AUTH_TOKEN`` and ``NLI_TIMEOUT_MS``. ``text_path`` is the dotted
    path of the reply text in the response (list indices allowed).
    """

    def __init__(self, endpoint: str | None = None, token: str | None = None,
                 timeout_ms: int | None = None, text_path: str = "text", max_tokens: int = 5):
        self.endpoint = endpoint or os.environ.get("NLI_ENDPOINT")
        if not self.endpoint:
            raise ValueError("no endpoint: pass one or set NLI_ENDPOINT")
        self.token = token if token is not None else os.environ.get("NLI_AUTH_TOKEN")
        ms = timeout_ms if timeout_ms is not None else int(os.environ.get("NLI_TIMEOUT_MS", "30000"))
        self.timeout = ms / 1000.0
        self.text_path = text_path
        self.max_tokens = max_tokens

    def complete(self, prompt: str) -> str:
        if not prompt:
            raise ValueError("empty prompt")
        body = json.dumps({"prompt": prompt, "max_tokens": self.max_tokens,
                           "temperature": 0}).encode("utf-8")
        req = urllib.request.Request(self.endpoint, data=body, method="POST",
                                     headers={"Content-Type": "application/json"})
        if self.token:
            req.add_header("Authorization", f"Bearer {self.token}")
        with urllib.request.urlopen(req, timeout=self.timeout) as resp:
            data = json.loads(resp.read().decode("utf-8"))
        for key in self.text_path.split("."):
            data = data[int(key)] if isinstance(data, list) else data[key]
        if not isinstance(data, str):
            raise ValueError(f"response field {self.text_path!r} is not text")
        return data


class HybridPredictor:
    def __init__(self, index: TemplateIndex, graph: ConceptGraph,
                 ut_model: GnnModel | None = None, bt_model: GnnModel | None = None,
                 client: Client | None = None, prompt_variant: int = 1,
                 max_workers: int = 4, retries: int = 0):
        self.index, self.graph = index, graph
        self.ut_model, self.bt_model = ut_model, bt_model
        self.client = client
        self.prompt_variant = prompt_variant
        self.max_workers = max_workers
        self.retries = retries

    def _ask(self, rule: Rule) -> Prediction:
        prompt = build_prompt(rule, self.prompt_variant)
        verdict = None
        for _ in range(self.retries + 1):
            try:
                verdict = parse_verdict(self.client.complete(prompt))
            except (OSError, urllib.error.URLError, ValueError, KeyError, IndexError) as exc:
                raise FallbackError(rule.id, exc) from exc
            if verdict.label != "unparseable":
                break
        if verdict.label == "unparseable":
            log.warning("unparseable fallback reply for %s: %r", rule.id, verdict.raw_text)
        return Prediction(rule.id, 1.0 if verdict.label == "true" else 0.0, "fallback")

    def predict(self, rules: Sequence[Rule]) -> list[Prediction]:
        """One prediction per rule, in input order."""
        rules = list(rules)
        out: list[Prediction | None] = [None] * len(rules)
        pending = list(range(len(rules)))
        for model in (self.ut_model, self.bt_model):
            if model is None or not pending:
                continue
            preds = predict_rules(model, self.graph, self.index, [rules[i] for i in pending])
            left = []
            for i, p in zip(pending, preds):
                if p.provenance == "no-template":
                    left.append(i)
                else:
                    out[i] = p
            pending = left
        if pending and self.client is not None:
            with ThreadPoolExecutor(max_workers=self.max_workers) as pool:
                for i, p in zip(pending, pool.map(lambda i: self._ask(rules[i]), pending)):
                    out[i] = p
        else:
            for i in pending:
                out[i] = Prediction(rules[i].id, 0.0, "no-template")
        return out
