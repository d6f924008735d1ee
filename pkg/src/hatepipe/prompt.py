"""Prompt construction, LLM invocation, and tagged-label parsing.

Prompts follow a fixed three-block shape (Role / Definition / Task) and
instruct the model to answer inside <label> ... <\\label> tags; the
parser tolerates both backslash and forward-slash closers. Provider-side
fine-tuning is modeled as an opaque job that returns a model id.
"""

from __future__ import annotations

import json
import re
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .classify import Prediction
from .corpus import Dataset, LabelScheme
from .errors import (
    EmptyText,
    ParseError,
    ProviderError,
    UnknownLabel,
    UnlabeledInstance,
)

TASK_DEFINITIONS = {
    "A": "Decide whether the given text from a text-embedded image contains hate speech.",
    "B": "Identify the target of the hate speech in the given text: an individual, a community, or an organization.",
}

_LABEL_TAG = re.compile(r"<label>(.*?)<[\\/]label>", re.DOTALL | re.IGNORECASE)


@dataclass(frozen=True)
class PromptSpec:
    task_name: str
    task_definition: str
    labels: tuple[str, ...]
    mode: str = "zero_shot"
    exemplars: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if self.mode not in ("zero_shot", "few_shot", "finetuned"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "few_shot" and not self.exemplars:
            raise ValueError("few_shot mode requires exemplars")
        if self.mode != "few_shot" and self.exemplars:
            raise ValueError("exemplars only allowed in few_shot mode")


def spec_for_scheme(
    scheme: LabelScheme,
    mode: str = "zero_shot",
    exemplars=(),
    task_definition: Optional[str] = None,
) -> PromptSpec:
    task_name = (
        "hate speech detection" if scheme.task_id == "A" else "hate speech target detection"
    )
    return PromptSpec(
        task_name=task_name,
        task_definition=task_definition or TASK_DEFINITIONS[scheme.task_id],
        labels=tuple(scheme.names),
        mode=mode,
        exemplars=tuple(exemplars),
    )


def build_prompt(spec: PromptSpec, text: str) -> str:
    """Three blocks in order: Role, Definition (with labels), Task."""
    if not text:
        raise EmptyText("cannot build a prompt for empty text")
    label_list = " or ".join(spec.labels)
    blocks = [
        f"Role: You are a helpful AI assistant. "
        f"You are given the task of {spec.task_name}.",
        f"Definition: {spec.task_definition} "
        f"You will be given a text to label either {label_list}.",
    ]
    if spec.mode == "few_shot":
        lines = [f"{ex_text} -> {ex_label}" for ex_text, ex_label in spec.exemplars]
        blocks.append("Examples:\n" + "\n".join(lines))
    blocks.append(
        f"Task: Generate the label for this text: {text}\n"
        "Answer in the following format: <label> Your_Predicted_Label <\\label>. Thanks."
    )
    return "\n\n".join(blocks)


def wrap_label(name: str, closer: str = "\\") -> str:
    """Tagged answer format the prompt requests."""
    return f"<label> {name} <{closer}label>"


def parse_label(response: str, scheme: LabelScheme) -> int:
    """Extract the first tagged label and match it case-insensitively."""
    match = _LABEL_TAG.search(response)
    if not match:
        raise ParseError(f"no <label> tag pair in response: {response[:80]!r}")
    content = match.group(1).strip()
    names = {name.lower(): code for name, code in scheme.labels}
    if content.lower() not in names:
        raise UnknownLabel(f"label {content!r} not in scheme {scheme.task_id}")
    return names[content.lower()]


class LlmProvider:
    """Interface: complete, finetune, complete_with."""

    def complete(self, prompt: str) -> str:
        raise NotImplementedError

    def finetune(self, records: list[dict], epochs: int) -> str:
        raise NotImplementedError

    def complete_with(self, model_id: str, prompt: str) -> str:
        raise NotImplementedError


class MockLlmProvider(LlmProvider):
    """Scripted provider for tests.

    responder maps input text (searched as a prompt substring) to a raw
    response; unmatched prompts get the default response. finetune
    records are retained for inspection.
    """

    def __init__(self, responder: Optional[dict] = None, default: str = ""):
        self.responder = responder or {}
        self.default = default
        self.finetune_jobs: list[dict] = []
        self.calls = 0

    def complete(self, prompt: str) -> str:
        self.calls += 1
        for key, response in self.responder.items():
            if key in prompt:
                return response
        return self.default

    def finetune(self, records, epochs):
        job_id = f"ft:mock-{len(self.finetune_jobs) + 1}"
        self.finetune_jobs.append(
            {"id": job_id, "records": records, "epochs": epochs}
        )
        return job_id

    def complete_with(self, model_id, prompt):
        if not any(j["id"] == model_id for j in self.finetune_jobs):
            raise ProviderError(f"unknown model id {model_id!r}")
        return self.complete(prompt)


def majority_label(dataset: Dataset) -> int:
    """Most frequent train label; fallback for unparseable responses."""
    labels = [
        i.label for i in dataset.split_instances("train") if i.label is not None
    ]
    if not labels:
        return 0
    counts = Counter(labels)
    best = max(counts.values())
    return min(code for code, c in counts.items() if c == best)


@dataclass
class LlmRunLog:
    responses: list[dict] = field(default_factory=list)
    parse_failures: int = 0

    def write(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as fh:
            for entry in self.responses:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")


def run_llm(
    dataset: Dataset,
    split: str,
    spec: PromptSpec,
    provider: LlmProvider,
    model_id: Optional[str] = None,
    fallback_label: Optional[int] = None,
    retries: int = 3,
    backoff: float = 0.1,
    log: Optional[LlmRunLog] = None,
) -> list[Prediction]:
    """One prediction per instance; parse failures take the fallback label."""
    scheme = dataset.scheme
    if spec.mode == "finetuned" and not model_id:
        raise ValueError("finetuned mode requires a model_id")
    if fallback_label is None:
        fallback_label = majority_label(dataset)
    model_name = f"llm-{spec.mode}" + (f":{model_id}" if model_id else "")
    predictions = []
    for inst in dataset.split_instances(split):
        prompt = build_prompt(spec, inst.text)
        response = None
        last = None
        for attempt in range(retries):
            try:
                if model_id:
                    response = provider.complete_with(model_id, prompt)
                else:
                    response = provider.complete(prompt)
                break
            except ProviderError as exc:
                last = exc
                if attempt + 1 < retries:
                    time.sleep(backoff * (2**attempt))
        if response is None:
            raise ProviderError(
                f"LLM call failed after {retries} attempts: {last}"
            )
        try:
            label = parse_label(response, scheme)
            failed = False
        except (ParseError, UnknownLabel):
            label = fallback_label
            failed = True
        if log is not None:
            log.responses.append(
                {
                    "instance_id": inst.id,
                    "response": response,
                    "label": label,
                    "parse_failed": failed,
                }
            )
            if failed:
                log.parse_failures += 1
        predictions.append(
            Prediction(instance_id=inst.id, label=label, model_name=model_name)
        )
    return predictions


def finetune_records(
    dataset: Dataset, split: str, spec: PromptSpec
) -> list[dict]:
    """Provider records: prompt plus the tagged gold label as completion."""
    records = []
    for inst in dataset.split_instances(split):
        if inst.label is None:
            raise UnlabeledInstance(
                f"instance {inst.id} is unlabeled; cannot build a fine-tune record"
            )
        records.append(
            {
                "prompt": build_prompt(spec, inst.text),
                "completion": wrap_label(dataset.scheme.name_of(inst.label)),
            }
        )
    return records


def submit_finetune(
    train_set: Dataset,
    eval_set: Dataset,
    provider: LlmProvider,
    spec: Optional[PromptSpec] = None,
    epochs: int = 4,
) -> str:
    """Serialize train+eval records and start a provider fine-tune job."""
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    if spec is None:
        spec = spec_for_scheme(train_set.scheme)
    records = finetune_records(train_set, "train", spec) + finetune_records(
        eval_set, "eval", spec
    )
    return provider.finetune(records, epochs)


def sample_exemplars(
    dataset: Dataset, per_class: int = 3, seed: int = 42
) -> tuple[tuple[str, str], ...]:
    """Fixed-seed few-shot exemplars: per_class train instances per label."""
    import random

    rng = random.Random(seed)
    scheme = dataset.scheme
    exemplars = []
    for code in scheme.codes:
        pool = [
            i
            for i in dataset.split_instances("train")
            if i.label == code and i.text
        ]
        for inst in rng.sample(pool, min(per_class, len(pool))):
            exemplars.append((inst.text, scheme.name_of(code)))
    return tuple(exemplars)
