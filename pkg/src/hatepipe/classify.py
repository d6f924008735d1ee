"""Text classifier training and inference behind a swappable backend.

All models share one fixed fine-tuning regime (lr 1e-5, batch size 8,
5 epochs). A deterministic stub backend ships in-tree so the whole
pipeline runs without GPUs or model downloads; a transformers-based
backend covers real fine-tuning when the environment supports it.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

from .corpus import Dataset, Instance
from .errors import (
    BackendError,
    EmptyText,
    EmptyTrainSet,
    SchemeMismatch,
)


@dataclass(frozen=True)
class ModelConfig:
    """Fine-tuning hyperparameters; defaults follow the shared regime."""

    name: str
    backbone: str = "stub"
    learning_rate: float = 1e-5
    train_batch_size: int = 8
    test_batch_size: int = 8
    epochs: int = 5
    seed: int = 42
    max_sequence_length: int = 128

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        for f in ("train_batch_size", "test_batch_size", "epochs", "max_sequence_length"):
            if getattr(self, f) < 1:
                raise ValueError(f"{f} must be a positive integer")


@dataclass(frozen=True)
class Prediction:
    instance_id: str
    label: int
    model_name: str
    scores: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        if self.scores is not None:
            if any(s < 0 for s in self.scores):
                raise ValueError("scores must be non-negative")
            if abs(sum(self.scores) - 1.0) > 1e-6:
                raise ValueError("scores must sum to 1")
            best = max(self.scores)
            argmax = min(i for i, s in enumerate(self.scores) if s == best)
            if self.label != argmax:
                raise ValueError(
                    f"label {self.label} is not the lowest-code argmax ({argmax})"
                )

    def to_dict(self) -> dict:
        d = {"instance_id": self.instance_id, "label": self.label,
             "model_name": self.model_name}
        if self.scores is not None:
            d["scores"] = list(self.scores)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Prediction":
        scores = d.get("scores")
        return cls(
            instance_id=d["instance_id"],
            label=d["label"],
            model_name=d["model_name"],
            scores=tuple(scores) if scores is not None else None,
        )


def save_predictions(predictions: list[Prediction], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for p in predictions:
            fh.write(json.dumps(p.to_dict(), sort_keys=True) + "\n")


def load_predictions(path) -> list[Prediction]:
    with Path(path).open(encoding="utf-8") as fh:
        return [Prediction.from_dict(json.loads(line)) for line in fh if line.strip()]


@dataclass
class TrainingSummary:
    model_name: str
    epochs: list[dict] = field(default_factory=list)
    best_epoch: Optional[int] = None

    def to_dict(self):
        return asdict(self)


class ClassifierBackend:
    """Interface: train(config, sets) -> handle; predict(handle, instances)."""

    def train(self, config: ModelConfig, train_set: Dataset, eval_set: Dataset):
        raise NotImplementedError

    def predict(self, handle, instances: list[Instance]) -> list[Prediction]:
        raise NotImplementedError

    def save(self, handle, out_dir) -> None:
        raise NotImplementedError

    def load(self, in_dir):
        raise NotImplementedError


def _one_hot(code: int, num_labels: int) -> tuple[float, ...]:
    return tuple(1.0 if i == code else 0.0 for i in range(num_labels))


class StubBackend(ClassifierBackend):
    """Deterministic offline backend.

    mode="memorize" learns an exact text -> label table from the train
    split (hash rule for unseen texts); mode="hash" labels purely by a
    seeded hash of the text. Either way predictions are reproducible
    from (handle, seed) alone.
    """

    def __init__(self, mode: str = "memorize"):
        if mode not in ("memorize", "hash"):
            raise BackendError(f"unknown stub mode {mode!r}")
        self.mode = mode

    @staticmethod
    def _hash_label(text: str, seed: int, num_labels: int) -> int:
        digest = hashlib.sha256(f"{seed}:{text}".encode("utf-8")).digest()
        return int.from_bytes(digest[:4], "big") % num_labels

    def train(self, config, train_set, eval_set):
        labeled = [
            i for i in train_set.split_instances("train") if i.label is not None
        ]
        num_labels = len(train_set.scheme.codes)
        memory = {}
        if self.mode == "memorize":
            memory = {i.text: i.label for i in labeled}
        handle = {
            "kind": "stub",
            "mode": self.mode,
            "model_name": config.name,
            "seed": config.seed,
            "num_labels": num_labels,
            "memory": memory,
        }
        summary = TrainingSummary(model_name=config.name)
        from .evaluate import score  # deferred: evaluate imports Prediction

        eval_labeled = [
            i for i in eval_set.split_instances("eval") if i.label is not None
        ]
        for epoch in range(1, config.epochs + 1):
            entry = {"epoch": epoch, "loss": None}
            if eval_labeled:
                preds = self.predict(handle, eval_labeled)
                gold = Dataset(scheme=eval_set.scheme, instances=eval_labeled)
                entry["eval_macro_f1"] = score(preds, gold, split="eval").macro_f1
            summary.epochs.append(entry)
        if summary.epochs and "eval_macro_f1" in summary.epochs[0]:
            summary.best_epoch = max(
                summary.epochs, key=lambda e: e["eval_macro_f1"]
            )["epoch"]
        return handle, summary

    def predict(self, handle, instances):
        preds = []
        for inst in instances:
            if not inst.text:
                raise EmptyText(f"instance {inst.id} has no text")
            label = handle["memory"].get(inst.text)
            if label is None:
                label = self._hash_label(
                    inst.text, handle["seed"], handle["num_labels"]
                )
            preds.append(
                Prediction(
                    instance_id=inst.id,
                    label=label,
                    model_name=handle["model_name"],
                    scores=_one_hot(label, handle["num_labels"]),
                )
            )
        return preds

    def save(self, handle, out_dir):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "handle.json").write_text(
            json.dumps(handle, sort_keys=True, indent=2), encoding="utf-8"
        )

    def load(self, in_dir):
        handle = json.loads(
            (Path(in_dir) / "handle.json").read_text(encoding="utf-8")
        )
        if handle.get("kind") != "stub":
            raise BackendError(f"{in_dir} does not hold a stub handle")
        return handle


class ConstantBackend(ClassifierBackend):
    """Always predicts one fixed label; a degenerate baseline for tests."""

    def __init__(self, label: int = 0, num_labels: int = 2):
        self.label = label
        self.num_labels = num_labels

    def train(self, config, train_set, eval_set):
        handle = {
            "kind": "constant",
            "model_name": config.name,
            "label": self.label,
            "num_labels": self.num_labels,
        }
        return handle, TrainingSummary(model_name=config.name)

    def predict(self, handle, instances):
        return [
            Prediction(
                instance_id=i.id,
                label=handle["label"],
                model_name=handle["model_name"],
                scores=_one_hot(handle["label"], handle["num_labels"]),
            )
            for i in instances
        ]

    def save(self, handle, out_dir):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "handle.json").write_text(json.dumps(handle, sort_keys=True))

    def load(self, in_dir):
        return json.loads((Path(in_dir) / "handle.json").read_text())


def make_backend(kind: str, **kwargs) -> ClassifierBackend:
    if kind in ("stub", "stub-memorize"):
        return StubBackend(mode="memorize")
    if kind == "stub-hash":
        return StubBackend(mode="hash")
    if kind == "transformers":
        from .hf_backend import TransformersBackend

        return TransformersBackend(**kwargs)
    raise BackendError(f"unknown backend {kind!r}")


def train(
    config: ModelConfig,
    train_set: Dataset,
    eval_set: Dataset,
    backend: ClassifierBackend,
):
    """Fine-tune one model; returns (handle, per-epoch TrainingSummary)."""
    if train_set.scheme != eval_set.scheme:
        raise SchemeMismatch("train and eval sets use different schemes")
    train_instances = [
        i for i in train_set.split_instances("train") if i.text
    ]
    if not train_instances:
        raise EmptyTrainSet("train split is empty")
    if any(i.label is None for i in train_instances):
        raise EmptyTrainSet("train split contains unlabeled instances")
    return backend.train(config, train_set, eval_set)


def predict(
    model_handle, instances: list[Instance], backend: ClassifierBackend
) -> list[Prediction]:
    """One Prediction per instance, input order preserved."""
    preds = backend.predict(model_handle, instances)
    if len(preds) != len(instances):
        raise BackendError(
            f"backend returned {len(preds)} predictions for {len(instances)} instances"
        )
    return preds
