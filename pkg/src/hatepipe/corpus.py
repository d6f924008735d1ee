"""Datasets of text-embedded-image instances.

Loading, validation, persistence, and split-wise label distribution
reporting for both sub-tasks (binary hate detection and ternary target
detection).
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional

from .errors import (
    DuplicateId,
    LabelError,
    MissingFile,
    SchemaError,
    SchemeMismatch,
    UnlabeledInstance,
)

SPLITS = ("train", "eval", "test")
ORIGINS = ("original", "augmented")

MANIFEST_COLUMNS = ["id", "image_path", "text", "label", "split"]
DATASET_COLUMNS = MANIFEST_COLUMNS + ["origin", "chain_tag"]


@dataclass(frozen=True)
class LabelScheme:
    """Task-specific label vocabulary with contiguous integer codes."""

    task_id: str
    labels: tuple[tuple[str, int], ...]

    def __post_init__(self):
        codes = [code for _, code in self.labels]
        if sorted(codes) != list(range(len(codes))):
            raise ValueError("label codes must be distinct and contiguous from 0")

    @property
    def names(self) -> list[str]:
        return [name for name, _ in sorted(self.labels, key=lambda x: x[1])]

    @property
    def codes(self) -> list[int]:
        return sorted(code for _, code in self.labels)

    def code_of(self, name: str) -> int:
        for label_name, code in self.labels:
            if label_name.lower() == name.lower():
                return code
        raise LabelError(f"label {name!r} not in scheme {self.task_id}")

    def name_of(self, code: int) -> str:
        for label_name, label_code in self.labels:
            if label_code == code:
                return label_name
        raise LabelError(f"code {code} not in scheme {self.task_id}")

    def parse(self, raw: str) -> int:
        """Accept either a label name or an integer code string."""
        raw = raw.strip()
        try:
            code = int(raw)
        except ValueError:
            return self.code_of(raw)
        if code not in self.codes:
            raise LabelError(f"code {code} not in scheme {self.task_id}")
        return code


SCHEME_A = LabelScheme("A", (("NO-HATE", 0), ("HATE", 1)))
SCHEME_B = LabelScheme("B", (("INDIVIDUAL", 0), ("COMMUNITY", 1), ("ORGANIZATION", 2)))


def scheme_for_task(task: str) -> LabelScheme:
    if task.upper() == "A":
        return SCHEME_A
    if task.upper() == "B":
        return SCHEME_B
    raise ValueError(f"unknown task {task!r}")


@dataclass(frozen=True)
class Instance:
    """One text-embedded image: id, image reference, extracted text, label, split."""

    id: str
    image_path: Optional[str] = None
    text: str = ""
    label: Optional[int] = None
    split: str = "train"
    origin: str = "original"
    chain_tag: Optional[str] = None

    def __post_init__(self):
        if self.split not in SPLITS:
            raise SchemaError(f"instance {self.id}: invalid split {self.split!r}")
        if self.origin not in ORIGINS:
            raise SchemaError(f"instance {self.id}: invalid origin {self.origin!r}")

    def with_text(self, text: str) -> "Instance":
        return replace(self, text=text)


@dataclass
class Dataset:
    scheme: LabelScheme
    instances: list[Instance] = field(default_factory=list)

    def __post_init__(self):
        self.validate()

    def validate(self):
        seen = set()
        for inst in self.instances:
            if inst.id in seen:
                raise DuplicateId(f"duplicate instance id {inst.id!r}")
            seen.add(inst.id)
            if inst.label is not None and inst.label not in self.scheme.codes:
                raise LabelError(
                    f"instance {inst.id}: label {inst.label} not in scheme "
                    f"{self.scheme.task_id}"
                )
            if inst.origin == "augmented" and inst.split != "train":
                raise SchemaError(
                    f"augmented instance {inst.id} must be in the train split"
                )

    def __len__(self):
        return len(self.instances)

    def split_instances(self, split: str) -> list[Instance]:
        return [i for i in self.instances if i.split == split]

    def by_id(self) -> dict[str, Instance]:
        return {i.id: i for i in self.instances}


def load_dataset(manifest_path, scheme: LabelScheme) -> Dataset:
    """Load and validate a dataset from a CSV manifest.

    Required columns: id, image_path, text, label, split (text and label
    may be empty per row; origin and chain_tag are read when present).
    The label column accepts either a name or an integer code.
    """
    path = Path(manifest_path)
    if not path.exists():
        raise MissingFile(f"manifest not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        fieldnames = reader.fieldnames or []
        missing = [c for c in MANIFEST_COLUMNS if c not in fieldnames]
        if missing:
            raise SchemaError(f"manifest {path} missing columns: {missing}")
        instances = []
        for row_num, row in enumerate(reader, start=2):
            inst_id = (row.get("id") or "").strip()
            if not inst_id:
                raise SchemaError(f"{path} row {row_num}: empty id")
            image_path = (row.get("image_path") or "").strip() or None
            if image_path and not Path(image_path).is_absolute():
                # resolve against the manifest's directory so manifests stay
                # portable; absolute so re-saved datasets load from anywhere
                image_path = str((path.parent / image_path).resolve())
            text = (row.get("text") or "").strip()
            if not text and image_path is None:
                raise SchemaError(
                    f"{path} row {row_num} (id {inst_id}): "
                    "needs text or image_path"
                )
            raw_label = (row.get("label") or "").strip()
            try:
                label = scheme.parse(raw_label) if raw_label else None
            except LabelError as exc:
                raise LabelError(f"{path} row {row_num}: {exc}") from exc
            split = (row.get("split") or "").strip()
            if split not in SPLITS:
                raise SchemaError(
                    f"{path} row {row_num}: invalid split {split!r}"
                )
            origin = (row.get("origin") or "").strip() or "original"
            chain_tag = (row.get("chain_tag") or "").strip() or None
            instances.append(
                Instance(
                    id=inst_id,
                    image_path=image_path,
                    text=text,
                    label=label,
                    split=split,
                    origin=origin,
                    chain_tag=chain_tag,
                )
            )
    return Dataset(scheme=scheme, instances=instances)


def save_dataset(dataset: Dataset, out_path) -> None:
    """Persist a dataset in the manifest format plus origin/chain_tag columns."""
    path = Path(out_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(DATASET_COLUMNS)
        for inst in dataset.instances:
            writer.writerow(
                [
                    inst.id,
                    inst.image_path or "",
                    inst.text,
                    "" if inst.label is None else inst.label,
                    inst.split,
                    inst.origin,
                    inst.chain_tag or "",
                ]
            )


def label_distribution(dataset: Dataset, require_labels: bool = True):
    """Per-(split, label) counts and two-decimal percentages.

    Returns a dict split -> {"counts": {name: n}, "percent": {name: pct},
    "total": n}. Unlabeled test splits are skipped (and listed under the
    "skipped_splits" key) when require_labels is False; any unlabeled
    instance otherwise raises UnlabeledInstance.
    """
    scheme = dataset.scheme
    result: dict = {"splits": {}, "skipped_splits": []}
    for split in SPLITS:
        members = dataset.split_instances(split)
        if not members:
            continue
        unlabeled = [i for i in members if i.label is None]
        if unlabeled:
            if require_labels:
                raise UnlabeledInstance(
                    f"{len(unlabeled)} unlabeled instance(s) in split {split!r} "
                    f"(first: {unlabeled[0].id})"
                )
            result["skipped_splits"].append(split)
            continue
        counts = Counter(i.label for i in members)
        total = len(members)
        result["splits"][split] = {
            "total": total,
            "counts": {scheme.name_of(c): counts.get(c, 0) for c in scheme.codes},
            "percent": {
                scheme.name_of(c): round(counts.get(c, 0) / total * 100, 2)
                for c in scheme.codes
            },
        }
    return result


def format_distribution(dist: dict) -> str:
    """Render a label_distribution result as an aligned text table."""
    lines = []
    for split, info in dist["splits"].items():
        lines.append(f"{split} (n={info['total']})")
        for name, pct in info["percent"].items():
            lines.append(f"  {name:<14} {info['counts'][name]:>6}  {pct:6.2f}%")
    for split in dist["skipped_splits"]:
        lines.append(f"{split}: unlabeled, distribution omitted")
    return "\n".join(lines)


def merge(original: Dataset, augmented: Dataset) -> Dataset:
    """Union of an original dataset with an augmented-only dataset."""
    if original.scheme != augmented.scheme:
        raise SchemeMismatch(
            f"schemes differ: {original.scheme.task_id} vs {augmented.scheme.task_id}"
        )
    for inst in augmented.instances:
        if inst.origin != "augmented":
            raise SchemaError(f"instance {inst.id} in augmented set is not augmented")
        if inst.split != "train":
            raise SchemaError(f"augmented instance {inst.id} is not in train split")
    return Dataset(
        scheme=original.scheme,
        instances=list(original.instances) + list(augmented.instances),
    )
