"""Pipeline configuration loaded from a single TOML file.

One config drives both sub-tasks; task B enables the augmentation stage
by default. Relative paths are resolved against the config file's
directory so fixture configs stay portable.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .augment import ChainSpec, DEFAULT_CHAINS
from .classify import ModelConfig
from .corpus import LabelScheme, scheme_for_task
from .ensemble import EnsembleSpec
from .errors import SchemaError


@dataclass
class PipelineConfig:
    task: str
    seed: int
    manifest: Path
    work_dir: Path
    cache_dir: Path
    models_dir: Path
    reports_dir: Path
    ocr_provider: str = "mock"
    ocr_table_path: Optional[Path] = None
    ocr_enabled: bool = True
    translation_provider: str = "identity"
    augment_enabled: bool = False
    augment_target_labels: Optional[list[int]] = None
    chains: tuple[ChainSpec, ...] = DEFAULT_CHAINS
    models: list[ModelConfig] = field(default_factory=list)
    model_backends: dict[str, str] = field(default_factory=dict)
    ensemble_rule: str = "majority"
    ensemble_tie_break: str = "member_priority"
    ensemble_members: Optional[list[str]] = None
    llm_enabled: bool = False
    llm_mode: str = "zero_shot"
    llm_provider: str = "mock"
    llm_default_response: str = ""

    @property
    def scheme(self) -> LabelScheme:
        return scheme_for_task(self.task)

    def ensemble_spec(self, weights: Optional[dict[str, float]] = None) -> EnsembleSpec:
        names = self.ensemble_members or [m.name for m in self.models]
        members = tuple((n, (weights or {}).get(n, 1.0)) for n in names)
        return EnsembleSpec(
            members=members,
            rule=self.ensemble_rule,
            tie_break=self.ensemble_tie_break,
        )

    def config_hash(self) -> str:
        """Stable digest of everything that affects stage outputs."""
        payload = {
            "task": self.task,
            "seed": self.seed,
            "manifest": str(self.manifest),
            "ocr": [self.ocr_provider, str(self.ocr_table_path), self.ocr_enabled],
            "translation": self.translation_provider,
            "augment": [
                self.augment_enabled,
                self.augment_target_labels,
                [[c.tag, list(c.pivots)] for c in self.chains],
            ],
            "models": [
                [m.name, m.backbone, m.learning_rate, m.train_batch_size,
                 m.test_batch_size, m.epochs, m.seed, m.max_sequence_length]
                for m in self.models
            ],
            "backends": self.model_backends,
            "ensemble": [
                self.ensemble_rule,
                self.ensemble_tie_break,
                self.ensemble_members,
            ],
            "llm": [self.llm_enabled, self.llm_mode, self.llm_provider,
                    self.llm_default_response],
        }
        blob = json.dumps(payload, sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()


def load_config(
    config_path,
    work_dir_override=None,
    seed_override: Optional[int] = None,
) -> PipelineConfig:
    path = Path(config_path)
    if not path.exists():
        raise SchemaError(f"config file not found: {path}")
    with path.open("rb") as fh:
        raw = tomllib.load(fh)
    base = path.parent

    def resolve(p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else (base / p)

    task = str(raw.get("task", "A")).upper()
    if task not in ("A", "B"):
        raise SchemaError(f"task must be A or B, got {task!r}")
    seed = seed_override if seed_override is not None else int(raw.get("seed", 42))

    paths = raw.get("paths", {})
    if "manifest" not in paths:
        raise SchemaError("config needs paths.manifest")
    work_dir = (
        Path(work_dir_override)
        if work_dir_override
        else resolve(paths.get("work_dir", "work"))
    )

    ocr = raw.get("ocr", {})
    translation = raw.get("translation", {})
    aug = raw.get("augment", {})
    chains = tuple(
        ChainSpec(tag=c["tag"], pivots=tuple(c["pivots"]))
        for c in aug.get("chain", [])
    ) or DEFAULT_CHAINS
    # the augmentation stage mirrors the sub-task split: on for B, off for A
    augment_enabled = bool(aug.get("enabled", task == "B"))

    models = []
    model_backends = {}
    for m in raw.get("model", []):
        model_backends[m["name"]] = m.get("backend", "stub")
        models.append(
            ModelConfig(
                name=m["name"],
                backbone=m.get("backbone", "stub"),
                learning_rate=float(m.get("learning_rate", 1e-5)),
                train_batch_size=int(m.get("train_batch_size", 8)),
                test_batch_size=int(m.get("test_batch_size", 8)),
                epochs=int(m.get("epochs", 5)),
                seed=int(m.get("seed", seed)),
                max_sequence_length=int(m.get("max_sequence_length", 128)),
            )
        )
    if not models:
        raise SchemaError("config needs at least one [[model]] block")

    ens = raw.get("ensemble", {})
    llm = raw.get("llm", {})
    return PipelineConfig(
        task=task,
        seed=seed,
        manifest=resolve(paths["manifest"]),
        work_dir=work_dir,
        cache_dir=resolve(paths["cache_dir"]) if "cache_dir" in paths else work_dir / "cache",
        models_dir=resolve(paths["models_dir"]) if "models_dir" in paths else work_dir / "models",
        reports_dir=resolve(paths["reports_dir"]) if "reports_dir" in paths else work_dir / "reports",
        ocr_provider=ocr.get("provider", "mock"),
        ocr_table_path=resolve(ocr["table_path"]) if "table_path" in ocr else None,
        ocr_enabled=bool(ocr.get("enabled", True)),
        translation_provider=translation.get("provider", "identity"),
        augment_enabled=augment_enabled,
        augment_target_labels=aug.get("target_labels") or None,
        chains=chains,
        models=models,
        model_backends=model_backends,
        ensemble_rule=ens.get("rule", "majority"),
        ensemble_tie_break=ens.get("tie_break", "member_priority"),
        ensemble_members=ens.get("members") or None,
        llm_enabled=bool(llm.get("enabled", False)),
        llm_mode=llm.get("mode", "zero_shot"),
        llm_provider=llm.get("provider", "mock"),
        llm_default_response=llm.get("default_response", ""),
    )
