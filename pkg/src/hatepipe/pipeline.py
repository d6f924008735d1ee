"""Stage orchestration: resumable artifacts keyed by config hash.

Each stage writes plain-file artifacts under the work directory and
records the config hash it ran with; a rerun skips any stage whose
artifacts exist under the current hash. Forcing a stage invalidates it
and everything downstream, never upstream.
"""

from __future__ import annotations

import json
from pathlib import Path

from . import augment as aug_mod
from . import classify, corpus, ensemble as ens_mod, evaluate, ocr, prompt
from .config import PipelineConfig
from .errors import ProviderError, SchemaError

STAGES = ["ingest", "ocr", "augment", "train", "predict", "llm", "ensemble", "evaluate"]


class StageState:
    def __init__(self, work_dir: Path):
        self.path = Path(work_dir) / "state.json"
        if self.path.exists():
            self.stages = json.loads(self.path.read_text(encoding="utf-8"))
        else:
            self.stages = {}

    def is_done(self, stage: str, config_hash: str) -> bool:
        return self.stages.get(stage) == config_hash

    def mark(self, stage: str, config_hash: str) -> None:
        self.stages[stage] = config_hash
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(
            json.dumps(self.stages, sort_keys=True, indent=2), encoding="utf-8"
        )

    def invalidate_from(self, stage: str) -> None:
        for later in STAGES[STAGES.index(stage):]:
            self.stages.pop(later, None)


class Pipeline:
    def __init__(self, config: PipelineConfig, log=print):
        self.config = config
        self.log = log
        self.work = Path(config.work_dir)
        self.work.mkdir(parents=True, exist_ok=True)
        self.state = StageState(self.work)
        self.hash = config.config_hash()

    # artifact paths
    @property
    def dataset_path(self) -> Path:
        return self.work / "dataset.csv"

    @property
    def ocr_dataset_path(self) -> Path:
        return self.work / "dataset_ocr.csv"

    @property
    def augmented_path(self) -> Path:
        return self.work / "augmented.csv"

    @property
    def train_full_path(self) -> Path:
        return self.work / "train_full.csv"

    def preds_path(self, model: str, split: str) -> Path:
        return self.work / "preds" / f"{model}_{split}.jsonl"

    def _skip(self, stage: str) -> bool:
        if self.state.is_done(stage, self.hash):
            self.log(f"[{stage}] cached")
            return True
        return False

    def _providers(self):
        if self.config.ocr_provider == "mock":
            table_path = self.config.ocr_table_path
            return ocr.MockOcrProvider(
                table_path=table_path if table_path and table_path.exists() else None
            )
        return ocr.make_ocr_provider(self.config.ocr_provider)

    def _translator(self):
        kind = self.config.translation_provider
        if kind == "identity":
            return aug_mod.IdentityTranslator()
        if kind == "mock":
            return aug_mod.MockTranslator()
        raise ProviderError(f"unknown translation provider {kind!r}")

    def _load(self, path: Path) -> corpus.Dataset:
        return corpus.load_dataset(path, self.config.scheme)

    # stages
    def run_ingest(self):
        if self._skip("ingest"):
            return
        dataset = corpus.load_dataset(self.config.manifest, self.config.scheme)
        corpus.save_dataset(dataset, self.dataset_path)
        dist = corpus.label_distribution(dataset, require_labels=False)
        self.log(corpus.format_distribution(dist))
        self.log(f"[ingest] {len(dataset)} instances -> {self.dataset_path}")
        self.state.mark("ingest", self.hash)

    def run_ocr(self):
        if self._skip("ocr"):
            return
        dataset = self._load(self.dataset_path)
        if self.config.ocr_enabled and any(not i.text for i in dataset.instances):
            provider = self._providers()
            cache = ocr.DiskCache(self.config.cache_dir, namespace="ocr")
            dataset, summary = ocr.extract_text(dataset, provider, cache)
            self.log(
                f"[ocr] filled {summary.filled} "
                f"(cached {summary.cached}, provider calls {summary.provider_calls}, "
                f"empty {len(summary.empty)})"
            )
        else:
            self.log("[ocr] nothing to extract")
        corpus.save_dataset(dataset, self.ocr_dataset_path)
        self.state.mark("ocr", self.hash)

    def run_augment(self):
        if self._skip("augment"):
            return
        dataset = self._load(self.ocr_dataset_path)
        if not self.config.augment_enabled:
            corpus.save_dataset(dataset, self.train_full_path)
            self.log("[augment] disabled")
            self.state.mark("augment", self.hash)
            return
        translator = self._translator()
        cache = ocr.DiskCache(self.config.cache_dir, namespace="translate")
        targets = (
            set(self.config.augment_target_labels)
            if self.config.augment_target_labels
            else None
        )
        augmented, summary = aug_mod.augment_dataset(
            dataset,
            list(self.config.chains),
            translator,
            target_labels=targets,
            cache=cache,
        )
        corpus.save_dataset(augmented, self.augmented_path)
        merged = corpus.merge(dataset, augmented)
        corpus.save_dataset(merged, self.train_full_path)
        self.log(
            f"[augment] produced {summary.produced}, skipped {summary.skipped}"
        )
        self.state.mark("augment", self.hash)

    def _backend_for(self, model_name: str):
        kind = self.config.model_backends.get(model_name, "stub")
        return classify.make_backend(kind)

    def run_train(self):
        if self._skip("train"):
            return
        dataset = self._load(self.train_full_path)
        for model_cfg in self.config.models:
            backend = self._backend_for(model_cfg.name)
            handle, summary = classify.train(model_cfg, dataset, dataset, backend)
            out = Path(self.config.models_dir) / model_cfg.name
            backend.save(handle, out)
            (out / "summary.json").write_text(
                json.dumps(summary.to_dict(), sort_keys=True, indent=2),
                encoding="utf-8",
            )
            self.log(f"[train] {model_cfg.name} -> {out}")
        self.state.mark("train", self.hash)

    def _predictable(self, dataset: corpus.Dataset, split: str):
        return [i for i in dataset.split_instances(split) if i.text]

    def run_predict(self):
        if self._skip("predict"):
            return
        dataset = self._load(self.ocr_dataset_path)
        for model_cfg in self.config.models:
            backend = self._backend_for(model_cfg.name)
            handle = backend.load(Path(self.config.models_dir) / model_cfg.name)
            for split in ("eval", "test"):
                instances = self._predictable(dataset, split)
                if not instances:
                    continue
                preds = classify.predict(handle, instances, backend)
                classify.save_predictions(
                    preds, self.preds_path(model_cfg.name, split)
                )
                self.log(
                    f"[predict] {model_cfg.name}/{split}: {len(preds)} predictions"
                )
        self.state.mark("predict", self.hash)

    def run_llm(self):
        if self._skip("llm"):
            return
        if not self.config.llm_enabled:
            self.log("[llm] disabled")
            self.state.mark("llm", self.hash)
            return
        dataset = self._load(self.ocr_dataset_path)
        if self.config.llm_provider != "mock":
            raise ProviderError(
                f"llm provider {self.config.llm_provider!r} needs API credentials; "
                "only 'mock' runs offline"
            )
        provider = prompt.MockLlmProvider(
            default=self.config.llm_default_response
        )
        exemplars = (
            prompt.sample_exemplars(dataset, seed=self.config.seed)
            if self.config.llm_mode == "few_shot"
            else ()
        )
        spec = prompt.spec_for_scheme(
            self.config.scheme, mode=self.config.llm_mode, exemplars=exemplars
        )
        for split in ("eval", "test"):
            instances = self._predictable(dataset, split)
            if not instances:
                continue
            log = prompt.LlmRunLog()
            split_ds = corpus.Dataset(
                scheme=dataset.scheme,
                instances=dataset.split_instances("train") + instances,
            )
            preds = prompt.run_llm(
                split_ds, split, spec, provider, log=log
            )
            classify.save_predictions(preds, self.preds_path("llm", split))
            log.write(self.work / "llm_logs" / f"{split}.jsonl")
            self.log(
                f"[llm] {split}: {len(preds)} predictions, "
                f"{log.parse_failures} parse failures"
            )
        self.state.mark("llm", self.hash)

    def run_ensemble(self):
        if self._skip("ensemble"):
            return
        dataset = self._load(self.ocr_dataset_path)
        member_names = self.config.ensemble_members or [
            m.name for m in self.config.models
        ]
        if len(member_names) < 2:
            self.log("[ensemble] fewer than 2 members, skipping")
            self.state.mark("ensemble", self.hash)
            return
        weights = None
        if self.config.ensemble_rule == "weighted":
            eval_reports = {}
            for name in member_names:
                preds = classify.load_predictions(self.preds_path(name, "eval"))
                gold = self._gold_dataset(dataset, "eval", preds)
                eval_reports[name] = evaluate.score(preds, gold, split="eval")
            members = ens_mod.derive_weights(eval_reports, member_names)
            weights = dict(members)
        spec = self.config.ensemble_spec(weights)
        for split in ("eval", "test"):
            per_model = {}
            for name in member_names:
                path = self.preds_path(name, split)
                if not path.exists():
                    per_model = None
                    break
                per_model[name] = classify.load_predictions(path)
            if not per_model:
                continue
            fused = ens_mod.fuse(per_model, spec)
            classify.save_predictions(fused, self.preds_path("ensemble", split))
            self.log(f"[ensemble] {split}: {len(fused)} fused predictions")
        self.state.mark("ensemble", self.hash)

    def _gold_dataset(self, dataset, split, preds):
        ids = {p.instance_id for p in preds}
        instances = [
            i
            for i in dataset.split_instances(split)
            if i.id in ids and i.label is not None
        ]
        return corpus.Dataset(scheme=dataset.scheme, instances=instances)

    def run_evaluate(self):
        if self._skip("evaluate"):
            return
        dataset = self._load(self.ocr_dataset_path)
        runs = [m.name for m in self.config.models]
        if len(self.config.ensemble_members or runs) >= 2:
            runs.append("ensemble")
        if self.config.llm_enabled:
            runs.append("llm")
        reports = {}
        for run in runs:
            for split in ("eval", "test"):
                path = self.preds_path(run, split)
                if not path.exists():
                    continue
                preds = classify.load_predictions(path)
                gold = self._gold_dataset(dataset, split, preds)
                if len(gold) != len(preds):
                    self.log(f"[evaluate] {run}/{split}: gold incomplete, skipped")
                    continue
                reports[f"{run}/{split}"] = evaluate.score(preds, gold, split=split)
        if not reports:
            raise SchemaError("no labeled split with predictions to evaluate")
        out = Path(self.config.reports_dir)
        evaluate.render_report(reports, "json", out)
        table = evaluate.render_report(reports, "text_table", out)
        self.log(table)
        self.state.mark("evaluate", self.hash)
        return reports

    def run_all(self, force=None):
        for stage in force or []:
            if stage not in STAGES:
                raise SchemaError(f"unknown stage {stage!r}")
            self.state.invalidate_from(stage)
        self.run_ingest()
        self.run_ocr()
        self.run_augment()
        self.run_train()
        self.run_predict()
        self.run_llm()
        self.run_ensemble()
        return self.run_evaluate()
