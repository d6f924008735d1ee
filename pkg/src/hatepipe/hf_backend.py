"""Transformers-based classifier backend.

Fine-tunes a masked-LM backbone (e.g. xlm-roberta-large, bertweet-large,
bert-base-uncased) for sequence classification. Heavy imports stay inside
the class so the rest of the package works without torch installed.
Checkpoint selection keeps the epoch with the best eval macro-F1.
"""

from __future__ import annotations

from pathlib import Path

from .classify import ClassifierBackend, Prediction, TrainingSummary
from .corpus import Dataset
from .errors import BackendError, EmptyText


class TransformersBackend(ClassifierBackend):
    def __init__(self, device: str = "cpu"):
        try:
            import torch  # noqa: F401
            import transformers  # noqa: F401
        except ImportError as exc:
            raise BackendError(f"transformers backend unavailable: {exc}") from exc
        self.device = device

    def train(self, config, train_set: Dataset, eval_set: Dataset):
        import torch
        from torch.utils.data import DataLoader
        from transformers import (
            AutoModelForSequenceClassification,
            AutoTokenizer,
        )

        from .evaluate import score

        torch.manual_seed(config.seed)
        num_labels = len(train_set.scheme.codes)
        tokenizer = AutoTokenizer.from_pretrained(config.backbone)
        model = AutoModelForSequenceClassification.from_pretrained(
            config.backbone, num_labels=num_labels
        ).to(self.device)
        optimizer = torch.optim.AdamW(model.parameters(), lr=config.learning_rate)

        train_rows = [
            (i.text, i.label)
            for i in train_set.split_instances("train")
            if i.text and i.label is not None
        ]
        eval_rows = [
            i for i in eval_set.split_instances("eval") if i.label is not None
        ]

        def collate(batch):
            texts, labels = zip(*batch)
            enc = tokenizer(
                list(texts),
                truncation=True,
                max_length=config.max_sequence_length,
                padding=True,
                return_tensors="pt",
            )
            enc["labels"] = torch.tensor(labels)
            return enc

        loader = DataLoader(
            train_rows,
            batch_size=config.train_batch_size,
            shuffle=True,
            collate_fn=collate,
            generator=torch.Generator().manual_seed(config.seed),
        )

        summary = TrainingSummary(model_name=config.name)
        handle = {
            "kind": "transformers",
            "model_name": config.name,
            "backbone": config.backbone,
            "num_labels": num_labels,
            "max_sequence_length": config.max_sequence_length,
            "test_batch_size": config.test_batch_size,
            "_model": model,
            "_tokenizer": tokenizer,
        }
        best_f1, best_state = -1.0, None
        for epoch in range(1, config.epochs + 1):
            model.train()
            total_loss = 0.0
            for batch in loader:
                batch = {k: v.to(self.device) for k, v in batch.items()}
                out = model(**batch)
                out.loss.backward()
                optimizer.step()
                optimizer.zero_grad()
                total_loss += out.loss.item()
            entry = {"epoch": epoch, "loss": total_loss / max(len(loader), 1)}
            if eval_rows:
                preds = self.predict(handle, eval_rows)
                gold = Dataset(scheme=eval_set.scheme, instances=eval_rows)
                f1 = score(preds, gold, split="eval").macro_f1
                entry["eval_macro_f1"] = f1
                if f1 > best_f1:
                    best_f1 = f1
                    best_state = {
                        k: v.detach().cpu().clone()
                        for k, v in model.state_dict().items()
                    }
                    summary.best_epoch = epoch
            summary.epochs.append(entry)
        if best_state is not None:
            model.load_state_dict(best_state)
        return handle, summary

    def predict(self, handle, instances):
        import torch

        if any(not i.text for i in instances):
            empty = next(i.id for i in instances if not i.text)
            raise EmptyText(f"instance {empty} has no text")
        model, tokenizer = handle["_model"], handle["_tokenizer"]
        model.eval()
        preds = []
        batch_size = handle["test_batch_size"]
        with torch.no_grad():
            for start in range(0, len(instances), batch_size):
                chunk = instances[start : start + batch_size]
                enc = tokenizer(
                    [i.text for i in chunk],
                    truncation=True,
                    max_length=handle["max_sequence_length"],
                    padding=True,
                    return_tensors="pt",
                ).to(self.device)
                probs = torch.softmax(model(**enc).logits, dim=-1).cpu()
                for inst, row in zip(chunk, probs):
                    scores = row.double()
                    scores = (scores / scores.sum()).tolist()
                    best = max(scores)
                    label = min(i for i, s in enumerate(scores) if s == best)
                    preds.append(
                        Prediction(
                            instance_id=inst.id,
                            label=label,
                            model_name=handle["model_name"],
                            scores=tuple(scores),
                        )
                    )
        return preds

    def save(self, handle, out_dir):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        handle["_model"].save_pretrained(out)
        handle["_tokenizer"].save_pretrained(out)
        meta = {k: v for k, v in handle.items() if not k.startswith("_")}
        import json

        (out / "handle.json").write_text(json.dumps(meta, sort_keys=True, indent=2))

    def load(self, in_dir):
        import json

        from transformers import (
            AutoModelForSequenceClassification,
            AutoTokenizer,
        )

        in_dir = Path(in_dir)
        meta = json.loads((in_dir / "handle.json").read_text())
        if meta.get("kind") != "transformers":
            raise BackendError(f"{in_dir} does not hold a transformers handle")
        meta["_model"] = AutoModelForSequenceClassification.from_pretrained(
            in_dir
        ).to(self.device)
        meta["_tokenizer"] = AutoTokenizer.from_pretrained(in_dir)
        return meta
