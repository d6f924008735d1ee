"""OCR text extraction through pluggable providers with a durable disk cache.

The cloud provider the original experiments relied on is modeled as an
opaque adapter; a mock provider with a fixture lookup table makes the
stage fully testable offline. Cache entries are keyed by image content
hash plus provider name so API cost is paid once per image per provider.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .corpus import Dataset, Instance
from .errors import ImageUnreadable, ProviderError

_CONTROL_CHARS = re.compile(r"[\x00-\x08\x0b-\x1f\x7f]")


def clean_ocr_text(blocks: list[str]) -> str:
    """Join detected text blocks with single spaces and strip control chars."""
    joined = " ".join(b.strip() for b in blocks if b.strip())
    return _CONTROL_CHARS.sub("", joined).strip()


@dataclass
class OcrResult:
    instance_id: str
    text: str
    provider: str
    content_hash: str
    confidence: Optional[float] = None

    def __post_init__(self):
        if self.confidence is not None and not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0,1]")


class OcrProvider:
    """Interface: recognize(image_bytes) -> (text, optional confidence)."""

    name = "base"

    def recognize(self, image_bytes: bytes) -> tuple[str, Optional[float]]:
        raise NotImplementedError


class MockOcrProvider(OcrProvider):
    """Maps image file basenames (or content hashes) to fixed text.

    The lookup table comes from a dict or a JSON file; unknown images
    yield empty text, mirroring real OCR failure on unreadable content.
    """

    name = "mock"

    def __init__(self, table: Optional[dict] = None, table_path=None):
        self.table = dict(table or {})
        if table_path:
            self.table.update(json.loads(Path(table_path).read_text(encoding="utf-8")))
        self.calls = 0
        self._lock = threading.Lock()

    def recognize_named(self, key: str, image_bytes: bytes):
        with self._lock:
            self.calls += 1
        digest = hashlib.sha256(image_bytes).hexdigest()
        for k in (key, digest):
            if k in self.table:
                return clean_ocr_text([self.table[k]]), 0.99
        return "", None

    def recognize(self, image_bytes: bytes) -> tuple[str, Optional[float]]:
        digest = hashlib.sha256(image_bytes).hexdigest()
        return self.recognize_named(digest, image_bytes)


class CloudOcrProvider(OcrProvider):
    """Adapter for a commercial vision API; credentials via environment."""

    name = "cloud"

    def __init__(self, api_key_env: str = "OCR_API_KEY"):
        self.api_key = os.environ.get(api_key_env)
        if not self.api_key:
            raise ProviderError(
                f"cloud OCR requires the {api_key_env} environment variable"
            )

    def recognize(self, image_bytes: bytes) -> tuple[str, Optional[float]]:
        raise ProviderError(
            "cloud OCR adapter is a placeholder; point it at a real endpoint"
        )


def make_ocr_provider(kind: str, **kwargs) -> OcrProvider:
    if kind == "mock":
        return MockOcrProvider(
            table=kwargs.get("table"), table_path=kwargs.get("table_path")
        )
    if kind == "cloud":
        return CloudOcrProvider()
    raise ProviderError(f"unknown OCR provider {kind!r}")


@dataclass
class CacheStats:
    entries: int = 0
    hits: int = 0
    misses: int = 0


class DiskCache:
    """Durable key-value store: one JSON file per key under a directory.

    A namespace keeps OCR and translation entries apart in a shared
    cache directory. Hit/miss counters are per-process and monotone
    within a run.
    """

    def __init__(self, cache_dir, namespace: str = "ocr"):
        self.dir = Path(cache_dir) / namespace
        self.dir.mkdir(parents=True, exist_ok=True)
        self._hits = 0
        self._misses = 0
        self._lock = threading.Lock()

    def _path(self, key: str) -> Path:
        safe = hashlib.sha256(key.encode("utf-8")).hexdigest()
        return self.dir / f"{safe}.json"

    def get(self, key: str):
        path = self._path(key)
        if path.exists():
            with self._lock:
                self._hits += 1
            return json.loads(path.read_text(encoding="utf-8"))
        with self._lock:
            self._misses += 1
        return None

    def put(self, key: str, value) -> None:
        path = self._path(key)
        with self._lock:
            tmp = path.with_suffix(".tmp")
            tmp.write_text(json.dumps(value, sort_keys=True), encoding="utf-8")
            tmp.replace(path)

    def stats(self) -> CacheStats:
        entries = sum(1 for _ in self.dir.glob("*.json"))
        return CacheStats(entries=entries, hits=self._hits, misses=self._misses)


def cache_stats(cache: DiskCache) -> CacheStats:
    return cache.stats()


def _read_image(inst: Instance, on_unreadable: str) -> Optional[bytes]:
    path = Path(inst.image_path) if inst.image_path else None
    if path is None or not path.exists():
        if on_unreadable == "skip":
            return None
        raise ImageUnreadable(f"instance {inst.id}: cannot read {inst.image_path!r}")
    try:
        return path.read_bytes()
    except OSError as exc:
        if on_unreadable == "skip":
            return None
        raise ImageUnreadable(f"instance {inst.id}: {exc}") from exc


def _call_with_retries(provider, key, image_bytes, retries, backoff):
    last = None
    for attempt in range(retries):
        try:
            if isinstance(provider, MockOcrProvider):
                return provider.recognize_named(key, image_bytes)
            return provider.recognize(image_bytes)
        except ProviderError as exc:
            last = exc
            if attempt + 1 < retries:
                time.sleep(backoff * (2**attempt))
    raise ProviderError(f"OCR failed after {retries} attempts: {last}")


@dataclass
class ExtractionSummary:
    filled: int = 0
    cached: int = 0
    provider_calls: int = 0
    empty: list = field(default_factory=list)
    skipped: list = field(default_factory=list)


def extract_text(
    dataset: Dataset,
    provider: OcrProvider,
    cache: DiskCache,
    retries: int = 3,
    backoff: float = 0.1,
    on_unreadable: str = "fail",
    max_workers: int = 4,
) -> tuple[Dataset, ExtractionSummary]:
    """Fill text for every instance lacking it; cache short-circuits the provider.

    Instances whose OCR output is empty are flagged in the summary for
    manual review; downstream training excludes them. Instances with
    pre-existing text are returned untouched. Idempotent: a second pass
    over the same dataset resolves entirely from cache.
    """
    summary = ExtractionSummary()
    needing = [i for i in dataset.instances if not i.text]

    def resolve(inst: Instance):
        image_bytes = _read_image(inst, on_unreadable)
        if image_bytes is None:
            return inst.id, None, False
        digest = hashlib.sha256(image_bytes).hexdigest()
        cache_key = f"{digest}:{provider.name}"
        cached = cache.get(cache_key)
        if cached is not None:
            return inst.id, cached["text"], True
        key = Path(inst.image_path).name if inst.image_path else inst.id
        text, confidence = _call_with_retries(
            provider, key, image_bytes, retries, backoff
        )
        cache.put(
            cache_key,
            {
                "text": text,
                "confidence": confidence,
                "provider": provider.name,
                "content_hash": digest,
            },
        )
        return inst.id, text, False

    resolved: dict[str, Optional[str]] = {}
    if needing:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            for inst_id, text, was_cached in pool.map(resolve, needing):
                resolved[inst_id] = text
                if text is None:
                    summary.skipped.append(inst_id)
                elif was_cached:
                    summary.cached += 1
                else:
                    summary.provider_calls += 1

    out = []
    for inst in dataset.instances:
        if inst.id in resolved:
            text = resolved[inst.id]
            if text is None:
                out.append(inst)
            else:
                if not text:
                    summary.empty.append(inst.id)
                out.append(inst.with_text(text))
                summary.filled += 1
        else:
            out.append(inst)
    return Dataset(scheme=dataset.scheme, instances=out), summary
