"""Training-split expansion via back-translation through pivot-language chains.

The default chains route English through culturally distant pivots
(Xhosa -> Twi -> English, and Lao -> Pashto -> Yoruba -> English) to
produce paraphrased copies that counter class imbalance. Augmentation is
best-effort: provider failures skip the instance rather than aborting.
"""

from __future__ import annotations

import hashlib
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

from .corpus import Dataset, Instance
from .errors import EmptyText, ProviderError, UnlabeledInstance
from .ocr import DiskCache

SOURCE_LANG = "en"


@dataclass(frozen=True)
class ChainSpec:
    """Ordered pivot-language sequence ending in the source language."""

    tag: str
    pivots: tuple[str, ...]

    def __post_init__(self):
        if len(self.pivots) < 2:
            raise ValueError(f"chain {self.tag!r}: needs at least 2 pivots")
        if self.pivots[-1] != SOURCE_LANG:
            raise ValueError(
                f"chain {self.tag!r}: must end in source language {SOURCE_LANG!r}"
            )


# "Xosha" in the source description is read as Xhosa (xh).
DEFAULT_CHAINS = (
    ChainSpec("xh-tw", ("xh", "tw", "en")),
    ChainSpec("lo-ps-yo", ("lo", "ps", "yo", "en")),
)


class TranslationProvider:
    """Interface: translate(text, from_lang, to_lang) -> text."""

    def translate(self, text: str, from_lang: str, to_lang: str) -> str:
        raise NotImplementedError


class IdentityTranslator(TranslationProvider):
    """Returns the input unchanged; useful for plumbing tests."""

    def translate(self, text, from_lang, to_lang):
        if not text:
            raise ProviderError("empty input text")
        return text


class MockTranslator(TranslationProvider):
    """Deterministic table- or transform-based translator for testing.

    With a table, lookups are keyed by (from_lang, to_lang) or
    (from_lang, to_lang, text). Without one, the output is the input
    tagged with the language pair, so every hop is visible and chains
    compose predictably.
    """

    def __init__(self, table: Optional[dict] = None):
        self.table = table or {}
        self.calls = 0

    def translate(self, text, from_lang, to_lang):
        self.calls += 1
        if not text:
            raise ProviderError("empty input text")
        if (from_lang, to_lang, text) in self.table:
            return self.table[(from_lang, to_lang, text)]
        if (from_lang, to_lang) in self.table:
            return self.table[(from_lang, to_lang)]
        return f"{text} [{from_lang}>{to_lang}]"


def back_translate(
    text: str,
    chain: ChainSpec,
    provider: TranslationProvider,
    cache: Optional[DiskCache] = None,
    retries: int = 3,
    backoff: float = 0.1,
) -> str:
    """Apply translate hop-by-hop along the chain's pivots.

    Hops run source -> pivots[0] -> pivots[1] -> ... -> pivots[-1]
    (the source language). Intermediate results are cached by
    (text hash, hop) when a cache is given.
    """
    if not text:
        raise EmptyText("cannot back-translate empty text")
    langs = (SOURCE_LANG,) + chain.pivots
    current = text
    for hop, (src, dst) in enumerate(zip(langs, langs[1:])):
        key = None
        if cache is not None:
            digest = hashlib.sha256(current.encode("utf-8")).hexdigest()
            key = f"{digest}:{src}:{dst}"
            cached = cache.get(key)
            if cached is not None:
                current = cached["text"]
                continue
        last = None
        for attempt in range(retries):
            try:
                current = provider.translate(current, src, dst)
                break
            except ProviderError as exc:
                last = exc
                if attempt + 1 < retries:
                    time.sleep(backoff * (2**attempt))
        else:
            raise ProviderError(
                f"translation {src}->{dst} failed after {retries} attempts: {last}"
            )
        if key is not None:
            cache.put(key, {"text": current})
    return current


@dataclass
class AugmentSummary:
    produced: int = 0
    skipped: int = 0
    skipped_ids: list = field(default_factory=list)


def augment_dataset(
    dataset: Dataset,
    chains: list[ChainSpec],
    provider: TranslationProvider,
    target_labels: Optional[set[int]] = None,
    cache: Optional[DiskCache] = None,
    drop_exact_duplicates: bool = False,
    max_workers: int = 4,
) -> tuple[Dataset, AugmentSummary]:
    """One augmented copy per (matching train instance, chain).

    Augmented ids are `<parent_id>#<chain_tag>`; label and metadata are
    inherited, split stays train. When target_labels is None every train
    instance is augmented. Output ordering is (parent id, chain tag) so
    results are deterministic regardless of completion order. The input
    dataset is never mutated.
    """
    if not chains:
        raise ValueError("at least one chain required")
    tags = [c.tag for c in chains]
    if len(set(tags)) != len(tags):
        raise ValueError(f"duplicate chain tags: {tags}")
    train = dataset.split_instances("train")
    unlabeled = [i for i in train if i.label is None]
    if unlabeled:
        raise UnlabeledInstance(
            f"train split has {len(unlabeled)} unlabeled instance(s); label before augmenting"
        )
    candidates = [
        i
        for i in train
        if (target_labels is None or i.label in target_labels) and i.text
    ]

    jobs = [(inst, chain) for inst in candidates for chain in chains]
    summary = AugmentSummary()

    def run(job):
        inst, chain = job
        try:
            text = back_translate(inst.text, chain, provider, cache=cache)
            return inst, chain, text
        except ProviderError:
            return inst, chain, None

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        results = list(pool.map(run, jobs))

    produced: list[Instance] = []
    for inst, chain, text in sorted(results, key=lambda r: (r[0].id, r[1].tag)):
        if text is None:
            summary.skipped += 1
            summary.skipped_ids.append(f"{inst.id}#{chain.tag}")
            continue
        if drop_exact_duplicates and text == inst.text:
            summary.skipped += 1
            summary.skipped_ids.append(f"{inst.id}#{chain.tag}")
            continue
        produced.append(
            replace(
                inst,
                id=f"{inst.id}#{chain.tag}",
                text=text,
                origin="augmented",
                chain_tag=chain.tag,
            )
        )
    summary.produced = len(produced)
    return Dataset(scheme=dataset.scheme, instances=produced), summary
