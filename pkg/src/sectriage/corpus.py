"""Corpus ingestion, labeling, class balancing, and split construction.

Documents arrive either from NVD JSON data feeds (CVE descriptions,
always security-related) or from a JSONL interchange file covering every
other source. Splits honor the 70/20/10 ratio with an optional temporal
constraint: the test partition is strictly newer than everything used
for training and validation.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence


class DataFormatError(Exception):
    """Raised when an input file does not conform to its documented format."""


class Label(Enum):
    SR = "sr"
    NONSR = "nonsr"


class Source(Enum):
    CVE = "cve"
    GITLAB_ISSUE = "gitlab"
    GITHUB_ISSUE = "github"
    WIKIPEDIA = "wikipedia"
    OTHER = "other"


_SOURCE_ALIASES = {
    "cve": Source.CVE,
    "nvd": Source.CVE,
    "gitlab": Source.GITLAB_ISSUE,
    "gitlabissue": Source.GITLAB_ISSUE,
    "github": Source.GITHUB_ISSUE,
    "githubissue": Source.GITHUB_ISSUE,
    "wikipedia": Source.WIKIPEDIA,
    "wiki": Source.WIKIPEDIA,
}


@dataclass
class Document:
    """One issue, CVE description, or article.

    Wikipedia-style documents are embedding-only: they carry no label and
    are rejected by the split builders.
    """

    id: str
    text: str
    label: Label | None = None
    created_at: datetime | None = None
    source: Source = Source.OTHER

    def __post_init__(self):
        if not self.text or not self.text.strip():
            raise ValueError(f"document {self.id!r} has empty text")


@dataclass
class SplitBundle:
    """Train/validation/test partition of a labeled corpus."""

    train: list[Document]
    validation: list[Document]
    test: list[Document]
    seed: int

    def parts(self) -> dict[str, list[Document]]:
        return {"train": self.train, "validation": self.validation,
                "test": self.test}


@dataclass
class NvdFeedResult:
    """Documents extracted from an NVD feed plus the skipped-item count."""

    documents: list[Document]
    skipped: int


def parse_timestamp(value: str) -> datetime:
    """Parse an ISO-8601 timestamp into an aware UTC datetime."""
    text = value.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def format_timestamp(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_nvd_feed(feed_content: bytes | str) -> NvdFeedResult:
    """Extract one SR document per CVE item of an NVD 1.1 data feed.

    Items without an English description are skipped and counted, not
    failed: feeds routinely contain rejected CVE stubs.
    """
    if isinstance(feed_content, bytes):
        feed_content = feed_content.decode("utf-8")
    try:
        feed = json.loads(feed_content)
    except json.JSONDecodeError as exc:
        raise DataFormatError(
            f"NVD feed is not valid JSON: {exc.msg} at byte offset {exc.pos}"
        ) from exc
    if not isinstance(feed, dict) or "CVE_Items" not in feed:
        raise DataFormatError(
            "NVD feed missing required field 'CVE_Items' (expected 1.1 data-feed schema)"
        )
    documents: list[Document] = []
    skipped = 0
    for i, item in enumerate(feed["CVE_Items"]):
        try:
            cve_id = item["cve"]["CVE_data_meta"]["ID"]
        except (KeyError, TypeError):
            raise DataFormatError(
                f"NVD feed item {i} missing field 'cve.CVE_data_meta.ID'"
            ) from None
        description = None
        for entry in item.get("cve", {}).get("description", {}).get(
                "description_data", []):
            if entry.get("lang") == "en" and entry.get("value", "").strip():
                description = entry["value"]
                break
        if description is None:
            skipped += 1
            continue
        created_at = None
        published = item.get("publishedDate")
        if published:
            try:
                created_at = parse_timestamp(published)
            except ValueError:
                raise DataFormatError(
                    f"NVD feed item {cve_id}: bad publishedDate {published!r}"
                ) from None
        documents.append(Document(id=cve_id, text=description, label=Label.SR,
                                  created_at=created_at, source=Source.CVE))
    return NvdFeedResult(documents=documents, skipped=skipped)


def _document_from_record(rec: dict, where: str) -> Document:
    for field_name in ("id", "text"):
        if field_name not in rec:
            raise DataFormatError(f"{where}: missing required field '{field_name}'")
    label = None
    if rec.get("label") is not None:
        raw = str(rec["label"]).lower()
        try:
            label = Label(raw)
        except ValueError:
            raise DataFormatError(
                f"{where}: invalid label {rec['label']!r} (expected 'sr' or 'nonsr')"
            ) from None
    created_at = None
    if rec.get("created_at") is not None:
        try:
            created_at = parse_timestamp(str(rec["created_at"]))
        except ValueError:
            raise DataFormatError(
                f"{where}: invalid created_at {rec['created_at']!r}"
            ) from None
    source = _SOURCE_ALIASES.get(str(rec.get("source", "other")).lower(), Source.OTHER)
    try:
        return Document(id=str(rec["id"]), text=rec["text"], label=label,
                        created_at=created_at, source=source)
    except ValueError as exc:
        raise DataFormatError(f"{where}: {exc}") from None


def load_corpus_jsonl(path: str | Path) -> list[Document]:
    """Read documents from the JSONL interchange format, one per line."""
    documents = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(
                    f"{path}: line {lineno}: invalid JSON ({exc.msg})"
                ) from exc
            documents.append(_document_from_record(rec, f"{path}: line {lineno}"))
    return documents


def document_to_record(doc: Document) -> dict:
    rec: dict = {"id": doc.id, "text": doc.text, "source": doc.source.value}
    if doc.label is not None:
        rec["label"] = doc.label.value
    if doc.created_at is not None:
        rec["created_at"] = format_timestamp(doc.created_at)
    return rec


def write_corpus_jsonl(documents: Iterable[Document], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in documents:
            fh.write(json.dumps(document_to_record(doc), ensure_ascii=False,
                                sort_keys=True))
            fh.write("\n")


def balance_classes(docs: Sequence[Document], seed: int) -> list[Document]:
    """Equalize SR/non-SR counts by subsampling the majority class.

    All minority-class documents are kept; the majority class is sampled
    uniformly without replacement down to the same size. Output order is
    a deterministic shuffle for the given seed.
    """
    sr = [d for d in docs if d.label is Label.SR]
    nonsr = [d for d in docs if d.label is Label.NONSR]
    if not sr or not nonsr:
        raise ValueError("balance_classes needs documents of both labels")
    rng = random.Random(seed)
    minority, majority = (sr, nonsr) if len(sr) <= len(nonsr) else (nonsr, sr)
    majority = sorted(majority, key=lambda d: d.id)
    sampled = rng.sample(majority, len(minority))
    out = list(minority) + sampled
    out.sort(key=lambda d: d.id)
    rng.shuffle(out)
    return out


def _allocate(group_sizes: Sequence[int], total: int) -> list[int]:
    """Largest-remainder allocation of `total` across groups, capped by size."""
    n = sum(group_sizes)
    if n == 0 or total == 0:
        return [0] * len(group_sizes)
    quotas = [size * total / n for size in group_sizes]
    counts = [min(int(q), size) for q, size in zip(quotas, group_sizes)]
    remainders = sorted(
        range(len(group_sizes)),
        key=lambda i: (-(quotas[i] - int(quotas[i])), i),
    )
    i = 0
    while sum(counts) < total and i < 10 * len(group_sizes):
        g = remainders[i % len(remainders)]
        if counts[g] < group_sizes[g]:
            counts[g] += 1
        i += 1
    return counts


def make_split(docs: Sequence[Document],
               ratios: tuple[float, float, float] = (0.70, 0.20, 0.10),
               seed: int = 0,
               temporal: bool = False) -> SplitBundle:
    """Partition labeled documents into train/validation/test.

    Sizes are floor(ratio * N) for validation and test, remainder to
    train. Non-temporal splits are stratified by label. Temporal splits
    fix the newest 10% as test first (strictly newer than everything
    else), then randomly split the remainder.
    """
    docs = sorted(docs, key=lambda d: d.id)
    n = len(docs)
    if n < 10:
        raise ValueError(f"need at least 10 documents to split, got {n}")
    seen: set[str] = set()
    for d in docs:
        if d.label is None:
            raise ValueError(f"unlabeled document {d.id!r} cannot enter a split")
        if d.id in seen:
            raise ValueError(f"duplicate document id {d.id!r}")
        seen.add(d.id)
    r_train, r_val, r_test = ratios
    if min(ratios) < 0 or abs(r_train + r_val + r_test - 1.0) > 1e-9:
        raise ValueError(f"ratios must be non-negative and sum to 1, got {ratios}")
    n_test = int(n * r_test)
    n_val = int(n * r_val)
    rng = random.Random(seed)

    if temporal:
        for d in docs:
            if d.created_at is None:
                raise ValueError(
                    f"document {d.id!r} lacks created_at; temporal split impossible"
                )
        by_time = sorted(docs, key=lambda d: (d.created_at, d.id))
        test = by_time[n - n_test:]
        rest = by_time[: n - n_test]
        # Strictness: when the cut falls inside a group of tied timestamps,
        # the tied test documents go back to the training pool so that
        # min(test) > max(rest) holds.
        if test and rest and rest[-1].created_at == test[0].created_at:
            boundary = test[0].created_at
            tied = [d for d in test if d.created_at == boundary]
            test = [d for d in test if d.created_at > boundary]
            rest = rest + tied
        if not test or (rest and rest[-1].created_at >= test[0].created_at):
            raise ValueError(
                "timestamps do not admit a strictly-newer test partition"
            )
        pool = sorted(rest, key=lambda d: d.id)
        rng.shuffle(pool)
        validation = pool[:n_val]
        train = pool[n_val:]
    else:
        groups: dict[Label, list[Document]] = {}
        for d in docs:
            groups.setdefault(d.label, []).append(d)
        labels = sorted(groups, key=lambda lb: lb.value)
        sizes = [len(groups[lb]) for lb in labels]
        test_alloc = _allocate(sizes, n_test)
        val_alloc = _allocate([s - t for s, t in zip(sizes, test_alloc)], n_val)
        train, validation, test = [], [], []
        for lb, n_t, n_v in zip(labels, test_alloc, val_alloc):
            group = list(groups[lb])
            rng.shuffle(group)
            test.extend(group[:n_t])
            validation.extend(group[n_t:n_t + n_v])
            train.extend(group[n_t + n_v:])
        for part in (train, validation, test):
            part.sort(key=lambda d: d.id)
            rng.shuffle(part)

    return SplitBundle(train=train, validation=validation, test=test, seed=seed)


def check_temporal(split: SplitBundle) -> bool:
    """True iff every test document is strictly newer than all train and
    validation documents."""
    older = split.train + split.validation
    for d in older + split.test:
        if d.created_at is None:
            raise ValueError(f"document {d.id!r} lacks created_at")
    if not split.test or not older:
        raise ValueError("check_temporal needs non-empty test and train parts")
    newest_older = max(d.created_at for d in older)
    oldest_test = min(d.created_at for d in split.test)
    return oldest_test > newest_older
