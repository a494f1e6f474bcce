"""Dataset records, stream manifests, group-keyed splitting, and a synthetic
generator for drifting text-classification streams."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import __version__

RECORD_FIELDS = ("id", "text", "label", "group")

# share of each sample drawn from its class signature pool; the rest is
# class-neutral background vocabulary
SIGNATURE_SHARE = 0.7
MAX_POOL_TOKENS = 20
MIN_POOL_TOKENS = 4
# share of each drift step's replacement tokens recycled from other classes'
# retired tokens instead of minted fresh; recycled tokens change meaning,
# which is what makes a stale model decay. Retired tokens rest one full
# partition before resurfacing, so the partition immediately before the
# overwrite carries no trace of them.
REUSE_SHARE = 1.0


@dataclass(frozen=True)
class Sample:
    """One labeled text record; ``group`` is the provenance key used for splitting."""

    id: str
    text: str
    label: int
    group: str = ""


@dataclass
class DatasetPartition:
    index: int
    train: list[Sample]
    valid: list[Sample]
    test: list[Sample]

    def splits(self) -> dict[str, list[Sample]]:
        return {"train": self.train, "valid": self.valid, "test": self.test}


@dataclass
class StreamManifest:
    class_count: int
    partitions: list[dict[str, str]]
    meta: dict = field(default_factory=dict)


@dataclass
class DriftConfig:
    """Knobs for the synthetic stream generator.

    drift_strength is the fraction of each class signature pool replaced at
    every partition step: 0 keeps the pools identical across the stream and 1
    replaces them outright. noise_rate flips that fraction of train labels to
    a uniformly chosen other class. Replaced tokens either move into another
    class's pool (changing what they signal) or retire into the shared
    background vocabulary; both put later training in direct conflict with
    what an earlier model learned.
    """

    n_partitions: int = 5
    n_classes: int = 3
    train_size: int = 2000
    valid_size: int = 250
    test_size: int = 250
    vocab_size: int = 5000
    tokens_per_sample: int = 30
    drift_strength: float = 0.9
    noise_rate: float = 0.1
    seed: int = 7

    def validate(self) -> None:
        for name in ("n_partitions", "train_size", "valid_size", "test_size",
                     "vocab_size", "tokens_per_sample"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.n_classes < 2:
            raise ValueError("n_classes must be at least 2")
        for name in ("drift_strength", "noise_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")


def _parse_record(line: str, path: Path, line_no: int) -> Sample:
    try:
        raw = json.loads(line)
    except json.JSONDecodeError as err:
        raise ValueError(f"{path}:{line_no}: malformed record: {err}") from err
    if not isinstance(raw, dict):
        raise ValueError(f"{path}:{line_no}: record is not a JSON object")
    for key in RECORD_FIELDS:
        if key not in raw:
            raise ValueError(f"{path}:{line_no}: missing field '{key}'")
    for key in ("id", "text", "group"):
        if not isinstance(raw[key], str):
            raise ValueError(f"{path}:{line_no}: field '{key}' must be a string")
    label = raw["label"]
    if isinstance(label, bool) or not isinstance(label, int) or label < 0:
        raise ValueError(f"{path}:{line_no}: field 'label' must be a non-negative integer")
    if not raw["id"]:
        raise ValueError(f"{path}:{line_no}: field 'id' must be non-empty")
    return Sample(raw["id"], raw["text"], label, raw["group"])


def read_manifest(manifest_path: str | Path) -> StreamManifest:
    path = Path(manifest_path)
    if not path.exists():
        raise FileNotFoundError(f"manifest not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise ValueError(f"{path}: malformed manifest: {err}") from err
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: manifest must be a JSON object")
    class_count = doc.get("class_count")
    if isinstance(class_count, bool) or not isinstance(class_count, int) or class_count < 1:
        raise ValueError(f"{path}: class_count must be a positive integer")
    partitions = doc.get("partitions")
    if not isinstance(partitions, list) or not partitions:
        raise ValueError(f"{path}: manifest needs a non-empty partitions list")
    for pos, entry in enumerate(partitions, start=1):
        if not isinstance(entry, dict):
            raise ValueError(f"{path}: partition {pos} must be an object")
        for split in ("train", "valid", "test"):
            if not isinstance(entry.get(split), str):
                raise ValueError(f"{path}: partition {pos} is missing a '{split}' path")
    return StreamManifest(class_count, partitions, doc.get("meta", {}))


def load_stream(manifest_path: str | Path) -> list[DatasetPartition]:
    """Load every partition named by a manifest, validating records as they stream in.

    Sample ids must be unique across the whole stream and labels must stay
    below the manifest's class_count.
    """
    path = Path(manifest_path)
    manifest = read_manifest(path)
    base = path.parent
    seen_ids: set[str] = set()
    out: list[DatasetPartition] = []
    for pos, entry in enumerate(manifest.partitions, start=1):
        splits: dict[str, list[Sample]] = {}
        for split in ("train", "valid", "test"):
            data_path = base / entry[split]
            if not data_path.exists():
                raise FileNotFoundError(f"data file not found: {data_path}")
            samples: list[Sample] = []
            for line_no, line in enumerate(data_path.read_text(encoding="utf-8").splitlines(), start=1):
                if not line.strip():
                    continue
                sample = _parse_record(line, data_path, line_no)
                if sample.label >= manifest.class_count:
                    raise ValueError(
                        f"{data_path}:{line_no}: sample '{sample.id}' has label "
                        f"{sample.label} but class_count is {manifest.class_count}"
                    )
                if sample.id in seen_ids:
                    raise ValueError(f"{data_path}:{line_no}: duplicate id '{sample.id}'")
                seen_ids.add(sample.id)
                samples.append(sample)
            splits[split] = samples
        out.append(DatasetPartition(pos, splits["train"], splits["valid"], splits["test"]))
    return out


def _ratio_counts(n_items: int, ratios: tuple[float, float, float]) -> list[int]:
    total = float(sum(ratios))
    ideal = [n_items * r / total for r in ratios]
    counts = [int(math.floor(x)) for x in ideal]
    order = sorted(range(3), key=lambda i: (-(ideal[i] - counts[i]), i))
    for i in range(n_items - sum(counts)):
        counts[order[i]] += 1
    return counts


def split_by_group(samples: list[Sample], n: int, ratios: tuple[float, float, float],
                   seed: int) -> list[DatasetPartition]:
    """Partition samples into n group-disjoint partitions, then cut each by ratios.

    Groups are shuffled once and dealt round-robin so per-partition group
    counts differ by at most one. Within a partition samples are shuffled and
    split train/valid/test by largest-remainder rounding; remainder ties are
    resolved in train, valid, test order.
    """
    if not samples:
        raise ValueError("split_by_group needs at least one sample")
    if n < 1:
        raise ValueError("n must be at least 1")
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ValueError("ratios must be three positive numbers")
    for sample in samples:
        if not sample.group:
            raise ValueError(f"sample '{sample.id}' has an empty group key")
    groups = list(dict.fromkeys(s.group for s in samples))
    if n > len(groups):
        raise ValueError(f"cannot build {n} partitions from {len(groups)} distinct groups")
    rng = np.random.default_rng(seed)
    shuffled = [groups[i] for i in rng.permutation(len(groups))]
    group_to_partition = {g: pos % n for pos, g in enumerate(shuffled)}
    buckets: list[list[Sample]] = [[] for _ in range(n)]
    for sample in samples:
        buckets[group_to_partition[sample.group]].append(sample)
    partitions = []
    for idx, bucket in enumerate(buckets, start=1):
        mixed = [bucket[i] for i in rng.permutation(len(bucket))]
        n_train, n_valid, n_test = _ratio_counts(len(mixed), ratios)
        partitions.append(DatasetPartition(
            idx,
            mixed[:n_train],
            mixed[n_train:n_train + n_valid],
            mixed[n_train + n_valid:n_train + n_valid + n_test],
        ))
    return partitions


def generate_synthetic(cfg: DriftConfig, out_dir: str | Path) -> StreamManifest:
    """Write a synthetic drifting stream under out_dir and return its manifest.

    Each class in each partition owns a signature token pool; samples draw a
    fixed majority of their tokens from that pool and the rest from shared
    background vocabulary. Generation is fully driven by cfg.seed, so repeated
    calls produce byte-identical files.
    """
    cfg.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    width = max(4, len(str(cfg.vocab_size - 1)))

    def token(i: int) -> str:
        return f"w{i:0{width}d}"

    background_count = cfg.vocab_size // 2
    signature_region = cfg.vocab_size - background_count
    pool_size = min(MAX_POOL_TOKENS, signature_region // (cfg.n_classes * cfg.n_partitions))
    if pool_size < MIN_POOL_TOKENS:
        need = 2 * cfg.n_classes * cfg.n_partitions * MIN_POOL_TOKENS
        raise ValueError(
            f"vocab_size {cfg.vocab_size} is too small to allocate disjoint signature "
            f"pools for {cfg.n_classes} classes over {cfg.n_partitions} partitions; "
            f"need at least {need}"
        )
    replace_count = int(round(cfg.drift_strength * pool_size))

    n_sig = max(cfg.tokens_per_sample // 2 + 1,
                int(round(SIGNATURE_SHARE * cfg.tokens_per_sample)))
    n_sig = min(n_sig, cfg.tokens_per_sample)
    n_bg = cfg.tokens_per_sample - n_sig

    rng = np.random.default_rng(cfg.seed)
    cursor = background_count
    pools: dict[int, list[int]] = {}
    for c in range(cfg.n_classes):
        pools[c] = list(range(cursor, cursor + pool_size))
        cursor += pool_size
    background: list[int] = list(range(background_count))
    # (class it retired from, token); entries added after the draws below, so
    # a token skips at least one partition between retiring and resurfacing
    dormant: list[tuple[int, int]] = []
    pool_schedule: dict[int, list[list[str]]] = {c: [] for c in range(cfg.n_classes)}

    manifest_partitions: list[dict[str, str]] = []
    for t in range(1, cfg.n_partitions + 1):
        if t > 1 and replace_count > 0:
            kept: dict[int, list[int]] = {}
            retiring: list[tuple[int, int]] = []
            for c in range(cfg.n_classes):
                keep = pool_size - replace_count
                keep_idx = set(np.sort(rng.choice(pool_size, size=keep, replace=False)).tolist()) if keep else set()
                kept[c] = [pools[c][i] for i in range(pool_size) if i in keep_idx]
                retiring.extend((c, pools[c][i]) for i in range(pool_size)
                                if i not in keep_idx)
            reuse_target = int(round(REUSE_SHARE * replace_count))
            for c in range(cfg.n_classes):
                eligible = [entry for entry in dormant if entry[0] != c]
                n_reuse = min(reuse_target, len(eligible))
                picked = (np.sort(rng.choice(len(eligible), size=n_reuse, replace=False)).tolist()
                          if n_reuse else [])
                reused = []
                for i in picked:
                    dormant.remove(eligible[i])
                    reused.append(eligible[i][1])
                fresh = list(range(cursor, cursor + replace_count - n_reuse))
                cursor += replace_count - n_reuse
                assert cursor <= cfg.vocab_size
                pools[c] = kept[c] + reused + fresh
            dormant.extend(retiring)
        for c in range(cfg.n_classes):
            pool_schedule[c].append([token(i) for i in pools[c]])

        bg_arr = np.array(background)
        pool_arrs = {c: np.array(pools[c]) for c in range(cfg.n_classes)}

        def make_records(split: str, size: int) -> list[dict]:
            records = []
            for i in range(size):
                c = i % cfg.n_classes
                ids = pool_arrs[c][rng.integers(0, pool_size, size=n_sig)]
                if n_bg:
                    ids = np.concatenate([ids, bg_arr[rng.integers(0, len(bg_arr), size=n_bg)]])
                rng.shuffle(ids)
                records.append({
                    "id": f"p{t:02d}-{split}-{i:05d}",
                    "text": " ".join(token(int(j)) for j in ids),
                    "label": c,
                    "group": f"part{t:02d}",
                })
            return records

        train = make_records("train", cfg.train_size)
        valid = make_records("valid", cfg.valid_size)
        test = make_records("test", cfg.test_size)

        flips = int(round(cfg.noise_rate * cfg.train_size))
        if flips:
            flip_idx = np.sort(rng.choice(cfg.train_size, size=flips, replace=False))
            for i in flip_idx.tolist():
                offset = int(rng.integers(1, cfg.n_classes))
                train[i]["label"] = (train[i]["label"] + offset) % cfg.n_classes
        entry = {}
        for split, records in (("train", train), ("valid", valid), ("test", test)):
            name = f"part{t:02d}.{split}.jsonl"
            (out / name).write_text(
                "".join(json.dumps(rec) + "\n" for rec in records), encoding="utf-8")
            entry[split] = name
        manifest_partitions.append(entry)

    meta = {
        "generator": "synthetic-drift",
        "version": __version__,
        "config": asdict(cfg),
        "signature_share": SIGNATURE_SHARE,
        "reuse_share": REUSE_SHARE,
        "pool_size": pool_size,
        "signature_pools": {str(c): pool_schedule[c] for c in range(cfg.n_classes)},
    }
    manifest = {"class_count": cfg.n_classes, "partitions": manifest_partitions, "meta": meta}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return StreamManifest(cfg.n_classes, manifest_partitions, meta)
