"""Catalogued LIBSVM binary datasets and the opt-in fetch helper.

Each entry records the sample count the experiments use (reached by shuffling
and truncating, so it divides both 20 and 100 workers) and the expected
feature dimension.  Files live in a local cache directory; downloading is
opt-in via the CLI --fetch flag.
"""

from __future__ import annotations

import bz2
import os
import urllib.request
from dataclasses import dataclass
from pathlib import Path

from efsgd.objectives import Dataset, parse_libsvm

_BASE = "https://www.csie.ntu.edu.tw/~cjlin/libsvmtools/datasets/binary/"


@dataclass(frozen=True)
class DatasetInfo:
    name: str
    url: str
    N: int  # post-truncation sample count used by the experiments
    d: int
    compressed: bool = False


DATASETS = {
    "a9a": DatasetInfo("a9a", _BASE + "a9a", 32_000, 123),
    "w8a": DatasetInfo("w8a", _BASE + "w8a", 49_700, 300),
    "gisette": DatasetInfo(
        "gisette", _BASE + "gisette_scale.bz2", 6_000, 5_000, compressed=True
    ),
    "mushrooms": DatasetInfo("mushrooms", _BASE + "mushrooms", 8_000, 112),
    "madelon": DatasetInfo("madelon", _BASE + "madelon", 2_000, 500),
    "phishing": DatasetInfo("phishing", _BASE + "phishing", 11_000, 68),
}

CACHE_ENV = "EFSGD_DATA_DIR"


def default_cache_dir() -> Path:
    return Path(os.environ.get(CACHE_ENV, Path.home() / ".cache" / "efsgd"))


class DatasetMissingError(FileNotFoundError):
    pass


def dataset_path(name: str, cache_dir: Path | None = None) -> Path:
    if name not in DATASETS:
        raise KeyError(f"unknown dataset {name!r}; known: {sorted(DATASETS)}")
    cache = Path(cache_dir) if cache_dir else default_cache_dir()
    return cache / name


def fetch_dataset(name: str, cache_dir: Path | None = None) -> Path:
    """Download a catalogued dataset into the cache; no-op when present."""
    info = DATASETS[name]
    path = dataset_path(name, cache_dir)
    if path.exists() and path.stat().st_size > 0:
        return path
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".part")
    with urllib.request.urlopen(info.url) as resp:
        payload = resp.read()
    if info.compressed:
        payload = bz2.decompress(payload)
    if not payload:
        raise IOError(f"empty download for {name} from {info.url}")
    tmp.write_bytes(payload)
    tmp.rename(path)
    return path


def load_dataset(
    name: str, cache_dir: Path | None = None, fetch: bool = False
) -> tuple[Dataset, int]:
    """Load a catalogued dataset from the cache (fetching it when allowed).

    Returns (dataset, target_rows): the truncation target the sharding step
    must apply so that the instance matches the catalogued sample count.
    """
    info = DATASETS[name]
    path = dataset_path(name, cache_dir)
    if not path.exists():
        if not fetch:
            raise DatasetMissingError(
                f"dataset {name!r} not found at {path}; pass --fetch to download"
            )
        fetch_dataset(name, cache_dir)
    with open(path, "r") as fh:
        ds = parse_libsvm(fh, name=name)
    if ds.dim > info.d:
        raise ValueError(
            f"{name}: parsed dimension {ds.dim} exceeds catalogued {info.d}"
        )
    if ds.dim < info.d:
        # trailing all-zero columns are absent from the sparse file
        ds = Dataset(ds.features.copy(), ds.labels, name=name)
        ds.features.resize((ds.features.shape[0], info.d))
    return ds, info.N
