import csv
import hashlib
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, Iterable, Iterator, List, Optional, Sequence, TypeVar

import numpy as np

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

# ------------------------------------------------------------
# ---------------------- Seeding -----------------------------
# ------------------------------------------------------------

def derive_seed(root: int, *names: Any) -> int:
    """
    Derive a child seed from a root seed and a path of names.

    The same (root, names) always yields the same seed, independent of the
    order in which stages run.
    """
    key = "/".join([str(root)] + [str(name) for name in names])
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


# ------------------------------------------------------------
# ---------------------- Hashing -----------------------------
# ------------------------------------------------------------

def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def array_digest(*arrays: np.ndarray) -> str:
    """Hash a sequence of arrays bit-for-bit (used for frozen-parameter checks)."""
    h = hashlib.sha256()
    for array in arrays:
        h.update(np.ascontiguousarray(array, dtype=np.float64).tobytes())
    return h.hexdigest()


# ------------------------------------------------------------
# ---------------------- File Manager ------------------------
# ------------------------------------------------------------

class FileManager:
    """Handles file I/O operations."""

    @staticmethod
    def ensure_directory(path: str) -> None:
        """Create directory if it doesn't exist."""
        os.makedirs(path, exist_ok=True)

    @staticmethod
    def save_json(data: Any, filepath: str) -> None:
        """Save data as JSON to file. Keys are sorted so reruns are byte-identical."""
        with open(filepath, 'w') as f:
            json.dump(data, f, indent=4, sort_keys=True)
            f.write("\n")

    @staticmethod
    def load_json(filepath: str) -> Optional[Dict[str, Any]]:
        """Load JSON from file, return None if file doesn't exist."""
        if not os.path.exists(filepath):
            return None

        with open(filepath, 'r') as f:
            return json.load(f)

    @staticmethod
    def save_jsonl(lines: Iterable[str], filepath: str) -> None:
        """Write pre-serialized JSON documents, one per line."""
        with open(filepath, 'w') as f:
            for line in lines:
                f.write(line)
                f.write("\n")

    @staticmethod
    def iter_jsonl(filepath: str) -> Iterator[tuple[int, str]]:
        """Yield (1-based line number, raw line) for every non-blank line."""
        with open(filepath, 'r') as f:
            for number, line in enumerate(f, 1):
                if line.strip():
                    yield number, line

    @staticmethod
    def save_csv(rows: Iterable[Dict[str, Any]], fieldnames: Sequence[str], filepath: str) -> None:
        """Write dict rows with a fixed column order."""
        with open(filepath, 'w', newline='') as f:
            writer = csv.DictWriter(f, fieldnames=list(fieldnames), lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow(row)

    @staticmethod
    def load_csv(filepath: str) -> List[Dict[str, str]]:
        with open(filepath, 'r', newline='') as f:
            return list(csv.DictReader(f))

    @staticmethod
    def sha256_file(filepath: str) -> str:
        h = hashlib.sha256()
        with open(filepath, 'rb') as f:
            for chunk in iter(lambda: f.read(1 << 20), b""):
                h.update(chunk)
        return h.hexdigest()

file_manager = FileManager()


# ------------------------------------------------------------
# ---------------------- Concurrency -------------------------
# ------------------------------------------------------------

def run_parallel(fn: Callable[[T], R], items: Sequence[T], workers: int = 1) -> List[R]:
    """
    Apply ``fn`` to every item, optionally on a thread pool.

    Results come back in input order whatever the worker count, so seeded
    episode generation stays reproducible.
    """
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as executor:
        return list(executor.map(fn, items))
