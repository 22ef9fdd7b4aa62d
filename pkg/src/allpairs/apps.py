"""Application contract and the two built-in all-pairs applications.

An application defines how one item is loaded (file path, parse on CPU,
preprocess on a device) and how two loaded items are compared; the runtime
owns caching, scheduling, and data movement. Items are addressed by dense
integer keys 0..n-1.
"""

from __future__ import annotations

import enum
import gzip
import math
import os
import struct
from dataclasses import dataclass

from .errors import MalformedInput, SlotOverflow
from .rng import mix64, normal01

ItemKey = int


class Stage(enum.IntEnum):
    """Progress of one item through the load pipeline; only moves forward."""

    RAW_FILE = 0
    PARSED = 1
    PREPROCESSED = 2


@dataclass(frozen=True)
class ItemData:
    """Loaded bytes for one item at a given pipeline stage.

    ``sim_bytes`` is the logical size used for transfer/IO timing and slot
    capacity checks; it defaults to the physical payload length. The
    synthetic application carries small physical payloads with large
    logical sizes so that desk-scale simulations stay cheap.
    """

    stage: Stage
    payload: bytes
    sim_bytes: int = -1

    def __post_init__(self) -> None:
        if self.sim_bytes < 0:
            object.__setattr__(self, "sim_bytes", len(self.payload))

    @property
    def byte_length(self) -> int:
        return len(self.payload)


@dataclass(frozen=True)
class PairResult:
    """Outcome of comparing items left < right."""

    left: ItemKey
    right: ItemKey
    value: float
    match: bool | None = None

    def __post_init__(self) -> None:
        if not self.left < self.right:
            raise ValueError(f"pair must satisfy left < right, got ({self.left}, {self.right})")


def require_stage(data: ItemData, stage: Stage) -> None:
    if data.stage != stage:
        raise ValueError(f"expected stage {stage.name}, got {data.stage.name}")


class Application:
    """Base contract for an all-pairs application.

    Subclasses provide the five pipeline callbacks. All callbacks must be
    deterministic per key/pair and safe to call concurrently for distinct
    keys; they may only read application configuration.
    """

    name = "app"
    n: int
    slot_size: int

    def __init__(self, n: int, slot_size: int):
        if n < 1:
            raise ValueError(f"item count must be >= 1, got {n}")
        if slot_size <= 0:
            raise ValueError("slot_size must be positive")
        self.n = n
        self.slot_size = slot_size

    # -- load pipeline -----------------------------------------------------
    def path_for_key(self, key: ItemKey) -> str:
        raise NotImplementedError

    def fetch_raw(self, path: str) -> bytes:
        """Produce the raw file content for a path (backs the storage server)."""
        raise NotImplementedError

    def raw_size(self, key: ItemKey) -> int:
        """Raw file size in bytes, used for I/O timing without materializing."""
        return len(self.fetch_raw(self.path_for_key(key)))

    def parse(self, key: ItemKey, raw: ItemData) -> ItemData:
        raise NotImplementedError

    def preprocess(self, key: ItemKey, parsed: ItemData) -> ItemData:
        raise NotImplementedError

    # -- comparison pipeline -----------------------------------------------
    def compare(self, left: tuple[ItemKey, ItemData], right: tuple[ItemKey, ItemData]) -> bytes:
        raise NotImplementedError

    def postprocess(self, pair: tuple[ItemKey, ItemKey], raw: bytes) -> PairResult:
        raise NotImplementedError

    # -- cost model ----------------------------------------------------------
    def stage_cost(self, stage: str, i: ItemKey, j: ItemKey | None = None) -> float | None:
        """Simulated duration of a stage in seconds, or None for a nominal default."""
        return None

    def describe(self) -> dict:
        return {"kind": self.name, "n": self.n, "slot_size": self.slot_size}


def _check_slot(app: Application, data: ItemData) -> ItemData:
    if data.sim_bytes > app.slot_size:
        raise SlotOverflow(
            f"preprocessed item of {data.sim_bytes} bytes exceeds slot size {app.slot_size}")
    return data


def lognormal_duration(mean: float, std: float, seed: int) -> float:
    """Deterministic lognormal draw with the given mean and standard deviation.

    Parameterized by moment matching; std=0 degenerates to the mean.
    """
    if mean <= 0.0:
        return 0.0
    if std <= 0.0:
        return mean
    var_ln = math.log1p((std / mean) ** 2)
    sigma = math.sqrt(var_ln)
    mu = math.log(mean) - 0.5 * var_ln
    return math.exp(mu + sigma * normal01(seed))


_STAGE_IDS = {"io": 1, "parse": 2, "upload": 3, "preprocess": 4,
              "compare": 5, "download": 6, "postprocess": 7}


class SyntheticApp(Application):
    """Configurable-cost workload over pseudo-random payloads.

    Stage durations are drawn per (key/pair, stage) from lognormal
    distributions, so the same pair costs the same regardless of schedule
    or execution mode. Comparison values are deterministic hashes of the
    pair, giving a reproducible result matrix.
    """

    name = "synthetic"

    def __init__(self, n: int, slot_size: int = 1 << 16, *, seed: int = 0,
                 payload_bytes: int = 64, file_bytes: int | None = None,
                 item_bytes: int | None = None,
                 costs: dict[str, tuple[float, float]] | None = None):
        super().__init__(n, slot_size)
        self.seed = seed
        self.payload_bytes = payload_bytes
        # logical sizes for timing; default to the physical payload size
        self.file_bytes = file_bytes if file_bytes is not None else payload_bytes
        self.item_bytes = item_bytes if item_bytes is not None else min(slot_size, self.file_bytes)
        self.costs = dict(costs or {})

    def path_for_key(self, key: ItemKey) -> str:
        return f"items/{key:06d}.bin"

    def fetch_raw(self, path: str) -> bytes:
        key = int(os.path.basename(path).split(".")[0])
        out = bytearray()
        state = mix64(self.seed, 0xF11E, key)
        while len(out) < self.payload_bytes:
            state = mix64(state)
            out += state.to_bytes(8, "little")
        return bytes(out[: self.payload_bytes])

    def raw_size(self, key: ItemKey) -> int:
        return self.file_bytes

    def parse(self, key: ItemKey, raw: ItemData) -> ItemData:
        require_stage(raw, Stage.RAW_FILE)
        return ItemData(Stage.PARSED, raw.payload, sim_bytes=self.item_bytes)

    def preprocess(self, key: ItemKey, parsed: ItemData) -> ItemData:
        require_stage(parsed, Stage.PARSED)
        return _check_slot(self, ItemData(Stage.PREPROCESSED, parsed.payload,
                                          sim_bytes=parsed.sim_bytes))

    def compare(self, left: tuple[ItemKey, ItemData], right: tuple[ItemKey, ItemData]) -> bytes:
        (i, a), (j, b) = left, right
        require_stage(a, Stage.PREPROCESSED)
        require_stage(b, Stage.PREPROCESSED)
        if not i < j:
            raise ValueError(f"pairs are evaluated with left < right, got ({i}, {j})")
        value = mix64(self.seed, 0xC0403A3E, i, j) / float(1 << 64)
        return struct.pack("<d", value)

    def postprocess(self, pair: tuple[ItemKey, ItemKey], raw: bytes) -> PairResult:
        (value,) = struct.unpack("<d", raw)
        return PairResult(pair[0], pair[1], value)

    def stage_cost(self, stage: str, i: ItemKey, j: ItemKey | None = None) -> float | None:
        spec = self.costs.get(stage)
        if spec is None:
            return None
        mean, std = spec
        seed = mix64(self.seed, 0xD07A7109, _STAGE_IDS.get(stage, 0), i, -1 if j is None else j)
        return lognormal_duration(mean, std, seed)

    def describe(self) -> dict:
        out = super().describe()
        out.update(seed=self.seed, payload_bytes=self.payload_bytes,
                   file_bytes=self.file_bytes, item_bytes=self.item_bytes,
                   costs={k: list(v) for k, v in self.costs.items()})
        return out


# -- composition-vector similarity over a text corpus ------------------------

_CV_HEADER = struct.Struct("<I")
_CV_COUNT = struct.Struct("<QI")
_CV_FREQ = struct.Struct("<Qd")


def kmer_counts(text: str, k: int) -> dict[int, int]:
    """Multiset of length-k substrings of the whitespace-stripped text.

    Tokens are identified by the big-endian integer value of their UTF-8
    bytes, which preserves lexicographic order for equal-length tokens.
    """
    cleaned = "".join(text.split()).upper()
    counts: dict[int, int] = {}
    for pos in range(len(cleaned) - k + 1):
        token = int.from_bytes(cleaned[pos:pos + k].encode("utf-8"), "big")
        counts[token] = counts.get(token, 0) + 1
    return counts


class CompositionVectorApp(Application):
    """Pairwise cosine similarity of k-mer frequency vectors over a corpus.

    Each corpus document is reduced to a sparse vector of k-mer frequencies;
    comparing two documents is a sparse dot product normalized by vector
    magnitudes. Corpus files may be plain text or gzip-compressed.
    """

    name = "cv"

    def __init__(self, corpus_dir: str, *, k: int = 3, threshold: float = 0.5,
                 slot_size: int = 1 << 20, n: int | None = None):
        if not 1 <= k <= 8:
            raise ValueError("k must be in 1..8 so token ids fit in 64 bits")
        files = sorted(
            os.path.join(corpus_dir, name)
            for name in os.listdir(corpus_dir)
            if os.path.isfile(os.path.join(corpus_dir, name))
        )
        if not files:
            raise ValueError(f"no corpus files found in {corpus_dir}")
        if n is not None:
            files = files[:n]
        super().__init__(len(files), slot_size)
        self.files = files
        self.k = k
        self.threshold = threshold

    def path_for_key(self, key: ItemKey) -> str:
        return self.files[key]

    def fetch_raw(self, path: str) -> bytes:
        with open(path, "rb") as fh:
            return fh.read()

    def parse(self, key: ItemKey, raw: ItemData) -> ItemData:
        require_stage(raw, Stage.RAW_FILE)
        blob = raw.payload
        if self.path_for_key(key).endswith(".gz"):
            blob = gzip.decompress(blob)
        try:
            text = blob.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedInput(f"{self.path_for_key(key)}: not valid UTF-8") from exc
        counts = kmer_counts(text, self.k)
        if not counts:
            raise MalformedInput(
                f"{self.path_for_key(key)}: no {self.k}-mers (empty or too short)")
        out = bytearray(_CV_HEADER.pack(len(counts)))
        for token in sorted(counts):
            out += _CV_COUNT.pack(token, counts[token])
        return ItemData(Stage.PARSED, bytes(out))

    def preprocess(self, key: ItemKey, parsed: ItemData) -> ItemData:
        require_stage(parsed, Stage.PARSED)
        (dim,) = _CV_HEADER.unpack_from(parsed.payload, 0)
        entries = []
        total = 0
        off = _CV_HEADER.size
        for _ in range(dim):
            token, count = _CV_COUNT.unpack_from(parsed.payload, off)
            off += _CV_COUNT.size
            entries.append((token, count))
            total += count
        out = bytearray(_CV_HEADER.pack(dim))
        for token, count in entries:
            out += _CV_FREQ.pack(token, count / total)
        return _check_slot(self, ItemData(Stage.PREPROCESSED, bytes(out)))

    @staticmethod
    def _vector(data: ItemData) -> list[tuple[int, float]]:
        (dim,) = _CV_HEADER.unpack_from(data.payload, 0)
        off = _CV_HEADER.size
        out = []
        for _ in range(dim):
            token, freq = _CV_FREQ.unpack_from(data.payload, off)
            off += _CV_FREQ.size
            out.append((token, freq))
        return out

    def compare(self, left: tuple[ItemKey, ItemData], right: tuple[ItemKey, ItemData]) -> bytes:
        (i, a), (j, b) = left, right
        require_stage(a, Stage.PREPROCESSED)
        require_stage(b, Stage.PREPROCESSED)
        if not i < j:
            raise ValueError(f"pairs are evaluated with left < right, got ({i}, {j})")
        va, vb = self._vector(a), self._vector(b)
        dot = 0.0
        ia = ib = 0
        while ia < len(va) and ib < len(vb):
            ta, fa = va[ia]
            tb, fb = vb[ib]
            if ta == tb:
                dot += fa * fb
                ia += 1
                ib += 1
            elif ta < tb:
                ia += 1
            else:
                ib += 1
        norm_a = math.sqrt(sum(f * f for _, f in va))
        norm_b = math.sqrt(sum(f * f for _, f in vb))
        cosine = dot / (norm_a * norm_b) if norm_a > 0 and norm_b > 0 else 0.0
        return struct.pack("<d", cosine)

    def postprocess(self, pair: tuple[ItemKey, ItemKey], raw: bytes) -> PairResult:
        (value,) = struct.unpack("<d", raw)
        return PairResult(pair[0], pair[1], value, match=value >= self.threshold)

    def describe(self) -> dict:
        out = super().describe()
        out.update(k=self.k, threshold=self.threshold, corpus=[os.path.basename(f) for f in self.files])
        return out
