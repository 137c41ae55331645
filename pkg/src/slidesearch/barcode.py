"""MinMax barcodes, bunch-of-barcode indexes and Hamming slide ranking.

A patch embedding of length d becomes a (d-1)-bit barcode: bit i is set
when the embedding rises from position i to i+1. A slide is indexed as the
bunch of barcodes (BoB) of its mosaic patches; slide-to-slide dissimilarity
is the median over query barcodes of the minimum Hamming distance to any
candidate barcode.

Barcodes are stored bit-packed into little-endian 64-bit words and compared
with XOR + popcount.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ._validation import as_float_array
from .errors import DataError
from .retrieval import RetrievalResult, rank_candidates

MAGIC_INDEX = b"BOB1"
_QUERY_CHUNK = 256


def _n_words(nbits: int) -> int:
    return (nbits + 63) // 64


def _tail_mask(nbits: int) -> int:
    rem = nbits % 64
    return (1 << rem) - 1 if rem else (1 << 64) - 1


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """Pack 0/1 rows into little-endian uint64 words, zero-padded."""
    bits = np.asarray(bits, dtype=np.uint8)
    squeeze = bits.ndim == 1
    if squeeze:
        bits = bits[None, :]
    if bits.ndim != 2:
        raise ValueError("bits must be 1-D or 2-D")
    nbits = bits.shape[1]
    packed = np.packbits(bits, axis=1, bitorder="little")
    pad = _n_words(nbits) * 8 - packed.shape[1]
    if pad:
        packed = np.concatenate(
            [packed, np.zeros((packed.shape[0], pad), dtype=np.uint8)],
            axis=1)
    words = packed.view("<u8")
    return words[0] if squeeze else words


def unpack_bits(words: np.ndarray, nbits: int) -> np.ndarray:
    words = np.ascontiguousarray(words, dtype="<u8")
    squeeze = words.ndim == 1
    if squeeze:
        words = words[None, :]
    raw = words.view(np.uint8)
    bits = np.unpackbits(raw, axis=1, bitorder="little")[:, :nbits]
    return bits[0] if squeeze else bits


@dataclass(frozen=True, eq=False)
class Barcode:
    """One packed MinMax barcode of nbits bits."""

    nbits: int
    words: np.ndarray

    def __post_init__(self):
        words = np.ascontiguousarray(self.words, dtype="<u8")
        if words.ndim != 1 or words.size != _n_words(self.nbits):
            raise ValueError(
                f"expected {_n_words(self.nbits)} words for "
                f"{self.nbits} bits, got shape {words.shape}")
        object.__setattr__(self, "words", words)

    def bits(self) -> np.ndarray:
        return unpack_bits(self.words, self.nbits)

    def __eq__(self, other) -> bool:
        return (isinstance(other, Barcode) and self.nbits == other.nbits
                and bool(np.all(self.words == other.words)))


def minmax_binarize(v) -> Barcode:
    """Barcode of a single embedding: bit i = 1 iff v[i+1] > v[i]."""
    v = as_float_array(v, "v", ndim=1)
    if v.shape[0] < 2:
        raise ValueError(
            f"embedding must have length >= 2, got {v.shape[0]}")
    bits = (v[1:] > v[:-1]).astype(np.uint8)
    return Barcode(nbits=bits.shape[0], words=pack_bits(bits))


def hamming(a: Barcode, b: Barcode) -> int:
    """Number of differing bits between two equal-length barcodes."""
    if a.nbits != b.nbits:
        raise ValueError(
            f"barcode length mismatch: {a.nbits} vs {b.nbits}")
    return int(np.bitwise_count(a.words ^ b.words).sum())


@dataclass(frozen=True, eq=False)
class BoB:
    """Bunch of barcodes for one slide, one row of words per mosaic patch."""

    slide_id: str
    nbits: int
    words: np.ndarray

    def __post_init__(self):
        words = np.ascontiguousarray(self.words, dtype="<u8")
        if words.ndim != 2 or words.shape[1] != _n_words(self.nbits):
            raise ValueError(
                f"expected (n, {_n_words(self.nbits)}) words for "
                f"{self.nbits} bits, got shape {words.shape}")
        if words.shape[0] == 0:
            raise ValueError(f"BoB for {self.slide_id!r} is empty")
        object.__setattr__(self, "words", words)

    def __len__(self) -> int:
        return int(self.words.shape[0])

    def barcodes(self) -> list[Barcode]:
        return [Barcode(self.nbits, row) for row in self.words]


def encode_minmax(embeddings, slide_id: str = "") -> BoB:
    """Barcode every row of an (n, d) embedding block."""
    embeddings = as_float_array(embeddings, "embeddings", ndim=2)
    n, d = embeddings.shape
    if n == 0:
        raise ValueError("cannot encode an empty embedding block")
    if d < 2:
        raise ValueError(f"embedding dim must be >= 2, got {d}")
    bits = (embeddings[:, 1:] > embeddings[:, :-1]).astype(np.uint8)
    return BoB(slide_id=slide_id, nbits=d - 1, words=pack_bits(bits))


def min_hamming(query_words: np.ndarray,
                candidate_words: np.ndarray) -> np.ndarray:
    """Per query row, the minimum Hamming distance to any candidate row."""
    nq = query_words.shape[0]
    out = np.empty(nq, dtype=np.int64)
    for start in range(0, nq, _QUERY_CHUNK):
        block = query_words[start:start + _QUERY_CHUNK]
        xored = block[:, None, :] ^ candidate_words[None, :, :]
        dists = np.bitwise_count(xored).sum(axis=2, dtype=np.int64)
        out[start:start + _QUERY_CHUNK] = dists.min(axis=1)
    return out


def slide_distance(query: BoB, candidate: BoB,
                   normalize: bool = False) -> float:
    """Median over query barcodes of the min Hamming to the candidate.

    Even barcode counts take the mean of the two central values. With
    ``normalize`` the median is divided by the barcode bit-length.
    """
    if query.nbits != candidate.nbits:
        raise ValueError(
            f"barcode length mismatch: {query.nbits} vs {candidate.nbits}")
    mins = min_hamming(query.words, candidate.words)
    value = float(np.median(mins))
    return value / query.nbits if normalize else value


@dataclass(frozen=True)
class IndexEntry:
    slide_id: str
    patient_id: str
    organ: str
    diagnosis: str
    bob: BoB


@dataclass(frozen=True)
class BarcodeIndex:
    """Immutable searchable collection of per-slide BoBs."""

    nbits: int
    entries: tuple[IndexEntry, ...]
    _by_organ: dict = field(default_factory=dict, repr=False, compare=False)
    _by_slide: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        by_organ: dict[str, list[int]] = {}
        by_slide: dict[str, int] = {}
        for pos, entry in enumerate(self.entries):
            if entry.bob.nbits != self.nbits:
                raise ValueError(
                    f"entry {entry.slide_id!r} has {entry.bob.nbits} bits, "
                    f"index uses {self.nbits}")
            if entry.slide_id in by_slide:
                raise ValueError(f"duplicate slide_id {entry.slide_id!r}")
            by_slide[entry.slide_id] = pos
            by_organ.setdefault(entry.organ, []).append(pos)
        object.__setattr__(self, "_by_organ", by_organ)
        object.__setattr__(self, "_by_slide", by_slide)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def organs(self) -> list[str]:
        return sorted(self._by_organ)

    def entry(self, slide_id: str) -> IndexEntry:
        pos = self._by_slide.get(slide_id)
        if pos is None:
            raise DataError(f"slide {slide_id!r} not in index")
        return self.entries[pos]

    def organ_entries(self, organ: str) -> list[IndexEntry]:
        return [self.entries[p] for p in self._by_organ.get(organ, [])]

    def save(self, path) -> None:
        path = Path(path)
        with open(path, "wb") as fh:
            fh.write(MAGIC_INDEX)
            fh.write(struct.pack("<II", self.nbits, len(self.entries)))
            for entry in self.entries:
                for text in (entry.slide_id, entry.patient_id,
                             entry.organ, entry.diagnosis):
                    raw = text.encode("utf-8")
                    if len(raw) > 0xFFFF:
                        raise ValueError(f"string too long: {text[:32]!r}...")
                    fh.write(struct.pack("<H", len(raw)))
                    fh.write(raw)
                fh.write(struct.pack("<I", len(entry.bob)))
                fh.write(np.ascontiguousarray(
                    entry.bob.words, dtype="<u8").tobytes())

    @classmethod
    def load(cls, path) -> "BarcodeIndex":
        path = Path(path)
        if not path.exists():
            raise DataError(f"index file not found: {path}")
        with open(path, "rb") as fh:
            data = fh.read()
        off = 0

        def take(count: int) -> bytes:
            nonlocal off
            if off + count > len(data):
                raise DataError(f"truncated index file: {path}")
            piece = data[off:off + count]
            off += count
            return piece

        if take(4) != MAGIC_INDEX:
            raise DataError(f"{path} is not a barcode index (bad magic)")
        nbits, n_entries = struct.unpack("<II", take(8))
        if nbits < 1:
            raise DataError(f"{path}: invalid barcode length {nbits}")
        words_per = _n_words(nbits)
        mask = np.uint64(_tail_mask(nbits))
        entries = []
        for _ in range(n_entries):
            texts = []
            for _ in range(4):
                (length,) = struct.unpack("<H", take(2))
                texts.append(take(length).decode("utf-8"))
            (count,) = struct.unpack("<I", take(4))
            if count < 1:
                raise DataError(
                    f"{path}: entry {texts[0]!r} has no barcodes")
            words = np.frombuffer(
                take(count * words_per * 8), dtype="<u8"
            ).reshape(count, words_per).copy()
            if np.any(words[:, -1] & ~mask):
                raise DataError(
                    f"{path}: entry {texts[0]!r} has bits set past "
                    f"bit {nbits}")
            entries.append(IndexEntry(
                slide_id=texts[0], patient_id=texts[1], organ=texts[2],
                diagnosis=texts[3],
                bob=BoB(slide_id=texts[0], nbits=nbits, words=words)))
        if off != len(data):
            raise DataError(f"{path}: {len(data) - off} trailing bytes")
        return cls(nbits=nbits, entries=tuple(entries))


def build_index(items: Iterable[tuple[str, str, str, str, BoB]]
                ) -> BarcodeIndex:
    """Assemble an index from (slide_id, patient_id, organ, diagnosis, BoB)."""
    entries = tuple(IndexEntry(*item) for item in items)
    if not entries:
        raise DataError("cannot build an empty index")
    return BarcodeIndex(nbits=entries[0].bob.nbits, entries=entries)


def bob_search(query: BoB, query_patient: str, query_organ: str,
               index: BarcodeIndex, n: int, model_name: str = "bob",
               normalize: bool = False) -> RetrievalResult:
    """Rank same-organ slides of other patients by median-of-min Hamming."""
    candidates: list[tuple[str, float]] = []
    for entry in index.organ_entries(query_organ):
        if entry.patient_id == query_patient:
            continue
        candidates.append((
            entry.slide_id,
            slide_distance(query, entry.bob, normalize=normalize)))
    return rank_candidates(candidates, n, query.slide_id, model_name)


def search_slide(index: BarcodeIndex, slide_id: str, n: int,
                 model_name: str = "bob",
                 normalize: bool = False) -> RetrievalResult:
    """LOPO search for a slide already present in the index."""
    entry = index.entry(slide_id)
    return bob_search(entry.bob, entry.patient_id, entry.organ, index, n,
                      model_name=model_name, normalize=normalize)


def encode_mosaic(embeddings: np.ndarray, selected: Sequence[int],
                  slide_id: str = "") -> BoB:
    """Barcode only the mosaic-selected rows of a patch block."""
    selected = np.asarray(selected, dtype=np.int64)
    return encode_minmax(np.asarray(embeddings)[selected], slide_id=slide_id)
