"""Ordered class sets with a reserved blank label at index 0."""

from __future__ import annotations

import string
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidInputError, VocabularyError

BLANK_SYMBOL = "ε"  # shown as the null-emission glyph in annotations

# Single-character pools so annotations serialize as plain strings.
_SMALL_POOL = string.digits + string.ascii_lowercase + string.ascii_uppercase
_WIDE_POOL_START = 0x4E00  # contiguous CJK block, used for large vocabularies


@dataclass(frozen=True)
class Alphabet:
    """Ordered symbol set; index 0 is always the blank (null emission).

    Symbols must be unique non-empty strings. All indices used elsewhere in
    the package (count vectors, logit/probability columns) follow this order.
    """

    symbols: tuple[str, ...]

    def __post_init__(self):
        if len(self.symbols) < 2:
            raise InvalidInputError("alphabet needs the blank plus at least one class")
        if len(set(self.symbols)) != len(self.symbols):
            raise InvalidInputError("alphabet symbols must be unique")
        if any(not s for s in self.symbols):
            raise InvalidInputError("alphabet symbols must be non-empty strings")
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(self.symbols)})

    @property
    def blank_index(self) -> int:
        return 0

    @property
    def blank_symbol(self) -> str:
        return self.symbols[0]

    @property
    def size(self) -> int:
        """Number of classes including the blank."""
        return len(self.symbols)

    def __len__(self) -> int:
        return len(self.symbols)

    def index(self, symbol: str) -> int:
        try:
            return self._index[symbol]
        except KeyError:
            raise VocabularyError(f"unknown symbol {symbol!r}") from None

    def symbol(self, index: int) -> str:
        if not 0 <= index < len(self.symbols):
            raise VocabularyError(f"class index {index} out of range")
        return self.symbols[index]

    def encode(self, sequence: Iterable[str]) -> np.ndarray:
        """Map a symbol sequence (string or iterable of symbols) to indices."""
        return np.array([self.index(s) for s in sequence], dtype=np.int64)

    def decode(self, indices: Sequence[int]) -> str:
        return "".join(self.symbol(int(i)) for i in indices)


def make_alphabet(classes: int | Sequence[str], blank: str = BLANK_SYMBOL) -> Alphabet:
    """Build an alphabet from explicit class symbols or a class count.

    With an integer ``classes``, symbols are drawn from digits/letters and,
    for vocabularies beyond 62 classes, from a contiguous wide-character
    block so every symbol stays a single character.
    """
    if isinstance(classes, int):
        if classes < 1:
            raise InvalidInputError("need at least one non-blank class")
        if classes <= len(_SMALL_POOL):
            syms = list(_SMALL_POOL[:classes])
        else:
            syms = [chr(_WIDE_POOL_START + i) for i in range(classes)]
    else:
        syms = list(classes)
    if blank in syms:
        raise InvalidInputError("blank symbol collides with a class symbol")
    return Alphabet(tuple([blank] + syms))


DEFAULT_ALPHABET = make_alphabet(10)  # digit-scale vocabulary for 1D tasks
