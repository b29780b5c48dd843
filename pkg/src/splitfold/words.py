"""Free group elements as freely reduced words.

A letter is a nonzero integer: +i is the i-th generator, -i its inverse
(1-based).  Text form uses lowercase for generators and uppercase for
inverses: "a B a" parses to (1, -2, 1).  Whitespace between letters is
optional.
"""

from __future__ import annotations

from typing import Iterable, Sequence


class WordError(ValueError):
    pass


def reduce_letters(raw: Iterable[int]) -> tuple[int, ...]:
    """Freely reduce a letter sequence (cancel adjacent x, x^-1 pairs)."""
    out: list[int] = []
    for a in raw:
        if a == 0:
            raise WordError("letter 0 is not a generator")
        if out and out[-1] == -a:
            out.pop()
        else:
            out.append(a)
    return tuple(out)


class Word:
    """A freely reduced word; the empty word is the identity."""

    __slots__ = ("letters",)

    def __init__(self, letters: Iterable[int] = ()):
        self.letters = reduce_letters(letters)

    @staticmethod
    def identity() -> "Word":
        return Word()

    @staticmethod
    def gen(i: int) -> "Word":
        return Word((i,))

    def __mul__(self, other: "Word") -> "Word":
        return Word(self.letters + other.letters)

    def inverse(self) -> "Word":
        return Word(tuple(-a for a in reversed(self.letters)))

    def __len__(self) -> int:
        return len(self.letters)

    def __bool__(self) -> bool:
        return bool(self.letters)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Word) and self.letters == other.letters

    def __hash__(self) -> int:
        return hash(self.letters)

    def __repr__(self) -> str:
        return f"Word({self.to_text()!r})"

    def max_index(self) -> int:
        return max((abs(a) for a in self.letters), default=0)

    def check_rank(self, rank: int) -> "Word":
        if self.max_index() > rank:
            raise WordError(f"letter index exceeds rank {rank}: {self.to_text()}")
        return self

    def cyclic_reduce(self) -> "Word":
        ls = list(self.letters)
        while len(ls) >= 2 and ls[0] == -ls[-1]:
            ls = ls[1:-1]
        return Word(ls)

    def to_text(self) -> str:
        return " ".join(letter_to_char(a) for a in self.letters)

    @staticmethod
    def parse(text: str, rank: int | None = None) -> "Word":
        w = Word(char_to_letter(c) for c in text if not c.isspace())
        if rank is not None:
            w.check_rank(rank)
        return w


def letter_to_char(a: int) -> str:
    i = abs(a)
    if not 1 <= i <= 26:
        raise WordError(f"letter index {i} out of a..z range")
    c = chr(ord("a") + i - 1)
    return c if a > 0 else c.upper()


def char_to_letter(c: str) -> int:
    if c.islower():
        return ord(c) - ord("a") + 1
    if c.isupper():
        return -(ord(c) - ord("A") + 1)
    raise WordError(f"invalid word character {c!r}")


def reduce(raw: Sequence[int], rank: int | None = None) -> Word:
    """Public reduction entry point; validates letter indices against rank."""
    w = Word(raw)
    if rank is not None:
        w.check_rank(rank)
    return w


def compose(u: Word, v: Word) -> Word:
    return u * v


def invert(w: Word) -> Word:
    return w.inverse()
