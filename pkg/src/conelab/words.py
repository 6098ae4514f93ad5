"""Free-group word calculus.

Letters are nonzero signed integers: +k is the k-th generator, -k its
inverse. Words are stored freely reduced at all times; constructors reduce
eagerly. Serialization uses lowercase letters for generators and uppercase
for inverses ("abA" = a * b * a^-1).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

from .errors import BudgetError, ValidationError

_ALPHABET = "abcdefghijklmnopqrstuvwxyz"

# Enumeration caps. Ball sizes grow like (2n-1)^radius; guard before building.
DEFAULT_BALL_BUDGET = 500_000
LIPSCHITZ_MAX_LEN_CAP = 6


def _reduce(letters: Iterable[int]) -> tuple[int, ...]:
    out: list[int] = []
    for l in letters:
        l = int(l)
        if l == 0:
            raise ValidationError("letter 0 is not a valid signed generator index")
        if out and out[-1] == -l:
            out.pop()
        else:
            out.append(l)
    return tuple(out)


@dataclass(frozen=True)
class Word:
    """A freely reduced word; ``Word(raw)`` reduces its input eagerly."""

    letters: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "letters", _reduce(self.letters))

    def __len__(self) -> int:
        return len(self.letters)

    def __bool__(self) -> bool:
        return bool(self.letters)

    def __mul__(self, other: "Word") -> "Word":
        return Word(self.letters + other.letters)

    def __pow__(self, n: int) -> "Word":
        if n < 0:
            return (self.inverse()) ** (-n)
        w = Word()
        base = self
        # plain repeated squaring; words stay reduced throughout
        while n:
            if n & 1:
                w = w * base
            base = base * base
            n >>= 1
        return w

    def inverse(self) -> "Word":
        return Word(tuple(-l for l in reversed(self.letters)))

    def conjugate_by(self, c: "Word") -> "Word":
        """c * self * c^-1."""
        return c * self * c.inverse()

    def max_generator(self) -> int:
        return max((abs(l) for l in self.letters), default=0)

    def is_cyclically_reduced(self) -> bool:
        return len(self.letters) < 2 or self.letters[0] != -self.letters[-1]

    def __str__(self) -> str:
        return format_word(self)

    def __repr__(self) -> str:
        return f"Word({format_word(self)!r})" if self.letters else "Word()"


IDENTITY = Word()


def reduce(raw: Sequence[int]) -> Word:
    """Freely reduce a raw letter sequence. Idempotent."""
    return Word(tuple(raw))


def format_word(w: Word) -> str:
    if w.max_generator() > len(_ALPHABET):
        raise ValidationError("string form supports at most 26 generators",
                              max_generator=w.max_generator())
    return "".join(
        _ALPHABET[l - 1] if l > 0 else _ALPHABET[-l - 1].upper() for l in w.letters
    )


def parse_word(s: str) -> Word:
    letters = []
    for ch in s.strip():
        if ch.islower():
            letters.append(_ALPHABET.index(ch) + 1)
        elif ch.isupper():
            letters.append(-(_ALPHABET.index(ch.lower()) + 1))
        else:
            raise ValidationError(f"invalid word character {ch!r}", text=s)
    return Word(tuple(letters))


def cyclic_reduce(w: Word) -> tuple[Word, Word]:
    """Split w = conjugator * core * conjugator^-1 with core cyclically reduced."""
    letters = list(w.letters)
    prefix: list[int] = []
    while len(letters) >= 2 and letters[0] == -letters[-1]:
        prefix.append(letters[0])
        letters = letters[1:-1]
    return Word(tuple(letters)), Word(tuple(prefix))


def stable_norm(w: Word) -> int:
    """lim ||w^n||/n; equals the cyclically reduced length in a free group."""
    core, _ = cyclic_reduce(w)
    return len(core)


@dataclass(frozen=True)
class Automorphism:
    """Endomorphism of F_n given by one image word per positive generator.

    Invertibility is not verified; Lipschitz constants for the stable norm
    are meaningful for genuine automorphisms only.
    """

    images: tuple[Word, ...]

    def __post_init__(self):
        n = len(self.images)
        for im in self.images:
            if im.max_generator() > n:
                raise ValidationError(
                    "image uses a generator outside the rank",
                    rank=n, image=format_word(im))

    @property
    def rank(self) -> int:
        return len(self.images)

    def __call__(self, w: Word) -> Word:
        out: list[int] = []
        for l in w.letters:
            im = self.images[abs(l) - 1]
            out.extend(im.letters if l > 0 else im.inverse().letters)
        return Word(tuple(out))

    def compose(self, other: "Automorphism") -> "Automorphism":
        """self after other."""
        if self.rank != other.rank:
            raise ValidationError("rank mismatch", ranks=(self.rank, other.rank))
        return Automorphism(tuple(self(im) for im in other.images))

    @classmethod
    def identity(cls, n: int) -> "Automorphism":
        return cls(tuple(Word((k,)) for k in range(1, n + 1)))

    @classmethod
    def inner(cls, n: int, c: Word) -> "Automorphism":
        """Conjugation x -> c x c^-1."""
        return cls(tuple(Word((k,)).conjugate_by(c) for k in range(1, n + 1)))


def apply_automorphism(phi: Automorphism, w: Word) -> Word:
    return phi(w)


def ball_size(n_generators: int, radius: int) -> int:
    """Number of reduced words of length <= radius in F_n."""
    n = n_generators
    if radius < 0:
        raise ValidationError("radius must be >= 0", radius=radius)
    if n == 0:
        return 1
    if n == 1:
        return 1 + 2 * radius
    return 1 + 2 * n * ((2 * n - 1) ** radius - 1) // (2 * n - 2)


# shortlex letter order: a < A < b < B < ...
def _letter_key(l: int) -> tuple[int, int]:
    return (abs(l), 0 if l > 0 else 1)


def _ordered_letters(n: int) -> list[int]:
    return sorted([k for k in range(1, n + 1)] + [-k for k in range(1, n + 1)],
                  key=_letter_key)


def iter_reduced_words(n_generators: int, radius: int) -> Iterator[Word]:
    """Reduced words of length <= radius in shortlex order (a < A < b < B ...)."""
    letters = _ordered_letters(n_generators)
    level: list[tuple[int, ...]] = [()]
    yield IDENTITY
    for _ in range(radius):
        nxt: list[tuple[int, ...]] = []
        for w in level:
            for l in letters:
                if w and w[-1] == -l:
                    continue
                extended = w + (l,)
                nxt.append(extended)
                yield Word(extended)
        level = nxt


@dataclass(frozen=True)
class BallEnumeration:
    n_generators: int
    radius: int
    elements: tuple[Word, ...] = field(repr=False)

    def __len__(self) -> int:
        return len(self.elements)


def enumerate_ball(n_generators: int, radius: int, *,
                   budget: int = DEFAULT_BALL_BUDGET) -> BallEnumeration:
    """All reduced words of length <= radius, shortlex ordered, deduplicated."""
    if n_generators < 0 or radius < 0:
        raise ValidationError("n_generators and radius must be >= 0",
                              n_generators=n_generators, radius=radius)
    expected = ball_size(n_generators, radius)
    if expected > budget:
        raise BudgetError(
            f"ball of radius {radius} in F_{n_generators} has {expected} words, "
            f"over the budget of {budget}",
            expected=expected, budget=budget)
    elements = tuple(iter_reduced_words(n_generators, radius))
    return BallEnumeration(n_generators, radius, elements)


def stable_lipschitz_constant(phi: Automorphism, max_len: int, *,
                              cap: int = LIPSCHITZ_MAX_LEN_CAP,
                              budget: int = DEFAULT_BALL_BUDGET) -> Fraction:
    """max of stable_norm(phi(w)) / stable_norm(w) over nontrivial cyclically
    reduced words with ||w|| <= max_len.

    Exhaustive, hence deterministic. Meaningful as a stable-norm Lipschitz
    constant only when phi is an automorphism. Bounded-length ratios measure
    the constant at this scale; they are not claimed to certify the
    all-lengths constant.
    """
    if max_len < 1:
        raise ValidationError("max_len must be >= 1", max_len=max_len)
    if max_len > cap:
        raise BudgetError(f"max_len {max_len} exceeds the cap {cap}",
                          max_len=max_len, cap=cap)
    expected = ball_size(phi.rank, max_len)
    if expected > budget:
        raise BudgetError(
            f"enumeration of {expected} words exceeds the budget of {budget}",
            expected=expected, budget=budget)
    best = Fraction(0)
    for w in iter_reduced_words(phi.rank, max_len):
        if not w or not w.is_cyclically_reduced():
            continue
        ratio = Fraction(stable_norm(phi(w)), stable_norm(w))
        if ratio > best:
            best = ratio
    return best
