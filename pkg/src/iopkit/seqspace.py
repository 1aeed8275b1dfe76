"""The permutation label space for clique interaction orders.

Edge tokens are clique-local: a clique's nodes are sorted and numbered
0..n-1, and a token is the canonical pair (i, j) with i < j. The
vocabulary lists the C(n, 2) tokens in lexicographic order, so it is
shared by every clique of the same size. A full ordering of the tokens
is a permutation label; labels map bijectively onto class indices in
[0, m!) via lexicographic (Lehmer) ranking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidLabelError

Token = tuple[int, int]


@dataclass(frozen=True)
class EdgeVocab:
    """Lexicographically ordered edge tokens of an n-clique."""

    n: int
    tokens: tuple[Token, ...]

    @property
    def size(self) -> int:
        return len(self.tokens)

    @property
    def num_classes(self) -> int:
        return math.factorial(self.size)

    def id_of(self, token: Token) -> int:
        try:
            return self.tokens.index(token)
        except ValueError:
            raise InvalidLabelError(f"unknown token {token} for n={self.n}") from None

    def token(self, token_id: int) -> Token:
        return self.tokens[token_id]


@lru_cache(maxsize=None)
def vocab_for(n: int) -> EdgeVocab:
    if n < 2:
        raise InvalidLabelError(f"clique size must be >= 2, got {n}")
    tokens = tuple((i, j) for i in range(n) for j in range(i + 1, n))
    return EdgeVocab(n=n, tokens=tokens)


@dataclass(frozen=True)
class PermutationLabel:
    """An ordering of all C(n, 2) edge tokens of an n-clique."""

    n: int
    tokens: tuple[Token, ...]

    def __post_init__(self):
        vocab = vocab_for(self.n)
        if sorted(self.tokens) != list(vocab.tokens):
            raise InvalidLabelError(
                f"tokens {self.tokens} are not a permutation of the {vocab.size} "
                f"edges of an {self.n}-clique"
            )

    @property
    def m(self) -> int:
        return len(self.tokens)

    def token_ids(self) -> list[int]:
        vocab = vocab_for(self.n)
        return [vocab.id_of(t) for t in self.tokens]


def perm_to_index(label: PermutationLabel) -> int:
    """Lexicographic rank of the label among all m! orderings."""
    ids = label.token_ids()
    m = len(ids)
    rank = 0
    for i, a in enumerate(ids):
        smaller_after = sum(1 for b in ids[i + 1 :] if b < a)
        rank += smaller_after * math.factorial(m - 1 - i)
    return rank


def index_to_perm(idx: int, vocab: EdgeVocab) -> PermutationLabel:
    """Inverse of perm_to_index (factoradic decoding)."""
    m = vocab.size
    if not 0 <= idx < math.factorial(m):
        raise ValueError(f"class index {idx} out of range [0, {math.factorial(m)})")
    remaining = list(range(m))
    ids = []
    rest = idx
    for i in range(m):
        f = math.factorial(m - 1 - i)
        pos, rest = divmod(rest, f)
        ids.append(remaining.pop(pos))
    return PermutationLabel(n=vocab.n, tokens=tuple(vocab.token(i) for i in ids))


def permutation_mask(emitted: list[int], m: int) -> np.ndarray:
    """Boolean mask over token ids, False exactly at already-emitted ids.

    Consumers apply it by setting masked logits to -inf before
    argmax/softmax, which forbids repeating a token.
    """
    mask = np.ones(m, dtype=bool)
    for tok in emitted:
        mask[tok] = False
    return mask


def token_to_str(token: Token) -> str:
    i, j = token
    if j + 1 < 10:
        return f"{i + 1}{j + 1}"
    return f"{i + 1}.{j + 1}"


def tokens_to_str(tokens: list[Token] | tuple[Token, ...]) -> str:
    """Render a token sequence the way reports do, e.g. "12 23 13"."""
    return " ".join(token_to_str(t) for t in tokens)


def str_to_tokens(text: str) -> list[Token]:
    out: list[Token] = []
    for part in text.split():
        if "." in part:
            a, b = part.split(".")
        else:
            a, b = part[0], part[1:]
        out.append((int(a) - 1, int(b) - 1))
    return out


def label_to_str(label: PermutationLabel) -> str:
    return tokens_to_str(label.tokens)


def label_from_str(text: str, n: int) -> PermutationLabel:
    return PermutationLabel(n=n, tokens=tuple(str_to_tokens(text)))
