"""Tokenizer for the SQL subset.

Produces a flat token list covering the whole input minus whitespace.
Keywords match case-insensitively and are canonicalized to lowercase;
identifier case is preserved.  String literals use single quotes with ''
as the escaped quote.  Integer tokens are unsigned digit runs (the parser
applies unary minus); their magnitude must fit a signed 64-bit value.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import LexError


class UnterminatedString(LexError):
    pass


class IllegalCharacter(LexError):
    pass


KEYWORDS = frozenset({
    "select", "from", "where", "and", "as",
    "insert", "into", "values",
    "update", "set",
    "delete",
    "create", "table", "index", "on",
    "int", "str",
    "not", "null", "primary", "key", "check",
})

# Longest match first: two-character comparison symbols before their
# one-character prefixes.
_TWO_CHAR_SYMBOLS = ("!=", "<=", ">=")
_ONE_CHAR_SYMBOLS = set("()*,;=<>+-")

INT64_MAX = 2**63 - 1


@dataclass(frozen=True)
class Token:
    kind: str  # keyword | identifier | integer | string | symbol
    text: str
    position: int  # 0-based character offset into the source text


def _is_name_start(ch: str) -> bool:
    return ch.isalpha() or ch == "_"


def _is_name_part(ch: str) -> bool:
    return ch.isalnum() or ch == "_"


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch in " \t\r\n":
            i += 1
            continue
        start = i
        if _is_name_start(ch):
            i += 1
            while i < n and _is_name_part(text[i]):
                i += 1
            word = text[start:i]
            lowered = word.lower()
            if lowered in KEYWORDS:
                tokens.append(Token("keyword", lowered, start))
            else:
                tokens.append(Token("identifier", word, start))
            continue
        if ch.isdigit():
            i += 1
            while i < n and text[i].isdigit():
                i += 1
            digits = text[start:i]
            if int(digits) > INT64_MAX:
                raise LexError(f"integer out of range at offset {start}")
            tokens.append(Token("integer", digits, start))
            continue
        if ch == "'":
            i += 1
            parts: list[str] = []
            while True:
                if i >= n:
                    raise UnterminatedString(
                        f"unterminated string starting at offset {start}")
                if text[i] == "'":
                    if i + 1 < n and text[i + 1] == "'":
                        parts.append("'")
                        i += 2
                        continue
                    i += 1
                    break
                parts.append(text[i])
                i += 1
            tokens.append(Token("string", "".join(parts), start))
            continue
        two = text[i:i + 2]
        if two in _TWO_CHAR_SYMBOLS:
            tokens.append(Token("symbol", two, start))
            i += 2
            continue
        if ch in _ONE_CHAR_SYMBOLS:
            tokens.append(Token("symbol", ch, start))
            i += 1
            continue
        raise IllegalCharacter(f"illegal character {ch!r} at offset {start}")
    return tokens
