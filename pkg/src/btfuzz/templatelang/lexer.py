"""Tokenizer for the binary template language."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum, auto

from ..errors import TemplateSyntaxError


class TokenKind(Enum):
    IDENT = auto()
    INT = auto()
    FLOAT = auto()
    STRING = auto()  # value is bytes
    CHAR = auto()  # value is int
    KEYWORD = auto()
    OP = auto()
    EOF = auto()


KEYWORDS = {
    "typedef", "struct", "enum", "local", "if", "else", "while", "for",
    "switch", "case", "default", "break", "return", "void", "true", "false",
}

# Longest operators first so the scanner is greedy.
_OPERATORS = [
    "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=", "-=", "++", "--",
    "+", "-", "*", "/", "%", "!", "~", "<", ">", "=", "?", ":", ".", ",",
    ";", "(", ")", "{", "}", "[", "]", "^", "|", "&",
]

_ESCAPES = {
    "n": 0x0A, "r": 0x0D, "t": 0x09, "0": 0x00,
    "\\": 0x5C, '"': 0x22, "'": 0x27,
}


@dataclass
class Token:
    kind: TokenKind
    value: object
    line: int
    col: int

    def __repr__(self) -> str:
        return f"Token({self.kind.name}, {self.value!r}, {self.line}:{self.col})"


def tokenize(source: str) -> list[Token]:
    """Turn template source into a token list ending with an EOF token."""
    tokens: list[Token] = []
    i = 0
    line = 1
    col = 1
    n = len(source)

    def error(msg: str):
        raise TemplateSyntaxError(msg, line, col)

    def advance(k: int = 1):
        nonlocal i, line, col
        for _ in range(k):
            if i < n and source[i] == "\n":
                line += 1
                col = 1
            else:
                col += 1
            i += 1

    while i < n:
        ch = source[i]
        if ch in " \t\r\n":
            advance()
            continue
        if source.startswith("//", i):
            while i < n and source[i] != "\n":
                advance()
            continue
        if source.startswith("/*", i):
            advance(2)
            while i < n and not source.startswith("*/", i):
                advance()
            if i >= n:
                error("unterminated block comment")
            advance(2)
            continue

        start_line, start_col = line, col

        if ch.isdigit():
            if source.startswith("0x", i) or source.startswith("0X", i):
                j = i + 2
                while j < n and source[j] in "0123456789abcdefABCDEF":
                    j += 1
                if j == i + 2:
                    error("malformed hex literal")
                tokens.append(Token(TokenKind.INT, int(source[i:j], 16), start_line, start_col))
                advance(j - i)
                continue
            j = i
            while j < n and source[j].isdigit():
                j += 1
            if j < n and source[j] == "." and j + 1 < n and source[j + 1].isdigit():
                j += 1
                while j < n and source[j].isdigit():
                    j += 1
                tokens.append(Token(TokenKind.FLOAT, float(source[i:j]), start_line, start_col))
            else:
                tokens.append(Token(TokenKind.INT, int(source[i:j]), start_line, start_col))
            advance(j - i)
            continue

        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            word = source[i:j]
            kind = TokenKind.KEYWORD if word in KEYWORDS else TokenKind.IDENT
            tokens.append(Token(kind, word, start_line, start_col))
            advance(j - i)
            continue

        if ch == '"':
            advance()
            buf = bytearray()
            while i < n and source[i] != '"':
                if source[i] == "\n":
                    error("unterminated string literal")
                if source[i] == "\\":
                    advance()
                    if i >= n:
                        error("unterminated string escape")
                    esc = source[i]
                    if esc == "x":
                        advance()
                        hexpart = source[i:i + 2]
                        if len(hexpart) < 2 or any(c not in "0123456789abcdefABCDEF" for c in hexpart):
                            error("malformed \\x escape")
                        buf.append(int(hexpart, 16))
                        advance(2)
                        continue
                    if esc not in _ESCAPES:
                        error(f"unknown escape \\{esc}")
                    buf.append(_ESCAPES[esc])
                    advance()
                    continue
                code = ord(source[i])
                if code > 0xFF:
                    error("string literals are byte strings; character out of range")
                buf.append(code)
                advance()
            if i >= n:
                error("unterminated string literal")
            advance()
            tokens.append(Token(TokenKind.STRING, bytes(buf), start_line, start_col))
            continue

        if ch == "'":
            advance()
            if i >= n:
                error("unterminated char literal")
            if source[i] == "\\":
                advance()
                esc = source[i]
                if esc == "x":
                    advance()
                    hexpart = source[i:i + 2]
                    if len(hexpart) < 2:
                        error("malformed \\x escape")
                    value = int(hexpart, 16)
                    advance(2)
                elif esc in _ESCAPES:
                    value = _ESCAPES[esc]
                    advance()
                else:
                    error(f"unknown escape \\{esc}")
            else:
                value = ord(source[i])
                if value > 0xFF:
                    error("char literal out of byte range")
                advance()
            if i >= n or source[i] != "'":
                error("unterminated char literal")
            advance()
            tokens.append(Token(TokenKind.CHAR, value, start_line, start_col))
            continue

        for op in _OPERATORS:
            if source.startswith(op, i):
                tokens.append(Token(TokenKind.OP, op, start_line, start_col))
                advance(len(op))
                break
        else:
            error(f"unexpected character {ch!r}")

    tokens.append(Token(TokenKind.EOF, None, line, col))
    return tokens
