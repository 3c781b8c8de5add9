"""Lexer for `.soc` source text."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum, auto
from typing import List, Optional

from .ast import SourceSpan
from .diagnostics import LexError

KEYWORDS = {
    "module", "instance", "callee", "type", "enum", "fn", "mut", "let",
    "if", "else", "any", "assume", "assert", "printf", "downto",
    "true", "false",
}

# Multi-character operators first so maximal munch wins.
PUNCT = [
    "->", ":=", "==", "!=", "<=", ">=", "&&", "||",
    "(", ")", "{", "}", "[", "]", "<", ">",
    ",", ";", ":", ".", "+", "-", "*", "!", "=",
]


class TokKind(Enum):
    IDENT = auto()
    KEYWORD = auto()
    INT = auto()
    STRING = auto()
    PUNCT = auto()
    EOF = auto()


@dataclass
class Token:
    kind: TokKind
    lexeme: str
    span: SourceSpan
    value: Optional[int] = None   # integer literals
    width: Optional[int] = None   # u<width> suffix
    is_hex: bool = False
    text: Optional[str] = None    # decoded string literals

    def __repr__(self) -> str:
        return f"Token({self.kind.name}, {self.lexeme!r})"


class _Cursor:
    def __init__(self, source: str, filename: str) -> None:
        self.src = source
        self.file = filename
        self.pos = 0
        self.line = 1
        self.col = 1

    def eof(self) -> bool:
        return self.pos >= len(self.src)

    def peek(self, ahead: int = 0) -> str:
        i = self.pos + ahead
        return self.src[i] if i < len(self.src) else ""

    def advance(self) -> str:
        ch = self.src[self.pos]
        self.pos += 1
        if ch == "\n":
            self.line += 1
            self.col = 1
        else:
            self.col += 1
        return ch

    def mark(self):
        return self.line, self.col

    def span_from(self, mark) -> SourceSpan:
        return SourceSpan(self.file, mark[0], mark[1], self.line, self.col)


def _is_ident_start(ch: str) -> bool:
    return ch.isalpha() or ch == "_"


def _is_ident(ch: str) -> bool:
    return ch.isalnum() or ch == "_"


def tokenize(source: str, filename: str = "<input>") -> List[Token]:
    """Full token list ending in an EOF token; comments skipped.

    Raises LexError for bad characters, unterminated comments/strings, and
    literals that exceed their declared width.
    """
    cur = _Cursor(source, filename)
    toks: List[Token] = []
    while True:
        _skip_trivia(cur)
        if cur.eof():
            toks.append(Token(TokKind.EOF, "", cur.span_from(cur.mark())))
            return toks
        mark = cur.mark()
        ch = cur.peek()
        if _is_ident_start(ch):
            start = cur.pos
            while not cur.eof() and _is_ident(cur.peek()):
                cur.advance()
            word = cur.src[start:cur.pos]
            kind = TokKind.KEYWORD if word in KEYWORDS else TokKind.IDENT
            toks.append(Token(kind, word, cur.span_from(mark)))
        elif ch.isdigit():
            toks.append(_lex_number(cur, mark))
        elif ch == '"':
            toks.append(_lex_string(cur, mark))
        else:
            for p in PUNCT:
                if cur.src.startswith(p, cur.pos):
                    for _ in p:
                        cur.advance()
                    toks.append(Token(TokKind.PUNCT, p, cur.span_from(mark)))
                    break
            else:
                cur.advance()
                raise LexError(cur.span_from(mark), f"unexpected character {ch!r}")


def _skip_trivia(cur: _Cursor) -> None:
    while not cur.eof():
        ch = cur.peek()
        if ch in " \t\r\n":
            cur.advance()
        elif ch == "/" and cur.peek(1) == "/":
            while not cur.eof() and cur.peek() != "\n":
                cur.advance()
        elif ch == "/" and cur.peek(1) == "*":
            mark = cur.mark()
            cur.advance()
            cur.advance()
            while True:
                if cur.eof():
                    raise LexError(cur.span_from(mark), "unterminated comment")
                if cur.peek() == "*" and cur.peek(1) == "/":
                    cur.advance()
                    cur.advance()
                    break
                cur.advance()
        else:
            return


def _lex_number(cur: _Cursor, mark) -> Token:
    start = cur.pos
    is_hex = False
    if cur.peek() == "0" and cur.peek(1) in ("x", "X"):
        is_hex = True
        cur.advance()
        cur.advance()
        digits = "0123456789abcdefABCDEF_"
        if cur.peek() not in digits or cur.peek() == "_":
            raise LexError(cur.span_from(mark), "expected hex digits after 0x")
        while not cur.eof() and cur.peek() in digits:
            cur.advance()
    else:
        while not cur.eof() and (cur.peek().isdigit() or cur.peek() == "_"):
            cur.advance()
    body = cur.src[start:cur.pos]
    value = int(body.replace("_", ""), 16 if is_hex else 10)

    width: Optional[int] = None
    # A u<width> suffix binds to the literal: 0x1f_ffffu31
    if cur.peek() == "u" and cur.peek(1).isdigit():
        cur.advance()
        wstart = cur.pos
        while not cur.eof() and cur.peek().isdigit():
            cur.advance()
        width = int(cur.src[wstart:cur.pos])
        if width < 1:
            raise LexError(cur.span_from(mark), "bit width must be at least 1")
        if value >= (1 << width):
            raise LexError(
                cur.span_from(mark),
                f"literal {body} does not fit in {width} bits",
            )
    if _is_ident_start(cur.peek()):
        raise LexError(cur.span_from(mark), f"malformed number literal {body!r}")
    lexeme = cur.src[start:cur.pos]
    return Token(TokKind.INT, lexeme, cur.span_from(mark),
                 value=value, width=width, is_hex=is_hex)


_STRING_ESCAPES = {"n": "\n", "t": "\t", '"': '"', "\\": "\\", "{": "{", "}": "}"}


def _lex_string(cur: _Cursor, mark) -> Token:
    cur.advance()  # opening quote
    out: List[str] = []
    raw_start = cur.pos
    while True:
        if cur.eof() or cur.peek() == "\n":
            raise LexError(cur.span_from(mark), "unterminated string literal")
        ch = cur.advance()
        if ch == '"':
            break
        if ch == "\\":
            if cur.eof():
                raise LexError(cur.span_from(mark), "unterminated string literal")
            esc = cur.advance()
            if esc not in _STRING_ESCAPES:
                raise LexError(cur.span_from(mark), f"unknown escape \\{esc}")
            if esc in ("{", "}"):
                # Keep the backslash so the printf hole scanner can tell
                # escaped braces from holes.
                out.append("\\" + esc)
            else:
                out.append(_STRING_ESCAPES[esc])
        else:
            out.append(ch)
    lexeme = cur.src[raw_start - 1:cur.pos]
    return Token(TokKind.STRING, lexeme, cur.span_from(mark), text="".join(out))
