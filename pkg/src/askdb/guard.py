"""Read-only SQL statement guard.

A small hand-rolled lexer classifies the statement into tokens, and the
sanitizer rejects anything that is not a single SELECT/WITH statement free of
mutating keywords. Decisions are made on keyword-kind tokens only, so deny-list
words inside string literals or identifiers (updated_at, 'drop it') never
trigger a rejection; comments are scanned separately because they are a known
smuggling channel.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence


class TokenKind(str, Enum):
    KEYWORD = "keyword"
    IDENTIFIER = "identifier"
    STRING_LITERAL = "string_literal"
    NUMBER = "number"
    OPERATOR = "operator"
    PUNCTUATION = "punctuation"
    COMMENT = "comment"


@dataclass(frozen=True)
class SqlToken:
    kind: TokenKind
    text: str
    offset: int


class SqlLexError(ValueError):
    """Input could not be tokenized (unterminated literal/comment, stray byte)."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


DEFAULT_DENY_LIST: tuple[str, ...] = (
    "DROP",
    "ALTER",
    "UPDATE",
    "INSERT",
    "DELETE",
    "TRUNCATE",
    "CREATE",
    "GRANT",
    "REVOKE",
    "MERGE",
    "REPLACE",
    "ATTACH",
    "DETACH",
    "PRAGMA",
    "EXEC",
    "EXECUTE",
)

# Words recognized as keywords by the lexer. The deny list is part of this set
# so that a denied word is always lexed as a keyword, never an identifier.
_BASE_KEYWORDS = frozenset(
    {
        "select", "from", "where", "group", "by", "having", "order", "limit",
        "offset", "as", "and", "or", "not", "in", "is", "null", "like",
        "between", "distinct", "all", "any", "union", "intersect", "except",
        "exists", "case", "when", "then", "else", "end", "join", "inner",
        "left", "right", "full", "outer", "cross", "natural", "on", "using",
        "with", "recursive", "asc", "desc", "cast", "collate", "escape",
        "glob", "regexp", "values", "current_date", "current_time",
        "current_timestamp",
    }
    | {w.lower() for w in DEFAULT_DENY_LIST}
)

_OPERATORS = (
    "||", "<<", ">>", "<=", ">=", "<>", "!=", "==",
    "=", "<", ">", "+", "-", "*", "/", "%", "|", "&", "~",
)

_PUNCTUATION = {"(", ")", ",", ";", "."}

_WORD_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_NUMBER_RE = re.compile(r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")


def tokenize_sql(text: str, extra_keywords: Iterable[str] = ()) -> list[SqlToken]:
    """Tokenize a SQL statement, preserving offsets.

    Concatenating token texts at their offsets, with the original whitespace
    in the gaps, reconstructs the input exactly. extra_keywords widens the
    keyword set (used when the deny list is overridden with dialect words the
    base set does not know).
    """
    keywords = _BASE_KEYWORDS | {w.lower() for w in extra_keywords}
    tokens: list[SqlToken] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if text.startswith("--", i):
            end = text.find("\n", i)
            end = n if end == -1 else end
            tokens.append(SqlToken(TokenKind.COMMENT, text[i:end], i))
            i = end
            continue
        if text.startswith("/*", i):
            end = text.find("*/", i + 2)
            if end == -1:
                raise SqlLexError("unterminated block comment", i)
            tokens.append(SqlToken(TokenKind.COMMENT, text[i : end + 2], i))
            i = end + 2
            continue
        if ch == "'":
            j = i + 1
            while True:
                j = text.find("'", j)
                if j == -1:
                    raise SqlLexError("unterminated string literal", i)
                if j + 1 < n and text[j + 1] == "'":  # '' escapes a quote
                    j += 2
                    continue
                break
            tokens.append(SqlToken(TokenKind.STRING_LITERAL, text[i : j + 1], i))
            i = j + 1
            continue
        if ch == '"':
            j = i + 1
            while True:
                j = text.find('"', j)
                if j == -1:
                    raise SqlLexError("unterminated quoted identifier", i)
                if j + 1 < n and text[j + 1] == '"':
                    j += 2
                    continue
                break
            tokens.append(SqlToken(TokenKind.IDENTIFIER, text[i : j + 1], i))
            i = j + 1
            continue
        m = _NUMBER_RE.match(text, i)
        if m and (ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit())):
            tokens.append(SqlToken(TokenKind.NUMBER, m.group(), i))
            i = m.end()
            continue
        m = _WORD_RE.match(text, i)
        if m:
            word = m.group()
            kind = TokenKind.KEYWORD if word.lower() in keywords else TokenKind.IDENTIFIER
            tokens.append(SqlToken(kind, word, i))
            i = m.end()
            continue
        for op in _OPERATORS:
            if text.startswith(op, i):
                tokens.append(SqlToken(TokenKind.OPERATOR, op, i))
                i += len(op)
                break
        else:
            if ch in _PUNCTUATION:
                tokens.append(SqlToken(TokenKind.PUNCTUATION, ch, i))
                i += 1
            else:
                raise SqlLexError(f"unexpected character {ch!r}", i)
    return tokens


@dataclass(frozen=True)
class Violation:
    rule: str  # forbidden_keyword | multiple_statements | not_select | comment_smuggling | lex_error
    detail: str
    offset: int


@dataclass(frozen=True)
class SanitizationVerdict:
    allowed: bool
    violations: tuple[Violation, ...]

    def __post_init__(self) -> None:
        if self.allowed and self.violations:
            raise ValueError("an allowed verdict cannot carry violations")
        if not self.allowed and not self.violations:
            raise ValueError("a rejected verdict must carry at least one violation")


def load_deny_list(path: str | Path) -> tuple[str, ...]:
    """Read a deny-list override file: one keyword per line, blanks ignored."""
    words = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        word = line.strip()
        if word:
            words.append(word.upper())
    if not words:
        raise ValueError(f"deny list file {path} contains no keywords")
    return tuple(words)


def sanitize(sql: str, deny_list: Sequence[str] | None = None) -> SanitizationVerdict:
    """Decide whether a statement is a single, read-only SELECT/WITH.

    All applicable violations are reported, not just the first. A statement
    that cannot even be lexed is rejected outright, since nothing can be
    proven about it.
    """
    deny = frozenset(w.upper() for w in (deny_list or DEFAULT_DENY_LIST))
    try:
        tokens = tokenize_sql(sql, extra_keywords=deny)
    except SqlLexError as exc:
        return SanitizationVerdict(
            allowed=False,
            violations=(Violation("lex_error", str(exc), exc.offset),),
        )

    violations: list[Violation] = []

    for tok in tokens:
        if tok.kind is TokenKind.KEYWORD and tok.text.upper() in deny:
            violations.append(
                Violation("forbidden_keyword", tok.text.upper(), tok.offset)
            )

    # A single trailing semicolon is tolerated; any token after one is not.
    for idx, tok in enumerate(tokens):
        if tok.kind is TokenKind.PUNCTUATION and tok.text == ";":
            if idx + 1 < len(tokens):
                violations.append(
                    Violation(
                        "multiple_statements",
                        "statement continues after semicolon",
                        tok.offset,
                    )
                )
            break

    first_keyword = next((t for t in tokens if t.kind is TokenKind.KEYWORD), None)
    if first_keyword is None or first_keyword.text.lower() not in ("select", "with"):
        found = first_keyword.text.upper() if first_keyword else "none"
        offset = first_keyword.offset if first_keyword else 0
        violations.append(
            Violation("not_select", f"first keyword is {found}", offset)
        )

    deny_word_re = re.compile(
        r"\b(" + "|".join(re.escape(w) for w in sorted(deny)) + r")\b", re.IGNORECASE
    )
    for tok in tokens:
        if tok.kind is TokenKind.COMMENT:
            m = deny_word_re.search(tok.text)
            if m:
                violations.append(
                    Violation("comment_smuggling", m.group().upper(), tok.offset)
                )

    return SanitizationVerdict(allowed=not violations, violations=tuple(violations))
