import pytest

from soclang.diagnostics import LexError
from soclang.lexer import TokKind, tokenize


def kinds(toks):
    return [(t.kind, t.lexeme) for t in toks]


def test_hex_literal_with_separators_and_width_suffix():
    toks = tokenize("0x1f_ffffu31")
    assert toks[0].kind is TokKind.INT
    assert toks[0].value == 0x1FFFFF
    assert toks[0].width == 31
    assert toks[0].is_hex
    assert toks[-1].kind is TokKind.EOF


def test_long_hex_literal():
    toks = tokenize("0x8000_0000_0070u48")
    assert toks[0].value == 0x8000_0000_0070
    assert toks[0].width == 48


def test_decimal_with_separators():
    toks = tokenize("1_000_000")
    assert toks[0].value == 1_000_000
    assert toks[0].width is None


def test_any_bool_token_stream():
    toks = tokenize("any<Bool>")
    assert kinds(toks[:-1]) == [
        (TokKind.KEYWORD, "any"),
        (TokKind.PUNCT, "<"),
        (TokKind.IDENT, "Bool"),
        (TokKind.PUNCT, ">"),
    ]


def test_literal_exceeding_declared_width_is_an_error():
    with pytest.raises(LexError, match="does not fit in 16 bits"):
        tokenize("0x1_0000u16")


def test_width_boundary_is_accepted():
    assert tokenize("0xffffu16")[0].value == 0xFFFF


def test_zero_width_suffix_rejected():
    with pytest.raises(LexError, match="at least 1"):
        tokenize("1u0")


def test_comments_are_skipped():
    toks = tokenize("a /* b */ c // d\n e")
    assert [t.lexeme for t in toks[:-1]] == ["a", "c", "e"]


def test_unterminated_comment():
    with pytest.raises(LexError, match="unterminated comment"):
        tokenize("/* never ends")


def test_unterminated_string():
    with pytest.raises(LexError, match="unterminated string"):
        tokenize('"no closing quote')


def test_string_escapes():
    tok = tokenize(r'"line\n\ttab \"q\" \\"')[0]
    assert tok.text == 'line\n\ttab "q" \\'


def test_arrow_and_downto():
    toks = tokenize("a.b -> c; x[6 downto 5]")
    lexemes = [t.lexeme for t in toks[:-1]]
    assert "->" in lexemes
    assert "downto" in lexemes


def test_bad_character():
    with pytest.raises(LexError, match="unexpected character"):
        tokenize("a # b")


def test_spans_track_lines():
    toks = tokenize("a\n  b")
    assert toks[0].span.line == 1
    assert toks[1].span.line == 2
    assert toks[1].span.col == 3
