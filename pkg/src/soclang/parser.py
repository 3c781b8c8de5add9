"""Recursive-descent parser for `.soc` programs.

Stops at the first syntax error (no recovery) and reports the expected
token set at that point.
"""

from __future__ import annotations

from typing import List, Optional

from . import ast
from .ast import SourceSpan
from .diagnostics import ParseError
from .lexer import Token, TokKind, tokenize

# Built-ins taking a <width> argument; `to_int` takes none.
_WIDTH_BUILTINS = {"zero_extend", "truncate", "from_int"}


class _Parser:
    def __init__(self, tokens: List[Token], filename: str) -> None:
        self.toks = tokens
        self.pos = 0
        self.file = filename

    # -- token plumbing -------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        i = min(self.pos + ahead, len(self.toks) - 1)
        return self.toks[i]

    def at(self, lexeme: str) -> bool:
        t = self.peek()
        return t.kind in (TokKind.PUNCT, TokKind.KEYWORD) and t.lexeme == lexeme

    def at_kind(self, kind: TokKind) -> bool:
        return self.peek().kind == kind

    def advance(self) -> Token:
        t = self.toks[self.pos]
        if t.kind is not TokKind.EOF:
            self.pos += 1
        return t

    def expect(self, lexeme: str) -> Token:
        if self.at(lexeme):
            return self.advance()
        raise self.error(f"expected {lexeme!r}", {lexeme})

    def expect_ident(self, what: str = "identifier") -> Token:
        if self.at_kind(TokKind.IDENT):
            return self.advance()
        raise self.error(f"expected {what}", {"<identifier>"})

    def error(self, message: str, expected=None) -> ParseError:
        t = self.peek()
        got = t.lexeme if t.kind is not TokKind.EOF else "end of file"
        return ParseError(t.span, f"{message}, found {got!r}", expected)

    def span_from(self, start: Token) -> SourceSpan:
        prev = self.toks[max(self.pos - 1, 0)]
        s = start.span
        return SourceSpan(s.file, s.line, s.col, prev.span.end_line, prev.span.end_col)

    # -- program structure ------------------------------------------------

    def program(self) -> ast.Program:
        aliases: list = []
        enums: list = []
        modules: list = []
        first = self.peek()
        while not self.at_kind(TokKind.EOF):
            if self.at("type"):
                aliases.append(self.alias_decl())
            elif self.at("enum"):
                enums.append(self.enum_decl())
            elif self.at("module"):
                modules.append(self.module_decl())
            else:
                raise self.error("expected declaration", {"type", "enum", "module"})
        return ast.Program(aliases, enums, modules, span=first.span)

    def alias_decl(self) -> ast.AliasDecl:
        start = self.expect("type")
        name = self.expect_ident("type name")
        self.expect("=")
        ty = self.type_expr()
        self.expect(";")
        return ast.AliasDecl(name.lexeme, ty, self.span_from(start))

    def enum_decl(self) -> ast.EnumDecl:
        start = self.expect("enum")
        name = self.expect_ident("enum name")
        self.expect("{")
        variants = [self.expect_ident("variant name").lexeme]
        while self.at(","):
            self.advance()
            if self.at("}"):
                break
            variants.append(self.expect_ident("variant name").lexeme)
        self.expect("}")
        return ast.EnumDecl(name.lexeme, variants, self.span_from(start))

    def module_decl(self) -> ast.ModuleDecl:
        start = self.expect("module")
        name = self.expect_ident("module name")
        self.expect("{")
        instances: list = []
        callees: list = []
        wirings: list = []
        fns: list = []
        while not self.at("}"):
            if self.at("instance"):
                instances.append(self.instance_decl())
            elif self.at("callee"):
                callees.append(self.callee_decl())
            elif self.at("fn") or self.at("mut"):
                fns.append(self.fn_decl())
            elif self.at_kind(TokKind.IDENT):
                wirings.append(self.wiring())
            else:
                raise self.error(
                    "expected module member",
                    {"instance", "callee", "fn", "mut", "}", "<identifier>"},
                )
        self.expect("}")
        return ast.ModuleDecl(name.lexeme, instances, callees, wirings, fns,
                              self.span_from(start))

    def instance_decl(self) -> ast.InstanceDecl:
        start = self.expect("instance")
        name = self.expect_ident("instance name")
        self.expect(":")
        ref = self.instance_ref()
        self.expect(";")
        return ast.InstanceDecl(name.lexeme, ref, self.span_from(start))

    def instance_ref(self) -> ast.InstanceRef:
        name = self.expect_ident("module name")
        if name.lexeme == "State":
            self.expect("<")
            vt = self.type_expr()
            self.expect(">")
            self.expect("(")
            init = self.expr()
            self.expect(")")
            return ast.StatePrim(vt, init)
        if name.lexeme == "Array":
            self.expect("<")
            kt = self.type_expr()
            self.expect(",")
            vt = self.type_expr()
            self.expect(">")
            return ast.ArrayPrim(kt, vt)
        return ast.ModuleRef(name.lexeme)

    def callee_decl(self) -> ast.CalleeDecl:
        start = self.expect("callee")
        name = self.expect_ident("callee name")
        self.expect(":")
        module = self.expect_ident("module name")
        self.expect(";")
        return ast.CalleeDecl(name.lexeme, module.lexeme, self.span_from(start))

    def wiring(self) -> ast.Wiring:
        start = self.peek()
        child = self.dotted_names()
        self.expect("->")
        target = self.dotted_names()
        self.expect(";")
        return ast.Wiring(child, target, self.span_from(start))

    def dotted_names(self) -> list:
        names = [self.expect_ident().lexeme]
        while self.at("."):
            self.advance()
            names.append(self.expect_ident().lexeme)
        return names

    def fn_decl(self) -> ast.FnDecl:
        start = self.peek()
        is_mut = False
        if self.at("mut"):
            self.advance()
            is_mut = True
        self.expect("fn")
        name = self.expect_ident("function name")
        self.expect("(")
        params: list = []
        if not self.at(")"):
            while True:
                pstart = self.peek()
                pname = self.expect_ident("parameter name")
                self.expect(":")
                pty = self.type_expr()
                params.append(ast.Param(pname.lexeme, pty, self.span_from(pstart)))
                if self.at(","):
                    self.advance()
                else:
                    break
        self.expect(")")
        ret: Optional[ast.TypeExpr] = None
        if self.at("->"):
            self.advance()
            ret = self.type_expr()
        body = self.block()
        return ast.FnDecl(name.lexeme, is_mut, params, ret, body, self.span_from(start))

    # -- types ------------------------------------------------------------

    def type_expr(self) -> ast.TypeExpr:
        t = self.peek()
        if self.at("("):
            self.advance()
            self.expect(")")
            return ast.UNIT
        if self.at("{"):
            return self.record_type()
        name = self.expect_ident("type").lexeme
        if name == "Bool":
            return ast.BOOL
        if name == "Int":
            return ast.INT
        if name == "BitInt":
            self.expect("(")
            w = self.int_const("bit width")
            self.expect(")")
            if w < 1:
                raise ParseError(t.span, "BitInt width must be at least 1")
            return ast.BitIntType(w)
        if name == "Vector":
            self.expect("<")
            elem = self.type_expr()
            self.expect(",")
            n = self.int_const("vector length")
            self.expect(">")
            return ast.VectorType(elem, n)
        if name == "Array":
            self.expect("<")
            kt = self.type_expr()
            self.expect(",")
            vt = self.type_expr()
            self.expect(">")
            return ast.ArrayType(kt, vt)
        # Alias or enum reference, resolved during type checking.
        return ast.AliasRef(name)

    def record_type(self) -> ast.RecordType:
        self.expect("{")
        fields: list = []
        seen = set()
        while True:
            fname = self.expect_ident("field name")
            self.expect(":")
            fty = self.type_expr()
            if fname.lexeme in seen:
                raise ParseError(fname.span, f"duplicate record field {fname.lexeme!r}")
            seen.add(fname.lexeme)
            fields.append((fname.lexeme, fty))
            if self.at(","):
                self.advance()
                if self.at("}"):
                    break
            else:
                break
        self.expect("}")
        return ast.RecordType(tuple(fields))

    def int_const(self, what: str) -> int:
        if not self.at_kind(TokKind.INT):
            raise self.error(f"expected {what}", {"<integer>"})
        t = self.advance()
        if t.width is not None:
            raise ParseError(t.span, f"{what} takes no width suffix")
        return t.value

    # -- expressions --------------------------------------------------------

    def block(self) -> ast.Block:
        start = self.expect("{")
        items: list = []
        yields = False
        while not self.at("}"):
            items.append(self.block_item())
            if self.at(";"):
                self.advance()
                yields = False
            else:
                yields = True
                break
        self.expect("}")
        return ast.Block(self.span_from(start), items, yields_value=yields and bool(items))

    def block_item(self) -> ast.Expr:
        if self.at("let"):
            start = self.advance()
            name = self.expect_ident("binding name")
            annot: Optional[ast.TypeExpr] = None
            if self.at(":"):
                self.advance()
                annot = self.type_expr()
            self.expect("=")
            value = self.expr()
            return ast.Let(self.span_from(start), name.lexeme, annot, value)
        return self.expr()

    def expr(self) -> ast.Expr:
        return self.or_expr()

    def _binary_chain(self, sub, ops) -> ast.Expr:
        start = self.peek()
        left = sub()
        while any(self.at(op) for op in ops):
            op = self.advance().lexeme
            right = sub()
            left = ast.Binary(self.span_from(start), op, left, right)
        return left

    def or_expr(self) -> ast.Expr:
        return self._binary_chain(self.and_expr, ("||",))

    def and_expr(self) -> ast.Expr:
        return self._binary_chain(self.eq_expr, ("&&",))

    def eq_expr(self) -> ast.Expr:
        return self._binary_chain(self.cmp_expr, ("==", "!="))

    def cmp_expr(self) -> ast.Expr:
        return self._binary_chain(self.add_expr, ("<", "<=", ">", ">="))

    def add_expr(self) -> ast.Expr:
        return self._binary_chain(self.mul_expr, ("+", "-"))

    def mul_expr(self) -> ast.Expr:
        return self._binary_chain(self.unary_expr, ("*",))

    def unary_expr(self) -> ast.Expr:
        if self.at("!") or self.at("-"):
            start = self.advance()
            operand = self.unary_expr()
            return ast.Unary(self.span_from(start), start.lexeme, operand)
        return self.postfix_expr()

    def postfix_expr(self) -> ast.Expr:
        start = self.peek()
        e = self.primary_expr()
        while True:
            if self.at("."):
                # Pure name chains stay PathExpr until a call or non-name
                # postfix decides their meaning.
                self.advance()
                name = self.expect_ident("field or function name")
                if self.at("("):
                    if isinstance(e, ast.PathExpr):
                        args = self.call_args()
                        e = ast.Call(self.span_from(start), e.names + [name.lexeme], args)
                    else:
                        raise ParseError(
                            name.span, "calls must go through a dotted name path")
                elif isinstance(e, ast.PathExpr):
                    e = ast.PathExpr(self.span_from(start), e.names + [name.lexeme])
                else:
                    e = ast.FieldAccess(self.span_from(start), e, name.lexeme)
            elif self.at("["):
                self.advance()
                first = self.expr()
                if self.at("downto"):
                    self.advance()
                    hi = self._const_of(first)
                    lo = self.int_const("slice bound")
                    if self.at(":="):
                        self.advance()
                        value = self.expr()
                        self.expect("]")
                        e = ast.SliceUpdate(self.span_from(start), e, hi, lo, value)
                    else:
                        self.expect("]")
                        if hi < lo:
                            raise ParseError(
                                self.span_from(start),
                                f"slice bounds must satisfy hi >= lo, got {hi} downto {lo}")
                        e = ast.Slice(self.span_from(start), e, hi, lo)
                elif self.at(":="):
                    self.advance()
                    value = self.expr()
                    self.expect("]")
                    e = ast.IndexUpdate(self.span_from(start), e, first, value)
                else:
                    self.expect("]")
                    e = ast.Index(self.span_from(start), e, first)
            else:
                return e

    def _const_of(self, e: ast.Expr) -> int:
        if isinstance(e, ast.IntLit) and e.width is None:
            return e.value
        raise ParseError(e.span, "slice bounds must be plain integer literals")

    def call_args(self) -> list:
        self.expect("(")
        args: list = []
        if not self.at(")"):
            while True:
                args.append(self.expr())
                if self.at(","):
                    self.advance()
                else:
                    break
        self.expect(")")
        return args

    def primary_expr(self) -> ast.Expr:
        t = self.peek()
        if self.at_kind(TokKind.INT):
            self.advance()
            return ast.IntLit(t.span, t.value, t.width, hex=t.is_hex)
        if self.at("true") or self.at("false"):
            self.advance()
            return ast.BoolLit(t.span, t.lexeme == "true")
        if self.at("("):
            self.advance()
            if self.at(")"):
                self.advance()
                return ast.UnitLit(self.span_from(t))
            e = self.expr()
            self.expect(")")
            return e
        if self.at("["):
            self.advance()
            items: list = []
            if not self.at("]"):
                while True:
                    items.append(self.expr())
                    if self.at(","):
                        self.advance()
                    else:
                        break
            self.expect("]")
            return ast.VectorLit(self.span_from(t), items)
        if self.at("{"):
            # `{ name:` opens a record literal, anything else a block.
            if self.peek(1).kind is TokKind.IDENT and self.peek(2).lexeme == ":":
                return self.record_lit()
            return self.block()
        if self.at("if"):
            return self.if_expr()
        if self.at("any"):
            self.advance()
            self.expect("<")
            ty = self.type_expr()
            self.expect(">")
            return ast.AnyExpr(self.span_from(t), ty)
        if self.at("assume") or self.at("assert"):
            kw = self.advance()
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            cls = ast.Assume if kw.lexeme == "assume" else ast.Assert
            return cls(self.span_from(t), cond)
        if self.at("printf"):
            return self.printf_expr()
        if self.at_kind(TokKind.IDENT):
            name = self.advance()
            if name.lexeme in _WIDTH_BUILTINS and self.at("<"):
                self.advance()
                w = self.int_const("target width")
                self.expect(">")
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return ast.Builtin(self.span_from(t), name.lexeme, w, arg)
            if name.lexeme == "to_int" and self.at("("):
                self.advance()
                arg = self.expr()
                self.expect(")")
                return ast.Builtin(self.span_from(t), "to_int", None, arg)
            if self.at("("):
                args = self.call_args()
                return ast.Call(self.span_from(t), [name.lexeme], args)
            return ast.PathExpr(name.span, [name.lexeme])
        raise self.error("expected expression",
                         {"<integer>", "<identifier>", "(", "{", "[", "if", "any",
                          "assume", "assert", "printf", "true", "false", "!", "-"})

    def record_lit(self) -> ast.RecordLit:
        start = self.expect("{")
        fields: list = []
        seen = set()
        while True:
            fname = self.expect_ident("field name")
            self.expect(":")
            value = self.expr()
            if fname.lexeme in seen:
                raise ParseError(fname.span, f"duplicate field {fname.lexeme!r}")
            seen.add(fname.lexeme)
            fields.append((fname.lexeme, value))
            if self.at(","):
                self.advance()
                if self.at("}"):
                    break
            else:
                break
        self.expect("}")
        return ast.RecordLit(self.span_from(start), fields)

    def if_expr(self) -> ast.If:
        start = self.expect("if")
        cond = self.expr()
        then = self.block()
        orelse: Optional[ast.Expr] = None
        if self.at("else"):
            self.advance()
            if self.at("if"):
                orelse = self.if_expr()
            else:
                orelse = self.block()
        return ast.If(self.span_from(start), cond, then, orelse)

    def printf_expr(self) -> ast.Printf:
        start = self.expect("printf")
        self.expect("(")
        if not self.at_kind(TokKind.STRING):
            raise self.error("expected format string", {"<string>"})
        fmt = self.advance()
        self.expect(")")
        parts, holes = _split_format(fmt, self.file)
        return ast.Printf(self.span_from(start), parts, holes)


def _split_format(fmt: Token, filename: str):
    """Split a printf format string into literal parts and parsed {expr} holes."""
    text = fmt.text or ""
    parts: list = []
    holes: list = []
    buf: list = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\\" and i + 1 < len(text) and text[i + 1] in "{}":
            buf.append(text[i + 1])
            i += 2
            continue
        if ch == "{":
            end = text.find("}", i + 1)
            if end < 0:
                raise ParseError(fmt.span, "unterminated format hole")
            hole_src = text[i + 1:end]
            try:
                holes.append(parse_expr(hole_src, filename))
            except ParseError as err:
                raise ParseError(fmt.span, f"bad format hole {{{hole_src}}}: {err.message}")
            parts.append("".join(buf))
            buf = []
            i = end + 1
            continue
        if ch == "}":
            raise ParseError(fmt.span, "stray '}' in format string (escape as \\})")
        buf.append(ch)
        i += 1
    parts.append("".join(buf))
    return parts, holes


def parse_program(source: str, filename: str = "<input>") -> ast.Program:
    """Parse a whole program; raises LexError/ParseError with spans."""
    toks = tokenize(source, filename)
    p = _Parser(toks, filename)
    return p.program()


def parse_expr(source: str, filename: str = "<expr>") -> ast.Expr:
    toks = tokenize(source, filename)
    p = _Parser(toks, filename)
    e = p.expr()
    if not p.at_kind(TokKind.EOF):
        raise p.error("unexpected trailing input")
    return e
