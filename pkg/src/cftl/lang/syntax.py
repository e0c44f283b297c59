"""MiniLang abstract syntax, parser and canonical printer.

MiniLang is a small indentation-structured imperative language: assignments,
calls to opaque external functions, if/elif/else, for/while loops and pass.
Numbers with a decimal point are kept as exact fractions so that durations
derived from call arguments never suffer from float rounding.
"""

from __future__ import annotations

import ast as pyast
import hashlib
import io
import tokenize
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional, Union

KEYWORDS = {"if", "elif", "else", "for", "while", "in", "pass", "not", "and", "or"}
EXPR_BUILTINS = {"len", "range"}
COMPARE_OPS = ("==", "!=", "<", ">", "<=", ">=")


class MiniSyntaxError(SyntaxError):
    """Parse failure carrying a 1-based line and column."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.msg = message
        self.lineno = line
        self.offset = column


# expressions


@dataclass(frozen=True)
class Num:
    value: Union[int, Fraction]


@dataclass(frozen=True)
class Str:
    value: str


@dataclass(frozen=True)
class ListLit:
    items: tuple


@dataclass(frozen=True)
class Name:
    id: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Compare:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class BuiltinCall:
    """Call to an expression-level builtin (``len`` or ``range``)."""

    func: str
    arg: "Expr"


Expr = Union[Num, Str, ListLit, Name, Neg, BinOp, Compare, BuiltinCall]


# statements


@dataclass(frozen=True)
class Assign:
    sid: int
    target: str
    value: Expr


@dataclass(frozen=True)
class Call:
    sid: int
    callee: str
    args: tuple


@dataclass(frozen=True)
class AssignCall:
    sid: int
    target: str
    callee: str
    args: tuple


@dataclass(frozen=True)
class If:
    sid: int
    branches: tuple  # ((cond, block), ...) for the if and each elif
    orelse: Optional[tuple]


@dataclass(frozen=True)
class Loop:
    sid: int
    kind: str  # "for" | "while"
    var: Optional[str]
    source: Expr  # iterable for "for", condition for "while"
    body: tuple


@dataclass(frozen=True)
class Pass:
    sid: int


Stmt = Union[Assign, Call, AssignCall, If, Loop, Pass]
STATE_INDUCING = (Assign, Call, AssignCall)


@dataclass(frozen=True)
class Program:
    body: tuple
    name: str = field(default="program", compare=False)

    def text(self) -> str:
        return print_program(self)

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.text().encode("utf-8")).hexdigest()


def iter_statements(block) -> Iterator[Stmt]:
    """Pre-order walk over every statement in a block."""
    for stmt in block:
        yield stmt
        if isinstance(stmt, If):
            for _, sub in stmt.branches:
                yield from iter_statements(sub)
            if stmt.orelse is not None:
                yield from iter_statements(stmt.orelse)
        elif isinstance(stmt, Loop):
            yield from iter_statements(stmt.body)


# parsing

_SKIP = {tokenize.COMMENT, tokenize.NL, tokenize.ENCODING}


@dataclass
class _Tok:
    kind: str  # NAME NUMBER STRING OP NEWLINE INDENT DEDENT END
    text: str
    line: int
    col: int


def _tokens(source: str) -> list:
    source = source.expandtabs(8)
    if not source.endswith("\n"):
        source += "\n"
    out = []
    try:
        for tok in tokenize.generate_tokens(io.StringIO(source).readline):
            if tok.type in _SKIP:
                continue
            line, col = tok.start[0], tok.start[1] + 1
            if tok.type == tokenize.NAME:
                out.append(_Tok("NAME", tok.string, line, col))
            elif tok.type == tokenize.NUMBER:
                out.append(_Tok("NUMBER", tok.string, line, col))
            elif tok.type == tokenize.STRING:
                out.append(_Tok("STRING", tok.string, line, col))
            elif tok.type == tokenize.OP:
                out.append(_Tok("OP", tok.string, line, col))
            elif tok.type == tokenize.NEWLINE:
                out.append(_Tok("NEWLINE", "", line, col))
            elif tok.type == tokenize.INDENT:
                out.append(_Tok("INDENT", "", line, col))
            elif tok.type == tokenize.DEDENT:
                out.append(_Tok("DEDENT", "", line, col))
            elif tok.type == tokenize.ENDMARKER:
                out.append(_Tok("END", "", line, col))
            elif tok.type == tokenize.ERRORTOKEN:
                if tok.string.strip():
                    raise MiniSyntaxError(f"unexpected character {tok.string!r}", line, col)
            else:
                raise MiniSyntaxError(f"unsupported token {tok.string!r}", line, col)
    except IndentationError as exc:
        raise MiniSyntaxError("inconsistent indentation", exc.lineno or 0, exc.offset or 0) from None
    except tokenize.TokenError as exc:
        msg, (line, col) = exc.args
        raise MiniSyntaxError(str(msg), line, col + 1) from None
    return out


class _Parser:
    def __init__(self, tokens: list):
        self.toks = tokens
        self.pos = 0
        self.next_sid = 0

    # token helpers
    @property
    def cur(self) -> _Tok:
        return self.toks[self.pos]

    def peek(self, k: int = 1) -> _Tok:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def error(self, message: str, tok: Optional[_Tok] = None):
        tok = tok or self.cur
        raise MiniSyntaxError(message, tok.line, tok.col)

    def at(self, kind: str, text: Optional[str] = None) -> bool:
        tok = self.cur
        return tok.kind == kind and (text is None or tok.text == text)

    def accept(self, kind: str, text: Optional[str] = None) -> Optional[_Tok]:
        if self.at(kind, text):
            tok = self.cur
            self.pos += 1
            return tok
        return None

    def expect(self, kind: str, text: Optional[str] = None) -> _Tok:
        tok = self.accept(kind, text)
        if tok is None:
            want = text or kind.lower()
            got = self.cur.text or self.cur.kind.lower()
            self.error(f"expected {want!r}, found {got!r}")
        return tok

    def sid(self) -> int:
        s = self.next_sid
        self.next_sid += 1
        return s

    # grammar
    def program(self) -> tuple:
        body = []
        while not self.at("END"):
            if self.at("INDENT"):
                self.error("unexpected indentation")
            body.append(self.statement())
        return tuple(body)

    def block(self) -> tuple:
        self.expect("OP", ":")
        if not self.at("NEWLINE"):
            stmt = self.simple()
            self.expect("NEWLINE")
            return (stmt,)
        self.expect("NEWLINE")
        if not self.at("INDENT"):
            self.error("expected an indented block")
        self.pos += 1
        stmts = []
        while not self.at("DEDENT"):
            if self.at("END"):
                self.error("unexpected end of input")
            stmts.append(self.statement())
        self.pos += 1
        return tuple(stmts)

    def statement(self) -> Stmt:
        if self.at("NAME", "if"):
            return self.if_stmt()
        if self.at("NAME", "for"):
            sid = self.sid()
            self.pos += 1
            var = self.identifier()
            self.expect("NAME", "in")
            source = self.expr()
            return Loop(sid, "for", var, source, self.block())
        if self.at("NAME", "while"):
            sid = self.sid()
            self.pos += 1
            cond = self.expr()
            return Loop(sid, "while", None, cond, self.block())
        stmt = self.simple()
        self.expect("NEWLINE")
        return stmt

    def if_stmt(self) -> If:
        sid = self.sid()
        self.expect("NAME", "if")
        branches = [(self.expr(), self.block())]
        while self.accept("NAME", "elif"):
            branches.append((self.expr(), self.block()))
        orelse = None
        if self.accept("NAME", "else"):
            orelse = self.block()
        return If(sid, tuple(branches), orelse)

    def identifier(self) -> str:
        tok = self.expect("NAME")
        if tok.text in KEYWORDS:
            self.error(f"keyword {tok.text!r} used as an identifier", tok)
        return tok.text

    def simple(self) -> Stmt:
        if self.at("NAME", "pass"):
            sid = self.sid()
            self.pos += 1
            return Pass(sid)
        if self.at("NAME") and self.cur.text in {"if", "for", "while", "elif", "else"}:
            self.error(f"compound statement {self.cur.text!r} not allowed here")
        start = self.cur
        name = self.identifier()
        if self.accept("OP", "="):
            sid = self.sid()
            if self.at("NAME") and self.peek().kind == "OP" and self.peek().text == "(" \
                    and self.cur.text not in EXPR_BUILTINS and self.cur.text not in KEYWORDS:
                callee = self.identifier()
                args = self.call_args()
                if not (self.at("NEWLINE")):
                    self.error("a call to an external function must be the whole right-hand side")
                return AssignCall(sid, name, callee, args)
            return Assign(sid, name, self.expr())
        if self.at("OP", "("):
            if name in EXPR_BUILTINS:
                self.error(f"builtin {name!r} cannot be used as a statement", start)
            sid = self.sid()
            return Call(sid, name, self.call_args())
        self.error("expected an assignment or a call")

    def call_args(self) -> tuple:
        self.expect("OP", "(")
        args = []
        if not self.at("OP", ")"):
            args.append(self.expr())
            while self.accept("OP", ","):
                args.append(self.expr())
        self.expect("OP", ")")
        return tuple(args)

    def expr(self) -> Expr:
        left = self.arith()
        if self.at("OP") and self.cur.text in COMPARE_OPS:
            op = self.cur.text
            self.pos += 1
            right = self.arith()
            if self.at("OP") and self.cur.text in COMPARE_OPS:
                self.error("chained comparisons are not supported")
            return Compare(op, left, right)
        return left

    def arith(self) -> Expr:
        left = self.term()
        while self.at("OP") and self.cur.text in ("+", "-"):
            op = self.cur.text
            self.pos += 1
            left = BinOp(op, left, self.term())
        return left

    def term(self) -> Expr:
        left = self.unary()
        while self.accept("OP", "*"):
            left = BinOp("*", left, self.unary())
        return left

    def unary(self) -> Expr:
        if self.accept("OP", "-"):
            operand = self.unary()
            if isinstance(operand, Num):
                return Num(-operand.value)
            return Neg(operand)
        return self.atom()

    def atom(self) -> Expr:
        tok = self.cur
        if tok.kind == "NUMBER":
            self.pos += 1
            return Num(_number(tok, self))
        if tok.kind == "STRING":
            self.pos += 1
            if tok.text[0] not in "'\"":
                self.error("string prefixes are not supported", tok)
            return Str(pyast.literal_eval(tok.text))
        if self.accept("OP", "["):
            items = []
            if not self.at("OP", "]"):
                items.append(self.expr())
                while self.accept("OP", ","):
                    if self.at("OP", "]"):
                        break
                    items.append(self.expr())
            self.expect("OP", "]")
            return ListLit(tuple(items))
        if self.accept("OP", "("):
            inner = self.expr()
            self.expect("OP", ")")
            return inner
        if tok.kind == "NAME":
            name = self.identifier()
            if self.at("OP", "("):
                if name not in EXPR_BUILTINS:
                    self.error(f"call to external function {name!r} inside an expression", tok)
                args = self.call_args()
                if len(args) != 1:
                    self.error(f"{name} takes exactly one argument", tok)
                return BuiltinCall(name, args[0])
            return Name(name)
        self.error(f"unexpected {tok.text or tok.kind.lower()!r}")


def _number(tok: _Tok, parser: _Parser) -> Union[int, Fraction]:
    text = tok.text.replace("_", "")
    if text.isdigit():
        return int(text)
    try:
        return Fraction(text)
    except ValueError:
        parser.error(f"unsupported numeric literal {tok.text!r}", tok)


def parse_program(source: str, name: str = "program") -> Program:
    """Parse MiniLang source text; raises MiniSyntaxError with line/column."""
    parser = _Parser(_tokens(source))
    return Program(parser.program(), name=name)


# printing


def format_number(value: Union[int, Fraction]) -> str:
    if isinstance(value, int):
        return str(value)
    if value.denominator == 1:
        return f"{value.numerator}.0"
    den = value.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        return f"{value.numerator}/{value.denominator}"
    places = max(twos, fives)
    scaled = abs(value) * 10 ** places
    digits = str(scaled.numerator).rjust(places + 1, "0")
    sign = "-" if value < 0 else ""
    return f"{sign}{digits[:-places]}.{digits[-places:]}"


_PREC = {"cmp": 1, "+": 2, "-": 2, "*": 3, "neg": 4}


def render_expr(e: Expr, parent: int = 0) -> str:
    if isinstance(e, Num):
        text = format_number(e.value)
        return f"({text})" if e.value < 0 and parent >= _PREC["neg"] else text
    if isinstance(e, Str):
        return '"' + e.value.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'
    if isinstance(e, ListLit):
        return "[" + ", ".join(render_expr(i) for i in e.items) + "]"
    if isinstance(e, Name):
        return e.id
    if isinstance(e, BuiltinCall):
        return f"{e.func}({render_expr(e.arg)})"
    if isinstance(e, Neg):
        text = "-" + render_expr(e.operand, _PREC["neg"])
        return f"({text})" if parent > _PREC["neg"] else text
    if isinstance(e, BinOp):
        prec = _PREC[e.op]
        # left-associative: the right operand needs parentheses at equal precedence
        text = f"{render_expr(e.left, prec)} {e.op} {render_expr(e.right, prec + 1)}"
        return f"({text})" if parent > prec else text
    if isinstance(e, Compare):
        prec = _PREC["cmp"]
        text = f"{render_expr(e.left, prec + 1)} {e.op} {render_expr(e.right, prec + 1)}"
        return f"({text})" if parent > prec else text
    raise TypeError(f"not an expression: {e!r}")


def _print_block(block, indent: int, out: list) -> None:
    pad = "  " * indent
    for s in block:
        if isinstance(s, Pass):
            out.append(f"{pad}pass")
        elif isinstance(s, Assign):
            out.append(f"{pad}{s.target} = {render_expr(s.value)}")
        elif isinstance(s, Call):
            out.append(f"{pad}{s.callee}({', '.join(render_expr(a) for a in s.args)})")
        elif isinstance(s, AssignCall):
            out.append(f"{pad}{s.target} = {s.callee}({', '.join(render_expr(a) for a in s.args)})")
        elif isinstance(s, If):
            for i, (cond, sub) in enumerate(s.branches):
                out.append(f"{pad}{'if' if i == 0 else 'elif'} {render_expr(cond)}:")
                _print_block(sub, indent + 1, out)
            if s.orelse is not None:
                out.append(f"{pad}else:")
                _print_block(s.orelse, indent + 1, out)
        elif isinstance(s, Loop):
            if s.kind == "for":
                out.append(f"{pad}for {s.var} in {render_expr(s.source)}:")
            else:
                out.append(f"{pad}while {render_expr(s.source)}:")
            _print_block(s.body, indent + 1, out)
        else:
            raise TypeError(f"not a statement: {s!r}")


def print_program(program: Program) -> str:
    """Canonical source text; ``parse_program(print_program(p)) == p``."""
    out: list = []
    _print_block(program.body, 0, out)
    return "\n".join(out) + ("\n" if out else "")


def loop_condition_text(loop: Loop) -> str:
    if loop.kind == "for":
        return f"{loop.var} in {render_expr(loop.source)}"
    return render_expr(loop.source)
