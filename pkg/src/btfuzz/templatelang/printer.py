"""Pretty printer: TemplateUnit back to parseable source text.

Round trip guarantee: parse(print(parse(text))) is structurally identical
to parse(text).
"""

from __future__ import annotations

from .nodes import (
    DYNAMIC_ARRAY,
    ArrayExtend,
    Assign,
    Binary,
    BlockStmt,
    Break,
    Call,
    Expr,
    ExprStmt,
    FloatLit,
    For,
    FunctionDef,
    Ident,
    If,
    Index,
    InputDecl,
    IntLit,
    LocalDecl,
    Member,
    Postfix,
    Return,
    Stmt,
    StrLit,
    Switch,
    TemplateUnit,
    Ternary,
    TypeDef,
    Unary,
    While,
)

_PRECEDENCE = {
    "||": 1, "&&": 2, "|": 3, "^": 4, "&": 5,
    "==": 6, "!=": 6, "<": 7, ">": 7, "<=": 7, ">=": 7,
    "<<": 8, ">>": 8, "+": 9, "-": 9, "*": 10, "/": 10, "%": 10,
}


def _escape_bytes(data: bytes) -> str:
    out = []
    for b in data:
        if b == 0x22:
            out.append('\\"')
        elif b == 0x5C:
            out.append("\\\\")
        elif b == 0x0A:
            out.append("\\n")
        elif b == 0x0D:
            out.append("\\r")
        elif b == 0x09:
            out.append("\\t")
        elif 0x20 <= b < 0x7F:
            out.append(chr(b))
        else:
            out.append(f"\\x{b:02x}")
    return '"' + "".join(out) + '"'


def format_expr(expr: Expr, parent_bp: int = 0) -> str:
    if isinstance(expr, IntLit):
        return str(expr.value)
    if isinstance(expr, FloatLit):
        return repr(expr.value)
    if isinstance(expr, StrLit):
        return _escape_bytes(expr.value)
    if isinstance(expr, Ident):
        return expr.name
    if isinstance(expr, Member):
        return f"{format_expr(expr.obj, 99)}.{expr.name}"
    if isinstance(expr, Index):
        return f"{format_expr(expr.base, 99)}[{format_expr(expr.index)}]"
    if isinstance(expr, Call):
        args = ", ".join(format_expr(a) for a in expr.args)
        return f"{expr.name}({args})"
    if isinstance(expr, Unary):
        return f"{expr.op}{format_expr(expr.operand, 98)}"
    if isinstance(expr, Postfix):
        return f"{format_expr(expr.target, 99)}{expr.op}"
    if isinstance(expr, Binary):
        bp = _PRECEDENCE[expr.op]
        text = f"{format_expr(expr.left, bp)} {expr.op} {format_expr(expr.right, bp + 1)}"
        return f"({text})" if bp < parent_bp else text
    if isinstance(expr, Ternary):
        text = (f"{format_expr(expr.cond, 1)} ? {format_expr(expr.then)}"
                f" : {format_expr(expr.other)}")
        return f"({text})" if parent_bp > 0 else text
    raise TypeError(f"cannot format {expr!r}")


class _Writer:
    def __init__(self):
        self.lines: list[str] = []
        self.depth = 0

    def line(self, text: str = ""):
        self.lines.append("    " * self.depth + text if text else "")

    def stmts(self, body: list[Stmt]):
        self.depth += 1
        for stmt in body:
            self.stmt(stmt)
        self.depth -= 1

    def block(self, head: str, body: list[Stmt], tail: str = "}"):
        self.line(head + " {")
        self.stmts(body)
        self.line(tail)

    def stmt(self, stmt: Stmt):
        if isinstance(stmt, InputDecl):
            text = f"{stmt.type_name} {stmt.name}"
            if stmt.array_len is DYNAMIC_ARRAY:
                text += "[]"
            elif stmt.array_len is not None:
                text += f"[{format_expr(stmt.array_len)}]"
            if stmt.args:
                text += "(" + ", ".join(format_expr(a) for a in stmt.args) + ")"
            if stmt.init_list is not None:
                text += " = { " + ", ".join(format_expr(v) for v in stmt.init_list) + " }"
            if stmt.attrs:
                text += " <" + ", ".join(
                    f"{k}={format_expr(v)}" for k, v in stmt.attrs.items()) + ">"
            self.line(text + ";")
        elif isinstance(stmt, LocalDecl):
            text = f"local {stmt.type_name} {stmt.name}"
            if stmt.array_len is DYNAMIC_ARRAY:
                text += "[]"
            elif stmt.array_len is not None:
                text += f"[{format_expr(stmt.array_len)}]"
            if isinstance(stmt.init, list):
                text += " = { " + ", ".join(format_expr(v) for v in stmt.init) + " }"
            elif stmt.init is not None:
                text += f" = {format_expr(stmt.init)}"
            self.line(text + ";")
        elif isinstance(stmt, Assign):
            self.line(f"{format_expr(stmt.target)} = {format_expr(stmt.value)};")
        elif isinstance(stmt, ArrayExtend):
            values = ", ".join(format_expr(v) for v in stmt.values)
            self.line(f"{stmt.name} {stmt.op} ({values});")
        elif isinstance(stmt, If):
            self.line(f"if ({format_expr(stmt.cond)}) {{")
            self.stmts(stmt.then)
            if stmt.other:
                self.line("} else {")
                self.stmts(stmt.other)
            self.line("}")
        elif isinstance(stmt, While):
            self.block(f"while ({format_expr(stmt.cond)})", stmt.body)
        elif isinstance(stmt, For):
            init = self._inline_stmt(stmt.init)
            cond = format_expr(stmt.cond) if stmt.cond else ""
            step = self._inline_stmt(stmt.step)
            self.block(f"for ({init}; {cond}; {step})", stmt.body)
        elif isinstance(stmt, Switch):
            self.line(f"switch ({format_expr(stmt.scrutinee)}) {{")
            for case in stmt.cases:
                if case.match is None:
                    self.line("default:")
                else:
                    self.line(f"case {format_expr(case.match)}:")
                self.stmts(case.body)
            self.line("}")
        elif isinstance(stmt, Break):
            self.line("break;")
        elif isinstance(stmt, Return):
            if stmt.value is None:
                self.line("return;")
            else:
                self.line(f"return {format_expr(stmt.value)};")
        elif isinstance(stmt, ExprStmt):
            self.line(f"{format_expr(stmt.expr)};")
        elif isinstance(stmt, BlockStmt):
            self.block("", stmt.body) if stmt.body else self.line("{ }")
        else:
            raise TypeError(f"cannot format {stmt!r}")

    def _inline_stmt(self, stmt: Stmt | None) -> str:
        if stmt is None:
            return ""
        if isinstance(stmt, Assign):
            return f"{format_expr(stmt.target)} = {format_expr(stmt.value)}"
        if isinstance(stmt, ExprStmt):
            return format_expr(stmt.expr)
        raise TypeError(f"cannot inline {stmt!r}")


def format_template(unit: TemplateUnit) -> str:
    """Render a TemplateUnit as template source."""
    w = _Writer()
    for td in unit.typedefs.values():
        if td.kind == "alias":
            w.line(f"typedef {td.underlying} {td.name};")
            w.line()
        elif td.kind == "enum":
            members = ", ".join(f"{m.name} = {m.value}" for m in td.members)
            w.line(f"typedef enum <{td.underlying}> {{ {members} }} {td.name};")
            w.line()
        else:
            params = ""
            if td.params:
                params = " (" + ", ".join(f"{t} {n}" for n, t in td.params) + ")"
            w.line(f"struct {td.name}{params} {{")
            w.stmts(td.body)
            w.line("};")
            w.line()
    for fn in unit.functions.values():
        params = ", ".join(f"{t} {n}" for n, t in fn.params)
        w.line(f"{fn.ret_type} {fn.name}({params}) {{")
        w.stmts(fn.body)
        w.line("}")
        w.line()
    for stmt in unit.toplevel:
        w.stmt(stmt)
    return "\n".join(w.lines) + "\n"
