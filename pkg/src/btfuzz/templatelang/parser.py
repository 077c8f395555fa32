"""Recursive-descent parser producing a TemplateUnit."""

from __future__ import annotations

from ..errors import TemplateSyntaxError
from .lexer import Token, TokenKind, tokenize
from .nodes import (
    DYNAMIC_ARRAY,
    ArrayExtend,
    Assign,
    Binary,
    BlockStmt,
    Break,
    Call,
    EnumMember,
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
    SwitchCase,
    TemplateUnit,
    Ternary,
    TypeDef,
    Unary,
    While,
)

# Infix binding powers, C precedence.  Higher binds tighter.
_BINARY_BP = {
    "||": 1, "&&": 2, "|": 3, "^": 4, "&": 5,
    "==": 6, "!=": 6,
    "<": 7, ">": 7, "<=": 7, ">=": 7,
    "<<": 8, ">>": 8,
    "+": 9, "-": 9,
    "*": 10, "/": 10, "%": 10,
}

_UNARY_OPS = {"-", "+", "!", "~"}


class Parser:
    def __init__(self, source: str, source_name: str = "<template>"):
        self.tokens = tokenize(source)
        self.pos = 0
        self.source_name = source_name
        self.warnings: list[str] = []

    # -- token helpers ------------------------------------------------

    def _current(self) -> Token:
        return self.tokens[self.pos]

    def _peek(self, offset: int = 1) -> Token:
        idx = min(self.pos + offset, len(self.tokens) - 1)
        return self.tokens[idx]

    def _advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind is not TokenKind.EOF:
            self.pos += 1
        return tok

    def _at(self, kind: TokenKind, value=None) -> bool:
        tok = self._current()
        return tok.kind is kind and (value is None or tok.value == value)

    def _at_op(self, op: str) -> bool:
        return self._at(TokenKind.OP, op)

    def _at_kw(self, word: str) -> bool:
        return self._at(TokenKind.KEYWORD, word)

    def _expect(self, kind: TokenKind, value=None) -> Token:
        tok = self._current()
        if tok.kind is not kind or (value is not None and tok.value != value):
            want = value if value is not None else kind.name.lower()
            raise TemplateSyntaxError(f"expected {want!r}, found {tok.value!r}", tok.line, tok.col)
        return self._advance()

    def _expect_op(self, op: str) -> Token:
        return self._expect(TokenKind.OP, op)

    def _error(self, message: str):
        tok = self._current()
        raise TemplateSyntaxError(message, tok.line, tok.col)

    # -- unit ----------------------------------------------------------

    def parse_unit(self) -> TemplateUnit:
        unit = TemplateUnit(source_name=self.source_name)
        while not self._at(TokenKind.EOF):
            if self._at_kw("typedef"):
                td = self._typedef()
                self._define_type(unit, td)
            elif self._at_kw("struct"):
                td = self._named_struct()
                self._define_type(unit, td)
            elif self._looks_like_function():
                fn = self._function_def()
                if fn.name in unit.functions:
                    raise TemplateSyntaxError(f"duplicate function {fn.name!r}", *fn.span)
                unit.functions[fn.name] = fn
            else:
                unit.toplevel.append(self._statement())
        unit.warnings.extend(self.warnings)
        return unit

    def _define_type(self, unit: TemplateUnit, td: TypeDef):
        if td.name in unit.typedefs:
            raise TemplateSyntaxError(f"duplicate type {td.name!r}", *td.span)
        unit.typedefs[td.name] = td

    def _looks_like_function(self):
        # `type name ( ... ) {` at top level is a function definition;
        # `type name ( ... ) ;` is a record instantiation with arguments.
        base = 0
        if self._at_kw("void"):
            base = 1
        elif self._at(TokenKind.IDENT) and self._peek().kind is TokenKind.IDENT:
            base = 2
        else:
            return False
        if base == 1:
            if self._peek().kind is not TokenKind.IDENT:
                return False
            opener = 2
        else:
            opener = 2
        tok = self._peek(opener)
        if not (tok.kind is TokenKind.OP and tok.value == "("):
            return False
        depth = 0
        idx = opener
        while True:
            tok = self._peek(idx)
            if tok.kind is TokenKind.EOF:
                return False
            if tok.kind is TokenKind.OP and tok.value == "(":
                depth += 1
            elif tok.kind is TokenKind.OP and tok.value == ")":
                depth -= 1
                if depth == 0:
                    after = self._peek(idx + 1)
                    return after.kind is TokenKind.OP and after.value == "{"
            idx += 1

    # -- type definitions ----------------------------------------------

    def _typedef(self) -> TypeDef:
        start = self._expect(TokenKind.KEYWORD, "typedef")
        span = (start.line, start.col)
        if self._at_kw("struct"):
            self._advance()
            params = self._param_list() if self._at_op("(") else []
            body = self._record_body()
            name = self._expect(TokenKind.IDENT).value
            self._expect_op(";")
            return TypeDef(name=name, kind="record", params=params, body=body, span=span)
        if self._at_kw("enum"):
            self._advance()
            underlying = "int32"
            if self._at_op("<"):
                self._advance()
                underlying = self._type_name()
                self._expect_op(">")
            members = self._enum_body()
            name = self._expect(TokenKind.IDENT).value
            self._expect_op(";")
            return TypeDef(name=name, kind="enum", members=members, underlying=underlying, span=span)
        # plain alias: typedef uint32 DWORD;
        underlying = self._type_name()
        name = self._expect(TokenKind.IDENT).value
        self._expect_op(";")
        return TypeDef(name=name, kind="alias", underlying=underlying, span=span)

    def _named_struct(self) -> TypeDef:
        start = self._expect(TokenKind.KEYWORD, "struct")
        span = (start.line, start.col)
        name = self._expect(TokenKind.IDENT).value
        params = self._param_list() if self._at_op("(") else []
        body = self._record_body()
        self._expect_op(";")
        return TypeDef(name=name, kind="record", params=params, body=body, span=span)

    def _type_name(self) -> str:
        if self._at_kw("void"):
            self._advance()
            return "void"
        return self._expect(TokenKind.IDENT).value

    def _param_list(self) -> list[tuple[str, str]]:
        self._expect_op("(")
        params: list[tuple[str, str]] = []
        while not self._at_op(")"):
            ptype = self._type_name()
            pname = self._expect(TokenKind.IDENT).value
            params.append((pname, ptype))
            if not self._at_op(")"):
                self._expect_op(",")
        self._expect_op(")")
        return params

    def _record_body(self) -> list[Stmt]:
        self._expect_op("{")
        body: list[Stmt] = []
        while not self._at_op("}"):
            body.append(self._statement())
        self._expect_op("}")
        return body

    def _enum_body(self) -> list[EnumMember]:
        self._expect_op("{")
        members: list[EnumMember] = []
        next_value = 0
        while not self._at_op("}"):
            name = self._expect(TokenKind.IDENT).value
            if self._at_op("="):
                self._advance()
                next_value = self._const_int()
            members.append(EnumMember(name, next_value))
            next_value += 1
            if not self._at_op("}"):
                self._expect_op(",")
        self._expect_op("}")
        if not members:
            self._error("enum value list must be non-empty")
        return members

    def _const_int(self) -> int:
        negate = False
        if self._at_op("-"):
            self._advance()
            negate = True
        tok = self._current()
        if tok.kind is TokenKind.INT or tok.kind is TokenKind.CHAR:
            self._advance()
            return -tok.value if negate else tok.value
        self._error("expected integer constant")

    def _function_def(self) -> FunctionDef:
        start = self._current()
        ret_type = self._type_name()
        name = self._expect(TokenKind.IDENT).value
        params = self._param_list()
        self._expect_op("{")
        body: list[Stmt] = []
        while not self._at_op("}"):
            body.append(self._statement())
        self._expect_op("}")
        return FunctionDef(name=name, ret_type=ret_type, params=params, body=body,
                           span=(start.line, start.col))

    # -- statements ------------------------------------------------------

    def _statement(self) -> Stmt:
        tok = self._current()
        span = (tok.line, tok.col)
        if tok.kind is TokenKind.KEYWORD:
            word = tok.value
            if word == "local":
                return self._local_decl()
            if word == "if":
                return self._if_stmt()
            if word == "while":
                return self._while_stmt()
            if word == "for":
                return self._for_stmt()
            if word == "switch":
                return self._switch_stmt()
            if word == "break":
                self._advance()
                self._expect_op(";")
                return Break(span=span)
            if word == "return":
                self._advance()
                value = None if self._at_op(";") else self._expression()
                self._expect_op(";")
                return Return(value=value, span=span)
            self._error(f"unexpected keyword {word!r}")
        if self._at_op("{"):
            self._advance()
            body = []
            while not self._at_op("}"):
                body.append(self._statement())
            self._expect_op("}")
            return BlockStmt(body=body, span=span)
        if tok.kind is TokenKind.IDENT:
            nxt = self._peek()
            if nxt.kind is TokenKind.IDENT:
                return self._input_decl()
            if nxt.kind is TokenKind.OP and nxt.value in ("+=", "-="):
                return self._array_extend()
        return self._expr_or_assign()

    def _declarator(self):
        """name, then optional [expr] / [] array suffix."""
        name = self._expect(TokenKind.IDENT).value
        array_len = None
        if self._at_op("["):
            self._advance()
            if self._at_op("]"):
                array_len = DYNAMIC_ARRAY
            else:
                array_len = self._expression()
            self._expect_op("]")
        return name, array_len

    def _local_decl(self) -> LocalDecl:
        start = self._expect(TokenKind.KEYWORD, "local")
        type_name = self._type_name()
        name, array_len = self._declarator()
        init = None
        if self._at_op("="):
            self._advance()
            if self._at_op("{"):
                init = self._brace_list()
            else:
                init = self._expression()
        self._expect_op(";")
        return LocalDecl(type_name=type_name, name=name, array_len=array_len,
                         init=init, span=(start.line, start.col))

    def _input_decl(self) -> InputDecl:
        start = self._current()
        type_name = self._type_name()
        name, array_len = self._declarator()
        args: list[Expr] = []
        if self._at_op("("):
            self._advance()
            while not self._at_op(")"):
                args.append(self._expression())
                if not self._at_op(")"):
                    self._expect_op(",")
            self._expect_op(")")
        init_list = None
        if self._at_op("="):
            self._advance()
            if not self._at_op("{"):
                self._error("input declarations take brace-enclosed init lists")
            init_list = self._brace_list()
        attrs: dict[str, Expr] = {}
        if self._at_op("<"):
            self._advance()
            while not self._at_op(">"):
                key_tok = self._expect(TokenKind.IDENT)
                key = key_tok.value
                self._expect_op("=")
                # stay above comparison precedence so the closing '>' of
                # the attribute block is never taken as an operator
                attrs[key] = self._binary(_BINARY_BP["<<"])
                if key not in ("min", "max"):
                    self.warnings.append(
                        f"{self.source_name}:{key_tok.line}:{key_tok.col}: warning: "
                        f"unknown attribute {key!r} ignored")
                if not self._at_op(">"):
                    self._expect_op(",")
            self._expect_op(">")
        self._expect_op(";")
        return InputDecl(type_name=type_name, name=name, array_len=array_len,
                         args=args, init_list=init_list, attrs=attrs,
                         span=(start.line, start.col))

    def _brace_list(self) -> list[Expr]:
        self._expect_op("{")
        values: list[Expr] = []
        while not self._at_op("}"):
            values.append(self._expression())
            if not self._at_op("}"):
                self._expect_op(",")
        self._expect_op("}")
        return values

    def _array_extend(self) -> ArrayExtend:
        start = self._current()
        name = self._expect(TokenKind.IDENT).value
        op = self._advance().value
        values: list[Expr] = []
        # Right side is either one expression or a parenthesized list.  A
        # parenthesized single expression is indistinguishable; treating it
        # as a one-element list gives the same meaning.
        if self._at_op("("):
            self._advance()
            while not self._at_op(")"):
                values.append(self._expression())
                if not self._at_op(")"):
                    self._expect_op(",")
            self._expect_op(")")
        else:
            values.append(self._expression())
        self._expect_op(";")
        return ArrayExtend(op=op, name=name, values=values, span=(start.line, start.col))

    def _body_or_single(self) -> list[Stmt]:
        if self._at_op("{"):
            self._advance()
            body = []
            while not self._at_op("}"):
                body.append(self._statement())
            self._expect_op("}")
            return body
        return [self._statement()]

    def _if_stmt(self) -> If:
        start = self._expect(TokenKind.KEYWORD, "if")
        self._expect_op("(")
        cond = self._expression()
        self._expect_op(")")
        then = self._body_or_single()
        other: list[Stmt] = []
        if self._at_kw("else"):
            self._advance()
            other = self._body_or_single()
        return If(cond=cond, then=then, other=other, span=(start.line, start.col))

    def _while_stmt(self) -> While:
        start = self._expect(TokenKind.KEYWORD, "while")
        self._expect_op("(")
        cond = self._expression()
        self._expect_op(")")
        body = self._body_or_single()
        return While(cond=cond, body=body, span=(start.line, start.col))

    def _simple_stmt(self) -> Stmt:
        """Statement without trailing semicolon, for for-headers."""
        if self._at_kw("local"):
            # reuse the local parser, then back out the semicolon requirement
            self._error("local declarations are not allowed in for-headers")
        return self._expr_or_assign(eat_semi=False)

    def _for_stmt(self) -> For:
        start = self._expect(TokenKind.KEYWORD, "for")
        self._expect_op("(")
        init = None if self._at_op(";") else self._simple_stmt()
        self._expect_op(";")
        cond = None if self._at_op(";") else self._expression()
        self._expect_op(";")
        step = None if self._at_op(")") else self._simple_stmt()
        self._expect_op(")")
        body = self._body_or_single()
        return For(init=init, cond=cond, step=step, body=body, span=(start.line, start.col))

    def _switch_stmt(self) -> Switch:
        start = self._expect(TokenKind.KEYWORD, "switch")
        self._expect_op("(")
        scrutinee = self._expression()
        self._expect_op(")")
        self._expect_op("{")
        cases: list[SwitchCase] = []
        while not self._at_op("}"):
            if self._at_kw("case"):
                self._advance()
                match = self._expression()
            elif self._at_kw("default"):
                self._advance()
                match = None
            else:
                self._error("expected 'case' or 'default'")
            self._expect_op(":")
            body: list[Stmt] = []
            while not (self._at_kw("case") or self._at_kw("default") or self._at_op("}")):
                body.append(self._statement())
            cases.append(SwitchCase(match=match, body=body))
        self._expect_op("}")
        return Switch(scrutinee=scrutinee, cases=cases, span=(start.line, start.col))

    def _expr_or_assign(self, eat_semi: bool = True) -> Stmt:
        start = self._current()
        span = (start.line, start.col)
        expr = self._expression()
        if self._at_op("="):
            if not isinstance(expr, (Ident, Member, Index)):
                self._error("assignment target must be a variable, field, or element")
            self._advance()
            value = self._expression()
            if eat_semi:
                self._expect_op(";")
            return Assign(target=expr, value=value, span=span)
        if eat_semi:
            self._expect_op(";")
        return ExprStmt(expr=expr, span=span)

    # -- expressions -----------------------------------------------------

    def _expression(self) -> Expr:
        return self._ternary()

    def _ternary(self) -> Expr:
        cond = self._binary(0)
        if self._at_op("?"):
            self._advance()
            then = self._expression()
            self._expect_op(":")
            other = self._ternary()
            return Ternary(cond, then, other)
        return cond

    def _binary(self, min_bp: int) -> Expr:
        left = self._unary()
        while True:
            tok = self._current()
            if tok.kind is not TokenKind.OP:
                return left
            bp = _BINARY_BP.get(tok.value)
            if bp is None or bp < min_bp:
                return left
            op = self._advance().value
            right = self._binary(bp + 1)
            left = Binary(op, left, right)

    def _unary(self) -> Expr:
        tok = self._current()
        if tok.kind is TokenKind.OP and tok.value in _UNARY_OPS:
            self._advance()
            return Unary(tok.value, self._unary())
        if tok.kind is TokenKind.OP and tok.value in ("++", "--"):
            self._advance()
            target = self._unary()
            # prefix ++x is treated like the postfix form; templates only
            # ever use the value-independent statement position
            return Postfix(tok.value, target)
        return self._postfix()

    def _postfix(self) -> Expr:
        expr = self._primary()
        while True:
            if self._at_op("("):
                if not isinstance(expr, Ident):
                    self._error("only named functions can be called")
                self._advance()
                args: list[Expr] = []
                while not self._at_op(")"):
                    args.append(self._expression())
                    if not self._at_op(")"):
                        self._expect_op(",")
                self._expect_op(")")
                expr = Call(expr.name, args)
            elif self._at_op("["):
                self._advance()
                idx = self._expression()
                self._expect_op("]")
                expr = Index(expr, idx)
            elif self._at_op("."):
                self._advance()
                name = self._expect(TokenKind.IDENT).value
                expr = Member(expr, name)
            elif self._at_op("++") or self._at_op("--"):
                op = self._advance().value
                expr = Postfix(op, expr)
            else:
                return expr

    def _primary(self) -> Expr:
        tok = self._current()
        if tok.kind is TokenKind.INT:
            self._advance()
            return IntLit(tok.value)
        if tok.kind is TokenKind.FLOAT:
            self._advance()
            return FloatLit(tok.value)
        if tok.kind is TokenKind.CHAR:
            self._advance()
            return IntLit(tok.value)
        if tok.kind is TokenKind.STRING:
            self._advance()
            return StrLit(tok.value)
        if tok.kind is TokenKind.KEYWORD and tok.value in ("true", "false"):
            self._advance()
            return IntLit(1 if tok.value == "true" else 0)
        if tok.kind is TokenKind.IDENT:
            self._advance()
            return Ident(tok.value)
        if self._at_op("("):
            self._advance()
            expr = self._expression()
            self._expect_op(")")
            return expr
        self._error(f"unexpected token {tok.value!r}")


def parse_source(source: str, source_name: str = "<template>") -> TemplateUnit:
    """Parse template text into an unresolved TemplateUnit."""
    return Parser(source, source_name).parse_unit()
