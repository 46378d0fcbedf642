"""Text syntax for rule sets, databases and queries, plus DOT export."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .model import Atom, Constant, Null, RuleError, TGD, Term, Variable, variables_of

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<nl>\n)
  | (?P<arrow>->)
  | (?P<ident>[A-Za-z0-9_]+)
  | (?P<punct>[(),.:?])
""", re.VERBOSE)

_NULL_NAME = re.compile(r"n[0-9]+\Z")


class ParseError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.message = message
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    column: int


def _tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            value = m.group()
            tokens.append(Token(value if kind in ("punct", "arrow") else kind, value,
                                line, pos - line_start + 1))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


@dataclass(frozen=True)
class SourceRuleSet:
    rules: tuple[TGD, ...]
    predicate_signature: dict[str, int] = field(default_factory=dict, compare=False)
    constants: frozenset[Constant] = field(default_factory=frozenset, compare=False)

    def __iter__(self):
        return iter(self.rules)

    def __len__(self) -> int:
        return len(self.rules)


@dataclass(frozen=True)
class Database:
    facts: tuple[Atom, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "facts", tuple(dict.fromkeys(self.facts)))

    def __iter__(self):
        return iter(self.facts)

    def __len__(self) -> int:
        return len(self.facts)

    def __contains__(self, atom: object) -> bool:
        return atom in set(self.facts)

    def constants(self) -> set[Constant]:
        return {t for a in self.facts for t in a.args if isinstance(t, Constant)}


@dataclass(frozen=True)
class BCQ:
    atoms: tuple[Atom, ...]

    @property
    def free_variables(self) -> tuple[Variable, ...]:
        seen: dict[Variable, None] = {}
        for a in self.atoms:
            for t in a.args:
                if isinstance(t, Variable):
                    seen.setdefault(t, None)
        return tuple(seen)


class _Parser:
    def __init__(self, text: str, signature: dict[str, int] | None = None, allow_nulls: bool = False):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.signature: dict[str, int] = dict(signature or {})
        self.allow_nulls = allow_nulls

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, k: int = 1) -> Token:
        return self.tokens[min(self.pos + k, len(self.tokens) - 1)]

    def fail(self, message: str, tok: Token | None = None):
        tok = tok or self.tok
        raise ParseError(message, tok.line, tok.column)

    def expect(self, kind: str) -> Token:
        tok = self.tok
        if tok.kind != kind:
            found = tok.text or "end of input"
            self.fail(f"expected {kind!r}, found {found!r}")
        self.pos += 1
        return tok

    def accept(self, kind: str) -> bool:
        if self.tok.kind == kind:
            self.pos += 1
            return True
        return False

    def term(self, where: str) -> Term:
        tok = self.expect("ident")
        name = tok.text
        if name[0].isupper() or name[0] == "_":
            if where == "fact":
                self.fail(f"variable {name} not allowed in a fact", tok)
            return Variable(name)
        if _NULL_NAME.match(name):
            if not self.allow_nulls:
                self.fail(f"labeled null {name} not allowed in a {where}", tok)
            return Null(int(name[1:]))
        return Constant(name)

    def atom(self, where: str) -> Atom:
        tok = self.expect("ident")
        if not (tok.text[0].isalpha() and tok.text[0].islower()):
            self.fail(f"predicate names start with a lowercase letter: {tok.text}", tok)
        self.expect("(")
        args: list[Term] = []
        if self.tok.kind != ")":
            args.append(self.term(where))
            while self.accept(","):
                args.append(self.term(where))
        self.expect(")")
        known = self.signature.setdefault(tok.text, len(args))
        if known != len(args):
            self.fail(f"predicate {tok.text} used with arity {len(args)}, earlier {known}", tok)
        return Atom(tok.text, tuple(args))

    def atom_list(self, where: str) -> list[Atom]:
        atoms = [self.atom(where)]
        while self.accept(","):
            atoms.append(self.atom(where))
        return atoms

    def rule(self, index: int) -> TGD:
        start = self.tok
        rule_id = f"r{index}"
        if self.tok.kind == "ident" and self.peek().kind == ":":
            rule_id = self.tok.text
            self.pos += 2
        body = self.atom_list("rule")
        self.expect("->")
        exist: list[Variable] = []
        if self.tok.kind == "ident" and self.tok.text == "exists" and self.peek().kind == "ident":
            self.pos += 1
            while True:
                tok = self.expect("ident")
                if not (tok.text[0].isupper() or tok.text[0] == "_"):
                    self.fail(f"existential {tok.text} must be a variable", tok)
                exist.append(Variable(tok.text))
                if not self.accept(","):
                    break
            self.expect(".")
        head = self.atom_list("rule")
        self.expect(".")
        unused = set(exist) - variables_of(head)
        if unused:
            self.fail(f"existential variable(s) {','.join(sorted(v.name for v in unused))} "
                      "do not occur in the head", start)
        if len(set(exist)) != len(exist):
            self.fail("existential variable declared twice", start)
        try:
            return TGD(rule_id, tuple(body), tuple(head), tuple(exist))
        except RuleError as err:
            self.fail(str(err), start)


def parse_rules(text: str) -> SourceRuleSet:
    p = _Parser(text)
    rules: list[TGD] = []
    seen: set[str] = set()
    while p.tok.kind != "eof":
        start = p.tok
        rule = p.rule(len(rules) + 1)
        if rule.id in seen:
            p.fail(f"duplicate rule id {rule.id}", start)
        seen.add(rule.id)
        rules.append(rule)
    consts = frozenset(t for r in rules for a in r.body + r.head
                       for t in a.args if isinstance(t, Constant))
    return SourceRuleSet(tuple(rules), p.signature, consts)


def parse_facts(text: str, signature: dict[str, int] | None = None,
                allow_nulls: bool = False) -> Database:
    p = _Parser(text, signature, allow_nulls)
    facts: list[Atom] = []
    while p.tok.kind != "eof":
        facts.append(p.atom("fact"))
        p.expect(".")
    return Database(tuple(facts))


def parse_query(text: str, signature: dict[str, int] | None = None) -> BCQ:
    p = _Parser(text, signature)
    p.expect("?")
    atoms = p.atom_list("query")
    p.accept(".")
    p.expect("eof")
    return BCQ(tuple(atoms))


def parse_atom(text: str, allow_nulls: bool = True) -> Atom:
    p = _Parser(text, allow_nulls=allow_nulls)
    a = p.atom("query")
    p.expect("eof")
    return a


def render_rule(rule: TGD, label: bool = False) -> str:
    text = str(rule)
    return f"{rule.id}: {text}" if label else text


def render(value) -> str:
    """Concrete syntax for a rule set, rule, database, query or atom."""
    if isinstance(value, SourceRuleSet) or (isinstance(value, (list, tuple)) and value
                                             and all(isinstance(r, TGD) for r in value)):
        rules = value.rules if isinstance(value, SourceRuleSet) else value
        lines = [render_rule(r, label=r.id != f"r{i}") for i, r in enumerate(rules, 1)]
        return "".join(line + "\n" for line in lines)
    if isinstance(value, TGD):
        return render_rule(value)
    if isinstance(value, Database):
        return "".join(f"{a}.\n" for a in value.facts)
    if isinstance(value, BCQ):
        return "? " + ", ".join(str(a) for a in value.atoms)
    if isinstance(value, Atom):
        return str(value)
    if isinstance(value, (list, tuple)) and not value:
        return ""
    raise TypeError(f"cannot render {type(value).__name__}")


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def export_dot(tree, name: str = "derivation") -> str:
    """DOT digraph for a derivation tree or instantiated tree.

    Edges point from parent to child so the root is drawn on top. Any
    object with `atom`, `label_text()` and `children` works as a node.
    """
    lines = [f"digraph {name} {{", "  rankdir=TB;", "  node [shape=box];"]
    counter = 0

    def visit(node) -> str:
        nonlocal counter
        ident = f"v{counter}"
        counter += 1
        lines.append(f'  {ident} [label="{_dot_escape(node.label_text())}"];')
        for child in node.children:
            if child is None:
                continue
            child_id = visit(child)
            lines.append(f"  {ident} -> {child_id};")
        return ident

    root = getattr(tree, "root", tree)
    visit(root)
    lines.append("}")
    return "\n".join(lines) + "\n"
