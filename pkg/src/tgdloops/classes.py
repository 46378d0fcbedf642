"""Syntactic rule classes used for comparison, and a containment audit."""

from __future__ import annotations

from collections import defaultdict
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

from .homomorphism import unify
from .loops import DEFAULT_MAX_LEN, DEFAULT_MAX_STATES, classify_glr, classify_lr
from .model import TGD, Atom, Null, Variable


@dataclass(frozen=True)
class ClassCheck:
    ok: bool
    violation: str = ""

    def __bool__(self) -> bool:
        return self.ok

    @property
    def verdict(self) -> str:
        return "yes" if self.ok else "no"


def _rules(rules) -> list[TGD]:
    return list(getattr(rules, "rules", rules))


def is_linear(rules) -> ClassCheck:
    for r in _rules(rules):
        if len(r.body) != 1:
            return ClassCheck(False, f"rule {r.id} has {len(r.body)} body atoms")
    return ClassCheck(True)


def is_multilinear(rules) -> ClassCheck:
    for r in _rules(rules):
        every = set(r.universal_vars)
        for a in r.body:
            missing = every - a.variables()
            if missing:
                names = ",".join(sorted(v.name for v in missing))
                return ClassCheck(False, f"rule {r.id}: body atom {a} lacks {names}")
    return ClassCheck(True)


def is_domain_restricted(rules) -> ClassCheck:
    for r in _rules(rules):
        every = set(r.universal_vars)
        for a in r.head:
            mentioned = a.variables() & every
            if mentioned and mentioned != every:
                return ClassCheck(False, f"rule {r.id}: head atom {a} mentions some but not all body variables")
    return ClassCheck(True)


# -- graphs --------------------------------------------------------------

def find_cycle(nodes: Iterable, edges: dict) -> list | None:
    """Some directed cycle as a node list (first node repeated at the end), or None."""
    white, grey, black = 0, 1, 2
    colour = {n: white for n in nodes}
    stack: list = []

    def visit(n):
        colour[n] = grey
        stack.append(n)
        for m in edges.get(n, ()):
            if colour.get(m, white) == grey:
                return stack[stack.index(m):] + [m]
            if colour.get(m, white) == white:
                found = visit(m)
                if found:
                    return found
        stack.pop()
        colour[n] = black
        return None

    for n in list(colour):
        if colour[n] == white:
            found = visit(n)
            if found:
                return found
    return None


@dataclass
class PositionGraph:
    nodes: list[tuple[str, int]] = field(default_factory=list)
    edges: dict[tuple[str, int], list[tuple[str, int]]] = field(default_factory=dict)
    special: set[tuple[tuple[str, int], tuple[str, int]]] = field(default_factory=set)


def position_graph(rules) -> PositionGraph:
    """Ordinary edges copy universal variables; special edges lead into existential positions."""
    graph = PositionGraph()
    edges: dict = defaultdict(list)

    def add_node(p):
        if p not in edges:
            edges[p] = []
            graph.nodes.append(p)

    def add_edge(a, b, special=False):
        if b not in edges[a]:
            edges[a].append(b)
        if special:
            graph.special.add((a, b))

    for r in _rules(rules):
        for a in r.body + r.head:
            for k in range(a.arity):
                add_node((a.predicate, k))
        body_pos: dict[Variable, list] = defaultdict(list)
        for a in r.body:
            for k, t in enumerate(a.args):
                if isinstance(t, Variable):
                    body_pos[t].append((a.predicate, k))
        frontier = set(r.frontier)
        for h in r.head:
            for k, t in enumerate(h.args):
                if not isinstance(t, Variable):
                    continue
                if t in r.exist_vars:
                    for x in frontier:
                        for src in body_pos[x]:
                            add_edge(src, (h.predicate, k), special=True)
                else:
                    for src in body_pos[t]:
                        add_edge(src, (h.predicate, k))
    graph.edges = dict(edges)
    return graph


def is_acyclic(rules) -> ClassCheck:
    graph = position_graph(rules)
    cycle = find_cycle(graph.nodes, graph.edges)
    if cycle:
        return ClassCheck(False, "position cycle " + " -> ".join(f"{p}[{k}]" for p, k in cycle))
    return ClassCheck(True)


def _head_as_nulls(rule: TGD, atom: Atom) -> Atom:
    """Head atom renamed apart, existentials turned into distinct nulls."""
    nulls = {z: Null(-k - 1) for k, z in enumerate(rule.exist_vars)}
    return Atom(atom.predicate, tuple(
        nulls.get(t, Variable(f"{t.name}'")) if isinstance(t, Variable) else t
        for t in atom.args))


def triggers(first: TGD, second: TGD) -> bool:
    """Whether some head atom of first unifies with some body atom of second."""
    for h in first.head:
        head = _head_as_nulls(first, h)
        for b in second.body:
            if b.predicate == head.predicate and b.arity == head.arity:
                if unify(zip(head.args, b.args)) is not None:
                    return True
    return False


def rule_dependency_graph(rules) -> dict[str, list[str]]:
    rs = _rules(rules)
    return {r.id: [s.id for s in rs if triggers(r, s)] for r in rs}


def is_agrd(rules) -> ClassCheck:
    graph = rule_dependency_graph(rules)
    cycle = find_cycle(graph, graph)
    if cycle:
        return ClassCheck(False, "rule dependency cycle " + " -> ".join(cycle))
    return ClassCheck(True)


# -- audit ---------------------------------------------------------------

SYNTACTIC = {
    "linear": is_linear,
    "ml": is_multilinear,
    "acyclic": is_acyclic,
    "agrd": is_agrd,
    "dr": is_domain_restricted,
}
ALL_CLASSES = ("linear", "ml", "acyclic", "agrd", "dr", "lr", "glr")
CONTAINED_IN_GLR = ("lr", "ml", "acyclic", "agrd", "dr")


@dataclass(frozen=True)
class AuditReport:
    verdicts: dict[str, str]
    details: dict[str, str]
    flags: tuple[str, ...] = ()


def classify(rules, classes: Sequence[str] = ALL_CLASSES, max_len: int = DEFAULT_MAX_LEN,
             max_states: int = DEFAULT_MAX_STATES) -> list[dict]:
    """One report per requested class, in the order requested."""
    out = []
    for name in classes:
        if name in SYNTACTIC:
            check = SYNTACTIC[name](rules)
            out.append({"class": name, "verdict": check.verdict,
                        "evidence": [check.violation] if check.violation else [], "caps": {}})
        elif name == "lr":
            out.append(classify_lr(rules, max_len, max_states).to_json())
        elif name == "glr":
            out.append(classify_glr(rules, max_len, max_states).to_json())
        else:
            raise ValueError(f"unknown class {name!r}")
    return out


def containment_audit(rules, max_len: int = DEFAULT_MAX_LEN,
                      max_states: int = DEFAULT_MAX_STATES) -> AuditReport:
    reports = classify(rules, ALL_CLASSES, max_len, max_states)
    verdicts = {r["class"]: r["verdict"] for r in reports}
    details = {r["class"]: "; ".join(str(e) for e in r["evidence"][:1]) if r["verdict"] != "yes" else ""
               for r in reports}
    flags = tuple(f"{name} member but glr is {verdicts['glr']}" for name in CONTAINED_IN_GLR
                  if verdicts[name] == "yes" and verdicts["glr"] == "no")
    return AuditReport(verdicts, details, flags)

