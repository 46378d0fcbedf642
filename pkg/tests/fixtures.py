"""Shared rule sets and seeded generators for the test suite."""

from __future__ import annotations

import random

from tgdloops.model import TGD, Atom, Constant, NormalTGD, Variable
from tgdloops.normalize import normalize_rules
from tgdloops.syntax import parse_rules

EXAMPLE2 = """
r(X,Y,Z) -> s(Y,X).
s(X,Y) -> exists Z,W. r(Y,Z,W).
"""

EXAMPLE3 = """
q(X,Y) -> p(X).
p(X), r(X,Y), s(X,Y,Y) -> exists W. q(X,W).
"""

# projDept is ternary throughout; the second rule uses projDept(X,Y,Y)
RESEARCH = """
resAdvisor(X,W) -> seniorStaff(X).
seniorStaff(X), advCommittee(X,Y), projDept(X,Y,Y) -> exists W. resAdvisor(X,W).
resStudent(W) -> exists X,Y. resAdvisor(X,W), enrolDept(W,Y), projDept(W,Y,Y), projDept(X,Y,Y).
"""

NOT_GLR = """
s(X,Y,Z,V) -> r(X,Y,Z).
t(X,W), r(X,W,Y) -> exists Z. s(X,Y,Z,W).
"""

THREE_RULE_CYCLE = """
r(X,Y), r(Y,Z) -> exists U. s(X,Z,U).
s(X,Z,U), t(X,U) -> t(Z,U).
t(X,U), t(Z,U) -> r(X,Z).
"""


def normal(text: str) -> list[NormalTGD]:
    return normalize_rules(parse_rules(text))[0]


VARS = [Variable(n) for n in ("X", "Y", "Z")]
CONSTS = [Constant(n) for n in ("a", "b", "c")]


def _pick_args(rng: random.Random, arity: int, pool: list) -> tuple:
    return tuple(rng.choice(pool) for _ in range(arity))


def random_rule(rng: random.Random, rid: str, preds: dict[str, int],
                allow_exist: bool = True, max_body: int = 2) -> NormalTGD:
    names = sorted(preds)
    while True:
        body = []
        for _ in range(rng.randint(1, max_body)):
            p = rng.choice(names)
            body.append(Atom(p, _pick_args(rng, preds[p], VARS)))
        body_vars = sorted({t for a in body for t in a.args}, key=lambda v: v.name)
        head_pred = rng.choice(names)
        pool = list(body_vars)
        exist = []
        if allow_exist and rng.random() < 0.4:
            exist = [Variable("E")]
        args = []
        for k in range(preds[head_pred]):
            if exist and Variable("E") not in args and (k == preds[head_pred] - 1 or rng.random() < 0.5):
                args.append(Variable("E"))
            else:
                args.append(rng.choice(pool))
        if exist and Variable("E") not in args:
            exist = []
        try:
            return NormalTGD(rid, tuple(body), (Atom(head_pred, tuple(args)),), tuple(exist))
        except ValueError:
            continue


def random_signature(rng: random.Random, count: int = 3, max_arity: int = 2) -> dict[str, int]:
    names = ["p", "q", "r", "s", "t"][:count]
    return {n: rng.randint(1, max_arity) for n in names}


def random_rules(rng: random.Random, max_rules: int = 3, max_arity: int = 2,
                 preds: int = 3) -> list[NormalTGD]:
    sig = random_signature(rng, preds, max_arity)
    return [random_rule(rng, f"r{k + 1}", sig) for k in range(rng.randint(1, max_rules))]


def signature_of(rules) -> dict[str, int]:
    return {a.predicate: a.arity for r in rules for a in r.body + r.head}


def random_database(rng: random.Random, sig: dict[str, int], max_facts: int = 5) -> list[Atom]:
    names = sorted(sig)
    return list(dict.fromkeys(
        Atom(p, _pick_args(rng, sig[p], CONSTS))
        for p in (rng.choice(names) for _ in range(rng.randint(1, max_facts)))))


def random_goal(rng: random.Random, sig: dict[str, int]) -> Atom:
    p = rng.choice(sorted(sig))
    return Atom(p, _pick_args(rng, sig[p], VARS[:2] + CONSTS[:2]))


def random_instance(rng: random.Random):
    rules = random_rules(rng)
    sig = signature_of(rules)
    return rules, random_database(rng, sig), random_goal(rng, sig)


# -- class-shaped generators --------------------------------------------

def multilinear_rules(rng: random.Random) -> list[TGD]:
    out = []
    sig = {"p": 2, "q": 2, "r": 3, "s": 1}
    for k in range(rng.randint(1, 3)):
        width = rng.randint(1, 2)
        every = VARS[:width]
        body = []
        for _ in range(rng.randint(1, 2)):
            p = rng.choice([n for n, a in sig.items() if a >= width])
            args = list(every) + [rng.choice(every) for _ in range(sig[p] - width)]
            rng.shuffle(args)
            body.append(Atom(p, tuple(args)))
        head_pred = rng.choice(sorted(sig))
        exist = rng.random() < 0.5
        args = [rng.choice(every) for _ in range(sig[head_pred])]
        if exist:
            args[rng.randrange(len(args))] = Variable("E")
        ex = (Variable("E"),) if Variable("E") in args else ()
        out.append(NormalTGD(f"r{k + 1}", tuple(body), (Atom(head_pred, tuple(args)),), ex))
    return out


def stratified_rules(rng: random.Random) -> list[TGD]:
    """Rules whose head predicate sits above every body predicate."""
    levels = ["p0", "p1", "p2", "p3"]
    sig = {p: rng.randint(1, 2) for p in levels}
    out = []
    for k in range(rng.randint(1, 3)):
        top = rng.randint(1, len(levels) - 1)
        body = []
        for _ in range(rng.randint(1, 2)):
            p = levels[rng.randrange(top)]
            body.append(Atom(p, _pick_args(rng, sig[p], VARS)))
        head_pred = levels[top]
        vars_ = sorted({t for a in body for t in a.args}, key=lambda v: v.name)
        args = [rng.choice(vars_) for _ in range(sig[head_pred])]
        ex = ()
        if rng.random() < 0.4:
            args[-1] = Variable("E")
            ex = (Variable("E"),)
        out.append(NormalTGD(f"r{k + 1}", tuple(body), (Atom(head_pred, tuple(args)),), ex))
    return out


def domain_restricted_rules(rng: random.Random) -> list[TGD]:
    sig = {"p": 1, "q": 2, "r": 2, "s": 3}
    out = []
    for k in range(rng.randint(1, 3)):
        body = []
        for _ in range(rng.randint(1, 2)):
            p = rng.choice(sorted(sig))
            body.append(Atom(p, _pick_args(rng, sig[p], VARS)))
        every = sorted({t for a in body for t in a.args}, key=lambda v: v.name)
        candidates = [p for p in sig if sig[p] >= len(every)]
        if candidates and rng.random() < 0.7:
            head_pred = rng.choice(candidates)
            args = list(every) + [rng.choice(every) for _ in range(sig[head_pred] - len(every))]
            rng.shuffle(args)
            ex = ()
            if rng.random() < 0.3 and sig[head_pred] > len(every):
                spare = [i for i in range(len(args)) if args.count(args[i]) > 1]
                args[spare[0]] = Variable("E")
                ex = (Variable("E"),)
        else:
            head_pred = rng.choice(sorted(sig))
            args = [Variable("E")] + [rng.choice(CONSTS) for _ in range(sig[head_pred] - 1)]
            ex = (Variable("E"),)
        out.append(NormalTGD(f"r{k + 1}", tuple(body), (Atom(head_pred, tuple(args)),), ex))
    return out


def loop_template(rng: random.Random) -> list[NormalTGD]:
    """Two-rule recursion shaped like the p/q example, with random side atoms."""
    anchors = [Variable(f"A{k}") for k in range(rng.randint(1, 2))]
    local = [Variable(f"L{k}") for k in range(rng.randint(1, 2))]
    sides = []
    for k, lv in enumerate(local):
        arity = rng.randint(1, 3)
        args = [lv] + [rng.choice(anchors + local) for _ in range(arity - 1)]
        rng.shuffle(args)
        sides.append(Atom(f"side{k}", tuple(args)))
    if rng.random() < 0.5:
        sides.append(Atom("side9", (rng.choice(anchors),)))
    q_args = tuple(anchors) + (Variable("W"),)
    down = NormalTGD("down", (Atom("q", tuple(anchors) + (Variable("Y"),)),),
                     (Atom("p", tuple(anchors)),))
    extra = (Atom("guard", (anchors[0],)),) if rng.random() < 0.4 else ()
    if extra:
        down = NormalTGD("down", down.body + extra, down.head)
    up = NormalTGD("up", (Atom("p", tuple(anchors)),) + tuple(sides), (Atom("q", q_args),),
                   (Variable("W"),))
    return [down, up]


# -- hand-built paths ------------------------------------------------------

def term(text: str):
    """n3 is a null, an uppercase name a variable, anything else a constant."""
    from tgdloops.model import Null
    if text[0] == "n" and text[1:].isdigit():
        return Null(int(text[1:]))
    return Variable(text) if text[0].isupper() else Constant(text)


def build_path(rules, steps):
    """Path from (rule id, {var: term text}) pairs, each atom the head of its instance."""
    from tgdloops.derivation import DerivationPath, PathElement
    from tgdloops.model import instantiate_rule
    by_id = {r.id: r for r in rules}
    elements = []
    for rid, binding in steps:
        inst = instantiate_rule(by_id[rid], {k: term(v) for k, v in binding.items()})
        elements.append(PathElement(inst.head_atom, inst))
    return DerivationPath(tuple(elements))


def example2_paths():
    rules = normal(EXAMPLE2)
    p1 = build_path(rules, [("r1", {"X": "Y1", "Y": "n1", "Z": "n2"}),
                            ("r2", {"X": "X1", "Y": "Y1", "Z": "n1", "W": "n2"}),
                            ("r1", {"X": "Y1", "Y": "X1", "Z": "Z1"})])
    p2 = build_path(rules, [("r2", {"X": "n3", "Y": "X2", "Z": "n1", "W": "n2"}),
                            ("r1", {"X": "X2", "Y": "n3", "Z": "n4"})])
    p3 = build_path(rules, [("r2", {"X": "n3", "Y": "X2", "Z": "n1", "W": "n2"}),
                            ("r1", {"X": "X2", "Y": "n3", "Z": "n4"}),
                            ("r2", {"X": "X1", "Y": "X2", "Z": "n3", "W": "n4"})])
    return rules, p1, p2, p3
