"""Loop patterns: detection, enumeration, and the LR / GLR membership tests."""

from __future__ import annotations

from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
from itertools import combinations

from .comparability import anchored_instances
from .derivation import (DerivationPath, PathElement, as_path, path_anchors, paths_comparable,
                         validate_path)
from .homomorphism import unify
from .model import Atom, Constant, NormalTGD, Null, Term, Variable, instantiate_rule, variables_of
from .normalize import normalize_rules

DEFAULT_MAX_LEN = 64
DEFAULT_MAX_STATES = 200_000


def _pair_comparable(path: DerivationPath, i: int, j: int) -> bool:
    return anchored_instances(path[i].instance, path[j].instance, path_anchors(path, i, j))


def is_loop_pattern(candidate) -> bool:
    """Endpoints comparable and no other pair of elements comparable.

    Comparability between two elements keeps the terms common to every atom
    between them pinned in place and lets every other variable or null be
    renamed.
    """
    path = as_path(candidate)
    n = len(path)
    if n < 2 or not validate_path(path):
        return False
    if not _pair_comparable(path, 0, n - 1):
        return False
    return not any(_pair_comparable(path, i, j)
                   for i in range(n) for j in range(i + 1, n) if (i, j) != (0, n - 1))


@dataclass(frozen=True)
class LoopPattern:
    path: DerivationPath

    @property
    def rule_ids(self) -> tuple[str, ...]:
        return tuple(e.instance.base.id for e in self.path)

    @property
    def recursive_atoms(self) -> tuple[Atom, ...]:
        """The body atom of each element that the next element derives."""
        return tuple(self.path[k + 1].atom for k in range(len(self.path) - 1))

    def __len__(self) -> int:
        return len(self.path)

    def __str__(self) -> str:
        return str(self.path)

    def to_json(self) -> dict:
        return {"rules": list(self.rule_ids),
                "elements": [{"atom": str(e.atom), "instance": str(e.instance)} for e in self.path]}


def _as_loop_path(loop) -> DerivationPath:
    return loop.path if isinstance(loop, LoopPattern) else as_path(loop)


# -- splits --------------------------------------------------------------

@dataclass(frozen=True)
class SplitWitness:
    """For element k, the pair (body_h, body_b) of a body bipartition."""

    parts: tuple[tuple[tuple[Atom, ...], tuple[Atom, ...]], ...]
    shared: frozenset[Variable] = frozenset()

    def to_json(self) -> dict:
        return {"shared": sorted(v.name for v in self.shared),
                "splits": [{"body_h": [str(a) for a in h], "body_b": [str(a) for a in b]}
                           for h, b in self.parts]}


def _vars(atoms) -> set[Variable]:
    return variables_of(atoms)


def _splits(body: Sequence[Atom], recursive: Atom) -> Iterator[tuple[tuple[Atom, ...], tuple[Atom, ...]]]:
    """Bipartitions with the recursive atom on the b side, smallest b side first."""
    atoms = list(dict.fromkeys(body))
    others = [a for a in atoms if a != recursive]
    for size in range(len(others) + 1):
        for extra in combinations(range(len(others)), size):
            chosen = {recursive} | {others[k] for k in extra}
            b_side = tuple(a for a in atoms if a in chosen)
            h_side = tuple(a for a in atoms if a not in chosen)
            yield h_side, b_side


def _split_for(path: DerivationPath, i: int, target: set[Variable]):
    inst = path[i].instance
    for h_side, b_side in _splits(inst.body_atoms, path[i + 1].atom):
        shared = _vars((path[i].atom,) + h_side) & _vars(b_side)
        if shared == target:
            return h_side, b_side
    return None


def check_lr(loop) -> SplitWitness | None:
    """Splits for every non-final element sharing exactly the common variables."""
    path = _as_loop_path(loop)
    common = set(path[0].atom.variables())
    for e in path.elements[1:]:
        common &= e.atom.variables()
    parts = []
    for i in range(len(path) - 1):
        found = _split_for(path, i, common)
        if found is None:
            return None
        parts.append(found)
    return SplitWitness(tuple(parts), frozenset(common))


@dataclass(frozen=True)
class GLRWitness:
    type: str
    index: int | None = None
    split: SplitWitness | None = None

    def to_json(self) -> dict:
        out: dict = {"type": self.type}
        if self.index is not None:
            out["element"] = self.index
        if self.split is not None:
            out.update(self.split.to_json())
        return out


def _type_two(path: DerivationPath) -> GLRWitness | None:
    for i in range(len(path) - 1):
        found = _split_for(path, i, set())
        if found is not None:
            return GLRWitness("II", i, SplitWitness((found,)))
    return None


def _type_three(path: DerivationPath) -> bool:
    for i in range(len(path) - 1):
        inst = path[i].instance
        every = inst.variables()
        if any(not every <= b.variables() for b in inst.body_atoms):
            return False
    return True


def _type_four(path: DerivationPath) -> bool:
    for i in range(len(path) - 1):
        recursive = path[i + 1].atom
        carried = set(path[0].atom.variables())
        for k in range(1, i + 1):
            carried &= path[k].atom.variables()
        for b in path[i].instance.body_atoms:
            if b == recursive:
                continue
            overlap = recursive.variables() & b.variables()
            if overlap and not overlap <= carried:
                return False
    return True


def _type_five(path: DerivationPath) -> GLRWitness | None:
    for i in range(len(path) - 1):
        later = {path[k].atom for k in range(i + 1, len(path))}
        atoms = list(dict.fromkeys(path[i].instance.body_atoms))
        for size in range(len(atoms) + 1):
            for picked in combinations(range(len(atoms)), size):
                h_side = tuple(atoms[k] for k in picked)
                if later & set(h_side):
                    continue
                if not any(a.nulls() for a in h_side):
                    continue
                b_side = tuple(a for a in atoms if a not in h_side)
                return GLRWitness("V", i, SplitWitness(((h_side, b_side),)))
    return None


def check_glr(loop) -> GLRWitness | None:
    """First of the five loop types (I to V) that the loop falls into, or None."""
    path = _as_loop_path(loop)
    lr = check_lr(path)
    if lr is not None:
        return GLRWitness("I", split=lr)
    found = _type_two(path)
    if found is not None:
        return found
    if _type_three(path):
        return GLRWitness("III")
    if _type_four(path):
        return GLRWitness("IV")
    return _type_five(path)


# -- enumeration ----------------------------------------------------------

def _set_partitions(items: list) -> Iterator[list[list]]:
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        yield [[first]] + part
        for k in range(len(part)):
            yield part[:k] + [[first] + part[k]] + part[k + 1:]


@dataclass
class _Frame:
    """Abstract path under construction, stored top element first."""

    rules: list[NormalTGD]
    thetas: list[dict[str, Term]]
    next_var: int
    next_null: int

    def path(self) -> DerivationPath:
        elements = []
        for rule, theta in zip(self.rules, self.thetas):
            inst = instantiate_rule(rule, theta)
            elements.append(PathElement(inst.head_atom, inst))
        return DerivationPath(tuple(elements))


def _bottoms(rule: NormalTGD) -> Iterator[dict[str, Term]]:
    universals = list(rule.universal_vars)
    for part in _set_partitions(universals):
        theta: dict[str, Term] = {}
        for block in part:
            name = min(block, key=universals.index)
            for v in block:
                theta[v.name] = Variable(name.name)
        yield theta


def _canonical_key(path: DerivationPath) -> tuple:
    names: dict[Term, str] = {}
    out = []
    for e in path:
        row = [e.instance.base.id]
        for t in e.instance.binding_tuple():
            if isinstance(t, Constant):
                row.append(f"c:{t.name}")
            else:
                if t not in names:
                    names[t] = f"{'v' if isinstance(t, Variable) else 'n'}{len(names)}"
                row.append(names[t])
        out.append(tuple(row))
    return tuple(out)


@dataclass
class LoopCensus:
    """Loop patterns found by the search.

    `loops` holds one representative per comparability class. Comparability
    is checked element by element and ignores how terms are shared across
    elements, which the LR and GLR tests do look at, so `variants` keeps
    every loop that differs up to renaming.
    """

    loops: list[LoopPattern] = field(default_factory=list)
    variants: list[LoopPattern] = field(default_factory=list)
    capped: bool = False
    states: int = 0
    longest: int = 0


def enumerate_loop_patterns(rules: Sequence[NormalTGD], max_len: int = DEFAULT_MAX_LEN,
                            max_states: int = DEFAULT_MAX_STATES) -> LoopCensus:
    """One representative per class of loop patterns, by backward search.

    Each search starts from a bottom element, an instance of some rule with
    its universal variables merged according to a set partition. It then
    repeatedly puts on top an instance of a rule whose chosen body atom
    unifies with the current top head. A branch is recorded as a loop once
    the new top is comparable to the bottom and abandoned once the new top
    is comparable to any other element.
    """
    rules = list(rules)
    census = LoopCensus()
    seen: set[tuple] = set()

    def grow(frame: _Frame) -> Iterator[_Frame]:
        top_rule, top_theta = frame.rules[0], frame.thetas[0]
        alpha = instantiate_rule(top_rule, top_theta).head_atom
        path_vars = set()
        for theta in frame.thetas:
            path_vars |= {t for t in theta.values() if isinstance(t, Variable)}
        for rule in rules:
            for k, body_atom in enumerate(rule.body):
                if body_atom.predicate != alpha.predicate or body_atom.arity != alpha.arity:
                    continue
                stamp = frame.next_var
                fresh = {v.name: Variable(f"{v.name}{stamp}") for v in rule.universal_vars}
                renamed = Atom(body_atom.predicate, tuple(
                    fresh[t.name] if isinstance(t, Variable) else t for t in body_atom.args))
                mgu = unify(zip(renamed.args, alpha.args), path_vars)
                if mgu is None:
                    continue

                def resolve(t: Term) -> Term:
                    return mgu.get(t, t) if isinstance(t, Variable) else t

                new_thetas = [{n: resolve(t) for n, t in th.items()} for th in frame.thetas]
                top = {n: resolve(t) for n, t in fresh.items()}
                next_null = frame.next_null
                for z in rule.exist_vars:
                    top[z.name] = Null(next_null)
                    next_null += 1
                yield _Frame([rule] + frame.rules, [top] + new_thetas, stamp + 1, next_null)

    def search(frame: _Frame) -> None:
        if census.capped:
            return
        census.states += 1
        if census.states > max_states:
            census.capped = True
            return
        if len(frame.rules) >= max_len:
            census.capped = True
            return
        for nxt in grow(frame):
            try:
                path = nxt.path()
            except ValueError:
                continue
            n = len(path)
            census.longest = max(census.longest, n)
            if any(_pair_comparable(path, i, j) for i in range(n) for j in range(i + 1, n)
                   if (i, j) != (0, n - 1)):
                continue
            if _pair_comparable(path, 0, n - 1):
                key = _canonical_key(path)
                if key not in seen and validate_path(path):
                    seen.add(key)
                    loop = LoopPattern(path)
                    census.variants.append(loop)
                    if not any(paths_comparable(path, other.path) for other in census.loops):
                        census.loops.append(loop)
                continue
            search(nxt)
            if census.capped:
                return

    for rule in rules:
        for theta in _bottoms(rule):
            theta = dict(theta)
            null = 1
            for z in rule.exist_vars:
                theta[z.name] = Null(null)
                null += 1
            search(_Frame([rule], [theta], 1, null))
            if census.capped:
                return census
    return census


# -- membership --------------------------------------------------------------

@dataclass(frozen=True)
class MembershipReport:
    cls: str
    verdict: str  # "yes" | "no" | "inconclusive"
    evidence: tuple[dict, ...] = ()
    caps: dict = field(default_factory=dict, compare=False)
    violation: LoopPattern | None = None

    def to_json(self) -> dict:
        return {"class": self.cls, "verdict": self.verdict,
                "evidence": list(self.evidence), "caps": dict(self.caps)}


def _normal(rules) -> list[NormalTGD]:
    rules = list(getattr(rules, "rules", rules))
    if all(isinstance(r, NormalTGD) for r in rules):
        return rules
    return normalize_rules(rules)[0]


def _classify(name: str, rules, check, max_len: int, max_states: int) -> MembershipReport:
    census = enumerate_loop_patterns(_normal(rules), max_len, max_states)
    caps = {"max_path_len": max_len, "max_states": max_states,
            "states": census.states, "hit": census.capped}
    evidence = []
    for loop in census.variants:
        witness = check(loop)
        if witness is None:
            evidence.append({"loop": loop.to_json(), "accepted": False})
            return MembershipReport(name, "no", tuple(evidence), caps, loop)
        evidence.append({"loop": loop.to_json(), "accepted": True, "witness": witness.to_json()})
    verdict = "inconclusive" if census.capped else "yes"
    return MembershipReport(name, verdict, tuple(evidence), caps)


def classify_lr(rules, max_len: int = DEFAULT_MAX_LEN,
                max_states: int = DEFAULT_MAX_STATES) -> MembershipReport:
    return _classify("lr", rules, check_lr, max_len, max_states)


def classify_glr(rules, max_len: int = DEFAULT_MAX_LEN,
                 max_states: int = DEFAULT_MAX_STATES) -> MembershipReport:
    return _classify("glr", rules, check_glr, max_len, max_states)
