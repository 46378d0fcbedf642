"""Terms, atoms, rules, substitutions and rule instances."""

from __future__ import annotations

from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from functools import cached_property
from typing import Union


@dataclass(frozen=True, slots=True)
class Constant:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, slots=True)
class Variable:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, slots=True)
class Null:
    index: int

    def __str__(self) -> str:
        return f"n{self.index}"


Term = Union[Constant, Variable, Null]


def term_key(term: Term) -> tuple:
    """Sort key: constants first, then nulls by index, then variables."""
    if isinstance(term, Constant):
        return (0, term.name, 0)
    if isinstance(term, Null):
        return (1, "", term.index)
    return (2, term.name, 0)


def kind_of(term: Term) -> str:
    if isinstance(term, Constant):
        return "constant"
    if isinstance(term, Null):
        return "null"
    return "variable"


@dataclass(frozen=True, slots=True)
class Atom:
    predicate: str
    args: tuple[Term, ...]

    @property
    def arity(self) -> int:
        return len(self.args)

    def variables(self) -> set[Variable]:
        return {t for t in self.args if isinstance(t, Variable)}

    def nulls(self) -> set[Null]:
        return {t for t in self.args if isinstance(t, Null)}

    def var_nulls(self) -> set[Term]:
        return {t for t in self.args if not isinstance(t, Constant)}

    def is_ground(self) -> bool:
        return not any(isinstance(t, Variable) for t in self.args)

    def __str__(self) -> str:
        return f"{self.predicate}({','.join(str(t) for t in self.args)})"


def atom_key(atom: Atom) -> tuple:
    return (atom.predicate, tuple(term_key(t) for t in atom.args))


def variables_of(atoms: Iterable[Atom]) -> set[Variable]:
    out: set[Variable] = set()
    for a in atoms:
        out |= a.variables()
    return out


def nulls_of(atoms: Iterable[Atom]) -> set[Null]:
    out: set[Null] = set()
    for a in atoms:
        out |= a.nulls()
    return out


def var_nulls_of(atoms: Iterable[Atom]) -> set[Term]:
    out: set[Term] = set()
    for a in atoms:
        out |= a.var_nulls()
    return out


def _ordered_vars(atoms: Iterable[Atom]) -> tuple[Variable, ...]:
    seen: dict[Variable, None] = {}
    for a in atoms:
        for t in a.args:
            if isinstance(t, Variable):
                seen.setdefault(t, None)
    return tuple(seen)


class RuleError(ValueError):
    pass


@dataclass(frozen=True)
class TGD:
    id: str
    body: tuple[Atom, ...]
    head: tuple[Atom, ...]
    exist_vars: tuple[Variable, ...] = ()

    def __post_init__(self) -> None:
        if not self.body:
            raise RuleError(f"rule {self.id}: empty body")
        if not self.head:
            raise RuleError(f"rule {self.id}: empty head")
        if nulls_of(self.body) or nulls_of(self.head):
            raise RuleError(f"rule {self.id}: source rules may not mention nulls")
        body_vars = variables_of(self.body)
        clash = body_vars & set(self.exist_vars)
        if clash:
            names = ",".join(sorted(v.name for v in clash))
            raise RuleError(f"rule {self.id}: existential variable(s) {names} used in body")
        unsafe = variables_of(self.head) - body_vars - set(self.exist_vars)
        if unsafe:
            names = ",".join(sorted(v.name for v in unsafe))
            raise RuleError(f"rule {self.id}: head variable(s) {names} neither in body nor declared existential")

    @cached_property
    def universal_vars(self) -> tuple[Variable, ...]:
        """Body variables in order of first occurrence."""
        return _ordered_vars(self.body)

    @cached_property
    def frontier(self) -> tuple[Variable, ...]:
        head_vars = variables_of(self.head)
        return tuple(v for v in self.universal_vars if v in head_vars)

    def is_normal(self) -> bool:
        if len(self.head) != 1:
            return False
        args = self.head[0].args
        return all(args.count(z) == 1 for z in self.exist_vars)

    def __str__(self) -> str:
        body = ", ".join(str(a) for a in self.body)
        head = ", ".join(str(a) for a in self.head)
        if self.exist_vars:
            head = f"exists {','.join(v.name for v in self.exist_vars)}. {head}"
        return f"{body} -> {head}."


@dataclass(frozen=True)
class NormalTGD(TGD):
    """A TGD with one head atom in which each existential variable occurs once."""

    def __post_init__(self) -> None:
        super().__post_init__()
        if not self.is_normal():
            raise RuleError(f"rule {self.id}: not in single-head normal form")

    @property
    def head_atom(self) -> Atom:
        return self.head[0]

    @classmethod
    def from_tgd(cls, rule: TGD) -> NormalTGD:
        return cls(rule.id, rule.body, rule.head, rule.exist_vars)


class InvalidSubstitution(ValueError):
    pass


class Substitution(Mapping[str, Term]):
    """Immutable map from variable names to terms."""

    __slots__ = ("_bindings", "_hash")

    def __init__(self, bindings: Mapping[str, Term] | Iterable[tuple[str, Term]] = ()):
        items = dict(bindings.items() if isinstance(bindings, Mapping) else bindings)
        for name, value in items.items():
            if isinstance(name, Variable):
                raise TypeError("bind by variable name, not Variable")
        self._bindings = items
        self._hash: int | None = None

    def __getitem__(self, name: str) -> Term:
        return self._bindings[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._bindings)

    def __len__(self) -> int:
        return len(self._bindings)

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._bindings.items()))
        return self._hash

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Substitution):
            return self._bindings == other._bindings
        return NotImplemented

    def __repr__(self) -> str:
        inner = ", ".join(f"{k}/{v}" for k, v in self._bindings.items())
        return f"[{inner}]"

    def term(self, t: Term) -> Term:
        if isinstance(t, Variable):
            return self._bindings.get(t.name, t)
        return t

    def atom(self, a: Atom) -> Atom:
        return Atom(a.predicate, tuple(self.term(t) for t in a.args))

    def then(self, other: Substitution) -> Substitution:
        """The substitution equal to applying self first and other second."""
        out = {k: other.term(v) for k, v in self._bindings.items()}
        for k, v in other.items():
            out.setdefault(k, v)
        return Substitution(out)


@dataclass(frozen=True)
class RuleInstance:
    base: NormalTGD
    theta: Substitution
    head_atom: Atom
    body_atoms: tuple[Atom, ...]
    fresh_nulls: frozenset[Null] = field(default=frozenset())

    def binding_tuple(self) -> tuple[Term, ...]:
        """Universal images in declaration order, then existential images."""
        vs = self.base.universal_vars + self.base.exist_vars
        return tuple(self.theta.term(v) for v in vs)

    def atoms(self) -> tuple[Atom, ...]:
        return self.body_atoms + (self.head_atom,)

    def variables(self) -> set[Variable]:
        return variables_of(self.atoms())

    def var_nulls(self) -> set[Term]:
        return var_nulls_of(self.atoms())

    def rename(self, mapping: Mapping[Term, Term]) -> RuleInstance:
        """Rename variables and nulls of the instance (constants stay fixed)."""
        def r(t: Term) -> Term:
            return mapping.get(t, t)
        theta = Substitution({k: r(v) for k, v in self.theta.items()})
        return instantiate_rule(self.base, theta)

    def __str__(self) -> str:
        body = ", ".join(str(a) for a in self.body_atoms)
        return f"{body} -> {self.head_atom}"


def instantiate_rule(rule: NormalTGD, theta: Mapping[str, Term]) -> RuleInstance:
    theta = theta if isinstance(theta, Substitution) else Substitution(theta)
    known = {v.name for v in rule.universal_vars} | {v.name for v in rule.exist_vars}
    extra = set(theta) - known
    if extra:
        raise InvalidSubstitution(f"bindings for variables not in rule {rule.id}: {sorted(extra)}")
    fresh = []
    for z in rule.exist_vars:
        image = theta.get(z.name)
        if not isinstance(image, Null):
            raise InvalidSubstitution(f"existential {z.name} of rule {rule.id} must be bound to a null")
        fresh.append(image)
    if len(set(fresh)) != len(fresh):
        raise InvalidSubstitution(f"existentials of rule {rule.id} need distinct nulls")
    body = tuple(theta.atom(a) for a in rule.body)
    if nulls_of(body) & set(fresh):
        raise InvalidSubstitution(f"fresh null of rule {rule.id} already occurs in its body")
    return RuleInstance(rule, theta, theta.atom(rule.head_atom), body, frozenset(fresh))


def apply_substitution(target, theta: Mapping[str, Term]):
    """Apply theta to a term tuple, an atom, an atom sequence or a normal rule."""
    theta = theta if isinstance(theta, Substitution) else Substitution(theta)
    if isinstance(target, NormalTGD):
        return instantiate_rule(target, theta)
    if isinstance(target, TGD):
        raise InvalidSubstitution("normalize multi-head rules before instantiating them")
    if isinstance(target, Atom):
        return theta.atom(target)
    if isinstance(target, RuleInstance):
        return instantiate_rule(target.base, target.theta.then(theta))
    target = tuple(target)
    if all(isinstance(x, Atom) for x in target) and target:
        return tuple(theta.atom(a) for a in target)
    return tuple(theta.term(t) for t in target)


def max_arity(rules: Iterable[TGD]) -> int:
    return max((a.arity for r in rules for a in r.body + r.head), default=0)


def constants_of_rules(rules: Iterable[TGD]) -> set[Constant]:
    return {t for r in rules for a in r.body + r.head for t in a.args if isinstance(t, Constant)}
