"""Oblivious chase with per-atom levels, entailment and query answering."""

from __future__ import annotations

import copy
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

from .homomorphism import (AtomIndex, Homomorphism, apply_homomorphism, find_homomorphisms,
                           iter_homomorphisms, match_atom)
from .model import Atom, NormalTGD, Null, Term, term_key
from .normalize import normalize
from .syntax import BCQ, Database

DEFAULT_MAX_ATOMS = 1_000_000


class TriggerError(ValueError):
    pass


@dataclass(frozen=True)
class TriggerRecord:
    rule_id: str
    binding: tuple[tuple[str, Term], ...]
    body_image: tuple[Atom, ...]
    produced: Atom


@dataclass
class ChaseState:
    atoms: list[Atom] = field(default_factory=list)
    level: dict[Atom, int] = field(default_factory=dict)
    trigger_log: list[TriggerRecord] = field(default_factory=list)
    next_null: int = 1
    step_count: int = 0
    provenance: dict[Atom, TriggerRecord] = field(default_factory=dict)
    fired: set[tuple[str, tuple]] = field(default_factory=set)
    overflow: bool = False
    saturated: bool = False
    completed_level: int = 0

    @classmethod
    def from_database(cls, db: Iterable[Atom]) -> ChaseState:
        state = cls()
        for a in db:
            if a not in state.level:
                state.atoms.append(a)
                state.level[a] = 0
        top = max((n.index for a in state.atoms for n in a.nulls()), default=0)
        state.next_null = top + 1
        return state

    def __contains__(self, atom: Atom) -> bool:
        return atom in self.level

    def __len__(self) -> int:
        return len(self.atoms)

    def atom_set(self) -> set[Atom]:
        return set(self.level)

    def derived(self) -> list[Atom]:
        return [a for a in self.atoms if self.level[a] > 0]


def trigger_key(rule: NormalTGD, h: Homomorphism) -> tuple[str, tuple]:
    return rule.id, tuple((v.name, h[v]) for v in rule.universal_vars)


def _apply(state: ChaseState, rule: NormalTGD, h: Homomorphism) -> Atom:
    key = trigger_key(rule, h)
    if key in state.fired:
        raise TriggerError(f"trigger for rule {rule.id} already applied")
    body_image = tuple(apply_homomorphism(h, a) for a in rule.body)
    missing = [a for a in body_image if a not in state.level]
    if missing:
        raise TriggerError(f"body atom {missing[0]} not in the instance")
    ext = dict(h)
    for z in rule.exist_vars:
        ext[z] = Null(state.next_null)
        state.next_null += 1
    produced = apply_homomorphism(ext, rule.head_atom)
    record = TriggerRecord(rule.id, key[1], body_image, produced)
    state.fired.add(key)
    state.trigger_log.append(record)
    state.step_count += 1
    if produced not in state.level:
        state.atoms.append(produced)
        state.level[produced] = 1 + max(state.level[a] for a in body_image)
        state.provenance[produced] = record
    return produced


def chase_step(state: ChaseState, trigger: tuple[NormalTGD, Homomorphism]) -> ChaseState:
    """Apply one trigger to a copy of the state."""
    rule, h = trigger
    new = copy.deepcopy(state)
    _apply(new, rule, h)
    return new


def _unfired(state: ChaseState, rules: Sequence[NormalTGD], level: int):
    """Yield (rule, key, h) for unfired triggers whose body uses an atom of the given level
    and none above it. A trigger may be yielded more than once."""
    usable = AtomIndex(a for a in state.atoms if state.level[a] <= level)
    newest = [a for a in state.atoms if state.level[a] == level]
    for rule in rules:
        for body_atom in rule.body:
            for seed in newest:
                init = match_atom(body_atom, seed)
                if init is None:
                    continue
                for h in iter_homomorphisms(rule.body, usable, init):
                    key = trigger_key(rule, h)
                    if key not in state.fired:
                        yield rule, key, h


def _new_triggers(state: ChaseState, rules: Sequence[NormalTGD], level: int,
                  limit: int | None = None) -> list[tuple[NormalTGD, Homomorphism]] | None:
    """Distinct unfired triggers of the next level, rules in order, bindings sorted.

    Returns None as soon as more than `limit` distinct triggers turn up.
    """
    found: dict[str, dict[tuple, Homomorphism]] = {r.id: {} for r in rules}
    count = 0
    for rule, key, h in _unfired(state, rules, level):
        if key not in found[rule.id]:
            found[rule.id][key] = h
            count += 1
            if limit is not None and count > limit:
                return None
    out: list[tuple[NormalTGD, Homomorphism]] = []
    for rule in rules:
        per_rule = found[rule.id]
        for key in sorted(per_rule, key=lambda k: tuple(term_key(t) for _, t in k[1])):
            out.append((rule, per_rule[key]))
    return out


def _has_new_trigger(state: ChaseState, rules: Sequence[NormalTGD], level: int) -> bool:
    return next(_unfired(state, rules, level), None) is not None


class Chaser:
    """Level-by-level driver for the oblivious chase."""

    def __init__(self, db: Iterable[Atom], rules: Sequence[NormalTGD],
                 max_atoms: int = DEFAULT_MAX_ATOMS):
        self.rules = list(rules)
        self.state = ChaseState.from_database(db)
        self.max_atoms = max_atoms
        if len(self.state) > max_atoms:
            self.state.overflow = True

    def advance(self, max_steps: int | None = None) -> bool:
        """Compute the next level. Returns False at a fixpoint or on overflow."""
        state = self.state
        if state.overflow or state.saturated:
            return False
        # a level with more pending triggers than the atom cap counts as overflow,
        # unless a step budget will stop the level early anyway
        limit = self.max_atoms if max_steps is None else None
        triggers = _new_triggers(state, self.rules, state.completed_level, limit)
        if triggers is None:
            state.overflow = True
            return False
        if not triggers:
            state.saturated = True
            return False
        for rule, h in triggers:
            if max_steps is not None and state.step_count >= max_steps:
                return False
            _apply(state, rule, h)
            if len(state) > self.max_atoms:
                state.overflow = True
                return False
        state.completed_level += 1
        return True


def run_chase(db: Iterable[Atom], rules: Sequence[NormalTGD], level_bound: int,
              max_atoms: int = DEFAULT_MAX_ATOMS, step_indexed: bool = False) -> ChaseState:
    """Atoms of level at most `level_bound`, or the first `level_bound` chase steps.

    Triggers fire breadth-first by level; within a level rules go in order
    and homomorphisms in sorted binding order.
    """
    if level_bound < 0:
        raise ValueError("bound must be non-negative")
    chaser = Chaser(db, rules, max_atoms)
    if step_indexed:
        while chaser.state.step_count < level_bound and chaser.advance(level_bound):
            pass
        return chaser.state
    while chaser.state.completed_level < level_bound and chaser.advance():
        pass
    if chaser.state.completed_level == level_bound and not chaser.state.overflow:
        # peek whether the next level would add anything, for fixpoint reporting
        if not _has_new_trigger(chaser.state, chaser.rules, chaser.state.completed_level):
            chaser.state.saturated = True
    return chaser.state


def entails(state: ChaseState | Iterable[Atom], goal: Atom | Sequence[Atom]) -> Homomorphism | None:
    atoms = state.atoms if isinstance(state, ChaseState) else list(state)
    goals = [goal] if isinstance(goal, Atom) else list(goal)
    hs = find_homomorphisms(goals, atoms, limit=1)
    return hs[0] if hs else None


@dataclass(frozen=True)
class AskVerdict:
    answer: str  # "yes" | "no_within_bound" | "saturated_no" | "overflow"
    bound: int
    witness: Homomorphism | None = None
    depth: int | None = None
    atoms: int = 0

    @property
    def is_yes(self) -> bool:
        return self.answer == "yes"

    def to_json(self) -> dict:
        out = {"answer": self.answer, "bound": self.bound, "atoms": self.atoms}
        if self.witness is not None:
            out["witness"] = {str(k): str(v) for k, v in sorted(
                self.witness.items(), key=lambda kv: term_key(kv[0]))}
            out["depth"] = self.depth
        return out


def relevant_rules(rules: Sequence[NormalTGD], predicates: set[str]) -> list[NormalTGD]:
    """Rules that can contribute, through chains of rules, to the given predicates."""
    needed = set(predicates)
    changed = True
    while changed:
        changed = False
        for r in rules:
            if r.head_atom.predicate in needed:
                for a in r.body:
                    if a.predicate not in needed:
                        needed.add(a.predicate)
                        changed = True
    return [r for r in rules if r.head_atom.predicate in needed]


def ask(db: Database | Iterable[Atom], rules, query: BCQ, level_bound: int,
        max_atoms: int = DEFAULT_MAX_ATOMS, step_indexed: bool = False) -> AskVerdict:
    """Bounded semi-decision for D together with the rules entailing the query.

    Rules are normalized first and only rules feeding the query predicates
    are chased. The query body is matched directly so the atomization rule
    does not consume a level of the bound.
    """
    normal = relevant_rules(normalize(rules, query).ontology, {a.predicate for a in query.atoms})
    chaser = Chaser(db, normal, max_atoms)
    state = chaser.state

    def check() -> AskVerdict | None:
        h = entails(state, query.atoms)
        if h is None:
            return None
        depth = max(state.level[apply_homomorphism(h, a)] for a in query.atoms)
        return AskVerdict("yes", level_bound, h, depth, len(state))

    if step_indexed:
        found = check()
        while found is None and state.step_count < level_bound and not state.overflow:
            if not chaser.advance(level_bound):
                break
            found = check()
    else:
        found = check()
        while found is None and state.completed_level < level_bound:
            if not chaser.advance():
                break
            found = check()
        if found is None and not state.saturated and not state.overflow:
            if not _has_new_trigger(state, chaser.rules, state.completed_level):
                state.saturated = True
    if found is not None:
        return found
    if state.overflow:
        return AskVerdict("overflow", level_bound, atoms=len(state))
    if state.saturated:
        return AskVerdict("saturated_no", level_bound, atoms=len(state))
    return AskVerdict("no_within_bound", level_bound, atoms=len(state))
