"""Homomorphism search between atom sets and most-general unification."""

from __future__ import annotations

from collections import defaultdict
from collections.abc import Iterable, Mapping

from .model import Atom, Constant, Null, Term, Variable, atom_key

Homomorphism = dict[Term, Term]


def _may_map(source: Term, target: Term) -> bool:
    if isinstance(source, Constant):
        return source == target
    if isinstance(source, Null):
        return not isinstance(target, Variable)
    return True


def _extend(h: Homomorphism, source: Atom, target: Atom) -> Homomorphism | None:
    if source.predicate != target.predicate or source.arity != target.arity:
        return None
    out = None
    for s, t in zip(source.args, target.args):
        if not _may_map(s, t):
            return None
        bound = h.get(s) if out is None else out.get(s)
        if bound is None:
            if isinstance(s, Constant):
                continue
            if out is None:
                out = dict(h)
            out[s] = t
        elif bound != t:
            return None
    return h if out is None else out


class AtomIndex:
    """Atoms grouped by predicate and arity, each group in sorted order."""

    def __init__(self, atoms: Iterable[Atom]):
        groups: dict[tuple[str, int], list[Atom]] = defaultdict(list)
        for a in sorted(set(atoms), key=atom_key):
            groups[(a.predicate, a.arity)].append(a)
        self.groups = dict(groups)

    def get(self, key, default=()):
        return self.groups.get(key, default)


def match_atom(pattern: Atom, target: Atom, h: Mapping[Term, Term] | None = None) -> Homomorphism | None:
    """Extend h so that it maps pattern onto target, if possible."""
    return _extend(dict(h or {}), pattern, target)


def iter_homomorphisms(source: Iterable[Atom], target: Iterable[Atom] | AtomIndex,
                       initial: Mapping[Term, Term] | None = None):
    """Yield every homomorphism h with h(source) contained in target.

    Constants map to themselves, nulls to constants or nulls, variables to
    anything. Enumeration order is deterministic: source atoms are matched
    most-constrained first and candidates are tried in sorted order.
    """
    index = target if isinstance(target, AtomIndex) else AtomIndex(target)
    atoms = list(dict.fromkeys(source))
    order = sorted(range(len(atoms)),
                   key=lambda i: (len(index.get((atoms[i].predicate, atoms[i].arity), ())), i))
    atoms = [atoms[i] for i in order]
    start = dict(initial or {})
    for term, image in start.items():
        if not _may_map(term, image):
            return

    def search(k: int, h: Homomorphism):
        if k == len(atoms):
            yield dict(h)
            return
        for cand in index.get((atoms[k].predicate, atoms[k].arity), ()):
            ext = _extend(h, atoms[k], cand)
            if ext is not None:
                yield from search(k + 1, ext)

    yield from search(0, start)


def find_homomorphisms(source: Iterable[Atom], target: Iterable[Atom],
                       limit: int | None = None,
                       initial: Mapping[Term, Term] | None = None) -> list[Homomorphism]:
    out: list[Homomorphism] = []
    for h in iter_homomorphisms(source, target, initial):
        out.append({k: v for k, v in h.items() if not isinstance(k, Constant)})
        if limit is not None and len(out) >= limit:
            break
    return out


def apply_homomorphism(h: Mapping[Term, Term], atom: Atom) -> Atom:
    return Atom(atom.predicate, tuple(h.get(t, t) for t in atom.args))


def _walk(t: Term, s: dict[Variable, Term]) -> Term:
    while isinstance(t, Variable) and t in s:
        t = s[t]
    return t


def unify(pairs: Iterable[tuple[Term, Term]], keep: frozenset[Variable] | set[Variable] = frozenset()
          ) -> dict[Variable, Term] | None:
    """Most general unifier of term pairs; only variables are bindable.

    When two variables meet, the one in `keep` survives, so callers can
    protect the names already used in a partially built structure.
    """
    s: dict[Variable, Term] = {}
    for a, b in pairs:
        a, b = _walk(a, s), _walk(b, s)
        if a == b:
            continue
        if isinstance(a, Variable) and isinstance(b, Variable):
            if a in keep and b not in keep:
                s[b] = a
            else:
                s[a] = b
        elif isinstance(a, Variable):
            s[a] = b
        elif isinstance(b, Variable):
            s[b] = a
        else:
            return None
    return {v: _walk(v, s) for v in s}


def unify_atoms(left: Atom, right: Atom, keep=frozenset()) -> dict[Variable, Term] | None:
    if left.predicate != right.predicate or left.arity != right.arity:
        return None
    return unify(zip(left.args, right.args), keep)
