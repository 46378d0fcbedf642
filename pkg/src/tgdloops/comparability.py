"""Comparability of term tuples and rule instances."""

from __future__ import annotations

from collections.abc import Collection, Sequence

from .model import Constant, RuleInstance, Term, kind_of


def _same_equalities(t1: Sequence[Term], t2: Sequence[Term]) -> bool:
    n = len(t1)
    return all((t1[i] == t1[j]) == (t2[i] == t2[j])
               for i in range(n) for j in range(i + 1, n))


def type_comparable(t1: Sequence[Term], t2: Sequence[Term]) -> bool:
    if len(t1) != len(t2):
        return False
    for a, b in zip(t1, t2):
        if isinstance(a, Constant) or isinstance(b, Constant):
            if a != b:
                return False
        elif kind_of(a) != kind_of(b):
            return False
    return True


def comparable_tuples(t1: Sequence[Term], t2: Sequence[Term]) -> bool:
    """Same term kinds, same equality pattern, shared terms at the same places."""
    if not type_comparable(t1, t2) or not _same_equalities(t1, t2):
        return False
    shared = set(t1) & set(t2)
    return all((a == s) == (b == s) for s in shared for a, b in zip(t1, t2))


def comparable_instances(r1: RuleInstance, r2: RuleInstance) -> bool:
    return r1.base.id == r2.base.id and comparable_tuples(r1.binding_tuple(), r2.binding_tuple())


def anchored_comparable(t1: Sequence[Term], t2: Sequence[Term], anchors: Collection[Term]) -> bool:
    """Comparability up to renaming of every non-anchor variable or null.

    Constants must coincide and the equality pattern must agree. Anchor
    terms have to sit at exactly the same positions in both tuples. Every
    other variable or null may be renamed into a fresh pool term of either
    kind, so its kind and name are not compared.
    """
    if len(t1) != len(t2) or not _same_equalities(t1, t2):
        return False
    for a, b in zip(t1, t2):
        if isinstance(a, Constant) or isinstance(b, Constant):
            if a != b:
                return False
        if (a in anchors or b in anchors) and a != b:
            return False
    return True


def anchored_instances(r1: RuleInstance, r2: RuleInstance, anchors: Collection[Term]) -> bool:
    return r1.base.id == r2.base.id and anchored_comparable(
        r1.binding_tuple(), r2.binding_tuple(), anchors)
