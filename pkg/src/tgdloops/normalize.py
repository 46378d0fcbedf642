"""Rewrite rule sets into single-head form and queries into one atom."""

from __future__ import annotations

from dataclasses import dataclass, field

from .model import Atom, NormalTGD, TGD, Variable
from .syntax import BCQ, SourceRuleSet

QUERY_PREDICATE = "q_star"
QUERY_RULE_ID = "q_star"


@dataclass(frozen=True)
class NormalizationResult:
    rules: tuple[NormalTGD, ...]
    query: BCQ | None
    aux_predicates: frozenset[str] = frozenset()
    provenance: dict[str, str] = field(default_factory=dict, compare=False)

    @property
    def ontology(self) -> tuple[NormalTGD, ...]:
        """The rules without the query-atomization rule."""
        return tuple(r for r in self.rules if self.provenance.get(r.id) != "query")


def _fresh_name(base: str, taken: set[str]) -> str:
    name = base
    while name in taken:
        name += "_"
    taken.add(name)
    return name


def _split_rule(rule: TGD, taken_preds: set[str], taken_ids: set[str]) -> list[NormalTGD]:
    if rule.is_normal():
        return [NormalTGD.from_tgd(rule)]
    head_vars = []
    for a in rule.head:
        for t in a.args:
            if isinstance(t, Variable) and t not in head_vars:
                head_vars.append(t)
    exist = set(rule.exist_vars)
    ordered = [v for v in head_vars if v not in exist] + [v for v in rule.exist_vars if v in head_vars]
    aux = _fresh_name(f"aux_{rule.id}", taken_preds)
    aux_atom = Atom(aux, tuple(ordered))
    out = [NormalTGD(_fresh_name(f"{rule.id}_aux", taken_ids), rule.body, (aux_atom,), rule.exist_vars)]
    for k, h in enumerate(rule.head, 1):
        out.append(NormalTGD(_fresh_name(f"{rule.id}_p{k}", taken_ids), (aux_atom,), (h,), ()))
    return out


def normalize_rules(rules, taken_preds: set[str] | None = None
                    ) -> tuple[list[NormalTGD], set[str], dict[str, str]]:
    rules = list(rules.rules if isinstance(rules, SourceRuleSet) else rules)
    preds = set(taken_preds or ())
    preds |= {a.predicate for r in rules for a in r.body + r.head}
    ids = {r.id for r in rules}
    before = set(preds)
    out: list[NormalTGD] = []
    provenance: dict[str, str] = {}
    for rule in rules:
        for new in _split_rule(rule, preds, ids):
            out.append(new)
            provenance[new.id] = rule.id
    return out, preds - before, provenance


def normalize(rules, query: BCQ | None = None) -> NormalizationResult:
    """Single-head rules with once-occurring existentials, plus an atomic query.

    A multi-atom head, or a head repeating an existential variable, is routed
    through an auxiliary predicate holding every head variable once
    (frontier first, then existentials) followed by one projection rule per
    original head atom.
    """
    source = list(rules.rules if isinstance(rules, SourceRuleSet) else rules)
    query_preds = {a.predicate for a in query.atoms} if query else set()
    out, aux, provenance = normalize_rules(source, query_preds)
    new_query = None
    if query is not None:
        taken = {a.predicate for r in out for a in r.body + r.head} | query_preds
        qpred = _fresh_name(QUERY_PREDICATE, taken)
        ids = {r.id for r in out}
        qid = _fresh_name(QUERY_RULE_ID, ids)
        head = Atom(qpred, query.free_variables)
        out.append(NormalTGD(qid, query.atoms, (head,), ()))
        provenance[qid] = "query"
        aux = aux | {qpred}
        new_query = BCQ((head,))
    return NormalizationResult(tuple(out), new_query, frozenset(aux), provenance)
