"""Derivation paths and trees, tree instantiation over a database, folding."""

from __future__ import annotations

from collections import Counter
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass, field

from .comparability import comparable_instances
from .homomorphism import Homomorphism, iter_homomorphisms, match_atom, unify
from .model import (Atom, Constant, InvalidSubstitution, NormalTGD, Null, RuleInstance,
                    Substitution, Term, Variable, instantiate_rule, nulls_of, var_nulls_of)


@dataclass(frozen=True)
class PathElement:
    atom: Atom
    instance: RuleInstance

    def __str__(self) -> str:
        return f"({self.atom}, [{self.instance}])"


@dataclass(frozen=True)
class DerivationPath:
    elements: tuple[PathElement, ...]

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __getitem__(self, k):
        if isinstance(k, slice):
            return DerivationPath(self.elements[k])
        return self.elements[k]

    @property
    def atoms(self) -> list[Atom]:
        return [e.atom for e in self.elements]

    @property
    def instances(self) -> list[RuleInstance]:
        return [e.instance for e in self.elements]

    def __str__(self) -> str:
        return " ".join(str(e) for e in self.elements)


def as_path(candidate) -> DerivationPath:
    if isinstance(candidate, DerivationPath):
        return candidate
    elements = []
    for e in candidate:
        elements.append(e if isinstance(e, PathElement) else PathElement(*e))
    return DerivationPath(tuple(elements))


@dataclass(frozen=True)
class Check:
    ok: bool
    reason: str = ""
    index: int | None = None

    def __bool__(self) -> bool:
        return self.ok


def _is_rule_instance(inst: RuleInstance) -> bool:
    try:
        return instantiate_rule(inst.base, inst.theta) == inst
    except InvalidSubstitution:
        return False


def validate_path(candidate) -> Check:
    """Check the chaining, instance and null-freshness conditions of a path."""
    path = as_path(candidate)
    if not path.elements:
        return Check(False, "empty path")
    for i, e in enumerate(path.elements):
        if e.atom != e.instance.head_atom:
            return Check(False, f"element {i}: atom {e.atom} is not the head of its rule instance", i)
        if not _is_rule_instance(e.instance):
            return Check(False, f"element {i}: not an instance of rule {e.instance.base.id}", i)
        if i + 1 < len(path) and path[i + 1].atom not in e.instance.body_atoms:
            return Check(False, f"element {i}: next atom {path[i + 1].atom} is not in its body", i)
        fresh = e.instance.fresh_nulls & e.atom.nulls()
        for j in range(i + 1, len(path)):
            clash = fresh & nulls_of(path[j].instance.atoms())
            if clash:
                n = min(clash, key=lambda x: x.index)
                return Check(False, f"element {j}: reuses null {n} introduced at element {i}", j)
    return Check(True)


def _rename_apart(path: DerivationPath, other: DerivationPath) -> DerivationPath:
    """Copy of path whose variables and nulls are disjoint from those of other."""
    taken = {t for e in other for t in e.instance.var_nulls()}
    names = {t.name for t in taken if isinstance(t, Variable)}
    offset = 1 + max((t.index for t in taken if isinstance(t, Null)), default=0)
    mapping: dict[Term, Term] = {}
    for e in path:
        for t in e.instance.var_nulls():
            if isinstance(t, Null):
                mapping[t] = Null(t.index + offset)
            else:
                name = t.name
                while name in names:
                    name += "'"
                mapping[t] = Variable(name)
    elements = []
    for e in path:
        inst = e.instance.rename(mapping)
        elements.append(PathElement(inst.head_atom, inst))
    return DerivationPath(tuple(elements))


def paths_comparable(p1, p2) -> bool:
    """Same length and elementwise comparable once the two paths share no names."""
    p1, p2 = as_path(p1), as_path(p2)
    if len(p1) != len(p2):
        return False
    p2 = _rename_apart(p2, p1)
    return all(comparable_instances(a.instance, b.instance) for a, b in zip(p1, p2))


def path_anchors(path: DerivationPath, i: int, j: int) -> set[Term]:
    """Variables and nulls present in every atom from position i to j inclusive."""
    out = set(path[i].atom.var_nulls())
    for k in range(i + 1, j + 1):
        out &= path[k].atom.var_nulls()
    return out


# -- trees ---------------------------------------------------------------

@dataclass(frozen=True)
class TreeNode:
    """A labeled tree node.

    Rule nodes carry an instance whose body atoms line up with `children`;
    a None child is a body atom left for the database. Database leaves
    have no instance and stand for the label (beta, beta).
    """

    atom: Atom
    instance: RuleInstance | None = None
    children: tuple[TreeNode | None, ...] = ()

    @property
    def is_fact(self) -> bool:
        return self.instance is None

    def label(self) -> tuple:
        return (self.atom, self.instance if self.instance is not None else self.atom)

    def label_text(self) -> str:
        if self.instance is None:
            return f"({self.atom}, {self.atom})"
        return f"({self.atom}, {self.instance})"

    def rule_children(self) -> list[TreeNode]:
        return [c for c in self.children if c is not None and not c.is_fact]

    def depth(self) -> int:
        if self.is_fact:
            return 0
        return 1 + max((c.depth() for c in self.rule_children()), default=0)

    def walk(self) -> Iterator[TreeNode]:
        yield self
        for c in self.children:
            if c is not None:
                yield from c.walk()


@dataclass(frozen=True)
class DerivationTree:
    root: TreeNode

    def depth(self) -> int:
        return self.root.depth()

    def nodes(self) -> list[TreeNode]:
        return list(self.root.walk())

    def leaf_nodes(self) -> list[TreeNode]:
        return [n for n in self.root.walk() if not any(c is not None for c in n.children)]

    def paths(self) -> list[DerivationPath]:
        """Root-to-leaf paths through rule nodes."""
        out: list[DerivationPath] = []

        def go(node: TreeNode, prefix: tuple[PathElement, ...]):
            here = prefix + (PathElement(node.atom, node.instance),)
            kids = node.rule_children()
            if not kids:
                out.append(DerivationPath(here))
            for c in kids:
                go(c, here)

        if not self.root.is_fact:
            go(self.root, ())
        return out

    def variables(self) -> set[Variable]:
        out: set[Variable] = set()
        for n in self.root.walk():
            out |= n.atom.variables()
            if n.instance is not None:
                out |= n.instance.variables()
        return out


@dataclass(frozen=True)
class InstantiatedTree(DerivationTree):
    pass


def validate_tree(tree: DerivationTree, db: Iterable[Atom] | None = None) -> Check:
    """Structural conditions on labels, children, null freshness and leaves."""
    facts = set(db) if db is not None else None

    def descendants_mention(node: TreeNode, nulls: set[Null]) -> bool:
        for c in node.children:
            if c is None:
                continue
            for d in c.walk():
                terms = set(d.atom.args)
                if d.instance is not None:
                    terms |= {t for a in d.instance.atoms() for t in a.args}
                if terms & nulls:
                    return True
        return False

    for node in tree.root.walk():
        if node.is_fact:
            if node.children:
                return Check(False, f"database leaf {node.atom} has children")
            if facts is not None and node.atom not in facts:
                return Check(False, f"leaf {node.atom} is not a database fact")
            continue
        inst = node.instance
        if inst.head_atom != node.atom:
            return Check(False, f"node {node.atom}: label atom differs from rule head")
        if not _is_rule_instance(inst):
            return Check(False, f"node {node.atom}: not an instance of rule {inst.base.id}")
        if len(node.children) != len(inst.body_atoms):
            return Check(False, f"node {node.atom}: children do not line up with body atoms")
        for body_atom, child in zip(inst.body_atoms, node.children):
            if child is None:
                if body_atom.nulls():
                    return Check(False, f"node {node.atom}: open body atom {body_atom} mentions a null")
                if facts is not None:
                    return Check(False, f"node {node.atom}: body atom {body_atom} left uninstantiated")
            elif child.atom != body_atom:
                return Check(False, f"node {node.atom}: child {child.atom} does not match {body_atom}")
        fresh = set(inst.fresh_nulls)
        if fresh and descendants_mention(node, fresh):
            return Check(False, f"node {node.atom}: fresh null reappears below it")
    if facts is not None and tree.variables():
        return Check(False, "instantiated tree still mentions variables")
    return Check(True)


# -- enumeration of abstract trees ----------------------------------------

@dataclass
class _Spec:
    rule: NormalTGD
    theta: dict[str, Term]


@dataclass
class _Search:
    rules: Sequence[NormalTGD]
    specs: list[_Spec] = field(default_factory=list)
    links: dict[tuple[int, int], int | None] = field(default_factory=dict)
    subst: dict[Variable, Term] = field(default_factory=dict)
    next_var: int = 1
    next_null: int = 1

    def copy(self) -> _Search:
        return _Search(self.rules, list(self.specs), dict(self.links), dict(self.subst),
                       self.next_var, self.next_null)

    def resolve(self, t: Term) -> Term:
        while isinstance(t, Variable) and t in self.subst:
            t = self.subst[t]
        return t

    def atom(self, a: Atom) -> Atom:
        return Atom(a.predicate, tuple(self.resolve(t) for t in a.args))

    def body_atom(self, node: int, k: int) -> Atom:
        spec = self.specs[node]
        return self.atom(Substitution(spec.theta).atom(spec.rule.body[k]))

    def open_node(self, rule: NormalTGD, goal: Atom | None) -> int | None:
        """Add a node for rule whose head matches goal; return its id or None."""
        theta: dict[str, Term] = {}
        for v in rule.universal_vars:
            theta[v.name] = Variable(f"{v.name}{self.next_var}")
        self.next_var += 1
        head_args = list(rule.head_atom.args)
        for z in rule.exist_vars:
            pos = head_args.index(z)
            target = self.resolve(goal.args[pos]) if goal is not None else None
            if isinstance(target, Null):
                theta[z.name] = target
            elif isinstance(target, Constant):
                return None
            else:
                theta[z.name] = Null(self.next_null)
                self.next_null += 1
        if goal is not None:
            head = Substitution(theta).atom(rule.head_atom)
            keep = {t for t in self.subst} | {t for a in self._all_atoms() for t in a.variables()}
            mgu = unify(zip(self.atom(head).args, self.atom(goal).args), keep)
            if mgu is None:
                return None
            for v, t in mgu.items():
                self.subst[v] = t
            for v in list(self.subst):
                self.subst[v] = self.resolve(self.subst[v])
        self.specs.append(_Spec(rule, theta))
        return len(self.specs) - 1

    def _all_atoms(self) -> list[Atom]:
        out = []
        for spec in self.specs:
            s = Substitution(spec.theta)
            out.extend(self.atom(s.atom(a)) for a in spec.rule.body + spec.rule.head)
        return out

    def build(self, node: int) -> TreeNode:
        spec = self.specs[node]
        theta = {k: self.resolve(v) for k, v in spec.theta.items()}
        inst = instantiate_rule(spec.rule, theta)
        kids = []
        for k in range(len(spec.rule.body)):
            child = self.links.get((node, k))
            kids.append(self.build(child) if child is not None else None)
        return TreeNode(inst.head_atom, inst, tuple(kids))


def enumerate_trees(rules: Sequence[NormalTGD], depth_bound: int,
                    root_predicate: str | None = None) -> Iterator[DerivationTree]:
    """Every derivation tree of depth at most depth_bound, lazily.

    Nodes are most-general: a child's rule is unified with the parent's
    body atom and nothing else is specialised. Body atoms may stay open for
    the database when they mention no null. Variable names follow the rule
    variable plus a counter, so output is deterministic.
    """
    if depth_bound < 1:
        return
    for rule in rules:
        if root_predicate is not None and rule.head_atom.predicate != root_predicate:
            continue
        search = _Search(rules)
        root = search.open_node(rule, None)
        agenda = [(root, k, depth_bound - 1) for k in range(len(rule.body))]
        for done in _solve(search, agenda):
            try:
                tree = DerivationTree(done.build(root))
            except InvalidSubstitution:
                continue
            if validate_tree(tree):
                yield tree


def _solve(search: _Search, agenda: list[tuple[int, int, int]]) -> Iterator[_Search]:
    if not agenda:
        yield search
        return
    (node, k, remaining), rest = agenda[0], agenda[1:]
    goal = search.body_atom(node, k)
    if not goal.nulls():
        leave = search.copy()
        leave.links[(node, k)] = None
        yield from _solve(leave, rest)
    if remaining < 1:
        return
    for rule in search.rules:
        if rule.head_atom.predicate != goal.predicate or rule.head_atom.arity != goal.arity:
            continue
        branch = search.copy()
        child = branch.open_node(rule, goal)
        if child is None:
            continue
        branch.links[(node, k)] = child
        more = [(child, b, remaining - 1) for b in range(len(rule.body))]
        yield from _solve(branch, more + rest)


# -- instantiation ---------------------------------------------------------

class NullRegistry:
    """Ground nulls keyed by (rule id, existential variable, universal binding).

    Two nodes with the same ground rule instance receive the same null,
    which matches the oblivious chase applying each trigger once.
    """

    def __init__(self, start: int = 1):
        self.next = start
        self.table: dict[tuple, Null] = {}

    def get(self, rule_id: str, var: str, binding: tuple[Term, ...]) -> Null:
        key = (rule_id, var, binding)
        if key not in self.table:
            self.table[key] = Null(self.next)
            self.next += 1
        return self.table[key]


def _ground(t: Term, assign: dict[Term, Term]) -> Term:
    return t if isinstance(t, Constant) else assign.get(t, t)


def instantiate_tree(tree: DerivationTree, db: Iterable[Atom],
                     registry: NullRegistry | None = None) -> Iterator[InstantiatedTree]:
    """All instantiations of an abstract tree on a database.

    Open body atoms are matched against database facts and every node's
    fresh nulls get the ground null of its ground instance. Shared
    variables are solved jointly across siblings rather than by repeated
    relabeling. Groundings that break the tree conditions are skipped.
    """
    facts = list(dict.fromkeys(db))
    registry = registry or NullRegistry(1 + max((n.index for a in facts for n in a.nulls()), default=0))

    def solve(node: TreeNode, assign: dict[Term, Term]) -> Iterator[dict[Term, Term]]:
        kids = [c for c in node.children if c is not None and not c.is_fact]
        yield from solve_children(node, kids, 0, assign)

    def solve_children(node, kids, k, assign):
        if k < len(kids):
            for a in solve(kids[k], assign):
                yield from solve_children(node, kids, k + 1, a)
            return
        inst = node.instance
        slots = [b for b, c in zip(inst.body_atoms, node.children) if c is None]
        init = {t: v for t, v in assign.items() if isinstance(t, Variable)}
        for h in iter_homomorphisms(slots, facts, init):
            a2 = dict(assign)
            a2.update(h)
            binding = tuple(_ground(inst.theta.term(v), a2) for v in inst.base.universal_vars)
            if any(isinstance(t, Variable) for t in binding):
                continue
            ok = True
            for z in inst.base.exist_vars:
                abstract = inst.theta.term(z)
                value = registry.get(inst.base.id, z.name, binding)
                if a2.get(abstract, value) != value:
                    ok = False
                    break
                a2[abstract] = value
            if ok:
                yield a2

    def rebuild(node: TreeNode, assign) -> TreeNode:
        inst = node.instance
        theta = {k: _ground(v, assign) for k, v in inst.theta.items()}
        ground = instantiate_rule(inst.base, theta)
        kids = []
        for b, c in zip(ground.body_atoms, node.children):
            if c is None or c.is_fact:
                kids.append(TreeNode(b))
            else:
                kids.append(rebuild(c, assign))
        return TreeNode(ground.head_atom, ground, tuple(kids))

    if tree.root.is_fact:
        if tree.root.atom in set(facts):
            yield InstantiatedTree(tree.root)
        return
    for assign in solve(tree.root, {}):
        try:
            out = InstantiatedTree(rebuild(tree.root, assign))
        except InvalidSubstitution:
            continue
        # a ground instance repeated below itself would reuse its own null
        if validate_tree(out, facts):
            yield out


def tree_supports(inst: DerivationTree, goal: Atom) -> Homomorphism | None:
    """Homomorphism from the goal onto the root atom, if any."""
    h = match_atom(goal, inst.root.atom)
    if h is None:
        return None
    return {k: v for k, v in h.items() if not isinstance(k, Constant)}


def supporting_tree(rules: Sequence[NormalTGD], db: Iterable[Atom], goal: Atom, depth: int,
                    max_atoms: int = 200_000) -> InstantiatedTree | None:
    """Smallest-depth instantiated tree supporting goal, searching depth by depth.

    Trees are grown from the database upward: at depth d every ground rule
    instance whose body atoms have trees of depth below d yields a tree for
    its head. The returned tree is checked independently by validate_tree.
    """
    facts = list(dict.fromkeys(db))
    registry = NullRegistry(1 + max((n.index for a in facts for n in a.nulls()), default=0))
    trees: dict[Atom, TreeNode] = {a: TreeNode(a) for a in facts}
    for a in facts:
        if match_atom(goal, a) is not None:
            return InstantiatedTree(trees[a])
    newest = set(facts)
    for _ in range(depth):
        known = list(trees)
        added: dict[Atom, TreeNode] = {}
        for rule in rules:
            for h in iter_homomorphisms(rule.body, known):
                body = [Substitution({v.name: h[v] for v in rule.universal_vars}).atom(b)
                        for b in rule.body]
                if not any(b in newest for b in body):
                    continue
                theta = {v.name: h[v] for v in rule.universal_vars}
                binding = tuple(h[v] for v in rule.universal_vars)
                for z in rule.exist_vars:
                    theta[z.name] = registry.get(rule.id, z.name, binding)
                inst = instantiate_rule(rule, theta)
                head = inst.head_atom
                if head in trees or head in added:
                    continue
                added[head] = TreeNode(head, inst, tuple(trees[b] for b in inst.body_atoms))
        if not added:
            return None
        trees.update(added)
        newest = set(added)
        for a, node in added.items():
            if match_atom(goal, a) is not None:
                return InstantiatedTree(node)
        if len(trees) > max_atoms:
            raise OverflowError("tree search exceeded its atom cap")
    return None


# -- folding ------------------------------------------------------------

class FoldError(ValueError):
    pass


def _composite(top: RuleInstance, bottom: RuleInstance, recursive_side: frozenset[int]) -> RuleInstance:
    """Instance of the shared rule taking recursive-side body atoms from bottom."""
    rule = top.base
    if bottom.base.id != rule.id:
        raise FoldError("endpoints are instances of different rules")
    theta: dict[str, Term] = {}
    from_bottom = set().union(*(rule.body[k].variables() for k in recursive_side)) if recursive_side else set()
    from_top = set().union(*(rule.body[k].variables() for k in range(len(rule.body))
                             if k not in recursive_side)) | rule.head_atom.variables()
    for v in rule.universal_vars:
        if v in from_bottom and v in from_top and top.theta.term(v) != bottom.theta.term(v):
            raise FoldError(f"variable {v.name} links the kept and replaced body parts "
                            f"with different values ({top.theta.term(v)} vs {bottom.theta.term(v)})")
        theta[v.name] = bottom.theta.term(v) if v in from_bottom else top.theta.term(v)
    for z in rule.exist_vars:
        theta[z.name] = top.theta.term(z)
    try:
        return instantiate_rule(rule, theta)
    except InvalidSubstitution as err:
        raise FoldError(str(err)) from err


def _split_indices(inst: RuleInstance, recursive_atoms: Iterable[Atom]) -> frozenset[int]:
    wanted = set(recursive_atoms)
    return frozenset(k for k, a in enumerate(inst.body_atoms) if a in wanted)


def fold_loop(path, i: int, j: int) -> DerivationPath:
    """Collapse the loop fragment from position i to j (inclusive, 0-based).

    The fragment must be a loop pattern with a loop-restricted split. The
    element at i is replaced by an instance of the same rule whose
    recursive-side body atoms come from the element at j, and the path
    continues below j when its next atom lies on that side.
    """
    from .loops import check_lr, is_loop_pattern

    path = as_path(path)
    if not (0 <= i < j < len(path)):
        raise FoldError("fold needs 0 <= i < j < len(path)")
    fragment = path[i:j + 1]
    if not is_loop_pattern(fragment):
        raise FoldError("fragment is not a loop pattern")
    witness = check_lr(fragment)
    if witness is None:
        raise FoldError("fragment has no loop-restricted split")
    top, bottom = path[i].instance, path[j].instance
    side = _split_indices(top, witness.parts[0][1])
    composite = _composite(top, bottom, side)
    out = list(path.elements[:i]) + [PathElement(composite.head_atom, composite)]
    if j + 1 < len(path) and path[j + 1].atom in [bottom.body_atoms[k] for k in side]:
        out.extend(path.elements[j + 1:])
    return DerivationPath(tuple(out))


def fold_tree(tree: DerivationTree, route: Sequence[int], i: int, j: int) -> DerivationTree:
    """Fold a loop found along a root-to-leaf route of child positions.

    `route[k]` is the body position followed from the k-th rule node on the
    route. Nodes i and j (0-based along the route) delimit the loop. The
    node at i keeps its head and non-recursive children; its recursive-side
    children are replaced by those of node j.
    """
    from .loops import check_lr, is_loop_pattern

    spine = [tree.root]
    for pos in route:
        nxt = spine[-1].children[pos]
        if nxt is None or nxt.is_fact:
            raise FoldError("route leaves the rule nodes of the tree")
        spine.append(nxt)
    if not (0 <= i < j < len(spine)):
        raise FoldError("fold needs 0 <= i < j along the route")
    fragment = DerivationPath(tuple(PathElement(n.atom, n.instance) for n in spine[i:j + 1]))
    if not is_loop_pattern(fragment):
        raise FoldError("fragment is not a loop pattern")
    witness = check_lr(fragment)
    if witness is None:
        raise FoldError("fragment has no loop-restricted split")
    top, bottom = spine[i], spine[j]
    side = _split_indices(top.instance, witness.parts[0][1])
    composite = _composite(top.instance, bottom.instance, side)
    kids = tuple(bottom.children[k] if k in side else top.children[k]
                 for k in range(len(composite.body_atoms)))
    node = TreeNode(composite.head_atom, composite, kids)
    for depth in range(i - 1, -1, -1):
        parent = spine[depth]
        pos = route[depth]
        node = TreeNode(parent.atom, parent.instance,
                        parent.children[:pos] + (node,) + parent.children[pos + 1:])
    return type(tree)(node)


def leaf_labels(tree: DerivationTree) -> Counter:
    return Counter(n.label() for n in tree.leaf_nodes())


def subsumes(folded: DerivationTree, original: DerivationTree) -> bool:
    """Same root atom and strictly fewer leaves, each one among the original's.

    Roots are compared by atom only: folding at the root replaces the root's
    rule instance while keeping the atom it derives.
    """
    if folded.root.atom != original.root.atom:
        return False
    small, big = leaf_labels(folded), leaf_labels(original)
    return all(big[k] >= c for k, c in small.items()) and sum(small.values()) < sum(big.values())
