"""Command-line entry point: tgdloops <command> RULES [options]."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .chase import DEFAULT_MAX_ATOMS, ask, run_chase
from .classes import ALL_CLASSES, classify
from .derivation import enumerate_trees, supporting_tree, validate_tree
from .loops import DEFAULT_MAX_LEN, DEFAULT_MAX_STATES, enumerate_loop_patterns
from .model import term_key
from .normalize import normalize
from .syntax import Database, ParseError, export_dot, parse_facts, parse_query, parse_rules, render

SCHEMA = "v1"

EXIT_OK = 0
EXIT_NO = 1
EXIT_OVERFLOW = 2
EXIT_INCONCLUSIVE = 3
EXIT_USAGE = 64
EXIT_PARSE = 65


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _non_negative(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return value


def _positive(text: str) -> int:
    value = _non_negative(text)
    if value == 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tgdloops", description="Query answering and loop analysis for existential rules.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, emit_default="text", emits=("text", "json")):
        p.add_argument("rules", help="rule file")
        p.add_argument("--emit", choices=emits, default=emit_default)
        p.add_argument("--out", help="write the result to this file instead of stdout")

    p = sub.add_parser("parse", help="parse and pretty-print inputs")
    common(p)
    p.add_argument("--db")
    p.add_argument("--query")

    p = sub.add_parser("normalize", help="single-head normal form")
    common(p)
    p.add_argument("--query")

    p = sub.add_parser("chase", help="bounded oblivious chase")
    common(p)
    p.add_argument("--db", required=True)
    p.add_argument("--depth", type=_non_negative, required=True)
    p.add_argument("--step-indexed", action="store_true")
    p.add_argument("--max-atoms", type=_positive, default=DEFAULT_MAX_ATOMS)

    p = sub.add_parser("ask", help="answer a Boolean conjunctive query up to a bound")
    common(p, emit_default="json")
    p.add_argument("--db", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--depth", type=_non_negative, required=True)
    p.add_argument("--step-indexed", action="store_true")
    p.add_argument("--max-atoms", type=_positive, default=DEFAULT_MAX_ATOMS)

    p = sub.add_parser("tree", help="supporting derivation tree, or abstract trees without --db")
    common(p, emits=("text", "json", "dot"))
    p.add_argument("--db")
    p.add_argument("--query")
    p.add_argument("--depth", type=_positive, required=True)
    p.add_argument("--max-atoms", type=_positive, default=200_000)
    p.add_argument("--root", help="root predicate of abstract trees")
    p.add_argument("--limit", type=_positive, default=50, help="abstract trees to print")

    p = sub.add_parser("loops", help="enumerate loop patterns")
    common(p)
    p.add_argument("--max-path-len", type=_positive, default=DEFAULT_MAX_LEN)

    p = sub.add_parser("classify", help="class membership verdicts")
    common(p, emit_default="json")
    p.add_argument("--classes", default=",".join(ALL_CLASSES))
    p.add_argument("--max-path-len", type=_positive, default=DEFAULT_MAX_LEN)
    return parser


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise UsageError(f"cannot read {path}: {err.strerror}") from err


def _load(args):
    rules = parse_rules(_read(args.rules))
    db = None
    if getattr(args, "db", None):
        db = parse_facts(_read(args.db), rules.predicate_signature)
    query = None
    if getattr(args, "query", None):
        query = parse_query(args.query, rules.predicate_signature)
    return rules, db, query


def _dump(obj: dict) -> str:
    return json.dumps({"schema": SCHEMA, **obj}, indent=2) + "\n"


def cmd_parse(args) -> tuple[str, int]:
    rules, db, query = _load(args)
    if args.emit == "json":
        return _dump({"rules": [str(r) for r in rules.rules], "ids": [r.id for r in rules.rules],
                      "facts": [str(a) for a in db] if db is not None else None,
                      "query": render(query) if query else None}), EXIT_OK
    text = render(rules)
    if db is not None:
        text += render(db)
    if query is not None:
        text += render(query) + "\n"
    return text, EXIT_OK


def cmd_normalize(args) -> tuple[str, int]:
    rules, _, query = _load(args)
    result = normalize(rules, query)
    if args.emit == "json":
        return _dump({"rules": [{"id": r.id, "rule": str(r), "from": result.provenance.get(r.id)}
                                for r in result.rules],
                      "query": render(result.query) if result.query else None}), EXIT_OK
    text = "".join(f"{r.id}: {r}\n" for r in result.rules)
    if result.query is not None:
        text += render(result.query) + "\n"
    return text, EXIT_OK


def cmd_chase(args) -> tuple[str, int]:
    rules, db, _ = _load(args)
    normal = normalize(rules).rules
    state = run_chase(db, normal, args.depth, args.max_atoms, args.step_indexed)
    code = EXIT_OVERFLOW if state.overflow else EXIT_OK
    if args.emit == "json":
        atoms = []
        for a in state.atoms:
            rec = state.provenance.get(a)
            atoms.append({"atom": str(a), "level": state.level[a],
                          "trigger": None if rec is None else {
                              "rule": rec.rule_id,
                              "binding": {k: str(v) for k, v in rec.binding}}})
        return _dump({"bound": args.depth, "step_indexed": args.step_indexed,
                      "overflow": state.overflow, "saturated": state.saturated,
                      "atoms": atoms}), code
    return render(Database(tuple(state.atoms))), code


def cmd_ask(args) -> tuple[str, int]:
    rules, db, query = _load(args)
    verdict = ask(db, rules, query, args.depth, args.max_atoms, args.step_indexed)
    code = {"yes": EXIT_OK, "overflow": EXIT_OVERFLOW}.get(verdict.answer, EXIT_NO)
    if args.emit == "json":
        return _dump(verdict.to_json()), code
    line = verdict.answer
    if verdict.witness is not None:
        pairs = ", ".join(f"{k}={v}" for k, v in sorted(verdict.witness.items(),
                                                        key=lambda kv: term_key(kv[0])))
        line += f" depth={verdict.depth} {pairs}".rstrip()
    return line + "\n", code


def _tree_json(node) -> dict:
    return {"atom": str(node.atom),
            "instance": None if node.instance is None else str(node.instance),
            "children": [None if c is None else _tree_json(c) for c in node.children]}


def _tree_text(node, indent: int = 0) -> str:
    text = "  " * indent + node.label_text() + "\n"
    for k, c in enumerate(node.children):
        if c is None:
            text += "  " * (indent + 1) + f"[database] {node.instance.body_atoms[k]}\n"
        else:
            text += _tree_text(c, indent + 1)
    return text


def cmd_tree(args) -> tuple[str, int]:
    rules, db, query = _load(args)
    result = normalize(rules, query)
    if db is None:
        root = args.root
        if root is None and query is not None:
            root = result.query.atoms[0].predicate
        trees = []
        for tree in enumerate_trees(result.rules, args.depth, root):
            trees.append(tree)
            if len(trees) >= args.limit:
                break
        if args.emit == "json":
            return _dump({"trees": [_tree_json(t.root) for t in trees]}), EXIT_OK
        if args.emit == "dot":
            return "".join(export_dot(t, f"tree{k}") for k, t in enumerate(trees)), EXIT_OK
        return "\n".join(_tree_text(t.root) for t in trees), EXIT_OK
    if query is None:
        raise UsageError("tree with --db needs --query")
    # a one-atom query is its own goal; longer queries go through the query rule
    rules_used, goal = result.rules, result.query.atoms[0]
    if len(query.atoms) == 1:
        rules_used, goal = result.ontology, query.atoms[0]
    try:
        tree = supporting_tree(rules_used, db, goal, args.depth, args.max_atoms)
    except OverflowError:
        return _dump({"found": False, "overflow": True}) if args.emit == "json" else "overflow\n", EXIT_OVERFLOW
    if tree is None:
        if args.emit == "json":
            return _dump({"found": False}), EXIT_NO
        return "no supporting tree within the bound\n", EXIT_NO
    check = validate_tree(tree, db)
    if args.emit == "dot":
        return export_dot(tree), EXIT_OK
    if args.emit == "json":
        return _dump({"found": True, "depth": tree.depth(), "valid": check.ok,
                      "tree": _tree_json(tree.root)}), EXIT_OK
    return _tree_text(tree.root), EXIT_OK


def cmd_loops(args) -> tuple[str, int]:
    rules, _, _ = _load(args)
    census = enumerate_loop_patterns(normalize(rules).rules, args.max_path_len, DEFAULT_MAX_STATES)
    code = EXIT_INCONCLUSIVE if census.capped else EXIT_OK
    if args.emit == "json":
        return _dump({"loops": [loop.to_json() for loop in census.loops],
                      "caps": {"max_path_len": args.max_path_len, "hit": census.capped,
                               "states": census.states}}), code
    lines = [f"{' '.join(loop.rule_ids)}: {loop}" for loop in census.loops]
    if census.capped:
        lines.append("search cap reached; list may be incomplete")
    return "".join(line + "\n" for line in lines), code


def cmd_classify(args) -> tuple[str, int]:
    rules, _, _ = _load(args)
    names = [c.strip().lower() for c in args.classes.split(",") if c.strip()]
    unknown = [c for c in names if c not in ALL_CLASSES]
    if unknown or not names:
        raise UsageError(f"unknown class(es): {','.join(unknown) or '(none given)'}; "
                         f"choose from {','.join(ALL_CLASSES)}")
    reports = classify(rules, names, args.max_path_len, DEFAULT_MAX_STATES)
    verdicts = {r["class"]: r["verdict"] for r in reports}
    if "no" in verdicts.values():
        code = EXIT_NO
    elif "inconclusive" in verdicts.values():
        code = EXIT_INCONCLUSIVE
    else:
        code = EXIT_OK
    if args.emit == "json":
        return _dump({**verdicts, "reports": reports}), code
    return "".join(f"{k}: {v}\n" for k, v in verdicts.items()), code


COMMANDS = {
    "parse": cmd_parse,
    "normalize": cmd_normalize,
    "chase": cmd_chase,
    "ask": cmd_ask,
    "tree": cmd_tree,
    "loops": cmd_loops,
    "classify": cmd_classify,
}


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exit_:
        return int(exit_.code or 0)
    try:
        text, code = COMMANDS[args.command](args)
    except ParseError as err:
        print(f"parse error: {err}", file=sys.stderr)
        return EXIT_PARSE
    except UsageError as err:
        print(f"tgdloops: {err}", file=sys.stderr)
        return EXIT_USAGE
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
