"""SMILES reading and canonical writing.

Supported subset: organic-subset and bracket atoms (isotope ignored,
charge, H count), bonds ``- = # :``, lowercase aromatic ``b c n o s p``,
ring closures ``1-9`` and ``%nn``, branches and ``.`` fragments.
Stereo marks (``/ \\ @``) are read and dropped.
"""

from __future__ import annotations

from .canon import canonical_rank
from .elements import DEFAULT_TABLE, PERIODIC_SYMBOLS, ElementTable, UnsupportedElement
from .graph import (
    ORGANIC_SUBSET,
    Atom,
    Bond,
    BondOrder,
    MolecularGraph,
    check_valence,
    implicit_hydrogens,
)


class SmilesSyntaxError(ValueError):
    def __init__(self, text: str, pos: int, message: str):
        self.text = text
        self.pos = pos
        super().__init__(f"{message} at position {pos} in {text!r}")


_BOND_SYMBOLS = {
    "-": BondOrder.SINGLE,
    "/": BondOrder.SINGLE,
    "\\": BondOrder.SINGLE,
    "=": BondOrder.DOUBLE,
    "#": BondOrder.TRIPLE,
    ":": BondOrder.AROMATIC,
}
_BARE_AROMATIC = {"b": "B", "c": "C", "n": "N", "o": "O", "s": "S", "p": "P"}
_BRACKET_AROMATIC = {"se": "Se", "as": "As", **_BARE_AROMATIC}


def _parse_bracket(text: str, start: int, end: int, table: ElementTable) -> Atom:
    body = text[start + 1:end]
    pos = 0

    def err(msg: str) -> SmilesSyntaxError:
        return SmilesSyntaxError(text, start + 1 + pos, msg)

    while pos < len(body) and body[pos].isdigit():  # isotope, ignored
        pos += 1
    aromatic = False
    symbol = None
    for cand, elem in sorted(_BRACKET_AROMATIC.items(), key=lambda kv: -len(kv[0])):
        if body.startswith(cand, pos):
            symbol, aromatic = elem, True
            pos += len(cand)
            break
    if symbol is None:
        if pos < len(body) and body[pos].isupper():
            if pos + 1 < len(body) and body[pos + 1].islower() and body[pos:pos + 2] in PERIODIC_SYMBOLS:
                symbol = body[pos:pos + 2]
                pos += 2
            else:
                symbol = body[pos]
                pos += 1
        if symbol is None or symbol not in PERIODIC_SYMBOLS:
            raise err("unknown element in bracket atom")
    if symbol not in table:
        raise UnsupportedElement(symbol)
    if pos < len(body) and body[pos] == "@":  # chirality, dropped
        while pos < len(body) and body[pos] == "@":
            pos += 1
        while pos < len(body) and (body[pos].isupper() and body[pos] != "H" or body[pos].isdigit()):
            pos += 1
    hcount = 0
    if pos < len(body) and body[pos] == "H":
        pos += 1
        hcount = 1
        if pos < len(body) and body[pos].isdigit():
            hcount = int(body[pos])
            pos += 1
    charge = 0
    if pos < len(body) and body[pos] in "+-":
        sign = 1 if body[pos] == "+" else -1
        ch = body[pos]
        pos += 1
        if pos < len(body) and body[pos].isdigit():
            charge = sign * int(body[pos])
            pos += 1
        else:
            charge = sign
            while pos < len(body) and body[pos] == ch:
                charge += sign
                pos += 1
    if pos < len(body) and body[pos] == ":":  # atom class, dropped
        pos += 1
        if pos >= len(body) or not body[pos].isdigit():
            raise err("bad atom class")
        while pos < len(body) and body[pos].isdigit():
            pos += 1
    if pos != len(body):
        raise err("unexpected characters in bracket atom")
    if not -4 <= charge <= 4:
        raise err("charge out of range")
    return Atom(symbol, charge, hcount, aromatic)


def parse_smiles(text: str, strict: bool = False, table: ElementTable = DEFAULT_TABLE) -> MolecularGraph:
    """Parse ``text`` into a molecular graph.

    With ``strict`` the result must also pass the valence check.
    """
    if not text or not text.isascii():
        raise SmilesSyntaxError(text, 0, "empty or non-ASCII input")
    atoms: list[Atom] = []
    bonds: dict[tuple[int, int], BondOrder] = {}
    prev: int | None = None
    pending: tuple[BondOrder, int] | None = None
    branches: list[int | None] = []
    rings: dict[int, tuple[int, BondOrder | None, int]] = {}
    pos = 0
    n = len(text)

    def default_order(a: int, b: int) -> BondOrder:
        if atoms[a].aromatic and atoms[b].aromatic:
            return BondOrder.AROMATIC
        return BondOrder.SINGLE

    def add_bond(a: int, b: int, order: BondOrder, at: int) -> None:
        key = (min(a, b), max(a, b))
        if a == b or key in bonds:
            raise SmilesSyntaxError(text, at, "duplicate bond or self-loop")
        bonds[key] = order

    def add_atom(atom: Atom, at: int) -> None:
        nonlocal prev, pending
        atoms.append(atom)
        idx = len(atoms) - 1
        if prev is not None:
            order = pending[0] if pending else default_order(prev, idx)
            add_bond(prev, idx, order, at)
        elif pending:
            raise SmilesSyntaxError(text, pending[1], "bond without a preceding atom")
        pending = None
        prev = idx

    while pos < n:
        ch = text[pos]
        if ch == "[":
            end = text.find("]", pos)
            if end < 0:
                raise SmilesSyntaxError(text, pos, "unclosed bracket atom")
            add_atom(_parse_bracket(text, pos, end, table), pos)
            pos = end + 1
        elif ch in "BCNOPSFI":
            if text.startswith("Cl", pos) or text.startswith("Br", pos):
                symbol = text[pos:pos + 2]
            else:
                symbol = ch
            if symbol not in table:
                raise UnsupportedElement(symbol)
            add_atom(Atom(symbol), pos)
            pos += len(symbol)
        elif ch in _BARE_AROMATIC:
            symbol = _BARE_AROMATIC[ch]
            if symbol not in table:
                raise UnsupportedElement(symbol)
            add_atom(Atom(symbol, aromatic=True), pos)
            pos += 1
        elif ch in _BOND_SYMBOLS:
            if pending is not None:
                raise SmilesSyntaxError(text, pos, "two consecutive bond symbols")
            pending = (_BOND_SYMBOLS[ch], pos)
            pos += 1
        elif ch == "(":
            if prev is None:
                raise SmilesSyntaxError(text, pos, "branch without a preceding atom")
            if pending is not None:
                raise SmilesSyntaxError(text, pos, "bond symbol before branch")
            branches.append(prev)
            pos += 1
        elif ch == ")":
            if not branches:
                raise SmilesSyntaxError(text, pos, "unbalanced parenthesis")
            if pending is not None:
                raise SmilesSyntaxError(text, pos, "dangling bond symbol")
            prev = branches.pop()
            pos += 1
        elif ch == ".":
            if pending is not None or branches:
                raise SmilesSyntaxError(text, pos, "misplaced fragment separator")
            prev = None
            pos += 1
        elif ch.isdigit() or ch == "%":
            if ch == "%":
                digits = text[pos + 1:pos + 3]
                if len(digits) != 2 or not digits.isdigit():
                    raise SmilesSyntaxError(text, pos, "bad %nn ring label")
                label, width = int(digits), 3
            else:
                label, width = int(ch), 1
            if prev is None:
                raise SmilesSyntaxError(text, pos, "ring label without an atom")
            order = pending[0] if pending else None
            if label in rings:
                other, other_order, _ = rings.pop(label)
                if order is not None and other_order is not None and order != other_order:
                    raise SmilesSyntaxError(text, pos, "conflicting ring-closure bond orders")
                final = order or other_order or default_order(other, prev)
                add_bond(other, prev, final, pos)
            else:
                rings[label] = (prev, order, pos)
            pending = None
            pos += width
        else:
            raise SmilesSyntaxError(text, pos, f"unexpected character {ch!r}")

    if branches:
        raise SmilesSyntaxError(text, n, "unbalanced parenthesis")
    if rings:
        label, (_, _, at) = next(iter(rings.items()))
        raise SmilesSyntaxError(text, at, f"unclosed ring bond {label}")
    if pending is not None:
        raise SmilesSyntaxError(text, pending[1], "dangling bond symbol")
    if not atoms:
        raise SmilesSyntaxError(text, 0, "no atoms")

    graph = MolecularGraph(tuple(atoms), tuple(Bond(a, b, o) for (a, b), o in bonds.items()))
    if strict:
        check_valence(graph)
    return graph


# ---------------------------------------------------------------- writing

def _atom_token(graph: MolecularGraph, i: int) -> str:
    atom = graph.atoms[i]
    h = graph.hydrogens[i]
    symbol = atom.element.lower() if atom.aromatic else atom.element
    bare_ok = (
        atom.element in ORGANIC_SUBSET
        and atom.charge == 0
        and (not atom.aromatic or atom.element.lower() in _BARE_AROMATIC)
    )
    if bare_ok:
        if implicit_hydrogens(graph, i, ignore_explicit=True) == h:
            return symbol
    out = "[" + symbol
    if h:
        out += "H" if h == 1 else f"H{h}"
    if atom.charge:
        sign = "+" if atom.charge > 0 else "-"
        out += sign if abs(atom.charge) == 1 else f"{sign}{abs(atom.charge)}"
    return out + "]"


def _bond_token(graph: MolecularGraph, a: int, b: int) -> str:
    order = graph.bond_order(a, b)
    both_aromatic = graph.atoms[a].aromatic and graph.atoms[b].aromatic
    if order is BondOrder.SINGLE:
        return "-" if both_aromatic else ""
    if order is BondOrder.AROMATIC:
        return "" if both_aromatic else ":"
    return "=" if order is BondOrder.DOUBLE else "#"


def _write_component(graph: MolecularGraph, ranks: list[int], start: int) -> str:
    visited = {start}
    children: dict[int, list[int]] = {}
    ring_events: dict[int, list[tuple[int, int]]] = {}  # atom -> [(partner, ring id)]
    ring_ids = 0

    # pass 1: spanning tree in rank order, remaining edges become ring closures
    seen_edges: set[tuple[int, int]] = set()

    def dfs(a: int, parent: int) -> None:
        nonlocal ring_ids
        children[a] = []
        for b in sorted(graph.neighbors(a), key=lambda x: ranks[x]):
            if b == parent:
                continue
            key = (min(a, b), max(a, b))
            if key in seen_edges:
                continue
            seen_edges.add(key)
            if b in visited:
                ring_events.setdefault(b, []).append((a, ring_ids))
                ring_events.setdefault(a, []).append((b, ring_ids))
                ring_ids += 1
            else:
                visited.add(b)
                children[a].append(b)
                dfs(b, a)

    dfs(start, -1)

    # pass 2: emit
    out: list[str] = []
    written: set[int] = set()
    open_digits: dict[int, int] = {}
    free_digits: list[int] = []
    next_digit = 1

    def digit_str(d: int) -> str:
        return str(d) if d < 10 else f"%{d:02d}"

    def emit(a: int, parent: int) -> None:
        nonlocal next_digit
        if parent >= 0:
            out.append(_bond_token(graph, parent, a))
        out.append(_atom_token(graph, a))
        written.add(a)
        events = ring_events.get(a, [])
        closing = sorted((e for e in events if e[0] in written), key=lambda e: ranks[e[0]])
        opening = sorted((e for e in events if e[0] not in written), key=lambda e: ranks[e[0]])
        for partner, rid in closing:
            d = open_digits.pop(rid)
            out.append(_bond_token(graph, a, partner) + digit_str(d))
            free_digits.append(d)
            free_digits.sort()
        for partner, rid in opening:
            if free_digits:
                d = free_digits.pop(0)
            else:
                d = next_digit
                next_digit += 1
            open_digits[rid] = d
            out.append(digit_str(d))
        kids = children[a]
        for k in kids[:-1]:
            out.append("(")
            emit(k, a)
            out.append(")")
        if kids:
            emit(kids[-1], a)

    emit(start, -1)
    return "".join(out)


def write_smiles(graph: MolecularGraph) -> str:
    """Canonical SMILES: isomorphic graphs give byte-identical strings.

    Fragments are written separately and joined in sorted order.
    """
    if graph.n_atoms == 0:
        return ""
    ranks = canonical_rank(graph)
    parts = []
    for comp in graph.components():
        start = min(comp, key=lambda i: ranks[i])
        parts.append(_write_component(graph, ranks, start))
    return ".".join(sorted(parts))


def canonical_smiles(text: str) -> str:
    return write_smiles(parse_smiles(text))
