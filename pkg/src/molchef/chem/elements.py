"""Element data: masses, electronegativities and allowed valences.

The table ships as a text resource (``data/elements.txt``).  The resource
lists more elements than are *supported* for molecules: noble gases and a
few heavier main-group elements are present only so that charged atoms can
look up the valences of their isoelectronic neighbour (``[N+]`` behaves
like carbon, ``[O-]`` like fluorine, ``[Br-]`` like krypton).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Iterable

DEFAULT_ELEMENTS = (
    "C", "N", "O", "S", "P", "F", "Cl", "Br", "I", "B",
    "Si", "Na", "K", "Li", "Mg", "Zn", "Cu", "Sn", "H",
)

# Every symbol of the periodic table; used to tell an unsupported element
# apart from a malformed token.
PERIODIC_SYMBOLS = frozenset("""
H He Li Be B C N O F Ne Na Mg Al Si P S Cl Ar K Ca Sc Ti V Cr Mn Fe Co Ni
Cu Zn Ga Ge As Se Br Kr Rb Sr Y Zr Nb Mo Tc Ru Rh Pd Ag Cd In Sn Sb Te I Xe
Cs Ba La Ce Pr Nd Pm Sm Eu Gd Tb Dy Ho Er Tm Yb Lu Hf Ta W Re Os Ir Pt Au Hg
Tl Pb Bi Po At Rn Fr Ra Ac Th Pa U Np Pu Am Cm Bk Cf Es Fm Md No Lr Rf Db Sg
Bh Hs Mt Ds Rg Cn Nh Fl Mc Lv Ts Og
""".split())

TABLE_HEADER = "# molchef element table v1"


class UnsupportedElement(ValueError):
    """An element symbol outside the configured element table."""


@dataclass(frozen=True)
class ElementData:
    symbol: str
    atomic_number: int
    mass: float
    electronegativity: float
    valences: tuple[int, ...] | None  # None = unconstrained (metals)


class ElementTable:
    """The supported subset of elements, in a fixed order.

    The order fixes the layout of the element one-hot in atom features.
    """

    def __init__(self, records: Iterable[ElementData], supported: Iterable[str] = DEFAULT_ELEMENTS):
        self._by_symbol = {r.symbol: r for r in records}
        self._by_number = {r.atomic_number: r for r in self._by_symbol.values()}
        supported = list(supported)
        missing = [s for s in supported if s not in self._by_symbol]
        if missing:
            raise UnsupportedElement(f"no element data for {missing}")
        # fixed order: by atomic number
        self.symbols = tuple(sorted(supported, key=lambda s: self._by_symbol[s].atomic_number))
        self.index = {s: i for i, s in enumerate(self.symbols)}

    def __len__(self) -> int:
        return len(self.symbols)

    def __contains__(self, symbol: str) -> bool:
        return symbol in self.index

    def data(self, symbol: str) -> ElementData:
        if symbol not in self.index:
            raise UnsupportedElement(symbol)
        return self._by_symbol[symbol]

    def allowed_valences(self, symbol: str, charge: int = 0) -> tuple[int, ...] | None:
        """Valences for ``symbol`` carrying ``charge``.

        Charged main-group atoms take the valences of the isoelectronic
        element (atomic number minus charge).  Returns ``None`` when the
        element is unconstrained.
        """
        record = self.data(symbol)
        if record.valences is None:
            return None
        if charge == 0:
            return record.valences
        shifted = record.atomic_number - charge
        if shifted <= 0:
            return (0,)
        other = self._by_number.get(shifted)
        if other is None or other.valences is None:
            return None
        return other.valences


def parse_table(text: str) -> list[ElementData]:
    records = []
    lines = text.splitlines()
    if not lines or lines[0].strip() != TABLE_HEADER:
        raise ValueError("element table: missing or unknown version header")
    for lineno, line in enumerate(lines[1:], start=2):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 5:
            raise ValueError(f"element table line {lineno}: expected 5 fields")
        symbol, number, mass, eneg, valences = parts
        vals = None if valences == "-" else tuple(int(v) for v in valences.split(","))
        records.append(ElementData(symbol, int(number), float(mass), float(eneg), vals))
    return records


@lru_cache(maxsize=None)
def _builtin_records() -> tuple[ElementData, ...]:
    text = resources.files("molchef.chem").joinpath("data/elements.txt").read_text("utf-8")
    return tuple(parse_table(text))


def load_table(supported: Iterable[str] = DEFAULT_ELEMENTS) -> ElementTable:
    return ElementTable(_builtin_records(), supported)


DEFAULT_TABLE = load_table()
