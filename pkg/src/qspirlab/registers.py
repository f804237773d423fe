"""Named bit-register layouts.

A layout is an ordered sequence of ``(name, width)`` registers.  Basis
strings over a layout are stored as integers: the first register occupies
the most significant bits, and within a register the first bit is the most
significant.  ``bits()``/``parse_bits()`` convert between that integer form
and the left-to-right string form used in displays and serialized files.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence


def bits(value: int, width: int) -> str:
    """Render an integer as a fixed-width bit string (empty for width 0)."""
    if width == 0:
        return ""
    return format(value, f"0{width}b")


def parse_bits(text: str) -> int:
    return int(text, 2) if text else 0


@dataclass(frozen=True)
class RegisterLayout:
    registers: tuple[tuple[str, int], ...]

    def __post_init__(self):
        regs = tuple((str(n), int(w)) for n, w in self.registers)
        object.__setattr__(self, "registers", regs)
        names = [n for n, _ in regs]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate register names in {names}")
        if any(w < 0 for _, w in regs):
            raise ValueError("register widths must be >= 0")
        offsets = {}
        off = 0
        for name, w in regs:
            offsets[name] = (off, w)
            off += w
        object.__setattr__(self, "_offsets", offsets)
        object.__setattr__(self, "width", off)

    @classmethod
    def of(cls, *pairs: tuple[str, int]) -> "RegisterLayout":
        return cls(tuple(pairs))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.registers)

    def __contains__(self, name: str) -> bool:
        return name in self._offsets

    def width_of(self, name: str) -> int:
        return self._require(name)[1]

    def _require(self, name: str) -> tuple[int, int]:
        try:
            return self._offsets[name]
        except KeyError:
            raise KeyError(f"unknown register {name!r}; layout has {self.names}") from None

    def piece(self, name: str) -> tuple[int, int]:
        """(shift, width) addressing a register inside an integer basis key."""
        off, w = self._require(name)
        return (self.width - off - w, w)

    def pieces(self, names: Iterable[str] | str) -> tuple[tuple[int, int], ...]:
        """Pieces for several registers, concatenated in the order given."""
        if isinstance(names, str):
            names = (names,)
        return tuple(self.piece(n) for n in names)

    def in_layout_order(self, names: Iterable[str]) -> tuple[str, ...]:
        wanted = set(names)
        unknown = wanted - set(self.names)
        if unknown:
            raise KeyError(f"unknown registers {sorted(unknown)}; layout has {self.names}")
        return tuple(n for n in self.names if n in wanted)

    def sub_layout(self, names: Sequence[str]) -> "RegisterLayout":
        """New layout over the named registers, keeping this layout's order."""
        ordered = self.in_layout_order(names)
        return RegisterLayout(tuple((n, self.width_of(n)) for n in ordered))

    def concat(self, other: "RegisterLayout") -> "RegisterLayout":
        overlap = set(self.names) & set(other.names)
        if overlap:
            raise ValueError(f"register name collision: {sorted(overlap)}")
        return RegisterLayout(self.registers + other.registers)

    def key_bits(self, key: int) -> str:
        return bits(key, self.width)

    def key_of(self, text: str) -> int:
        if len(text) != self.width:
            raise ValueError(f"basis string {text!r} does not match width {self.width}")
        return parse_bits(text)

    def split_key(self, key: int) -> dict[str, int]:
        """Register name -> sub-value for a basis key."""
        out = {}
        for name, _ in self.registers:
            shift, w = self.piece(name)
            out[name] = (key >> shift) & ((1 << w) - 1)
        return out

    def assemble(self, values: dict[str, int]) -> int:
        """Basis key from per-register values (missing registers are 0)."""
        key = 0
        for name, w in self.registers:
            v = values.get(name, 0)
            if v >> w:
                raise ValueError(f"value {v} too wide for register {name} ({w} bits)")
            key = (key << w) | v
        return key

    def to_json(self) -> list[list]:
        return [[n, w] for n, w in self.registers]

    @classmethod
    def from_json(cls, data) -> "RegisterLayout":
        return cls(tuple((n, w) for n, w in data))
