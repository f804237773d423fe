"""Sparse pure quantum states over named bit registers.

Every protocol state in this package is a superposition of a handful of
classical basis strings, so states are finite maps from basis keys to
complex amplitudes rather than dense vectors.  All operations return new
states; nothing here mutates.  A dense vector twin for small widths lives
in :mod:`qspirlab.reference` and is used as an independent test oracle.
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

from . import kernels
from .registers import RegisterLayout

PRUNE_TOL = 1e-12   # amplitudes below this are dropped
NORM_TOL = 1e-9     # norm / unitarity / audit comparisons

SQRT_HALF = math.sqrt(0.5)


class NonUnitaryMapError(ValueError):
    """A local map failed the unitarity check on its basis."""


@dataclass(frozen=True, eq=False)
class SparseState:
    layout: RegisterLayout
    terms: Mapping[int, complex]

    def __post_init__(self):
        pruned = {}
        top = 1 << self.layout.width
        for k, v in self.terms.items():
            if not 0 <= k < top:
                raise ValueError(f"basis key {k} outside layout width {self.layout.width}")
            c = complex(v)
            if abs(c) > PRUNE_TOL:
                pruned[int(k)] = c
        object.__setattr__(self, "terms", pruned)
        n = kernels.norm_sq(pruned)
        if abs(n - 1.0) > NORM_TOL:
            raise ValueError(f"state norm^2 = {n!r}, not 1 within {NORM_TOL}")

    @classmethod
    def basis(cls, layout: RegisterLayout, key: int | str) -> "SparseState":
        if isinstance(key, str):
            key = layout.key_of(key)
        return cls(layout, {key: 1.0 + 0.0j})

    @classmethod
    def from_bits(cls, layout: RegisterLayout, amplitudes: Mapping[str, complex]) -> "SparseState":
        return cls(layout, {layout.key_of(s): a for s, a in amplitudes.items()})

    def amplitude(self, key: int | str) -> complex:
        if isinstance(key, str):
            key = self.layout.key_of(key)
        return self.terms.get(key, 0j)

    def bits_terms(self) -> dict[str, complex]:
        return {self.layout.key_bits(k): v for k, v in sorted(self.terms.items())}

    def support(self) -> tuple[int, ...]:
        return tuple(sorted(self.terms))

    def __repr__(self):
        parts = [f"{v:.4g}|{s}>" for s, v in list(self.bits_terms().items())[:6]]
        more = "" if len(self.terms) <= 6 else f" ... ({len(self.terms)} terms)"
        return f"SparseState({' + '.join(parts)}{more})"


def tensor(a: SparseState, b: SparseState) -> SparseState:
    """Tensor product; register names must be disjoint."""
    layout = a.layout.concat(b.layout)
    terms = kernels.tensor_terms(a.terms, b.terms, b.layout.width, layout.width)
    return SparseState(layout, terms)


def apply_phase_oracle(state: SparseState, target: str | Sequence[str],
                       phase_fn: Callable[[int], int]) -> SparseState:
    """Multiply each term by (-1)**phase_fn(sub) of its target substring.

    The support is unchanged; phase_fn is evaluated once per distinct
    substring in the support.  Several target registers are read as one
    concatenated substring in the order given.
    """
    names = (target,) if isinstance(target, str) else tuple(target)
    if len(names) == 1:
        shift, w = state.layout.piece(names[0])
        mask = (1 << w) - 1
        table = {}
        for k in state.terms:
            sub = (k >> shift) & mask
            if sub not in table:
                table[sub] = phase_fn(sub) & 1
        terms = kernels.phase_apply(state.terms, shift, mask, table, state.layout.width)
        return SparseState(state.layout, terms)
    pieces = state.layout.pieces(names)
    terms = {}
    for k, v in state.terms.items():
        sub = kernels.extract_sub(k, pieces)
        terms[k] = -v if phase_fn(sub) & 1 else v
    return SparseState(state.layout, terms)


# Local maps verified unitary, keyed by callable and target width.
_verified_maps: "weakref.WeakKeyDictionary[Callable, set[int]]" = weakref.WeakKeyDictionary()


def _as_image(result, width: int) -> tuple[tuple[int, complex], ...]:
    if isinstance(result, SparseState):
        if result.layout.width != width:
            raise ValueError("map image width does not match target width")
        result = result.terms
    top = 1 << width
    image = []
    for sub, amp in result.items():
        if not 0 <= sub < top:
            raise ValueError(f"map image key {sub} outside target width {width}")
        c = complex(amp)
        if abs(c) > PRUNE_TOL:
            image.append((int(sub), c))
    return tuple(image)


def _check_unitary(fn: Callable[[int], Mapping[int, complex]], width: int) -> dict:
    """Verify fn's columns form a unitary on the 2**width basis; return them."""
    dim = 1 << width
    columns = {sub: _as_image(fn(sub), width) for sub in range(dim)}
    rows: dict[int, list[tuple[int, complex]]] = {}
    for col, image in columns.items():
        for row, amp in image:
            rows.setdefault(row, []).append((col, amp))
    gram: dict[tuple[int, int], complex] = {}
    for entries in rows.values():
        for c1, a1 in entries:
            for c2, a2 in entries:
                key = (c1, c2)
                gram[key] = gram.get(key, 0j) + a1.conjugate() * a2
    for col in range(dim):
        if abs(gram.get((col, col), 0j) - 1.0) > NORM_TOL:
            raise NonUnitaryMapError(f"column {col} has norm^2 {gram.get((col, col), 0j)}")
    for (c1, c2), g in gram.items():
        if c1 != c2 and abs(g) > NORM_TOL:
            raise NonUnitaryMapError(f"columns {c1},{c2} not orthogonal (inner product {g})")
    return columns


MAX_UNITARITY_CHECK_WIDTH = 12


def apply_local_map(
    state: SparseState,
    target: str | Sequence[str],
    fn: Callable[[int], Mapping[int, complex]],
    ) -> SparseState:
    """Apply a unitary given on basis substrings of the target register(s).

    ``fn`` maps a basis sub-key to its image as ``{sub': amplitude}`` (or a
    SparseState over the targets).  For several targets the sub-key is their
    concatenation in the order given.  Unitarity is checked by enumerating
    the 2**width basis when the joint width is at most 12 (once per callable
    and width); wider maps are trusted, which the protocol modules only use
    for XOR relabelings that are permutations by construction.
    """
    names = (target,) if isinstance(target, str) else tuple(target)
    pieces = state.layout.pieces(names)
    width = sum(w for _, w in pieces)
    columns = None
    if width <= MAX_UNITARITY_CHECK_WIDTH:
        try:
            seen = _verified_maps.setdefault(fn, set())
        except TypeError:  # non-weakrefable callable; check every time
            seen = set()
        if width not in seen:
            columns = _check_unitary(fn, width)
            seen.add(width)
    if columns is not None:
        images = columns
    else:
        images = {}
        for k in state.terms:
            sub = kernels.extract_sub(k, pieces)
            if sub not in images:
                images[sub] = _as_image(fn(sub), width)
    terms = kernels.apply_map_terms(state.terms, pieces, images, state.layout.width)
    return SparseState(state.layout, terms)


def conditional_xor_relabel(
    state: SparseState,
    control: str | Sequence[str],
    targets: Sequence[str],
    values_by_control: Mapping[int, Mapping[str, int]],
    ) -> SparseState:
    """XOR constants into target registers, selected by the control value.

    ``values_by_control[c]`` gives per-register XOR constants applied to
    every term whose control sub-key equals ``c``; missing controls act as
    the identity.  This is a basis permutation (an involution when the same
    table is applied twice), hence unitary by construction, and is the
    primitive behind all user-side relabelings.
    """
    ctrl_names = (control,) if isinstance(control, str) else tuple(control)
    ctrl_pieces = state.layout.pieces(ctrl_names)
    if set(ctrl_names) & set(targets):
        raise ValueError("control registers cannot also be XOR targets")
    masks = {}
    for c, per_reg in values_by_control.items():
        full = 0
        for name, value in per_reg.items():
            shift, w = state.layout.piece(name)
            if name not in targets:
                raise ValueError(f"register {name!r} not listed in targets")
            if value >> w:
                raise ValueError(f"XOR constant {value} too wide for {name}")
            full |= value << shift
        masks[int(c)] = full
    terms = kernels.conditional_xor(state.terms, ctrl_pieces, masks, state.layout.width)
    return SparseState(state.layout, terms)


def measurement_branches(state: SparseState, target: str) -> tuple[tuple[float, int, SparseState], ...]:
    """All computational-basis outcomes of measuring one register.

    Returns ``(probability, outcome, post-state)`` triples sorted by
    outcome; post-states are renormalized and keep the full layout.
    """
    pieces = state.layout.pieces((target,))
    groups = kernels.branch_split(state.terms, pieces, state.layout.width)
    branches = []
    for outcome in sorted(groups):
        sub_terms = groups[outcome]
        p = kernels.norm_sq(sub_terms)
        if p <= PRUNE_TOL:
            continue
        post = SparseState(state.layout, kernels.scale_terms(sub_terms, 1.0 / math.sqrt(p)))
        branches.append((p, outcome, post))
    return tuple(branches)


def measure_register(state: SparseState, target: str, rng) -> tuple[int, SparseState]:
    """Sample one outcome with Born probabilities using rng.random()."""
    branches = measurement_branches(state, target)
    u = rng.random()
    acc = 0.0
    for p, outcome, post in branches:
        acc += p
        if u < acc:
            return outcome, post
    p, outcome, post = branches[-1]
    return outcome, post


def equal_up_to_global_phase(a: SparseState, b: SparseState, tol: float = NORM_TOL) -> bool:
    """True iff a = c*b for some unit complex c, within tol in l2 norm.

    The candidate phase is read off the largest-magnitude term shared by
    both supports (deterministic tie-break on the key).
    """
    if a.layout != b.layout:
        raise ValueError("layout mismatch")
    shared = a.terms.keys() & b.terms.keys()
    if not shared:
        return not a.terms and not b.terms
    pick = max(shared, key=lambda k: (min(abs(a.terms[k]), abs(b.terms[k])), -k))
    c = a.terms[pick] / b.terms[pick]
    mag = abs(c)
    if mag < PRUNE_TOL:
        return False
    c /= mag
    dist_sq = 0.0
    for k in a.terms.keys() | b.terms.keys():
        d = a.terms.get(k, 0j) - c * b.terms.get(k, 0j)
        dist_sq += d.real * d.real + d.imag * d.imag
    return math.sqrt(dist_sq) <= tol


# Common single-register maps.

def hadamard(sub: int) -> dict[int, complex]:
    if sub == 0:
        return {0: SQRT_HALF, 1: SQRT_HALF}
    return {0: SQRT_HALF, 1: -SQRT_HALF}


def _pauli_map(p: int, q: int) -> Callable[[int], dict[int, complex]]:
    # Columns of the 2x2 encodings: identity, bit flip, phase flip, and
    # their product with the [0, -1; 1, 0] sign convention.
    if (p, q) == (0, 0):
        cols = ({0: 1.0}, {1: 1.0})
    elif (p, q) == (0, 1):
        cols = ({1: 1.0}, {0: 1.0})
    elif (p, q) == (1, 0):
        cols = ({0: 1.0}, {1: -1.0})
    else:
        cols = ({1: 1.0}, {0: -1.0})

    def apply(sub: int, _cols=cols):
        return _cols[sub]

    return apply


PAULI = {(p, q): _pauli_map(p, q) for p in (0, 1) for q in (0, 1)}


def state_overlap(a: SparseState, b: SparseState) -> complex:
    """<a|b> over the shared layout."""
    if a.layout != b.layout:
        raise ValueError("layout mismatch")
    acc = 0j
    for k, va in a.terms.items():
        vb = b.terms.get(k)
        if vb is not None:
            acc += va.conjugate() * vb
    return acc
