"""Molecular geometry: XYZ parsing, spring networks, rod-diffusion estimate.

The XYZ dialect accepted here allows the element token to be either a
standard symbol ("C", "Ru") or a bare atomic number ("6", "44").  An
atomic number of 2 marks the surface-attachment placeholder: that atom
becomes the anchor and is assigned carbon mass for dynamics.
"""

from __future__ import annotations

import importlib.resources
import math
import warnings
from dataclasses import dataclass, field
from typing import IO, Iterable, Mapping

import numpy as np

from .constants import ELEMENTS, K_B, SYMBOL_TO_Z, atomic_mass
from .errors import ParseError

ANCHOR_Z = 2  # placeholder atomic number marking the anchor atom
ANCHOR_MASS = 12.0  # treated as a surface carbon for dynamics


@dataclass(frozen=True)
class Atom:
    """One atom: atomic number, position (angstrom) and mass (amu)."""

    atomic_number: int
    position: np.ndarray
    mass: float

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float)
        if pos.shape != (3,) or not np.all(np.isfinite(pos)):
            raise ValueError("position must be a finite 3-vector")
        object.__setattr__(self, "position", pos)
        if self.atomic_number < 1:
            raise ValueError("atomic_number must be >= 1")
        if self.mass <= 0:
            raise ValueError("mass must be positive")


@dataclass(frozen=True)
class Molecule:
    """Ordered collection of atoms with a designated anchor."""

    atoms: tuple[Atom, ...]
    anchor_index: int

    def __post_init__(self):
        if not 0 <= self.anchor_index < len(self.atoms):
            raise ValueError("anchor_index out of range")

    def __len__(self) -> int:
        return len(self.atoms)

    @property
    def positions(self) -> np.ndarray:
        """(n, 3) array of equilibrium positions in angstrom."""
        return np.array([a.position for a in self.atoms])

    @property
    def masses(self) -> np.ndarray:
        """(n,) array of masses in amu."""
        return np.array([a.mass for a in self.atoms])

    @property
    def atomic_numbers(self) -> np.ndarray:
        return np.array([a.atomic_number for a in self.atoms], dtype=int)


@dataclass(frozen=True)
class SpringNetwork:
    """Uniform-stiffness harmonic network over all pairs within a cutoff.

    ``pairs`` holds (i, j, rest_length) with i < j and rest length equal
    to the equilibrium separation, in angstrom.
    """

    pairs: tuple[tuple[int, int, float], ...]
    kappa: float  # kcal / mol / A^2
    cutoff: float  # A

    def __post_init__(self):
        seen = set()
        for i, j, r0 in self.pairs:
            if not i < j:
                raise ValueError(f"pair ({i},{j}) not ordered i < j")
            if (i, j) in seen:
                raise ValueError(f"duplicate pair ({i},{j})")
            if r0 > self.cutoff + 1e-12:
                raise ValueError(f"rest length {r0} exceeds cutoff {self.cutoff}")
            seen.add((i, j))

    def __len__(self) -> int:
        return len(self.pairs)

    def index_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(i, j, rest_length) as flat arrays for vectorised force loops."""
        if not self.pairs:
            return (np.empty(0, int), np.empty(0, int), np.empty(0, float))
        i, j, r0 = zip(*self.pairs)
        return np.array(i, int), np.array(j, int), np.array(r0, float)


@dataclass(frozen=True)
class RodGeometry:
    """Cylinder model of the molecule for the semi-empirical estimate."""

    length: float  # m
    diameter: float  # m
    temperature: float  # K
    viscosity: float  # Pa s

    def __post_init__(self):
        for name in ("length", "diameter", "temperature", "viscosity"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")

    @property
    def aspect_ratio(self) -> float:
        return self.length / self.diameter


def _element_to_z(token: str) -> int:
    if token.isdigit():
        z = int(token)
        if z not in ELEMENTS:
            raise ParseError(f"unknown atomic number {z!r}")
        return z
    sym = token.capitalize()
    if sym not in SYMBOL_TO_Z:
        raise ParseError(f"unknown element symbol {token!r}")
    return SYMBOL_TO_Z[sym]


def parse_xyz(
    source: str | IO[str],
    mass_table: Mapping[int, float] | None = None,
) -> Molecule:
    """Parse XYZ text into a :class:`Molecule`.

    Layout: first line the atom count, second line a comment (may be
    blank), then one line per atom with an element token (symbol or
    atomic number) and three Cartesian coordinates in angstrom.

    Parameters
    ----------
    source:
        XYZ text or an open text stream.
    mass_table:
        Optional {atomic_number: mass_amu} overriding the built-in table.

    Raises
    ------
    ParseError
        On empty input, malformed lines, a count mismatch, an empty
        molecule, or more than one anchor token.
    """
    text = source if isinstance(source, str) else source.read()
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise ParseError("empty input")
    try:
        count = int(lines[0].strip())
    except ValueError:
        raise ParseError(f"first line must be the atom count, got {lines[0]!r}")
    if count <= 0:
        raise ParseError("empty molecule (declared atom count must be >= 1)")
    body = [l for l in lines[2:] if l.strip()]
    if len(body) != count:
        raise ParseError(f"declared {count} atoms but found {len(body)} atom lines")

    atoms: list[Atom] = []
    anchor_index: int | None = None
    for lineno, line in enumerate(body):
        parts = line.split()
        if len(parts) < 4:
            raise ParseError(f"unparsable atom line {lineno + 3}: {line!r}")
        z = _element_to_z(parts[0])
        try:
            pos = np.array([float(parts[1]), float(parts[2]), float(parts[3])])
        except ValueError:
            raise ParseError(f"unparsable coordinates on line {lineno + 3}: {line!r}")
        if z == ANCHOR_Z:
            if anchor_index is not None:
                raise ParseError("more than one anchor token (atomic number 2)")
            anchor_index = len(atoms)
            mass = ANCHOR_MASS
        elif mass_table is not None and z in mass_table:
            mass = float(mass_table[z])
        else:
            mass = atomic_mass(z)
        atoms.append(Atom(z, pos, mass))

    if anchor_index is None:
        # legal for plain molecules; the first atom doubles as pivot
        anchor_index = 0
    return Molecule(tuple(atoms), anchor_index)


def serialize_xyz(m: Molecule, comment: str = "") -> str:
    """Inverse of :func:`parse_xyz` (numeric element tokens, 6 decimals)."""
    out = [str(len(m)), comment]
    for a in m.atoms:
        x, y, z = a.position
        out.append(f"{a.atomic_number:4d}  {x:12.6f} {y:12.6f} {z:12.6f}")
    return "\n".join(out) + "\n"


def load_nhc_ru() -> Molecule:
    """The bundled 76-atom NHC-Ru fixture."""
    ref = importlib.resources.files("nvmotion").joinpath("data/nhc_ru.xyz")
    return parse_xyz(ref.read_text())


def build_spring_network(m: Molecule, cutoff: float, kappa: float) -> SpringNetwork:
    """Connect every atom pair within ``cutoff`` (A) by a spring.

    Rest lengths are the equilibrium separations.  A molecule with no
    pairs is legal but triggers a warning.
    """
    if cutoff <= 0:
        raise ValueError("cutoff must be positive")
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    pos = m.positions
    n = len(m)
    pairs: list[tuple[int, int, float]] = []
    for i in range(n - 1):
        d = np.linalg.norm(pos[i + 1 :] - pos[i], axis=1)
        for off in np.nonzero(d <= cutoff)[0]:
            pairs.append((i, i + 1 + int(off), float(d[off])))
    if not pairs:
        warnings.warn("spring network has no pairs (cutoff too small?)")
    return SpringNetwork(tuple(pairs), kappa, cutoff)


def _end_correction(p: float) -> float:
    return -0.05 / p**2 + 0.917 / p - 0.662


def rod_diffusion_coefficient(g: RodGeometry) -> float:
    """Rotational diffusion coefficient of a rigid rod in a solvent, 1/s.

    D_r = 3 k_B T / (pi eta L^3) * [ln(p) + c(p)] with p = L/d and the
    end-effect correction c(p) = -0.05/p^2 + 0.917/p - 0.662.  Warns for
    aspect ratios below 1, where the cylinder model loses meaning.
    """
    p = g.aspect_ratio
    if p < 1:
        warnings.warn(f"aspect ratio p = {p:.3g} < 1; rod model questionable")
    return (
        3.0
        * K_B
        * g.temperature
        / (math.pi * g.viscosity * g.length**3)
        * (math.log(p) + _end_correction(p))
    )
