"""Configuration state on the periodic lattice, the invariant product measure,
occupation indicators, and block-average observables."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .kernel import SPECIES, SPECIES_INDEX


@dataclass
class Configuration:
    """Species assignment on a torus of length L; one int8 per site (A=0, B=1, C=2)."""

    species: np.ndarray
    counts: np.ndarray

    @property
    def size(self) -> int:
        return self.species.shape[0]

    def copy(self) -> "Configuration":
        return Configuration(self.species.copy(), self.counts.copy())

    def recount(self) -> np.ndarray:
        return np.bincount(self.species, minlength=3).astype(np.int64)

    def to_text(self) -> str:
        """One ASCII character per site (A/B/C), newline-terminated."""
        return "".join(SPECIES[v] for v in self.species) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Configuration":
        symbols = text.strip()
        if not symbols or any(ch not in SPECIES_INDEX for ch in symbols):
            raise ParameterError("configuration dump must be a nonempty string over A/B/C")
        species = np.array([SPECIES_INDEX[ch] for ch in symbols], dtype=np.int8)
        return cls(species, np.bincount(species, minlength=3).astype(np.int64))

    @classmethod
    def from_species(cls, species) -> "Configuration":
        arr = np.asarray(species, dtype=np.int8)
        return cls(arr, np.bincount(arr, minlength=3).astype(np.int64))


def sample_invariant(densities, size: int, rng: np.random.Generator) -> Configuration:
    """Draw a configuration from the product measure with the given marginals."""
    rho = np.asarray(densities, dtype=float)
    if rho.shape != (3,) or np.any(rho < 0) or abs(rho.sum() - 1.0) > 1e-12:
        raise ParameterError(f"invalid densities {densities}")
    u = rng.random(size)
    species = np.where(u < rho[0], 0, np.where(u < rho[0] + rho[1], 1, 2)).astype(np.int8)
    return Configuration(species, np.bincount(species, minlength=3).astype(np.int64))


def exchange(config: Configuration, x: int, y: int) -> None:
    """Swap the species at sites x and y in place (x == y is a no-op)."""
    sp = config.species
    size = sp.shape[0]
    x %= size
    y %= size
    sp[x], sp[y] = sp[y], sp[x]


def centered_indicator(config: Configuration, x: int, alpha: int | str, densities) -> float:
    """1 - rho_alpha when site x holds species alpha, else -rho_alpha."""
    a = SPECIES_INDEX[alpha] if isinstance(alpha, str) else alpha
    rho = densities[a]
    return (1.0 - rho) if config.species[x % config.size] == a else -rho


def centered_indicator_vectors(config: Configuration, densities) -> tuple[np.ndarray, np.ndarray]:
    """Centered A and B indicator vectors over the whole torus (float64)."""
    sp = config.species
    xi_a = (sp == 0).astype(np.float64) - densities[0]
    xi_b = (sp == 1).astype(np.float64) - densities[1]
    return xi_a, xi_b


@dataclass(frozen=True)
class BlockAverages:
    """Centered-indicator averages over the two length-L blocks flanking x,
    and their product."""

    x: int
    l_block: int
    left: float
    right: float
    psi: float


def block_average(config: Configuration, x: int, l_block: int,
                  alpha: int | str, beta: int | str, densities) -> BlockAverages:
    """Left block averages species alpha over x-L..x-1, right block species beta
    over x+1..x+L; psi is their product. Torus wrap-around applies."""
    size = config.size
    if not 1 <= l_block <= size // 4:
        raise ParameterError(
            f"block length must satisfy 1 <= L_block <= lattice/4, got {l_block}")
    a = SPECIES_INDEX[alpha] if isinstance(alpha, str) else alpha
    b = SPECIES_INDEX[beta] if isinstance(beta, str) else beta
    sp = config.species
    left_idx = (x - np.arange(1, l_block + 1)) % size
    right_idx = (x + np.arange(1, l_block + 1)) % size
    left = float(np.mean(sp[left_idx] == a)) - densities[a]
    right = float(np.mean(sp[right_idx] == b)) - densities[b]
    return BlockAverages(x=x % size, l_block=l_block, left=left, right=right,
                         psi=left * right)
