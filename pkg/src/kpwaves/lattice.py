"""Wave-vector lattice, dispersion relation, and spectral fields on the torus.

The phase space is spanned by Fourier modes u_n, n = (n1, n2), with the
zero-mean constraint n1 != 0 built into the lattice itself.  A LatticeBox
is the symmetric rectangular truncation used by every operator in this
package; fields, dispersion tables and interaction tables are all aligned
to its canonical mode ordering.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "omega",
    "delta",
    "LatticeBox",
    "DispersionTable",
    "SpectralField",
    "hs_weights",
    "hs_norm",
    "apply_free_flow",
]


def omega(n) -> float:
    """Dispersion frequency n1**3 - n2**2 / n1 of a single mode.

    Raises ValueError for n1 = 0, which never belongs to the phase space.
    """
    n1, n2 = n
    if n1 == 0:
        raise ValueError("dispersion is undefined on the line n1 = 0")
    return n1 ** 3 - n2 ** 2 / n1


def delta(n, k, l) -> float:
    """Three-wave phase omega(k) + omega(l) - omega(n) for a split k + l = n."""
    if (n[0], n[1]) != (k[0] + l[0], k[1] + l[1]):
        raise ValueError(f"not a convolution triple: {k} + {l} != {n}")
    return omega(k) + omega(l) - omega(n)


class LatticeBox:
    """Symmetric truncation {1 <= |n1| <= n1_max, |n2| <= n2_max} of Z* x Z.

    The box is closed under n -> -n and excludes the n1 = 0 column
    structurally.  Modes are stored in lexicographic order of (n1, n2);
    all array-valued quantities in the package share this ordering.
    """

    __slots__ = ("n1_max", "n2_max", "modes", "n1", "n2", "size",
                 "conj_idx", "_index", "_grid", "_dispersion")

    def __init__(self, n1_max: int, n2_max: int):
        if n1_max < 1 or n2_max < 0:
            raise ValueError("need n1_max >= 1 and n2_max >= 0")
        self.n1_max = int(n1_max)
        self.n2_max = int(n2_max)
        modes = [(a, b)
                 for a in range(-self.n1_max, self.n1_max + 1) if a != 0
                 for b in range(-self.n2_max, self.n2_max + 1)]
        self.modes = np.array(modes, dtype=np.int64)
        self.n1 = self.modes[:, 0].copy()
        self.n2 = self.modes[:, 1].copy()
        self.size = len(modes)
        self._index = {m: i for i, m in enumerate(modes)}
        # Offset-indexed lookup grid, -1 marks vectors outside the box.
        grid = np.full((2 * self.n1_max + 1, 2 * self.n2_max + 1), -1,
                       dtype=np.int64)
        grid[self.n1 + self.n1_max, self.n2 + self.n2_max] = \
            np.arange(self.size)
        self._grid = grid
        self.conj_idx = self.lookup(-self.n1, -self.n2)
        self._dispersion = None

    def index(self, n) -> int:
        """Position of mode n in the canonical ordering."""
        try:
            return self._index[(int(n[0]), int(n[1]))]
        except KeyError:
            raise ValueError(f"mode {tuple(n)} is outside {self!r}") from None

    def lookup(self, a1, a2):
        """Vectorized index lookup; returns -1 where (a1, a2) is not in the box."""
        a1 = np.asarray(a1, dtype=np.int64)
        a2 = np.asarray(a2, dtype=np.int64)
        inside = (np.abs(a1) >= 1) & (np.abs(a1) <= self.n1_max) \
            & (np.abs(a2) <= self.n2_max)
        out = np.full(np.broadcast(a1, a2).shape, -1, dtype=np.int64)
        out[inside] = self._grid[a1[inside] + self.n1_max,
                                 a2[inside] + self.n2_max]
        return out

    def __contains__(self, n) -> bool:
        return (int(n[0]), int(n[1])) in self._index

    def __iter__(self):
        return iter(self._index)

    def __eq__(self, other):
        return (isinstance(other, LatticeBox)
                and self.n1_max == other.n1_max
                and self.n2_max == other.n2_max)

    def __hash__(self):
        return hash((self.n1_max, self.n2_max))

    def __repr__(self):
        return f"LatticeBox({self.n1_max}, {self.n2_max})"

    def dispersion(self) -> "DispersionTable":
        """Shared dispersion table of this box."""
        if self._dispersion is None:
            self._dispersion = DispersionTable(self)
        return self._dispersion


class DispersionTable:
    """Frequencies omega(n) precomputed for every mode of a box."""

    __slots__ = ("box", "values")

    def __init__(self, box: LatticeBox):
        self.box = box
        n1 = box.n1.astype(float)
        n2 = box.n2.astype(float)
        self.values = n1 ** 3 - n2 ** 2 / n1

    def of(self, n) -> float:
        return float(self.values[self.box.index(n)])


class SpectralField:
    """Complex Fourier coefficients aligned to a box's mode ordering.

    Physical fields obey the reality symmetry u(-n) = conj(u(n)).  The
    constructor does not enforce it because intermediate algebra may break
    it; use is_real_symmetric to check.
    """

    __slots__ = ("box", "coeffs")

    def __init__(self, box: LatticeBox, coeffs, copy: bool = True):
        arr = np.array(coeffs, dtype=np.complex128, copy=copy)
        if arr.shape != (box.size,):
            raise ValueError(
                f"expected {box.size} coefficients, got shape {arr.shape}")
        self.box = box
        self.coeffs = arr

    @classmethod
    def zeros(cls, box: LatticeBox) -> "SpectralField":
        return cls(box, np.zeros(box.size, dtype=np.complex128), copy=False)

    @classmethod
    def from_modes(cls, box: LatticeBox, entries, hermitian: bool = False
                   ) -> "SpectralField":
        """Field with prescribed coefficients, zero elsewhere.

        With hermitian=True each given mode n also sets -n to the complex
        conjugate unless -n itself appears in `entries`.
        """
        u = cls.zeros(box)
        given = {(int(n[0]), int(n[1])): complex(v) for n, v in entries.items()}
        for n, v in given.items():
            u.coeffs[box.index(n)] = v
            if hermitian:
                neg = (-n[0], -n[1])
                if neg not in given:
                    u.coeffs[box.index(neg)] = np.conj(v)
        return u

    def __getitem__(self, n) -> complex:
        return complex(self.coeffs[self.box.index(n)])

    def copy(self) -> "SpectralField":
        return SpectralField(self.box, self.coeffs, copy=True)

    def conjugate_reflection(self) -> "SpectralField":
        """The field n -> conj(u(-n)); equals self iff u is real-symmetric."""
        return SpectralField(self.box,
                             np.conj(self.coeffs[self.box.conj_idx]),
                             copy=False)

    def is_real_symmetric(self, tol: float = 1e-12) -> bool:
        dev = np.abs(self.coeffs - np.conj(self.coeffs[self.box.conj_idx]))
        scale = max(1.0, float(np.max(np.abs(self.coeffs), initial=0.0)))
        return bool(np.max(dev, initial=0.0) <= tol * scale)

    def _binary(self, other, op):
        if not isinstance(other, SpectralField):
            return NotImplemented
        if other.box != self.box:
            raise ValueError("fields live on different boxes")
        return SpectralField(self.box, op(self.coeffs, other.coeffs),
                             copy=False)

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, scalar):
        return SpectralField(self.box, self.coeffs * complex(scalar),
                             copy=False)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return SpectralField(self.box, self.coeffs / complex(scalar),
                             copy=False)

    def __neg__(self):
        return SpectralField(self.box, -self.coeffs, copy=False)

    def __repr__(self):
        return f"SpectralField(box={self.box!r}, size={self.box.size})"


def hs_weights(box: LatticeBox, s: float):
    """Sobolev weights (|n1| + |n2|)**(2 s) on the modes of a box."""
    mag = np.abs(box.n1) + np.abs(box.n2)
    return mag.astype(float) ** (2.0 * s)


def hs_norm(u: SpectralField, s: float) -> float:
    """Sobolev norm sqrt(sum (|n1|+|n2|)**(2s) |u_n|**2)."""
    w = hs_weights(u.box, s)
    return float(np.sqrt(np.sum(w * np.abs(u.coeffs) ** 2)))


def apply_free_flow(u: SpectralField, t: float) -> SpectralField:
    """Propagate by the linear group, multiplying each mode by e^{i omega t}."""
    om = u.box.dispersion().values
    return SpectralField(u.box, u.coeffs * np.exp(1j * om * t), copy=False)
