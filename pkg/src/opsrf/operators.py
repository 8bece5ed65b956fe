"""Scaling matrices: powers t^E, spectral metadata, Jordan-structured builders.

A scaling matrix E must have every eigenvalue real part strictly above 1.
Powers are t^E = exp(E log t).  Jordan structure is always *declared* by the
caller (numerically inferring it from a float matrix is ill-posed); a raw
matrix only yields eigenvalue real parts for the Holder metadata.

Conventions: a real Jordan cell of size l carries ones on the subdiagonal,
so t^J is lower triangular with entries (log t)^k / k!.  A complex pair
block of size 2l repeats Lambda = [[a, -b], [b, a]] with I2 on the
sub-block-diagonal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .errors import RangeError, SpectrumError, ValidationError

# scipy's expm is Al-Mohy/Higham scaling-and-squaring with Pade order up to
# 13; squaring kicks in above the order-13 threshold ||A||_1 > 5.37.
_EXP_ARG_LIMIT = 700.0  # exp overflow guard on a * log(t)


@dataclass(frozen=True)
class JordanBlock:
    """One declared block: a real cell (lambda, size l) or a complex pair."""

    kind: str  # "real" | "complex"
    a: float  # eigenvalue real part
    b: float = 0.0  # imaginary part (complex kind only)
    size: int = 1  # l = number of eigenvalue cells

    def __post_init__(self):
        if self.kind not in ("real", "complex"):
            raise ValidationError(f"unknown block kind {self.kind!r}")
        if self.kind == "complex" and self.b == 0.0:
            raise ValidationError("complex block requires nonzero imaginary part")
        if self.size < 1:
            raise ValidationError("block size must be >= 1")

    @property
    def dim(self) -> int:
        return self.size if self.kind == "real" else 2 * self.size

    def matrix(self) -> np.ndarray:
        l = self.size
        if self.kind == "real":
            m = np.eye(l) * self.a
            for i in range(1, l):
                m[i, i - 1] = 1.0
            return m
        lam = np.array([[self.a, -self.b], [self.b, self.a]])
        m = np.kron(np.eye(l), lam)
        for i in range(1, l):
            m[2 * i : 2 * i + 2, 2 * (i - 1) : 2 * i] = np.eye(2)
        return m

    def power(self, u) -> np.ndarray:
        """exp(J * u) for scalar or array u, shape (..., dim, dim), closed form."""
        u = np.asarray(u, dtype=float)
        scalar = u.ndim == 0
        u = np.atleast_1d(u)
        n, l = u.shape[0], self.size
        ea = np.exp(self.a * u)
        # nilpotent part: u^k / k! on the k-th subdiagonal
        if self.kind == "real":
            out = np.zeros((n, l, l))
            for i in range(l):
                for j in range(i + 1):
                    out[:, i, j] = u ** (i - j) / math.factorial(i - j)
            out *= ea[:, None, None]
        else:
            out = np.zeros((n, 2 * l, 2 * l))
            c, s = np.cos(self.b * u), np.sin(self.b * u)
            rot = np.empty((n, 2, 2))
            rot[:, 0, 0] = c
            rot[:, 0, 1] = -s
            rot[:, 1, 0] = s
            rot[:, 1, 1] = c
            for i in range(l):
                for j in range(i + 1):
                    coef = u ** (i - j) / math.factorial(i - j)
                    out[:, 2 * i : 2 * i + 2, 2 * j : 2 * j + 2] = (
                        coef[:, None, None] * rot
                    )
            out *= ea[:, None, None]
        return out[0] if scalar else out

    def norm_bounds(self, t) -> tuple[np.ndarray, np.ndarray]:
        """Deterministic two-sided bounds on the spectral norm of t^J."""
        t = np.asarray(t, dtype=float)
        logt = np.abs(np.log(t))
        lower = t**self.a
        upper = math.sqrt(2 * self.size) * math.e * t**self.a * logt ** (self.size - 1)
        return lower, upper


@dataclass(frozen=True)
class BlockStructure:
    """Declared Jordan data: blocks plus the change-of-basis matrix P."""

    blocks: tuple[JordanBlock, ...]
    basis_change: np.ndarray  # P, columns span the invariant subspaces

    def __post_init__(self):
        P = np.asarray(self.basis_change, dtype=float)
        object.__setattr__(self, "basis_change", P)
        d = sum(b.dim for b in self.blocks)
        if P.shape != (d, d):
            raise ValidationError(f"P must be {d}x{d}, got {P.shape}")
        cond = np.linalg.cond(P)
        if not np.isfinite(cond) or cond >= 1e8:
            raise ValidationError(
                f"basis change matrix is too ill-conditioned (cond={cond:.3g} >= 1e8)"
            )
        object.__setattr__(self, "basis_inv", np.linalg.inv(P))

    @property
    def dim(self) -> int:
        return sum(b.dim for b in self.blocks)

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    def slices(self) -> list[slice]:
        out, start = [], 0
        for b in self.blocks:
            out.append(slice(start, start + b.dim))
            start += b.dim
        return out

    def subspace_basis(self, j: int) -> np.ndarray:
        """Columns of P spanning the j-th invariant subspace (0-based)."""
        return self.basis_change[:, self.slices()[j]]

    def cell_sizes(self) -> list[int]:
        return [b.size for b in self.blocks]

    @property
    def max_cell_size(self) -> int:
        return max(self.cell_sizes())

    def p_between(self, j0: int, j: int) -> int:
        """max cell size over blocks j0..j (0-based, inclusive)."""
        return max(self.cell_sizes()[j0 : j + 1])

    def diagonal_matrix(self) -> np.ndarray:
        d = self.dim
        D = np.zeros((d, d))
        for b, sl in zip(self.blocks, self.slices()):
            D[sl, sl] = b.matrix()
        return D

    def power(self, u) -> np.ndarray:
        """exp(E u) = P diag(exp(J_j u)) P^-1, vectorized over u."""
        u = np.asarray(u, dtype=float)
        scalar = u.ndim == 0
        u = np.atleast_1d(u)
        d = self.dim
        out = np.zeros((u.shape[0], d, d))
        for b, sl in zip(self.blocks, self.slices()):
            out[:, sl, sl] = b.power(u)
        out = np.einsum("ij,njk,kl->nil", self.basis_change, out, self.basis_inv)
        return out[0] if scalar else out


def build_from_blocks(
    blocks: list[JordanBlock] | tuple[JordanBlock, ...],
    basis_change: np.ndarray | None = None,
) -> "OperatorMatrix":
    """Assemble E = P diag(J_1..J_m) P^-1 from declared Jordan data.

    Every block must have eigenvalue real part > 1 and P must be well
    conditioned.  The declared structure is validated by reconstruction
    and by invariance of each subspace.
    """
    blocks = tuple(blocks)
    for b in blocks:
        if b.a <= 1.0:
            raise SpectrumError(
                f"block eigenvalue real part {b.a} violates the constraint "
                "min Re(lambda) > 1"
            )
    d = sum(b.dim for b in blocks)
    if basis_change is None:
        basis_change = np.eye(d)
    structure = BlockStructure(blocks, basis_change)
    entries = structure.basis_change @ structure.diagonal_matrix() @ structure.basis_inv

    recon = structure.power(0.0)  # exp(0) must be the identity
    if np.max(np.abs(recon - np.eye(d))) > 1e-8:
        raise ValidationError("block power engine failed the identity check")

    reals = []
    for b in blocks:
        reals.extend([b.a] * b.dim)
    op = OperatorMatrix(entries, np.sort(np.asarray(reals)), structure)
    op._validate_structure()
    return op


class OperatorMatrix:
    """A d x d scaling matrix with spectral metadata.

    Rejects matrices whose eigenvalue real parts do not all exceed 1.
    Immutable after construction; all derived quantities are cached.
    """

    def __init__(
        self,
        entries: np.ndarray,
        eigen_real_parts: np.ndarray,
        blocks: BlockStructure | None = None,
        *,
        _allow_min_le_1: bool = False,
    ):
        entries = np.array(entries, dtype=float)
        entries.setflags(write=False)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValidationError("matrix must be square")
        self.entries = entries
        self.eigen_real_parts = np.sort(np.asarray(eigen_real_parts, dtype=float))
        self.eigen_real_parts.setflags(write=False)
        self.blocks = blocks
        if not _allow_min_le_1 and self.a_min <= 1.0:
            raise SpectrumError(
                f"min eigenvalue real part is {self.a_min:.6g}; the scaling "
                "matrix must satisfy min Re(lambda) > 1"
            )
        q = float(np.trace(entries))
        if abs(q - float(np.sum(self.eigen_real_parts))) > 1e-10 * max(1.0, abs(q)):
            raise ValidationError("trace does not match the sum of eigenvalue real parts")
        self.trace_q = q
        self._power_cache: dict[float, np.ndarray] = {}
        self._engine = None

    # -- construction ------------------------------------------------------

    @classmethod
    def from_matrix(cls, m: np.ndarray, *, _allow_min_le_1: bool = False) -> "OperatorMatrix":
        """Ingest a raw matrix; only eigenvalue real parts are computed."""
        m = np.asarray(m, dtype=float)
        reals = np.linalg.eigvals(m).real
        return cls(m, np.sort(reals), None, _allow_min_le_1=_allow_min_le_1)

    def transpose(self) -> "OperatorMatrix":
        bl = None
        if self.blocks is not None:
            # E^t has the same spectrum; its Jordan data needs a transposed
            # basis, so declared structure is dropped rather than guessed.
            bl = None
        return OperatorMatrix(
            self.entries.T,
            self.eigen_real_parts,
            bl,
            _allow_min_le_1=self.a_min <= 1.0,
        )

    # -- metadata ----------------------------------------------------------

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def a_min(self) -> float:
        return float(self.eigen_real_parts[0])

    @property
    def a_max(self) -> float:
        return float(self.eigen_real_parts[-1])

    @property
    def holder_indices(self) -> np.ndarray:
        """H_j = 1/a_j, sorted decreasing (H_1 >= ... >= H_m)."""
        return 1.0 / self.eigen_real_parts

    @property
    def h_max(self) -> float:
        return 1.0 / self.a_min

    @property
    def h_min(self) -> float:
        return 1.0 / self.a_max

    @property
    def max_cell_size(self) -> int:
        return self.blocks.max_cell_size if self.blocks is not None else 1

    def is_scalar(self, tol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self.entries - self.a_min * np.eye(self.dim))) <= tol)

    # -- validation --------------------------------------------------------

    def _validate_structure(self):
        st = self.blocks
        if st is None:
            return
        recon = st.basis_change @ st.diagonal_matrix() @ st.basis_inv
        err = np.max(np.abs(recon - self.entries))
        if err > 1e-8:
            raise ValidationError(f"block reconstruction residual {err:.3g} > 1e-8")
        # each subspace must be invariant under E
        for j in range(st.n_blocks):
            basis = st.subspace_basis(j)
            coords = st.basis_inv @ (self.entries @ basis)
            mask = np.ones(self.dim, dtype=bool)
            mask[st.slices()[j]] = False
            leak = np.max(np.abs((st.basis_change @ (coords * mask[:, None]))))
            if leak > 1e-8:
                raise ValidationError(
                    f"subspace {j} is not invariant (residual {leak:.3g})"
                )

    def __repr__(self):
        return f"OperatorMatrix(dim={self.dim}, a={list(np.round(self.eigen_real_parts, 6))})"


def mat_power(op: OperatorMatrix | np.ndarray, t: float) -> np.ndarray:
    """t^E = exp(E log t) by scaling-and-squaring, for t > 0."""
    entries = op.entries if isinstance(op, OperatorMatrix) else np.asarray(op, float)
    t = float(t)
    if not np.isfinite(t) or t <= 0.0:
        raise RangeError(f"matrix power requires finite t > 0, got {t}")
    u = math.log(t)
    amax = float(np.max(np.abs(np.linalg.eigvals(entries).real))) if not isinstance(
        op, OperatorMatrix
    ) else max(abs(op.a_min), abs(op.a_max))
    if abs(u) * amax > _EXP_ARG_LIMIT:
        raise RangeError(f"exp overflow: |a log t| = {abs(u) * amax:.3g} > {_EXP_ARG_LIMIT}")
    out = expm(entries * u)
    if not np.all(np.isfinite(out)):
        raise RangeError("matrix power overflowed to non-finite values")
    return out


class PowerEngine:
    """Vectorized evaluation of exp(u E) and exp(u E) x over arrays of u.

    Strategy, best first: exact scalar formula when E = a I; exact block
    formulas when Jordan data was declared; a dense eigendecomposition when
    it reconstructs E accurately; otherwise a per-u expm loop.
    """

    def __init__(self, op: OperatorMatrix):
        self.op = op
        self.mode = "expm"
        if op.is_scalar():
            self.mode = "scalar"
            return
        if op.blocks is not None:
            self.mode = "blocks"
            return
        w, V = np.linalg.eig(op.entries)
        try:
            Vinv = np.linalg.inv(V)
        except np.linalg.LinAlgError:
            return
        recon = (V * w) @ Vinv
        scale = max(1.0, float(np.max(np.abs(op.entries))))
        if np.max(np.abs(recon.real - op.entries)) < 1e-9 * scale and np.linalg.cond(
            V
        ) < 1e7:
            self.mode = "eig"
            self._w, self._V, self._Vinv = w, V, Vinv

    def matrices(self, u) -> np.ndarray:
        """exp(u E) for an array of exponents u; shape (n, d, d)."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        d = self.op.dim
        if self.mode == "scalar":
            return np.exp(self.op.a_min * u)[:, None, None] * np.eye(d)
        if self.mode == "blocks":
            return self.op.blocks.power(u)
        if self.mode == "eig":
            ew = np.exp(u[:, None] * self._w[None, :])
            return np.einsum("ij,nj,jk->nik", self._V, ew, self._Vinv).real
        return np.stack([expm(self.op.entries * ui) for ui in u])

    def apply(self, u, x) -> np.ndarray:
        """exp(u_i E) x_i per row; u shape (n,), x shape (n, d)."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.mode == "scalar":
            return np.exp(self.op.a_min * u)[:, None] * x
        if self.mode == "eig":
            z = x @ self._Vinv.T
            z = z * np.exp(u[:, None] * self._w[None, :])
            return (z @ self._V.T).real
        if self.mode == "blocks":
            st = self.op.blocks
            z = x @ st.basis_inv.T
            out = np.zeros_like(z)
            for b, sl in zip(st.blocks, st.slices()):
                out[:, sl] = np.einsum("nij,nj->ni", b.power(u), z[:, sl])
            return out @ st.basis_change.T
        return np.einsum("nij,nj->ni", self.matrices(u), x)


def jordan_norm_bounds_check(block: JordanBlock, t_grid) -> "JordanBoundsReport":
    """Check t^a <= ||t^J||_2 <= sqrt(2l) e t^a |log t|^(l-1) on a t grid.

    Preconditions: every t must lie outside the open interval (1/e, e).
    Margins are reported with additive slack 1e-9 on both sides.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    inside = (t_grid > 1.0 / math.e) & (t_grid < math.e)
    if np.any(inside):
        raise ValidationError(
            f"t values {t_grid[inside]} lie inside the excluded interval (1/e, e)"
        )
    mats = block.power(np.log(t_grid))
    norms = np.linalg.norm(mats, ord=2, axis=(1, 2))
    lower, upper = block.norm_bounds(t_grid)
    slack = 1e-9
    ok = (norms >= lower - slack) & (norms <= upper + slack)
    return JordanBoundsReport(
        block=block,
        t=t_grid,
        norm=norms,
        lower=lower,
        upper=upper,
        margin_lower=norms - lower,
        margin_upper=upper - norms,
        ok=bool(np.all(ok)),
    )


@dataclass(frozen=True)
class JordanBoundsReport:
    block: JordanBlock
    t: np.ndarray
    norm: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    margin_lower: np.ndarray
    margin_upper: np.ndarray
    ok: bool


# -- file formats ----------------------------------------------------------


def read_raw_matrix(path) -> np.ndarray:
    """Plain text: first line d, then d rows of d space-separated decimals."""
    with open(path) as fh:
        tokens = fh.read().split()
    if not tokens:
        raise ValidationError(f"empty matrix file {path}")
    d = int(tokens[0])
    vals = [float(v) for v in tokens[1 : 1 + d * d]]
    if len(vals) != d * d:
        raise ValidationError(f"matrix file {path} needs {d * d} entries, got {len(vals)}")
    return np.array(vals).reshape(d, d)


def read_matrix_file(path) -> OperatorMatrix:
    return OperatorMatrix.from_matrix(read_raw_matrix(path))


def write_matrix_file(path, m: np.ndarray):
    m = np.asarray(m, dtype=float)
    with open(path, "w") as fh:
        fh.write(f"{m.shape[0]}\n")
        for row in m:
            fh.write(" ".join(repr(v) for v in row) + "\n")


def read_blocks_file(path) -> OperatorMatrix:
    """One line per block: 'real lambda l' or 'complex a b l'; optional 'P <file>'."""
    import os

    blocks, p_matrix = [], None
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "real":
                blocks.append(JordanBlock("real", float(parts[1]), size=int(parts[2])))
            elif parts[0] == "complex":
                blocks.append(
                    JordanBlock("complex", float(parts[1]), float(parts[2]), int(parts[3]))
                )
            elif parts[0] == "P":
                p_path = os.path.join(os.path.dirname(str(path)), parts[1])
                p_matrix = read_raw_matrix(p_path)
            else:
                raise ValidationError(f"unrecognized block line: {line.strip()!r}")
    if not blocks:
        raise ValidationError(f"no blocks found in {path}")
    return build_from_blocks(blocks, p_matrix)
