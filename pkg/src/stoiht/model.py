"""Synthetic sparse-recovery instances and the support/thresholding primitives.

All indices are 0-based, including the instance file format.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EMPTY_SUPPORT = np.empty(0, dtype=np.intp)
EMPTY_SUPPORT.flags.writeable = False

# nnz below this fraction of m uses the column-gather residual path
_SPARSE_RESIDUAL_FRACTION = 0.25


@dataclass(frozen=True)
class ProblemInstance:
    """Measurements y = A @ x_true + z, with A and y split into m/b row blocks.

    Immutable after construction; safe to share across threads and processes.
    """

    A: np.ndarray        # (m, n)
    x_true: np.ndarray   # (n,), at most s nonzeros
    z: np.ndarray        # (m,)
    y: np.ndarray        # (m,)
    n: int
    m: int
    s: int
    b: int
    noise_std: float
    seed: int

    def __post_init__(self):
        if self.A.shape != (self.m, self.n):
            raise ValueError(f"A has shape {self.A.shape}, expected ({self.m}, {self.n})")
        if self.m % self.b != 0:
            raise ValueError(f"block size {self.b} does not divide m={self.m}")
        if np.count_nonzero(self.x_true) > self.s:
            raise ValueError("x_true has more than s nonzeros")
        for arr in (self.A, self.x_true, self.z, self.y):
            arr.flags.writeable = False

    @property
    def num_blocks(self):
        return self.m // self.b

    def block_rows(self, i):
        """Row slice of block i (contiguous, the M blocks partition the rows)."""
        if not 0 <= i < self.num_blocks:
            raise IndexError(f"block index {i} out of range [0, {self.num_blocks})")
        return slice(i * self.b, (i + 1) * self.b)

    def true_support(self):
        return np.flatnonzero(self.x_true).astype(np.intp)


def generate_instance(n, m, s, b, noise_std=0.0, seed=0):
    """Draw a random instance, fully determined by the arguments.

    A has i.i.d. N(0, 1/m) entries, so columns have unit expected norm and a
    unit step size behaves like the classic full-gradient iteration.  x_true
    has a uniformly random size-s support with standard normal values.
    """
    if n <= 0 or m <= 0 or b <= 0:
        raise ValueError("n, m, b must be positive")
    if not 0 <= s <= n:
        raise ValueError(f"sparsity s={s} must lie in [0, {n}]")
    if m % b != 0:
        raise ValueError(f"block size {b} must divide m={m}")
    if noise_std < 0:
        raise ValueError("noise_std must be nonnegative")
    if not 0 <= seed < 2**64:
        raise ValueError("seed must fit in 64 bits")

    rng = np.random.default_rng(seed)
    A = rng.normal(0.0, 1.0 / math.sqrt(m), size=(m, n))
    support = np.sort(rng.choice(n, size=s, replace=False))
    x_true = np.zeros(n)
    x_true[support] = rng.standard_normal(s)
    z = noise_std * rng.standard_normal(m)
    y = A @ x_true + z
    return ProblemInstance(A=A, x_true=x_true, z=z, y=y, n=n, m=m, s=s, b=b,
                           noise_std=float(noise_std), seed=seed)


def top_support(a, s):
    """Indices of the s largest-magnitude entries of a, sorted ascending.

    Ties break toward the lower index, so vectors with fewer than s nonzeros
    are padded with the lowest-indexed zero entries.  Deterministic.
    """
    a = np.asarray(a)
    if not 0 <= s <= a.size:
        raise ValueError(f"s={s} must lie in [0, {a.size}]")
    if s == 0:
        return EMPTY_SUPPORT
    if s == a.size:
        return np.arange(a.size, dtype=np.intp)
    mags = np.abs(a)
    # O(n) selection; the cutoff magnitude may be shared, so fill the boundary
    # ties explicitly in index order
    cutoff = mags[np.argpartition(mags, a.size - s)[a.size - s]]
    above = np.flatnonzero(mags > cutoff)
    if above.size < s:
        at = np.flatnonzero(mags == cutoff)
        keep = np.concatenate([above, at[: s - above.size]])
        if keep.size == s:
            return np.sort(keep).astype(np.intp)
    # non-finite entries defeat the partition cutoff; fall back to a full sort
    order = np.argsort(-mags, kind="stable")
    return np.sort(order[:s]).astype(np.intp)


def hard_threshold(a, s):
    """Best s-sparse approximation of a in l2: keep the s largest magnitudes."""
    a = np.asarray(a)
    out = np.zeros_like(a)
    keep = top_support(a, s)
    out[keep] = a[keep]
    return out


def project_onto(a, support):
    """Zero every component of a outside the given index set."""
    a = np.asarray(a)
    support = np.asarray(support, dtype=np.intp)
    if support.size and (support.min() < 0 or support.max() >= a.size):
        raise IndexError(f"support indices out of range [0, {a.size})")
    out = np.zeros_like(a)
    out[support] = a[support]
    return out


def block_residual(problem, x, i):
    """y_i - A_i @ x for row block i."""
    rows = problem.block_rows(i)
    return problem.y[rows] - problem.A[rows] @ x


def residual_norm(problem, x):
    """l2 norm of y - A @ x, taking the cheap path when x is sparse."""
    nz = np.flatnonzero(x)
    if nz.size == 0:
        r = problem.y
    elif nz.size <= problem.m * _SPARSE_RESIDUAL_FRACTION:
        r = problem.y - problem.A[:, nz] @ x[nz]
    else:
        r = problem.y - problem.A @ x
    return float(np.linalg.norm(r))


def signal_error(problem, x):
    """l2 distance from x to the planted signal."""
    return float(np.linalg.norm(x - problem.x_true))


_FILE_COMMENT = ("# sparse-recovery instance v1; 0-based indices; header line "
                 "'n m s b noise_std seed'; then m rows of A (n columns), one row "
                 "x_true (n values), one row z (m values); space-separated decimals")


def save_instance(problem, path):
    """Write an instance as decimal text; load_instance round-trips it exactly."""

    def line(values):
        # shortest decimal that round-trips to the exact same float64
        return " ".join(repr(float(v)) for v in values) + "\n"

    with open(path, "w", encoding="ascii") as fh:
        fh.write(_FILE_COMMENT + "\n")
        fh.write(f"{problem.n} {problem.m} {problem.s} {problem.b} "
                 f"{float(problem.noise_std)!r} {problem.seed}\n")
        for row in problem.A:
            fh.write(line(row))
        fh.write(line(problem.x_true))
        fh.write(line(problem.z))


def load_instance(path):
    """Read an instance written by save_instance; y is rebuilt as A @ x_true + z."""
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln for ln in (raw.strip() for raw in fh) if ln and not ln.startswith("#")]
    try:
        head = lines[0].split()
        n, m, s, b = (int(v) for v in head[:4])
        noise_std = float(head[4])
        seed = int(head[5])
        if len(lines) != 1 + m + 2:
            raise ValueError(f"expected {1 + m + 2} data lines, found {len(lines)}")
        A = np.array([[float(v) for v in lines[1 + i].split()] for i in range(m)])
        x_true = np.array([float(v) for v in lines[1 + m].split()])
        z = np.array([float(v) for v in lines[2 + m].split()])
    except (ValueError, IndexError) as exc:
        raise ValueError(f"{path}: malformed instance file: {exc}") from exc
    if A.shape != (m, n) or x_true.shape != (n,) or z.shape != (m,):
        raise ValueError(f"{path}: data dimensions disagree with header")
    y = A @ x_true + z
    return ProblemInstance(A=A, x_true=x_true, z=z, y=y, n=n, m=m, s=s, b=b,
                           noise_std=noise_std, seed=seed)
