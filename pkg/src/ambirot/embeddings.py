"""Equivariant embeddings of SO(3)/K into spaces of symmetric tensors.

Each embedding is a list of *blocks*. A block of degree ``r`` built from
frame vectors ``f_a`` with weights ``w_a`` maps a rotation ``U`` to

    sum_a w_a (U f_a)^{(x) r}  -  c * symm(I^{(x) r/2}),

stored in the compressed symmetric layout of :mod:`ambirot.symtensor`.
The constant ``c`` removes the Haar mean of even-degree blocks, so every
embedding has mean zero under uniformity. The inner product of two
embedded points has the closed form

    sum_{a,b} w_a w_b ((U f_a) . (W f_b))^r - 2 c sum_a w_a + c^2 (r + 1).
"""

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import comb

import numpy as np

from . import symtensor
from .rotations import (
    SymmetryGroup,
    as_sample,
    haar_quadrature,
    make_group,
)
from .exceptions import GroupMismatchError

__all__ = [
    "EmbeddingBlock",
    "Embedding",
    "EmbeddedPoint",
    "standard_embedding",
    "embed",
    "embed_array",
    "inner",
    "frame_inner",
    "gram_matrix",
    "rho_squared",
    "embedding_dim",
    "symmetrize",
    "mean_embedding",
    "haar_covariance",
    "null_spectrum",
    "AveragedEmbedding",
    "averaged_embed",
    "haar_trace_moment",
    "pair_kernel",
]

symmetrize = symtensor.symmetrize


@dataclass(frozen=True, eq=False)
class EmbeddingBlock:
    """One tensor-valued component of an embedding.

    Attributes
    ----------
    degree : int
        Tensor rank ``r``.
    vectors : ndarray, shape (m, 3)
        Frame vectors in the standard orientation.
    weights : ndarray, shape (m,)
    shift : float
        Coefficient ``c`` of the subtracted ``symm(I^{(x) r/2})``.
    """

    degree: int
    vectors: np.ndarray
    weights: np.ndarray
    shift: float = 0.0

    def __post_init__(self):
        v = np.array(self.vectors, dtype=float).reshape(-1, 3)
        w = np.array(self.weights, dtype=float).reshape(-1)
        if len(v) != len(w):
            raise ValueError("vectors and weights differ in length")
        if self.shift and self.degree % 2:
            raise ValueError("only even-degree blocks can carry a shift")
        for arr in (v, w):
            arr.setflags(write=False)
        object.__setattr__(self, "vectors", v)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self):
        r = self.degree
        return (r + 1) * (r + 2) // 2

    @property
    def constant(self):
        """Additive constant of the closed-form inner product."""
        if not self.shift:
            return 0.0
        return -2.0 * self.shift * self.weights.sum() + self.shift**2 * (self.degree + 1)

    def features(self, reps):
        """Compressed coordinates for rotations ``reps`` of shape (..., 3, 3)."""
        x = np.einsum("...ij,aj->...ai", reps, self.vectors)
        out = np.einsum("...ad,a->...d", symtensor.power_features(x, self.degree), self.weights)
        if self.shift:
            out = out - self.shift * symtensor.identity_power(self.degree)
        return out

    def kernel(self, Q):
        """Inner product ``<t(I), t(Q)>`` of this block, for Q of shape (..., 3, 3)."""
        Q = np.asarray(Q, dtype=float)
        dots = self.vectors @ (Q @ self.vectors.T)
        m = len(self.weights)
        ww = np.outer(self.weights, self.weights).reshape(m * m)
        powered = _int_power(dots, self.degree).reshape(dots.shape[:-2] + (m * m,))
        return powered @ ww + self.constant


def _int_power(x, r):
    """``x**r`` for a positive integer ``r`` by repeated squaring (faster than pow)."""
    out = None
    base = x
    while r:
        if r & 1:
            out = base if out is None else out * base
        r >>= 1
        if r:
            base = base * base
    return out


@dataclass(frozen=True, eq=False)
class Embedding:
    """An embedding ``t`` of SO(3)/K as a list of blocks.

    Use :func:`standard_embedding` for the embedding of a named group.
    Custom embeddings (for instance alternative weights) can be built
    directly from blocks.
    """

    group: SymmetryGroup
    blocks: tuple
    name: str = ""

    def __post_init__(self):
        if not isinstance(self.group, SymmetryGroup):
            object.__setattr__(self, "group", make_group(self.group))
        object.__setattr__(self, "blocks", tuple(self.blocks))

    @property
    def dim(self):
        """Dimension of the coordinate vector (the ambient tensor space)."""
        return sum(b.dim for b in self.blocks)

    @property
    def max_degree(self):
        return max(b.degree for b in self.blocks)

    @property
    def rho2(self):
        """Squared norm shared by all embedded points."""
        return float(self.kernel(np.eye(3)))

    def coords(self, reps):
        """Coordinates of rotations ``reps`` of shape (..., 3, 3)."""
        return np.concatenate([b.features(reps) for b in self.blocks], axis=-1)

    def kernel(self, Q):
        """Closed-form ``<t([I]), t([Q])>``; equals ``<t([U]), t([U Q])>``."""
        Q = np.asarray(Q, dtype=float)
        return sum(b.kernel(Q) for b in self.blocks)

    def inner_reps(self, U, W):
        """Closed-form ``<t([U]), t([W])>`` for broadcastable representatives."""
        return self.kernel(np.swapaxes(np.asarray(U), -1, -2) @ np.asarray(W))

    def split(self, coords):
        """Split coordinates into per-block arrays."""
        idx = np.cumsum([b.dim for b in self.blocks])[:-1]
        return np.split(np.asarray(coords), idx, axis=-1)


def _block(degree, vectors, weights=None, centred=None):
    vectors = np.asarray(vectors, dtype=float).reshape(-1, 3)
    weights = np.ones(len(vectors)) if weights is None else np.asarray(weights, dtype=float)
    if centred is None:
        centred = degree % 2 == 0
    shift = weights.sum() / (degree + 1) if centred else 0.0
    return EmbeddingBlock(degree, vectors, weights, shift)


@lru_cache(maxsize=None)
def _standard_embedding(kind, r):
    group = make_group(kind, r) if kind in "CD" else make_group(kind)
    vecs, _ = group.frame_template()
    e = np.eye(3)
    if kind == "C" and r == 1:
        blocks = [_block(1, e[k]) for k in range(3)]
    elif kind == "C" and r == 2:
        blocks = [_block(1, e[2]), _block(2, e[0])]
    elif kind == "C":
        blocks = [_block(1, e[2]), _block(r, vecs)]
    elif kind == "D" and r == 2:
        blocks = [_block(2, e[k]) for k in range(3)]
    elif kind == "D":
        blocks = [_block(r, vecs)]
    elif kind == "T":
        blocks = [_block(3, vecs)]
    elif kind == "O":
        blocks = [_block(4, vecs)]
    else:
        blocks = [_block(10, vecs)]
    return Embedding(group, tuple(blocks), name=f"t_{group.name}")


def standard_embedding(group):
    """The tensor embedding ``t_K`` of a named group."""
    g = make_group(group)
    return _standard_embedding(g.kind, g.order)


@dataclass(frozen=True, eq=False)
class EmbeddedPoint:
    """A point of the embedding space.

    Attributes
    ----------
    coords : ndarray, shape (dim,)
        Concatenated compressed coordinates of all blocks.
    embedding : Embedding
    """

    coords: np.ndarray
    embedding: Embedding = field(repr=False)

    @property
    def group(self):
        return self.embedding.group

    @property
    def parts(self):
        """Per-block ``(degree, coordinates)`` pairs."""
        return [(b.degree, c) for b, c in zip(self.embedding.blocks, self.embedding.split(self.coords))]

    @property
    def vector_part(self):
        """Concatenated degree-one blocks, or ``None``."""
        vec = [c for d, c in self.parts if d == 1]
        return np.concatenate(vec) if vec else None

    @property
    def tensor_part(self):
        """Concatenated higher-degree blocks (compressed), or ``None``."""
        ten = [c for d, c in self.parts if d > 1]
        return np.concatenate(ten) if ten else None

    def dense_parts(self):
        """Dense ``3^r`` arrays for every block."""
        return [symtensor.to_dense(c, d) for d, c in self.parts]

    def norm2(self):
        return float(self.coords @ self.coords)


def embed_array(reps, group=None, embedding=None):
    """Embedding coordinates for an array of representatives.

    Parameters
    ----------
    reps : ndarray, shape (..., 3, 3)
    group : SymmetryGroup or str, optional
    embedding : Embedding, optional
        Defaults to the standard embedding of ``group``.
    """
    if embedding is None:
        embedding = standard_embedding(group)
    return embedding.coords(np.asarray(reps, dtype=float))


def embed(x, embedding=None):
    """Embed an ambiguous rotation.

    Parameters
    ----------
    x : AmbiguousRotation
    embedding : Embedding, optional
        Defaults to the standard embedding of ``x.group``.

    Returns
    -------
    EmbeddedPoint
    """
    if embedding is None:
        embedding = standard_embedding(x.group)
    elif embedding.group != x.group:
        raise GroupMismatchError("embedding and point have different groups")
    return EmbeddedPoint(embedding.coords(x.rep), embedding)


def inner(a, b):
    """Inner product of two embedded points of the same group."""
    if a.group != b.group:
        raise GroupMismatchError(f"group mismatch: {a.group} vs {b.group}")
    return float(a.coords @ b.coords)


def frame_inner(x, y, embedding=None):
    """Closed-form inner product ``<t([X]), t([Y])>`` from the frames."""
    if x.group != y.group:
        raise GroupMismatchError(f"group mismatch: {x.group} vs {y.group}")
    emb = standard_embedding(x.group) if embedding is None else embedding
    return float(emb.inner_reps(x.rep, y.rep))


def gram_matrix(sample, embedding=None):
    """Matrix of pairwise inner products ``<t([U_i]), t([U_j])>``."""
    s = as_sample(sample)
    emb = standard_embedding(s.group) if embedding is None else embedding
    if isinstance(emb, AveragedEmbedding):
        return emb.gram(s.reps)
    t = emb.coords(s.reps)
    return t @ t.T


def rho_squared(group):
    """Squared radius ``rho^2`` of the standard embedding, as a Fraction when rational.

    Returns
    -------
    fractions.Fraction or float
    """
    g = make_group(group)
    if g.kind == "C" and g.order == 1:
        return Fraction(3)
    if g.kind == "C" and g.order == 2:
        return Fraction(5, 3)
    if g.kind == "D" and g.order == 2:
        return Fraction(2)
    if g.kind == "T":
        return Fraction(32, 9)
    if g.kind == "O":
        return Fraction(6, 5)
    if g.kind == "Y":
        return Fraction(18816, 6875)
    r = g.order
    if r % 2:
        dihedral = Fraction(2) ** (1 - r) * r * r
    else:
        dihedral = Fraction(r * r) * Fraction(2) ** (1 - r) * (1 + Fraction(comb(r, r // 2), 2)) - Fraction(r * r, r + 1)
    return dihedral + 1 if g.kind == "C" else dihedral


def embedding_dim(group):
    """Tabulated dimension ``nu`` used by the S statistic.

    These are the tabulated values; for some groups the embedded image
    spans a smaller subspace, see :func:`null_spectrum`.
    """
    g = make_group(group)
    table = {("C", 1): 9, ("C", 2): 8, ("D", 2): 10, ("T", 0): 10, ("O", 0): 9, ("Y", 0): 21}
    if (g.kind, g.order) in table:
        return table[(g.kind, g.order)]
    r = g.order
    base = (r + 2) * (r + 1) // 2
    return base + 3 if g.kind == "C" else base


def mean_embedding(sample, embedding=None):
    """Arithmetic mean ``tbar`` of the embedded sample."""
    s = as_sample(sample)
    if len(s) == 0:
        raise ValueError("empty sample")
    emb = standard_embedding(s.group) if embedding is None else embedding
    return EmbeddedPoint(emb.coords(s.reps).mean(axis=0), emb)


@lru_cache(maxsize=None)
def _haar_covariance(embedding):
    R, w = haar_quadrature(2 * embedding.max_degree)
    t = embedding.coords(R)
    cov = (t * w[:, None]).T @ t
    cov.setflags(write=False)
    return cov


def haar_covariance(embedding):
    """Exact covariance of ``t([U])`` under Haar measure (mean is zero).

    Parameters
    ----------
    embedding : Embedding or group

    Returns
    -------
    ndarray, shape (dim, dim)
    """
    if not isinstance(embedding, Embedding):
        embedding = standard_embedding(embedding)
    return _haar_covariance(embedding)


def null_spectrum(embedding, tol=1e-10):
    """Non-zero eigenvalues of the Haar covariance, in decreasing order.

    Under uniformity ``S = (nu / rho^2) n |tbar|^2`` converges to
    ``(nu / rho^2) sum_j lambda_j chi2_1``.
    """
    lam = np.linalg.eigvalsh(haar_covariance(embedding))[::-1]
    return lam[lam > tol * max(lam[0], 1.0)]


# ---------------------------------------------------------------------------
# Averaged (band-limited) embedding
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def haar_trace_moment(l):
    """``E (trace U)^l`` under Haar measure, by exact quadrature."""
    R, w = haar_quadrature(l)
    return float(w @ np.trace(R, axis1=1, axis2=2) ** l)


@lru_cache(maxsize=None)
def _haar_tensor_mean(l):
    R, w = haar_quadrature(l)
    flat = R.reshape(len(R), 9)
    out = np.ones((len(R), 1))
    for _ in range(l):
        out = (out[:, :, None] * flat[:, None, :]).reshape(len(R), -1)
    mean = w @ out
    mean[np.abs(mean) < 1e-14] = 0.0
    mean.setflags(write=False)
    return mean


def _product_multiset(g1, g2):
    """Distinct products ``R2 R1^T`` with their relative frequencies."""
    prods = (g2.elements[None, :] @ np.swapaxes(g1.elements, -1, -2)[:, None]).reshape(-1, 3, 3)
    keys = np.round(prods.reshape(len(prods), 9), 8) + 0.0
    _, first, counts = np.unique(keys, axis=0, return_index=True, return_counts=True)
    return prods[first], counts / len(prods)


@dataclass(frozen=True, eq=False)
class AveragedEmbedding:
    """Band-limited embedding averaged over the symmetry group.

    ``t([U]) = (avg_R (U R)^{(x) l} - c_l)_{l = 1..L}`` where ``c_l`` is the
    Haar mean of ``U^{(x) l}``. Inner products only need traces:

        <t1([X]), t2([Y])> = sum_l avg_{R1, R2} tr(R1^T X^T Y R2)^l - m_l,

    with ``m_l = E (tr U)^l``. Unlike the standard embeddings this one
    works across different groups.

    Parameters
    ----------
    group : SymmetryGroup or str
    band_limit : int
    """

    group: SymmetryGroup
    band_limit: int = 4

    def __post_init__(self):
        if not isinstance(self.group, SymmetryGroup):
            object.__setattr__(self, "group", make_group(self.group))
        if int(self.band_limit) < 1:
            raise ValueError("band_limit must be at least 1")
        object.__setattr__(self, "band_limit", int(self.band_limit))

    def __eq__(self, other):
        return isinstance(other, AveragedEmbedding) and (self.group, self.band_limit) == (other.group, other.band_limit)

    def __hash__(self):
        return hash(("avg", self.group, self.band_limit))

    @property
    def moments(self):
        """Haar trace moments ``m_1..m_L``."""
        return np.array([haar_trace_moment(l) for l in range(1, self.band_limit + 1)])

    @property
    def coefficients(self):
        """Haar means ``c_l`` of the tensor powers, flattened."""
        return [_haar_tensor_mean(l) for l in range(1, self.band_limit + 1)]

    @property
    def rho2(self):
        return float(self.kernel(np.eye(3)))

    def coords(self, reps):
        """Dense coefficient stack (length ``sum_l 9^l``) for representatives."""
        reps = np.asarray(reps, dtype=float)
        lead = reps.shape[:-2]
        flat = (reps[..., None, :, :] @ self.group.elements).reshape(lead + (len(self.group), 9))
        parts = []
        cur = np.ones(lead + (len(self.group), 1))
        for l in range(1, self.band_limit + 1):
            cur = (cur[..., :, None] * flat[..., None, :]).reshape(lead + (len(self.group), -1))
            parts.append(cur.mean(axis=-2) - _haar_tensor_mean(l))
        return np.concatenate(parts, axis=-1)

    def cross_kernel(self, other, Q):
        """``<t_self([X]), t_other([Y])>`` as a function of ``Q = X^T Y``."""
        if self.band_limit != other.band_limit:
            raise ValueError("band limits differ")
        prods, freq = _product_multiset(self.group, other.group)
        Q = np.asarray(Q, dtype=float)
        tr = np.einsum("...ij,pji->...p", Q, prods)
        out = 0.0
        for l, m in enumerate(self.moments, start=1):
            out = out + (tr**l) @ freq - m
        return out

    def kernel(self, Q):
        """``<t([I]), t([Q])>`` for this embedding with itself."""
        return self.cross_kernel(self, Q)

    def inner_reps(self, U, W):
        return self.kernel(np.swapaxes(np.asarray(U), -1, -2) @ np.asarray(W))

    def gram(self, reps):
        reps = np.asarray(reps, dtype=float)
        Q = np.swapaxes(reps, -1, -2)[:, None] @ reps[None]
        return self.kernel(Q)


def averaged_embed(x, spec):
    """Dense averaged-embedding coefficients of an ambiguous rotation."""
    if spec.group != x.group:
        raise GroupMismatchError("embedding and point have different groups")
    return spec.coords(x.rep)


def pair_kernel(emb1, emb2, Q):
    """``<t1([X]), t2([Y])>`` as a function of ``Q = X^T Y``.

    Standard embeddings pair only with themselves; averaged embeddings
    pair across groups.
    """
    if isinstance(emb1, AveragedEmbedding) and isinstance(emb2, AveragedEmbedding):
        return emb1.cross_kernel(emb2, Q)
    if emb1 is emb2 or (isinstance(emb1, Embedding) and emb1 == emb2):
        return emb1.kernel(Q)
    raise GroupMismatchError("these embeddings do not share an inner-product space")
