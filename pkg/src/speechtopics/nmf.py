"""Non-negative matrix factorization with NNDSVD initialization.

Factorizes a non-negative matrix A (n x m) into W (n x k) and H (k x m)
by minimizing the Frobenius reconstruction error with multiplicative
updates. Rows of H are topics; ordering a row by weight yields the topic
descriptor. Initialization is deterministic NNDSVD: each of the k leading
singular vector pairs is split into positive and negative parts and the
side with the larger norm product is kept, scaled back by the singular
value. Exact zeros left by the split are replaced with a small fill value
(1e-2 times the mean nonzero entry of A) because multiplicative updates
can never move a zero entry.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, svds

from .errors import NumericError, ParameterError

# Matrices at or below this min(n, m) take the exact LAPACK SVD path;
# larger ones use ARPACK with a fixed start vector for determinism.
_DENSE_SVD_LIMIT = 600

# Objective evaluation uses the exact residual up to this many cells,
# beyond which a Gram-matrix identity avoids forming W @ H.
_EXACT_OBJECTIVE_CELLS = 4_000_000

_EPS = 1e-12


@dataclass
class Factorization:
    """NMF factors for one matrix, immutable once returned."""

    W: np.ndarray
    H: np.ndarray
    k: int
    iterations_run: int
    final_error: float
    error_history: tuple[float, ...] = ()
    vocabulary: tuple[str, ...] | None = None
    doc_ids: tuple[str, ...] | None = None

    def to_json_dict(self) -> dict:
        return {
            "k": self.k,
            "vocabulary_ref": list(self.vocabulary) if self.vocabulary else None,
            "doc_ids_ref": list(self.doc_ids) if self.doc_ids else None,
            "W": [[float(v) for v in row] for row in self.W],
            "H": [[float(v) for v in row] for row in self.H],
            "final_error": float(self.final_error),
            "iterations_run": self.iterations_run,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), separators=(",", ":"))

    @classmethod
    def from_json_dict(cls, payload: dict) -> "Factorization":
        vocab = payload.get("vocabulary_ref")
        doc_ids = payload.get("doc_ids_ref")
        return cls(
            W=np.asarray(payload["W"], dtype=np.float64),
            H=np.asarray(payload["H"], dtype=np.float64),
            k=int(payload["k"]),
            iterations_run=int(payload["iterations_run"]),
            final_error=float(payload["final_error"]),
            vocabulary=tuple(vocab) if vocab else None,
            doc_ids=tuple(doc_ids) if doc_ids else None,
        )


@dataclass(frozen=True)
class TopicDescriptor:
    """Top terms of one topic, ordered by descending weight."""

    topic_index: int
    terms: tuple[tuple[str, float], ...]

    def term_list(self) -> list[str]:
        return [t for t, _ in self.terms]

    def term_set(self) -> frozenset[str]:
        return frozenset(t for t, _ in self.terms)


def _as_matrix(A) -> tuple[object, tuple[str, ...] | None, tuple[str, ...] | None]:
    """Accept a DocumentTermMatrix, scipy sparse matrix, or ndarray."""
    vocabulary = None
    doc_ids = None
    if hasattr(A, "matrix") and hasattr(A, "vocabulary"):
        vocabulary = tuple(A.vocabulary)
        doc_ids = tuple(A.doc_ids)
        A = A.matrix
    if sp.issparse(A):
        M = A.tocsr().astype(np.float64)
    else:
        M = np.asarray(A, dtype=np.float64)
        if M.ndim != 2:
            raise ParameterError("expected a 2-d matrix")
    return M, vocabulary, doc_ids


def _check_nonnegative(M) -> None:
    if sp.issparse(M):
        if M.nnz and M.data.min() < 0:
            raise ParameterError("matrix contains negative values")
    elif M.size and M.min() < 0:
        raise ParameterError("matrix contains negative values")


def _leading_triplets(M, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n, m = M.shape
    small = min(n, m)
    if small <= _DENSE_SVD_LIMIT or k >= small - 1:
        dense = M.toarray() if sp.issparse(M) else np.asarray(M, dtype=np.float64)
        try:
            U, s, Vt = scipy.linalg.svd(dense, full_matrices=False)
        except scipy.linalg.LinAlgError as exc:
            raise NumericError(f"SVD failed to converge: {exc}") from exc
        return U[:, :k], s[:k], Vt[:k, :]
    try:
        U, s, Vt = svds(M, k=k, v0=np.ones(small))
    except ArpackNoConvergence as exc:
        raise NumericError(f"truncated SVD failed to converge: {exc}") from exc
    order = np.argsort(s)[::-1]
    return U[:, order], s[order], Vt[order, :]


def _mean_nonzero(M) -> float:
    if sp.issparse(M):
        return float(M.data.mean()) if M.nnz else 0.0
    nz = M[M > 0]
    return float(nz.mean()) if nz.size else 0.0


def nndsvd_init(A, k: int, zero_fill: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic NNDSVD starting factors (W0, H0) for rank k.

    With ``zero_fill`` disabled the factors contain the exact zeros the
    sign split produces, which is useful for testing the reconstruction
    properties of the raw initialization.
    """
    M, _, _ = _as_matrix(A)
    n, m = M.shape
    if not 1 <= k <= min(n, m):
        raise ParameterError(f"k={k} outside [1, {min(n, m)}] for shape {n}x{m}")
    _check_nonnegative(M)

    U, s, Vt = _leading_triplets(M, k)
    W = np.zeros((n, k))
    H = np.zeros((k, m))

    # The leading singular pair of a non-negative matrix can be taken
    # non-negative outright.
    W[:, 0] = np.sqrt(s[0]) * np.abs(U[:, 0])
    H[0, :] = np.sqrt(s[0]) * np.abs(Vt[0, :])

    for j in range(1, k):
        x, y = U[:, j], Vt[j, :]
        x_pos, y_pos = np.maximum(x, 0.0), np.maximum(y, 0.0)
        x_neg, y_neg = np.maximum(-x, 0.0), np.maximum(-y, 0.0)
        norm_pp = np.linalg.norm(x_pos) * np.linalg.norm(y_pos)
        norm_nn = np.linalg.norm(x_neg) * np.linalg.norm(y_neg)
        if norm_pp >= norm_nn:
            u, v, sigma = x_pos, y_pos, norm_pp
        else:
            u, v, sigma = x_neg, y_neg, norm_nn
        if sigma == 0.0:
            continue
        scale = math.sqrt(s[j] * sigma)
        W[:, j] = scale * u / np.linalg.norm(u)
        H[j, :] = scale * v / np.linalg.norm(v)

    if zero_fill:
        fill = _mean_nonzero(M) * 1e-2
        W[W == 0.0] = fill
        H[H == 0.0] = fill
    return W, H


def _exact_residual(M, W: np.ndarray, H: np.ndarray) -> float:
    n, m = M.shape
    rows_per_chunk = max(1, _EXACT_OBJECTIVE_CELLS // max(1, m))
    total = 0.0
    for i0 in range(0, n, rows_per_chunk):
        i1 = min(n, i0 + rows_per_chunk)
        block = M[i0:i1]
        if sp.issparse(block):
            block = block.toarray()
        R = block - W[i0:i1] @ H
        total += float(np.dot(R.ravel(), R.ravel()))
    return math.sqrt(total)


def _gram_residual(M, W: np.ndarray, H: np.ndarray) -> float:
    # ||A - WH||_F^2 = ||A||^2 - 2 <W'A, H> + <W'W, HH'>
    if sp.issparse(M):
        norm_a2 = float(M.multiply(M).sum())
        WtA = (M.T @ W).T
    else:
        norm_a2 = float(np.dot(M.ravel(), M.ravel()))
        WtA = W.T @ M
    cross = float(np.sum(WtA * H))
    gram = float(np.sum((W.T @ W) * (H @ H.T)))
    return math.sqrt(max(norm_a2 - 2.0 * cross + gram, 0.0))


def _objective(M, W: np.ndarray, H: np.ndarray) -> float:
    n, m = M.shape
    if n * m <= _EXACT_OBJECTIVE_CELLS:
        return _exact_residual(M, W, H)
    return _gram_residual(M, W, H)


def reconstruction_error(A, W: np.ndarray, H: np.ndarray) -> float:
    """Frobenius norm of A - W @ H, computed from the exact residual."""
    M, _, _ = _as_matrix(A)
    W = np.asarray(W, dtype=np.float64)
    H = np.asarray(H, dtype=np.float64)
    n, m = M.shape
    if W.ndim != 2 or H.ndim != 2 or W.shape[0] != n or H.shape[1] != m \
            or W.shape[1] != H.shape[0]:
        raise ParameterError(
            f"shape mismatch: A is {n}x{m}, W is {W.shape}, H is {H.shape}"
        )
    return _exact_residual(M, W, H)


def factorize(
    A,
    k: int,
    init: str = "nndsvd",
    seed: int | None = None,
    max_iter: int = 200,
    tol: float = 1e-5,
    vocabulary: Sequence[str] | None = None,
    doc_ids: Sequence[str] | None = None,
) -> Factorization:
    """Run multiplicative-update NMF until convergence or ``max_iter``.

    Convergence is declared when the relative objective change
    ``|e_i - e_{i+1}| / max(e_i, 1e-12)`` drops below ``tol``. The
    per-iteration objective sequence is recorded in ``error_history``
    (the first entry is the error of the initial factors).
    """
    M, vocab_from_a, ids_from_a = _as_matrix(A)
    if vocabulary is not None:
        vocab_from_a = tuple(vocabulary)
    if doc_ids is not None:
        ids_from_a = tuple(doc_ids)
    n, m = M.shape
    if not 1 <= k <= min(n, m):
        raise ParameterError(f"k={k} outside [1, {min(n, m)}] for shape {n}x{m}")
    if max_iter < 1:
        raise ParameterError("max_iter must be >= 1")
    if tol <= 0:
        raise ParameterError("tol must be > 0")
    _check_nonnegative(M)

    if init == "nndsvd":
        W, H = nndsvd_init(M, k)
    elif init == "random":
        rng = np.random.default_rng(seed)
        mean = M.mean() if not sp.issparse(M) else M.sum() / (n * m)
        avg = math.sqrt(max(float(mean), _EPS) / k)
        W = avg * np.abs(rng.standard_normal((n, k)))
        H = avg * np.abs(rng.standard_normal((k, m)))
    else:
        raise ParameterError(f"unknown init {init!r}")

    sparse = sp.issparse(M)
    errors = [_objective(M, W, H)]
    iterations = 0
    for iteration in range(1, max_iter + 1):
        # Lee-Seung multiplicative updates for the Frobenius objective.
        WtA = (M.T @ W).T if sparse else W.T @ M
        H *= WtA / (W.T @ W @ H + _EPS)
        AHt = M @ H.T
        W *= AHt / (W @ (H @ H.T) + _EPS)

        err = _objective(M, W, H)
        if not math.isfinite(err):
            raise NumericError(f"non-finite objective at iteration {iteration}")
        errors.append(err)
        iterations = iteration
        prev = errors[-2]
        if abs(prev - err) / max(prev, _EPS) < tol:
            break

    if not (np.isfinite(W).all() and np.isfinite(H).all()):
        raise NumericError(f"non-finite factor entries after iteration {iterations}")
    W.setflags(write=False)
    H.setflags(write=False)
    return Factorization(
        W=W,
        H=H,
        k=k,
        iterations_run=iterations,
        final_error=errors[-1],
        error_history=tuple(errors),
        vocabulary=vocab_from_a,
        doc_ids=ids_from_a,
    )


def top_terms(f: Factorization, topic_index: int, t: int) -> TopicDescriptor:
    """The t heaviest terms of one topic; ties break on the term string."""
    if not 0 <= topic_index < f.k:
        raise ParameterError(f"topic_index {topic_index} outside [0, {f.k})")
    if f.vocabulary is None:
        raise ParameterError("factorization carries no vocabulary")
    m = f.H.shape[1]
    if not 1 <= t <= m:
        raise ParameterError(f"t={t} outside [1, {m}]")
    row = f.H[topic_index]
    order = sorted(range(m), key=lambda j: (-row[j], f.vocabulary[j]))[:t]
    return TopicDescriptor(
        topic_index=topic_index,
        terms=tuple((f.vocabulary[j], float(row[j])) for j in order),
    )
