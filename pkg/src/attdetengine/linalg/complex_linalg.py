"""
Álgebra linear complexa densa mínima usada pelos detectores.

Convenções
----------
- ``ComplexMatrix`` é um ``numpy.ndarray`` 2-D de dtype ``complex128``; vetores são matrizes
  coluna. As operações aceitam também pilhas ``(..., rows, cols)``, operando item a item.
- A expansão real de uma matriz complexa ``M x N`` é a matriz ``2M x 2N``
  ``[[Re, -Im], [Im, Re]]``; o vetor correspondente é ``[Re; Im]``.
"""

import numpy as np
import scipy.linalg

from attdetengine.exceptions import DimensionMismatch, NotPositiveDefinite, RankDeficient

ComplexMatrix = np.ndarray
RealMatrix = np.ndarray

PIVOT_TOLERANCE = 1e-14
QR_RANK_TOLERANCE = 1e-12
HERMITIAN_TOLERANCE = 1e-10


def as_complex_matrix(a) -> ComplexMatrix:
    """
    Converte `a` para ``complex128`` com ao menos duas dimensões, validando a entrada.

    Vetores 1-D viram matrizes coluna.

    Raises
    ------
    DimensionMismatch
        Se alguma dimensão for zero.
    ValueError
        Se houver entradas NaN/Inf.

    Examples
    --------
    >>> as_complex_matrix([1, 2j]).shape
    (2, 1)
    """
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim == 1:
        m = m[:, None]
    if m.ndim < 2 or 0 in m.shape[-2:]:
        raise DimensionMismatch(f"Matrix must have rows, cols >= 1, got shape {m.shape}.")
    if not np.all(np.isfinite(m)):
        raise ValueError("Matrix contains NaN or Inf entries.")
    return m


def matmul(a: ComplexMatrix, b: ComplexMatrix) -> ComplexMatrix:
    """
    Produto matricial complexo.

    Raises
    ------
    DimensionMismatch
        Se ``a.cols != b.rows``.

    Examples
    --------
    >>> i2 = np.diag([1j, 1j])
    >>> matmul(i2, i2).real.tolist()
    [[-1.0, 0.0], [0.0, -1.0]]
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape[-1] != b.shape[-2]:
        raise DimensionMismatch(f"Cannot multiply {a.shape} by {b.shape}.")
    return np.matmul(a, b)


def hermitian(a: ComplexMatrix) -> ComplexMatrix:
    """Transposta Hermitiana (conjugada) nas duas últimas dimensões."""
    return np.conj(np.swapaxes(np.asarray(a), -1, -2))


def _cholesky_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    if np.linalg.norm(a - a.conj().T) > HERMITIAN_TOLERANCE * max(np.linalg.norm(a), 1.0):
        raise NotPositiveDefinite("System matrix is not Hermitian.")
    diag_max = float(np.max(np.abs(np.diag(a).real)))
    threshold = PIVOT_TOLERANCE * diag_max
    try:
        lower = scipy.linalg.cholesky(a, lower=True, check_finite=False)
    except np.linalg.LinAlgError as e:
        raise NotPositiveDefinite(f"Cholesky failed on {n}x{n} system: {e}") from e
    pivots = np.diag(lower).real ** 2
    if diag_max <= 0.0 or np.any(pivots <= threshold):
        raise NotPositiveDefinite(
            f"Cholesky pivot {pivots.min():.3e} below tolerance {threshold:.3e}."
        )
    z = scipy.linalg.solve_triangular(lower, b, lower=True, check_finite=False)
    return scipy.linalg.solve_triangular(lower.conj().T, z, lower=False, check_finite=False)


def solve_hpd(a: ComplexMatrix, b: ComplexMatrix) -> ComplexMatrix:
    """
    Resolve ``a X = b`` para ``a`` Hermitiana positiva definida via Cholesky.

    Nunca forma a inversa explicitamente: fatora ``a = L Lᴴ`` e faz duas substituições
    triangulares. Pilhas ``(..., n, n)`` são resolvidas item a item.

    Parameters
    ----------
    a : ComplexMatrix
        Matriz ``n x n`` Hermitiana positiva definida.
    b : ComplexMatrix
        Lado direito ``n x k``.

    Returns
    -------
    ComplexMatrix
        Solução ``X`` com ``‖aX − b‖_F / ‖b‖_F`` da ordem do epsilon de máquina.

    Raises
    ------
    DimensionMismatch
        Se ``a`` não for quadrada ou ``b.rows != a.rows``.
    NotPositiveDefinite
        Se algum pivô de Cholesky for ``<= 1e-14 * max(diag(a))``.

    Examples
    --------
    >>> x = solve_hpd(4 * np.eye(2), np.array([[4.0], [8.0]]))
    >>> x.real.ravel().tolist()
    [1.0, 2.0]
    """
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    if b.ndim == a.ndim - 1:
        b = b[..., None]
    if a.shape[-1] != a.shape[-2]:
        raise DimensionMismatch(f"System matrix must be square, got {a.shape[-2:]}.")
    if b.shape[-2] != a.shape[-1]:
        raise DimensionMismatch(f"Right-hand side has {b.shape[-2]} rows, expected {a.shape[-1]}.")
    if a.ndim == 2:
        return _cholesky_solve(a, b)
    batch_shape = np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    a_stack = np.broadcast_to(a, batch_shape + a.shape[-2:]).reshape(-1, *a.shape[-2:])
    b_stack = np.broadcast_to(b, batch_shape + b.shape[-2:]).reshape(-1, *b.shape[-2:])
    out = np.empty(b_stack.shape, dtype=np.complex128)
    for n in range(a_stack.shape[0]):
        out[n] = _cholesky_solve(a_stack[n], b_stack[n])
    return out.reshape(batch_shape + b.shape[-2:])


def pseudo_inverse(h: ComplexMatrix) -> ComplexMatrix:
    """
    Pseudo-inversa ``(HᴴH)⁻¹Hᴴ`` de uma matriz alta de posto coluna completo.

    Raises
    ------
    DimensionMismatch
        Se ``h`` tiver mais colunas que linhas.
    RankDeficient
        Se ``HᴴH`` não for positiva definida.

    Examples
    --------
    >>> pseudo_inverse(np.array([[2.0]])).real.tolist()
    [[0.5]]
    """
    h = np.asarray(h, dtype=np.complex128)
    if h.shape[-2] < h.shape[-1]:
        raise DimensionMismatch(f"Pseudo-inverse needs a tall matrix, got {h.shape[-2:]}.")
    hh = hermitian(h)
    try:
        return solve_hpd(hh @ h, hh)
    except NotPositiveDefinite as e:
        raise RankDeficient(f"Channel matrix is rank deficient: {e}") from e


def qr_decompose(h: RealMatrix) -> tuple[RealMatrix, RealMatrix]:
    """
    QR reduzida de uma matriz real alta, com diagonal de R não negativa.

    Parameters
    ----------
    h : RealMatrix
        Matriz ``m x n`` (ou pilha), ``m >= n``.

    Returns
    -------
    tuple[RealMatrix, RealMatrix]
        ``Q`` (``m x n``, colunas ortonormais) e ``R`` (``n x n``, triangular superior).

    Raises
    ------
    DimensionMismatch
        Se ``m < n``.
    RankDeficient
        Se algum ``R[i, i] < 1e-12 * ‖h‖_F``.

    Examples
    --------
    >>> q, r = qr_decompose(np.diag([3.0, 4.0]))
    >>> bool(np.allclose(r, np.diag([3.0, 4.0])))
    True
    """
    h = np.asarray(h, dtype=np.float64)
    if h.shape[-2] < h.shape[-1]:
        raise DimensionMismatch(f"QR needs a tall matrix, got {h.shape[-2:]}.")
    q, r = np.linalg.qr(h, mode="reduced")
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    signs = np.where(diag < 0.0, -1.0, 1.0)
    q = q * signs[..., None, :]
    r = r * signs[..., :, None]
    norms = np.linalg.norm(h, axis=(-2, -1))
    if np.any(np.abs(diag) < QR_RANK_TOLERANCE * norms[..., None]):
        raise RankDeficient("Real-expanded channel is rank deficient (tiny R diagonal).")
    return q, r


def pivoted_qr(h: RealMatrix) -> tuple[RealMatrix, RealMatrix, np.ndarray]:
    """
    QR com pivoteamento de colunas: ``h[..., perm] = Q R`` com diagonal de R decrescente.

    Gram-Schmidt modificado em lote; no passo ``k`` entra a coluna restante de maior norma
    residual, o que torna ``R[0, 0] >= R[1, 1] >= ... >= 0``.

    Parameters
    ----------
    h : RealMatrix
        Pilha ``(B, m, n)`` com ``m >= n``.

    Returns
    -------
    tuple[RealMatrix, RealMatrix, np.ndarray]
        ``Q (B, m, n)``, ``R (B, n, n)`` e ``perm (B, n)``, onde ``perm[b, k]`` é a coluna
        original na posição ``k``.

    Raises
    ------
    DimensionMismatch
        Se ``m < n``.
    RankDeficient
        Se algum ``R[k, k] < 1e-12 * ‖h‖_F``.

    Examples
    --------
    >>> q, r, perm = pivoted_qr(np.diag([1.0, 3.0, 2.0])[None])
    >>> perm.tolist(), np.diagonal(r[0]).tolist()
    ([[1, 2, 0]], [3.0, 2.0, 1.0])
    """
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 3 or h.shape[-2] < h.shape[-1]:
        raise DimensionMismatch(f"Pivoted QR needs a stack of tall matrices, got {h.shape}.")
    batch, m, n = h.shape
    work = h.copy()
    q = np.zeros((batch, m, n))
    r = np.zeros((batch, n, n))
    perm = np.tile(np.arange(n), (batch, 1))
    rows = np.arange(batch)
    floor = QR_RANK_TOLERANCE * np.linalg.norm(h, axis=(-2, -1))
    for k in range(n):
        pivot = k + np.argmax(np.sum(work[:, :, k:] ** 2, axis=1), axis=1)
        swap = np.tile(np.arange(n), (batch, 1))
        swap[rows, k] = pivot
        swap[rows, pivot] = k
        work = np.take_along_axis(work, swap[:, None, :], axis=2)
        r = np.take_along_axis(r, swap[:, None, :], axis=2)
        perm = np.take_along_axis(perm, swap, axis=1)

        norm = np.linalg.norm(work[:, :, k], axis=1)
        if np.any(norm < floor):
            raise RankDeficient("Real-expanded channel is rank deficient (tiny R diagonal).")
        q[:, :, k] = work[:, :, k] / norm[:, None]
        r[:, k, k] = norm
        r[:, k, k + 1 :] = np.einsum("bm,bmj->bj", q[:, :, k], work[:, :, k + 1 :])
        work[:, :, k + 1 :] -= q[:, :, k, None] * r[:, k, None, k + 1 :]
    return q, r, perm


def real_expansion(h: ComplexMatrix) -> RealMatrix:
    """
    Expansão real ``[[Re, -Im], [Im, Re]]`` (também para pilhas).

    Examples
    --------
    >>> real_expansion(np.array([[1 + 2j]])).tolist()
    [[1.0, -2.0], [2.0, 1.0]]
    """
    h = np.asarray(h, dtype=np.complex128)
    top = np.concatenate([h.real, -h.imag], axis=-1)
    bottom = np.concatenate([h.imag, h.real], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


def real_vector(v: np.ndarray) -> np.ndarray:
    """Empilha ``[Re(v); Im(v)]`` ao longo do último eixo."""
    v = np.asarray(v, dtype=np.complex128)
    return np.concatenate([v.real, v.imag], axis=-1)
