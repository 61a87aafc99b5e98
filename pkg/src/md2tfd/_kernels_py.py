"""Pure-numpy reference kernels; the compiled ``_ckernels`` module mirrors
these signatures exactly.

Index convention: for pair arrays X[j, i], j labels the bra and i the ket.
"""
import numpy as np


def pair_sums(Z, w, c):
    """Return (Q, E, y) with Q[j,i] = sum_n z*_jn z_in,
    E[j,i] = sum_n w_n z*_jn z_in and y[i] = sum_n c_n z_in."""
    Zc = Z.conj()
    Q = Zc @ Z.T
    E = (Zc * w) @ Z.T
    y = Z @ c
    return Q, E, y


def pair_sums_sq(Z, w, c):
    """Second-moment sums for <H^2>: (E2, u) with
    E2[j,i] = sum_n w_n^2 z*_jn z_in and u[i] = sum_n w_n c_n z_in."""
    E2 = (Z.conj() * (w * w)) @ Z.T
    u = Z @ (w * c)
    return E2, u


def reduced_matrix(S, W, Q, A, B, eps):
    """Matrix of the (M^2 + 2M) reduced system in unknowns
    [q (row-major, q[l, j]), alpha_dot, beta_dot]."""
    M = S.shape[0]
    n = M * M + 2 * M
    G = np.zeros((n, n), dtype=complex)
    Weps = W + eps * np.eye(M)
    qq = np.zeros((M, M, M, M), dtype=complex)  # [l, k, l', j]
    # sum_j Weps[k, j] q[l, j]
    for l in range(M):
        qq[l, :, l, :] += Weps
    # sum_j Q[l, j] W[k, j] q[k, j]
    for k in range(M):
        qq[:, k, k, :] += Q * W[k][None, :]
    G[: M * M, : M * M] = qq.reshape(M * M, M * M)
    # conj(A_k) sum_j Q[l, j] S[k, j] alpha_j  (and B)
    QS = Q[:, None, :] * S[None, :, :]  # [l, k, j]
    G[: M * M, M * M: M * M + M] = (QS * A.conj()[None, :, None]).reshape(M * M, M)
    G[: M * M, M * M + M:] = (QS * B.conj()[None, :, None]).reshape(M * M, M)
    # amplitude rows: sum_i S[j,i] (alpha_i + A_i q[j,i]) + eps alpha_j
    off = M * M
    G[off: off + M, off: off + M] = S + eps * np.eye(M)
    G[off + M:, off + M:] = S + eps * np.eye(M)
    for j in range(M):
        G[off + j, j * M: (j + 1) * M] = S[j] * A
        G[off + M + j, j * M: (j + 1) * M] = S[j] * B
    return G
