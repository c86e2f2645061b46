"""Independent exact-diagonalization reference for the 4-site Hubbard-Holstein
fixture (Jordan-Wigner fermions, scipy sparse Kronecker products).

H = -t sum_<ij>,s c+_is c_js + U/2 sum_(ij) (n_i - 1/2)(n_j - 1/2)
    + sum_i [w (b+_i b_i + 1/2) + sqrt(w/2) g n_i (b+_i + b_i)]
with nearest-neighbour ordered pairs (ij), open chain.
"""
import sys
import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh


def fermion_ops(n_modes):
    a = sp.csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]]))
    z = sp.csr_matrix(np.diag([1.0, -1.0]))
    eye = sp.identity(2, format="csr")
    ops = []
    for k in range(n_modes):
        m = sp.identity(1, format="csr")
        for j in range(n_modes):
            m = sp.kron(m, z if j < k else (a if j == k else eye), format="csr")
        ops.append(m)
    return ops


def main(n_sites=4, t=1.0, u=1.0, g=0.5, w=1.0, n_max=8, periodic=False):
    nso = 2 * n_sites
    c = fermion_ops(nso)
    num = [ci.T @ ci for ci in c]
    bonds = [(i, i + 1) for i in range(n_sites - 1)]
    if periodic and n_sites > 2:
        bonds.append((n_sites - 1, 0))
    dim_f = 2 ** nso
    h = sp.csr_matrix((dim_f, dim_f))
    for (i, j) in bonds:
        for s in range(2):
            a, b = i + s * n_sites, j + s * n_sites
            h = h - t * (c[a].T @ c[b] + c[b].T @ c[a])
    dens = [num[i] + num[i + n_sites] for i in range(n_sites)]
    half = 0.5 * sp.identity(dim_f, format="csr")
    for (i, j) in bonds:
        for (p, q) in [(i, j), (j, i)]:
            h = h + 0.5 * u * (dens[p] - half) @ (dens[q] - half)
    # project on the (n_up, n_dn) = (N/2, N/2) sector
    n_up = sum(num[k] for k in range(n_sites)).diagonal()
    n_dn = sum(num[k + n_sites] for k in range(n_sites)).diagonal()
    keep = np.where((n_up == n_sites // 2) & (n_dn == n_sites // 2))[0]
    P = sp.identity(dim_f, format="csr")[keep]
    he = P @ h @ P.T
    ne = len(keep)
    d = n_max + 1
    b = sp.diags(np.sqrt(np.arange(1, d)), 1, format="csr")
    nb = d ** n_sites
    def mode_op(op, k):
        m = sp.identity(1, format="csr")
        for j in range(n_sites):
            m = sp.kron(m, op if j == k else sp.identity(d, format="csr"), format="csr")
        return m
    H = sp.kron(he, sp.identity(nb), format="csr")
    for k in range(n_sites):
        H = H + sp.kron(sp.identity(ne), w * mode_op(b.T @ b + 0.5 * sp.identity(d), k), format="csr")
        H = H + np.sqrt(w / 2) * g * sp.kron(P @ dens[k] @ P.T, mode_op(b + b.T, k), format="csr")
    e = eigsh(H, k=1, which="SA", tol=1e-13)[0][0]
    print(repr(e))


if __name__ == "__main__":
    args = [float(x) for x in sys.argv[1:]]
    main(*args) if args else main()
