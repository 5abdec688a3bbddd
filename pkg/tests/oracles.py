"""Independent reference implementations used as test oracles.

Nothing here imports the package: each function recomputes a quantity by
a different route (explicit loops, scipy's expm, closed forms).
"""

from __future__ import annotations

import itertools
import math

import numpy as np
import scipy.linalg

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
I2 = np.eye(2, dtype=complex)


def random_hermitian(rng, d, scale=1.0):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * (a + a.conj().T) / 2


def random_unitary(rng, d):
    q, r = np.linalg.qr(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_state(rng, d):
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def kron_all(*mats):
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def ptrace_loops(rho, dims, keep):
    """Partial trace by explicit summation over multi-indices."""
    dims = list(dims)
    keep = sorted(keep)
    drop = [i for i in range(len(dims)) if i not in keep]
    kd = [dims[i] for i in keep]
    out = np.zeros((math.prod(kd), math.prod(kd)), dtype=complex)

    def flat(idx):
        return int(np.ravel_multi_index(idx, dims))

    for a in itertools.product(*(range(d) for d in kd)):
        for b in itertools.product(*(range(d) for d in kd)):
            total = 0j
            for e in itertools.product(*(range(dims[i]) for i in drop)):
                ia = [0] * len(dims)
                ib = [0] * len(dims)
                for pos, k in enumerate(keep):
                    ia[k], ib[k] = a[pos], b[pos]
                for pos, k in enumerate(drop):
                    ia[k] = ib[k] = e[pos]
                total += rho[flat(ia), flat(ib)]
            out[np.ravel_multi_index(a, kd), np.ravel_multi_index(b, kd)] = total
    return out


def expm_unitary(h, t):
    return scipy.linalg.expm(-1j * t * np.asarray(h))


def spin_bath_dense(g, w, delta=0.0, axis="z", lam=1.0):
    """Pointer qubit + bath from explicit Pauli Kronecker products."""
    n = len(g)
    s_axis = {"x": SX, "z": SZ}[axis]

    def site(op, k):  # op on site k of n+1 qubits (pointer is site 0)
        return kron_all(*[op if j == k else I2 for j in range(n + 1)])

    h = 0.5 * delta * site(s_axis, 0)
    for k in range(n):
        h = h + 0.5 * w[k] * site(SZ, k + 1)
        h = h + lam * g[k] * site(SZ, 0) @ site(SZ, k + 1)
    return h


def analytic_r01(g, t, lam=1.0):
    """Dephasing factor for a uniform bath state: prod_k cos(2 lam g_k t)."""
    t = np.asarray(t, dtype=float)
    return np.prod(np.cos(2 * lam * np.outer(t, g)), axis=1)


def schmidt_coefficients(psi, d_left):
    return np.linalg.svd(np.asarray(psi).reshape(d_left, -1), compute_uv=False)


def trace_distance(a, b):
    return 0.5 * np.sum(np.linalg.svd(a - b, compute_uv=False))


def in_polynomial_span(p, h, rtol=1e-7):
    """Whether ``p`` is a polynomial in ``h``, i.e. a function of ``h``'s eigenvalues.

    Least-squares fit of vec(p) onto vec(h^k), k < dim, with ``h`` rescaled
    to unit norm so the Vandermonde-like system is well conditioned.
    """
    d = h.shape[0]
    hn = h / max(np.linalg.norm(h, 2), 1e-300)
    powers = [np.eye(d, dtype=complex)]
    for _ in range(d - 1):
        powers.append(powers[-1] @ hn)
    a = np.stack([m.reshape(-1) for m in powers], axis=1)
    coef, *_ = np.linalg.lstsq(a, p.reshape(-1), rcond=1e-10)
    resid = np.linalg.norm(a @ coef - p.reshape(-1))
    return resid <= rtol * max(1.0, np.linalg.norm(p))
