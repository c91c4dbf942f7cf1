"""Shared independent oracles for the test suite.

These deliberately avoid the library's own code paths: position-space
quadrature for the three-body kernel, dense tensor embeddings for partial
traces, and brute-force summation for spectral quantities.
"""

import itertools
import math

import numpy as np
import pytest


def box_periodized(x, eps, a=0.5):
    """Periodized box kernel, evaluated directly from its definition."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for m in range(-2, 3):
        y = (x + m) / eps
        out += (np.abs(y) <= a) / (2.0 * a * eps)
    return out


def three_body_entry_quadrature(basis, vi, vj, eps, a=0.5, n_gl=24, n_c=16):
    """<v_i| W |v_j> by position-space quadrature with the coordinates
    changed so the kernel support is resolved exactly.

    For each of the three kernel terms, the 'center' coordinate is
    integrated on a uniform grid (exact for trig polynomials) and the two
    difference coordinates on Gauss-Legendre nodes inside the kernel
    support, where the box kernel is constant.
    """
    modes = list(range(-basis.k_max, basis.k_max + 1))

    def sym_state(occ, X, Y, Z):
        ks = []
        for k, m in zip(modes, occ):
            ks += [k] * int(m)
        psi = np.zeros(np.broadcast(X, Y, Z).shape, dtype=complex)
        for p in set(itertools.permutations(ks)):
            psi += np.exp(2j * np.pi * (p[0] * X + p[1] * Y + p[2] * Z))
        norm = np.prod([math.factorial(int(m)) for m in occ])
        return norm / math.sqrt(math.factorial(3) * norm) * psi

    gl_x, gl_w = np.polynomial.legendre.leggauss(n_gl)
    s_nodes = gl_x * (eps * a)
    s_w = gl_w * (eps * a)
    c_nodes = np.arange(n_c) / n_c
    S, T, C = np.meshgrid(s_nodes, s_nodes, c_nodes, indexing="ij")
    WS = (s_w[:, None, None] * s_w[None, :, None] / n_c) / (2.0 * a * eps) ** 2

    def term(Xs, Ys, Zs):
        return np.sum(WS * np.conj(sym_state(vi, Xs, Ys, Zs)) * sym_state(vj, Xs, Ys, Zs))

    tot = term(C, C - S, C - T) + term(C - S, C, C - T) + term(C - S, C - T, C)
    return tot / 3.0


def embed_symmetric(basis, coeffs):
    """Dense tensor embedding of a sector-n coefficient vector into
    (C^J)^{tensor n}."""
    J = basis.J
    n = basis.n
    modes = range(J)
    dense = np.zeros((J,) * n, dtype=complex)
    for c, occ in zip(coeffs, basis.occupations):
        ks = []
        for pos, m in zip(modes, occ):
            ks += [pos] * int(m)
        perms = set(itertools.permutations(ks))
        amp = c / math.sqrt(math.factorial(n) * np.prod([math.factorial(int(m)) for m in occ]))
        amp *= np.prod([math.factorial(int(m)) for m in occ])
        for p in perms:
            dense[p] += amp
    return dense


def partial_trace_first(dense, keep=1):
    """Trace out all but the first `keep` legs of |psi><psi| built from a
    dense symmetric tensor."""
    n = dense.ndim
    J = dense.shape[0]
    psi = dense.reshape(J**keep, J ** (n - keep))
    return psi @ psi.conj().T


@pytest.fixture()
def rng():
    # function-scoped: every test sees the same fresh deterministic stream
    return np.random.default_rng(20260810)
