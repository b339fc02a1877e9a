"""Weyl symbol calculus on a :class:`~moyalrel.phasegrid.PhaseGrid`.

Star product, Moyal and anti-Moyal brackets, the bridge between symbols and
truncated operator matrices, and the star square root.

The star product uses the convention

    A * B = A exp{(i hbar / 2)(<d_q d_p> - <d_p d_q>)} B,

so that q * p = q p + i hbar / 2.
"""
from __future__ import annotations

import math
from math import comb, factorial

import numpy as np

from .phasegrid import GridField, MomentumLine, PhaseGrid, from_mixed, half_grid, to_mixed, _fourier

__all__ = [
    "Symbol",
    "OperatorMatrix",
    "star",
    "moyal_bracket",
    "anti_moyal_bracket",
    "poisson_bracket",
    "star_sqrt",
    "weyl_symbol",
    "weyl_quantize",
    "FockBasis",
    "fock_basis",
    "fock_ladder",
    "StarSqrtError",
    "GENERIC_STAR_MAX_N",
    "ANTI_BRACKET_SIGN",
]

# Generic-path cost guard; callers may pass allow_large=True.
GENERIC_STAR_MAX_N = 128
# Sign of the anti-Moyal bracket (1/i hbar)(A*B + B*A). Flip here to change convention.
ANTI_BRACKET_SIGN = 1.0
# Polynomial fast paths apply up to this total degree.
MAX_SERIES_DEGREE = 4


class StarSqrtError(RuntimeError):
    """Star square-root iteration did not converge."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


# --- polynomial helpers -----------------------------------------------------
# Coefficient arrays c[i, j] multiply q**i * p**j.


def _poly_degree(c) -> int:
    idx = np.argwhere(np.asarray(c) != 0)
    return int(idx.sum(axis=1).max()) if len(idx) else 0


def _poly_eval(c, grid):
    P, Q = grid.mesh()
    out = np.zeros_like(P, dtype=complex)
    for (i, j), v in np.ndenumerate(c):
        if v != 0:
            out += v * Q**i * P**j
    return out


def _poly_deriv(c, nq, np_):
    c = np.asarray(c, dtype=complex)
    for _ in range(nq):
        if c.shape[0] <= 1:
            return np.zeros((1, 1), complex)
        c = c[1:, :] * np.arange(1, c.shape[0])[:, None]
    for _ in range(np_):
        if c.shape[1] <= 1:
            return np.zeros((1, 1), complex)
        c = c[:, 1:] * np.arange(1, c.shape[1])[None, :]
    return c


def _poly_mul(a, b):
    out = np.zeros((a.shape[0] + b.shape[0] - 1, a.shape[1] + b.shape[1] - 1), complex)
    for (i, j), v in np.ndenumerate(a):
        if v != 0:
            out[i : i + b.shape[0], j : j + b.shape[1]] += v * b
    return out


def _poly_add(a, b):
    out = np.zeros((max(a.shape[0], b.shape[0]), max(a.shape[1], b.shape[1])), complex)
    out[: a.shape[0], : a.shape[1]] += a
    out[: b.shape[0], : b.shape[1]] += b
    return out


# --- symbols ----------------------------------------------------------------


class Symbol(GridField):
    """Phase-space function (Weyl symbol) sampled on a grid.

    Besides the samples a symbol may carry an exact description that the fast
    paths of :func:`star` exploit:

    ``poly``
        coefficient array ``c[i, j]`` of ``sum c[i, j] q**i p**j``;
    ``p_func``
        a vectorised callable for symbols that depend on momentum only, used to
        evaluate the symbol between lattice points.
    """

    def __init__(self, grid, values, parity=None, poly=None, p_func=None):
        super().__init__(grid, values)
        if parity not in (None, "even", "odd"):
            raise ValueError(f"parity must be 'even', 'odd' or None, got {parity!r}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("symbol values must be finite")
        self.parity = parity
        self.poly = None if poly is None else np.asarray(poly, dtype=complex)
        self.p_func = p_func

    @classmethod
    def from_polynomial(cls, grid, coeffs, parity=None):
        """Symbol from a coefficient array or a ``{(i, j): c}`` mapping for q**i p**j."""
        if isinstance(coeffs, dict):
            deg_q = max(i for i, _ in coeffs) + 1
            deg_p = max(j for _, j in coeffs) + 1
            arr = np.zeros((deg_q, deg_p), complex)
            for (i, j), v in coeffs.items():
                arr[i, j] += v
            coeffs = arr
        coeffs = np.asarray(coeffs, dtype=complex)
        return cls(grid, _poly_eval(coeffs, grid), parity=parity, poly=coeffs)

    @classmethod
    def from_p_function(cls, grid, func, parity=None):
        values = np.broadcast_to(np.asarray(func(grid.p), dtype=complex)[:, None], (grid.n, grid.n))
        return cls(grid, values.copy(), parity=parity, p_func=func)

    @classmethod
    def constant(cls, grid, value):
        return cls.from_polynomial(grid, np.array([[value]], dtype=complex))

    @classmethod
    def from_field(cls, field, parity=None):
        return cls(field.grid, field.values, parity=parity)

    @property
    def degree(self):
        return None if self.poly is None else _poly_degree(self.poly)

    def is_p_only(self) -> bool:
        if self.p_func is not None:
            return True
        if self.poly is not None:
            return not np.any(self.poly[1:, :])
        v = self.values
        scale = np.max(np.abs(v))
        return bool(np.max(np.abs(v - v[:, :1])) <= 1e-14 * scale) if scale else True

    def is_constant(self) -> bool:
        if self.poly is not None:
            c = self.poly.copy()
            c[0, 0] = 0
            return not np.any(c)
        v = self.values
        return bool(np.all(v == v.flat[0]))

    def p_profile_half(self) -> np.ndarray:
        """Momentum profile on the half-step lattice (exact when ``p_func`` is known)."""
        if self.p_func is not None:
            return np.asarray(self.p_func(self.grid.p_half), dtype=complex)
        if self.poly is not None:
            ph = self.grid.p_half
            return sum(self.poly[0, j] * ph**j for j in range(self.poly.shape[1]))
        return half_grid(self.values[:, 0])

    def p_profile_at(self, momenta) -> np.ndarray:
        """Evaluate a p-only symbol at arbitrary (literal) momenta.

        Sampled profiles without an exact form fall back to the periodic
        interpolant on the half lattice, which requires lattice momenta.
        """
        momenta = np.asarray(momenta)
        if self.p_func is not None:
            return np.asarray(self.p_func(momenta), dtype=complex)
        if self.poly is not None:
            return sum(self.poly[0, j] * momenta**j for j in range(self.poly.shape[1]))
        g = self.grid
        idx = np.rint((momenta - g.p_min) / (0.5 * g.dp)).astype(int) % (2 * g.n)
        return self.p_profile_half()[idx]

    def conj(self):
        return Symbol(
            self.grid,
            np.conj(self.values),
            self.parity,
            None if self.poly is None else np.conj(self.poly),
            None if self.p_func is None else (lambda p, f=self.p_func: np.conj(f(p))),
        )

    def _combine(self, other, op):
        if isinstance(other, Symbol):
            self._check(other)
            poly = None
            if self.poly is not None and other.poly is not None:
                b = other.poly if op is np.add else -other.poly
                poly = _poly_add(self.poly, b)
            p_func = None
            if self.p_func is not None and other.p_func is not None:
                f, g = self.p_func, other.p_func
                p_func = lambda p: op(f(p), g(p))  # noqa: E731
            return Symbol(self.grid, op(self.values, other.values), None, poly, p_func)
        return NotImplemented

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, scalar):
        if isinstance(scalar, Symbol):
            raise TypeError("use star() or pointwise() for symbol products")
        f = self.p_func
        return Symbol(
            self.grid,
            self.values * scalar,
            self.parity,
            None if self.poly is None else self.poly * scalar,
            None if f is None else (lambda p: f(p) * scalar),
        )

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0


class OperatorMatrix:
    """Truncated matrix of an operator in a named basis."""

    def __init__(self, entries, basis="fock"):
        entries = np.asarray(entries, dtype=complex)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValueError("operator matrix must be square")
        if not np.all(np.isfinite(entries)):
            raise ValueError("operator entries must be finite")
        self.entries = entries
        self.basis = basis

    @property
    def dim(self):
        return self.entries.shape[0]

    def is_hermitian(self, atol=1e-12):
        return bool(np.max(np.abs(self.entries - self.entries.conj().T)) <= atol)

    def __matmul__(self, other):
        return OperatorMatrix(self.entries @ other.entries, self.basis)

    def __repr__(self):
        return f"OperatorMatrix(dim={self.dim}, basis={self.basis!r})"


# --- spectral helpers -------------------------------------------------------


def _q_modes(values, grid):
    """Coefficients a(p, mu) with A(p, q_j) = sum_mu a(p, mu) exp(i mu dp q_j / hbar)."""
    return _fourier(values, 1, grid.q_min, grid.dq, grid.P[0], grid.dp, grid.hbar, -1) / grid.n


def _from_q_modes(modes, grid):
    return _fourier(modes, 1, grid.P[0], grid.dp, grid.q_min, grid.dq, grid.hbar, +1)


def _spectral_deriv(values, grid, nq, np_):
    out = np.asarray(values, dtype=complex)
    n = grid.n
    if nq:
        k = 2 * np.pi * np.fft.fftfreq(n, d=grid.dq)
        if nq % 2:
            k[n // 2] = 0.0
        out = np.fft.ifft(np.fft.fft(out, axis=1) * ((1j * k) ** nq)[None, :], axis=1)
    if np_:
        k = 2 * np.pi * np.fft.fftfreq(n, d=grid.dp)
        if np_ % 2:
            k[n // 2] = 0.0
        out = np.fft.ifft(np.fft.fft(out, axis=0) * ((1j * k) ** np_)[:, None], axis=0)
    return out


def _derivative(sym, nq, np_):
    if sym.poly is not None:
        c = _poly_deriv(sym.poly, nq, np_)
        return _poly_eval(c, sym.grid)
    return _spectral_deriv(sym.values, sym.grid, nq, np_)


# --- star product -----------------------------------------------------------


def _star_poly(a, b):
    hbar = a.grid.hbar
    deg = min(_poly_degree(a.poly), _poly_degree(b.poly))
    out = np.zeros((1, 1), complex)
    for order in range(deg + 1):
        pref = (0.5j * hbar) ** order / factorial(order)
        for k in range(order + 1):
            da = _poly_deriv(a.poly, order - k, k)
            db = _poly_deriv(b.poly, k, order - k)
            out = _poly_add(out, pref * comb(order, k) * (-1) ** k * _poly_mul(da, db))
    return out


def _star_series(a, b):
    """Terminating Moyal series; one factor is a polynomial of low degree."""
    hbar = a.grid.hbar
    deg = min(d for d in (a.degree, b.degree) if d is not None)
    out = np.zeros_like(a.values)
    for order in range(deg + 1):
        pref = (0.5j * hbar) ** order / factorial(order)
        for k in range(order + 1):
            da = _derivative(a, order - k, k)
            db = _derivative(b, k, order - k)
            out = out + pref * comb(order, k) * (-1) ** k * da * db
    return out


def _star_p_only_left(a, b):
    # (A * B)(p, mode mu) = A(p + mu dp / 2) b(p, mu)
    g = a.grid
    plus_idx, _ = g.pair_indices()  # 2k + s
    prof = a.p_profile_half()
    modes = _q_modes(b.values, g) * prof[plus_idx]
    return _from_q_modes(modes, g)


def _star_p_only_right(a, b):
    # (A * B)(p, mode mu) = a(p, mu) B(p - mu dp / 2)
    g = a.grid
    _, minus_idx = g.pair_indices()  # 2k - s
    prof = b.p_profile_half()
    modes = _q_modes(a.values, g) * prof[minus_idx]
    return _from_q_modes(modes, g)


def _star_generic(a, b):
    """Twisted product in the (p, q-mode) representation.

    For q-modes mu1, mu2 the product of e^{i k1 q} a(p) and e^{i k2 q} b(p) is
    e^{i (k1 + k2) q} a(p + hbar k2 / 2) b(p - hbar k1 / 2); hbar k / 2 is an
    integer multiple of dp / 2, so both shifts land on the half-step lattice.
    Mode sums beyond the band fold back exactly when sampled on the lattice.
    """
    g = a.grid
    n = g.n
    two_n = 2 * n
    ah = half_grid(_q_modes(a.values, g), axis=0)  # (2n, n)
    bh = half_grid(_q_modes(b.values, g), axis=0)
    mu = g.shift_index
    k2 = 2 * np.arange(n)
    gather_a = (k2[:, None] + mu[None, :]) % two_n  # index 2k + mu2
    out = np.zeros((n, n), complex)
    for i1, mu1 in enumerate(mu):
        term = ah[gather_a, i1] * bh[(k2 - mu1) % two_n, :]
        out += np.roll(term, mu1, axis=1)
    return _from_q_modes(out, g)


def _series_ok(sym):
    return sym.poly is not None and _poly_degree(sym.poly) <= MAX_SERIES_DEGREE


def star(a: Symbol, b: Symbol, allow_large=False) -> Symbol:
    """Moyal star product ``a * b``.

    Dispatch: both polynomial -> exact terminating series on coefficients;
    a momentum-only factor -> exact shift in the mixed representation; one
    low-degree polynomial -> terminating series with spectral derivatives;
    otherwise the generic twisted product (guarded at n > 128).
    """
    if not a.grid.compatible(b.grid):
        raise ValueError("grid mismatch")
    g = a.grid
    if a.poly is not None and b.poly is not None and (_series_ok(a) or _series_ok(b)):
        c = _star_poly(a, b)
        return Symbol(g, _poly_eval(c, g), poly=c)
    if a.is_constant() or b.is_constant():
        # Constant factors multiply pointwise.
        k, other, first = (a.values.flat[0], b, True) if a.is_constant() else (b.values.flat[0], a, False)
        res = other * k
        if first:
            return Symbol(g, k * other.values, poly=res.poly, p_func=res.p_func)
        return Symbol(g, other.values * k, poly=res.poly, p_func=res.p_func)
    if a.is_p_only() and b.is_p_only():
        p_func = None
        if a.p_func is not None and b.p_func is not None:
            fa, fb = a.p_func, b.p_func
            p_func = lambda p: fa(p) * fb(p)  # noqa: E731
        return Symbol(g, a.values * b.values, p_func=p_func)
    if a.is_p_only():
        return Symbol(g, _star_p_only_left(a, b))
    if b.is_p_only():
        return Symbol(g, _star_p_only_right(a, b))
    if _series_ok(a) or _series_ok(b):
        return Symbol(g, _star_series(a, b))
    if g.n > GENERIC_STAR_MAX_N and not allow_large:
        raise ValueError(
            f"generic star product refused for n={g.n} > {GENERIC_STAR_MAX_N}; pass allow_large=True"
        )
    return Symbol(g, _star_generic(a, b))


def moyal_bracket(a: Symbol, b: Symbol, allow_large=False) -> Symbol:
    """(1/i hbar)(a * b - b * a)."""
    if not a.grid.compatible(b.grid):
        raise ValueError("grid mismatch")
    g = a.grid
    hbar = g.hbar
    if _use_kernel(a, b):
        return Symbol(g, _p_only_bracket_kernel(a, b, -1.0))
    if _use_kernel(b, a):
        return Symbol(g, -_p_only_bracket_kernel(b, a, -1.0))
    ab = star(a, b, allow_large)
    ba = star(b, a, allow_large)
    return Symbol(g, (ab.values - ba.values) / (1j * hbar))


def anti_moyal_bracket(a: Symbol, b: Symbol, allow_large=False) -> Symbol:
    """(1/i hbar)(a * b + b * a), up to :data:`ANTI_BRACKET_SIGN`."""
    if not a.grid.compatible(b.grid):
        raise ValueError("grid mismatch")
    g = a.grid
    hbar = g.hbar
    if _use_kernel(a, b):
        return Symbol(g, ANTI_BRACKET_SIGN * _p_only_bracket_kernel(a, b, +1.0))
    if _use_kernel(b, a):
        return Symbol(g, ANTI_BRACKET_SIGN * _p_only_bracket_kernel(b, a, +1.0))
    ab = star(a, b, allow_large)
    ba = star(b, a, allow_large)
    return Symbol(g, ANTI_BRACKET_SIGN * (ab.values + ba.values) / (1j * hbar))


def _use_kernel(h, w):
    # Polynomial pairs go through the exact coefficient series instead.
    if h.poly is not None and w.poly is not None:
        return False
    return h.is_p_only() and not w.is_p_only()


def _p_only_bracket_kernel(h, w, sign):
    """(1/i hbar)[H(p - P/2) + sign * H(p + P/2)] applied to w in the mixed representation.

    ``p - P/2`` is the left (row) momentum of the two-momentum kernel and
    ``p + P/2`` the right one; H * W multiplies by H(left), W * H by H(right).
    """
    g = w.grid
    right, left = g.pair_momenta()
    G = to_mixed(w.values, g)
    rate = (h.p_profile_at(left) + sign * h.p_profile_at(right)) / (1j * g.hbar)
    return from_mixed(G * rate, g)


def mixed_rate(h: Symbol, kind: str) -> np.ndarray:
    """Mode-wise rate of the bracket generator for a momentum-only symbol ``h``.

    ``kind='moyal'`` gives (1/i hbar)[h(left) - h(right)], ``kind='anti'``
    (1/i hbar)[h(left) + h(right)] times :data:`ANTI_BRACKET_SIGN`.
    """
    g = h.grid
    right, left = g.pair_momenta()
    hl, hr = h.p_profile_at(left), h.p_profile_at(right)
    if kind == "moyal":
        return (hl - hr) / (1j * g.hbar)
    if kind == "anti":
        return ANTI_BRACKET_SIGN * (hl + hr) / (1j * g.hbar)
    raise ValueError(f"unknown bracket kind {kind!r}")


def poisson_bracket(a: Symbol, b: Symbol) -> Symbol:
    """Classical bracket d_q a d_p b - d_p a d_q b with spectral derivatives."""
    v = _derivative(a, 1, 0) * _derivative(b, 0, 1) - _derivative(a, 0, 1) * _derivative(b, 1, 0)
    return Symbol(a.grid, v)


# --- star square root -------------------------------------------------------


def star_sqrt(a: Symbol, tol=1e-10, max_iter=500, allow_large=False, return_info=False):
    """Star square root B with B * B = A.

    Starts from the pointwise root and runs the damped fixed point
    ``B <- B + alpha (A - B * B)`` with ``alpha = 1 / (2 max sqrt(A))``.
    Momentum-only and constant symbols return the pointwise root directly.
    """
    g = a.grid
    floor = g.units.rest_energy**2 * (1 - 1e-9)
    vals = a.values
    scale = float(np.max(np.abs(vals)))
    if np.max(np.abs(vals.imag)) > 1e-12 * max(scale, 1.0):
        raise ValueError("star_sqrt needs a real-valued symbol")
    if np.min(vals.real) < 0:
        raise ValueError("star_sqrt needs a non-negative symbol")
    if np.min(vals.real) < floor:
        raise ValueError(f"symbol dips below (m c^2)^2 = {floor:.6g} on the grid")
    root = np.sqrt(vals.real)
    if a.is_p_only():
        p_func = None
        if a.p_func is not None:
            f = a.p_func
            p_func = lambda p: np.sqrt(np.real(f(p)))  # noqa: E731
        elif a.poly is not None:
            c = a.poly
            p_func = lambda p: np.sqrt(np.real(sum(c[0, j] * p**j for j in range(c.shape[1]))))  # noqa: E731
        b = Symbol(g, root, p_func=p_func)
        info = {"iterations": 0, "residual": 0.0}
        return (b, info) if return_info else b
    alpha = 1.0 / (2.0 * float(np.max(root)))
    b = Symbol(g, root)
    history = []
    for it in range(max_iter + 1):
        sq = star(b, b, allow_large).values
        resid = vals - sq
        r = float(np.max(np.abs(resid)))
        history.append(r)
        if r <= tol * scale:
            info = {"iterations": it, "residual": r / scale, "history": history}
            return (b, info) if return_info else b
        if it == max_iter:
            break
        # B*B is real for real B; drop round-off imaginary parts.
        b = Symbol(g, b.values.real + alpha * resid.real)
    raise StarSqrtError(
        f"star_sqrt did not converge in {max_iter} steps (relative residual {history[-1] / scale:.3e})",
        history[-1] / scale,
    )


# --- operator bridge --------------------------------------------------------


class FockBasis(list):
    """Oscillator eigenfunctions on a grid, remembering the oscillator length."""

    def __init__(self, functions, grid, length):
        super().__init__(functions)
        self.grid = grid
        self.length = length

    def __getitem__(self, item):
        out = super().__getitem__(item)
        if isinstance(item, slice):
            return FockBasis(out, self.grid, self.length)
        return out


def fock_basis(grid: PhaseGrid, dim: int, length=None) -> FockBasis:
    """Harmonic-oscillator eigenfunctions in the momentum representation.

    ``length`` is the oscillator length (default sqrt(hbar)); the n-th function
    is (-i)**n times a Hermite function of width hbar / length.
    """
    hbar = grid.hbar
    length = math.sqrt(hbar) if length is None else float(length)
    x = grid.p * length / hbar
    scale = math.sqrt(length / hbar)
    out = []
    h_prev = np.zeros_like(x)
    h = np.pi**-0.25 * np.exp(-0.5 * x**2)
    for n in range(dim):
        out.append(MomentumLine(grid, (-1j) ** n * scale * h))
        h_next = math.sqrt(2.0 / (n + 1)) * x * h - math.sqrt(n / (n + 1)) * h_prev
        h_prev, h = h, h_next
    return FockBasis(out, grid, length)


def fock_ladder(dim: int):
    """Annihilation operator matrix a with a|n> = sqrt(n)|n-1>."""
    return np.diag(np.sqrt(np.arange(1, dim)), k=1).astype(complex)


def _basis_half(basis_functions):
    if not basis_functions:
        raise ValueError("empty basis")
    grid = basis_functions[0].grid
    for f in basis_functions:
        if not f.grid.compatible(grid):
            raise ValueError("basis functions live on different grids")
    return grid, np.stack([f.half_grid() for f in basis_functions], axis=1)


def weyl_symbol(op: OperatorMatrix, basis_functions) -> Symbol:
    """Weyl symbol of a truncated operator, sum_mn M_mn * symbol(|m><n|)."""
    grid, psi = _basis_half(basis_functions)
    if op.dim != psi.shape[1]:
        raise ValueError(f"operator dim {op.dim} does not match {psi.shape[1]} basis functions")
    if op.dim > 64:
        raise ValueError("weyl_symbol supports dim <= 64")
    right_idx, left_idx = grid.pair_indices()
    D = psi @ op.entries @ psi.conj().T  # D[left, right] = <left|M|right>
    G = 2 * math.pi * grid.hbar * D[left_idx, right_idx]
    return Symbol(grid, from_mixed(G, grid))


def _weyl_quantize_poly(coeffs, dim, hbar, length):
    """Exact Weyl-ordered matrix of a polynomial symbol in the first ``dim`` Fock states.

    Uses q^i p^j -> 2^-i sum_k C(i, k) q^k p^j q^(i-k) with ladder matrices in
    a basis padded by the degree, so the retained block is free of truncation.
    """
    deg = _poly_degree(coeffs)
    big = dim + max(deg, 1)
    a = fock_ladder(big)
    ad = a.conj().T
    qm = length * (a + ad) / math.sqrt(2.0)
    pm = 1j * hbar / length * (ad - a) / math.sqrt(2.0)
    qpow = [np.eye(big, dtype=complex)]
    ppow = [np.eye(big, dtype=complex)]
    for _ in range(deg):
        qpow.append(qpow[-1] @ qm)
        ppow.append(ppow[-1] @ pm)
    out = np.zeros((big, big), complex)
    for i in range(coeffs.shape[0]):
        for j in range(coeffs.shape[1]):
            c = coeffs[i, j]
            if c == 0:
                continue
            term = sum(comb(i, k) * (qpow[k] @ ppow[j] @ qpow[i - k]) for k in range(i + 1))
            out += c * term / 2**i
    return out[:dim, :dim]


def weyl_quantize(sym: Symbol, basis_functions) -> OperatorMatrix:
    """Matrix elements <m|A|n> = integral of A times the cross-Wigner kernel of (m, n).

    Polynomial symbols in a :class:`FockBasis` are quantized exactly by ladder
    algebra; lattice quadrature of a polynomial loses digits to its size at the
    grid edge.
    """
    grid, psi = _basis_half(basis_functions)
    if not sym.grid.compatible(grid):
        raise ValueError("grid mismatch")
    if psi.shape[1] > 64:
        raise ValueError("weyl_quantize supports dim <= 64")
    if sym.poly is not None and isinstance(basis_functions, FockBasis):
        entries = _weyl_quantize_poly(sym.poly, psi.shape[1], grid.hbar, basis_functions.length)
        return OperatorMatrix(entries)
    two_n = 2 * grid.n
    right_idx, left_idx = grid.pair_indices()
    # sum_q A exp(-i P q / hbar) dq pairs with the kernel at -P, i.e. swapped roles.
    At = _fourier(sym.values, 1, grid.q_min, grid.dq, grid.P[0], grid.dp, grid.hbar, -1) * grid.dq
    K = np.zeros((two_n, two_n), complex)
    K[right_idx, left_idx] = At * grid.dp**2 / (2 * math.pi * grid.hbar)
    return OperatorMatrix(psi.conj().T @ K @ psi)
