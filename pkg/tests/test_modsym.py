"""Tests for modular symbol spaces and geometric operators.

Oracles used here are independent of the implementation:
- the genus and cusp-count formulas for X_0(n),
- eta-product q-expansions for the weight-2 newforms at genus-one levels.
"""

from fractions import Fraction
from math import gcd

import pytest

from maninforge.exact_linalg import IntMatrix, kernel_saturated
from maninforge.modsym import (
    atkin_lehner,
    build_space,
    degeneracy,
    degeneracy_pullback,
    hecke,
    hecke_tn,
    is_squarefree,
    new_lattice,
    p1_list,
    star_involution,
)
from maninforge.polyarith import charpoly_int


# --- oracles ---------------------------------------------------------------


def factorization(n):
    out = {}
    d = 2
    while d * d <= n:
        while n % d == 0:
            out[d] = out.get(d, 0) + 1
            n //= d
        d += 1
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def psi(n):
    """Index of Gamma_0(n): n * prod_{p | n} (1 + 1/p)."""
    r = n
    for p in factorization(n):
        r = r // p * (p + 1)
    return r


def euler_phi(n):
    r = n
    for p in factorization(n):
        r = r // p * (p - 1)
    return r


def cusp_count(n):
    return sum(
        euler_phi(gcd(d, n // d)) for d in range(1, n + 1) if n % d == 0
    )


def genus_x0(n):
    fac = factorization(n)
    if n % 4 == 0:
        nu2 = 0
    else:
        nu2 = 1
        for p in fac:
            if p == 2:
                continue
            if p % 4 == 3:
                nu2 = 0
                break
            nu2 *= 2
    if n % 9 == 0:
        nu3 = 0
    else:
        nu3 = 1
        for p in fac:
            if p == 3:
                continue
            if p % 3 == 2:
                nu3 = 0
                break
            nu3 *= 2
    g = Fraction(1) + Fraction(psi(n), 12) - Fraction(nu2, 4) - Fraction(nu3, 3) \
        - Fraction(cusp_count(n), 2)
    assert g.denominator == 1
    return int(g)


def eta_product(pairs, terms):
    """q-expansion coefficients a_1..a_terms of prod eta(q^d)^e, weight 2.

    Each eta(q^d)^e contributes q^(d*e/24) * prod (1 - q^(d*k))^e; the pairs
    used here always give total leading exponent 1.
    """
    shift = sum(d * e for d, e in pairs)
    assert shift % 24 == 0
    shift //= 24
    size = terms + 1
    coeffs = [0] * size
    coeffs[0] = 1
    for d, e in pairs:
        for _ in range(e):
            new = [0] * size
            # (1 - q^d - q^{2d} ... ) use pentagonal number theorem for eta/q^{1/24}
            pent = [0] * size
            j = 0
            while True:
                for sign_j in ([j] if j == 0 else [j, -j]):
                    exp = d * (sign_j * (3 * sign_j - 1)) // 2
                    if 0 <= exp < size:
                        pent[exp] += (-1) ** abs(sign_j)
                if d * (j * (3 * j - 1)) // 2 >= size and \
                        d * (j * (3 * j + 1)) // 2 >= size:
                    break
                j += 1
            for i, a in enumerate(coeffs):
                if a:
                    for k in range(size - i):
                        if pent[k]:
                            new[i + k] += a * pent[k]
            coeffs = new
    # multiply by q^shift and read a_1..a_terms
    out = [0] * (terms + 1)
    for i, a in enumerate(coeffs):
        if 1 <= i + shift <= terms:
            out[i + shift] = a
    return out


ETA_NEWFORMS = {
    11: [(1, 2), (11, 2)],
    14: [(1, 1), (2, 1), (7, 1), (14, 1)],
    15: [(1, 1), (3, 1), (5, 1), (15, 1)],
    20: [(2, 2), (10, 2)],
}


def test_eta_oracle_self_check():
    # well-known expansion of level 11: q - 2q^2 - q^3 + 2q^4 + q^5 + ...
    a = eta_product(ETA_NEWFORMS[11], 10)
    assert a[1:8] == [1, -2, -1, 2, 1, 2, -2]


# --- P^1 and space construction -------------------------------------------


@pytest.mark.parametrize("n", [1, 2, 3, 4, 6, 8, 11, 12, 15, 24, 30, 49])
def test_p1_size(n):
    assert len(p1_list(n)) == (1 if n == 1 else psi(n))


def test_p1_normalization_is_orbit_invariant():
    from maninforge.modsym import P1

    for n in [12, 15, 35]:
        p1 = P1(n)
        for c, d in p1.points:
            for u in range(1, n):
                if gcd(u, n) == 1:
                    assert p1.normalize(c * u, d * u) == (c, d)


@pytest.mark.parametrize("n", list(range(1, 73)))
def test_space_matches_genus_and_cusp_formulas(n):
    sp = build_space(n)
    assert sp.cusp_count == cusp_count(n)
    assert sp.cuspidal_rank == 2 * genus_x0(n)


# --- Hecke operators against eta-product eigenvalues ------------------------


@pytest.mark.parametrize("n", [11, 14, 15])
def test_hecke_eigenvalues_genus_one(n):
    sp = build_space(n)
    assert sp.cuspidal_rank == 2
    a = eta_product(ETA_NEWFORMS[n], 13)
    for ell in [2, 3, 5, 7, 13]:
        t = hecke(sp, ell).matrix
        cp = charpoly_int(t)
        # (x - a_ell)^2
        assert cp.coeffs == (a[ell] * a[ell], -2 * a[ell], 1), (n, ell)


def test_hecke_tn_multiplicativity():
    sp = build_space(11)
    a = eta_product(ETA_NEWFORMS[11], 12)
    for m in [4, 6, 9, 12]:
        t = hecke_tn(sp, m).matrix
        assert charpoly_int(t).coeffs == (a[m] * a[m], -2 * a[m], 1), m


def test_hecke_operators_commute():
    sp = build_space(34)
    ops = [hecke(sp, ell).matrix for ell in [2, 3, 5, 17]]
    for i in range(len(ops)):
        for j in range(i):
            assert ops[i] * ops[j] == ops[j] * ops[i]


# --- involutions -----------------------------------------------------------


@pytest.mark.parametrize(
    "n,q", [(11, 11), (14, 2), (14, 7), (15, 3), (15, 5), (37, 37), (22, 11), (26, 2)]
)
def test_atkin_lehner_involution(n, q):
    sp = build_space(n)
    w = atkin_lehner(sp, q).matrix
    assert w * w == IntMatrix.identity(w.rows)
    ell = 3 if n % 3 else 7
    t = hecke(sp, ell).matrix
    assert w * t == t * w


def test_atkin_lehner_rejects_bad_divisor():
    sp = build_space(12)
    with pytest.raises(ValueError):
        atkin_lehner(sp, 2)  # 4 | 12
    with pytest.raises(ValueError):
        atkin_lehner(sp, 5)


def test_atkin_lehner_signs_level_14():
    # for the newform of level 14: a_2 = -1, a_7 = 1, and w_q = -a_q (q || n prime)
    sp = build_space(14)
    ident = IntMatrix.identity(2)
    assert atkin_lehner(sp, 2).matrix == ident
    assert atkin_lehner(sp, 7).matrix == ident.scale(-1)


def test_fricke_is_minus_u_at_prime_level():
    sp = build_space(11)
    assert atkin_lehner(sp, 11).matrix == hecke(sp, 11).matrix.scale(-1)


def test_star_involution():
    for n in [11, 14, 22, 37]:
        sp = build_space(n)
        s = star_involution(sp).matrix
        assert s * s == IntMatrix.identity(s.rows)
        t = hecke(sp, 3 if n % 3 else 5).matrix
        assert s * t == t * s


# --- degeneracy structure ---------------------------------------------------


def test_pullback_then_pushforward_is_index():
    # composition S(11) -> S(22) -> S(11) is multiplication by [index] = 3
    sp = build_space(22)
    d_f = degeneracy(sp, 2, "forget").matrix
    p_f = degeneracy_pullback(sp, 2, "forget").matrix
    assert p_f * d_f == IntMatrix.identity(2).scale(3)


def test_u_p_plus_w_p_identity():
    # on S(22): U_2 + w_2 equals pushforward (forget) followed by pullback (quotient)
    sp = build_space(22)
    d_f = degeneracy(sp, 2, "forget").matrix
    p_q = degeneracy_pullback(sp, 2, "quotient").matrix
    u2 = hecke(sp, 2).matrix
    w2 = atkin_lehner(sp, 2).matrix
    assert u2 + w2 == d_f * p_q


def test_degeneracy_commutes_with_hecke():
    sp = build_space(33)
    d = degeneracy(sp, 3, "forget").matrix
    low = build_space(11)
    for ell in [2, 5, 7]:
        assert hecke(sp, ell).matrix * d == d * hecke(low, ell).matrix


@pytest.mark.parametrize(
    "n,expected_new_rank", [(22, 0), (26, 4), (33, 2), (37, 4), (57, 6)]
)
def test_new_lattice_rank(n, expected_new_rank):
    sp = build_space(n)
    assert new_lattice(sp).rank == expected_new_rank


def test_new_lattice_is_hecke_stable():
    sp = build_space(33)
    nl = new_lattice(sp)
    from maninforge.exact_linalg import restrict_operator

    for ell in [2, 5]:
        restrict_operator(nl, hecke(sp, ell).matrix)  # raises if not stable


def test_degeneracy_requires_squarefree():
    sp = build_space(12)
    with pytest.raises(ValueError):
        degeneracy(sp, 2, "forget")
    with pytest.raises(ValueError):
        new_lattice(sp)


def test_is_squarefree():
    assert is_squarefree(1) and is_squarefree(30) and is_squarefree(431)
    assert not is_squarefree(12) and not is_squarefree(49)


# --- path vectors -----------------------------------------------------------


def test_path_vector_additivity_in_m():
    sp = build_space(30)
    a, b, c = (0, 1), (1, 3), (2, 7)
    v_ab = sp.path_vector(a, b)
    v_bc = sp.path_vector(b, c)
    v_ac = sp.path_vector(a, c)
    m0 = len(sp.reps)
    total = IntMatrix.from_rows([[x + y - z for x, y, z in zip(v_ab, v_bc, v_ac)]], m0)
    assert (total * sp.proj).is_zero()


def test_path_vector_closed_loop_is_cuspidal():
    sp = build_space(11)
    # {0, infinity} is the full winding element; its boundary is [0] - [inf]
    v = IntMatrix.from_rows([sp.path_vector((0, 1), (1, 0))], len(sp.reps))
    m_vec = v * sp.proj
    bd = m_vec * sp.boundary
    assert not bd.is_zero()  # 0 and infinity are distinct cusps at level 11
