"""Weight-2 modular symbols for Gamma_0(n).

Builds the Manin-symbol presentation, the torsion-free quotient M, the
boundary map to cusp classes, and the saturated cuspidal lattice S (an
integral model of H_1 of the modular curve).  Provides the geometric
operators: Hecke T_l / U_l, Atkin-Lehner involutions, degeneracy maps to
lower level, the new sublattice, and the star involution.

Conventions: elements are integer row vectors; operators act on the right,
so composing operators left-to-right multiplies their matrices in order.
All spaces and operators are immutable once built.
"""

from dataclasses import dataclass
from functools import lru_cache
from math import gcd

from .exact_linalg import (
    IntMatrix,
    IntLattice,
    coordinates_of,
    complement_projection,
    gcdex,
    kernel_saturated,
    lattice_intersect,
    restrict_operator,
)

__all__ = [
    "P1",
    "p1_list",
    "ModSymSpace",
    "OperatorMatrix",
    "build_space",
    "hecke",
    "atkin_lehner",
    "degeneracy",
    "degeneracy_pullback",
    "new_lattice",
    "star_involution",
    "is_squarefree",
]


def is_squarefree(n):
    d = 2
    while d * d <= n:
        if n % (d * d) == 0:
            return False
        d += 1
    return True


def _lift_unit(n, d, a):
    """Lift a unit a modulo d (a divisor of n) to a unit modulo n."""
    u, v = 1, n
    g = gcd(v, d)
    while g > 1:
        u *= g
        v //= g
        g = gcd(v, g)
    # n = u*v with gcd(u, v) = 1 and d | u
    _g, x, y = gcdex(u, v)
    return (u * x + a * y * v) % n


class P1:
    """The projective line over Z/nZ with canonical representatives.

    The representative of an orbit under unit scaling minimizes c, then d.
    """

    def __init__(self, n):
        if n < 1:
            raise ValueError("level must be positive")
        self.n = n
        if n == 1:
            self.points = [(0, 0)]
        else:
            seen = set()
            points = []
            for c in [0, 1]:
                for d in range(n):
                    p = self.normalize(c, d)
                    if p is not None and p not in seen:
                        seen.add(p)
                        points.append(p)
            for c in range(2, n + 1):
                if n % c == 0:
                    for d in range(n):
                        p = self.normalize(c, d)
                        if p is not None and p not in seen:
                            seen.add(p)
                            points.append(p)
            points.sort()
            self.points = points
        self._index = {p: i for i, p in enumerate(self.points)}

    def __len__(self):
        return len(self.points)

    def normalize(self, c, d):
        """Canonical representative of (c : d), or None if not a P^1 point."""
        n = self.n
        if n == 1:
            return (0, 0)
        c %= n
        d %= n
        if c == 0:
            return (0, 1) if gcd(d, n) == 1 else None
        g, _x, s = gcdex(n, c)
        if gcd(g, gcd(d, n)) > 1:
            return None
        s = _lift_unit(n, n // g, s % n)
        c, d = g, (s * d) % n
        if g > 1:
            d = min((d * t) % n for t in range(1, n, n // g) if gcd(n, t) == 1)
        return (c, d)

    def index_of(self, c, d):
        """Index of (c : d), or None if gcd(c, d, n) > 1."""
        p = self.normalize(c, d)
        if p is None:
            return None
        return self._index[p]


def p1_list(n):
    """All points of P^1(Z/nZ), sorted canonically."""
    return list(P1(n).points)


def _merel_matrices(m):
    """Merel's set of integer matrices of determinant m for the T_m action."""
    out = []
    for a in range(1, m + 1):
        lo = (m + a - 1) // a
        for d in range(lo, m + 2 - a):
            bc = a * d - m
            if bc == 0:
                for b in range(a):
                    out.append((a, b, 0, d))
                for c in range(1, d):
                    out.append((a, 0, c, d))
            else:
                for b in range((bc - 1) // (d - 1) + 1, a):
                    if bc % b == 0:
                        out.append((a, b, bc // b, d))
    return out


def _lift_to_sl2(c, d, n):
    """An SL_2(Z) matrix [[a, b], [c', d']] with (c', d') ≡ (c, d) mod n."""
    c %= n
    d %= n
    if c == 0 and d == 0:
        # only at n = 1
        return 1, 0, 0, 1
    while gcd(c, d) != 1:
        d += n
    g, x, y = gcdex(c, d)
    assert g == 1
    return y, -x, c, d


def _cusp_normalize(p, q):
    g = gcd(p, q)
    if g:
        p //= g
        q //= g
    if q < 0:
        p, q = -p, -q
    if q == 0:
        p = 1
    return (p, q)


def _cusps_equivalent(n, c1, c2):
    """Gamma_0(n)-equivalence of cusps p1/q1 and p2/q2 (lowest terms)."""
    (p1, q1), (p2, q2) = c1, c2
    _g, s1, _ = gcdex(p1, q1)
    _g, s2, _ = gcdex(p2, q2)
    g = gcd(q1 * q2, n)
    return (s1 * q2 - s2 * q1) % g == 0


@dataclass(frozen=True)
class OperatorMatrix:
    """A named operator acting on the cuspidal lattice coordinates."""

    name: str
    matrix: IntMatrix


class ModSymSpace:
    """Weight-2 modular symbol space for Gamma_0(n).

    The torsion-free quotient M of the Manin presentation lives in Z^rank;
    the cuspidal lattice S sits inside it as the saturated kernel of the
    boundary map.  Operators returned by module functions act on the
    coordinates of the basis of S.
    """

    def __init__(self, n):
        self.n = n
        self.p1 = P1(n)
        npts = len(self.p1)

        # two-term relations x + x*sigma = 0 pair up the Manin generators;
        # sigma-fixed generators are 2-torsion and die in the quotient
        gen_map = [None] * npts
        reps = []
        for i, (c, d) in enumerate(self.p1.points):
            if gen_map[i] is not None:
                continue
            j = self.p1.index_of(d, -c)
            if j == i:
                gen_map[i] = (None, 0)
                continue
            gen_map[i] = (len(reps), 1)
            gen_map[j] = (len(reps), -1)
            reps.append(i)
        self.reps = reps
        self.gen_map = gen_map
        m0 = len(reps)

        # three-term relations x + x*tau + x*tau^2 = 0
        rel_rows = []
        done = [False] * npts
        for i, (c, d) in enumerate(self.p1.points):
            if done[i]:
                continue
            orbit = [i]
            cc, dd = c, d
            for _ in range(2):
                cc, dd = dd % n, (-cc - dd) % n
                orbit.append(self.p1.index_of(cc, dd))
            for j in orbit:
                done[j] = True
            row = [0] * m0
            for j in set(orbit):
                mult = orbit.count(j)
                pos, sign = gen_map[j]
                if pos is not None:
                    row[pos] += mult * sign
            if any(row):
                rel_rows.append(row)
        relations = (IntMatrix.from_rows(rel_rows, m0)
                     if rel_rows else IntMatrix.zeros(0, m0))
        self.relations = relations

        # torsion-free quotient M = Z^m0 / saturate(rowspace(relations))
        ortho = kernel_saturated(relations)
        sat_rows = kernel_saturated(ortho.basis) if ortho.rank else IntLattice.standard(m0)
        self.proj, self.sec = complement_projection(sat_rows)
        self.rank = self.proj.cols

        # boundary map to cusp classes (collect classes from every symbol so
        # the cusp count is right even when a generator dies in the quotient)
        self.cusps = []
        for c, d in self.p1.points:
            a, b, cc, dd = _lift_to_sl2(c, d, n)
            self._cusp_index(_cusp_normalize(a, cc))
            self._cusp_index(_cusp_normalize(b, dd))
        bd_rows = []
        for i in reps:
            c, d = self.p1.points[i]
            a, b, cc, dd = _lift_to_sl2(c, d, n)
            row = [0] * (len(self.cusps) + 2)
            for cusp, coef in (((a, cc), 1), ((b, dd), -1)):
                idx = self._cusp_index(_cusp_normalize(*cusp))
                if idx >= len(row):
                    row.extend([0] * (idx + 1 - len(row)))
                row[idx] += coef
            bd_rows.append(row)
        ncusps = len(self.cusps)
        bd_rows = [row[:ncusps] + [0] * (ncusps - len(row[:ncusps])) for row in bd_rows]
        bd_rows = [row + [0] * (ncusps - len(row)) for row in bd_rows]
        bd_gen = (IntMatrix.from_rows(bd_rows, ncusps)
                  if bd_rows else IntMatrix.zeros(0, ncusps))
        self.boundary = self.sec * bd_gen if self.rank else IntMatrix.zeros(0, ncusps)

        # S = saturated kernel of the boundary inside M
        self.cuspidal = kernel_saturated(self.boundary.transpose())
        self._ops = {}

    def _cusp_index(self, cusp):
        for i, c in enumerate(self.cusps):
            if _cusps_equivalent(self.n, c, cusp):
                return i
        self.cusps.append(cusp)
        return len(self.cusps) - 1

    @property
    def cusp_count(self):
        return len(self.cusps)

    @property
    def cuspidal_rank(self):
        return self.cuspidal.rank

    def gen_vector(self, c, d):
        """Image of the Manin symbol (c : d) in the reduced generators."""
        m0 = len(self.reps)
        row = [0] * m0
        j = self.p1.index_of(c, d)
        if j is not None:
            pos, sign = self.gen_map[j]
            if pos is not None:
                row[pos] += sign
        return row

    def operator_from_images(self, image_fn):
        """Matrix on M of the operator sending (c:d) to sum of (image, coef)."""
        m0 = len(self.reps)
        rows = []
        for i in self.reps:
            c, d = self.p1.points[i]
            row = [0] * m0
            for cc, dd, coef in image_fn(c, d):
                j = self.p1.index_of(cc, dd)
                if j is None:
                    continue
                pos, sign = self.gen_map[j]
                if pos is not None:
                    row[pos] += coef * sign
            rows.append(row)
        t_gen = IntMatrix.from_rows(rows, m0) if rows else IntMatrix.zeros(0, m0)
        return self.sec * t_gen * self.proj

    def on_cuspidal(self, m_matrix):
        """Restrict an operator on M to coordinates of the S basis."""
        return restrict_operator(self.cuspidal, m_matrix)

    def path_vector(self, alpha, beta):
        """Modular symbol {alpha, beta} as a vector on the reduced generators.

        Cusps are pairs (p, q) in lowest terms, q = 0 meaning infinity.
        Uses the continued-fraction decomposition into unimodular paths.
        """
        m0 = len(self.reps)
        row = [0] * m0

        def add_inf_path(p, q, scale):
            # {infinity, p/q} as a sum of Manin symbols
            if q == 0:
                return
            cf = []
            a, b = p, q
            while b:
                cf.append(a // b)
                a, b = b, a - (a // b) * b
            pk_prev, qk_prev = 1, 0
            pk, qk = None, None
            for k, a_k in enumerate(cf):
                if k == 0:
                    pk, qk = a_k, 1
                else:
                    pk, qk, pk_prev, qk_prev = (a_k * pk + pk_prev,
                                                a_k * qk + qk_prev, pk, qk)
                sign = -1 if k % 2 == 0 else 1
                c = qk % self.n
                d = (sign * qk_prev) % self.n
                j = self.p1.index_of(c, d)
                if j is not None:
                    pos, s = self.gen_map[j]
                    if pos is not None:
                        row[pos] += scale * s

        add_inf_path(beta[0], beta[1], 1)
        add_inf_path(alpha[0], alpha[1], -1)
        return row


@lru_cache(maxsize=None)
def build_space(n):
    """Build (and memoize) the modular symbol space of level n."""
    if n < 1:
        raise ValueError("level must be positive")
    return ModSymSpace(n)


def hecke(space, ell):
    """Hecke operator T_ell (ell prime to n) or U_ell (ell dividing n) on S.

    Both are computed through Merel's determinant-ell matrix set acting on
    Manin symbols; images falling off P^1 (bad gcd) are skipped, which at
    ell | n is exactly the U_ell coset sum.
    """
    name = f"U_{ell}" if space.n % ell == 0 else f"T_{ell}"
    cached = space._ops.get(name)
    if cached is not None:
        return cached
    mats = _merel_matrices(ell)

    def images(c, d):
        return [((a * c + cc * d), (b * c + dd * d), 1) for a, b, cc, dd in mats]

    m_matrix = space.operator_from_images(images)
    op = OperatorMatrix(name, space.on_cuspidal(m_matrix))
    space._ops[name] = op
    return op


def hecke_tn(space, m):
    """Composite Hecke operator T_m on S via the standard recurrences."""
    if m == 1:
        return OperatorMatrix("T_1", IntMatrix.identity(space.cuspidal.rank))
    fac = {}
    mm = m
    d = 2
    while d * d <= mm:
        while mm % d == 0:
            fac[d] = fac.get(d, 0) + 1
            mm //= d
        d += 1
    if mm > 1:
        fac[mm] = fac.get(mm, 0) + 1
    result = None
    for p, e in sorted(fac.items()):
        tp = hecke(space, p).matrix
        if space.n % p == 0:
            part = tp
            for _ in range(e - 1):
                part = part * tp
        else:
            prev, cur = IntMatrix.identity(tp.rows), tp
            for _ in range(e - 1):
                prev, cur = cur, cur * tp - prev.scale(p)
            part = cur
        result = part if result is None else result * part
    return OperatorMatrix(f"T_{m}", result)


def _left_action_matrix(space, w):
    """Matrix on M of a left-acting integer matrix w (positive determinant).

    The Manin symbol of gamma maps to the path of w*gamma, decomposed into
    unimodular paths by continued fractions.  Used for operators (such as
    Atkin-Lehner) whose matrices do not act termwise on P^1(Z/nZ).
    """
    wa, wb, wc, wd = w
    m0 = len(space.reps)
    rows = []
    for i in space.reps:
        c, d = space.p1.points[i]
        a, b, cc, dd = _lift_to_sl2(c, d, space.n)
        pa = wa * a + wb * cc
        pc = wc * a + wd * cc
        pb = wa * b + wb * dd
        pd = wc * b + wd * dd
        rows.append(space.path_vector(_cusp_normalize(pb, pd),
                                      _cusp_normalize(pa, pc)))
    p_gen = (IntMatrix.from_rows(rows, m0) if rows else IntMatrix.zeros(0, m0))
    return space.sec * p_gen * space.proj


def atkin_lehner(space, q):
    """Atkin-Lehner involution w_q on S, for q exactly dividing n."""
    n = space.n
    if n % q != 0 or (n // q) % q == 0:
        raise ValueError("q must divide n exactly once")
    name = f"w_{q}"
    cached = space._ops.get(name)
    if cached is not None:
        return cached
    m = n // q
    _g, alpha, beta = gcdex(q, m)
    # W = [[q*alpha, -beta], [n, q]] has determinant q and normalizes Gamma_0(n)
    w = (q * alpha, -beta, n, q)
    m_matrix = _left_action_matrix(space, w)
    op = OperatorMatrix(name, space.on_cuspidal(m_matrix))
    space._ops[name] = op
    return op


def star_involution(space):
    """The complex-conjugation involution on S."""
    cached = space._ops.get("star")
    if cached is not None:
        return cached

    def images(c, d):
        return [(-c, d, -1)]

    m_matrix = space.operator_from_images(images)
    op = OperatorMatrix("star", space.on_cuspidal(m_matrix))
    space._ops["star"] = op
    return op


def _degeneracy_forget_m(space_n, space_m):
    """Pushforward M(n) -> M(m) induced by reinterpreting Manin symbols."""
    m0 = len(space_n.reps)
    rows = []
    for i in space_n.reps:
        c, d = space_n.p1.points[i]
        rows.append(space_m.gen_vector(c, d))
    d_gen = (IntMatrix.from_rows(rows, len(space_m.reps))
             if rows else IntMatrix.zeros(0, len(space_m.reps)))
    return space_n.sec * d_gen * space_m.proj


def _cuspidal_map(space_n, space_m, m_level_map):
    """Express a map M(n) -> M(m) on the cuspidal bases."""
    if space_n.cuspidal.rank == 0 or space_m.cuspidal.rank == 0:
        return IntMatrix.zeros(space_n.cuspidal.rank, space_m.cuspidal.rank)
    images = space_n.cuspidal.basis * m_level_map
    coords = coordinates_of(space_m.cuspidal, [list(r) for r in images.data])
    if coords is None:
        raise ValueError("degeneracy image is not integral on the cuspidal lattice")
    return IntMatrix.from_rows(coords, space_m.cuspidal.rank)


def degeneracy(space_n, ell, kind):
    """Degeneracy pushforward S(n) -> S(n / ell), kind 'forget' or 'quotient'.

    'forget' is induced by the identity on the upper half plane; 'quotient'
    by z -> ell*z, realized as Atkin-Lehner at ell followed by 'forget'.
    """
    n = space_n.n
    if not is_squarefree(n):
        raise ValueError("degeneracy maps require squarefree level")
    if n % ell != 0:
        raise ValueError("ell must divide the level")
    if n == ell:
        raise ValueError("no proper divisor level: the level is prime")
    if kind not in ("forget", "quotient"):
        raise ValueError("kind must be 'forget' or 'quotient'")
    name = f"deg_{kind}_{ell}"
    cached = space_n._ops.get(name)
    if cached is not None:
        return cached
    space_m = build_space(n // ell)
    forget = _cuspidal_map(space_n, space_m, _degeneracy_forget_m(space_n, space_m))
    if kind == "forget":
        mat = forget
    else:
        mat = atkin_lehner(space_n, ell).matrix * forget
    op = OperatorMatrix(name, mat)
    space_n._ops[name] = op
    return op


def _coset_reps(n, m):
    """SL_2(Z) representatives of Gamma_0(n) \\ Gamma_0(m), for m | n."""
    reps = []
    p1n = P1(n)
    for c, d in p1n.points:
        if c % m == 0:
            a, b, cc, dd = _lift_to_sl2(c, d, n)
            assert cc % m == 0
            reps.append((a, b, cc, dd))
    return reps


def degeneracy_pullback(space_n, ell, kind):
    """Degeneracy pullback S(n / ell) -> S(n) (homology transfer)."""
    n = space_n.n
    if not is_squarefree(n):
        raise ValueError("degeneracy maps require squarefree level")
    if n % ell != 0 or n == ell:
        raise ValueError("invalid degeneracy prime")
    space_m = build_space(n // ell)
    reps = _coset_reps(n, n // ell)
    m0_m = len(space_m.reps)
    rows = []
    for i in space_m.reps:
        u, v = space_m.p1.points[i]
        a, b, uu, vv = _lift_to_sl2(u, v, space_m.n)
        row = [0] * len(space_n.reps)
        for (ga, gb, gc, gd) in reps:
            # gamma * g: path from column 2 to column 1
            pa = ga * a + gb * uu
            pc = gc * a + gd * uu
            pb = ga * b + gb * vv
            pd = gc * b + gd * vv
            seg = space_n.path_vector(_cusp_normalize(pb, pd), _cusp_normalize(pa, pc))
            for k, x in enumerate(seg):
                row[k] += x
        rows.append(row)
    d_gen = (IntMatrix.from_rows(rows, len(space_n.reps))
             if rows else IntMatrix.zeros(0, len(space_n.reps)))
    m_map = space_m.sec * d_gen * space_n.proj
    pull_forget = _cuspidal_map(space_m, space_n, m_map)
    if kind == "forget":
        return OperatorMatrix(f"pull_forget_{ell}", pull_forget)
    if kind == "quotient":
        # (pi_quot)^* = (pi_forg)^* then w_ell at level n
        return OperatorMatrix(f"pull_quotient_{ell}",
                              pull_forget * atkin_lehner(space_n, ell).matrix)
    raise ValueError("kind must be 'forget' or 'quotient'")


def new_lattice(space):
    """The new sublattice of S: joint kernel of all degeneracy pushforwards."""
    n = space.n
    if not is_squarefree(n):
        raise ValueError("new subspace requires squarefree level")
    r = space.cuspidal.rank
    lat = IntLattice.standard(r)
    primes = [p for p in range(2, n) if n % p == 0 and _is_prime(p)]
    for ell in primes:
        if n == ell:
            continue
        for kind in ("forget", "quotient"):
            d = degeneracy(space, ell, kind).matrix
            lat = lattice_intersect(lat, kernel_saturated(d.transpose()))
    return lat


def _is_prime(p):
    if p < 2:
        return False
    return all(p % q for q in range(2, int(p ** 0.5) + 1))
