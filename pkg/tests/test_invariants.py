"""Tests for congruence numbers, modular degrees, and local reports.

External oracles: modular degrees and congruence numbers of elliptic
curves at small levels (classical values: deg = cong for semistable
elliptic curves, deg(X_0(11) identity) = 1, the 37 and 26 isogeny
classes have degree 2, ...).
"""

import json

import pytest

from maninforge.exact_linalg import IntLattice
from maninforge.hecke_algebra import is_dvr, maximal_ideals
from maninforge.invariants import (
    anomaly_scan,
    cong_number,
    congruence_module,
    deg_cong_report,
    divisibility_check,
    level_data,
    manin_certify,
    modular_degree,
    report_to_json,
)


KNOWN_DEGREES = {
    # level -> sorted modular degrees of the dimension-1 (elliptic) classes
    11: [1],
    14: [1],
    15: [1],
    17: [1],
    19: [1],
    21: [1],
    26: [2, 2],
    37: [2, 2],
    57: [3, 4, 12],
}


@pytest.mark.parametrize("n", sorted(KNOWN_DEGREES))
def test_modular_degrees_match_known_values(n):
    data = level_data(n)
    degs = sorted(
        modular_degree(data.space, c)
        for c in data.classes
        if c.dimension == 1
    )
    assert degs == KNOWN_DEGREES[n]


@pytest.mark.parametrize("n", [11, 26, 37, 57, 65, 77])
def test_deg_equals_cong_for_elliptic_semistable(n):
    data = level_data(n)
    for cls in data.classes:
        if cls.dimension != 1:
            continue
        assert modular_degree(data.space, cls) == cong_number(data.algebra, cls)


@pytest.mark.parametrize("n", [23, 29, 31, 35, 39, 41, 51])
def test_square_tripwire_and_odd_prime_equality(n):
    # deg_cong_report raises on a non-square S-module order or an odd-prime
    # mismatch; a clean pass exercises both tripwires
    reports = deg_cong_report(n, analyze_ideals=False)
    for rep in reports:
        for e in rep.primes:
            if e["p"] != 2:
                assert e["ord_deg"] == e["ord_cong"]


def test_congruence_module_via_idempotent_matches_kernels():
    data = level_data(37)
    cls = data.classes[0]
    rep = congruence_module(
        IntLattice.standard(data.space.cuspidal_rank), cls.e_f,
        carrier="S", label=cls.label,
    )
    rep.check()
    deg = modular_degree(data.space, cls)
    assert rep.total_order == deg * deg


def test_m_primary_orders_multiply_to_global():
    reports = deg_cong_report(57)
    for rep in reports:
        for p in {e["p"] for e in rep.primes}:
            cong_p = 1
            deg_p = 1
            for rec in rep.ideals:
                if rec["p"] == p:
                    cong_p *= rec["cong_m"]
                    deg_p *= rec["deg_m"]
            ord_c = next(e["ord_cong"] for e in rep.primes if e["p"] == p)
            ord_d = next(e["ord_deg"] for e in rep.primes if e["p"] == p)
            assert cong_p == p**ord_c
            assert deg_p == p**ord_d


def test_manin_certify_small_levels():
    for n in [11, 26, 37, 57]:
        certs = manin_certify(n)
        assert certs, n
        assert all(c.overall for c in certs)


def test_anomaly_scan_empty_at_small_levels():
    for n in [11, 26, 37, 57, 65]:
        assert anomaly_scan(n) == []


def test_divisibility_check_applicable_and_not():
    data = level_data(26)
    cls = data.classes[0]
    order = data.order(cls)
    for m in maximal_ideals(order, 2):
        if is_dvr(order, m):
            assert divisibility_check(cls, m) is True
    # a rank-1 order is Z: every maximal ideal is a DVR ideal, so fabricate
    # non-applicability via a non-DVR check instead at a higher-dim class
    data23 = level_data(23)
    cls23 = data23.classes[0]
    order23 = data23.order(cls23)
    for m in maximal_ideals(order23, 5):
        # 5 is ramified in Z[(1+sqrt5)/2] but the order is maximal: still DVR
        verdict = divisibility_check(cls23, m)
        assert verdict in (True, False, "not_applicable")


def test_report_json_schema_and_decimal_strings():
    reports = deg_cong_report(57)
    doc = report_to_json(57, reports)
    text = json.dumps(doc)
    parsed = json.loads(text)
    assert parsed["level"] == 57
    assert len(parsed["classes"]) == 3
    for rec in parsed["classes"]:
        assert set(rec) == {"label", "dim", "deg", "cong", "primes", "ideals"}
        assert isinstance(rec["deg"], str) and rec["deg"].isdigit()
        assert isinstance(rec["cong"], str) and rec["cong"].isdigit()
        for e in rec["primes"]:
            assert set(e) == {"p", "ord_deg", "ord_cong", "inferred_coker"}
            assert isinstance(e["p"], str)
        for e in rec["ideals"]:
            assert set(e) == {"p", "residue_degree", "gorenstein", "dvr",
                              "u_p_sign"}


def test_report_class_and_prime_filters():
    reports = deg_cong_report(57, primes=[3], class_index=1)
    assert len(reports) == 1
    assert reports[0].label == (57, 1)
    assert all(rec["p"] == 3 for rec in reports[0].ideals)


def test_trivial_class_at_11():
    data = level_data(11)
    (cls,) = data.classes
    assert modular_degree(data.space, cls) == 1
    assert cong_number(data.algebra, cls) == 1


def test_annihilator_methods_agree():
    from maninforge.invariants import _annihilator_of

    data = level_data(67)
    for cls in data.classes:
        s_ef, s_eperp = data.s_kernels(cls)
        for sub in (s_ef, s_eperp):
            direct = _annihilator_of(data.algebra, sub, method="direct")
            modular = _annihilator_of(data.algebra, sub, method="modular")
            assert direct == modular


def test_cong_report_det_path_matches_snf():
    import maninforge.invariants as inv
    from maninforge.invariants import _cong_report, _module_report
    from maninforge.exact_linalg import lattice_sum

    data = level_data(57)
    for cls in data.classes:
        s_ef, s_eperp = data.s_kernels(cls)
        t_ef, t_eperp = data.t_kernels(cls)
        for carrier, r, k1, k2 in [
            ("S", data.space.cuspidal_rank, s_ef, s_eperp),
            ("T", data.algebra.rank, t_ef, t_eperp),
        ]:
            snf_rep = _module_report(carrier, cls.label,
                                     IntLattice.standard(r),
                                     lattice_sum(k1, k2))
            old = inv._BIG_MODULE
            inv._BIG_MODULE = 0
            try:
                det_rep = _cong_report(carrier, cls.label, r, k1, k2)
            finally:
                inv._BIG_MODULE = old
            det_rep.check()
            assert det_rep.total_order == snf_rep.total_order
            assert det_rep.p_parts == snf_rep.p_parts
            assert det_rep.invariant_factors is None
