#include "doctest.h"

#include "hecke/amplifier.hpp"
#include "hecke/errors.hpp"

#include <cmath>

using namespace hecke;
using namespace hecke::amp;
using hecke::lattice::Cotype;

namespace {

mpq_class Q(long num, long den = 1) {
    mpq_class q(num, den);
    q.canonicalize();
    return q;
}

// Closed-form local torus term for the hyperplane operator in rank three.
mpq_class closed_torus(long p, const mpq_class& c) {
    const mpq_class a = c / p;
    return 12 * a + (6 * p + 24) * a * a + 2 * a * a * (p * p + p + 1);
}

mpq_class closed_norm(long p, const mpq_class& c) {
    const mpq_class a = c / p;
    return 2 * a * a * (p * p + p + 1);
}

bool is_prime_slow(long n) {
    if (n < 2) return false;
    for (long d = 2; d * d <= n; ++d)
        if (n % d == 0) return false;
    return true;
}

// Direct sum over n <= M by trial factorization.
std::pair<mpq_class, mpq_class> brute_sums(const mpq_class& c, const mpq_class& c1, unsigned long M) {
    mpq_class num = 0, den = 0;
    const double cutoff = c1.get_d() * std::log(static_cast<double>(M));
    for (unsigned long n = 1; n <= M; ++n) {
        unsigned long m = n;
        bool ok = true;
        mpq_class tn = 1, dn = 1;
        for (unsigned long q = 2; q <= m && ok; ++q) {
            if (m % q) continue;
            m /= q;
            if (m % q == 0 || static_cast<double>(q) > cutoff) ok = false;
            tn *= closed_torus(static_cast<long>(q), c);
            dn *= closed_norm(static_cast<long>(q), c);
        }
        if (!ok) continue;
        num += tn;
        den += dn;
    }
    return {num, den};
}

} // namespace

TEST_CASE("good primes under congruence rules") {
    GoodPrimeRule all;
    CHECK(good_primes(all, 10) == std::vector<long>{2, 3, 5, 7});
    GoodPrimeRule mod4;
    mod4.modulus = 4;
    mod4.residues = {1};
    CHECK(good_primes(mod4, 20) == std::vector<long>{5, 13, 17});
    GoodPrimeRule excl;
    excl.excluded = {3, 7};
    CHECK(good_primes(excl, 12) == std::vector<long>{2, 5, 11});
    GoodPrimeRule bad;
    bad.modulus = 6;
    bad.residues = {2};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad.residues = {7};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad.modulus = 0;
    bad.residues = {};
    CHECK_THROWS_AS(good_primes(bad, 10), std::invalid_argument);
}

TEST_CASE("declared density matches prime counts") {
    const long pi = prime_pi(100000);
    CHECK(pi == 9592);
    for (auto [m, res] : std::vector<std::pair<long, std::vector<long>>>{{3, {1}}, {4, {3}}, {5, {1}}, {5, {2, 3}}}) {
        GoodPrimeRule r;
        r.modulus = m;
        r.residues = res;
        const double observed = static_cast<double>(good_primes(r, 100000).size()) / static_cast<double>(pi);
        const double declared = r.density().get_d();
        CAPTURE(m);
        CHECK(std::fabs(observed - declared) <= 0.1 * declared);
    }
    GoodPrimeRule units;
    units.modulus = 5;
    CHECK(units.density() == 1);
}

TEST_CASE("local weights agree with the closed form for the hyperplane operator") {
    for (long p = 2; p <= 50; ++p) {
        if (!is_prime_slow(p)) continue;
        const auto w = local_weight(p, 1, Cotype::parse("1,0,0"));
        CAPTURE(p);
        CHECK(w.a_p == Q(1, p));
        CHECK(w.torus_term == closed_torus(p, 1));
        CHECK(w.norm_sq == closed_norm(p, 1));
    }
    const auto half = local_weight(7, Q(1, 2), Cotype::parse("1,0,0"));
    CHECK(half.torus_term == closed_torus(7, Q(1, 2)));
}

TEST_CASE("local weights at c = 0 vanish") {
    const auto w = local_weight(5, 0, Cotype::parse("1,0,0"));
    CHECK(w.a_p == 0);
    CHECK(w.norm_sq == 0);
    CHECK(w.torus_term == 0);
}

TEST_CASE("local weights for the adjoint operator and a self-adjoint one") {
    // omega_p is symmetric in a and its adjoint.
    const auto w = local_weight(3, 1, Cotype::parse("1,1,0"));
    CHECK(w.torus_term == closed_torus(3, 1));
    CHECK(w.norm_sq == closed_norm(3, 1));
    // In rank two tau(1,0) is self-adjoint, so omega_p = 2 a_p tau.
    for (long p : {2, 3, 5, 7}) {
        const auto v = local_weight(p, 1, Cotype::parse("1,0"));
        const mpq_class a = Q(1, p);
        CHECK(v.norm_sq == 4 * a * a * (p + 1));
        CHECK(v.torus_term == 8 * a + 4 * a * a * (p + 3));
    }
}

TEST_CASE("cutoff admission") {
    CHECK(admitted_by_cutoff(3, 2, 6));   // 2 ln 6 = 3.58
    CHECK_FALSE(admitted_by_cutoff(5, 2, 6));
    CHECK_FALSE(admitted_by_cutoff(2, 100, 1));
    CHECK(cutoff_value(4, 100000) == doctest::Approx(4 * std::log(100000.0)));
}

TEST_CASE("amplifier ratio: trivial cases") {
    AmplifierConfig cfg;
    cfg.M = 1;
    const auto r = amplifier_ratio(cfg);
    CHECK(r.numerator == 1);
    CHECK(r.denominator == 1);
    CHECK(r.ratio == 1);
    CHECK(r.term_count == 1);
    AmplifierConfig zero;
    zero.c = 0;
    zero.c1 = 4;
    zero.M = 10000;
    CHECK(amplifier_ratio(zero).ratio == 1);
}

TEST_CASE("amplifier ratio: four-term hand expansion") {
    AmplifierConfig cfg;
    cfg.c = 1;
    cfg.c1 = 2;
    cfg.M = 6;
    const auto r = amplifier_ratio(cfg);
    CHECK(r.primes_used == std::vector<long>{2, 3});
    CHECK(r.term_count == 4);
    const auto T = [](long p) -> mpq_class { return Q(12, p) + Q(6 * p + 24, p * p) + Q(2 * (p * p + p + 1), p * p); };
    CHECK(r.numerator == 1 + T(2) + T(3) + T(2) * T(3));
    const auto D = [](long p) -> mpq_class { return Q(2 * (p * p + p + 1), p * p); };
    CHECK(r.denominator == 1 + D(2) + D(3) + D(2) * D(3));
}

TEST_CASE("amplifier ratio equals the direct sum over n") {
    for (unsigned long M : {30ul, 210ul, 1000ul, 5000ul}) {
        AmplifierConfig cfg;
        cfg.c = Q(3, 2);
        cfg.c1 = 4;
        cfg.M = M;
        const auto r = amplifier_ratio(cfg);
        const auto [num, den] = brute_sums(cfg.c, cfg.c1, M);
        CAPTURE(M);
        CHECK(r.numerator == num);
        CHECK(r.denominator == den);
        CHECK(r.ratio >= 1);
    }
}

TEST_CASE("amplifier ratio grows with M and serial matches parallel") {
    mpq_class prev = 0;
    for (unsigned long M : {100ul, 1000ul, 10000ul}) {
        AmplifierConfig cfg;
        cfg.c1 = 4;
        cfg.M = M;
        const auto par = amplifier_ratio(cfg, Exec::parallel);
        const auto ser = amplifier_ratio(cfg, Exec::serial);
        CHECK(par.ratio == ser.ratio);
        CHECK(par.term_count == ser.term_count);
        CHECK(par.ratio > prev);
        prev = par.ratio;
    }
}

TEST_CASE("amplifier term ceiling") {
    AmplifierConfig cfg;
    cfg.c1 = 4;
    cfg.M = 10000;
    cfg.max_terms = 50;
    CHECK_THROWS_AS(amplifier_ratio(cfg), CapacityError);
    cfg.max_terms = 384;
    CHECK(amplifier_ratio(cfg).term_count == 384);
}

TEST_CASE("lower-bound constant") {
    CHECK(lower_bound_constant(1, 1) == 6);
    CHECK(lower_bound_constant(2, 1) == Q(16, 3));
    CHECK(lower_bound_constant(Q(1, 2), 1) == 5);
    CHECK(lower_bound_constant(0, 1) == 0);
    CHECK(lower_bound_constant(Q(1, 1000000), 1) < Q(1, 10000));
    CHECK(lower_bound_constant(1, Q(1, 2)) == 3);
    CHECK_THROWS_AS(lower_bound_constant(1, 0), std::invalid_argument);
    for (int k = 1; k <= 1000; ++k) {
        const mpq_class c = Q(k, 100);
        if (k == 100)
            CHECK(lower_bound_constant(c, 1) == 6);
        else
            CHECK(lower_bound_constant(c, 1) < 6);
    }
}

TEST_CASE("optimal c") {
    const auto o = optimal_c();
    CHECK(o.c == 1);
    CHECK(o.value == 6);
    CHECK(lower_bound_derivative_numerator(Q(1, 2)) > 0);
    CHECK(lower_bound_derivative_numerator(2) < 0);
    CHECK(lower_bound_derivative_numerator(1) == 0);
    // Grid search over 0.01 .. 10.
    int best = 0;
    mpq_class best_v = -1;
    for (int k = 1; k <= 1000; ++k) {
        const auto v = lower_bound_constant(Q(k, 100), 1);
        if (v > best_v) {
            best_v = v;
            best = k;
        }
    }
    CHECK(best == 100);
}

TEST_CASE("upper-bound envelope") {
    const auto one = upper_bound_envelope(1, 1, 1);
    CHECK(one.n == 1);
    CHECK(one.divisor_sum == 1);
    const auto e30 = upper_bound_envelope(30, 1, 1);
    CHECK(e30.n == 30);
    CHECK(e30.divisor_sum == Q(12, 5));
    CHECK(e30.product == Q(12, 5));
    const auto e29 = upper_bound_envelope(29, 1, 1);
    CHECK(e29.n == 6);
    const auto big = upper_bound_envelope(1000000, 2, 1);
    CHECK(big.n == 510510);
    CHECK(big.primes == std::vector<long>{2, 3, 5, 7, 11, 13, 17});
    CHECK(big.divisor_sum == big.product);
    mpq_class direct = 1;
    for (long p : big.primes) direct *= Q(p + 2, p);
    CHECK(big.product == direct);
}
