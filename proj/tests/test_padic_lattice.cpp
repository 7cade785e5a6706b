#include "doctest.h"

#include "hecke/errors.hpp"
#include "hecke/padic_lattice.hpp"
#include "oracle/brute_subgroups.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <set>

using namespace hecke::lattice;

namespace {

oracle::ElementSet elements(const oracle::Ambient& G, const SubgroupHNF& L) {
    std::vector<std::vector<long long>> cols;
    for (int c = 0; c < L.n(); ++c) {
        std::vector<long long> v;
        for (int r = 0; r < L.n(); ++r) v.push_back(L.entry(r, c));
        cols.push_back(v);
    }
    return oracle::span(G, cols);
}

std::vector<std::vector<int>> cotypes_up_to(int n, int cap) {
    std::vector<std::vector<int>> out;
    std::vector<int> a(static_cast<std::size_t>(n), 0);
    std::function<void(int, int)> rec = [&](int i, int hi) {
        if (i == n - 1) {
            a[static_cast<std::size_t>(i)] = 0;
            out.push_back(a);
            return;
        }
        for (int v = 0; v <= hi; ++v) {
            a[static_cast<std::size_t>(i)] = v;
            rec(i + 1, v);
        }
    };
    rec(0, cap);
    return out;
}

std::vector<i64> random_invertible(std::mt19937_64& rng, const PrimeContext& ctx) {
    const int n = ctx.n();
    std::uniform_int_distribution<i64> dist(0, static_cast<i64>(ctx.modulus()) - 1);
    for (;;) {
        std::vector<i64> g(static_cast<std::size_t>(n * n));
        for (auto& x : g) x = dist(rng);
        // Invertible mod p^N iff the image mod p has full rank, i.e. g L0 = L0.
        if (transform(g, SubgroupHNF::full(ctx)) == SubgroupHNF::full(ctx)) return g;
    }
}

} // namespace

TEST_CASE("normalize_cotype sorts and shifts") {
    CHECK(normalize_cotype(std::vector<int>{0, 1, 0}).exponents() == std::vector<int>{1, 0, 0});
    CHECK(normalize_cotype(std::vector<int>{2, 2, 2}).exponents() == std::vector<int>{0, 0, 0});
    CHECK(normalize_cotype(std::vector<int>{-1, 0, 0}).exponents() == std::vector<int>{1, 1, 0});
    CHECK_THROWS_AS(normalize_cotype(std::vector<int>{}), std::invalid_argument);
    CHECK_THROWS_AS(Cotype(std::vector<int>{0, 1}), std::invalid_argument);
}

TEST_CASE("normalize is idempotent on random tuples") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> len(1, 5), val(-6, 6);
    for (int it = 0; it < 500; ++it) {
        std::vector<int> raw(static_cast<std::size_t>(len(rng)));
        for (auto& x : raw) x = val(rng);
        const Cotype once = normalize_cotype(raw);
        CHECK(normalize_cotype(once.exponents()) == once);
        CHECK(once.exponents().back() == 0);
        CHECK(std::is_sorted(once.exponents().rbegin(), once.exponents().rend()));
        CHECK(once.adjoint().adjoint() == once);
    }
}

TEST_CASE("Cotype parsing and adjoint") {
    CHECK(Cotype::parse("2,1,0").exponents() == std::vector<int>{2, 1, 0});
    CHECK(Cotype::parse("0, 1 ,0").exponents() == std::vector<int>{1, 0, 0});
    CHECK_THROWS_AS(Cotype::parse("1,x"), std::invalid_argument);
    CHECK_THROWS_AS(Cotype::parse(""), std::invalid_argument);
    CHECK(Cotype::parse("1,0,0").adjoint() == Cotype::parse("1,1,0"));
    CHECK(Cotype::parse("1,0").adjoint() == Cotype::parse("1,0"));
    CHECK(Cotype::parse("2,1,0").adjoint() == Cotype::parse("2,1,0"));
}

TEST_CASE("truncation norm pairs the tuple with rho") {
    CHECK(Cotype::parse("1,0,0").truncation_norm() == doctest::Approx(1.0));
    CHECK(Cotype::parse("1,1,0").truncation_norm() == doctest::Approx(1.0));
    CHECK(Cotype::parse("2,1,0").truncation_norm() == doctest::Approx(2.0));
    CHECK(Cotype::parse("1,0").truncation_norm() == doctest::Approx(0.5));
}

TEST_CASE("PrimeContext validation") {
    CHECK_THROWS_AS(PrimeContext(4, 2, 1), std::invalid_argument);
    CHECK_THROWS_AS(PrimeContext(2, 0, 1), std::invalid_argument);
    CHECK_THROWS_AS(PrimeContext(2, 2, 0), std::invalid_argument);
    CHECK_THROWS_AS(PrimeContext(2, 2, 63), std::overflow_error);
    CHECK(PrimeContext(3, 2, 2).modulus() == 9);
}

TEST_CASE("SubgroupHNF rejects non-canonical matrices") {
    const PrimeContext ctx(2, 2, 2);
    CHECK_NOTHROW(SubgroupHNF(ctx, {2, 1, 0, 2}));
    CHECK_THROWS_AS(SubgroupHNF(ctx, {2, 3, 0, 2}), std::invalid_argument);  // not reduced by row pivot
    CHECK_THROWS_AS(SubgroupHNF(ctx, {2, 0, 1, 2}), std::invalid_argument);  // lower entry
    CHECK_THROWS_AS(SubgroupHNF(ctx, {3, 0, 0, 1}), std::invalid_argument);  // pivot not a power of p
    CHECK_THROWS_AS(SubgroupHNF(ctx, {8, 0, 0, 1}), std::invalid_argument);  // pivot beyond p^N
    // 2 * (1, 2) = (2, 0) is not a multiple of the first column.
    CHECK_THROWS_AS(SubgroupHNF(ctx, {4, 1, 0, 2}), std::invalid_argument);
}

TEST_CASE("small enumeration counts") {
    CHECK(enumerate_subgroups(PrimeContext(2, 3, 1), Cotype::parse("1,0,0")).size() == 7);
    for (int p : {2, 3, 5})
        for (int n : {1, 2, 3}) {
            const auto list = enumerate_subgroups(PrimeContext(p, n, 2), Cotype::zero(n));
            REQUIRE(list.size() == 1);
            CHECK(list[0] == SubgroupHNF::full(PrimeContext(p, n, 2)));
        }
    CHECK(enumerate_subgroups(PrimeContext(3, 2, 2), Cotype::parse("2,0")).size() == 12);
    CHECK_THROWS_AS(enumerate_subgroups(PrimeContext(3, 2, 1), Cotype::parse("2,0")), std::invalid_argument);
}

TEST_CASE("capacity ceiling is enforced before enumerating") {
    EnumerationLimits lim;
    lim.max_subgroups = 6;
    CHECK_THROWS_AS(enumerate_subgroups(PrimeContext(2, 3, 1), Cotype::parse("1,0,0"), lim), hecke::CapacityError);
    lim.max_subgroups = 7;
    CHECK(enumerate_subgroups(PrimeContext(2, 3, 1), Cotype::parse("1,0,0"), lim).size() == 7);
    CHECK_THROWS_AS(enumerate_all_subgroups(PrimeContext(2, 3, 2), lim), hecke::CapacityError);
}

TEST_CASE("enumeration matches brute-force classification of every subgroup") {
    for (int p : {2, 3})
        for (int n : {1, 2, 3}) {
            const int N = 2;
            const PrimeContext ctx(p, n, N);
            const oracle::Ambient G(p, n, N);
            const auto brute = oracle::all_subgroups(G);
            std::map<std::vector<int>, std::set<oracle::ElementSet>> by_type;
            for (const auto& s : brute) by_type[oracle::quotient_type(G, s)].insert(s);

            const auto all = enumerate_all_subgroups(ctx);
            CHECK(all.size() == brute.size());
            std::set<std::vector<i64>> distinct_all;
            for (std::size_t i = 0; i < all.size(); ++i) {
                auto r = all.raw(i);
                distinct_all.insert(std::vector<i64>(r.begin(), r.end()));
            }
            CHECK(distinct_all.size() == all.size());

            for (const auto& a : cotypes_up_to(n, N)) {
                CAPTURE(p);
                CAPTURE(n);
                CAPTURE(Cotype(a).to_string());
                const auto list = enumerate_subgroups(ctx, Cotype(a));
                CHECK(list.size() == by_type[a].size());
                CHECK(list.size() == predicted_subgroup_count(p, Cotype(a)));
                std::set<oracle::ElementSet> got;
                std::set<std::vector<i64>> distinct;
                for (std::size_t i = 0; i < list.size(); ++i) {
                    const SubgroupHNF L = list[i];
                    CHECK(quotient_invariants(L).exponents == a);
                    CHECK(cotype_of(L) == Cotype(a));
                    got.insert(elements(G, L));
                    distinct.insert(L.matrix());
                }
                CHECK(distinct.size() == list.size());
                CHECK(got == by_type[a]);
            }
        }
}

TEST_CASE("enumeration order is lexicographic and deterministic") {
    const PrimeContext ctx(3, 3, 2);
    const auto a = Cotype::parse("2,1,0");
    const auto first = enumerate_subgroups(ctx, a);
    const auto second = enumerate_subgroups(ctx, a);
    REQUIRE(first.size() == second.size());
    std::vector<int> prev_d;
    for (std::size_t i = 0; i < first.size(); ++i) {
        CHECK(first[i] == second[i]);
        const auto d = first[i].pivot_exponents();
        CHECK(prev_d <= d);
        prev_d = d;
    }
    std::size_t streamed = 0;
    for_each_subgroup(ctx, a, [&](std::span<const i64> m) {
        CHECK(std::equal(m.begin(), m.end(), first.raw(streamed).begin()));
        ++streamed;
    });
    CHECK(streamed == first.size());
}

TEST_CASE("closed-form count agrees with enumeration for larger primes") {
    for (int p : {5, 7})
        for (const auto& a : cotypes_up_to(3, 2)) {
            const Cotype c(a);
            CHECK(enumerate_subgroups(PrimeContext(p, 3, 2), c).size() == predicted_subgroup_count(p, c));
        }
    CHECK(predicted_subgroup_count(5, Cotype::parse("1,0,0")) == 31);
    CHECK(predicted_subgroup_count(11, Cotype::parse("1,0")) == 12);
}

TEST_CASE("from_generators is canonical") {
    std::mt19937_64 rng(11);
    for (int p : {2, 3}) {
        const PrimeContext ctx(p, 3, 2);
        const oracle::Ambient G(p, 3, 2);
        const auto all = enumerate_all_subgroups(ctx);
        std::uniform_int_distribution<int> coef(0, static_cast<int>(ctx.modulus()) - 1);
        for (std::size_t i = 0; i < all.size(); i += 3) {
            const SubgroupHNF L = all[i];
            // Random combinations of the columns, plus redundant ones.
            std::vector<std::vector<i64>> gens;
            for (int g = 0; g < 5; ++g) {
                std::vector<i64> v(3, 0);
                for (int c = 0; c < 3; ++c) {
                    const int k = coef(rng);
                    for (int r = 0; r < 3; ++r) v[static_cast<std::size_t>(r)] += k * L.entry(r, c);
                }
                gens.push_back(v);
            }
            for (int c = 0; c < 3; ++c) {
                std::vector<i64> v(3);
                for (int r = 0; r < 3; ++r) v[static_cast<std::size_t>(r)] = L.entry(r, c) * (1 + 2 * static_cast<i64>(ctx.modulus()));
                gens.push_back(v);
            }
            std::shuffle(gens.begin(), gens.end(), rng);
            const SubgroupHNF rebuilt = SubgroupHNF::from_generators(ctx, gens);
            CHECK(rebuilt == L);
            CHECK_NOTHROW(SubgroupHNF(ctx, rebuilt.matrix()));
        }
    }
}

TEST_CASE("membership agrees with element sets") {
    const PrimeContext ctx(2, 3, 2);
    const oracle::Ambient G(2, 3, 2);
    const auto all = enumerate_all_subgroups(ctx);
    for (std::size_t i = 0; i < all.size(); i += 7) {
        const SubgroupHNF L = all[i];
        const auto set = elements(G, L);
        CHECK(oracle::order(set) == (1 << L.order_exponent()));
        for (int e = 0; e < G.size(); ++e) {
            const auto v = G.decode(e);
            std::vector<i64> w(v.begin(), v.end());
            CHECK(L.contains(w) == static_cast<bool>(set[static_cast<std::size_t>(e)]));
        }
    }
}

TEST_CASE("diagonal subgroups") {
    const PrimeContext ctx(5, 3, 3);
    const std::vector<int> e{1, 0, 0};
    CHECK(cotype_of(SubgroupHNF::diagonal(ctx, e)) == Cotype::parse("1,0,0"));
    CHECK(cotype_of(SubgroupHNF::full(ctx)) == Cotype::zero(3));
    CHECK(quotient_invariants(SubgroupHNF::zero(ctx)).exponents == std::vector<int>{3, 3, 3});
    std::mt19937_64 rng(3);
    const auto list = enumerate_subgroups(PrimeContext(3, 3, 2), Cotype::parse("2,1,0"));
    std::uniform_int_distribution<std::size_t> pick(0, list.size() - 1);
    for (int i = 0; i < 20; ++i) CHECK(cotype_of(list[pick(rng)]) == Cotype::parse("2,1,0"));
}

TEST_CASE("duality is an involution matching the annihilator") {
    for (auto [p, n] : std::vector<std::pair<int, int>>{{2, 3}, {3, 2}}) {
        const int N = 2;
        const PrimeContext ctx(p, n, N);
        const oracle::Ambient G(p, n, N);
        const auto all = enumerate_all_subgroups(ctx);
        for (std::size_t i = 0; i < all.size(); ++i) {
            const SubgroupHNF L = all[i];
            const SubgroupHNF D = dual_subgroup(L);
            CHECK(dual_subgroup(D) == L);
            CHECK(L.order_exponent() + D.order_exponent() == n * N);
            CHECK(quotient_invariants(D) == dual_invariants(quotient_invariants(L), N));
            CHECK(elements(G, D) == oracle::annihilator(G, elements(G, L)));
        }
    }
    const PrimeContext ctx(3, 3, 4);
    CHECK(dual_subgroup(SubgroupHNF::full(ctx)) == SubgroupHNF::zero(ctx));
    const std::vector<int> a{3, 1, 0}, na{1, 3, 4};
    CHECK(dual_subgroup(SubgroupHNF::diagonal(ctx, na)) == SubgroupHNF::diagonal(ctx, a));
}

TEST_CASE("invertible matrices permute subgroups of fixed cotype") {
    std::mt19937_64 rng(5);
    for (auto [p, cot] : std::vector<std::pair<int, const char*>>{{2, "2,1,0"}, {3, "1,0,0"}, {3, "2,0,0"}}) {
        const PrimeContext ctx(p, 3, 2);
        const auto a = Cotype::parse(cot);
        const auto list = enumerate_subgroups(ctx, a);
        std::set<std::vector<i64>> original;
        for (std::size_t i = 0; i < list.size(); ++i) original.insert(list[i].matrix());
        for (int trial = 0; trial < 3; ++trial) {
            const auto g = random_invertible(rng, ctx);
            std::set<std::vector<i64>> image;
            for (std::size_t i = 0; i < list.size(); ++i) {
                const SubgroupHNF gL = transform(g, list[i]);
                CHECK(cotype_of(gL) == a);
                image.insert(gL.matrix());
            }
            CHECK(image == original);
        }
    }
}

TEST_CASE("adapted overlattice candidates") {
    const PrimeContext ctx(2, 3, 2);
    const auto t1 = enumerate_adapted_overlattices(ctx, Cotype::parse("1,0,0"), Cotype::zero(3));
    std::set<std::vector<int>> got;
    for (const auto& l : t1) got.insert(l.t);
    CHECK(got == std::set<std::vector<int>>{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});

    const auto same = enumerate_adapted_overlattices(ctx, Cotype::parse("2,1,0"), Cotype::parse("2,1,0"));
    CHECK(std::any_of(same.begin(), same.end(), [](const AdaptedLattice& l) { return l.is_base(); }));

    const auto mixed = enumerate_adapted_overlattices(ctx, Cotype::parse("1,1,0"), Cotype::parse("1,0,0"));
    std::set<std::vector<int>> ts;
    for (const auto& l : mixed) {
        ts.insert(l.t);
        int s = 0;
        for (int x : l.t) {
            CHECK(x >= -1);
            CHECK(x <= 1);
            s += x;
        }
        CHECK(s == 1);
    }
    for (const auto& t : std::vector<std::vector<int>>{{-1, 1, 1}, {1, -1, 1}, {1, 1, -1}, {0, 0, 1}, {0, 1, 0}, {1, 0, 0}})
        CHECK(ts.count(t) == 1);
    CHECK(std::is_sorted(mixed.begin(), mixed.end()));
}

TEST_CASE("relative_cotype on scalar cases") {
    const PrimeContext ctx(3, 3, 3);
    const std::vector<int> t{2, 1, 0};
    const auto same = relative_cotype(SubgroupHNF::diagonal(ctx, t), AdaptedLattice{t});
    CHECK(same.contained);
    CHECK(same.raw.exponents == std::vector<int>{0, 0, 0});
    CHECK_FALSE(same.translated);
    const std::vector<int> t_plus{3, 2, 1};
    const auto scaled = relative_cotype(SubgroupHNF::diagonal(ctx, t_plus), AdaptedLattice{t});
    CHECK(scaled.contained);
    CHECK(scaled.raw.exponents == std::vector<int>{1, 1, 1});
    CHECK(scaled.normalized == Cotype::zero(3));
    CHECK(scaled.translated);
    const auto outside = relative_cotype(SubgroupHNF::full(ctx), AdaptedLattice{{1, 0, 0}});
    CHECK_FALSE(outside.contained);
}

TEST_CASE("relative_cotype agrees with element-set quotients") {
    for (auto [p, n, N] : std::vector<std::tuple<int, int, int>>{{2, 2, 2}, {2, 3, 1}, {3, 2, 1}}) {
        const PrimeContext ctx(p, n, N);
        const auto all = enumerate_all_subgroups(ctx);
        const int lo = -N;
        std::vector<int> t(static_cast<std::size_t>(n), lo);
        for (;;) {
            const int shift = std::max(0, -*std::min_element(t.begin(), t.end()));
            const oracle::Ambient G(p, n, N + shift);
            std::vector<std::vector<long long>> l1gens;
            for (int i = 0; i < n; ++i) {
                std::vector<long long> v(static_cast<std::size_t>(n), 0);
                long long e = 1;
                for (int k = 0; k < t[static_cast<std::size_t>(i)] + shift; ++k) e *= p;
                v[static_cast<std::size_t>(i)] = e;
                l1gens.push_back(v);
            }
            const auto L1set = oracle::span(G, l1gens);
            long long ps = 1;
            for (int k = 0; k < shift; ++k) ps *= p;
            for (std::size_t i = 0; i < all.size(); ++i) {
                const SubgroupHNF L = all[i];
                std::vector<std::vector<long long>> lg;
                for (int c = 0; c < n; ++c) {
                    std::vector<long long> v;
                    for (int r = 0; r < n; ++r) v.push_back(ps * L.entry(r, c));
                    lg.push_back(v);
                }
                const auto Lset = oracle::span(G, lg);
                bool inside = true;
                for (int e = 0; e < G.size(); ++e)
                    if (Lset[static_cast<std::size_t>(e)] && !L1set[static_cast<std::size_t>(e)]) inside = false;
                const auto rel = relative_cotype(L, AdaptedLattice{t});
                CAPTURE(i);
                CAPTURE(p);
                CAPTURE(n);
                REQUIRE(rel.contained == inside);
                if (inside) CHECK(rel.raw.exponents == oracle::relative_type(G, L1set, Lset));
            }
            int k = n - 1;
            while (k >= 0 && t[static_cast<std::size_t>(k)] == N) t[static_cast<std::size_t>(k--)] = lo;
            if (k < 0) break;
            ++t[static_cast<std::size_t>(k)];
        }
    }
}

TEST_CASE("relative_invariants between nested subgroups") {
    const PrimeContext ctx(2, 2, 2);
    const oracle::Ambient G(2, 2, 2);
    const auto all = enumerate_all_subgroups(ctx);
    for (std::size_t i = 0; i < all.size(); ++i)
        for (std::size_t j = 0; j < all.size(); ++j) {
            const SubgroupHNF big = all[i], small = all[j];
            const auto r = relative_invariants(big, small);
            const auto bs = elements(G, big), ss = elements(G, small);
            bool inside = true;
            for (int e = 0; e < G.size(); ++e)
                if (ss[static_cast<std::size_t>(e)] && !bs[static_cast<std::size_t>(e)]) inside = false;
            REQUIRE(r.has_value() == inside);
            if (inside) CHECK(r->exponents == oracle::relative_type(G, bs, ss));
        }
}
