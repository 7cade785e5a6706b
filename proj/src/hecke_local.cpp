#include "hecke/hecke_local.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <tuple>

namespace hecke::local {

using lattice::AdaptedLattice;
using lattice::SubgroupHNF;
using lattice::SubgroupList;

namespace {

PrimeContext working_context(const PrimeContext& ctx, int N) { return ctx.with_exponent(std::max(N, 1)); }

void require_rank(const PrimeContext& ctx, const Cotype& a) {
    if (a.rank() != ctx.n()) throw std::invalid_argument("cotype rank " + std::to_string(a.rank()) +
                                                         " does not match n = " + std::to_string(ctx.n()));
}

} // namespace

// ---------------------------------------------------------------- HeckeCombination

mpq_class HeckeCombination::coefficient(const Cotype& c) const {
    auto it = terms_.find(c);
    return it == terms_.end() ? mpq_class(0) : it->second;
}

void HeckeCombination::add(const Cotype& c, const mpq_class& q) {
    if (n_ == 0) n_ = c.rank();
    if (c.rank() != n_) throw std::invalid_argument("HeckeCombination: rank mismatch");
    if (q == 0) return;
    auto [it, fresh] = terms_.try_emplace(c, q);
    if (!fresh) {
        it->second += q;
        if (it->second == 0) terms_.erase(it);
    }
}

HeckeCombination& HeckeCombination::operator+=(const HeckeCombination& o) {
    for (const auto& [c, q] : o.terms_) add(c, q);
    return *this;
}

HeckeCombination& HeckeCombination::operator*=(const mpq_class& q) {
    if (q == 0) {
        terms_.clear();
        return *this;
    }
    for (auto& [c, v] : terms_) v *= q;
    return *this;
}

HeckeCombination HeckeCombination::adjoint() const {
    HeckeCombination out(n_);
    for (const auto& [c, q] : terms_) out.add(c.adjoint(), q);
    return out;
}

// ---------------------------------------------------------------- operations

Cotype adjoint_cotype(const Cotype& a) { return a.adjoint(); }

u64 degree(const PrimeContext& ctx, const Cotype& a, const EnumerationLimits& limits) {
    require_rank(ctx, a);
    u64 count = 0;
    lattice::for_each_subgroup(working_context(ctx, a.largest()), a, [&](std::span<const lattice::i64>) { ++count; },
                               limits);
    return count;
}

u64 torus_orbital_single(const PrimeContext& ctx, const Cotype& a) {
    require_rank(ctx, a);
    const PrimeContext w = working_context(ctx, a.largest());
    u64 count = 0;
    for (const auto& t : lattice::enumerate_adapted_overlattices(w, a, Cotype::zero(ctx.n())))
        if (std::all_of(t.t.begin(), t.t.end(), [](int x) { return x >= 0; }) &&
            lattice::cotype_of(SubgroupHNF::diagonal(w, t.t)) == a)
            ++count;
    return count;
}

OrbitalResult torus_orbital_pair(const PrimeContext& ctx, const Cotype& a, const Cotype& b,
                                 const EnumerationLimits& limits, Exec exec) {
    require_rank(ctx, a);
    require_rank(ctx, b);
    const PrimeContext w = working_context(ctx, a.largest() + b.largest());
    const SubgroupList family = lattice::enumerate_subgroups(w, a, limits);
    const auto cands = lattice::enumerate_adapted_overlattices(w, a, b);
    const auto counts = exec == Exec::serial ? kernels::count_pairs_serial(family, cands, b.exponents())
                                             : kernels::count_pairs_parallel(family, cands, b.exponents());
    OrbitalResult r;
    r.total = counts.total;
    r.diagonal = counts.base;
    r.off_diagonal = counts.total - counts.base;
    return r;
}

u64 convolution_at_identity(const PrimeContext& ctx, const Cotype& a, const Cotype& b,
                            const EnumerationLimits& limits) {
    require_rank(ctx, a);
    require_rank(ctx, b);
    const u64 closed = a == b ? degree(ctx, a, limits) : 0;
    const PrimeContext w = working_context(ctx, a.largest() + b.largest());
    const SubgroupList family = lattice::enumerate_subgroups(w, a, limits);
    const std::vector<AdaptedLattice> base{AdaptedLattice{std::vector<int>(static_cast<std::size_t>(ctx.n()), 0)}};
    const u64 counted = kernels::count_pairs_serial(family, base, b.exponents()).total;
    if (counted != closed)
        throw std::logic_error("convolution_at_identity: pair count " + std::to_string(counted) +
                               " disagrees with delta * degree = " + std::to_string(closed));
    return closed;
}

HeckeCombination hall_coefficients(const PrimeContext& ctx, const Cotype& a, const Cotype& b,
                                   const EnumerationLimits& limits) {
    require_rank(ctx, a);
    require_rank(ctx, b);
    const int n = ctx.n();
    const int top = a.largest() + b.largest();
    const PrimeContext w = working_context(ctx, top);
    const SubgroupList family = lattice::enumerate_subgroups(w, a, limits);
    const int mass = a.total() + b.total();

    HeckeCombination out(n);
    std::vector<int> c(static_cast<std::size_t>(n));
    std::function<void(int, int, int)> rec = [&](int i, int hi, int left) {
        if (i == n) {
            if (left != 0) return;
            const SubgroupHNF inner = SubgroupHNF::diagonal(w, c);
            u64 count = 0;
            for (std::size_t k = 0; k < family.size(); ++k) {
                const SubgroupHNF outer = family[k];
                const auto rel = lattice::relative_invariants(outer, inner);
                if (rel && rel->exponents == b.exponents()) ++count;
            }
            if (count) out.add(Cotype::normalize(c), mpq_class(static_cast<unsigned long>(count)));
            return;
        }
        for (int v = std::min(hi, left); v >= 0; --v) {
            if (v * (n - i) < left) break;
            c[static_cast<std::size_t>(i)] = v;
            rec(i + 1, v, left - v);
        }
    };
    rec(0, top, mass);
    return out;
}

u64 restricted_cotype_count(const PrimeContext& ctx, const Cotype& a, int m, Restriction mode,
                            const EnumerationLimits& limits) {
    require_rank(ctx, a);
    const int n = ctx.n();
    if (m < 1 || m > n) throw std::invalid_argument("restricted_cotype_count: m must lie in [1, n]");
    const int a1 = a.largest();
    if (mode == Restriction::contains && a1 == 0)
        throw std::invalid_argument("restricted_cotype_count: contains mode needs a_1 >= 1");
    const PrimeContext w = working_context(ctx, a1);
    const auto p = static_cast<lattice::i64>(ctx.p());
    lattice::i64 probe = 1;
    for (int k = 0; k + 1 < a1; ++k) probe *= p;
    u64 count = 0;
    std::vector<lattice::i64> v(static_cast<std::size_t>(n));
    lattice::for_each_subgroup(
        w, a,
        [&](std::span<const lattice::i64> h) {
            if (mode == Restriction::contained) {
                for (int i = 0; i < m; ++i)
                    for (int j = i; j < n; ++j)
                        if (h[static_cast<std::size_t>(i * n + j)] % p != 0) return;
            } else {
                const SubgroupHNF L = SubgroupHNF::trusted(w, std::vector<lattice::i64>(h.begin(), h.end()));
                for (int i = 0; i < m; ++i) {
                    std::fill(v.begin(), v.end(), 0);
                    v[static_cast<std::size_t>(i)] = probe;
                    if (!L.contains(v)) return;
                }
            }
            ++count;
        },
        limits);
    return count;
}

KeyBound key_bound_statistic(const PrimeContext& ctx, const Cotype& a, const Cotype& b,
                             const EnumerationLimits& limits, Exec exec) {
    KeyBound kb;
    kb.orbital = torus_orbital_pair(ctx, a, b, limits, exec);
    kb.degree_a = degree(ctx, a, limits);
    kb.degree_b = degree(ctx, b, limits);
    const mpz_class scaled = mpz_class(static_cast<unsigned long>(ctx.p())) *
                             mpz_class(static_cast<unsigned long>(kb.orbital.off_diagonal));
    kb.squared = mpq_class(scaled * scaled, mpz_class(static_cast<unsigned long>(kb.degree_a)) *
                                                mpz_class(static_cast<unsigned long>(kb.degree_b)));
    kb.squared.canonicalize();
    kb.value = std::sqrt(kb.squared.get_d());
    return kb;
}

std::vector<Cotype> cotypes_up_to(int n, int max_entry) {
    std::vector<Cotype> out;
    std::vector<int> e(static_cast<std::size_t>(n), 0);
    std::function<void(int, int)> rec = [&](int i, int hi) {
        if (i == n - 1) {
            e[static_cast<std::size_t>(i)] = 0;
            out.emplace_back(e);
            return;
        }
        for (int v = 0; v <= hi; ++v) {
            e[static_cast<std::size_t>(i)] = v;
            rec(i + 1, v);
        }
    };
    if (n >= 1) rec(0, max_entry);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<SweepRow> key_bound_sweep(const std::vector<long>& primes, int n, int max_entry,
                                      const EnumerationLimits& limits, Exec exec) {
    const auto cots = cotypes_up_to(n, max_entry);
    std::vector<SweepRow> rows;
    for (const auto& a : cots)
        for (const auto& b : cots)
            for (long p : primes) rows.push_back(SweepRow{p, a, b, {}});
    const auto fill = [&](std::size_t i) {
        auto& r = rows[i];
        r.bound = key_bound_statistic(PrimeContext(r.p, n, 1), r.a, r.b, limits, Exec::serial);
    };
    if (exec == Exec::serial) {
        for (std::size_t i = 0; i < rows.size(); ++i) fill(i);
    } else {
        // Largest primes last in each block; dynamic scheduling balances them.
        const long count = static_cast<long>(rows.size());
        std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
        for (long i = 0; i < count; ++i) {
            try {
                fill(static_cast<std::size_t>(i));
            } catch (...) {
#pragma omp critical(hecke_sweep_failure)
                if (!failure) failure = std::current_exception();
            }
        }
        if (failure) std::rethrow_exception(failure);
    }
    return rows;
}

} // namespace hecke::local
