#include "hecke/hecke_local.hpp"

#include <algorithm>
#include <exception>

namespace hecke::local::kernels {

using lattice::AdaptedLattice;
using lattice::i64;
using lattice::SubgroupHNF;
using lattice::SubgroupList;

namespace {

// Pairs contributed by one lattice. A candidate L1 can only qualify if
// p^{b_1} L1 <= L, which is a cheap membership test on its basis.
PairCounts count_one(const SubgroupHNF& L, const std::vector<AdaptedLattice>& cands, const std::vector<int>& b) {
    const int n = L.n();
    const int b1 = b.front();
    const i64 p = L.context().p();
    const int N = L.context().N();
    PairCounts out;
    std::vector<i64> probe(static_cast<std::size_t>(n));
    for (const auto& c : cands) {
        bool ok = true;
        for (int i = 0; i < n && ok; ++i) {
            const int e = b1 + c.t[static_cast<std::size_t>(i)];
            if (e >= N) continue;
            i64 v = 1;
            for (int k = 0; k < e; ++k) v *= p;
            std::fill(probe.begin(), probe.end(), 0);
            probe[static_cast<std::size_t>(i)] = v;
            ok = L.contains(probe);
        }
        if (!ok) continue;
        const auto rel = lattice::relative_cotype(L, c);
        if (!rel.contained || rel.raw.exponents != b) continue;
        ++out.total;
        if (c.is_base()) ++out.base;
    }
    return out;
}

} // namespace

PairCounts count_pairs_serial(const SubgroupList& family, const std::vector<AdaptedLattice>& cands,
                              const std::vector<int>& b) {
    PairCounts acc;
    for (std::size_t i = 0; i < family.size(); ++i) {
        const auto one = count_one(family[i], cands, b);
        acc.total += one.total;
        acc.base += one.base;
    }
    return acc;
}

PairCounts count_pairs_parallel(const SubgroupList& family, const std::vector<AdaptedLattice>& cands,
                                const std::vector<int>& b) {
    u64 total = 0, base = 0;
    const long count = static_cast<long>(family.size());
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 64) reduction(+ : total, base)
    for (long i = 0; i < count; ++i) {
        try {
            const auto one = count_one(family[static_cast<std::size_t>(i)], cands, b);
            total += one.total;
            base += one.base;
        } catch (...) {
#pragma omp critical(hecke_pair_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return {total, base};
}

} // namespace hecke::local::kernels
