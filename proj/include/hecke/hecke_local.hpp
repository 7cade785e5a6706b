#pragma once

// Elementary Hecke operators tau(a, p) on PGL_n(Q_p): degrees, torus orbital
// integrals as lattice-pair counts, Hall structure constants, and the
// normalized off-diagonal statistic.
//
// Measures give K_p and the compact part of the diagonal torus volume 1, so
// every integral here is an integer count.

#include "hecke/padic_lattice.hpp"
#include "hecke/parallel.hpp"

#include <gmpxx.h>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace hecke::local {

using lattice::Cotype;
using lattice::EnumerationLimits;
using lattice::PrimeContext;
using lattice::u64;

/// Finite formal sum of double cosets with exact rational coefficients.
class HeckeCombination {
public:
    explicit HeckeCombination(int n = 0) : n_(n) {}

    int rank() const { return n_; }
    const std::map<Cotype, mpq_class>& terms() const { return terms_; }
    mpq_class coefficient(const Cotype& c) const;

    /// Adds q * tau(c); drops the term if the coefficient becomes zero.
    void add(const Cotype& c, const mpq_class& q);
    HeckeCombination& operator+=(const HeckeCombination& o);
    HeckeCombination& operator*=(const mpq_class& q);
    /// Coefficientwise conjugation: tau(c) -> tau(c)*.
    HeckeCombination adjoint() const;

    bool operator==(const HeckeCombination& o) const { return n_ == o.n_ && terms_ == o.terms_; }

private:
    int n_;
    std::map<Cotype, mpq_class> terms_;
};

struct OrbitalResult {
    u64 total = 0;
    u64 diagonal = 0;
    u64 off_diagonal = 0;
};

Cotype adjoint_cotype(const Cotype& a);

/// Number of left cosets in K mu_a(p) K, by enumeration. Only p and n of the
/// context are used.
u64 degree(const PrimeContext& ctx, const Cotype& a, const EnumerationLimits& limits = {});

/// Number of adapted lattices L <= L0 with L0/L of type a.
u64 torus_orbital_single(const PrimeContext& ctx, const Cotype& a);

/// Integral of tau(a, p) * tau(-b, p) over the diagonal torus, as the number
/// of pairs (L1 adapted, L <= L0 ∩ L1) with L0/L of type a and L1/L of type b
/// exactly. The diagonal part is the L1 = L0 share.
OrbitalResult torus_orbital_pair(const PrimeContext& ctx, const Cotype& a, const Cotype& b,
                                 const EnumerationLimits& limits = {}, Exec exec = Exec::parallel);

/// (tau(a) * tau(-b))(1) = delta_{a,b} deg(a). Cross-checks the closed value
/// against the L1 = L0 pair count and throws std::logic_error on mismatch.
u64 convolution_at_identity(const PrimeContext& ctx, const Cotype& a, const Cotype& b,
                            const EnumerationLimits& limits = {});

/// tau(a) * tau(b) = sum_c h_c tau(c), with h_c counted directly as the
/// number of L' of type a over one fixed L'' of type c with L'/L'' of type b.
HeckeCombination hall_coefficients(const PrimeContext& ctx, const Cotype& a, const Cotype& b,
                                   const EnumerationLimits& limits = {});

enum class Restriction {
    /// L lies in (p Z_p)^m ⊕ Z_p^{n-m}.
    contained,
    /// L contains (p^{a_1 - 1} Z_p)^m ⊕ 0.
    contains,
};

u64 restricted_cotype_count(const PrimeContext& ctx, const Cotype& a, int m, Restriction mode,
                            const EnumerationLimits& limits = {});

struct KeyBound {
    OrbitalResult orbital;
    u64 degree_a = 0;
    u64 degree_b = 0;
    /// (p * off_diagonal)^2 / (deg a * deg b), exact.
    mpq_class squared;
    /// Its square root.
    double value = 0;
};

KeyBound key_bound_statistic(const PrimeContext& ctx, const Cotype& a, const Cotype& b,
                             const EnumerationLimits& limits = {}, Exec exec = Exec::parallel);

struct SweepRow {
    long p = 0;
    Cotype a;
    Cotype b;
    KeyBound bound;
};

/// Key-bound statistic for every ordered pair of normalized cotypes of rank
/// n with entries <= max_entry and every listed prime. Rows are ordered by
/// (a, b, p) regardless of scheduling.
std::vector<SweepRow> key_bound_sweep(const std::vector<long>& primes, int n, int max_entry,
                                      const EnumerationLimits& limits = {}, Exec exec = Exec::parallel);

/// All normalized cotypes of rank n with entries <= max_entry, ascending.
std::vector<Cotype> cotypes_up_to(int n, int max_entry);

namespace kernels {

/// Pair counts for a fixed family of lattices (row-major HNFs of cotype a in
/// a context with N >= a_1) against candidate adapted lattices.
struct PairCounts {
    u64 total = 0;
    u64 base = 0;
};

PairCounts count_pairs_serial(const lattice::SubgroupList& family, const std::vector<lattice::AdaptedLattice>& cands,
                              const std::vector<int>& b);
PairCounts count_pairs_parallel(const lattice::SubgroupList& family,
                                const std::vector<lattice::AdaptedLattice>& cands, const std::vector<int>& b);

} // namespace kernels

} // namespace hecke::local
