#pragma once

// Finite-index lattices in Q_p^n, represented as subgroups of (Z/p^N)^n.
//
// A lattice L with p^N L0 <= L <= L0 (L0 = Z_p^n) is stored by its column
// Hermite normal form: an upper triangular matrix whose column i has the
// pivot p^{d_i} on the diagonal and whose entries in row j are reduced into
// [0, p^{d_j}). This form is unique, so matrix equality is lattice equality.

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace hecke::lattice {

using i64 = std::int64_t;
using u64 = std::uint64_t;

/// Decreasing exponent tuple with last entry 0: the translation class of the
/// invariant factors of a quotient L0/L, indexing K_p-double cosets.
class Cotype {
public:
    Cotype() = default;
    /// Validates that `exponents` is already normalized.
    explicit Cotype(std::vector<int> exponents);

    /// Sort decreasing and subtract the minimum.
    static Cotype normalize(std::span<const int> raw);
    static Cotype zero(int n) { return Cotype(std::vector<int>(static_cast<std::size_t>(n), 0)); }
    /// Parse "2,1,0" (any integers; the result is normalized).
    static Cotype parse(const std::string& text);

    const std::vector<int>& exponents() const { return exps_; }
    int rank() const { return static_cast<int>(exps_.size()); }
    int largest() const { return exps_.empty() ? 0 : exps_.front(); }
    int total() const;
    bool is_zero() const { return largest() == 0; }
    int operator[](int i) const { return exps_[static_cast<std::size_t>(i)]; }

    /// The class of -a: (a_1 - a_n, ..., a_1 - a_1).
    Cotype adjoint() const;

    /// max over permutations w of <w a, rho> with rho the half-sum of positive
    /// roots of PGL_n. Bookkeeping for truncated Hecke algebras only.
    double truncation_norm() const;

    std::string to_string() const;

    auto operator<=>(const Cotype&) const = default;

private:
    std::vector<int> exps_;
};

Cotype normalize_cotype(std::span<const int> raw);

/// Raw invariant factor exponents of a finite quotient, decreasing, without
/// the translation that Cotype applies.
struct InvariantFactors {
    std::vector<int> exponents;

    Cotype cotype() const { return Cotype::normalize(exponents); }
    int total() const;
    bool operator==(const InvariantFactors&) const = default;
};

/// The ambient module (Z/p^N)^n.
class PrimeContext {
public:
    /// Throws std::invalid_argument unless p is prime, n >= 1 and N >= 1;
    /// std::overflow_error if p^N does not fit in 62 bits.
    PrimeContext(i64 p, int n, int N);

    i64 p() const { return p_; }
    int n() const { return n_; }
    int N() const { return N_; }
    u64 modulus() const { return modulus_; }

    /// Same p and n, different working exponent.
    PrimeContext with_exponent(int N) const { return PrimeContext(p_, n_, N); }

    bool operator==(const PrimeContext&) const = default;

private:
    i64 p_;
    int n_;
    int N_;
    u64 modulus_;
};

/// A subgroup of (Z/p^N)^n in canonical column HNF.
class SubgroupHNF {
public:
    /// Takes an n x n row-major matrix already in canonical form; validates it.
    SubgroupHNF(PrimeContext ctx, std::vector<i64> matrix);
    /// Skips validation; the caller guarantees canonical form.
    static SubgroupHNF trusted(PrimeContext ctx, std::vector<i64> matrix);

    /// Canonical HNF of the subgroup generated by `columns` (each of length n,
    /// arbitrary integers, read modulo p^N).
    static SubgroupHNF from_generators(const PrimeContext& ctx, const std::vector<std::vector<i64>>& columns);
    static SubgroupHNF full(const PrimeContext& ctx);
    static SubgroupHNF zero(const PrimeContext& ctx);
    /// The subgroup diag(p^{e_0}, ..., p^{e_{n-1}}) L0 with 0 <= e_i <= N.
    static SubgroupHNF diagonal(const PrimeContext& ctx, std::span<const int> exponents);

    const PrimeContext& context() const { return ctx_; }
    int n() const { return ctx_.n(); }
    i64 entry(int row, int col) const { return m_[static_cast<std::size_t>(row * n() + col)]; }
    const std::vector<i64>& matrix() const { return m_; }
    std::vector<int> pivot_exponents() const;
    /// log_p of the index [L0 : L].
    int index_exponent() const;

    /// Membership of v (length n, read mod p^N).
    bool contains(std::span<const i64> v) const;
    bool contains(const SubgroupHNF& other) const;

    /// log_p |L|.
    int order_exponent() const { return n() * ctx_.N() - index_exponent(); }

    bool operator==(const SubgroupHNF&) const = default;
    auto operator<=>(const SubgroupHNF& o) const { return m_ <=> o.m_; }

private:
    struct Unchecked {};
    SubgroupHNF(Unchecked, PrimeContext ctx, std::vector<i64> matrix) : ctx_(ctx), m_(std::move(matrix)) {}

    PrimeContext ctx_;
    std::vector<i64> m_;
};

/// A stored batch of subgroups sharing one context.
class SubgroupList {
public:
    explicit SubgroupList(PrimeContext ctx) : ctx_(ctx) {}

    const PrimeContext& context() const { return ctx_; }
    std::size_t size() const { return flat_.size() / stride(); }
    bool empty() const { return flat_.empty(); }
    SubgroupHNF operator[](std::size_t i) const;
    /// Row-major HNF of item i.
    std::span<const i64> raw(std::size_t i) const {
        return {flat_.data() + i * stride(), stride()};
    }
    void push_back(std::span<const i64> m) { flat_.insert(flat_.end(), m.begin(), m.end()); }

private:
    std::size_t stride() const { return static_cast<std::size_t>(ctx_.n() * ctx_.n()); }
    PrimeContext ctx_;
    std::vector<i64> flat_;
};

/// Lattice ⊕ p^{t_i} Z_p with a basis of multiples of the standard basis.
struct AdaptedLattice {
    std::vector<int> t;

    bool is_base() const;
    auto operator<=>(const AdaptedLattice&) const = default;
};

struct EnumerationLimits {
    std::uint64_t max_subgroups = 10'000'000;
};

/// Closed-form number of lattices L <= L0 with L0/L of the given type, i.e.
/// deg(mu_a(p)). Used to size enumerations before they start.
u64 predicted_subgroup_count(i64 p, const Cotype& a);

/// Streams every subgroup whose quotient has invariant factors exactly `a`
/// (raw, last entry 0), in lexicographic order of (pivot exponents,
/// off-diagonal digits). Throws CapacityError if the predicted count exceeds
/// the ceiling and std::invalid_argument if N < a_1.
void for_each_subgroup(const PrimeContext& ctx, const Cotype& a,
                       const std::function<void(std::span<const i64>)>& visit,
                       const EnumerationLimits& limits = {});

SubgroupList enumerate_subgroups(const PrimeContext& ctx, const Cotype& a, const EnumerationLimits& limits = {});

/// Every subgroup of (Z/p^N)^n, same order convention.
SubgroupList enumerate_all_subgroups(const PrimeContext& ctx, const EnumerationLimits& limits = {});

/// Invariant factors of (Z/p^N)^n / L.
InvariantFactors quotient_invariants(const SubgroupHNF& L);
Cotype cotype_of(const SubgroupHNF& L);

/// Annihilator of L under the componentwise pairing modulo p^N.
SubgroupHNF dual_subgroup(const SubgroupHNF& L);

/// Invariant factors (N - a_n, ..., N - a_1) expected of the dual.
InvariantFactors dual_invariants(const InvariantFactors& f, int N);

/// g L for an n x n integer matrix g (row-major), invertible mod p.
SubgroupHNF transform(const std::vector<i64>& g, const SubgroupHNF& L);

/// Candidate adapted L1 with p^{a_1} L0 <= L <= L0 ∩ L1 and p^{b_1} L1 <= L:
/// all t in [-b_1, a_1]^n with sum |a| - |b|, lexicographically ordered.
std::vector<AdaptedLattice> enumerate_adapted_overlattices(const PrimeContext& ctx, const Cotype& a, const Cotype& b);

struct RelativePosition {
    bool contained = false;
    /// Invariant factors of L1/L exactly (no translation); empty if !contained.
    InvariantFactors raw;
    /// Translation class of `raw`.
    Cotype normalized;
    /// True when raw differs from its normalization (L <= p L1).
    bool translated = false;
};

/// Position of L (a lattice p^N L0 <= L <= L0) inside the adapted lattice L1.
/// Requires every t_i <= N. Non-containment is reported, not thrown.
RelativePosition relative_cotype(const SubgroupHNF& L, const AdaptedLattice& L1);

/// Invariant factors of big/small for lattices small <= big <= L0, both in
/// the same context; std::nullopt when small is not contained in big.
std::optional<InvariantFactors> relative_invariants(const SubgroupHNF& big, const SubgroupHNF& small);

} // namespace hecke::lattice

template <>
struct std::hash<hecke::lattice::Cotype> {
    std::size_t operator()(const hecke::lattice::Cotype& c) const noexcept {
        std::size_t h = 1469598103934665603ull;
        for (int e : c.exponents()) h = (h ^ static_cast<std::size_t>(e + 1)) * 1099511628211ull;
        return h;
    }
};
