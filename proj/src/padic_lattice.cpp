#include "hecke/padic_lattice.hpp"

#include "hecke/errors.hpp"
#include "hecke/zp.hpp"

#include <gmpxx.h>

#include <algorithm>
#include <cctype>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace hecke::lattice {

namespace {

using zp::checked_pow;

bool is_normalized(const std::vector<int>& e) {
    if (e.empty()) return false;
    for (std::size_t i = 1; i < e.size(); ++i)
        if (e[i] > e[i - 1]) return false;
    return e.back() == 0;
}

// Saturating u64 multiply.
u64 sat_mul(u64 a, u64 b) {
    if (a != 0 && b > std::numeric_limits<u64>::max() / a) return std::numeric_limits<u64>::max();
    return a * b;
}

u64 sat_pow(u64 p, long e) {
    u64 r = 1;
    for (long i = 0; i < e; ++i) r = sat_mul(r, p);
    return r;
}

// Gaussian binomial [m choose k]_p, saturating.
u64 gaussian_binomial(u64 p, int m, int k) {
    if (k < 0 || k > m) return 0;
    mpz_class num = 1, den = 1;
    mpz_class pz = static_cast<unsigned long>(p);
    for (int i = 0; i < k; ++i) {
        mpz_class a, b;
        mpz_pow_ui(a.get_mpz_t(), pz.get_mpz_t(), static_cast<unsigned long>(m - i));
        mpz_pow_ui(b.get_mpz_t(), pz.get_mpz_t(), static_cast<unsigned long>(i + 1));
        num *= a - 1;
        den *= b - 1;
    }
    mpz_class q = num / den;
    if (q > mpz_class(std::numeric_limits<unsigned long>::max())) return std::numeric_limits<u64>::max();
    return q.get_ui();
}

// Back-substitution membership of v in the lattice spanned by the first
// `k` columns of an upper triangular HNF (row-major, stride n), mod `mod`.
bool prefix_contains(const i64* m, int n, int k, std::vector<u64>& v, u64 mod) {
    for (int i = k - 1; i >= 0; --i) {
        const u64 piv = static_cast<u64>(m[i * n + i]);
        const u64 vi = v[static_cast<std::size_t>(i)];
        if (vi == 0) continue;
        if (piv >= mod || vi % piv != 0) return false;
        const u64 c = vi / piv;
        for (int j = 0; j < i; ++j) {
            const u64 x = static_cast<u64>(m[j * n + i]);
            if (x != 0) v[static_cast<std::size_t>(j)] = zp::sub_mod(v[static_cast<std::size_t>(j)], zp::mul_mod(c, x, mod), mod);
        }
        v[static_cast<std::size_t>(i)] = 0;
    }
    return true;
}

// Checks that p^{cap - d_k} times the strictly-upper part of column k lies in
// the span of the earlier columns, for every k. This is the condition that
// the HNF describes a lattice containing p^cap L0.
bool column_closed(const i64* m, int n, int k, u64 p, int d_k, int cap, u64 mod) {
    if (k == 0) return true;
    const u64 scale = checked_pow(p, cap - d_k);
    std::vector<u64> v(static_cast<std::size_t>(k));
    bool any = false;
    for (int j = 0; j < k; ++j) {
        v[static_cast<std::size_t>(j)] = zp::mul_mod(static_cast<u64>(m[j * n + k]), scale, mod);
        any = any || v[static_cast<std::size_t>(j)] != 0;
    }
    return !any || prefix_contains(m, n, k, v, mod);
}

std::vector<u64> reduced_copy(const std::vector<i64>& m, u64 mod) {
    std::vector<u64> r(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) r[i] = zp::reduce(m[i], mod);
    return r;
}

// Exact solution X of B X = R for upper triangular integer B, with R and X
// square and row-major. Throws if X is not integral.
std::vector<mpz_class> solve_upper(const std::vector<i64>& B, const std::vector<mpz_class>& R, int n) {
    std::vector<mpz_class> X(static_cast<std::size_t>(n * n));
    for (int col = 0; col < n; ++col) {
        for (int i = n - 1; i >= 0; --i) {
            mpz_class acc = R[static_cast<std::size_t>(i * n + col)];
            for (int j = i + 1; j < n; ++j)
                acc -= mpz_class(static_cast<long>(B[static_cast<std::size_t>(i * n + j)])) *
                       X[static_cast<std::size_t>(j * n + col)];
            const mpz_class piv(static_cast<long>(B[static_cast<std::size_t>(i * n + i)]));
            if (!mpz_divisible_p(acc.get_mpz_t(), piv.get_mpz_t()))
                throw std::logic_error("solve_upper: non-integral solution");
            mpz_divexact(acc.get_mpz_t(), acc.get_mpz_t(), piv.get_mpz_t());
            X[static_cast<std::size_t>(i * n + col)] = acc;
        }
    }
    return X;
}

u64 mpz_mod_u64(const mpz_class& x, u64 mod) {
    mpz_class r;
    mpz_fdiv_r(r.get_mpz_t(), x.get_mpz_t(), mpz_class(static_cast<unsigned long>(mod)).get_mpz_t());
    return r.get_ui();
}

// Shared DFS over canonical HNFs with pivot exponents bounded by `cap`.
// `pivots` visits allowed pivot vectors in lexicographic order; `leaf` sees
// each closed HNF.
class HnfWalker {
public:
    HnfWalker(const PrimeContext& ctx, int cap, const std::function<void(std::span<const i64>)>& leaf)
        : ctx_(ctx), n_(ctx.n()), cap_(cap), p_(static_cast<u64>(ctx.p())), leaf_(leaf),
          m_(static_cast<std::size_t>(n_ * n_), 0), d_(static_cast<std::size_t>(n_)) {}

    void run(const std::vector<int>& d) {
        for (int i = 0; i < n_; ++i) d_[static_cast<std::size_t>(i)] = d[static_cast<std::size_t>(i)];
        std::fill(m_.begin(), m_.end(), 0);
        column(0);
    }

private:
    void column(int k) {
        if (k == n_) {
            leaf_(m_);
            return;
        }
        const int dk = d_[static_cast<std::size_t>(k)];
        m_[static_cast<std::size_t>(k * n_ + k)] = static_cast<i64>(checked_pow(p_, dk));
        digits(k, 0);
        for (int j = 0; j < k; ++j) m_[static_cast<std::size_t>(j * n_ + k)] = 0;
    }

    void digits(int k, int j) {
        if (j == k) {
            if (column_closed(m_.data(), n_, k, p_, d_[static_cast<std::size_t>(k)], cap_, ctx_.modulus()))
                column(k + 1);
            return;
        }
        const i64 range = static_cast<i64>(checked_pow(p_, d_[static_cast<std::size_t>(j)]));
        for (i64 x = 0; x < range; ++x) {
            m_[static_cast<std::size_t>(j * n_ + k)] = x;
            digits(k, j + 1);
        }
    }

    const PrimeContext& ctx_;
    int n_;
    int cap_;
    u64 p_;
    const std::function<void(std::span<const i64>)>& leaf_;
    std::vector<i64> m_;
    std::vector<int> d_;
};

// All vectors in [0, cap]^n with the given sum (or any sum if sum < 0), lex.
void for_each_pivot_vector(int n, int cap, int sum, const std::function<void(const std::vector<int>&)>& f) {
    std::vector<int> d(static_cast<std::size_t>(n), 0);
    std::function<void(int, int)> rec = [&](int i, int used) {
        if (i == n) {
            if (sum < 0 || used == sum) f(d);
            return;
        }
        for (int v = 0; v <= cap; ++v) {
            if (sum >= 0 && used + v > sum) break;
            d[static_cast<std::size_t>(i)] = v;
            rec(i + 1, used + v);
        }
    };
    rec(0, 0);
}

void partitions_bounded(int n, int cap, const std::function<void(const std::vector<int>&)>& f) {
    std::vector<int> a(static_cast<std::size_t>(n), 0);
    std::function<void(int, int)> rec = [&](int i, int hi) {
        if (i == n) {
            f(a);
            return;
        }
        for (int v = 0; v <= hi; ++v) {
            a[static_cast<std::size_t>(i)] = v;
            rec(i + 1, v);
        }
    };
    rec(0, cap);
}

} // namespace

// ---------------------------------------------------------------- Cotype

Cotype::Cotype(std::vector<int> exponents) : exps_(std::move(exponents)) {
    if (!is_normalized(exps_)) throw std::invalid_argument("Cotype: exponents must be decreasing with last entry 0");
}

Cotype Cotype::normalize(std::span<const int> raw) {
    if (raw.empty()) throw std::invalid_argument("normalize_cotype: empty tuple");
    std::vector<int> e(raw.begin(), raw.end());
    std::sort(e.begin(), e.end(), std::greater<>());
    const int lo = e.back();
    for (int& x : e) x -= lo;
    return Cotype(std::move(e));
}

Cotype Cotype::parse(const std::string& text) {
    std::vector<int> e;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        std::size_t used = 0;
        int v = 0;
        try {
            v = std::stoi(tok, &used);
        } catch (const std::exception&) {
            throw std::invalid_argument("cotype: bad entry '" + tok + "'");
        }
        while (used < tok.size() && std::isspace(static_cast<unsigned char>(tok[used]))) ++used;
        if (used != tok.size()) throw std::invalid_argument("cotype: bad entry '" + tok + "'");
        e.push_back(v);
    }
    if (e.empty()) throw std::invalid_argument("cotype: empty");
    return normalize(e);
}

int Cotype::total() const { return std::accumulate(exps_.begin(), exps_.end(), 0); }

Cotype Cotype::adjoint() const {
    std::vector<int> neg(exps_.size());
    std::transform(exps_.begin(), exps_.end(), neg.begin(), [](int x) { return -x; });
    return normalize(neg);
}

double Cotype::truncation_norm() const {
    // Rearrangement: pair the decreasing tuple with decreasing rho.
    const int n = rank();
    double s = 0;
    for (int i = 0; i < n; ++i) s += exps_[static_cast<std::size_t>(i)] * (0.5 * (n - 1) - i);
    return s;
}

std::string Cotype::to_string() const {
    std::string s;
    for (std::size_t i = 0; i < exps_.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(exps_[i]);
    }
    return s;
}

Cotype normalize_cotype(std::span<const int> raw) { return Cotype::normalize(raw); }

int InvariantFactors::total() const { return std::accumulate(exponents.begin(), exponents.end(), 0); }

// ---------------------------------------------------------------- PrimeContext

PrimeContext::PrimeContext(i64 p, int n, int N) : p_(p), n_(n), N_(N), modulus_(0) {
    if (!zp::is_prime(p)) throw std::invalid_argument("PrimeContext: p must be prime");
    if (n < 1) throw std::invalid_argument("PrimeContext: n must be positive");
    if (N < 1) throw std::invalid_argument("PrimeContext: N must be positive");
    modulus_ = checked_pow(static_cast<u64>(p), N);
}

// ---------------------------------------------------------------- SubgroupHNF

SubgroupHNF SubgroupHNF::trusted(PrimeContext ctx, std::vector<i64> matrix) {
    return SubgroupHNF(Unchecked{}, ctx, std::move(matrix));
}

SubgroupHNF::SubgroupHNF(PrimeContext ctx, std::vector<i64> matrix) : ctx_(ctx), m_(std::move(matrix)) {
    const int n = ctx_.n();
    if (m_.size() != static_cast<std::size_t>(n * n)) throw std::invalid_argument("SubgroupHNF: wrong matrix size");
    const u64 p = static_cast<u64>(ctx_.p());
    std::vector<i64> pivots(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const i64 piv = entry(i, i);
        u64 x = piv > 0 ? static_cast<u64>(piv) : 0;
        int d = 0;
        while (x > 1 && x % p == 0) {
            x /= p;
            ++d;
        }
        if (x != 1 || d > ctx_.N()) throw std::invalid_argument("SubgroupHNF: diagonal entries must be p^d with d <= N");
        pivots[static_cast<std::size_t>(i)] = piv;
        for (int j = 0; j < i; ++j)
            if (entry(i, j) != 0) throw std::invalid_argument("SubgroupHNF: matrix must be upper triangular");
        for (int j = i + 1; j < n; ++j)
            if (entry(i, j) < 0 || entry(i, j) >= piv)
                throw std::invalid_argument("SubgroupHNF: off-diagonal entries must be reduced by the row pivot");
    }
    const auto d = pivot_exponents();
    for (int k = 0; k < n; ++k)
        if (!column_closed(m_.data(), n, k, p, d[static_cast<std::size_t>(k)], ctx_.N(), ctx_.modulus()))
            throw std::invalid_argument("SubgroupHNF: columns do not span a subgroup in canonical form");
}

SubgroupHNF SubgroupHNF::from_generators(const PrimeContext& ctx, const std::vector<std::vector<i64>>& columns) {
    const int n = ctx.n();
    const u64 mod = ctx.modulus();
    const u64 p = static_cast<u64>(ctx.p());
    const int N = ctx.N();
    std::vector<std::vector<u64>> gens;
    gens.reserve(columns.size() + static_cast<std::size_t>(n));
    for (const auto& c : columns) {
        if (c.size() != static_cast<std::size_t>(n)) throw std::invalid_argument("from_generators: wrong vector length");
        std::vector<u64> g(static_cast<std::size_t>(n));
        bool nz = false;
        for (int i = 0; i < n; ++i) {
            g[static_cast<std::size_t>(i)] = zp::reduce(c[static_cast<std::size_t>(i)], mod);
            nz = nz || g[static_cast<std::size_t>(i)] != 0;
        }
        if (nz) gens.push_back(std::move(g));
    }

    std::vector<i64> m(static_cast<std::size_t>(n * n), 0);
    for (int i = n - 1; i >= 0; --i) {
        const auto ui = static_cast<std::size_t>(i);
        int best_v = N;
        std::size_t best = gens.size();
        for (std::size_t g = 0; g < gens.size(); ++g) {
            const int v = zp::valuation(gens[g][ui], p, N);
            if (v < best_v) {
                best_v = v;
                best = g;
                if (v == 0) break;
            }
        }
        if (best == gens.size()) {
            m[ui * static_cast<std::size_t>(n) + ui] = static_cast<i64>(mod);
            continue;
        }
        std::vector<u64> piv = std::move(gens[best]);
        gens.erase(gens.begin() + static_cast<std::ptrdiff_t>(best));
        const u64 pv = checked_pow(p, best_v);
        const u64 unit_inv = zp::inverse_mod(piv[ui] / pv, mod);
        for (auto& x : piv) x = zp::mul_mod(x, unit_inv, mod);
        for (auto& g : gens) {
            if (g[ui] == 0) continue;
            const u64 f = g[ui] / pv;
            for (int r = 0; r <= i; ++r) {
                const auto ur = static_cast<std::size_t>(r);
                g[ur] = zp::sub_mod(g[ur], zp::mul_mod(f, piv[ur], mod), mod);
            }
        }
        // p^{N-v} times the pivot generator vanishes in row i but not above.
        if (best_v > 0) {
            const u64 s = checked_pow(p, N - best_v);
            std::vector<u64> extra(static_cast<std::size_t>(n), 0);
            bool nz = false;
            for (int r = 0; r < i; ++r) {
                extra[static_cast<std::size_t>(r)] = zp::mul_mod(s, piv[static_cast<std::size_t>(r)], mod);
                nz = nz || extra[static_cast<std::size_t>(r)] != 0;
            }
            if (nz) gens.push_back(std::move(extra));
        }
        gens.erase(std::remove_if(gens.begin(), gens.end(),
                                  [](const std::vector<u64>& g) {
                                      return std::all_of(g.begin(), g.end(), [](u64 x) { return x == 0; });
                                  }),
                   gens.end());
        for (int r = 0; r < i; ++r)
            m[static_cast<std::size_t>(r * n + i)] = static_cast<i64>(piv[static_cast<std::size_t>(r)]);
        m[ui * static_cast<std::size_t>(n) + ui] = static_cast<i64>(pv);
    }

    // Reduce row j of every later column by the row pivot, bottom row first.
    for (int j = n - 1; j >= 0; --j) {
        const u64 piv = static_cast<u64>(m[static_cast<std::size_t>(j * n + j)]);
        for (int k = j + 1; k < n; ++k) {
            const u64 x = static_cast<u64>(m[static_cast<std::size_t>(j * n + k)]);
            const u64 q = x / piv;
            if (q == 0) continue;
            m[static_cast<std::size_t>(j * n + k)] = static_cast<i64>(x - q * piv);
            for (int r = 0; r < j; ++r) {
                const auto idx = static_cast<std::size_t>(r * n + k);
                const u64 sub = zp::mul_mod(q, static_cast<u64>(m[static_cast<std::size_t>(r * n + j)]), mod);
                m[idx] = static_cast<i64>(zp::sub_mod(static_cast<u64>(m[idx]), sub, mod));
            }
        }
    }
    return trusted(ctx, std::move(m));
}

SubgroupHNF SubgroupHNF::full(const PrimeContext& ctx) {
    std::vector<int> e(static_cast<std::size_t>(ctx.n()), 0);
    return diagonal(ctx, e);
}

SubgroupHNF SubgroupHNF::zero(const PrimeContext& ctx) {
    const int n = ctx.n();
    std::vector<i64> m(static_cast<std::size_t>(n * n), 0);
    for (int i = 0; i < n; ++i) m[static_cast<std::size_t>(i * n + i)] = static_cast<i64>(ctx.modulus());
    return trusted(ctx, std::move(m));
}

SubgroupHNF SubgroupHNF::diagonal(const PrimeContext& ctx, std::span<const int> exponents) {
    const int n = ctx.n();
    if (exponents.size() != static_cast<std::size_t>(n)) throw std::invalid_argument("diagonal: wrong length");
    std::vector<i64> m(static_cast<std::size_t>(n * n), 0);
    for (int i = 0; i < n; ++i) {
        const int e = exponents[static_cast<std::size_t>(i)];
        if (e < 0 || e > ctx.N()) throw std::invalid_argument("diagonal: exponent out of range [0, N]");
        m[static_cast<std::size_t>(i * n + i)] = static_cast<i64>(checked_pow(static_cast<u64>(ctx.p()), e));
    }
    return trusted(ctx, std::move(m));
}

std::vector<int> SubgroupHNF::pivot_exponents() const {
    std::vector<int> d(static_cast<std::size_t>(n()));
    const u64 p = static_cast<u64>(ctx_.p());
    for (int i = 0; i < n(); ++i) {
        u64 x = static_cast<u64>(entry(i, i));
        int e = 0;
        while (x > 1) {
            x /= p;
            ++e;
        }
        d[static_cast<std::size_t>(i)] = e;
    }
    return d;
}

int SubgroupHNF::index_exponent() const {
    const auto d = pivot_exponents();
    return std::accumulate(d.begin(), d.end(), 0);
}

bool SubgroupHNF::contains(std::span<const i64> v) const {
    if (v.size() != static_cast<std::size_t>(n())) throw std::invalid_argument("contains: wrong vector length");
    std::vector<u64> w(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) w[i] = zp::reduce(v[i], ctx_.modulus());
    return prefix_contains(m_.data(), n(), n(), w, ctx_.modulus());
}

bool SubgroupHNF::contains(const SubgroupHNF& other) const {
    if (!(other.ctx_ == ctx_)) throw std::invalid_argument("contains: context mismatch");
    const int k = n();
    std::vector<i64> col(static_cast<std::size_t>(k));
    for (int c = 0; c < k; ++c) {
        for (int r = 0; r < k; ++r) col[static_cast<std::size_t>(r)] = other.entry(r, c);
        if (!contains(col)) return false;
    }
    return true;
}

SubgroupHNF SubgroupList::operator[](std::size_t i) const {
    auto r = raw(i);
    return SubgroupHNF::trusted(ctx_, std::vector<i64>(r.begin(), r.end()));
}

bool AdaptedLattice::is_base() const {
    return std::all_of(t.begin(), t.end(), [](int x) { return x == 0; });
}

// ---------------------------------------------------------------- enumeration

namespace {

// Number of L with L0/L of the given (raw, decreasing) type.
u64 count_of_type(i64 p, const std::vector<int>& a) {
    const int n = static_cast<int>(a.size());
    const int a1 = a.empty() ? 0 : a.front();
    // Conjugate partition, padded with a trailing zero.
    std::vector<int> conj(static_cast<std::size_t>(a1 + 2), 0);
    for (int i = 1; i <= a1; ++i)
        conj[static_cast<std::size_t>(i)] = static_cast<int>(std::count_if(a.begin(), a.end(), [i](int x) { return x >= i; }));
    u64 total = 1;
    const u64 up = static_cast<u64>(p);
    for (int i = 1; i <= a1; ++i) {
        const int li = conj[static_cast<std::size_t>(i)];
        const int ln = conj[static_cast<std::size_t>(i + 1)];
        total = sat_mul(total, sat_pow(up, static_cast<long>(ln) * (n - li)));
        total = sat_mul(total, gaussian_binomial(up, n - ln, li - ln));
    }
    return total;
}

} // namespace

u64 predicted_subgroup_count(i64 p, const Cotype& a) { return count_of_type(p, a.exponents()); }

void for_each_subgroup(const PrimeContext& ctx, const Cotype& a,
                       const std::function<void(std::span<const i64>)>& visit, const EnumerationLimits& limits) {
    if (a.rank() != ctx.n()) throw std::invalid_argument("enumerate_subgroups: cotype rank differs from n");
    if (a.largest() > ctx.N()) throw std::invalid_argument("enumerate_subgroups: N is smaller than the largest exponent");
    const u64 predicted = predicted_subgroup_count(ctx.p(), a);
    if (predicted > limits.max_subgroups)
        throw CapacityError("enumerate_subgroups: " + std::to_string(predicted) + " subgroups exceed the ceiling of " +
                            std::to_string(limits.max_subgroups));
    const int n = ctx.n();
    const u64 p = static_cast<u64>(ctx.p());
    const int a1 = a.largest();
    const std::vector<int>& want = a.exponents();
    std::vector<u64> work(static_cast<std::size_t>(n * n));
    std::function<void(std::span<const i64>)> leaf = [&](std::span<const i64> m) {
        for (std::size_t i = 0; i < m.size(); ++i) work[i] = zp::reduce(m[i], ctx.modulus());
        if (zp::snf_exponents(work, n, p, ctx.N()) == want) visit(m);
    };
    HnfWalker walker(ctx, a1, leaf);
    for_each_pivot_vector(n, a1, a.total(), [&](const std::vector<int>& d) { walker.run(d); });
}

SubgroupList enumerate_subgroups(const PrimeContext& ctx, const Cotype& a, const EnumerationLimits& limits) {
    SubgroupList out(ctx);
    for_each_subgroup(ctx, a, [&](std::span<const i64> m) { out.push_back(m); }, limits);
    return out;
}

SubgroupList enumerate_all_subgroups(const PrimeContext& ctx, const EnumerationLimits& limits) {
    u64 predicted = 0;
    partitions_bounded(ctx.n(), ctx.N(), [&](const std::vector<int>& a) {
        const u64 c = count_of_type(ctx.p(), a);
        predicted = c > std::numeric_limits<u64>::max() - predicted ? std::numeric_limits<u64>::max() : predicted + c;
    });
    if (predicted > limits.max_subgroups)
        throw CapacityError("enumerate_all_subgroups: " + std::to_string(predicted) +
                            " subgroups exceed the ceiling of " + std::to_string(limits.max_subgroups));
    SubgroupList out(ctx);
    std::function<void(std::span<const i64>)> leaf = [&](std::span<const i64> m) { out.push_back(m); };
    HnfWalker walker(ctx, ctx.N(), leaf);
    for_each_pivot_vector(ctx.n(), ctx.N(), -1, [&](const std::vector<int>& d) { walker.run(d); });
    return out;
}

// ---------------------------------------------------------------- invariants

InvariantFactors quotient_invariants(const SubgroupHNF& L) {
    const auto& ctx = L.context();
    return {zp::snf_exponents(reduced_copy(L.matrix(), ctx.modulus()), ctx.n(), static_cast<u64>(ctx.p()), ctx.N())};
}

Cotype cotype_of(const SubgroupHNF& L) { return quotient_invariants(L).cotype(); }

SubgroupHNF dual_subgroup(const SubgroupHNF& L) {
    const auto& ctx = L.context();
    const int n = ctx.n();
    const mpz_class pN(static_cast<unsigned long>(ctx.modulus()));
    std::vector<mpz_class> R(static_cast<std::size_t>(n * n), 0);
    for (int i = 0; i < n; ++i) R[static_cast<std::size_t>(i * n + i)] = pN;
    // X = p^N B^{-1}; the annihilator is spanned by the rows of X.
    const auto X = solve_upper(L.matrix(), R, n);
    std::vector<std::vector<i64>> gens(static_cast<std::size_t>(n), std::vector<i64>(static_cast<std::size_t>(n)));
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c)
            gens[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] =
                static_cast<i64>(mpz_mod_u64(X[static_cast<std::size_t>(r * n + c)], ctx.modulus()));
    return SubgroupHNF::from_generators(ctx, gens);
}

InvariantFactors dual_invariants(const InvariantFactors& f, int N) {
    InvariantFactors out;
    out.exponents.reserve(f.exponents.size());
    for (auto it = f.exponents.rbegin(); it != f.exponents.rend(); ++it) out.exponents.push_back(N - *it);
    return out;
}

SubgroupHNF transform(const std::vector<i64>& g, const SubgroupHNF& L) {
    const auto& ctx = L.context();
    const int n = ctx.n();
    const u64 mod = ctx.modulus();
    if (g.size() != static_cast<std::size_t>(n * n)) throw std::invalid_argument("transform: wrong matrix size");
    std::vector<std::vector<i64>> cols(static_cast<std::size_t>(n), std::vector<i64>(static_cast<std::size_t>(n)));
    for (int c = 0; c < n; ++c)
        for (int r = 0; r < n; ++r) {
            u64 acc = 0;
            for (int k = 0; k < n; ++k)
                acc = zp::add_mod(acc,
                                  zp::mul_mod(zp::reduce(g[static_cast<std::size_t>(r * n + k)], mod),
                                              zp::reduce(L.entry(k, c), mod), mod),
                                  mod);
            cols[static_cast<std::size_t>(c)][static_cast<std::size_t>(r)] = static_cast<i64>(acc);
        }
    return SubgroupHNF::from_generators(ctx, cols);
}

// ---------------------------------------------------------------- adapted lattices

std::vector<AdaptedLattice> enumerate_adapted_overlattices(const PrimeContext& ctx, const Cotype& a, const Cotype& b) {
    const int n = ctx.n();
    if (a.rank() != n || b.rank() != n) throw std::invalid_argument("enumerate_adapted_overlattices: rank mismatch");
    const int lo = -b.largest(), hi = a.largest();
    const int target = a.total() - b.total();
    std::vector<AdaptedLattice> out;
    std::vector<int> t(static_cast<std::size_t>(n));
    std::function<void(int, int)> rec = [&](int i, int sum) {
        const int left = n - i;
        if (left == 0) {
            if (sum == target) out.push_back({t});
            return;
        }
        for (int v = lo; v <= hi; ++v) {
            const int rest = target - sum - v;
            if (rest < lo * (left - 1) || rest > hi * (left - 1)) continue;
            t[static_cast<std::size_t>(i)] = v;
            rec(i + 1, sum + v);
        }
    };
    rec(0, 0);
    return out;
}

RelativePosition relative_cotype(const SubgroupHNF& L, const AdaptedLattice& L1) {
    const auto& ctx = L.context();
    const int n = ctx.n();
    if (L1.t.size() != static_cast<std::size_t>(n)) throw std::invalid_argument("relative_cotype: rank mismatch");
    const u64 p = static_cast<u64>(ctx.p());
    int tmin = 0;
    for (int t : L1.t) {
        if (t > ctx.N()) throw std::invalid_argument("relative_cotype: t_i exceeds N");
        tmin = std::min(tmin, t);
    }
    RelativePosition out;
    // L <= L1 iff every entry in row i is divisible by p^{t_i}.
    for (int i = 0; i < n; ++i) {
        const int t = L1.t[static_cast<std::size_t>(i)];
        if (t <= 0) continue;
        const u64 pt = checked_pow(p, t);
        for (int j = i; j < n; ++j)
            if (static_cast<u64>(L.entry(i, j)) % pt != 0) return out;
    }
    const int cap = ctx.N() - tmin;
    const u64 mod = checked_pow(p, cap);
    std::vector<u64> scaled(static_cast<std::size_t>(n * n), 0);
    for (int i = 0; i < n; ++i) {
        const int t = L1.t[static_cast<std::size_t>(i)];
        for (int j = i; j < n; ++j) {
            u64 x = static_cast<u64>(L.entry(i, j));
            if (t >= 0)
                x /= checked_pow(p, t);
            else
                x = zp::mul_mod(x % mod, checked_pow(p, -t), mod);
            scaled[static_cast<std::size_t>(i * n + j)] = x % mod;
        }
    }
    out.contained = true;
    out.raw.exponents = zp::snf_exponents(std::move(scaled), n, p, cap);
    out.normalized = out.raw.cotype();
    out.translated = out.raw.exponents.back() != 0;
    return out;
}

std::optional<InvariantFactors> relative_invariants(const SubgroupHNF& big, const SubgroupHNF& small) {
    if (!(big.context() == small.context())) throw std::invalid_argument("relative_invariants: context mismatch");
    if (!big.contains(small)) return std::nullopt;
    const auto& ctx = big.context();
    const int n = ctx.n();
    std::vector<mpz_class> R(static_cast<std::size_t>(n * n));
    for (std::size_t i = 0; i < R.size(); ++i) R[i] = static_cast<long>(small.matrix()[i]);
    const auto X = solve_upper(big.matrix(), R, n);
    std::vector<u64> red(X.size());
    for (std::size_t i = 0; i < X.size(); ++i) red[i] = mpz_mod_u64(X[i], ctx.modulus());
    return InvariantFactors{zp::snf_exponents(std::move(red), n, static_cast<u64>(ctx.p()), ctx.N())};
}

} // namespace hecke::lattice
