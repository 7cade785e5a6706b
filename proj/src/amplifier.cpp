#include "hecke/amplifier.hpp"

#include "hecke/errors.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <stdexcept>

namespace hecke::amp {

namespace {

long euler_phi(long m) {
    long r = m;
    for (long q = 2; q * q <= m; ++q) {
        if (m % q) continue;
        while (m % q == 0) m /= q;
        r -= r / q;
    }
    if (m > 1) r -= r / m;
    return r;
}

std::vector<bool> sieve(long limit) {
    std::vector<bool> prime(static_cast<std::size_t>(std::max(limit + 1, 2L)), true);
    prime[0] = prime[1] = false;
    for (long i = 2; i * i <= limit; ++i)
        if (prime[static_cast<std::size_t>(i)])
            for (long j = i * i; j <= limit; j += i) prime[static_cast<std::size_t>(j)] = false;
    return prime;
}

long double to_long_double(const mpq_class& q) {
    return static_cast<long double>(q.get_num().get_d()) / static_cast<long double>(q.get_den().get_d());
}

mpq_class canonical(mpq_class q) {
    q.canonicalize();
    return q;
}

struct Branch {
    mpq_class numerator = 0;
    mpq_class denominator = 0;
    std::uint64_t terms = 0;
};

// Sum over squarefree n = primes[i] * m with all factors of m drawn from
// indices > i and n <= M.
void descend(const std::vector<long>& primes, const std::vector<LocalWeight>& w, std::size_t start,
             std::uint64_t product, std::uint64_t M, const mpq_class& num, const mpq_class& den, Branch& out) {
    out.numerator += num;
    out.denominator += den;
    ++out.terms;
    for (std::size_t j = start; j < primes.size(); ++j) {
        const auto p = static_cast<std::uint64_t>(primes[j]);
        if (product > M / p) break;
        descend(primes, w, j + 1, product * p, M, num * w[j].torus_term, den * w[j].norm_sq, out);
    }
}

std::uint64_t count_terms(const std::vector<long>& primes, std::size_t start, std::uint64_t product,
                          std::uint64_t M, std::uint64_t ceiling) {
    std::uint64_t total = 1;
    for (std::size_t j = start; j < primes.size() && total <= ceiling; ++j) {
        const auto p = static_cast<std::uint64_t>(primes[j]);
        if (product > M / p) break;
        total += count_terms(primes, j + 1, product * p, M, ceiling);
    }
    return total;
}

} // namespace

// ---------------------------------------------------------------- prime rule

void GoodPrimeRule::validate() const {
    if (modulus < 1) throw std::invalid_argument("good-prime rule: modulus must be >= 1");
    for (long r : residues) {
        if (r < 0 || r >= modulus) throw std::invalid_argument("good-prime rule: residue out of range");
        if (std::gcd(r, modulus) != 1) throw std::invalid_argument("good-prime rule: residue is not a unit");
    }
}

bool GoodPrimeRule::admits(long p) const {
    if (std::find(excluded.begin(), excluded.end(), p) != excluded.end()) return false;
    const long r = p % modulus;
    if (residues.empty()) return std::gcd(r, modulus) == 1;
    return std::find(residues.begin(), residues.end(), r) != residues.end();
}

mpq_class GoodPrimeRule::density() const {
    validate();
    const long phi = euler_phi(modulus);
    std::vector<long> distinct = residues;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    const long count = residues.empty() ? phi : static_cast<long>(distinct.size());
    return canonical(mpq_class(count, phi));
}

std::vector<long> good_primes(const GoodPrimeRule& rule, long limit) {
    rule.validate();
    std::vector<long> out;
    if (limit < 2) return out;
    const auto prime = sieve(limit);
    for (long p = 2; p <= limit; ++p)
        if (prime[static_cast<std::size_t>(p)] && rule.admits(p)) out.push_back(p);
    return out;
}

long prime_pi(long limit) {
    if (limit < 2) return 0;
    const auto prime = sieve(limit);
    return static_cast<long>(std::count(prime.begin(), prime.end(), true));
}

// ---------------------------------------------------------------- local weights

LocalWeight local_weight(long p, const mpq_class& c, const Cotype& a, const lattice::EnumerationLimits& limits) {
    LocalWeight w;
    if (c < 0) throw std::invalid_argument("local_weight: c must be nonnegative");
    w.a_p = canonical(mpq_class(c) / p);
    if (w.a_p == 0) {
        w.norm_sq = 0;
        w.torus_term = 0;
        return w;
    }
    const lattice::PrimeContext ctx(p, a.rank(), 1);
    const Cotype adj = local::adjoint_cotype(a);
    const auto z = [](std::uint64_t x) { return mpz_class(static_cast<unsigned long>(x)); };

    // omega_p + omega_p^* integrates to 2 a_p (single(a) + single(a*)).
    const mpz_class singles = z(local::torus_orbital_single(ctx, a)) + z(local::torus_orbital_single(ctx, adj));
    // (tau(a) + tau(a)^*) * (tau(a) + tau(a)^*): tau(x) * tau(y) pairs with b = adjoint(y).
    const std::vector<std::pair<Cotype, Cotype>> products{{a, adj}, {a, a}, {adj, adj}, {adj, a}};
    mpz_class pairs = 0, identity = 0;
    for (const auto& [x, b] : products) {
        pairs += z(local::torus_orbital_pair(ctx, x, b, limits, Exec::serial).total);
        identity += z(local::convolution_at_identity(ctx, x, b, limits));
    }
    const mpq_class ap2 = w.a_p * w.a_p;
    w.norm_sq = canonical(ap2 * identity);
    w.torus_term = canonical(2 * w.a_p * singles + ap2 * pairs);
    return w;
}

// ---------------------------------------------------------------- ratio

void AmplifierConfig::validate() const {
    if (c < 0) throw std::invalid_argument("amplifier: c must be nonnegative");
    if (c1 <= 0) throw std::invalid_argument("amplifier: c1 must be positive");
    if (M < 1) throw std::invalid_argument("amplifier: M must be >= 1");
    rule.validate();
}

bool admitted_by_cutoff(long p, const mpq_class& c1, std::uint64_t M) {
    if (M <= 1) return false;
    const long double bound = to_long_double(c1) * std::log(static_cast<long double>(M));
    const long double gap = bound - static_cast<long double>(p);
    if (std::fabs(gap) <= 1e-15L * std::max<long double>(1, bound))
        throw std::domain_error("cutoff c1 * ln M is too close to the prime " + std::to_string(p) + " to decide");
    return gap > 0;
}

double cutoff_value(const mpq_class& c1, std::uint64_t M) {
    return M <= 1 ? 0.0 : static_cast<double>(to_long_double(c1) * std::log(static_cast<long double>(M)));
}

RatioReport amplifier_ratio(const AmplifierConfig& config, Exec exec) {
    config.validate();
    RatioReport r;
    r.cutoff = cutoff_value(config.c1, config.M);
    const long limit = static_cast<long>(std::min<double>(std::floor(r.cutoff) + 1, static_cast<double>(config.M)));
    std::vector<long> primes;
    for (long p : good_primes(config.rule, limit))
        if (static_cast<std::uint64_t>(p) <= config.M && admitted_by_cutoff(p, config.c1, config.M)) primes.push_back(p);

    const std::uint64_t terms = count_terms(primes, 0, 1, config.M, config.max_terms);
    if (terms > config.max_terms)
        throw CapacityError("amplifier_ratio: more than " + std::to_string(config.max_terms) + " squarefree terms");

    std::vector<LocalWeight> w(primes.size());
    for (std::size_t i = 0; i < primes.size(); ++i) w[i] = local_weight(primes[i], config.c, config.cotype, config.limits);

    // Branch i collects the n whose smallest prime is primes[i].
    std::vector<Branch> branches(primes.size());
    const auto run = [&](std::size_t i) {
        const auto p = static_cast<std::uint64_t>(primes[i]);
        if (p > config.M) return;
        descend(primes, w, i + 1, p, config.M, w[i].torus_term, w[i].norm_sq, branches[i]);
    };
    const long count = static_cast<long>(primes.size());
    if (exec == Exec::serial) {
        for (long i = 0; i < count; ++i) run(static_cast<std::size_t>(i));
    } else {
        std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
        for (long i = 0; i < count; ++i) {
            try {
                run(static_cast<std::size_t>(i));
            } catch (...) {
#pragma omp critical(hecke_amp_failure)
                if (!failure) failure = std::current_exception();
            }
        }
        if (failure) std::rethrow_exception(failure);
    }

    r.numerator = 1;
    r.denominator = 1;
    r.term_count = 1;
    for (const auto& b : branches) {
        r.numerator += b.numerator;
        r.denominator += b.denominator;
        r.term_count += b.terms;
    }
    r.numerator.canonicalize();
    r.denominator.canonicalize();
    r.ratio = canonical(r.numerator / r.denominator);
    r.ratio_value = r.ratio.get_d();
    r.primes_used = primes;
    for (std::size_t i = 0; i < primes.size(); ++i) r.weights.emplace(primes[i], w[i]);
    return r;
}

// ---------------------------------------------------------------- constants

mpq_class lower_bound_constant(const mpq_class& c, const mpq_class& density) {
    if (c < 0) throw std::invalid_argument("lower_bound_constant: c must be nonnegative");
    if (density <= 0 || density > 1) throw std::invalid_argument("lower_bound_constant: density must lie in (0, 1]");
    return canonical(density * (12 * c + 6 * c * c) / (1 + 2 * c * c));
}

mpq_class lower_bound_derivative_numerator(const mpq_class& c) {
    // d/dc (alpha c + beta c^2) / (1 + gamma c^2) has numerator
    // alpha + 2 beta c - alpha gamma c^2.
    return canonical(12 + 12 * c - 24 * c * c);
}

OptimalC optimal_c() {
    const mpz_class alpha = 12, beta = 6, gamma = 2;
    const mpz_class disc = beta * beta + alpha * alpha * gamma;
    if (!mpz_perfect_square_p(disc.get_mpz_t())) throw std::logic_error("optimal_c: irrational critical point");
    mpz_class root;
    mpz_sqrt(root.get_mpz_t(), disc.get_mpz_t());
    OptimalC out;
    out.c = canonical(mpq_class(beta + root, alpha * gamma));
    out.value = lower_bound_constant(out.c, 1);
    return out;
}

Envelope upper_bound_envelope(std::uint64_t M, const mpq_class& C, const mpq_class& x_kappa_size) {
    if (M < 1) throw std::invalid_argument("upper_bound_envelope: M must be >= 1");
    if (C <= 0 || x_kappa_size <= 0) throw std::invalid_argument("upper_bound_envelope: C and |X| must be positive");
    Envelope e;
    const mpq_class x = C * x_kappa_size;
    for (long p = 2;; ++p) {
        bool prime = true;
        for (long q = 2; q * q <= p; ++q)
            if (p % q == 0) prime = false;
        if (!prime) continue;
        if (e.n > M / static_cast<std::uint64_t>(p)) break;
        e.n *= static_cast<std::uint64_t>(p);
        e.primes.push_back(p);
    }
    // Expand the divisor sum over subsets of the primes.
    e.divisor_sum = 0;
    const std::size_t k = e.primes.size();
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << k); ++mask) {
        mpq_class term = 1;
        for (std::size_t i = 0; i < k; ++i)
            if (mask >> i & 1) term *= x / e.primes[i];
        e.divisor_sum += term;
    }
    e.divisor_sum.canonicalize();
    e.product = 1;
    for (long p : e.primes) e.product *= 1 + x / p;
    e.product.canonicalize();
    return e;
}

} // namespace hecke::amp
