#pragma once

// Squarefree-supported amplifier built from elementary Hecke operators, and
// the exact ratio of its torus integral to its value at the identity.

#include "hecke/hecke_local.hpp"
#include "hecke/parallel.hpp"

#include <gmpxx.h>

#include <cstdint>
#include <map>
#include <vector>

namespace hecke::amp {

using lattice::Cotype;

/// Primes p with p mod m in R and p not in an excluded list. The declared
/// density is |R| / phi(m).
struct GoodPrimeRule {
    long modulus = 1;
    /// Residues coprime to the modulus; empty means every unit class.
    std::vector<long> residues;
    std::vector<long> excluded;

    /// Throws std::invalid_argument on a non-positive modulus or a residue
    /// that is out of range or not a unit.
    void validate() const;
    bool admits(long p) const;
    mpq_class density() const;
};

/// Admitted primes p <= limit, ascending.
std::vector<long> good_primes(const GoodPrimeRule& rule, long limit);

/// Number of primes <= limit.
long prime_pi(long limit);

struct LocalWeight {
    mpq_class a_p;
    /// ||omega_p||_2^2 = (omega_p * omega_p^*)(1).
    mpq_class norm_sq;
    /// Torus integral of omega_p + omega_p^* + omega_p * omega_p^*.
    mpq_class torus_term;
};

/// omega_p = a_p (tau(a, p) + tau(a, p)^*) with a_p = c / p, evaluated through
/// single and pair torus integrals and identity values.
LocalWeight local_weight(long p, const mpq_class& c, const Cotype& a, const lattice::EnumerationLimits& limits = {});

struct AmplifierConfig {
    mpq_class c = 1;
    mpq_class c1 = 1;
    std::uint64_t M = 1;
    GoodPrimeRule rule;
    Cotype cotype = Cotype(std::vector<int>{1, 0, 0});
    /// Ceiling on the number of squarefree n enumerated.
    std::uint64_t max_terms = 10'000'000;
    lattice::EnumerationLimits limits;

    void validate() const;
};

/// p <= c1 * ln M, decided in extended precision. Throws std::domain_error if
/// the two sides agree to within rounding.
bool admitted_by_cutoff(long p, const mpq_class& c1, std::uint64_t M);

/// c1 * ln M as a double, for reporting.
double cutoff_value(const mpq_class& c1, std::uint64_t M);

struct RatioReport {
    mpq_class numerator;
    mpq_class denominator;
    mpq_class ratio;
    double ratio_value = 0;
    std::uint64_t term_count = 0;
    std::vector<long> primes_used;
    double cutoff = 0;
    std::map<long, LocalWeight> weights;
};

/// Sums over squarefree n <= M whose prime factors are all good and within
/// the cutoff. The numerator multiplies torus terms, the denominator norms.
RatioReport amplifier_ratio(const AmplifierConfig& config, Exec exec = Exec::parallel);

/// density * (12c + 6c^2) / (1 + 2c^2).
mpq_class lower_bound_constant(const mpq_class& c, const mpq_class& density);

/// Numerator of the derivative of (12c + 6c^2) / (1 + 2c^2).
mpq_class lower_bound_derivative_numerator(const mpq_class& c);

struct OptimalC {
    mpq_class c;
    mpq_class value;
};

/// Exact positive critical point of the lower-bound rational function.
OptimalC optimal_c();

struct Envelope {
    std::uint64_t n = 1;
    std::vector<long> primes;
    /// sum over d | n of x^{omega(d)} / d with x = C |X_kappa|.
    mpq_class divisor_sum;
    /// prod over p | n of (1 + x / p).
    mpq_class product;
};

/// Divisor-sum envelope at the largest primorial n <= M.
Envelope upper_bound_envelope(std::uint64_t M, const mpq_class& C, const mpq_class& x_kappa_size);

} // namespace hecke::amp
