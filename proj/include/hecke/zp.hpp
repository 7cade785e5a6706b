#pragma once

// Arithmetic in Z/p^F with F small enough that p^F < 2^62.

#include <cstdint>
#include <vector>

namespace hecke::zp {

using u64 = std::uint64_t;
using i64 = std::int64_t;

bool is_prime(i64 n);

/// p^e, throwing std::overflow_error if the result would not fit below 2^62.
u64 checked_pow(u64 p, int e);

inline u64 mul_mod(u64 a, u64 b, u64 m) {
    return static_cast<u64>((static_cast<unsigned __int128>(a) * b) % m);
}

inline u64 add_mod(u64 a, u64 b, u64 m) {
    u64 s = a + b;
    return s >= m ? s - m : s;
}

inline u64 sub_mod(u64 a, u64 b, u64 m) {
    return a >= b ? a - b : a + (m - b);
}

inline u64 reduce(i64 x, u64 m) {
    i64 r = x % static_cast<i64>(m);
    return static_cast<u64>(r < 0 ? r + static_cast<i64>(m) : r);
}

/// Valuation of x in Z/p^F; the zero residue has valuation F.
int valuation(u64 x, u64 p, int cap);

/// Inverse of a unit modulo m (m a prime power, x coprime to p).
u64 inverse_mod(u64 x, u64 m);

/// Elementary divisor exponents of a square matrix over Z/p^F, sorted
/// decreasing. Exponents are capped at F. The matrix is consumed.
std::vector<int> snf_exponents(std::vector<u64> m, int n, u64 p, int cap);

} // namespace hecke::zp
