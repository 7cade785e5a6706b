#include "hecke/zp.hpp"

#include <algorithm>
#include <functional>
#include <stdexcept>

namespace hecke::zp {

bool is_prime(i64 n) {
    if (n < 2) return false;
    if (n % 2 == 0) return n == 2;
    for (i64 d = 3; d * d <= n; d += 2)
        if (n % d == 0) return false;
    return true;
}

u64 checked_pow(u64 p, int e) {
    constexpr u64 limit = u64{1} << 62;
    u64 r = 1;
    for (int i = 0; i < e; ++i) {
        if (r > limit / p) throw std::overflow_error("p^e does not fit in 62 bits");
        r *= p;
    }
    return r;
}

int valuation(u64 x, u64 p, int cap) {
    if (x == 0) return cap;
    int v = 0;
    while (x % p == 0 && v < cap) {
        x /= p;
        ++v;
    }
    return v;
}

u64 inverse_mod(u64 x, u64 m) {
    // Extended Euclid on signed 128-bit to stay clear of overflow.
    __int128 r0 = static_cast<__int128>(m), r1 = static_cast<__int128>(x % m);
    __int128 s0 = 0, s1 = 1;
    while (r1 != 0) {
        __int128 q = r0 / r1;
        __int128 t = r0 - q * r1;
        r0 = r1;
        r1 = t;
        t = s0 - q * s1;
        s0 = s1;
        s1 = t;
    }
    if (r0 != 1) throw std::domain_error("inverse_mod: argument is not a unit");
    __int128 res = s0 % static_cast<__int128>(m);
    if (res < 0) res += m;
    return static_cast<u64>(res);
}

std::vector<int> snf_exponents(std::vector<u64> a, int n, u64 p, int cap) {
    const u64 mod = checked_pow(p, cap);
    auto at = [&](int i, int j) -> u64& { return a[static_cast<std::size_t>(i * n + j)]; };
    std::vector<int> exps;
    exps.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        int best_v = cap + 1, bi = -1, bj = -1;
        for (int i = k; i < n && best_v > 0; ++i)
            for (int j = k; j < n; ++j) {
                int v = valuation(at(i, j), p, cap);
                if (v < best_v) {
                    best_v = v;
                    bi = i;
                    bj = j;
                    if (v == 0) break;
                }
            }
        if (best_v >= cap) {
            for (int r = k; r < n; ++r) exps.push_back(cap);
            break;
        }
        if (bi != k)
            for (int j = 0; j < n; ++j) std::swap(at(k, j), at(bi, j));
        if (bj != k)
            for (int i = 0; i < n; ++i) std::swap(at(i, k), at(i, bj));
        const u64 pv = checked_pow(p, best_v);
        const u64 unit_inv = inverse_mod(at(k, k) / pv, mod);
        // Clear column k below the pivot, then row k right of it.
        for (int i = k + 1; i < n; ++i) {
            u64 e = at(i, k);
            if (e == 0) continue;
            u64 f = mul_mod(e / pv, unit_inv, mod);
            for (int j = k; j < n; ++j) at(i, j) = sub_mod(at(i, j), mul_mod(f, at(k, j), mod), mod);
        }
        for (int j = k + 1; j < n; ++j) {
            u64 e = at(k, j);
            if (e == 0) continue;
            u64 f = mul_mod(e / pv, unit_inv, mod);
            for (int i = k; i < n; ++i) at(i, j) = sub_mod(at(i, j), mul_mod(f, at(i, k), mod), mod);
        }
        exps.push_back(best_v);
    }
    std::sort(exps.begin(), exps.end(), std::greater<>());
    return exps;
}

} // namespace hecke::zp
