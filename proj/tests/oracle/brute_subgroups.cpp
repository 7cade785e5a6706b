#include "oracle/brute_subgroups.hpp"

#include <algorithm>
#include <functional>
#include <set>
#include <stdexcept>

namespace oracle {

Ambient::Ambient(int p, int n, int N) : p_(p), n_(n), N_(N), q_(1), size_(1) {
    for (int i = 0; i < N; ++i) q_ *= p;
    for (int i = 0; i < n; ++i) size_ *= q_;
}

std::vector<int> Ambient::decode(int x) const {
    std::vector<int> v(static_cast<std::size_t>(n_));
    for (int i = 0; i < n_; ++i) {
        v[static_cast<std::size_t>(i)] = x % q_;
        x /= q_;
    }
    return v;
}

int Ambient::encode(const std::vector<int>& v) const {
    int x = 0;
    for (int i = n_ - 1; i >= 0; --i) x = x * q_ + ((v[static_cast<std::size_t>(i)] % q_) + q_) % q_;
    return x;
}

int Ambient::add(int x, int y) const {
    int r = 0, mul = 1;
    for (int i = 0; i < n_; ++i) {
        r += ((x % q_ + y % q_) % q_) * mul;
        x /= q_;
        y /= q_;
        mul *= q_;
    }
    return r;
}

int Ambient::scale(int x, int k) const {
    int r = 0, mul = 1;
    for (int i = 0; i < n_; ++i) {
        r += static_cast<int>((static_cast<long long>(x % q_) * k) % q_) * mul;
        x /= q_;
        mul *= q_;
    }
    return r;
}

int order(const ElementSet& s) { return static_cast<int>(std::count(s.begin(), s.end(), true)); }

namespace {

ElementSet extend(const Ambient& G, const ElementSet& S, int x) {
    ElementSet out = S;
    std::vector<int> frontier;
    for (int e = 0; e < G.size(); ++e)
        if (S[static_cast<std::size_t>(e)]) frontier.push_back(e);
    const std::vector<int> base = frontier;
    int mult = x;
    while (!S[static_cast<std::size_t>(mult)]) {
        for (int s : base) out[static_cast<std::size_t>(G.add(s, mult))] = true;
        mult = G.add(mult, x);
        if (mult == 0) break;
    }
    return out;
}

} // namespace

std::vector<ElementSet> all_subgroups(const Ambient& G) {
    ElementSet trivial(static_cast<std::size_t>(G.size()), false);
    trivial[0] = true;
    // One generator per cyclic subgroup.
    std::vector<int> gens;
    std::set<ElementSet> cyclic;
    for (int x = 1; x < G.size(); ++x) {
        ElementSet c = extend(G, trivial, x);
        if (cyclic.insert(c).second) gens.push_back(x);
    }
    std::set<ElementSet> seen{trivial};
    std::vector<ElementSet> queue{trivial};
    for (std::size_t head = 0; head < queue.size(); ++head) {
        for (int x : gens) {
            if (queue[head][static_cast<std::size_t>(x)]) continue;
            ElementSet next = extend(G, queue[head], x);
            if (seen.insert(next).second) queue.push_back(std::move(next));
        }
    }
    return queue;
}

ElementSet span(const Ambient& G, const std::vector<std::vector<long long>>& gens) {
    ElementSet s(static_cast<std::size_t>(G.size()), false);
    s[0] = true;
    for (const auto& g : gens) {
        std::vector<int> v(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) v[i] = static_cast<int>(((g[i] % G.q()) + G.q()) % G.q());
        s = extend(G, s, G.encode(v));
    }
    return s;
}

std::vector<int> relative_type(const Ambient& G, const ElementSet& A, const ElementSet& B) {
    std::vector<int> a_elems;
    for (int e = 0; e < G.size(); ++e)
        if (A[static_cast<std::size_t>(e)]) a_elems.push_back(e);
    for (int e = 0; e < G.size(); ++e)
        if (B[static_cast<std::size_t>(e)] && !A[static_cast<std::size_t>(e)])
            throw std::invalid_argument("relative_type: B is not inside A");
    const int ob = order(B);
    // sizes[k] = |p^k (A/B)| = |p^k A + B| / |B|, recorded as log_p.
    std::vector<int> logs;
    int pk = 1;
    for (int k = 0; k <= G.N(); ++k) {
        ElementSet img(static_cast<std::size_t>(G.size()), false);
        for (int a : a_elems) img[static_cast<std::size_t>(G.scale(a, pk))] = true;
        // img is a subgroup; img + B.
        ElementSet sum(static_cast<std::size_t>(G.size()), false);
        for (int x = 0; x < G.size(); ++x) {
            if (!img[static_cast<std::size_t>(x)]) continue;
            for (int b = 0; b < G.size(); ++b)
                if (B[static_cast<std::size_t>(b)]) sum[static_cast<std::size_t>(G.add(x, b))] = true;
        }
        int ratio = order(sum) / ob, lg = 0;
        while (ratio > 1) {
            ratio /= G.p();
            ++lg;
        }
        logs.push_back(lg);
        pk *= G.p();
    }
    // Number of exponents > k equals logs[k] - logs[k+1].
    std::vector<int> exps(static_cast<std::size_t>(G.n()), 0);
    for (int k = 0; k < G.N(); ++k) {
        const int cnt = logs[static_cast<std::size_t>(k)] - logs[static_cast<std::size_t>(k + 1)];
        for (int i = 0; i < cnt; ++i) exps[static_cast<std::size_t>(i)] += 1;
    }
    return exps;
}

std::vector<int> quotient_type(const Ambient& G, const ElementSet& S) {
    std::vector<int> exps(static_cast<std::size_t>(G.n()), 0);
    std::vector<int> logs;
    int pk = 1;
    for (int k = 0; k <= G.N(); ++k) {
        int hits = 0;
        for (int e = 0; e < G.size(); ++e) {
            if (!S[static_cast<std::size_t>(e)]) continue;
            const auto v = G.decode(e);
            if (std::all_of(v.begin(), v.end(), [&](int c) { return c % pk == 0; })) ++hits;
        }
        // |p^k Q| = p^{(N-k) n} / hits.
        int lg = (G.N() - k) * G.n();
        while (hits > 1) {
            hits /= G.p();
            --lg;
        }
        logs.push_back(lg);
        pk *= G.p();
    }
    for (int k = 0; k < G.N(); ++k) {
        const int cnt = logs[static_cast<std::size_t>(k)] - logs[static_cast<std::size_t>(k + 1)];
        for (int i = 0; i < cnt; ++i) exps[static_cast<std::size_t>(i)] += 1;
    }
    return exps;
}

ElementSet annihilator(const Ambient& G, const ElementSet& S) {
    std::vector<std::vector<int>> elems;
    for (int e = 0; e < G.size(); ++e)
        if (S[static_cast<std::size_t>(e)]) elems.push_back(G.decode(e));
    ElementSet out(static_cast<std::size_t>(G.size()), false);
    for (int y = 0; y < G.size(); ++y) {
        const auto w = G.decode(y);
        bool ok = true;
        for (const auto& v : elems) {
            long long s = 0;
            for (int i = 0; i < G.n(); ++i) s += static_cast<long long>(v[static_cast<std::size_t>(i)]) * w[static_cast<std::size_t>(i)];
            if (s % G.q() != 0) {
                ok = false;
                break;
            }
        }
        out[static_cast<std::size_t>(y)] = ok;
    }
    return out;
}

} // namespace oracle
