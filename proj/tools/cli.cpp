#include "cli.hpp"

#include "hecke/amplifier.hpp"
#include "hecke/archimedean.hpp"
#include "hecke/errors.hpp"
#include "hecke/hecke_local.hpp"
#include "hecke/padic_lattice.hpp"
#include "hecke/parallel.hpp"
#include "hecke/zp.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>

namespace hecke::cli {

namespace {

using json = nlohmann::ordered_json;
using lattice::Cotype;
using lattice::PrimeContext;
using lattice::u64;

constexpr int kSchemaVersion = 1;
constexpr double kPi = 3.14159265358979323846;

struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<json>> rows;
    json details = json::object();
};

std::string number_text(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

std::string cell_text(const json& v) {
    if (v.is_null()) return "";
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number_float()) return number_text(v.get<double>());
    if (v.is_array()) {
        std::string s;
        for (const auto& e : v) s += (s.empty() ? "" : ";") + cell_text(e);
        return s;
    }
    return v.dump();
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
}

void write_csv(const Table& t, std::ostream& o) {
    o << "# hecke " << t.name << " v" << kSchemaVersion << '\n';
    for (std::size_t i = 0; i < t.columns.size(); ++i) o << (i ? "," : "") << csv_field(t.columns[i]);
    o << '\n';
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) o << (i ? "," : "") << csv_field(cell_text(row[i]));
        o << '\n';
    }
}

void write_json(const Table& t, std::ostream& o) {
    json doc;
    doc["schema"] = "hecke." + t.name + "/" + std::to_string(kSchemaVersion);
    doc["columns"] = t.columns;
    json rows = json::array();
    for (const auto& row : t.rows) {
        json r = json::object();
        for (std::size_t i = 0; i < row.size(); ++i) r[t.columns[i]] = row[i];
        rows.push_back(std::move(r));
    }
    doc["rows"] = std::move(rows);
    if (!t.details.empty()) doc["details"] = t.details;
    o << doc.dump(2) << '\n';
}

void write_pretty(const Table& t, std::ostream& o, bool color) {
    const char* on = color ? "\033[1m" : "";
    const char* off = color ? "\033[0m" : "";
    if (t.rows.size() == 1) {
        std::size_t w = 0;
        for (const auto& c : t.columns) w = std::max(w, c.size());
        for (std::size_t i = 0; i < t.columns.size(); ++i)
            o << on << t.columns[i] << off << std::string(w - t.columns[i].size() + 2, ' ') << cell_text(t.rows[0][i])
              << '\n';
    } else {
        std::vector<std::size_t> w(t.columns.size());
        std::vector<std::vector<std::string>> text;
        for (std::size_t i = 0; i < t.columns.size(); ++i) w[i] = t.columns[i].size();
        for (const auto& row : t.rows) {
            text.emplace_back();
            for (std::size_t i = 0; i < row.size(); ++i) {
                text.back().push_back(cell_text(row[i]));
                w[i] = std::max(w[i], text.back().back().size());
            }
        }
        const auto pad = [&](std::size_t i, std::size_t used) {
            return i + 1 < w.size() ? std::string(w[i] - used + 2, ' ') : std::string();
        };
        for (std::size_t i = 0; i < t.columns.size(); ++i) o << on << t.columns[i] << off << pad(i, t.columns[i].size());
        o << '\n';
        for (const auto& row : text) {
            for (std::size_t i = 0; i < row.size(); ++i) o << row[i] << pad(i, row[i].size());
            o << '\n';
        }
    }
    for (const auto& [k, v] : t.details.items()) o << k << ": " << (v.is_structured() ? v.dump() : cell_text(v)) << '\n';
}

json matrix_entries(const arch::Mat& m) {
    json a = json::array();
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) a.push_back(m(i, j));
    return a;
}

std::string q_text(const mpq_class& q) { return q.get_str(); }

// Integers, p/q fractions and terminating decimals, all exact.
mpq_class parse_rational(const std::string& text) {
    std::string s = text;
    s.erase(std::remove_if(s.begin(), s.end(), ::isspace), s.end());
    if (s.empty()) throw std::invalid_argument("empty rational");
    const auto dot = s.find('.');
    mpq_class q;
    try {
        if (dot == std::string::npos) {
            if (s.front() == '+') s.erase(0, 1);
            q = mpq_class(s, 10);
            if (q.get_den() == 0) throw std::invalid_argument("zero denominator");
        } else {
            const bool neg = s.front() == '-';
            const std::string body = (s.front() == '-' || s.front() == '+') ? s.substr(1) : s;
            const auto d = body.find('.');
            const std::string digits = body.substr(0, d) + body.substr(d + 1);
            if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos)
                throw std::invalid_argument("bad decimal");
            mpz_class den = 1;
            for (std::size_t i = d + 1; i < body.size(); ++i) den *= 10;
            q = mpq_class(mpz_class(digits, 10), den);
            if (neg) q = -q;
        }
    } catch (const std::invalid_argument&) {
        throw std::invalid_argument("not a rational number: '" + text + "'");
    }
    q.canonicalize();
    return q;
}

arch::Mat matrix_from(const std::vector<double>& entries, int n) {
    if (entries.empty()) return arch::Mat::Identity(n, n);
    if (static_cast<int>(entries.size()) != n * n)
        throw std::invalid_argument("--g needs " + std::to_string(n * n) + " entries in row-major order");
    arch::Mat g(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) g(i, j) = entries[static_cast<std::size_t>(i * n + j)];
    return g;
}

arch::Vec vec_from(const std::vector<double>& v, int r, const char* flag) {
    if (static_cast<int>(v.size()) != r)
        throw std::invalid_argument(std::string(flag) + " needs " + std::to_string(r) + " coordinates");
    return Eigen::Map<const arch::Vec>(v.data(), r);
}

PrimeContext context_for(long p, const Cotype& a, const Cotype* b = nullptr) {
    int N = std::max(1, a.largest());
    if (b) N = std::max(N, b->largest());
    return PrimeContext(p, a.rank(), N);
}

// Known-identity suite. Each row: check, expected, observed, status.
class Verifier {
public:
    template <class A, class B>
    void equal(const std::string& what, const A& want, const B& got) {
        add(what, text(want), text(got), want == got);
    }
    void add(const std::string& what, const std::string& want, const std::string& got, bool ok) {
        rows_.push_back({what, want, got, ok ? "PASS" : "FAIL"});
        if (!ok) ++failed_;
    }
    int failed() const { return failed_; }
    std::vector<std::vector<json>>& rows() { return rows_; }

private:
    static std::string text(const Cotype& c) { return c.to_string(); }
    template <class T>
    static std::string text(const T& v) {
        std::ostringstream s;
        s << v;
        return s.str();
    }
    std::vector<std::vector<json>> rows_;
    int failed_ = 0;
};

Table run_verify(const lattice::EnumerationLimits& lim, Exec exec) {
    Verifier v;
    const auto C = [](const char* s) { return Cotype::parse(s); };
    const std::vector<long> primes{2, 3, 5, 7, 11, 13};

    v.equal("subgroups of cotype (1,0,0) at p=2", u64{7},
            static_cast<u64>(lattice::enumerate_subgroups(PrimeContext(2, 3, 1), C("1,0,0"), lim).size()));
    {
        const PrimeContext ctx(3, 3, 4);
        const std::vector<int> a{3, 1, 0}, na{1, 3, 4};
        const bool ok =
            lattice::dual_subgroup(lattice::SubgroupHNF::diagonal(ctx, na)) == lattice::SubgroupHNF::diagonal(ctx, a);
        v.add("dual of diag(p^{N-a_i}) is diag(p^{a_i})", "true", ok ? "true" : "false", ok);
    }
    {
        const auto cands = lattice::enumerate_adapted_overlattices(PrimeContext(2, 3, 2), C("1,1,0"), C("1,0,0"));
        std::set<std::vector<int>> ts;
        for (const auto& l : cands) ts.insert(l.t);
        bool ok = ts.count({0, 0, 1}) == 1;
        for (const auto& t : std::vector<std::vector<int>>{{-1, 1, 1}, {1, -1, 1}, {1, 1, -1}}) ok = ok && ts.count(t);
        v.add("overlattice candidates for (1,1,0),(1,0,0)", "permutations of (-1,1,1) and (0,0,1)",
              std::to_string(ts.size()) + " candidates", ok);
    }
    for (long p : primes) {
        const std::string at = " at p=" + std::to_string(p);
        const PrimeContext ctx(p, 3, 1);
        const u64 d = static_cast<u64>(p * p + p + 1);
        v.equal("degree (1,0,0)" + at, d, local::degree(ctx, C("1,0,0"), lim));
        v.equal("degree (1,1,0)" + at, d, local::degree(ctx, C("1,1,0"), lim));
        v.equal("degree (1,0)" + at, static_cast<u64>(p + 1), local::degree(PrimeContext(p, 2, 1), C("1,0"), lim));
        v.equal("torus integral (1,0,0)" + at, u64{3}, local::torus_orbital_single(ctx, C("1,0,0")));
        v.equal("torus integral (1,1,0)" + at, u64{3}, local::torus_orbital_single(ctx, C("1,1,0")));
        const auto same = local::torus_orbital_pair(ctx, C("1,0,0"), C("1,0,0"), lim, exec);
        v.equal("pair off-diagonal (1,0,0),(1,0,0)" + at, u64{6}, same.off_diagonal);
        v.equal("pair total (1,0,0),(1,0,0)" + at, static_cast<u64>(p * p + p + 7), same.total);
        v.equal("pair total (1,0,0),(1,1,0)" + at, static_cast<u64>(3 * (p + 2)),
                local::torus_orbital_pair(ctx, C("1,0,0"), C("1,1,0"), lim, exec).total);
        const auto two = local::torus_orbital_pair(PrimeContext(p, 2, 1), C("1,0"), C("1,0"), lim, exec);
        v.equal("rank-two pair total" + at, static_cast<u64>(p + 3), two.total);
        v.equal("rank-two pair off-diagonal" + at, u64{2}, two.off_diagonal);
        const auto h = local::hall_coefficients(PrimeContext(p, 2, 1), C("1,0"), C("1,0"), lim);
        std::ostringstream got;
        for (const auto& [c, q] : h.terms()) got << (got.tellp() > 0 ? " " : "") << "(" << c.to_string() << "):" << q;
        const bool hall_ok = h.terms().size() == 2 && h.coefficient(C("2,0")) == 1 && h.coefficient(C("0,0")) == p + 1;
        v.add("rank-two Hall coefficients" + at, "(2,0):1 (0,0):" + std::to_string(p + 1), got.str(), hall_ok);
        mpq_class stat(36 * p * p, static_cast<long>(d * d));
        stat.canonicalize();
        v.equal("squared key-bound statistic (1,0,0),(1,0,0)" + at, stat,
                local::key_bound_statistic(ctx, C("1,0,0"), C("1,0,0"), lim, exec).squared);
        const mpq_class ap = mpq_class(1, p);
        const auto w = amp::local_weight(p, 1, C("1,0,0"), lim);
        v.equal("amplifier torus term (1,0,0) at c=1" + at, mpq_class(12 * ap + (6 * p + 24) * ap * ap + w.norm_sq),
                w.torus_term);
    }
    v.equal("adjoint of (1,0)", C("1,0"), local::adjoint_cotype(C("1,0")));
    v.equal("convolution at identity (1,0,0),(1,0,0) at p=7", u64{57},
            local::convolution_at_identity(PrimeContext(7, 3, 1), C("1,0,0"), C("1,0,0"), lim));
    v.equal("convolution at identity (1,0,0),(1,1,0) at p=7", u64{0},
            local::convolution_at_identity(PrimeContext(7, 3, 1), C("1,0,0"), C("1,1,0"), lim));
    v.equal("lower-bound constant at c=1, density 1", mpq_class(6), amp::lower_bound_constant(1, 1));
    {
        const auto opt = amp::optimal_c();
        v.equal("optimal c", std::string("(1, 6)"), "(" + opt.c.get_str() + ", " + opt.value.get_str() + ")");
    }

    using namespace arch;
    const Vec one = (Vec(1) << 1.0).finished();
    const Vec h3 = (Vec(2) << std::cos(0.6), std::sin(0.6)).finished();
    {
        const GroupModel m(3);
        std::mt19937_64 rng(7);
        const Mat g = random_g(m, 1.0, rng);
        const Vec nu = (Vec(2) << 1.5, -0.5).finished();
        QuadratureSpec q;
        q.rel_tol = 1e-9;
        const cplx base = spherical_function(m, nu, g, q, exec).value;
        double worst = 0;
        for (const auto& W : m.weyl_actions())
            worst = std::max(worst, std::abs(spherical_function(m, W * nu, g, q, exec).value - base));
        v.add("Weyl invariance of the SL(3) spherical function", "< 1e-6", number_text(worst), worst < 1e-6);
    }
    {
        const GroupModel m(2);
        const Mat g = (Mat(2, 2) << std::cos(0.5), -std::sin(0.5), std::sin(0.5), std::cos(0.5)).finished() *
                      m.exp_a((Vec(1) << 0.7).finished());
        QuadratureSpec q;
        q.abs_tol = 1e-8;
        q.rel_tol = 1e-5;
        const auto a = orbital_integral_J(m, {one, 3.0}, g, BumpFunction{1.0}, q, exec);
        const auto b = orbital_integral_J(m, {Vec(-one), 3.0}, g, BumpFunction{1.0}, q, exec);
        const double diff = std::abs(a.integral.value - b.integral.value);
        const double tol = a.integral.error + b.integral.error + 2 * q.abs_tol;
        v.add("Weyl invariance of the SL(2) orbital integral", "<= " + number_text(tol), number_text(diff),
              a.integral.converged && b.integral.converged && diff <= tol);
    }
    {
        const GroupModel m(2);
        const auto cs = critical_set_solve(m, one, {}, exec);
        std::string got;
        for (const auto& c : cs) got += (got.empty() ? "" : " ") + number_text(c.angle);
        const bool ok = cs.size() == 2 && std::fabs(cs[0].angle + kPi / 4) < 1e-6 &&
                        std::fabs(cs[1].angle - kPi / 4) < 1e-6;
        v.add("SL(2) critical set", number_text(-kPi / 4) + " " + number_text(kPi / 4), got, ok);
        bool sig_ok = !cs.empty();
        for (const auto& c : cs) {
            const auto s = hessian_signature(m, one, c.k);
            sig_ok = sig_ok && s.zero == 0 && s.positive == 1 && s.negative == 1;
        }
        v.add("SL(2) Hessian signatures", "(0,1,1)", sig_ok ? "(0,1,1)" : "mismatch", sig_ok);
    }
    {
        const GroupModel m(3);
        CriticalSetOptions opts;
        opts.seeds = 24;
        const auto cs = critical_set_solve(m, h3, opts, exec);
        v.add("SL(3) critical set is nonempty", "> 0 points", std::to_string(cs.size()) + " points", !cs.empty());
        bool sig_ok = !cs.empty();
        for (const auto& c : cs) {
            const auto s = hessian_signature(m, h3, c.k);
            sig_ok = sig_ok && s.zero == 1 && s.positive == 2 && s.negative == 2;
        }
        v.add("SL(3) Hessian signatures", "(1,2,2)", sig_ok ? "(1,2,2)" : "mismatch", sig_ok);
        const auto fp = cs.empty() ? std::nullopt : flat_critical_point(m, h3, cs.front().k);
        const double a_norm = fp ? fp->a.norm() : -1;
        v.add("flat critical point at a critical k is a = 0", "< 1e-8", fp ? number_text(a_norm) : "none",
              fp && a_norm < 1e-8);

        std::mt19937_64 rng(41);
        bool unique = true, definite = true;
        int converged = 0;
        for (int draw = 0; draw < 5; ++draw) {
            const Mat g = random_g(m, 1.0, rng);
            std::optional<Vec> first;
            for (int s = 0; s < 10; ++s) {
                FlatOptions o;
                o.start = 1.5 * Vec::Random(2);
                const auto f = flat_critical_point(m, h3, g, o);
                if (!f) continue;
                definite = definite && f->hessian_eigenvalues.maxCoeff() < 0;
                if (!first)
                    first = f->a;
                else
                    unique = unique && (f->a - *first).norm() < 1e-6;
            }
            if (first) ++converged;
        }
        v.add("flat critical point unique across 10 starts", "unique", std::to_string(converged) + " draws converged",
              unique && converged > 0);
        v.add("flat Hessian negative definite", "all eigenvalues < 0", definite ? "yes" : "no", definite);
    }

    Table t{"verify", {"check", "expected", "observed", "status"}, std::move(v.rows()), json::object()};
    t.details["failed"] = v.failed();
    return t;
}

struct Global {
    std::string format = "pretty";
    std::string output;
    int jobs = 0;
    std::uint64_t max_subgroups = 10'000'000;

    Exec exec() const { return jobs == 1 ? Exec::serial : Exec::parallel; }
    lattice::EnumerationLimits limits() const { return {max_subgroups}; }
};

void add_quadrature(CLI::App* sc, arch::QuadratureSpec& q) {
    sc->add_option("--k-points", q.k_points, "K nodes per direction before oscillation scaling")
        ->check(CLI::PositiveNumber);
    sc->add_option("--a-points", q.a_points, "A nodes per direction before oscillation scaling")
        ->check(CLI::PositiveNumber);
    sc->add_option("--oscillation", q.oscillation_factor, "Extra nodes per radian of phase")
        ->check(CLI::NonNegativeNumber);
    sc->add_option("--growth", q.growth, "Node growth factor per refinement level");
    sc->add_option("--max-levels", q.max_levels, "Refinement levels after the first")->check(CLI::PositiveNumber);
    sc->add_option("--abs-tol", q.abs_tol, "Absolute convergence tolerance");
    sc->add_option("--rel-tol", q.rel_tol, "Relative convergence tolerance");
    sc->add_option("--t-cap", q.t_cap, "Largest admissible t (0: 100 for n=2, 40 for n=3)");
    sc->add_option("--max-evaluations", q.max_evaluations, "Integrand evaluations allowed per level");
}

json option_value(const CLI::Option* o) {
    const auto res = o->count() > 0 ? o->results() : std::vector<std::string>{};
    if (o->count() == 0) {
        const std::string d = o->get_default_str();
        return d.empty() ? json(nullptr) : json(d);
    }
    if (res.size() == 1 && o->get_expected_max() <= 1) return res.front();
    return res;
}

json resolved_config(const CLI::App& app, const CLI::App* sub) {
    json cfg;
    cfg["command"] = sub->get_name();
    cfg["openmp"] = openmp_enabled();
    cfg["threads"] = max_threads();
    json opts = json::object();
    for (const CLI::App* a : {&app, sub})
        for (const CLI::Option* o : a->get_options()) {
            const std::string name = o->get_single_name();
            if (name == "help" || name == "config") continue;
            opts[name] = option_value(o);
        }
    cfg["options"] = std::move(opts);
    return cfg;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, bool color) {
    CLI::App app{"Hecke operator, amplifier and spherical-function computations", "hecke"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "TOML or INI file; top-level keys set global flags, [subcommand] sections set "
                                   "that subcommand's flags; command-line flags take precedence");

    Global g;
    app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"csv", "json", "pretty"}));
    app.add_option("--output", g.output, "Write the table to this file instead of stdout");
    app.add_option("--jobs", g.jobs, "Worker threads (0: all cores, 1: serial reference kernels)")
        ->check(CLI::NonNegativeNumber);
    app.add_option("--max-subgroups", g.max_subgroups, "Capacity ceiling on enumerated subgroups")
        ->check(CLI::PositiveNumber);

    std::map<std::string, std::function<Table()>> actions;
    const auto prime_check = CLI::Validator(
        [](std::string& s) {
            try {
                return zp::is_prime(std::stol(s)) ? std::string() : s + " is not prime";
            } catch (const std::exception&) {
                return s + " is not an integer";
            }
        },
        "PRIME");

    // p-adic subcommands.
    long p = 2;
    std::string cot_a, cot_b, cotype = "1,0,0";
    auto* deg = app.add_subcommand("degree", "Degree of the Hecke operator of a cotype");
    deg->add_option("--p", p, "Prime")->required()->check(prime_check);
    deg->add_option("--cotype", cotype, "Comma-separated cotype, decreasing with last entry 0")->required();
    actions["degree"] = [&] {
        const Cotype a = Cotype::parse(cotype);
        const u64 d = local::degree(context_for(p, a), a, g.limits());
        return Table{"degree", {"p", "cotype", "degree"}, {{p, a.to_string(), d}}};
    };

    auto* orb = app.add_subcommand("orbital", "Torus orbital integrals of one cotype or a pair");
    orb->add_option("--p", p, "Prime")->required()->check(prime_check);
    orb->add_option("--a", cot_a, "First cotype")->required();
    orb->add_option("--b", cot_b, "Second cotype; omit for the single integral");
    actions["orbital"] = [&] {
        const Cotype a = Cotype::parse(cot_a);
        if (cot_b.empty()) {
            const u64 s = local::torus_orbital_single(context_for(p, a), a);
            return Table{"orbital-single", {"p", "a", "integral"}, {{p, a.to_string(), s}}};
        }
        const Cotype b = Cotype::parse(cot_b);
        const auto r = local::torus_orbital_pair(context_for(p, a, &b), a, b, g.limits(), g.exec());
        return Table{"orbital-pair",
                     {"p", "a", "b", "total", "diagonal", "off_diagonal"},
                     {{p, a.to_string(), b.to_string(), r.total, r.diagonal, r.off_diagonal}}};
    };

    auto* hall = app.add_subcommand("hall", "Structure constants of the product of two Hecke operators");
    hall->add_option("--p", p, "Prime")->required()->check(prime_check);
    hall->add_option("--a", cot_a, "First cotype")->required();
    hall->add_option("--b", cot_b, "Second cotype")->required();
    actions["hall"] = [&] {
        const Cotype a = Cotype::parse(cot_a), b = Cotype::parse(cot_b);
        const auto h = local::hall_coefficients(context_for(p, a, &b), a, b, g.limits());
        Table t{"hall", {"p", "a", "b", "cotype", "coefficient"}, {}};
        for (const auto& [c, q] : h.terms()) t.rows.push_back({p, a.to_string(), b.to_string(), c.to_string(), q_text(q)});
        return t;
    };

    std::vector<long> primes{2, 3, 5, 7, 11, 13};
    int rank = 3, max_entry = 2;
    auto* scan = app.add_subcommand("bound-scan", "Key-bound statistic over all cotype pairs with bounded entries");
    scan->add_option("--primes", primes, "Comma-separated primes")->delimiter(',')->check(prime_check);
    scan->add_option("--n", rank, "Rank")->check(CLI::Range(1, 6));
    scan->add_option("--max-entry", max_entry, "Largest cotype entry")->check(CLI::Range(0, 6));
    actions["bound-scan"] = [&] {
        const auto rows = local::key_bound_sweep(primes, rank, max_entry, g.limits(), g.exec());
        Table t{"bound-scan",
                {"p", "a", "b", "off_diagonal", "degree_a", "degree_b", "squared", "value"},
                {}};
        const local::SweepRow* best = nullptr;
        for (const auto& r : rows) {
            t.rows.push_back({r.p, r.a.to_string(), r.b.to_string(), r.bound.orbital.off_diagonal, r.bound.degree_a,
                              r.bound.degree_b, q_text(r.bound.squared), r.bound.value});
            if (!best || r.bound.squared > best->bound.squared) best = &r;
        }
        if (best) {
            t.details["max_squared"] = q_text(best->bound.squared);
            t.details["max_value"] = best->bound.value;
            t.details["argmax"] = {{"p", best->p}, {"a", best->a.to_string()}, {"b", best->b.to_string()}};
        }
        return t;
    };

    int m_rows = 1;
    std::string mode = "contained";
    auto* rc = app.add_subcommand("restricted-count", "Subgroups of a cotype in a fixed relative position");
    rc->add_option("--p", p, "Prime")->required()->check(prime_check);
    rc->add_option("--cotype", cotype, "Cotype")->required();
    rc->add_option("--m", m_rows, "Number of coordinates constrained")->required()->check(CLI::NonNegativeNumber);
    rc->add_option("--mode", mode, "contained: L inside p^{a_1} on the first m coordinates; contains: L contains "
                                   "p^{a_1-1} on the first m coordinates")
        ->check(CLI::IsMember({"contained", "contains"}));
    actions["restricted-count"] = [&] {
        const Cotype a = Cotype::parse(cotype);
        const auto how = mode == "contained" ? local::Restriction::contained : local::Restriction::contains;
        const u64 c = local::restricted_cotype_count(context_for(p, a), a, m_rows, how, g.limits());
        return Table{"restricted-count", {"p", "cotype", "m", "mode", "count"}, {{p, a.to_string(), m_rows, mode, c}}};
    };

    // Amplifier subcommands.
    std::string c_text = "1", c1_text = "1", density_text = "1", big_c_text = "1", x_text = "1";
    std::uint64_t M = 1, envelope_M = 30;
    long modulus = 1;
    std::vector<long> residues, excluded;
    std::uint64_t max_terms = 10'000'000;
    auto* ratio = app.add_subcommand("amp-ratio", "Exact amplifier ratio over squarefree products of good primes");
    ratio->add_option("--c", c_text, "Amplifier weight c in a_p = c/p (integer, p/q or decimal)");
    ratio->add_option("--c1", c1_text, "Cutoff constant: primes p <= c1 ln M");
    ratio->add_option("--M", M, "Upper bound on the squarefree products")->check(CLI::PositiveNumber);
    ratio->add_option("--modulus", modulus, "Modulus of the good-prime rule")->check(CLI::PositiveNumber);
    ratio->add_option("--residues", residues, "Admitted residues (default: all units)")->delimiter(',');
    ratio->add_option("--exclude", excluded, "Primes excluded outright")->delimiter(',');
    ratio->add_option("--cotype", cotype, "Cotype of the local operator");
    ratio->add_option("--max-terms", max_terms, "Capacity ceiling on squarefree terms")->check(CLI::PositiveNumber);
    actions["amp-ratio"] = [&] {
        amp::AmplifierConfig cfg;
        cfg.c = parse_rational(c_text);
        cfg.c1 = parse_rational(c1_text);
        cfg.M = M;
        cfg.rule.modulus = modulus;
        cfg.rule.residues = residues;
        cfg.rule.excluded = excluded;
        cfg.cotype = Cotype::parse(cotype);
        cfg.max_terms = max_terms;
        cfg.limits = g.limits();
        const auto r = amp::amplifier_ratio(cfg, g.exec());
        Table t{"amp-ratio",
                {"M", "c", "c1", "cutoff", "primes", "terms", "numerator", "denominator", "ratio", "ratio_value"},
                {{M, q_text(cfg.c), q_text(cfg.c1), r.cutoff, r.primes_used.size(), r.term_count, q_text(r.numerator),
                  q_text(r.denominator), q_text(r.ratio), r.ratio_value}}};
        t.details["primes_used"] = r.primes_used;
        json weights = json::object();
        for (const auto& [q, w] : r.weights)
            weights[std::to_string(q)] = {
                {"a_p", q_text(w.a_p)}, {"norm_sq", q_text(w.norm_sq)}, {"torus_term", q_text(w.torus_term)}};
        t.details["weights"] = std::move(weights);
        return t;
    };

    auto* bounds = app.add_subcommand("amp-bounds", "Lower-bound constant and divisor-sum upper envelope");
    bounds->add_option("--c", c_text, "Amplifier weight c");
    bounds->add_option("--density", density_text, "Density of the good primes");
    bounds->add_option("--M", envelope_M, "Envelope range; the envelope sits at the largest primorial <= M")
        ->check(CLI::PositiveNumber);
    bounds->add_option("--C", big_c_text, "Envelope constant C");
    bounds->add_option("--x-kappa", x_text, "Size of the truncation set X_kappa");
    actions["amp-bounds"] = [&] {
        const mpq_class c = parse_rational(c_text), d = parse_rational(density_text);
        const mpq_class lb = amp::lower_bound_constant(c, d);
        const auto e = amp::upper_bound_envelope(envelope_M, parse_rational(big_c_text), parse_rational(x_text));
        Table t{"amp-bounds",
                {"c", "density", "lower_bound", "lower_bound_value", "M", "n", "envelope", "envelope_product",
                 "envelope_value"},
                {{q_text(c), q_text(d), q_text(lb), lb.get_d(), envelope_M, e.n, q_text(e.divisor_sum), q_text(e.product),
                  e.divisor_sum.get_d()}}};
        t.details["primes"] = e.primes;
        return t;
    };

    app.add_subcommand("optimal-c", "Maximizer of the lower-bound constant over c");
    actions["optimal-c"] = [&] {
        const auto o = amp::optimal_c();
        return Table{"optimal-c", {"c", "value"}, {{q_text(o.c), q_text(o.value)}}};
    };

    // Archimedean subcommands.
    int n = 2;
    std::vector<double> nu, h0, g_entries, ts{1.0}, bracket;
    double radius = 1;
    bool require = false;
    arch::QuadratureSpec quad;
    const auto add_group = [&](CLI::App* sc) {
        sc->add_option("--n", n, "SL(n,R) with n = 2 or 3")->check(CLI::IsMember({2, 3}));
        sc->add_flag("--require-converged", require, "Exit with status 4 if any value did not converge");
    };

    auto* sph = app.add_subcommand("spherical", "Spherical function phi_nu(g)");
    add_group(sph);
    sph->add_option("--nu", nu, "Spectral parameter, n-1 coordinates")->required()->delimiter(',');
    sph->add_option("--g", g_entries, "Group element, row-major (default identity)")->delimiter(',');
    add_quadrature(sph, quad);
    actions["spherical"] = [&] {
        const arch::GroupModel model(n);
        const auto r = arch::spherical_function(model, vec_from(nu, model.rank(), "--nu"), matrix_from(g_entries, n),
                                                quad, g.exec());
        if (require) r.require_converged("spherical");
        return Table{"spherical",
                     {"n", "nu", "re", "im", "abs", "error", "converged", "levels", "evaluations"},
                     {{n, nu, r.value.real(), r.value.imag(), std::abs(r.value), r.error, r.converged, r.levels,
                       r.evaluations}}};
    };

    const auto add_sweep = [&](CLI::App* sc) {
        add_group(sc);
        sc->add_option("--h0", h0, "Direction H0, n-1 coordinates")->required()->delimiter(',');
        sc->add_option("--t", ts, "Comma-separated values of t")->delimiter(',');
        sc->add_option("--radius", radius, "Bump radius R0")->check(CLI::PositiveNumber);
        sc->add_option("--bracket", bracket, "lo,hi: report whether t^r |value| lies inside")
            ->delimiter(',')
            ->expected(2);
        add_quadrature(sc, quad);
    };
    const auto in_bracket = [&](double scaled) -> json {
        if (bracket.empty()) return nullptr;
        if (bracket.size() != 2 || !(bracket[0] <= bracket[1]))
            throw std::invalid_argument("--bracket needs lo,hi with lo <= hi");
        return scaled >= bracket[0] && scaled <= bracket[1];
    };

    auto* mi = app.add_subcommand("model-int", "Model oscillatory integral I(t H0) over A");
    add_sweep(mi);
    actions["model-int"] = [&] {
        const arch::GroupModel model(n);
        const arch::Vec h = vec_from(h0, model.rank(), "--h0");
        Table t{"model-int", {"t", "re", "im", "abs", "scaled", "in_bracket", "converged", "error", "levels"}, {}};
        for (double tv : ts) {
            const auto r = arch::model_integral_I(model, {h, tv}, arch::BumpFunction{radius}, quad, g.exec());
            if (require) r.integral.require_converged("model-int");
            const auto& v = r.integral.value;
            t.rows.push_back({tv, v.real(), v.imag(), std::abs(v), r.scaled, in_bracket(r.scaled),
                              r.integral.converged, r.integral.error, r.integral.levels});
        }
        t.details["generic"] = arch::SpectralPoint{h, 1}.generic(model);
        return t;
    };

    auto* oi = app.add_subcommand("orbital-int", "Orbital integral J(t H0, g) over A x A");
    add_sweep(oi);
    oi->add_option("--g", g_entries, "Group element, row-major (default identity)")->delimiter(',');
    actions["orbital-int"] = [&] {
        const arch::GroupModel model(n);
        const arch::Vec h = vec_from(h0, model.rank(), "--h0");
        const arch::Mat gm = matrix_from(g_entries, n);
        Table t{"orbital-int",
                {"t", "re", "im", "abs", "scaled", "in_bracket", "converged", "error", "levels", "levi_distance"},
                {}};
        for (double tv : ts) {
            const auto r = arch::orbital_integral_J(model, {h, tv}, gm, arch::BumpFunction{radius}, quad, g.exec());
            if (require) r.integral.require_converged("orbital-int");
            const auto& v = r.integral.value;
            t.rows.push_back({tv, v.real(), v.imag(), std::abs(v), r.scaled, in_bracket(r.scaled),
                              r.integral.converged, r.integral.error, r.integral.levels, r.levi_distance});
        }
        t.details["generic"] = arch::SpectralPoint{h, 1}.generic(model);
        return t;
    };

    arch::CriticalSetOptions cs_opts;
    auto* cs = app.add_subcommand("critical-set", "Solutions of f_H0(k) = 0 and their Hessian signatures");
    add_group(cs);
    cs->add_option("--h0", h0, "Direction H0, n-1 coordinates")->required()->delimiter(',');
    cs->add_option("--seeds", cs_opts.seeds, "Random Newton seeds")->check(CLI::PositiveNumber);
    cs->add_option("--rng-seed", cs_opts.rng_seed, "Seed of the random seeds");
    cs->add_option("--max-iterations", cs_opts.max_iterations, "Newton iterations per seed")
        ->check(CLI::PositiveNumber);
    cs->add_option("--residual-tol", cs_opts.residual_tol, "Acceptance threshold on |f_H0(k)|");
    actions["critical-set"] = [&] {
        const arch::GroupModel model(n);
        const arch::Vec h = vec_from(h0, model.rank(), "--h0");
        const auto pts = arch::critical_set_solve(model, h, cs_opts, g.exec());
        Table t{"critical-set",
                {"index", "angle", "residual", "jacobian_rank", "levi_distance", "n0", "n_plus", "n_minus", "k"},
                {}};
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const auto s = arch::hessian_signature(model, h, pts[i].k);
            t.rows.push_back({i, n == 2 ? json(pts[i].angle) : json(nullptr), pts[i].residual, pts[i].jacobian_rank,
                              pts[i].levi_distance, s.zero, s.positive, s.negative, matrix_entries(pts[i].k)});
        }
        return t;
    };

    app.add_subcommand("verify", "Check the known closed-form identities; exit status 1 on any mismatch");
    actions["verify"] = [&] { return run_verify(g.limits(), g.exec()); };

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_usage;
    }

    const CLI::App* sub = app.get_subcommands().front();
    set_threads(g.jobs);
    err << resolved_config(app, sub).dump() << '\n';

    try {
        const Table t = actions.at(sub->get_name())();
        std::ofstream file;
        if (!g.output.empty()) {
            file.open(g.output);
            if (!file) throw std::invalid_argument("cannot open --output " + g.output);
        }
        std::ostream& o = g.output.empty() ? out : file;
        const char* no_color = std::getenv("NO_COLOR");
        const bool use_color = color && g.output.empty() && !(no_color && *no_color);
        if (g.format == "csv")
            write_csv(t, o);
        else if (g.format == "json")
            write_json(t, o);
        else
            write_pretty(t, o, use_color);
        o.flush();
        if (sub->get_name() == "verify" && t.details.value("failed", 0) > 0) return exit_verify_failed;
        return exit_ok;
    } catch (const CapacityError& e) {
        err << "capacity: " << e.what() << '\n';
        return exit_capacity;
    } catch (const ConvergenceError& e) {
        err << "convergence: " << e.what() << '\n';
        return exit_runtime;
    } catch (const std::invalid_argument& e) {
        err << "usage: " << e.what() << '\n';
        return exit_usage;
    } catch (const std::domain_error& e) {
        err << "usage: " << e.what() << '\n';
        return exit_usage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_runtime;
    }
}

int main_entry(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(args, std::cout, std::cerr, ::isatty(STDOUT_FILENO) != 0);
}

} // namespace hecke::cli
