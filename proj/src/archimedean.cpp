#include "hecke/archimedean.hpp"

#include "hecke/errors.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace hecke::arch {

namespace {

constexpr double kPi = 3.14159265358979323846;

void check_model_vec(const GroupModel& model, const Vec& h, const char* what) {
    if (h.size() != model.rank())
        throw std::invalid_argument(std::string(what) + ": expected a vector of length " +
                                    std::to_string(model.rank()));
    if (!h.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite entries");
}

void check_square(const GroupModel& model, const Mat& g, const char* what) {
    if (g.rows() != model.n() || g.cols() != model.n())
        throw std::invalid_argument(std::string(what) + ": expected an " + std::to_string(model.n()) + "x" +
                                    std::to_string(model.n()) + " matrix");
    if (!g.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite entries");
}

void check_group_element(const GroupModel& model, const Mat& g, const char* what) {
    check_square(model, g, what);
    const double det = g.determinant();
    if (std::fabs(det - 1) > 1e-9) throw std::invalid_argument(std::string(what) + ": det g must be 1");
    Eigen::JacobiSVD<Mat> svd(g);
    const auto& s = svd.singularValues();
    if (s(s.size() - 1) <= 0 || s(0) / s(s.size() - 1) > 1e12)
        throw std::invalid_argument(std::string(what) + ": matrix is singular or too ill-conditioned");
}

// g = U Q with U upper triangular with positive diagonal and Q in SO(n).
void nak_factor(const Mat& g, Mat& upper, Mat& orth) {
    const int n = static_cast<int>(g.rows());
    const Mat J = Mat::Identity(n, n).rowwise().reverse();
    Eigen::HouseholderQR<Mat> qr(g.transpose() * J);
    const Mat q1 = qr.householderQ();
    const Mat r1 = qr.matrixQR().triangularView<Eigen::Upper>();
    upper = J * r1.transpose() * J;
    orth = J * q1.transpose();
    for (int i = 0; i < n; ++i) {
        if (upper(i, i) < 0) {
            upper.col(i) *= -1;
            orth.row(i) *= -1;
        }
    }
}

Vec log_diagonal(const Mat& upper) {
    Vec d(upper.rows());
    for (int i = 0; i < upper.rows(); ++i) d(i) = std::log(upper(i, i));
    d.array() -= d.mean();
    return d;
}

Mat expm_skew(const Mat& Y) {
    const int n = static_cast<int>(Y.rows());
    const Mat Y2 = Y * Y;
    const double theta = std::sqrt(std::max(0.0, -Y2.trace() / 2));
    const Mat I = Mat::Identity(n, n);
    if (theta < 1e-8) return I + Y + Y2 / 2;
    return I + std::sin(theta) / theta * Y + (1 - std::cos(theta)) / (theta * theta) * Y2;
}

Mat skew_from(const GroupModel& model, const Vec& y) {
    Mat Y = Mat::Zero(model.n(), model.n());
    for (int j = 0; j < model.dim_k(); ++j) Y += y(j) * model.k_basis()[static_cast<std::size_t>(j)];
    return Y;
}

void gauss_legendre(int m, std::vector<double>& x, std::vector<double>& w) {
    x.assign(static_cast<std::size_t>(m), 0);
    w.assign(static_cast<std::size_t>(m), 0);
    for (int i = 0; i < (m + 1) / 2; ++i) {
        double z = std::cos(kPi * (i + 0.75) / (m + 0.5));
        double dp = 0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1, p1 = z;
            for (int k = 2; k <= m; ++k) {
                const double p2 = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = m * (z * p1 - p0) / (z * z - 1);
            const double dz = p1 / dp;
            z -= dz;
            if (std::fabs(dz) < 1e-16) break;
        }
        double p0 = 1, p1 = z;
        for (int k = 2; k <= m; ++k) {
            const double p2 = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        dp = m * (z * p1 - p0) / (z * z - 1);
        const auto a = static_cast<std::size_t>(i), b = static_cast<std::size_t>(m - 1 - i);
        x[a] = -z;
        x[b] = z;
        w[a] = w[b] = 2 / ((1 - z * z) * dp * dp);
    }
}

// Nodes on SO(n) carrying only the rows that determine the height, plus
// weights summing to one. The integrand is invariant under left
// multiplication by M, which halves the first angle.
struct KGrid {
    int n = 0;
    int stride = 0;
    std::vector<double> data;

    std::size_t size() const { return data.size() / static_cast<std::size_t>(stride); }
};

KGrid make_k_grid(int n, int m) {
    KGrid grid;
    grid.n = n;
    if (n == 2) {
        grid.stride = 3;
        for (int j = 0; j < m; ++j) {
            const double th = kPi * j / m;
            grid.data.insert(grid.data.end(), {std::sin(th), std::cos(th), 1.0 / m});
        }
        return grid;
    }
    grid.stride = 7;
    std::vector<double> bx, bw;
    gauss_legendre(m, bx, bw);
    const int mg = 2 * m;
    grid.data.reserve(static_cast<std::size_t>(m) * m * mg * 7);
    for (int ia = 0; ia < m; ++ia) {
        const double al = kPi * ia / m;
        const double ca = std::cos(al), sa = std::sin(al);
        for (int ib = 0; ib < m; ++ib) {
            const double cb = bx[static_cast<std::size_t>(ib)], sb = std::sqrt(std::max(0.0, 1 - cb * cb));
            const double wab = bw[static_cast<std::size_t>(ib)] / 2 / m / mg;
            for (int ig = 0; ig < mg; ++ig) {
                const double ga = 2 * kPi * ig / mg;
                const double cg = std::cos(ga), sg = std::sin(ga);
                // Rows 1 and 3 of Rz(al) Ry(be) Rz(ga).
                const double r11 = ca * cb * cg - sa * sg, r12 = -ca * cb * sg - sa * cg, r13 = ca * sb;
                const double r31 = -sb * cg, r32 = sb * sg, r33 = cb;
                grid.data.insert(grid.data.end(), {r11, r12, r13, r31, r32, r33, wab});
            }
        }
    }
    return grid;
}

// exp((rho + i nu)(H)) expressed through the two (n = 3) or one (n = 2)
// independent log-diagonal entries of H.
struct Phase {
    cplx c2;
    cplx c3;
};

Phase make_phase(const GroupModel& model, const Vec& nu) {
    const int n = model.n();
    const Vec dn = model.to_diagonal(nu) * model.killing_scale();
    std::vector<cplx> w(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) w[static_cast<std::size_t>(j)] = cplx((n + 1 - 2.0 * (j + 1)) / 2, dn(j));
    Phase ph;
    ph.c2 = w[1] - w[0];
    ph.c3 = n == 3 ? w[2] - w[0] : cplx(0);
    return ph;
}

// Symmetric P = g g^T and its inverse, packed.
struct Quadric {
    double p[9];
    double q[9];
};

Quadric make_quadric(const Mat& g) {
    Quadric out{};
    const Mat P = g * g.transpose();
    const Mat Q = P.inverse();
    const int n = static_cast<int>(g.rows());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            out.p[3 * i + j] = P(i, j);
            out.q[3 * i + j] = Q(i, j);
        }
    return out;
}

inline cplx k_term(const KGrid& grid, const Quadric& Q, const Phase& ph, std::size_t idx) {
    const double* r = grid.data.data() + idx * static_cast<std::size_t>(grid.stride);
    cplx e;
    double w;
    if (grid.n == 2) {
        const double s = r[0], c = r[1];
        const double q = Q.p[0] * s * s + 2 * Q.p[1] * s * c + Q.p[4] * c * c;
        e = ph.c2 * (0.5 * std::log(q));
        w = r[2];
    } else {
        const double* P = Q.p;
        const double* R = Q.q;
        const double x1 = r[0], x2 = r[1], x3 = r[2], y1 = r[3], y2 = r[4], y3 = r[5];
        const double q3 = P[0] * y1 * y1 + P[4] * y2 * y2 + P[8] * y3 * y3 +
                          2 * (P[1] * y1 * y2 + P[2] * y1 * y3 + P[5] * y2 * y3);
        const double q1 = R[0] * x1 * x1 + R[4] * x2 * x2 + R[8] * x3 * x3 +
                          2 * (R[1] * x1 * x2 + R[2] * x1 * x3 + R[5] * x2 * x3);
        const double l3 = 0.5 * std::log(q3);
        const double l2 = 0.5 * std::log(q1) - l3;
        e = ph.c2 * l2 + ph.c3 * l3;
        w = r[6];
    }
    const double mag = w * std::exp(e.real());
    return {mag * std::cos(e.imag()), mag * std::sin(e.imag())};
}

cplx k_sum_serial(const KGrid& grid, const Quadric& Q, const Phase& ph) {
    double re = 0, im = 0;
    const std::size_t m = grid.size();
    for (std::size_t i = 0; i < m; ++i) {
        const cplx v = k_term(grid, Q, ph, i);
        re += v.real();
        im += v.imag();
    }
    return {re, im};
}

cplx k_sum_parallel(const KGrid& grid, const Quadric& Q, const Phase& ph) {
    double re = 0, im = 0;
    const long m = static_cast<long>(grid.size());
#pragma omp parallel for schedule(static) reduction(+ : re, im)
    for (long i = 0; i < m; ++i) {
        const cplx v = k_term(grid, Q, ph, static_cast<std::size_t>(i));
        re += v.real();
        im += v.imag();
    }
    return {re, im};
}

// Weighted points of A at which the K-integral is evaluated.
struct ANode {
    Vec h;
    double w;
};

// Sum over A nodes of w * phi(X(node)), parallel over nodes.
template <class MakeQuadric>
cplx a_sum(const std::vector<ANode>& nodes, const KGrid& grid, const Phase& ph, MakeQuadric&& quadric, Exec exec) {
    const long count = static_cast<long>(nodes.size());
    if (exec == Exec::serial) {
        cplx acc = 0;
        for (long i = 0; i < count; ++i) {
            const auto& nd = nodes[static_cast<std::size_t>(i)];
            acc += nd.w * k_sum_serial(grid, quadric(i), ph);
        }
        return acc;
    }
    double re = 0, im = 0;
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1) reduction(+ : re, im)
    for (long i = 0; i < count; ++i) {
        try {
            const auto& nd = nodes[static_cast<std::size_t>(i)];
            const cplx v = nd.w * k_sum_serial(grid, quadric(i), ph);
            re += v.real();
            im += v.imag();
        } catch (...) {
#pragma omp critical(hecke_arch_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return {re, im};
}

int level_nodes(double base, const QuadratureSpec& q, int level) {
    return static_cast<int>(std::ceil(base * std::pow(q.growth, level)));
}

// Runs levels 0, 1, ... until two consecutive values agree. cost(level)
// returns the evaluation count, eval(level) the value.
template <class Cost, class Eval>
QuadratureResult refine(const QuadratureSpec& q, Cost&& cost, Eval&& eval, const char* what) {
    QuadratureResult res;
    for (int level = 0; level <= q.max_levels; ++level) {
        const std::uint64_t c = cost(level);
        if (c > q.max_evaluations) {
            if (level == 0)
                throw CapacityError(std::string(what) + ": first quadrature level needs " + std::to_string(c) +
                                    " evaluations, above the ceiling");
            break;
        }
        const cplx v = eval(level);
        res.evaluations += c;
        res.levels = level + 1;
        if (level > 0) {
            res.error = std::abs(v - res.value);
            res.value = v;
            if (res.error <= std::max(q.abs_tol, q.rel_tol * std::abs(v))) {
                res.converged = true;
                break;
            }
        } else {
            res.value = v;
        }
    }
    return res;
}

// Norm of the Cartan projection of g, bounding |H(kg)| for all k.
double cartan_norm(const GroupModel& model, const Mat& g) {
    Eigen::JacobiSVD<Mat> svd(g);
    Vec d = svd.singularValues().array().log().matrix();
    d.array() -= d.mean();
    return model.from_diagonal(d).norm();
}

// Right chamber boundaries in the plane of coordinates for n = 3.
double chamber_start(const GroupModel& model) {
    const double start = kPi / 6;
    const double mid = start + kPi / 6;
    const Vec probe = (Vec(2) << std::cos(mid), std::sin(mid)).finished();
    for (const auto& a : model.positive_roots())
        if (a.dot(probe) <= 0) throw std::logic_error("chamber_start: basis does not match the positive chamber");
    return start;
}

Iwasawa iwasawa_raw(const GroupModel& model, const Mat& g) {
    Iwasawa out;
    Mat upper, orth;
    nak_factor(g, upper, orth);
    const Vec d = log_diagonal(upper);
    Vec diag = upper.diagonal();
    out.n = upper * diag.cwiseInverse().asDiagonal();
    out.h = model.from_diagonal(d);
    out.k = orth;
    out.residual = (out.n * model.exp_a(out.h) * out.k - g).norm();
    return out;
}

double height_pairing(const GroupModel& model, const Vec& h0, const Mat& g) {
    return h0.dot(iwasawa_raw(model, g).h);
}

Mat fd_hessian(const std::function<double(const Vec&)>& F, int dim, double h) {
    Mat H(dim, dim);
    const Vec z = Vec::Zero(dim);
    const double f0 = F(z);
    for (int i = 0; i < dim; ++i) {
        Vec e = z;
        e(i) = h;
        H(i, i) = (F(e) - 2 * f0 + F(-e)) / (h * h);
        for (int j = i + 1; j < dim; ++j) {
            Vec ej = z;
            ej(j) = h;
            H(i, j) = H(j, i) = (F(e + ej) - F(e - ej) - F(-e + ej) + F(-e - ej)) / (4 * h * h);
        }
    }
    return H;
}

Mat jacobian_f(const GroupModel& model, const Vec& h0, const Mat& k) {
    const Mat S = k.transpose() * model.to_diagonal(h0).asDiagonal() * k;
    Mat J(model.rank(), model.dim_k());
    for (int j = 0; j < model.dim_k(); ++j) {
        const Mat& Y = model.k_basis()[static_cast<std::size_t>(j)];
        const Mat C = S * Y - Y * S;
        J.col(j) = model.from_diagonal(C.diagonal());
    }
    return J;
}

int numeric_rank(const Vec& sv) {
    if (sv.size() == 0) return 0;
    const double top = sv(0);
    int r = 0;
    for (int i = 0; i < sv.size(); ++i)
        if (sv(i) > 1e-8 * std::max(1.0, top)) ++r;
    return r;
}

double reduce_angle(double th) {
    // Representative modulo pi in (-pi/2, pi/2].
    th = std::fmod(th, kPi);
    if (th > kPi / 2) th -= kPi;
    if (th <= -kPi / 2) th += kPi;
    return th;
}

} // namespace

// ---------------------------------------------------------------- model

GroupModel::GroupModel(int n) : n_(n) {
    if (n != 2 && n != 3) throw std::invalid_argument("GroupModel: n must be 2 or 3");
    const int r = n - 1;
    diag_basis_ = Mat::Zero(n, r);
    if (n == 2) {
        diag_basis_.col(0) << 1, -1;
        diag_basis_.col(0) /= std::sqrt(8.0);
    } else {
        diag_basis_.col(0) << 1, -1, 0;
        diag_basis_.col(0) /= std::sqrt(12.0);
        diag_basis_.col(1) << 1, 1, -2;
        diag_basis_.col(1) /= 6.0;
    }
    rho_ = Vec::Zero(r);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < n; ++j) rho_(i) += diag_basis_(j, i) * (n + 1 - 2.0 * (j + 1)) / 2;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) roots_.push_back((diag_basis_.row(i) - diag_basis_.row(j)).transpose());

    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    do {
        Mat P = Mat::Zero(n, n);
        for (int i = 0; i < n; ++i) P(i, perm[static_cast<std::size_t>(i)]) = 1;
        Mat W(r, r);
        for (int c = 0; c < r; ++c) W.col(c) = from_diagonal(P * diag_basis_.col(c));
        weyl_.push_back(W);
        Mat rep = P;
        if (rep.determinant() < 0) rep.row(0) *= -1;
        weyl_reps_.push_back(rep);
    } while (std::next_permutation(perm.begin(), perm.end()));

    for (int mask = 0; mask < (1 << n); ++mask) {
        Mat m = Mat::Identity(n, n);
        int neg = 0;
        for (int i = 0; i < n; ++i)
            if (mask >> i & 1) {
                m(i, i) = -1;
                ++neg;
            }
        if (neg % 2 == 0) m_.push_back(m);
    }
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            Mat Y = Mat::Zero(n, n);
            Y(i, j) = -1 / std::sqrt(2.0);
            Y(j, i) = 1 / std::sqrt(2.0);
            k_basis_.push_back(Y);
        }
}

Vec GroupModel::to_diagonal(const Vec& h) const { return diag_basis_ * h; }

Vec GroupModel::from_diagonal(const Vec& d) const { return killing_scale() * diag_basis_.transpose() * d; }

Mat GroupModel::exp_a(const Vec& h) const {
    return to_diagonal(h).array().exp().matrix().asDiagonal();
}

std::vector<Vec> GroupModel::coroots() const { return roots_; }

Vec GroupModel::f_map(const Vec& h0, const Mat& k) const {
    const Mat S = k.transpose() * to_diagonal(h0).asDiagonal() * k;
    return from_diagonal(S.diagonal());
}

// ---------------------------------------------------------------- Iwasawa

Iwasawa iwasawa(const GroupModel& model, const Mat& g) {
    check_group_element(model, g, "iwasawa");
    auto out = iwasawa_raw(model, g);
    if (out.residual > 1e-10 * std::max(1.0, g.norm()))
        throw ConvergenceError("iwasawa: reconstruction residual " + std::to_string(out.residual));
    return out;
}

Vec iwasawa_height(const GroupModel& model, const Mat& g) { return iwasawa(model, g).h; }

Mat random_k(const GroupModel& model, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    const int n = model.n();
    Mat z(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) z(i, j) = normal(rng);
    Eigen::HouseholderQR<Mat> qr(z);
    Mat q = qr.householderQ();
    const Mat r = qr.matrixQR();
    for (int i = 0; i < n; ++i)
        if (r(i, i) < 0) q.col(i) *= -1;
    if (q.determinant() < 0) q.col(0) *= -1;
    return q;
}

Mat random_g(const GroupModel& model, double radius, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif(0, 1);
    Vec dir(model.rank());
    for (int i = 0; i < dir.size(); ++i) dir(i) = normal(rng);
    dir.normalize();
    const double rad = radius * std::pow(unif(rng), 1.0 / model.rank());
    const Mat k1 = random_k(model, rng);
    const Mat k2 = random_k(model, rng);
    return k1 * model.exp_a(rad * dir) * k2;
}

// ---------------------------------------------------------------- spectral data

bool SpectralPoint::regular(const GroupModel& model) const {
    check_model_vec(model, h0, "SpectralPoint");
    const double norm = h0.norm();
    if (norm == 0) return false;
    for (const auto& a : model.positive_roots())
        if (std::fabs(a.dot(h0)) / a.norm() <= 1e-6 * norm) return false;
    return true;
}

bool SpectralPoint::generic(const GroupModel& model) const {
    if (!regular(model)) return false;
    const double norm = h0.norm();
    // Proper root-spanned subspaces: {0} and, in rank two, the root lines.
    if (model.rank() == 2) {
        for (const auto& a : model.coroots()) {
            const Vec u = a.normalized();
            if ((h0 - h0.dot(u) * u).norm() <= 1e-6 * norm) return false;
        }
    }
    return true;
}

double BumpFunction::operator()(double r) const {
    const double x = r / radius;
    if (x >= 1) return 0;
    return std::exp(1 - 1 / (1 - x * x));
}

double BumpFunction::integral(int rank) const {
    if (radius <= 0) throw std::invalid_argument("BumpFunction: radius must be positive");
    std::vector<double> x, w;
    gauss_legendre(400, x, w);
    double acc = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = radius * (x[i] + 1) / 2;
        const double jac = rank == 1 ? 2.0 : 2 * kPi * r;
        acc += w[i] * radius / 2 * (*this)(r)*jac;
    }
    return acc;
}

void QuadratureSpec::validate() const {
    if (k_points < 2 || a_points < 2) throw std::invalid_argument("quadrature: need at least two nodes per direction");
    if (!(growth > 1)) throw std::invalid_argument("quadrature: growth must exceed 1");
    if (max_levels < 1) throw std::invalid_argument("quadrature: need at least one refinement level");
    if (oscillation_factor < 0 || abs_tol < 0 || rel_tol < 0)
        throw std::invalid_argument("quadrature: tolerances and factors must be nonnegative");
    if (t_cap < 0) throw std::invalid_argument("quadrature: t_cap must be nonnegative");
}

double QuadratureSpec::cap_for(const GroupModel& model) const {
    if (t_cap > 0) return t_cap;
    return model.n() == 2 ? 100.0 : 40.0;
}

const QuadratureResult& QuadratureResult::require_converged(const std::string& what) const {
    if (!converged) {
        std::ostringstream os;
        os.precision(12);
        os << what << ": quadrature did not converge; estimate " << value.real() << (value.imag() < 0 ? " - " : " + ")
           << std::fabs(value.imag()) << "i, last change " << error;
        throw ConvergenceError(os.str());
    }
    return *this;
}

// ---------------------------------------------------------------- spherical function

cplx spherical_function_fixed(const GroupModel& model, const Vec& nu, const Mat& g, int k_nodes) {
    check_model_vec(model, nu, "spherical_function");
    check_group_element(model, g, "spherical_function");
    if (k_nodes < 1) throw std::invalid_argument("spherical_function: need at least one node");
    const KGrid grid = make_k_grid(model.n(), k_nodes);
    return k_sum_serial(grid, make_quadric(g), make_phase(model, nu));
}

QuadratureResult spherical_function(const GroupModel& model, const Vec& nu, const Mat& g, const QuadratureSpec& quad,
                                    Exec exec) {
    check_model_vec(model, nu, "spherical_function");
    check_group_element(model, g, "spherical_function");
    quad.validate();
    const double phi = 2 * nu.norm() * cartan_norm(model, g);
    const Quadric Q = make_quadric(g);
    const Phase ph = make_phase(model, nu);
    const auto nodes = [&](int level) {
        return level_nodes(quad.k_points + quad.oscillation_factor * phi / 2, quad, level);
    };
    const auto cost = [&](int level) {
        const auto m = static_cast<std::uint64_t>(nodes(level));
        return model.n() == 2 ? m : 2 * m * m * m;
    };
    const auto eval = [&](int level) {
        const KGrid grid = make_k_grid(model.n(), nodes(level));
        return exec == Exec::serial ? k_sum_serial(grid, Q, ph) : k_sum_parallel(grid, Q, ph);
    };
    return refine(quad, cost, eval, "spherical_function");
}

// ---------------------------------------------------------------- model integrals

ModelIntegral model_integral_I(const GroupModel& model, const SpectralPoint& point, const BumpFunction& bump,
                               const QuadratureSpec& quad, Exec exec) {
    check_model_vec(model, point.h0, "model_integral_I");
    quad.validate();
    if (!(point.t >= 0)) throw std::invalid_argument("model_integral_I: t must be nonnegative");
    if (point.t > quad.cap_for(model)) throw std::invalid_argument("model_integral_I: t exceeds the configured cap");
    if (!(bump.radius > 0)) throw std::invalid_argument("model_integral_I: bump radius must be positive");

    const double R0 = bump.radius;
    const double phi = 2 * point.t * point.h0.norm() * R0;
    const Phase ph = make_phase(model, point.t * point.h0);
    const int r = model.rank();
    const double weyl_order = static_cast<double>(model.weyl_actions().size());
    const double start = r == 2 ? chamber_start(model) : 0.0;

    const auto k_nodes = [&](int level) {
        return level_nodes(quad.k_points + quad.oscillation_factor * phi / 2, quad, level);
    };
    const auto r_nodes = [&](int level) {
        return level_nodes(quad.a_points + quad.oscillation_factor * phi / 2, quad, level);
    };
    const auto psi_nodes = [&](int level) {
        return level_nodes(quad.a_points / 2.0 + quad.oscillation_factor * phi / 6, quad, level);
    };
    // The integrand is invariant under the Weyl group and the bump is radial,
    // so only the positive chamber is integrated.
    const auto a_nodes = [&](int level) {
        std::vector<ANode> out;
        std::vector<double> rx, rw;
        gauss_legendre(r_nodes(level), rx, rw);
        if (r == 1) {
            for (std::size_t i = 0; i < rx.size(); ++i) {
                const double s = R0 * (rx[i] + 1) / 2;
                out.push_back({(Vec(1) << s).finished(), weyl_order * R0 / 2 * rw[i] * bump(s)});
            }
            return out;
        }
        std::vector<double> px, pw;
        gauss_legendre(psi_nodes(level), px, pw);
        const double width = kPi / 3;
        for (std::size_t i = 0; i < rx.size(); ++i) {
            const double rad = R0 * (rx[i] + 1) / 2;
            for (std::size_t j = 0; j < px.size(); ++j) {
                const double psi = start + width * (px[j] + 1) / 2;
                const Vec h = (Vec(2) << rad * std::cos(psi), rad * std::sin(psi)).finished();
                out.push_back({h, weyl_order * R0 / 2 * rw[i] * width / 2 * pw[j] * rad * bump(rad)});
            }
        }
        return out;
    };
    const auto cost = [&](int level) {
        const auto m = static_cast<std::uint64_t>(k_nodes(level));
        const std::uint64_t kn = model.n() == 2 ? m : 2 * m * m * m;
        std::uint64_t an = static_cast<std::uint64_t>(r_nodes(level));
        if (r == 2) an *= static_cast<std::uint64_t>(psi_nodes(level));
        return kn * an;
    };
    const auto eval = [&](int level) {
        const KGrid grid = make_k_grid(model.n(), k_nodes(level));
        const auto nodes = a_nodes(level);
        return a_sum(nodes, grid, ph,
                     [&](long i) { return make_quadric(model.exp_a(nodes[static_cast<std::size_t>(i)].h)); }, exec);
    };
    ModelIntegral out;
    out.integral = refine(quad, cost, eval, "model_integral_I");
    out.scaled = std::pow(point.t, r) * std::abs(out.integral.value);
    return out;
}

OrbitalIntegral orbital_integral_J(const GroupModel& model, const SpectralPoint& point, const Mat& g,
                                   const BumpFunction& bump, const QuadratureSpec& quad, Exec exec) {
    check_model_vec(model, point.h0, "orbital_integral_J");
    check_group_element(model, g, "orbital_integral_J");
    quad.validate();
    if (!(point.t >= 0)) throw std::invalid_argument("orbital_integral_J: t must be nonnegative");
    if (point.t > quad.cap_for(model)) throw std::invalid_argument("orbital_integral_J: t exceeds the configured cap");
    if (!(bump.radius > 0)) throw std::invalid_argument("orbital_integral_J: bump radius must be positive");

    const double R0 = bump.radius;
    const double span = cartan_norm(model, g) + 2 * R0;
    const double phi = 2 * point.t * point.h0.norm() * span;
    const double phi_a = 2 * point.t * point.h0.norm() * R0;
    const Phase ph = make_phase(model, point.t * point.h0);
    const int r = model.rank();

    const auto k_nodes = [&](int level) {
        return level_nodes(quad.k_points + quad.oscillation_factor * phi / 2, quad, level);
    };
    const auto r_nodes = [&](int level) {
        return level_nodes(quad.a_points + quad.oscillation_factor * phi_a, quad, level);
    };
    const auto th_nodes = [&](int level) {
        return level_nodes(quad.a_points + quad.oscillation_factor * phi_a, quad, level);
    };
    // Nodes for one factor of A x A: the full ball of radius R0.
    const auto factor_nodes = [&](int level) {
        std::vector<ANode> out;
        std::vector<double> rx, rw;
        if (r == 1) {
            gauss_legendre(r_nodes(level), rx, rw);
            for (std::size_t i = 0; i < rx.size(); ++i) {
                const double s = R0 * rx[i];
                out.push_back({(Vec(1) << s).finished(), R0 * rw[i] * bump(std::fabs(s))});
            }
            return out;
        }
        gauss_legendre(std::max(2, r_nodes(level) / 2), rx, rw);
        const int mt = th_nodes(level);
        for (std::size_t i = 0; i < rx.size(); ++i) {
            const double rad = R0 * (rx[i] + 1) / 2;
            for (int j = 0; j < mt; ++j) {
                const double th = 2 * kPi * j / mt;
                const Vec h = (Vec(2) << rad * std::cos(th), rad * std::sin(th)).finished();
                out.push_back({h, R0 / 2 * rw[i] * 2 * kPi / mt * rad * bump(rad)});
            }
        }
        return out;
    };
    const auto cost = [&](int level) {
        const auto m = static_cast<std::uint64_t>(k_nodes(level));
        const std::uint64_t kn = model.n() == 2 ? m : 2 * m * m * m;
        const auto f = static_cast<std::uint64_t>(factor_nodes(level).size());
        return kn * f * f;
    };
    const auto eval = [&](int level) {
        const KGrid grid = make_k_grid(model.n(), k_nodes(level));
        const auto f = factor_nodes(level);
        std::vector<ANode> pairs;
        pairs.reserve(f.size() * f.size());
        std::vector<std::pair<std::size_t, std::size_t>> index;
        for (std::size_t i = 0; i < f.size(); ++i)
            for (std::size_t j = 0; j < f.size(); ++j) {
                if (f[i].w == 0 || f[j].w == 0) continue;
                pairs.push_back({Vec(), f[i].w * f[j].w});
                index.emplace_back(i, j);
            }
        return a_sum(pairs, grid, ph,
                     [&](long p) {
                         const auto [i, j] = index[static_cast<std::size_t>(p)];
                         const Mat X = model.exp_a(-f[i].h) * g * model.exp_a(f[j].h);
                         return make_quadric(X);
                     },
                     exec);
    };
    OrbitalIntegral out;
    out.integral = refine(quad, cost, eval, "orbital_integral_J");
    out.scaled = std::pow(point.t, r) * std::abs(out.integral.value);
    out.levi_distance = levi_distance(model, g);
    return out;
}

double levi_distance(const GroupModel& model, const Mat& g) {
    check_square(model, g, "levi_distance");
    const int n = model.n();
    // Column blocks of the semistandard Levi subgroups other than G.
    std::vector<std::vector<int>> blocks;
    if (n == 2) {
        blocks = {{0, 1}};
    } else {
        blocks = {{0, 1, 2}, {0, 0, 1}, {0, 1, 1}, {0, 1, 0}};
    }
    std::vector<int> perm(static_cast<std::size_t>(n));
    double best = std::numeric_limits<double>::infinity();
    for (const auto& blk : blocks) {
        std::iota(perm.begin(), perm.end(), 0);
        do {
            // Entry (perm[i], j) is allowed when i and j lie in the same block.
            double off = 0;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    if (blk[static_cast<std::size_t>(i)] != blk[static_cast<std::size_t>(j)]) {
                        const double v = g(perm[static_cast<std::size_t>(i)], j);
                        off += v * v;
                    }
            best = std::min(best, std::sqrt(off));
        } while (std::next_permutation(perm.begin(), perm.end()));
    }
    return best;
}

// ---------------------------------------------------------------- critical sets

std::optional<CriticalPoint> critical_point_from(const GroupModel& model, const Vec& h0, const Mat& seed,
                                                 const CriticalSetOptions& opts) {
    check_model_vec(model, h0, "critical_point_from");
    check_square(model, seed, "critical_point_from");
    Mat k = seed;
    const double scale = std::max(1.0, h0.norm());
    for (int it = 0; it < opts.max_iterations; ++it) {
        const Vec f = model.f_map(h0, k);
        if (f.norm() <= 1e-15 * scale) break;
        const Mat J = jacobian_f(model, h0, k);
        Eigen::JacobiSVD<Mat> svd(J, Eigen::ComputeThinU | Eigen::ComputeThinV);
        Vec y = -svd.solve(f);
        const double len = y.norm();
        if (len > 0.5) y *= 0.5 / len;
        k = k * expm_skew(skew_from(model, y));
        if (len < 1e-15) break;
    }
    // Re-orthonormalize against drift.
    Mat U, Q;
    nak_factor(k, U, Q);
    k = Q;
    CriticalPoint cp;
    cp.k = k;
    cp.residual = model.f_map(h0, k).norm();
    if (!(cp.residual < opts.residual_tol)) return std::nullopt;
    Eigen::JacobiSVD<Mat> svd(jacobian_f(model, h0, k));
    cp.jacobian_rank = numeric_rank(svd.singularValues());
    cp.levi_distance = levi_distance(model, k);
    if (model.n() == 2) {
        cp.angle = reduce_angle(std::atan2(k(1, 0), k(0, 0)));
        const double c = std::cos(cp.angle), s = std::sin(cp.angle);
        cp.k = (Mat(2, 2) << c, -s, s, c).finished();
    }
    return cp;
}

std::vector<CriticalPoint> critical_set_solve(const GroupModel& model, const Vec& h0, const CriticalSetOptions& opts,
                                              Exec exec) {
    check_model_vec(model, h0, "critical_set_solve");
    if (opts.seeds < 1) throw std::invalid_argument("critical_set_solve: need at least one seed");
    if (!SpectralPoint{h0, 1}.generic(model)) throw std::invalid_argument("critical_set_solve: H0 must be generic");
    std::mt19937_64 rng(opts.rng_seed);
    std::vector<Mat> seeds;
    for (int i = 0; i < opts.seeds; ++i) seeds.push_back(random_k(model, rng));
    std::vector<std::optional<CriticalPoint>> found(seeds.size());
    const long count = static_cast<long>(seeds.size());
    if (exec == Exec::serial) {
        for (long i = 0; i < count; ++i)
            found[static_cast<std::size_t>(i)] = critical_point_from(model, h0, seeds[static_cast<std::size_t>(i)], opts);
    } else {
        std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
        for (long i = 0; i < count; ++i) {
            try {
                found[static_cast<std::size_t>(i)] =
                    critical_point_from(model, h0, seeds[static_cast<std::size_t>(i)], opts);
            } catch (...) {
#pragma omp critical(hecke_crit_failure)
                if (!failure) failure = std::current_exception();
            }
        }
        if (failure) std::rethrow_exception(failure);
    }
    std::vector<CriticalPoint> out;
    for (auto& f : found) {
        if (!f || f->jacobian_rank != model.rank() || f->levi_distance <= opts.merge_tol) continue;
        bool dup = false;
        for (const auto& o : out) {
            for (const auto& m : model.m_group())
                if ((m * f->k - o.k).norm() < opts.merge_tol) dup = true;
            if (dup) break;
        }
        if (!dup) out.push_back(*f);
    }
    if (out.empty())
        throw ConvergenceError("critical_set_solve: no verified solution from " + std::to_string(opts.seeds) +
                               " seeds; the seed count may be insufficient");
    if (model.n() == 2)
        std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.angle < b.angle; });
    return out;
}

Mat critical_tangent(const GroupModel& model, const Vec& h0, const Mat& k) {
    check_model_vec(model, h0, "critical_tangent");
    check_square(model, k, "critical_tangent");
    const Mat J = jacobian_f(model, h0, k);
    Eigen::JacobiSVD<Mat> svd(J, Eigen::ComputeFullV);
    const int rank = numeric_rank(svd.singularValues());
    return svd.matrixV().rightCols(model.dim_k() - rank);
}

HessianSignature hessian_signature(const GroupModel& model, const Vec& h0, const Mat& k_crit, double h) {
    check_model_vec(model, h0, "hessian_signature");
    check_square(model, k_crit, "hessian_signature");
    if (!(h > 0)) throw std::invalid_argument("hessian_signature: step must be positive");
    const int r = model.rank();
    const int dim = r + model.dim_k();
    const std::function<double(const Vec&)> F = [&](const Vec& z) {
        const Mat k = k_crit * expm_skew(skew_from(model, z.tail(model.dim_k())));
        return height_pairing(model, h0, k * model.exp_a(z.head(r)));
    };
    const Mat H1 = fd_hessian(F, dim, h);
    const Mat H2 = fd_hessian(F, dim, h / 2);
    const Mat H = (4 * H2 - H1) / 3;
    Eigen::SelfAdjointEigenSolver<Mat> eig((H + H.transpose()) / 2);
    HessianSignature out;
    out.eigenvalues = eig.eigenvalues();
    out.eigenvectors = eig.eigenvectors();
    out.richardson_error = (H1 - H2).cwiseAbs().maxCoeff();
    const double scale = out.eigenvalues.cwiseAbs().maxCoeff();
    const double tau = std::max(1e-5 * scale, 100 * out.richardson_error);
    for (int i = 0; i < dim; ++i) {
        const double l = out.eigenvalues(i);
        if (std::fabs(l) <= tau)
            ++out.zero;
        else if (l > 0)
            ++out.positive;
        else
            ++out.negative;
        if (std::fabs(l) > tau && std::fabs(l) <= 10 * tau) out.ill_conditioned = true;
    }
    if (out.richardson_error > 1e-3 * std::max(1.0, scale)) out.ill_conditioned = true;
    return out;
}

// ---------------------------------------------------------------- height functions

double height_function(const GroupModel& model, const Vec& h0, const Mat& g, const Vec& a) {
    check_model_vec(model, h0, "height_function");
    check_model_vec(model, a, "height_function");
    check_square(model, g, "height_function");
    return height_pairing(model, h0, g * model.exp_a(a));
}

Vec height_gradient(const GroupModel& model, const Vec& h0, const Mat& g, const Vec& a) {
    check_model_vec(model, h0, "height_gradient");
    check_model_vec(model, a, "height_gradient");
    check_square(model, g, "height_gradient");
    Mat U, Q;
    nak_factor(g * model.exp_a(a), U, Q);
    return model.f_map(h0, Q);
}

std::optional<FlatCriticalPoint> flat_critical_point(const GroupModel& model, const Vec& h0, const Mat& g,
                                                     const FlatOptions& opts) {
    check_model_vec(model, h0, "flat_critical_point");
    check_group_element(model, g, "flat_critical_point");
    const int r = model.rank();
    Vec x = opts.start.size() == 0 ? Vec(Vec::Zero(r)) : opts.start;
    check_model_vec(model, x, "flat_critical_point start");
    const auto grad = [&](const Vec& y) { return height_gradient(model, h0, g, y); };
    const auto value = [&](const Vec& y) { return height_pairing(model, h0, g * model.exp_a(y)); };
    const auto hessian = [&](const Vec& y) {
        const double h = 1e-5;
        Mat H(r, r);
        for (int j = 0; j < r; ++j) {
            Vec e = Vec::Zero(r);
            e(j) = h;
            H.col(j) = (grad(y + e) - grad(y - e)) / (2 * h);
        }
        return Mat((H + H.transpose()) / 2);
    };
    for (int it = 0; it < opts.max_iterations; ++it) {
        const Vec gr = grad(x);
        const Mat H = hessian(x);
        Eigen::SelfAdjointEigenSolver<Mat> eig(H);
        const bool concave = eig.eigenvalues().maxCoeff() < 0;
        if (gr.norm() < opts.gradient_tol) {
            if (!concave) return std::nullopt;
            FlatCriticalPoint out;
            out.a = x;
            out.gradient_norm = gr.norm();
            out.hessian_eigenvalues = eig.eigenvalues();
            out.iterations = it;
            return out;
        }
        Vec step = concave ? Vec(-H.ldlt().solve(gr)) : gr;
        if (step.norm() > 1) step /= step.norm();
        // Near the maximizer take the Newton step; otherwise backtrack.
        if (!(concave && gr.norm() < 1e-6)) {
            const double f0 = value(x);
            double alpha = 1;
            while (alpha > 1e-12 && value(x + alpha * step) < f0 + 1e-4 * alpha * gr.dot(step)) alpha /= 2;
            if (alpha <= 1e-12 && concave) {
                step = gr.norm() > 1 ? Vec(gr / gr.norm()) : gr;
                alpha = 1;
                while (alpha > 1e-12 && value(x + alpha * step) < f0 + 1e-4 * alpha * gr.dot(step)) alpha /= 2;
            }
            step *= alpha;
        }
        x += step;
        if (x.norm() > opts.escape_radius) return std::nullopt;
    }
    return std::nullopt;
}

} // namespace hecke::arch
