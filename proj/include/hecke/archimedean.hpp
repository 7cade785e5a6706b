#pragma once

// Spherical functions and oscillatory model integrals on SL(2,R) and
// SL(3,R), with the stationary-phase diagnostics that govern their decay.
//
// Conventions. G = N A K with N unit upper triangular, A positive diagonal of
// determinant 1 and K = SO(n). The Lie algebra a of A carries coordinates in
// a basis that is orthonormal for the Killing form B(X, Y) = 2n tr(XY); the
// same coordinates describe a* through B, so a spectral parameter nu and the
// element H0 it corresponds to are the same r-vector. Haar measure on A is
// Lebesgue measure in these coordinates; Haar measure on K has total mass 1.

#include "hecke/parallel.hpp"

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace hecke::arch {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using cplx = std::complex<double>;

class GroupModel {
public:
    /// n must be 2 or 3.
    explicit GroupModel(int n);

    int n() const { return n_; }
    int rank() const { return n_ - 1; }
    int dim_k() const { return n_ * (n_ - 1) / 2; }
    /// B(X, Y) = killing_scale() * tr(XY) on sl_n.
    double killing_scale() const { return 2.0 * n_; }

    /// Diagonal entries of the traceless diagonal matrix with coordinates h.
    Vec to_diagonal(const Vec& h) const;
    /// Coordinates of a traceless diagonal matrix given by its diagonal.
    Vec from_diagonal(const Vec& d) const;
    /// exp of the element with coordinates h.
    Mat exp_a(const Vec& h) const;

    /// rho and the positive roots as linear forms in coordinates.
    const Vec& rho() const { return rho_; }
    const std::vector<Vec>& positive_roots() const { return roots_; }
    /// Killing-dual coroot directions, one per positive root.
    std::vector<Vec> coroots() const;

    /// Weyl group acting on coordinates (permutations of the diagonal).
    const std::vector<Mat>& weyl_actions() const { return weyl_; }
    /// Signed permutation matrices of determinant 1 representing M'/M.
    const std::vector<Mat>& weyl_representatives() const { return weyl_reps_; }
    /// M: diagonal sign matrices of determinant 1.
    const std::vector<Mat>& m_group() const { return m_; }

    /// Orthonormal basis of so(n) for tr(X^T Y).
    const std::vector<Mat>& k_basis() const { return k_basis_; }

    /// Coordinates of the a-component of Ad_{k^{-1}} H0 = k^T H0 k.
    Vec f_map(const Vec& h0, const Mat& k) const;

private:
    int n_;
    Mat diag_basis_; // n x r, columns are diagonals of the basis elements
    Vec rho_;
    std::vector<Vec> roots_;
    std::vector<Mat> weyl_;
    std::vector<Mat> weyl_reps_;
    std::vector<Mat> m_;
    std::vector<Mat> k_basis_;
};

/// g = n exp(H) k.
struct Iwasawa {
    Mat n;
    Vec h;
    Mat k;
    /// Frobenius norm of n exp(H) k - g.
    double residual = 0;
};

/// Throws std::invalid_argument unless g is n x n with det g = 1 within 1e-9
/// and condition number below 1e12.
Iwasawa iwasawa(const GroupModel& model, const Mat& g);
Vec iwasawa_height(const GroupModel& model, const Mat& g);

/// Random elements. Haar on K; on G, k1 exp(H) k2 with |H| <= radius.
Mat random_k(const GroupModel& model, std::mt19937_64& rng);
Mat random_g(const GroupModel& model, double radius, std::mt19937_64& rng);

struct SpectralPoint {
    Vec h0;
    double t = 1;

    bool regular(const GroupModel& model) const;
    /// Regular and off every proper root-spanned subspace, relative tolerance
    /// 1e-6 |H0|.
    bool generic(const GroupModel& model) const;
};

/// Radial profile exp(1 - 1 / (1 - (r/R0)^2)) on |log a| < R0. The
/// two-variable version is the product of profiles in each factor.
struct BumpFunction {
    double radius = 1;

    double operator()(double r) const;
    /// Integral over A of the radial profile, in rank r coordinates.
    double integral(int rank) const;
};

struct QuadratureSpec {
    /// Nodes per K direction over a half turn before oscillation scaling.
    int k_points = 12;
    /// Nodes per A direction before oscillation scaling.
    int a_points = 12;
    /// Extra nodes per radian of total phase variation.
    double oscillation_factor = 0.5;
    double growth = 1.5;
    /// Refinement levels tried after the first.
    int max_levels = 5;
    double abs_tol = 1e-9;
    double rel_tol = 1e-6;
    /// Largest admissible t; zero selects 100 for n = 2 and 40 for n = 3.
    double t_cap = 0;
    /// Ceiling on integrand evaluations in a single refinement level.
    std::uint64_t max_evaluations = 4'000'000'000ULL;

    void validate() const;
    double cap_for(const GroupModel& model) const;
};

struct QuadratureResult {
    cplx value;
    /// |value at the last level - value at the level before|.
    double error = 0;
    bool converged = false;
    int levels = 0;
    std::uint64_t evaluations = 0;

    /// Throws ConvergenceError carrying the achieved estimate.
    const QuadratureResult& require_converged(const std::string& what) const;
};

/// Harish-Chandra integral over K of exp((rho + i nu)(H(kg))).
QuadratureResult spherical_function(const GroupModel& model, const Vec& nu, const Mat& g,
                                    const QuadratureSpec& quad = {}, Exec exec = Exec::parallel);

/// One fixed tensor grid; used as the refinement-free reference.
cplx spherical_function_fixed(const GroupModel& model, const Vec& nu, const Mat& g, int k_nodes);

struct ModelIntegral {
    QuadratureResult integral;
    /// t^r |I|.
    double scaled = 0;
};

/// I(t H0) = integral over A of phi_{t H0}(a) b(a).
ModelIntegral model_integral_I(const GroupModel& model, const SpectralPoint& point, const BumpFunction& bump,
                               const QuadratureSpec& quad = {}, Exec exec = Exec::parallel);

struct OrbitalIntegral {
    QuadratureResult integral;
    double scaled = 0;
    /// Distance of g from the union of the sets M'L, L a proper Levi.
    double levi_distance = 0;
};

/// J(t H0, g) = integral over A x A of phi_{t H0}(a1^{-1} g a2) b(a1) b(a2).
OrbitalIntegral orbital_integral_J(const GroupModel& model, const SpectralPoint& point, const Mat& g,
                                   const BumpFunction& bump, const QuadratureSpec& quad = {},
                                   Exec exec = Exec::parallel);

/// Frobenius distance from g to the nearest matrix with the zero pattern of
/// some M'L, L ranging over the semistandard Levi subgroups other than G.
double levi_distance(const GroupModel& model, const Mat& g);

struct CriticalPoint {
    Mat k;
    /// Rotation angle in (-pi/2, pi/2] for n = 2, representing k modulo +-1.
    double angle = 0;
    double residual = 0;
    int jacobian_rank = 0;
    double levi_distance = 0;
};

struct CriticalSetOptions {
    int seeds = 64;
    std::uint64_t rng_seed = 1;
    int max_iterations = 100;
    double residual_tol = 1e-8;
    /// Two solutions closer than this modulo M are merged.
    double merge_tol = 1e-6;
};

/// Solutions of f_{H0}(k) = 0 from random seeds, verified and deduplicated
/// modulo M. Throws ConvergenceError when no seed converges.
std::vector<CriticalPoint> critical_set_solve(const GroupModel& model, const Vec& h0,
                                              const CriticalSetOptions& opts = {}, Exec exec = Exec::parallel);

/// Newton refinement of a single seed; nullopt if it does not converge.
std::optional<CriticalPoint> critical_point_from(const GroupModel& model, const Vec& h0, const Mat& seed,
                                                 const CriticalSetOptions& opts = {});

/// Kernel of Df_{H0} at k, as coefficients in k_basis() for the
/// perturbation k exp(Y).
Mat critical_tangent(const GroupModel& model, const Vec& h0, const Mat& k);

struct HessianSignature {
    int zero = 0;
    int positive = 0;
    int negative = 0;
    /// Eigenvalues in coordinates (x in a, y in k_basis()), ascending.
    Vec eigenvalues;
    Mat eigenvectors;
    /// Largest entry change between steps h and h/2.
    double richardson_error = 0;
    bool ill_conditioned = false;
};

/// Signature of the Hessian of (a, k) -> <H0, H(k a)> at (1, k_crit).
HessianSignature hessian_signature(const GroupModel& model, const Vec& h0, const Mat& k_crit, double h = 1e-4);

struct FlatCriticalPoint {
    Vec a;
    double gradient_norm = 0;
    Vec hessian_eigenvalues;
    int iterations = 0;
};

struct FlatOptions {
    Vec start;
    int max_iterations = 200;
    double gradient_tol = 1e-8;
    /// Iterates leaving this ball count as divergence.
    double escape_radius = 40;
};

/// h(a) = <H0, H(g a)>.
double height_function(const GroupModel& model, const Vec& h0, const Mat& g, const Vec& a);
/// Gradient of height_function through f_{H0}(kappa(g a)).
Vec height_gradient(const GroupModel& model, const Vec& h0, const Mat& g, const Vec& a);

/// Unique maximizer of height_function over A, or nullopt when the ascent
/// diverges or reaches the iteration cap.
std::optional<FlatCriticalPoint> flat_critical_point(const GroupModel& model, const Vec& h0, const Mat& g,
                                                     const FlatOptions& opts = {});

} // namespace hecke::arch
