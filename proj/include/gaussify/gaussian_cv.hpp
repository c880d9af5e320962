#pragma once

// Covariance-matrix layer: Gaussian states, the B-map that fixes the limit of
// the iteration, and Gaussian entanglement/squeezing measures.
//
// Conventions: quadratures X = (a + a^dag)/sqrt2, P = (a - a^dag)/(i sqrt2),
// ordered (X1, P1, X2, P2); gamma_jk = 2 Re tr[(R_j - d_j)(R_k - d_k) rho],
// so the vacuum has gamma = identity.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "gaussify/error.hpp"
#include "gaussify/fock_operator.hpp"

namespace gaussify {

inline constexpr double kSymmetryTol = 1e-12;
inline constexpr double kHeisenbergTol = 1e-10;
inline constexpr double kConditionTol = 1e-9;
inline constexpr double kVacuumFloor = 1e-14;

class CovMat {
public:
    explicit CovMat(Eigen::MatrixXd gamma) : CovMat(std::move(gamma), Eigen::VectorXd()) {}
    CovMat(Eigen::MatrixXd gamma, Eigen::VectorXd mean) : gamma_(std::move(gamma)), mean_(std::move(mean)) {
        if (gamma_.rows() != gamma_.cols() || (gamma_.rows() != 2 && gamma_.rows() != 4))
            throw ShapeError("CovMat: dimension must be 2 or 4");
        if ((gamma_ - gamma_.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol * std::max(1.0, gamma_.cwiseAbs().maxCoeff()))
            throw DomainError("CovMat: matrix is not symmetric");
        gamma_ = 0.5 * (gamma_ + gamma_.transpose()).eval();
        if (mean_.size() == 0) mean_ = Eigen::VectorXd::Zero(gamma_.rows());
        if (mean_.size() != gamma_.rows()) throw ShapeError("CovMat: first-moment vector has wrong length");
    }

    int dim() const noexcept { return static_cast<int>(gamma_.rows()); }
    const Eigen::MatrixXd& matrix() const noexcept { return gamma_; }
    const Eigen::VectorXd& mean() const noexcept { return mean_; }
    double operator()(int i, int j) const { return gamma_(i, j); }

private:
    Eigen::MatrixXd gamma_;
    Eigen::VectorXd mean_;
};

/// Block-diagonal symplectic form, one [[0,1],[-1,0]] block per mode.
inline Eigen::MatrixXd symplectic_form(int dim) {
    if (dim % 2 != 0 || dim <= 0) throw ShapeError("symplectic_form: dimension must be even");
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(dim, dim);
    for (int k = 0; k < dim; k += 2) {
        s(k, k + 1) = 1.0;
        s(k + 1, k) = -1.0;
    }
    return s;
}

/// Smallest eigenvalue of the hermitian matrix gamma + i Sigma.
inline double heisenberg_min_eigenvalue(const Eigen::MatrixXd& gamma) {
    const Eigen::MatrixXcd h =
        gamma.cast<Complex>() + Complex{0.0, 1.0} * symplectic_form(static_cast<int>(gamma.rows())).cast<Complex>();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(h, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff();
}

inline bool is_physical(const CovMat& gamma, double tol = kHeisenbergTol) {
    return heisenberg_min_eigenvalue(gamma.matrix()) >= -tol;
}

/// Moduli of the eigenvalues of i Sigma gamma, one per mode, ascending.
/// Defined for any real symmetric gamma (used formally on unphysical ones).
inline Eigen::VectorXd symplectic_eigenvalues(const Eigen::MatrixXd& gamma) {
    const int n = static_cast<int>(gamma.rows());
    const Eigen::MatrixXcd m =
        Complex{0.0, 1.0} * (symplectic_form(n) * gamma).cast<Complex>();
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(m, false);
    if (solver.info() != Eigen::Success) throw NumericalError("symplectic_eigenvalues: eigensolver failed");
    std::vector<double> mods(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) mods[static_cast<std::size_t>(i)] = std::abs(solver.eigenvalues()(i));
    std::sort(mods.begin(), mods.end());
    Eigen::VectorXd out(n / 2);
    for (int i = 0; i < n / 2; ++i)
        out(i) = 0.5 * (mods[static_cast<std::size_t>(2 * i)] + mods[static_cast<std::size_t>(2 * i + 1)]);
    return out;
}

inline Eigen::VectorXd symplectic_eigenvalues(const CovMat& gamma) { return symplectic_eigenvalues(gamma.matrix()); }

/// Two-mode squeezed vacuum with squeezing parameter r: xi = cosh 2r, zeta = sinh 2r.
inline CovMat tmss_cov(double r) {
    if (r < 0.0) throw DomainError("tmss_cov: r must be non-negative");
    const double xi = std::cosh(2.0 * r);
    const double zeta = std::sinh(2.0 * r);
    Eigen::MatrixXd g(4, 4);
    g << xi, 0, zeta, 0,
         0, xi, 0, -zeta,
         zeta, 0, xi, 0,
         0, -zeta, 0, xi;
    return CovMat(g);
}

/// Truncated two-mode squeezed vacuum, rho_{n,n;m,m} = (1 - lambda^2) lambda^(n+m).
/// Not renormalised: the trace is 1 - lambda^(2(cutoff+1)).
inline FockOperator tmss_fock(double lambda, int cutoff) {
    if (!(lambda >= 0.0 && lambda < 1.0)) throw DomainError("tmss_fock: lambda must lie in [0, 1)");
    FockOperator rho(2, cutoff);
    const double norm = 1.0 - lambda * lambda;
    for (int n = 0; n <= cutoff; ++n)
        for (int m = 0; m <= cutoff; ++m)
            rho.set({n, n}, {m, m}, Complex{norm * std::pow(lambda, n + m), 0.0});
    rho.mark_hermitian(0.0);
    return rho;
}

/// Symmetric loss on every mode: gamma -> theta^2 gamma + (1 - theta^2) identity.
inline CovMat loss_channel_cov(const CovMat& gamma, double theta) {
    if (!(theta >= 0.0 && theta <= 1.0)) throw DomainError("loss_channel_cov: theta must lie in [0, 1]");
    const double t2 = theta * theta;
    const Eigen::MatrixXd out =
        t2 * gamma.matrix() + (1.0 - t2) * Eigen::MatrixXd::Identity(gamma.dim(), gamma.dim());
    return CovMat(out, theta * gamma.mean());
}

// ---------------------------------------------------------------------------
// Seed coefficients and the B-map
// ---------------------------------------------------------------------------

/// The six coefficients sigma = rho / rho_{0,0;0,0} that fix the Gaussian
/// limit. Field names read <ket><bra>: sigma_10_01 is sigma_{1,0;0,1}.
struct SeedCoefficients {
    Complex sigma_10_10{};
    Complex sigma_01_01{};
    Complex sigma_10_01{};
    Complex sigma_20_00{};
    Complex sigma_02_00{};
    Complex sigma_11_00{};

    std::array<Complex, 6> as_array() const {
        return {sigma_10_10, sigma_01_01, sigma_10_01, sigma_20_00, sigma_02_00, sigma_11_00};
    }
    static constexpr std::array<const char*, 6> names() {
        return {"sigma_10_10", "sigma_01_01", "sigma_10_01", "sigma_20_00", "sigma_02_00", "sigma_11_00"};
    }
};

inline double max_abs_difference(const SeedCoefficients& a, const SeedCoefficients& b) {
    const auto x = a.as_array();
    const auto y = b.as_array();
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(x[i] - y[i]));
    return worst;
}

inline Complex vacuum_coefficient(const FockOperator& rho) {
    rho.require_modes(2, "vacuum_coefficient");
    return rho(0, 0, 0, 0);
}

inline SeedCoefficients seed_coefficients(const FockOperator& rho) {
    rho.require_modes(2, "seed_coefficients");
    if (rho.cutoff() < 2) throw ShapeError("seed_coefficients: cutoff must be at least 2");
    const Complex v = rho(0, 0, 0, 0);
    if (std::abs(v) <= kVacuumFloor)
        throw NumericalError("seed_coefficients: vanishing vacuum coefficient rho_{0,0;0,0}");
    SeedCoefficients s;
    s.sigma_10_10 = rho(1, 0, 1, 0) / v;
    s.sigma_01_01 = rho(0, 1, 0, 1) / v;
    s.sigma_10_01 = rho(1, 0, 0, 1) / v;
    s.sigma_20_00 = rho(2, 0, 0, 0) / v;
    s.sigma_02_00 = rho(0, 2, 0, 0) / v;
    s.sigma_11_00 = rho(1, 1, 0, 0) / v;
    return s;
}

/// Real symmetric 4x4 matrix of second-moment data.
struct BMatrix {
    Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
    double operator()(int i, int j) const { return m(i, j); }
};

inline BMatrix b_matrix(const SeedCoefficients& s) {
    const double r2 = std::sqrt(2.0);
    BMatrix b;
    auto& m = b.m;
    m(0, 0) = 0.5 * (-(s.sigma_10_10.real() - 1.0) + r2 * s.sigma_20_00.real());
    m(1, 1) = 0.5 * (-(s.sigma_10_10.real() - 1.0) - r2 * s.sigma_20_00.real());
    m(2, 2) = 0.5 * (-(s.sigma_01_01.real() - 1.0) + r2 * s.sigma_02_00.real());
    m(3, 3) = 0.5 * (-(s.sigma_01_01.real() - 1.0) - r2 * s.sigma_02_00.real());
    m(0, 1) = s.sigma_20_00.imag() / r2;
    m(2, 3) = s.sigma_02_00.imag() / r2;
    m(0, 2) = 0.5 * (-s.sigma_10_01.real() + s.sigma_11_00.real());
    m(0, 3) = 0.5 * (s.sigma_10_01.imag() + s.sigma_11_00.imag());
    m(1, 2) = 0.5 * (-s.sigma_10_01.imag() + s.sigma_11_00.imag());
    m(1, 3) = 0.5 * (-s.sigma_10_01.real() - s.sigma_11_00.real());
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < i; ++j) m(i, j) = m(j, i);
    return b;
}

inline BMatrix b_matrix(const FockOperator& rho) { return b_matrix(seed_coefficients(rho)); }

/// Inverse of b_matrix on the six seed coefficients.
inline SeedCoefficients en_map(const BMatrix& b) {
    const auto& m = b.m;
    const double ir2 = 1.0 / std::sqrt(2.0);
    SeedCoefficients s;
    s.sigma_10_10 = {1.0 - m(0, 0) - m(1, 1), 0.0};
    s.sigma_01_01 = {1.0 - m(2, 2) - m(3, 3), 0.0};
    s.sigma_10_01 = {-m(0, 2) - m(1, 3), m(0, 3) - m(1, 2)};
    s.sigma_20_00 = {ir2 * (m(0, 0) - m(1, 1)), ir2 * 2.0 * m(0, 1)};
    s.sigma_02_00 = {ir2 * (m(2, 2) - m(3, 3)), ir2 * 2.0 * m(2, 3)};
    s.sigma_11_00 = {m(0, 2) - m(1, 3), m(0, 3) + m(1, 2)};
    return s;
}

// ---------------------------------------------------------------------------
// Limit prediction
// ---------------------------------------------------------------------------

enum class LimitVerdict { Convergent, Singular, Unphysical };

inline const char* to_string(LimitVerdict v) {
    switch (v) {
        case LimitVerdict::Convergent: return "convergent";
        case LimitVerdict::Singular: return "singular";
        case LimitVerdict::Unphysical: return "unphysical";
    }
    return "?";
}

struct LimitPrediction {
    LimitVerdict verdict = LimitVerdict::Singular;
    BMatrix b;
    double determinant = 0.0;
    double condition_number = std::numeric_limits<double>::infinity();
    /// Present unless B is singular; may violate the uncertainty relation.
    std::optional<Eigen::Matrix4d> gamma;
    double heisenberg_min_eigenvalue = std::numeric_limits<double>::quiet_NaN();

    bool physical() const { return verdict == LimitVerdict::Convergent; }
    CovMat covariance() const {
        if (!gamma) throw NumericalError("LimitPrediction: no limit covariance (singular B)");
        return CovMat(Eigen::MatrixXd(*gamma));
    }
};

/// Limit covariance from B: gamma = Sigma^T B^-1 Sigma - identity.
/// Vacuum: B = identity/2 gives gamma = identity.
inline LimitPrediction predict_limit_from_b(const BMatrix& b) {
    LimitPrediction out;
    out.b = b;
    out.determinant = b.m.determinant();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(b.m, Eigen::EigenvaluesOnly);
    const double largest = es.eigenvalues().cwiseAbs().maxCoeff();
    const double smallest = es.eigenvalues().cwiseAbs().minCoeff();
    out.condition_number = smallest > 0.0 ? largest / smallest : std::numeric_limits<double>::infinity();
    const double scale = std::pow(std::max(1.0, largest), 4);
    if (std::abs(out.determinant) < 1e-12 * scale) {
        out.verdict = LimitVerdict::Singular;
        return out;
    }
    const Eigen::Matrix4d sigma = symplectic_form(4);
    const Eigen::Matrix4d g = sigma.transpose() * b.m.inverse() * sigma - Eigen::Matrix4d::Identity();
    out.gamma = 0.5 * (g + g.transpose());
    out.heisenberg_min_eigenvalue = heisenberg_min_eigenvalue(Eigen::MatrixXd(*out.gamma));
    out.verdict = out.heisenberg_min_eigenvalue >= -kHeisenbergTol ? LimitVerdict::Convergent : LimitVerdict::Unphysical;
    return out;
}

/// Expects rho^(1), the normalised state after the first step.
inline LimitPrediction predict_limit(const FockOperator& rho1) {
    if (std::abs(vacuum_coefficient(rho1)) <= kVacuumFloor) {
        LimitPrediction out;
        out.verdict = LimitVerdict::Singular;
        out.determinant = 0.0;
        return out;
    }
    return predict_limit_from_b(b_matrix(rho1));
}

// ---------------------------------------------------------------------------
// Pure-limit predicate
// ---------------------------------------------------------------------------

struct PureConvergenceReport {
    bool pure_convergent = false;
    bool vacuum_positive = false;
    bool quadratic_relations = false;
    bool norm_below_one = false;
    double vacuum = 0.0;
    /// |sigma'_{10;10}|, |sigma'_{01;01}|, |sigma'_{10;01}| after one step.
    std::array<double, 3> residuals{};
    double spectral_norm = std::numeric_limits<double>::quiet_NaN();
};

/// The six seeds of the normalised first iterate, obtained in closed form
/// from the low-order coefficients of rho (sigma = rho / rho_{0,0;0,0}).
inline SeedCoefficients first_step_seeds(const FockOperator& rho) {
    const SeedCoefficients s = seed_coefficients(rho);
    const Complex v = rho(0, 0, 0, 0);
    const Complex a = rho(1, 0, 0, 0) / v; // sigma_{10;00}
    const Complex b = rho(0, 1, 0, 0) / v; // sigma_{01;00}
    const double ir2 = 1.0 / std::sqrt(2.0);
    SeedCoefficients out;
    out.sigma_10_10 = s.sigma_10_10 - a * std::conj(a);
    out.sigma_01_01 = s.sigma_01_01 - b * std::conj(b);
    out.sigma_10_01 = s.sigma_10_01 - a * std::conj(b);
    out.sigma_20_00 = s.sigma_20_00 - ir2 * a * a;
    out.sigma_02_00 = s.sigma_02_00 - ir2 * b * b;
    out.sigma_11_00 = s.sigma_11_00 - a * b;
    return out;
}

inline PureConvergenceReport pure_convergence_check(const FockOperator& rho, double tol = kConditionTol) {
    rho.require_modes(2, "pure_convergence_check");
    PureConvergenceReport r;
    r.vacuum = rho(0, 0, 0, 0).real();
    r.vacuum_positive = r.vacuum > kVacuumFloor;
    if (!r.vacuum_positive) return r;

    const SeedCoefficients s1 = first_step_seeds(rho);
    r.residuals = {std::abs(s1.sigma_10_10), std::abs(s1.sigma_01_01), std::abs(s1.sigma_10_01)};
    r.quadratic_relations = std::all_of(r.residuals.begin(), r.residuals.end(), [&](double x) { return x <= tol; });

    const double r2 = std::sqrt(2.0);
    Eigen::Matrix2cd m;
    m << r2 * s1.sigma_20_00, s1.sigma_11_00,
         s1.sigma_11_00, r2 * s1.sigma_02_00;
    Eigen::JacobiSVD<Eigen::Matrix2cd> svd(m);
    r.spectral_norm = svd.singularValues()(0);
    r.norm_below_one = r.spectral_norm < 1.0;
    r.pure_convergent = r.vacuum_positive && r.quadratic_relations && r.norm_below_one;
    return r;
}

// ---------------------------------------------------------------------------
// Gaussian measures
// ---------------------------------------------------------------------------

inline void require_physical(const CovMat& gamma, const char* where) {
    if (!is_physical(gamma)) throw DomainError(std::string(where) + ": covariance matrix violates the uncertainty relation");
}

/// Log-negativity in bits from the partially transposed covariance matrix.
/// With check_physical = false the formula is evaluated formally.
inline double gaussian_log_negativity(const CovMat& gamma, bool check_physical = true) {
    if (gamma.dim() != 4) throw ShapeError("gaussian_log_negativity: two-mode covariance required");
    if (check_physical) require_physical(gamma, "gaussian_log_negativity");
    Eigen::Matrix4d flip = Eigen::Matrix4d::Identity();
    flip(3, 3) = -1.0;
    const Eigen::VectorXd nu = symplectic_eigenvalues(Eigen::MatrixXd(flip * gamma.matrix() * flip));
    double en = 0.0;
    for (int i = 0; i < nu.size(); ++i)
        if (nu(i) < 1.0) en -= std::log2(nu(i));
    return en;
}

/// von Neumann entropy in bits: sum of g((nu - 1)/2), g(x) = (x+1)log2(x+1) - x log2 x.
inline double gaussian_entropy(const CovMat& gamma) {
    require_physical(gamma, "gaussian_entropy");
    const Eigen::VectorXd nu = symplectic_eigenvalues(gamma);
    double s = 0.0;
    for (int i = 0; i < nu.size(); ++i) {
        const double x = std::max(0.0, (nu(i) - 1.0) / 2.0);
        if (x > 0.0) s += (x + 1.0) * std::log2(x + 1.0) - x * std::log2(x);
    }
    return s;
}

/// max{-(1/2) ln lambda_min(gamma), 0}, in nats. The factor 1/2 makes the
/// two-mode squeezed state with parameter r score exactly r.
inline double squeezing_ES(const CovMat& gamma) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gamma.matrix(), Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues().minCoeff();
    if (!(lmin > 0.0)) return std::numeric_limits<double>::infinity();
    return std::max(-0.5 * std::log(lmin), 0.0);
}

/// The literal conversion 2 E_S / ln(10).
inline double squeezing_db(double es) { return 2.0 * es / std::log(10.0); }

struct StandardForm {
    Eigen::Matrix2d s_a;
    Eigen::Matrix2d s_b;
    Eigen::Matrix4d transformed; // (S_A + S_B) gamma (S_A + S_B)^T
    double alpha = 1.0;
    double beta = 1.0;
};

namespace detail {

inline Eigen::Matrix2d williamson_2x2(const Eigen::Matrix2d& block, double& scale) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(block);
    if (es.eigenvalues().minCoeff() <= 0.0) throw NumericalError("standard_form: local block is not positive definite");
    scale = std::sqrt(es.eigenvalues().prod());
    const Eigen::Vector2d inv_sqrt = es.eigenvalues().cwiseSqrt().cwiseInverse();
    return std::sqrt(scale) * es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose();
}

} // namespace detail

/// Local symplectic reduction: diagonal blocks alpha*1, beta*1 and a diagonal
/// off-block. Blocks are made isotropic first, then rotated by the
/// proper-rotation SVD of the transformed off-block.
inline StandardForm standard_form(const CovMat& gamma) {
    if (gamma.dim() != 4) throw ShapeError("standard_form: two-mode covariance required");
    const Eigen::Matrix4d g = gamma.matrix();
    StandardForm out;
    Eigen::Matrix2d sa = detail::williamson_2x2(g.block<2, 2>(0, 0), out.alpha);
    Eigen::Matrix2d sb = detail::williamson_2x2(g.block<2, 2>(2, 2), out.beta);
    const Eigen::Matrix2d c = sa * g.block<2, 2>(0, 2) * sb.transpose();
    Eigen::JacobiSVD<Eigen::Matrix2d> svd(c, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix2d u = svd.matrixU();
    Eigen::Matrix2d v = svd.matrixV();
    if (u.determinant() < 0.0) u.col(1) *= -1.0;
    if (v.determinant() < 0.0) v.col(1) *= -1.0;
    out.s_a = u.transpose() * sa;
    out.s_b = v.transpose() * sb;
    Eigen::Matrix4d s = Eigen::Matrix4d::Zero();
    s.block<2, 2>(0, 0) = out.s_a;
    s.block<2, 2>(2, 2) = out.s_b;
    out.transformed = s * g * s.transpose();
    return out;
}

/// Two-mode squeezing after local standardisation, same normalisation as E_S.
inline double squeezing_ETS(const CovMat& gamma) {
    const StandardForm sf = standard_form(gamma);
    return squeezing_ES(CovMat(Eigen::MatrixXd(0.5 * (sf.transformed + sf.transformed.transpose()))));
}

// ---------------------------------------------------------------------------
// Second moments of Fock-space states
// ---------------------------------------------------------------------------

namespace detail {

/// tr[rho L1 L2] where each L is a or a^dag on a given mode, using truncated
/// ladder matrices. `ops` holds (mode, creation) pairs applied right to left.
inline Complex ladder_expectation(const FockOperator& rho, std::span<const std::pair<int, bool>> ops) {
    Complex acc{0.0, 0.0};
    for (std::size_t k = 0; k < rho.dim(); ++k) {
        ModeIndex idx = rho.unflat(k);
        double amp = 1.0;
        bool alive = true;
        for (auto it = ops.rbegin(); it != ops.rend() && alive; ++it) {
            const auto [mode, creation] = *it;
            if (creation) {
                if (idx[mode] == rho.cutoff()) alive = false;
                else amp *= std::sqrt(static_cast<double>(++idx[mode]));
            } else {
                if (idx[mode] == 0) alive = false;
                else amp *= std::sqrt(static_cast<double>(idx[mode]--));
            }
        }
        // tr[rho O] = sum_k <k|rho O|k> = sum_k amp(k) rho_{k, O k}
        if (alive) acc += amp * rho.element(k, rho.flat(idx));
    }
    return acc;
}

} // namespace detail

/// Covariance matrix and first moments of a one- or two-mode Fock operator.
inline CovMat covariance_from_fock(const FockOperator& rho) {
    if (rho.modes() > 2) throw ShapeError("covariance_from_fock: one or two modes required");
    const int n = rho.modes();
    const double tr = trace(rho).real();
    if (!(tr > 0.0)) throw NumericalError("covariance_from_fock: non-positive trace");
    // ladder basis b = (a_0, a_0^dag, a_1, a_1^dag); R = C b
    const int nb = 2 * n;
    Eigen::MatrixXcd c = Eigen::MatrixXcd::Zero(nb, nb);
    const double ir2 = 1.0 / std::sqrt(2.0);
    const Complex mi{0.0, -1.0};
    for (int m = 0; m < n; ++m) {
        c(2 * m, 2 * m) = ir2;
        c(2 * m, 2 * m + 1) = ir2;
        c(2 * m + 1, 2 * m) = mi * ir2;
        c(2 * m + 1, 2 * m + 1) = -mi * ir2;
    }
    Eigen::VectorXcd first(nb);
    Eigen::MatrixXcd second(nb, nb);
    for (int a = 0; a < nb; ++a) {
        const std::pair<int, bool> one[] = {{a / 2, a % 2 == 1}};
        first(a) = detail::ladder_expectation(rho, one) / tr;
        for (int b = 0; b < nb; ++b) {
            const std::pair<int, bool> two[] = {{a / 2, a % 2 == 1}, {b / 2, b % 2 == 1}};
            second(a, b) = detail::ladder_expectation(rho, two) / tr;
        }
    }
    const Eigen::VectorXcd d = c * first;
    const Eigen::MatrixXcd rr = c * second * c.transpose();
    Eigen::MatrixXd gamma(nb, nb);
    for (int j = 0; j < nb; ++j)
        for (int k = 0; k < nb; ++k) gamma(j, k) = 2.0 * (rr(j, k).real() - d(j).real() * d(k).real());
    gamma = 0.5 * (gamma + gamma.transpose()).eval();
    return CovMat(gamma, d.real());
}

} // namespace gaussify
