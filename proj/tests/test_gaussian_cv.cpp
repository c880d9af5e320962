#include <gtest/gtest.h>

#include "gaussify/distill_map.hpp"
#include "gaussify/gaussian_cv.hpp"
#include "gaussify/measures.hpp"
#include "support.hpp"

using namespace gaussify;
using namespace gaussify::testing;

namespace {

Eigen::Matrix4d local(const Eigen::Matrix2d& a, const Eigen::Matrix2d& b) {
    Eigen::Matrix4d s = Eigen::Matrix4d::Zero();
    s.block<2, 2>(0, 0) = a;
    s.block<2, 2>(2, 2) = b;
    return s;
}

Eigen::Matrix2d rotation(double phi) {
    Eigen::Matrix2d r;
    r << std::cos(phi), std::sin(phi), -std::sin(phi), std::cos(phi);
    return r;
}

Eigen::Matrix2d squeezer(double r) { return Eigen::Vector2d(std::exp(r), std::exp(-r)).asDiagonal(); }

Eigen::Matrix4d mixer(double phi) {
    Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
    const double c = std::cos(phi), s = std::sin(phi);
    m.block<2, 2>(0, 0) = c * Eigen::Matrix2d::Identity();
    m.block<2, 2>(0, 2) = s * Eigen::Matrix2d::Identity();
    m.block<2, 2>(2, 0) = -s * Eigen::Matrix2d::Identity();
    m.block<2, 2>(2, 2) = c * Eigen::Matrix2d::Identity();
    return m;
}

Eigen::Matrix4d random_symplectic(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> ang(0.0, 6.283185307179586), sq(-0.8, 0.8);
    Eigen::Matrix4d s = Eigen::Matrix4d::Identity();
    for (int i = 0; i < 3; ++i)
        s = local(rotation(ang(rng)) * squeezer(sq(rng)), rotation(ang(rng)) * squeezer(sq(rng))) * mixer(ang(rng)) * s;
    return s;
}

CovMat random_physical(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> nu(1.0, 2.5);
    const double n1 = nu(rng), n2 = nu(rng);
    const Eigen::Vector4d d(n1, n1, n2, n2);
    const Eigen::Matrix4d s = random_symplectic(rng);
    return CovMat(Eigen::MatrixXd(s * d.asDiagonal() * s.transpose()));
}

FockOperator unit(const FockOperator& raw) {
    FockOperator n = normalized(raw);
    n.mark_hermitian(0.0);
    return n;
}

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

} // namespace

TEST(SymplecticForm, SquaresToMinusIdentity) {
    for (int dim : {2, 4}) {
        const Eigen::MatrixXd s = symplectic_form(dim);
        EXPECT_EQ(max_abs(s * s + Eigen::MatrixXd::Identity(dim, dim)), 0.0);
    }
}

TEST(SymplecticForm, TestTransformsPreserveIt) {
    auto rng = rng_for(41);
    const Eigen::Matrix4d sigma = symplectic_form(4);
    for (int i = 0; i < 10; ++i) {
        const Eigen::Matrix4d s = random_symplectic(rng);
        EXPECT_LE(max_abs(s * sigma * s.transpose() - sigma), 1e-12);
    }
}

TEST(CovMat, RejectsAsymmetricOrOddShapes) {
    Eigen::MatrixXd g = Eigen::MatrixXd::Identity(4, 4);
    g(0, 1) = 0.1;
    EXPECT_THROW(CovMat{g}, DomainError);
    EXPECT_THROW(CovMat{Eigen::MatrixXd::Identity(3, 3)}, ShapeError);
}

TEST(SymplecticEigenvalues, VacuumAndThermal) {
    EXPECT_LE(max_abs(symplectic_eigenvalues(CovMat(Eigen::MatrixXd::Identity(4, 4))).array() - 1.0), 1e-12);
    const CovMat thermal(Eigen::MatrixXd(3.0 * Eigen::MatrixXd::Identity(2, 2)));
    EXPECT_NEAR(symplectic_eigenvalues(thermal)(0), 3.0, 1e-12);
}

TEST(SymplecticEigenvalues, PureTmssHasUnitValues) {
    for (double r : {0.1, 0.7, 1.5})
        EXPECT_LE(max_abs(symplectic_eigenvalues(tmss_cov(r)).array() - 1.0), 1e-10) << "r " << r;
}

TEST(SymplecticEigenvalues, InvariantUnderSymplecticMaps) {
    auto rng = rng_for(42);
    const CovMat g = random_physical(rng);
    const Eigen::Matrix4d s = random_symplectic(rng);
    const CovMat h(Eigen::MatrixXd(s * g.matrix() * s.transpose()));
    EXPECT_LE(max_abs(symplectic_eigenvalues(g) - symplectic_eigenvalues(h)), 1e-9);
}

TEST(Heisenberg, DetectsViolation) {
    EXPECT_TRUE(is_physical(CovMat(Eigen::MatrixXd::Identity(4, 4))));
    EXPECT_FALSE(is_physical(CovMat(Eigen::MatrixXd(0.5 * Eigen::MatrixXd::Identity(4, 4)))));
    auto rng = rng_for(43);
    for (int i = 0; i < 5; ++i) EXPECT_TRUE(is_physical(random_physical(rng)));
}

TEST(TmssCov, ClosedFormEntries) {
    const double r = std::atanh(0.5);
    const CovMat g = tmss_cov(r);
    EXPECT_NEAR(g(0, 0), 5.0 / 3.0, 1e-14);
    EXPECT_NEAR(g(0, 2), 4.0 / 3.0, 1e-14);
    EXPECT_NEAR(g(1, 3), -4.0 / 3.0, 1e-14);
    EXPECT_THROW(tmss_cov(-0.1), DomainError);
}

TEST(TmssFock, MatchesCovarianceAtLargeCutoff) {
    const double lambda = 0.4;
    const CovMat fock = covariance_from_fock(unit(tmss_fock(lambda, 20)));
    EXPECT_LE(max_abs(fock.matrix() - tmss_cov(std::atanh(lambda)).matrix()), 1e-8);
    EXPECT_LE(fock.mean().cwiseAbs().maxCoeff(), 1e-15);
}

TEST(CovarianceFromFock, VacuumIsIdentity) {
    const CovMat g = covariance_from_fock(fock_projector(2, 4, {0, 0}));
    EXPECT_LE(max_abs(g.matrix() - Eigen::MatrixXd::Identity(4, 4)), 1e-14);
    const CovMat one = covariance_from_fock(fock_projector(1, 4, {1}));
    EXPECT_NEAR(one(0, 0), 3.0, 1e-14);
}

TEST(LossChannelCov, PreservesPhysicality) {
    auto rng = rng_for(44);
    const CovMat g = random_physical(rng);
    for (double theta : {0.0, 0.2, 0.5, 0.9, 1.0}) EXPECT_TRUE(is_physical(loss_channel_cov(g, theta)));
    EXPECT_LE(max_abs(loss_channel_cov(g, 0.0).matrix() - Eigen::MatrixXd::Identity(4, 4)), 0.0);
}

TEST(LossChannelCov, AgreesWithFockKrausChannel) {
    const double lambda = 0.5, theta = 0.9;
    FockOperator rho = unit(tmss_fock(lambda, 24));
    rho = loss_channel_fock(rho, 0, theta);
    rho = loss_channel_fock(rho, 1, theta);
    const CovMat expected = loss_channel_cov(tmss_cov(std::atanh(lambda)), theta);
    EXPECT_LE(max_abs(covariance_from_fock(rho).matrix() - expected.matrix()), 1e-8);
}

TEST(BMatrix, RoundTripsThroughSeeds) {
    auto rng = rng_for(45);
    for (int i = 0; i < 100; ++i) {
        const SeedCoefficients s = seed_coefficients(random_state(2, 2, rng, 2, 0.7));
        EXPECT_LE(max_abs_difference(en_map(b_matrix(s)), s), 1e-13);
    }
}

TEST(BMatrix, IsSymmetric) {
    auto rng = rng_for(46);
    const BMatrix b = b_matrix(random_state(2, 3, rng));
    EXPECT_EQ(max_abs(b.m - b.m.transpose()), 0.0);
}

TEST(BMatrix, VacuumGivesHalfIdentity) {
    const BMatrix b = b_matrix(fock_projector(2, 3, {0, 0}));
    EXPECT_LE(max_abs(b.m - 0.5 * Eigen::Matrix4d::Identity()), 1e-15);
}

TEST(BMatrix, VanishingVacuumThrows) {
    EXPECT_THROW(b_matrix(fock_projector(2, 3, {1, 1})), NumericalError);
}

TEST(PredictLimit, VacuumIsIdentity) {
    const LimitPrediction lp = predict_limit(fock_projector(2, 3, {0, 0}));
    ASSERT_EQ(lp.verdict, LimitVerdict::Convergent);
    EXPECT_LE(max_abs(lp.covariance().matrix() - Eigen::MatrixXd::Identity(4, 4)), 1e-14);
}

TEST(PredictLimit, TmssReproducesItsOwnCovariance) {
    for (double lambda : {0.3, 0.5}) {
        const FockOperator rho = unit(tmss_fock(lambda, 12));
        const LimitPrediction lp = predict_limit(unit(ideal_step(rho)));
        ASSERT_TRUE(lp.physical());
        EXPECT_LE(max_abs(lp.covariance().matrix() - tmss_cov(std::atanh(lambda)).matrix()), 1e-6);
    }
}

TEST(PredictLimit, Example1LimitIsTmssOfEpsilon) {
    const double eps = 0.5;
    const FockOperator rho1 = unit(ideal_step(example_state({ExampleKind::Example1, eps}, 6)));
    const LimitPrediction lp = predict_limit(rho1);
    ASSERT_TRUE(lp.physical());
    EXPECT_LE(max_abs(lp.covariance().matrix() - tmss_cov(std::atanh(eps)).matrix()), 1e-12);
    EXPECT_NEAR(gaussian_log_negativity(lp.covariance()), std::log2(3.0), 1e-12);
}

TEST(PredictLimit, Example3LimitHalvesTheAmplitude) {
    const double eps = 0.8;
    const FockOperator rho1 = unit(ideal_step(example_state({ExampleKind::Example3, eps}, 6)));
    const LimitPrediction lp = predict_limit(rho1);
    ASSERT_TRUE(lp.physical());
    EXPECT_LE(max_abs(lp.covariance().matrix() - tmss_cov(std::atanh(eps / 2)).matrix()), 1e-12);
}

TEST(PredictLimit, Example2IsUnphysical) {
    for (double eps : {0.1, 0.5, 1.0}) {
        const FockOperator rho1 = unit(ideal_step(example_state({ExampleKind::Example2, eps}, 6)));
        const LimitPrediction lp = predict_limit(rho1);
        EXPECT_EQ(lp.verdict, LimitVerdict::Unphysical) << "eps " << eps;
        EXPECT_THROW(gaussian_log_negativity(lp.covariance()), DomainError);
    }
}

TEST(PredictLimit, SingularBIsReported) {
    BMatrix b;
    b.m(0, 0) = 1.0;
    const LimitPrediction lp = predict_limit_from_b(b);
    EXPECT_EQ(lp.verdict, LimitVerdict::Singular);
    EXPECT_FALSE(lp.gamma.has_value());
    EXPECT_THROW(lp.covariance(), NumericalError);
}

TEST(PureConvergence, Example3IsPureConvergent) {
    for (double eps : {0.3, 0.8}) {
        const PureConvergenceReport r = pure_convergence_check(example_state({ExampleKind::Example3, eps}, 4));
        EXPECT_TRUE(r.pure_convergent) << "eps " << eps;
        EXPECT_NEAR(r.spectral_norm, eps / 2, 1e-12);
    }
}

TEST(PureConvergence, Example2SitsOnTheBoundary) {
    for (double eps : {0.01, 0.5, 1.0, 3.0}) {
        const PureConvergenceReport r = pure_convergence_check(example_state({ExampleKind::Example2, eps}, 4));
        EXPECT_FALSE(r.pure_convergent);
        EXPECT_FALSE(r.norm_below_one);
        EXPECT_LE(std::abs(r.spectral_norm - 1.0), 1e-10) << "eps " << eps;
    }
}

TEST(PureConvergence, VacuumHasZeroNorm) {
    const PureConvergenceReport r = pure_convergence_check(fock_projector(2, 3, {0, 0}));
    EXPECT_TRUE(r.pure_convergent);
    EXPECT_EQ(r.spectral_norm, 0.0);
}

TEST(PureConvergence, VanishingVacuumFails) {
    const PureConvergenceReport r = pure_convergence_check(fock_projector(2, 3, {1, 0}));
    EXPECT_FALSE(r.vacuum_positive);
    EXPECT_FALSE(r.pure_convergent);
}

TEST(PureConvergence, FirstStepSeedsMatchOneStep) {
    auto rng = rng_for(47);
    for (int i = 0; i < 5; ++i) {
        const FockOperator rho = random_state(2, 4, rng, 2, 0.7);
        const SeedCoefficients direct = seed_coefficients(unit(ideal_step(rho)));
        EXPECT_LE(max_abs_difference(first_step_seeds(rho), direct), 1e-12);
    }
}

TEST(PureConvergence, PureLimitHasUnitSymplecticEigenvalues) {
    for (double eps : {0.3, 0.8}) {
        const FockOperator rho = example_state({ExampleKind::Example3, eps}, 6);
        const LimitPrediction lp = predict_limit(unit(ideal_step(rho)));
        EXPECT_LE(max_abs(symplectic_eigenvalues(lp.covariance()).array() - 1.0), 1e-8);
    }
}

TEST(GaussianLogNegativity, TmssClosedForm) {
    for (double r : {0.2, 0.6}) EXPECT_NEAR(gaussian_log_negativity(tmss_cov(r)), 2.0 * r / std::log(2.0), 1e-12);
    EXPECT_NEAR(gaussian_log_negativity(CovMat(Eigen::MatrixXd::Identity(4, 4))), 0.0, 1e-14);
}

TEST(GaussianLogNegativity, IncreasesWithSqueezing) {
    double prev = -1.0;
    for (double lambda = 0.05; lambda < 0.95; lambda += 0.1) {
        const double en = gaussian_log_negativity(tmss_cov(std::atanh(lambda)));
        EXPECT_GT(en, prev);
        prev = en;
    }
}

TEST(GaussianLogNegativity, AgreesWithFockOnTruncatedTmss) {
    const double lambda = 0.4;
    const double fock = log_negativity(unit(tmss_fock(lambda, 16)));
    EXPECT_NEAR(fock, gaussian_log_negativity(tmss_cov(std::atanh(lambda))), 1e-4);
}

TEST(GaussianLogNegativity, FormalEvaluationSkipsPhysicalityCheck) {
    const CovMat bad(Eigen::MatrixXd(0.5 * Eigen::MatrixXd::Identity(4, 4)));
    EXPECT_NO_THROW(gaussian_log_negativity(bad, false));
}

TEST(GaussianEntropy, PureStatesVanish) {
    EXPECT_NEAR(gaussian_entropy(tmss_cov(0.8)), 0.0, 1e-8);
}

TEST(GaussianEntropy, MatchesFockEntropyAfterLoss) {
    const double lambda = 0.4, theta = 0.8;
    FockOperator rho = unit(tmss_fock(lambda, 16));
    rho = loss_channel_fock(rho, 0, theta);
    rho = loss_channel_fock(rho, 1, theta);
    const double expected = gaussian_entropy(loss_channel_cov(tmss_cov(std::atanh(lambda)), theta));
    EXPECT_NEAR(von_neumann_entropy(rho), expected, 1e-3);
}

TEST(Squeezing, TmssScoresItsParameter) {
    for (double r : {0.0, 0.3, 1.2}) {
        EXPECT_NEAR(squeezing_ES(tmss_cov(r)), r, 1e-12);
        EXPECT_NEAR(squeezing_ETS(tmss_cov(r)), r, 1e-12);
    }
    EXPECT_NEAR(squeezing_db(std::log(10.0) / 2.0), 1.0, 1e-15);
}

TEST(Squeezing, StandardFormDiagonalisesOffBlock) {
    auto rng = rng_for(48);
    for (int i = 0; i < 20; ++i) {
        const CovMat g = random_physical(rng);
        const StandardForm sf = standard_form(g);
        const Eigen::Matrix2d off = sf.transformed.block<2, 2>(0, 2);
        EXPECT_LE(std::abs(off(0, 1)) + std::abs(off(1, 0)), 1e-10);
        EXPECT_NEAR(sf.s_a.determinant(), 1.0, 1e-12);
        EXPECT_NEAR(sf.s_b.determinant(), 1.0, 1e-12);
        EXPECT_LE(max_abs(sf.transformed.block<2, 2>(0, 0) - sf.alpha * Eigen::Matrix2d::Identity()), 1e-10);
    }
}

TEST(Squeezing, LocalSqueezingDoesNotChangeStandardForm) {
    const CovMat g = tmss_cov(0.5);
    const Eigen::Matrix4d s = local(squeezer(0.4), rotation(0.3));
    const CovMat h(Eigen::MatrixXd(s * g.matrix() * s.transpose()));
    EXPECT_NEAR(squeezing_ETS(h), 0.5, 1e-10);
}
