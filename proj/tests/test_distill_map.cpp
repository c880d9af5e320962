#include <gtest/gtest.h>

#include <chrono>

#include "gaussify/distill_map.hpp"
#include "gaussify/measures.hpp"
#include "support.hpp"

using namespace gaussify;
using namespace gaussify::testing;

namespace {

// Direct evaluation of the ideal step from the closed-form M coefficient.
FockOperator ideal_step_brute(const FockOperator& rho) {
    const int c = rho.cutoff();
    FockOperator out(2, c);
    for (int a = 0; a <= c; ++a)
        for (int b = 0; b <= c; ++b)
            for (int cc = 0; cc <= c; ++cc)
                for (int d = 0; d <= c; ++d) {
                    Complex acc{0.0, 0.0};
                    for (int s = 0; s <= a; ++s)
                        for (int t = 0; t <= b; ++t)
                            for (int n = 0; n <= cc; ++n)
                                for (int m = 0; m <= d; ++m) {
                                    const int big = a + b + cc + d, small = s + t + n + m;
                                    const double w = std::pow(2.0, -0.5 * big) * ((big - small) % 2 ? -1.0 : 1.0) *
                                                     std::sqrt(gamma_binom(a, s) * gamma_binom(b, t) *
                                                               gamma_binom(cc, n) * gamma_binom(d, m));
                                    acc += w * rho(s, t, n, m) * rho(a - s, b - t, cc - n, d - m);
                                }
                    out.set({a, b}, {cc, d}, acc);
                }
    return out;
}

// The lossy coefficient N with its four inner sums written out literally.
double lossy_coefficient_literal(int A, int B, int C, int D, int k, int l, int a, int b, int c, int d, double eta) {
    auto bracket = [](int X, int kk, int x, int s) {
        return std::sqrt(gamma_binom(x, s) * gamma_binom(kk, s) * gamma_binom(X + kk - x, kk - s) * gamma_binom(X, x - s));
    };
    double total = 0.0;
    for (int s = 0; s <= std::min(a, k); ++s)
        for (int u = 0; u <= std::min(b, l); ++u)
            for (int s2 = 0; s2 <= std::min(c, k); ++s2)
                for (int u2 = 0; u2 <= std::min(d, l); ++u2) {
                    const int sign = A - a + B - b + C - c + D - d + s + u + s2 + u2;
                    total += (sign % 2 == 0 ? 1.0 : -1.0) * bracket(A, k, a, s) * bracket(B, l, b, u) *
                             bracket(C, k, c, s2) * bracket(D, l, d, u2);
                }
    return std::pow(2.0, -0.5 * (A + B + C + D + 2 * k + 2 * l)) * std::pow(1.0 - eta, k + l) * total;
}

FockOperator unit(const FockOperator& raw) {
    FockOperator n = normalized(raw);
    n.mark_hermitian(0.0);
    return n;
}

} // namespace

TEST(IdealMapCoefficients, MatchesClosedForm) {
    const int c = 4;
    const IdealMapCoefficients co(c);
    double worst = 0.0;
    for (int a = 0; a <= c; ++a)
        for (int b = 0; b <= c; ++b)
            for (int cc = 0; cc <= c; ++cc)
                for (int d = 0; d <= c; ++d)
                    for (int s = 0; s <= a; ++s)
                        for (int t = 0; t <= b; ++t)
                            for (int n = 0; n <= cc; ++n)
                                for (int m = 0; m <= d; ++m) {
                                    const int big = a + b + cc + d;
                                    const double ref = std::pow(2.0, -0.5 * big) *
                                                       ((big - s - t - n - m) % 2 ? -1.0 : 1.0) *
                                                       std::sqrt(gamma_binom(a, s) * gamma_binom(b, t) *
                                                                 gamma_binom(cc, n) * gamma_binom(d, m));
                                    worst = std::max(worst, std::abs(co.coefficient(a, b, cc, d, s, t, n, m) - ref));
                                }
    EXPECT_LE(worst, 1e-14);
    EXPECT_EQ(co.coefficient(1, 0, 0, 0, 2, 0, 0, 0), 0.0);
}

TEST(IdealStep, MatchesDirectSummation) {
    auto rng = rng_for(21);
    for (int c : {2, 3, 4}) {
        const FockOperator rho = random_hermitian(2, c, rng);
        const FockOperator ref = ideal_step_brute(rho);
        EXPECT_LE(ref.hermiticity_defect(), 1e-12);
        EXPECT_LE(max_abs_difference(ideal_step(rho), ref), 1e-12) << "cutoff " << c;
    }
}

TEST(IdealStep, VacuumCoefficientSquares) {
    auto rng = rng_for(22);
    const FockOperator rho = random_state(2, 4, rng);
    EXPECT_NEAR(std::abs(ideal_step(rho)(0, 0, 0, 0) - rho(0, 0, 0, 0) * rho(0, 0, 0, 0)), 0.0, 1e-16);
}

TEST(IdealStep, VacuumIsFixed) {
    const FockOperator vac = fock_projector(2, 5, {0, 0});
    const FockOperator out = ideal_step(vac);
    EXPECT_EQ(out(0, 0, 0, 0), Complex(1.0, 0.0));
    EXPECT_NEAR(trace(out).real(), 1.0, 1e-15);
}

TEST(IdealStep, TmssIsFixedPoint) {
    for (double lambda : {0.3, 0.5}) {
        const FockOperator rho = unit(tmss_fock(lambda, 14));
        EXPECT_LE(trace_distance(rho, unit(ideal_step(rho))), 1e-6) << "lambda " << lambda;
    }
}

TEST(IdealStep, Example1KeepsCoherence) {
    const double eps = 0.5;
    const FockOperator rho = example_state({ExampleKind::Example1, eps}, 8);
    const FockOperator out = unit(ideal_step(rho));
    EXPECT_NEAR(std::abs(out(1, 1, 0, 0) / out(0, 0, 0, 0)), eps, 1e-14);
}

TEST(IdealStep, OutputIsExactlyHermitian) {
    auto rng = rng_for(23);
    const FockOperator out = ideal_step(random_hermitian(2, 4, rng));
    EXPECT_TRUE(out.hermitian());
    EXPECT_EQ(out.hermiticity_defect(), 0.0);
}

TEST(IdealStep, PreservesPositivity) {
    auto rng = rng_for(24);
    for (int c = 2; c <= 6; ++c) {
        const FockOperator out = ideal_step(random_state(2, c, rng, 3, 0.6));
        EXPECT_GE(min_eigenvalue(out), -1e-9) << "cutoff " << c;
    }
}

TEST(IdealStep, IsDeterministic) {
    auto rng = rng_for(25);
    const FockOperator rho = random_state(2, 5, rng);
    EXPECT_TRUE(ideal_step(rho) == ideal_step(rho));
}

TEST(IdealStep, OutputDependsOnlyOnLowerInputIndices) {
    auto rng = rng_for(26);
    const FockOperator rho = random_state(2, 4, rng);
    FockOperator bumped = rho;
    const Complex delta{0.3, 0.1};
    bumped.set({3, 2}, {3, 2}, rho(3, 2, 3, 2) + delta.real());
    bumped.set({3, 2}, {1, 0}, rho(3, 2, 1, 0) + delta);
    bumped.set({1, 0}, {3, 2}, rho(1, 0, 3, 2) + std::conj(delta));
    bumped.mark_hermitian(0.0);
    const FockOperator a = ideal_step(rho), b = ideal_step(bumped);
    for (int s = 0; s <= 4; ++s)
        for (int t = 0; t <= 4; ++t)
            for (int n = 0; n <= 4; ++n)
                for (int m = 0; m <= 4; ++m) {
                    // an input (s',t';n',m') only feeds outputs that dominate it componentwise
                    const bool reach1 = s >= 3 && t >= 2 && n >= 3 && m >= 2;
                    const bool reach2 = s >= 3 && t >= 2 && n >= 1;
                    const bool reach3 = s >= 1 && n >= 3 && m >= 2;
                    if (reach1 || reach2 || reach3) continue;
                    EXPECT_EQ(a(s, t, n, m), b(s, t, n, m)) << s << t << n << m;
                }
}

TEST(IdealStep, FirstMomentsVanishAfterOneStep) {
    auto rng = rng_for(27);
    const FockOperator rho = random_state(2, 4, rng);
    ASSERT_GT(std::abs(rho(1, 0, 0, 0)), 1e-3);
    const FockOperator out = ideal_step(rho);
    for (const ModeIndex& ket : {ModeIndex{1, 0}, ModeIndex{0, 1}}) {
        EXPECT_LE(std::abs(out.get(ket, {0, 0})), 1e-15);
        EXPECT_LE(std::abs(out.get({0, 0}, ket)), 1e-15);
    }
}

TEST(IdealStep, SeedsInvariantFromFirstStep) {
    auto rng = rng_for(28);
    const FockOperator rho = random_state(2, 6, rng, 3, 0.5);
    const IterationResult res = iterate(rho, 4, 1.0);
    ASSERT_EQ(res.records.size(), 5u);
    for (std::size_t i = 2; i < res.records.size(); ++i)
        EXPECT_LE(max_abs_difference(*res.records[i].seeds, *res.records[1].seeds), 1e-10) << "step " << i;
}

TEST(IdealStep, RejectsUnmarkedOrWrongShape) {
    FockOperator op(2, 3);
    op.set({0, 0}, {1, 0}, 1.0);
    EXPECT_THROW(ideal_step(op), NotHermitianError);
    EXPECT_THROW(ideal_step(fock_projector(1, 3, {0})), ShapeError);
}

TEST(IdealStepFast, MatchesDirectPath) {
    auto rng = rng_for(29);
    for (int i = 0; i < 8; ++i) {
        const int c = 3 + i % 4;
        const FockOperator rho = random_state(2, c, rng, 2, 0.8);
        EXPECT_LE(max_abs_difference(ideal_step_fast(rho), ideal_step(rho)), 1e-10) << "cutoff " << c;
    }
}

TEST(IdealStepFast, PreservesTmssSeeds) {
    const FockOperator rho = unit(tmss_fock(0.3, 12));
    const FockOperator out = unit(ideal_step_fast(rho));
    EXPECT_LE(max_abs_difference(seed_coefficients(out), seed_coefficients(rho)), 1e-12);
}

TEST(IdealStepFast, VacuumStaysVacuum) {
    const FockOperator out = ideal_step_fast(fock_projector(2, 4, {0, 0}));
    EXPECT_NEAR(out(0, 0, 0, 0).real(), 1.0, 1e-15);
    EXPECT_NEAR(trace(out).real(), 1.0, 1e-14);
}

TEST(LossyMapCoefficients, MatchLiteralFormula) {
    const int c = 3, K = 3;
    for (double eta : {0.0, 0.35, 1.0}) {
        const LossyMapCoefficients co(c, eta, K);
        double worst = 0.0;
        for (int A = 0; A <= c; ++A)
            for (int B = 0; B <= 2; ++B)
                for (int C = 0; C <= c; ++C)
                    for (int D = 0; D <= 2; ++D)
                        for (int k = 0; k <= K; ++k)
                            for (int l = 0; l <= 2; ++l)
                                for (int a = 0; a <= std::min(c, A + k); ++a)
                                    for (int b = 0; b <= std::min(c, B + l); ++b)
                                        for (int cc = 0; cc <= std::min(c, C + k); ++cc)
                                            for (int d = 0; d <= std::min(c, D + l); ++d) {
                                                const double ref =
                                                    lossy_coefficient_literal(A, B, C, D, k, l, a, b, cc, d, eta);
                                                worst = std::max(worst, std::abs(co.coefficient(A, B, C, D, k, l, a,
                                                                                                b, cc, d) -
                                                                                 ref));
                                            }
        EXPECT_LE(worst, 1e-14) << "eta " << eta;
    }
}

TEST(LossyMapCoefficients, UnitEfficiencyKeepsOnlyZeroLoss) {
    const LossyMapCoefficients co(4, 1.0, 4);
    EXPECT_EQ(co.weight[0], 1.0);
    for (int k = 1; k <= 4; ++k) EXPECT_EQ(co.weight[static_cast<std::size_t>(k)], 0.0);
    const LossyMapCoefficients half(4, 0.5, 4);
    for (double w : half.weight) {
        EXPECT_GE(w, 0.0);
        EXPECT_LE(w, 1.0);
    }
}

TEST(LossyStep, MatchesFourModeOracle) {
    auto rng = rng_for(31);
    for (double eta : {0.0, 0.3, 0.7, 1.0})
        for (int c : {2, 3}) {
            const FockOperator rho = random_state(2, c, rng, 2, 0.8);
            EXPECT_LE(max_abs_difference(lossy_step(rho, eta), lossy_step_oracle(rho, eta)), 1e-10)
                << "eta " << eta << " cutoff " << c;
        }
}

TEST(LossyStep, Example1MatchesOracleAtCutoffFour) {
    const FockOperator rho = example_state({ExampleKind::Example1, 0.5}, 4);
    EXPECT_LE(max_abs_difference(lossy_step(rho, 0.6), lossy_step_oracle(rho, 0.6)), 1e-10);
}

TEST(LossyStep, FullLossRangeIsExactOnWiderSpace) {
    auto rng = rng_for(32);
    const FockOperator rho = random_state(2, 2, rng, 2, 0.9);
    const FockOperator exact = lossy_step(rho, 0.4, {4});
    EXPECT_LE(max_abs_difference(exact, lossy_step_oracle(rho, 0.4, 4)), 1e-10);
}

TEST(LossyStep, TailAccountsForCutLossPhotons) {
    auto rng = rng_for(33);
    const FockOperator rho = random_state(2, 3, rng, 2, 0.9);
    const double exact = trace(lossy_step(rho, 0.3, {6})).real();
    const double cut = trace(lossy_step(rho, 0.3)).real();
    EXPECT_NEAR(exact - cut, lossy_truncation_tail(rho, 0.3), 1e-14);
    EXPECT_EQ(lossy_truncation_tail(rho, 1.0), 0.0);
}

TEST(LossyStep, UnitEfficiencyIsIdealStep) {
    auto rng = rng_for(34);
    for (int c : {3, 5}) {
        const FockOperator rho = random_state(2, c, rng);
        EXPECT_LE(max_abs_difference(lossy_step(rho, 1.0), ideal_step(rho)), 1e-12);
    }
}

TEST(LossyStep, VacuumIsFixedForAnyEfficiency) {
    for (double eta : {0.0, 0.5, 1.0}) {
        const FockOperator out = lossy_step(fock_projector(2, 4, {0, 0}), eta);
        EXPECT_NEAR(trace(out).real(), 1.0, 1e-14);
        EXPECT_NEAR(out(0, 0, 0, 0).real(), 1.0, 1e-14);
    }
}

TEST(LossyStep, PreservesPositivity) {
    auto rng = rng_for(35);
    for (double eta : {0.2, 0.8}) {
        const FockOperator out = lossy_step(random_state(2, 5, rng, 3, 0.6), eta);
        EXPECT_GE(min_eigenvalue(out), -1e-9);
    }
}

TEST(LossyStep, RejectsEfficiencyOutsideRange) {
    const FockOperator vac = fock_projector(2, 3, {0, 0});
    EXPECT_THROW(lossy_step(vac, 1.5), DomainError);
    EXPECT_THROW(lossy_step(vac, -0.1), DomainError);
}

TEST(LossyStep, ImperfectDetectorsStillGainEntanglement) {
    const FockOperator rho0 = example_state({ExampleKind::Example1, 0.7}, 10);
    const IterationResult res = iterate(rho0, 2, 0.8);
    const double e0 = log_negativity(res.states[0]);
    EXPECT_GE(log_negativity(res.states[2]), 1.5 * e0);
}

TEST(Iterate, ZeroStepsEchoesInput) {
    const FockOperator rho = example_state({ExampleKind::Example1, 0.5}, 6);
    const IterationResult res = iterate(rho, 0, 1.0);
    ASSERT_EQ(res.states.size(), 1u);
    EXPECT_TRUE(res.states[0] == rho);
    EXPECT_EQ(res.records[0].success_probability, 1.0);
    EXPECT_EQ(res.status, IterationStatus::Completed);
}

TEST(Iterate, Example1ApproachesPredictedLimit) {
    const double eps = 0.5;
    const IterationResult res = iterate(example_state({ExampleKind::Example1, eps}, 12), 8, 1.0);
    EXPECT_NEAR(log_negativity(res.states.back()), std::log2((1 + eps) / (1 - eps)), 0.02);
}

TEST(Iterate, TmssSuccessProbabilityIsConstant) {
    const IterationResult res = iterate(unit(tmss_fock(0.4, 12)), 3, 1.0);
    for (std::size_t i = 2; i < res.records.size(); ++i)
        EXPECT_NEAR(res.records[i].success_probability, res.records[1].success_probability, 1e-8);
    EXPECT_NEAR(res.records[3].cumulative_probability,
                res.records[1].success_probability * res.records[2].success_probability *
                    res.records[3].success_probability,
                1e-15);
}

TEST(Iterate, StopsOnVanishingSuccessProbability) {
    IterateOptions opt;
    opt.p_min = 0.99;
    auto old = set_warning_handler([](const std::string&) {});
    const IterationResult res = iterate(example_state({ExampleKind::Example1, 0.5}, 6), 3, 1.0, opt);
    set_warning_handler(old);
    EXPECT_EQ(res.status, IterationStatus::VanishingSuccessProbability);
    EXPECT_EQ(res.states.size(), 1u);
}

TEST(Iterate, WarnsWhenBoundaryShellIsPopulated) {
    int warnings = 0;
    auto old = set_warning_handler([&](const std::string&) { ++warnings; });
    iterate(example_state({ExampleKind::Example2, 0.5}, 4), 2, 1.0);
    set_warning_handler(old);
    EXPECT_GT(warnings, 0);
}

TEST(Iterate, RejectsBadArguments) {
    const FockOperator rho = example_state({ExampleKind::Example1, 0.5}, 4);
    EXPECT_THROW(iterate(rho, -1, 1.0), DomainError);
    EXPECT_THROW(iterate(rho, 1, 2.0), DomainError);
    FockOperator doubled = rho + rho;
    doubled.mark_hermitian(0.0);
    EXPECT_THROW(iterate(doubled, 1, 1.0), DomainError);
}
