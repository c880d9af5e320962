#pragma once

// Fock-level figures of merit and single-mode Wigner functions.
//
// Wigner convention: quadratures q, p with vacuum variance 1/2, so the vacuum
// is W = exp(-(q^2 + p^2))/pi.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "gaussify/distill_map.hpp"
#include "gaussify/error.hpp"
#include "gaussify/fock_operator.hpp"
#include "gaussify/gaussian_cv.hpp"
#include "gaussify/parallel.hpp"
#include "gaussify/warnings.hpp"

namespace gaussify {

/// log2 of the trace norm of the partial transpose.
inline double log_negativity(const FockOperator& rho) {
    rho.require_modes(2, "log_negativity");
    if (!rho.hermitian()) throw NotHermitianError("log_negativity: input must be marked hermitian");
    if (std::abs(trace(rho) - 1.0) > 1e-8) throw DomainError("log_negativity: input must have unit trace");
    return std::log2(trace_norm(partial_transpose(rho)));
}

/// -sum lambda log2 lambda over eigenvalues above 1e-14.
inline double von_neumann_entropy(const FockOperator& rho, double tol_pos = kPositivityTol) {
    const Eigen::VectorXd ev = eigenvalues_hermitian(rho);
    if (ev.minCoeff() < -tol_pos)
        throw NumericalError("von_neumann_entropy: eigenvalue " + std::to_string(ev.minCoeff()) + " below tolerance");
    double s = 0.0;
    for (int i = 0; i < ev.size(); ++i)
        if (ev(i) > 1e-14) s -= ev(i) * std::log2(ev(i));
    // eigenvalues a rounding error above 1 give -1e-16
    return std::max(s, 0.0);
}

/// tr rho^2 of a hermitian operator.
inline double purity(const FockOperator& rho) {
    if (!rho.hermitian()) throw NotHermitianError("purity: input must be marked hermitian");
    double s = 0.0;
    for (const Complex& c : rho.coefficients()) s += std::norm(c);
    return s;
}

inline double trace_distance(const FockOperator& a, const FockOperator& b) {
    a.require_same_shape(b, "trace_distance");
    if (!a.hermitian() || !b.hermitian()) throw NotHermitianError("trace_distance: inputs must be marked hermitian");
    FockOperator diff = a - b;
    diff.mark_hermitian(0.0);
    return 0.5 * trace_norm(diff);
}

/// Gaussian-level measures of the covariance matrix of a two-mode state.
inline MeasureValues gaussian_measures_of(const FockOperator& rho) {
    MeasureValues m;
    const CovMat g = covariance_from_fock(rho);
    m.squeezing_es = squeezing_ES(g);
    try {
        m.squeezing_ets = squeezing_ETS(g);
    } catch (const NumericalError&) {
    }
    return m;
}

struct MeasureToggles {
    bool log_negativity = true;
    bool entropy = true;
    bool purity = true;
    bool squeezing = true;
};

inline MeasureValues compute_measures(const FockOperator& rho, const MeasureToggles& on = {}) {
    MeasureValues m;
    if (on.squeezing) m = gaussian_measures_of(rho);
    if (on.log_negativity) m.log_negativity = log_negativity(rho);
    if (on.entropy) m.entropy = von_neumann_entropy(rho);
    if (on.purity) m.purity = purity(rho);
    return m;
}

/// Fills the measures of every record from the matching state.
inline void attach_measures(IterationResult& result, const MeasureToggles& on = {}) {
    for (std::size_t i = 0; i < result.records.size(); ++i)
        result.records[i].measures = compute_measures(result.states[i], on);
}

// ---------------------------------------------------------------------------
// Wigner function
// ---------------------------------------------------------------------------

struct WignerGridSpec {
    double q_min = -6.0;
    double q_max = 6.0;
    double p_min = -6.0;
    double p_max = 6.0;
    int q_samples = 201;
    int p_samples = 201;

    void validate() const {
        if (q_samples < 2 || p_samples < 2) throw DomainError("WignerGridSpec: at least two samples per axis");
        if (!(q_max > q_min) || !(p_max > p_min)) throw DomainError("WignerGridSpec: empty axis range");
    }
    double q(int i) const { return q_min + (q_max - q_min) * i / (q_samples - 1); }
    double p(int j) const { return p_min + (p_max - p_min) * j / (p_samples - 1); }

    friend bool operator==(const WignerGridSpec&, const WignerGridSpec&) = default;
};

struct WignerGrid {
    WignerGridSpec spec;
    std::vector<double> values; // row-major, q outer: values[i * p_samples + j]

    double at(int i, int j) const { return values[static_cast<std::size_t>(i * spec.p_samples + j)]; }

    /// Trapezoid integral over the sampled rectangle.
    double integral() const {
        const double hq = (spec.q_max - spec.q_min) / (spec.q_samples - 1);
        const double hp = (spec.p_max - spec.p_min) / (spec.p_samples - 1);
        double s = 0.0;
        for (int i = 0; i < spec.q_samples; ++i) {
            const double wq = (i == 0 || i == spec.q_samples - 1) ? 0.5 : 1.0;
            for (int j = 0; j < spec.p_samples; ++j) {
                const double wp = (j == 0 || j == spec.p_samples - 1) ? 0.5 : 1.0;
                s += wq * wp * at(i, j);
            }
        }
        return s * hq * hp;
    }
    double min_value() const { return *std::min_element(values.begin(), values.end()); }
};

inline constexpr double kWignerNormalizationWarn = 1e-2;

/// W(q,p) = sum rho_{m;n} W_{|m><n|}(q,p) with, for m >= n,
///   W_{|m><n|} = ((-1)^n/pi) sqrt(n!/m!) (sqrt2 (q - i p))^(m-n) e^{-r^2} L_n^(m-n)(2 r^2),
/// r^2 = q^2 + p^2, and W_{|n><m|} = conj(W_{|m><n|}).
inline WignerGrid wigner_single_mode(const FockOperator& rho, const WignerGridSpec& spec = {}) {
    rho.require_modes(1, "wigner_single_mode");
    if (!rho.hermitian()) throw NotHermitianError("wigner_single_mode: input must be marked hermitian");
    spec.validate();
    const int c = rho.cutoff();
    // sqrt(n!/m!) for n <= m
    std::vector<double> lf(static_cast<std::size_t>(c) + 1, 0.0);
    for (int i = 1; i <= c; ++i) lf[static_cast<std::size_t>(i)] = lf[static_cast<std::size_t>(i) - 1] + std::log(i);

    WignerGrid grid;
    grid.spec = spec;
    grid.values.assign(static_cast<std::size_t>(spec.q_samples) * static_cast<std::size_t>(spec.p_samples), 0.0);
    detail::parallel_for(static_cast<std::size_t>(spec.q_samples), [&](std::size_t i) {
        std::vector<double> lag(static_cast<std::size_t>(c) + 1);
        const double q = spec.q(static_cast<int>(i));
        for (int j = 0; j < spec.p_samples; ++j) {
            const double p = spec.p(j);
            const double r2 = q * q + p * p;
            const double x = 2.0 * r2;
            const Complex z = std::sqrt(2.0) * Complex{q, -p};
            double w = 0.0;
            Complex zk{1.0, 0.0};
            for (int k = 0; k <= c; ++k) { // k = m - n
                // generalised Laguerre L_n^(k)(x) by upward recurrence in n
                lag[0] = 1.0;
                if (c - k >= 1) lag[1] = 1.0 + k - x;
                for (int n = 2; n <= c - k; ++n)
                    lag[static_cast<std::size_t>(n)] =
                        ((2.0 * n - 1.0 + k - x) * lag[static_cast<std::size_t>(n) - 1] -
                         (n - 1.0 + k) * lag[static_cast<std::size_t>(n) - 2]) / n;
                for (int n = 0; n + k <= c; ++n) {
                    const int m = n + k;
                    const double amp = (n % 2 == 0 ? 1.0 : -1.0) *
                                       std::exp(0.5 * (lf[static_cast<std::size_t>(n)] - lf[static_cast<std::size_t>(m)])) *
                                       lag[static_cast<std::size_t>(n)];
                    const Complex kern = amp * zk;
                    if (k == 0) w += (rho(m, n) * kern).real();
                    else w += 2.0 * (rho(m, n) * kern).real();
                }
                zk *= z;
            }
            grid.values[i * static_cast<std::size_t>(spec.p_samples) + static_cast<std::size_t>(j)] =
                w * std::exp(-r2) / std::numbers::pi;
        }
    });
    const double residual = std::abs(grid.integral() - trace(rho).real());
    if (residual > kWignerNormalizationWarn)
        warn("wigner_single_mode: normalisation residual " + std::to_string(residual) + " on a coarse grid");
    return grid;
}

/// Gaussian Wigner function with the given single-mode covariance and mean.
inline double gaussian_wigner(const CovMat& gamma, double q, double p) {
    if (gamma.dim() != 2) throw ShapeError("gaussian_wigner: single-mode covariance required");
    const Eigen::Matrix2d g = gamma.matrix();
    const Eigen::Vector2d d(q - gamma.mean()(0), p - gamma.mean()(1));
    return std::exp(-d.dot(g.inverse() * d)) / (std::numbers::pi * std::sqrt(g.determinant()));
}

/// Largest pointwise deviation from the Gaussian with the state's first and
/// second moments.
inline double gaussian_fit_residual(const FockOperator& rho, const WignerGrid& grid) {
    const CovMat g = covariance_from_fock(rho);
    double worst = 0.0;
    for (int i = 0; i < grid.spec.q_samples; ++i)
        for (int j = 0; j < grid.spec.p_samples; ++j)
            worst = std::max(worst, std::abs(grid.at(i, j) - gaussian_wigner(g, grid.spec.q(i), grid.spec.p(j))));
    return worst;
}

/// Excess kurtosis of the q-marginal; zero for Gaussian states.
inline double marginal_excess_kurtosis(const WignerGrid& grid) {
    const auto& s = grid.spec;
    std::vector<double> marg(static_cast<std::size_t>(s.q_samples), 0.0);
    const double hp = (s.p_max - s.p_min) / (s.p_samples - 1);
    for (int i = 0; i < s.q_samples; ++i) {
        double acc = 0.0;
        for (int j = 0; j < s.p_samples; ++j) acc += (j == 0 || j == s.p_samples - 1 ? 0.5 : 1.0) * grid.at(i, j);
        marg[static_cast<std::size_t>(i)] = acc * hp;
    }
    double m0 = 0.0, m1 = 0.0;
    for (int i = 0; i < s.q_samples; ++i) {
        m0 += marg[static_cast<std::size_t>(i)];
        m1 += marg[static_cast<std::size_t>(i)] * s.q(i);
    }
    const double mean = m1 / m0;
    double m2 = 0.0, m4 = 0.0;
    for (int i = 0; i < s.q_samples; ++i) {
        const double dq = s.q(i) - mean;
        m2 += marg[static_cast<std::size_t>(i)] * dq * dq;
        m4 += marg[static_cast<std::size_t>(i)] * dq * dq * dq * dq;
    }
    m2 /= m0;
    m4 /= m0;
    return m4 / (m2 * m2) - 3.0;
}

struct WignerIndicators {
    bool has_negative_region = false;
    double min_value = 0.0;
    double excess_kurtosis = 0.0;
    bool non_gaussian_kurtosis = false;
    double normalization = 0.0;
    double gaussian_fit_residual = 0.0;
};

inline constexpr double kNegativityIndicatorTol = 1e-10;
inline constexpr double kKurtosisIndicatorTol = 1e-3;

inline WignerIndicators wigner_indicators(const FockOperator& rho, const WignerGrid& grid) {
    WignerIndicators ind;
    ind.min_value = grid.min_value();
    ind.has_negative_region = ind.min_value < -kNegativityIndicatorTol;
    ind.excess_kurtosis = marginal_excess_kurtosis(grid);
    ind.non_gaussian_kurtosis = std::abs(ind.excess_kurtosis) > kKurtosisIndicatorTol;
    ind.normalization = grid.integral();
    ind.gaussian_fit_residual = gaussian_fit_residual(rho, grid);
    return ind;
}

} // namespace gaussify
