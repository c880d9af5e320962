#pragma once

// Shared fixtures for the test binaries: seeded random operators and
// independent reference formulas.

#include <cmath>
#include <complex>
#include <random>

#include "gaussify/fock_operator.hpp"

namespace gaussify::testing {

inline std::mt19937_64 rng_for(unsigned long long seed) { return std::mt19937_64(seed); }

/// Hermitian operator with Gaussian random entries (not positive).
inline FockOperator random_hermitian(int modes, int cutoff, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    FockOperator op(modes, cutoff);
    auto c = op.mutable_coefficients();
    for (auto& x : c) x = {g(rng), g(rng)};
    op.mark_hermitian(1e300);
    return op;
}

/// Positive unit-trace operator sum_j |v_j><v_j| / tr. Amplitudes of a ket
/// with N photons in total are damped by decay^N.
inline FockOperator random_state(int modes, int cutoff, std::mt19937_64& rng, int rank = 3, double decay = 1.0) {
    std::normal_distribution<double> g(0.0, 1.0);
    FockOperator op(modes, cutoff);
    const std::size_t dim = op.dim();
    std::vector<Complex> acc(dim * dim, Complex{0.0, 0.0});
    for (int r = 0; r < rank; ++r) {
        std::vector<Complex> v(dim);
        for (std::size_t k = 0; k < dim; ++k) {
            const ModeIndex idx = op.unflat(k);
            int total = 0;
            for (int i = 0; i < modes; ++i) total += idx[i];
            v[k] = std::pow(decay, total) * Complex{g(rng), g(rng)};
        }
        for (std::size_t k = 0; k < dim; ++k)
            for (std::size_t b = 0; b < dim; ++b) acc[k * dim + b] += v[k] * std::conj(v[b]);
    }
    FockOperator out(modes, cutoff, std::move(acc));
    out.mark_hermitian(1e-12);
    FockOperator n = normalized(out);
    n.mark_hermitian(0.0);
    return n;
}

/// Binomial coefficient through the gamma function.
inline double gamma_binom(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    return std::round(std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0)));
}

/// |psi><psi| for psi = (|00> + eps|11>)/sqrt(1+eps^2).
inline FockOperator pair_projector(double eps, int cutoff) {
    FockOperator op(2, cutoff);
    const double n = 1.0 + eps * eps;
    op.set({0, 0}, {0, 0}, 1.0 / n);
    op.set({0, 0}, {1, 1}, eps / n);
    op.set({1, 1}, {0, 0}, eps / n);
    op.set({1, 1}, {1, 1}, eps * eps / n);
    op.mark_hermitian(0.0);
    return op;
}

inline FockOperator fock_projector(int modes, int cutoff, const ModeIndex& ket) {
    FockOperator op(modes, cutoff);
    op.set(ket, ket, 1.0);
    op.mark_hermitian(0.0);
    return op;
}

} // namespace gaussify::testing
