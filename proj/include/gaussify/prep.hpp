#pragma once

// Linear optics on truncated Fock space: beam splitters, on/off detector
// conditioning, photon loss, plus the example and prepared state families.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "gaussify/error.hpp"
#include "gaussify/fock_operator.hpp"
#include "gaussify/gaussian_cv.hpp"

namespace gaussify {

namespace detail {

inline Complex ipow(Complex z, int n) {
    Complex r{1.0, 0.0};
    for (int i = 0; i < n; ++i) r *= z;
    return r;
}

inline double ipow(double x, int n) {
    double r = 1.0;
    for (int i = 0; i < n; ++i) r *= x;
    return r;
}

/// Pascal triangle up to row n, exact in double for n <= 56.
inline std::vector<std::vector<double>> binomial_table(int n) {
    std::vector<std::vector<double>> t(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i <= n; ++i) {
        t[static_cast<std::size_t>(i)].assign(static_cast<std::size_t>(i) + 1, 1.0);
        for (int j = 1; j < i; ++j)
            t[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                t[static_cast<std::size_t>(i) - 1][static_cast<std::size_t>(j) - 1] +
                t[static_cast<std::size_t>(i) - 1][static_cast<std::size_t>(j)];
    }
    return t;
}

inline double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return std::round(r);
}

inline ModeIndex drop_mode(const ModeIndex& idx, int mode, int modes) {
    ModeIndex out{};
    for (int i = 0, j = 0; i < modes; ++i)
        if (i != mode) out[j++] = idx[i];
    return out;
}

inline ModeIndex insert_mode(const ModeIndex& idx, int mode, int value, int modes) {
    ModeIndex out{};
    for (int i = 0, j = 0; i < modes; ++i) out[i] = i == mode ? value : idx[j++];
    return out;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Beam splitter
// ---------------------------------------------------------------------------

/// Two-mode beam splitter acting as
///   a_a^dag -> T a_a^dag - conj(R) a_b^dag,   a_b^dag -> R a_a^dag + conj(T) a_b^dag.
/// T = R = 1/sqrt2 is the mixing used in the distillation step.
struct BeamSplitterSpec {
    Complex transmittance{1.0 / std::sqrt(2.0), 0.0};
    Complex reflectance{1.0 / std::sqrt(2.0), 0.0};
    int mode_a = 0;
    int mode_b = 1;

    static BeamSplitterSpec balanced(int a, int b) { return {{1.0 / std::sqrt(2.0), 0.0}, {1.0 / std::sqrt(2.0), 0.0}, a, b}; }

    void validate() const {
        const double norm = std::norm(transmittance) + std::norm(reflectance);
        if (std::abs(norm - 1.0) > 1e-10) throw DomainError("BeamSplitterSpec: |T|^2 + |R|^2 must equal 1");
        if (mode_a == mode_b) throw DomainError("BeamSplitterSpec: target modes must differ");
    }
};

/// Matrix of the beam splitter on the sector with `total` photons;
/// entry (j, x) = <j, total-j| U |x, total-x>.
inline Eigen::MatrixXcd beam_splitter_block(const BeamSplitterSpec& spec, int total) {
    spec.validate();
    const Complex w00 = spec.transmittance;
    const Complex w10 = -std::conj(spec.reflectance);
    const Complex w01 = spec.reflectance;
    const Complex w11 = std::conj(spec.transmittance);
    std::vector<double> lf(static_cast<std::size_t>(total) + 1, 0.0);
    for (int i = 1; i <= total; ++i) lf[static_cast<std::size_t>(i)] = lf[static_cast<std::size_t>(i) - 1] + std::log(i);
    Eigen::MatrixXcd block(total + 1, total + 1);
    for (int j = 0; j <= total; ++j)
        for (int x = 0; x <= total; ++x) {
            const int y = total - x;
            Complex acc{0.0, 0.0};
            for (int i = std::max(0, j - y); i <= std::min(x, j); ++i) {
                const int q = j - i;
                acc += detail::binomial(x, i) * detail::binomial(y, q) * detail::ipow(w00, i) *
                       detail::ipow(w10, x - i) * detail::ipow(w01, q) * detail::ipow(w11, y - q);
            }
            const double norm = std::exp(0.5 * (lf[static_cast<std::size_t>(j)] + lf[static_cast<std::size_t>(total - j)] -
                                                lf[static_cast<std::size_t>(x)] - lf[static_cast<std::size_t>(y)]));
            block(j, x) = acc * norm;
        }
    return block;
}

/// U op U^dag with U truncated to the cutoff. Sectors with more than `cutoff`
/// photons on the pair are clipped.
inline FockOperator apply_beam_splitter(const FockOperator& op, const BeamSplitterSpec& spec) {
    spec.validate();
    const int modes = op.modes();
    if (spec.mode_a < 0 || spec.mode_a >= modes || spec.mode_b < 0 || spec.mode_b >= modes)
        throw DomainError("apply_beam_splitter: target mode outside operator");
    const int c = op.cutoff();
    std::vector<Eigen::MatrixXcd> blocks;
    for (int total = 0; total <= 2 * c; ++total) blocks.push_back(beam_splitter_block(spec, total));

    // Sparse rows of U: for each ket, the kets it maps to with amplitudes.
    const std::size_t dim = op.dim();
    std::vector<std::vector<std::pair<std::size_t, Complex>>> image(dim);
    for (std::size_t k = 0; k < dim; ++k) {
        ModeIndex idx = op.unflat(k);
        const int x = idx[spec.mode_a];
        const int total = x + idx[spec.mode_b];
        for (int j = std::max(0, total - c); j <= std::min(c, total); ++j) {
            const Complex u = blocks[static_cast<std::size_t>(total)](j, x);
            if (u == Complex{0.0, 0.0}) continue;
            idx[spec.mode_a] = j;
            idx[spec.mode_b] = total - j;
            image[k].emplace_back(op.flat(idx), u);
        }
    }

    std::vector<Complex> tmp(dim * dim, Complex{0.0, 0.0});
    const auto in = op.coefficients();
    for (std::size_t k = 0; k < dim; ++k)
        for (const auto& [kp, u] : image[k]) {
            Complex* dst = tmp.data() + kp * dim;
            const Complex* src = in.data() + k * dim;
            for (std::size_t b = 0; b < dim; ++b) dst[b] += u * src[b];
        }
    std::vector<Complex> out(dim * dim, Complex{0.0, 0.0});
    for (std::size_t b = 0; b < dim; ++b)
        for (const auto& [bp, u] : image[b]) {
            const Complex uc = std::conj(u);
            for (std::size_t k = 0; k < dim; ++k) out[k * dim + bp] += tmp[k * dim + b] * uc;
        }
    FockOperator result(modes, c, std::move(out));
    if (op.hermitian()) result.mark_hermitian(1e-10 * std::max(1.0, std::abs(trace(op))));
    return result;
}

// ---------------------------------------------------------------------------
// Detector conditioning
// ---------------------------------------------------------------------------

/// On/off detector outcome on one mode: Vacuum is E1 = |0><0|, Click is
/// E2 = 1 - |0><0|.
struct KrausElement {
    enum class Outcome { Vacuum, Click };
    Outcome outcome = Outcome::Vacuum;
    int mode = 0;

    static KrausElement vacuum(int mode) { return {Outcome::Vacuum, mode}; }
    static KrausElement click(int mode) { return {Outcome::Click, mode}; }
};

/// Unnormalised post-measurement operator on the remaining modes; its trace
/// is the outcome probability.
inline FockOperator condition(const FockOperator& op, const KrausElement& kraus) {
    const int modes = op.modes();
    if (kraus.mode < 0 || kraus.mode >= modes) throw DomainError("condition: invalid mode");
    if (modes < 2) throw ShapeError("condition: at least two modes required");
    FockOperator vac(modes - 1, op.cutoff());
    {
        auto dst = vac.mutable_coefficients();
        for (std::size_t k = 0; k < vac.dim(); ++k) {
            const std::size_t kf = op.flat(detail::insert_mode(vac.unflat(k), kraus.mode, 0, modes));
            for (std::size_t b = 0; b < vac.dim(); ++b)
                dst[k * vac.dim() + b] = op.element(kf, op.flat(detail::insert_mode(vac.unflat(b), kraus.mode, 0, modes)));
        }
    }
    if (op.hermitian()) vac.mark_hermitian(0.0);
    if (kraus.outcome == KrausElement::Outcome::Vacuum) return vac;
    FockOperator out = trace_out(op, kraus.mode);
    out -= vac;
    if (op.hermitian()) out.mark_hermitian(1e-12 * std::max(1.0, std::abs(trace(op))));
    return out;
}

inline double outcome_probability(const FockOperator& op, const KrausElement& kraus) {
    return trace(condition(op, kraus)).real();
}

// ---------------------------------------------------------------------------
// Photon loss
// ---------------------------------------------------------------------------

/// Amplitude damping of transmittance theta on one mode, in Kraus form
/// K_j = sum_n sqrt(C(n,j)) theta^(n-j) (1-theta^2)^(j/2) |n-j><n|.
inline FockOperator loss_channel_fock(const FockOperator& op, int mode, double theta) {
    if (!(theta >= 0.0 && theta <= 1.0)) throw DomainError("loss_channel_fock: theta must lie in [0, 1]");
    if (mode < 0 || mode >= op.modes()) throw DomainError("loss_channel_fock: invalid mode");
    const int c = op.cutoff();
    const double absorb = 1.0 - theta * theta;
    const auto binom = detail::binomial_table(c);
    std::vector<double> tpow(static_cast<std::size_t>(2 * c) + 1), apow(static_cast<std::size_t>(c) + 1);
    for (int i = 0; i <= 2 * c; ++i) tpow[static_cast<std::size_t>(i)] = detail::ipow(theta, i);
    for (int i = 0; i <= c; ++i) apow[static_cast<std::size_t>(i)] = detail::ipow(absorb, i);

    const std::size_t dim = op.dim();
    std::vector<Complex> out(dim * dim, Complex{0.0, 0.0});
    for (std::size_t k = 0; k < dim; ++k) {
        ModeIndex ik = op.unflat(k);
        const int nk = ik[mode];
        for (std::size_t b = 0; b < dim; ++b) {
            const Complex v = op.element(k, b);
            if (v == Complex{0.0, 0.0}) continue;
            ModeIndex ib = op.unflat(b);
            const int nb = ib[mode];
            for (int j = 0; j <= std::min(nk, nb); ++j) {
                const double w = std::sqrt(binom[static_cast<std::size_t>(nk)][static_cast<std::size_t>(j)] *
                                           binom[static_cast<std::size_t>(nb)][static_cast<std::size_t>(j)]) *
                                 tpow[static_cast<std::size_t>(nk + nb - 2 * j)] * apow[static_cast<std::size_t>(j)];
                if (w == 0.0) continue;
                ModeIndex kk = ik, bb = ib;
                kk[mode] = nk - j;
                bb[mode] = nb - j;
                out[op.flat(kk) * dim + op.flat(bb)] += w * v;
            }
        }
    }
    FockOperator result(op.modes(), c, std::move(out));
    if (op.hermitian()) result.mark_hermitian(1e-12 * std::max(1.0, std::abs(trace(op))));
    return result;
}

// ---------------------------------------------------------------------------
// State families
// ---------------------------------------------------------------------------

/// Mixture produced by the preparatory step after symmetric loss:
/// rho_0000 = 1/(1 + lambda^2 eps + lambda^2), eps = (1 - theta^2)/theta^2.
inline FockOperator prepared_family(double lambda, double theta, int cutoff) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw DomainError("prepared_family: lambda must lie in [0, 1]");
    if (!(theta > 0.0 && theta <= 1.0)) throw DomainError("prepared_family: theta must lie in (0, 1]");
    if (cutoff < 1) throw DomainError("prepared_family: cutoff must be at least 1");
    const double eps = (1.0 - theta * theta) / (theta * theta);
    const double r0 = 1.0 / (1.0 + lambda * lambda * eps + lambda * lambda);
    FockOperator rho(2, cutoff);
    rho.set({0, 0}, {0, 0}, r0);
    rho.set({1, 1}, {0, 0}, lambda * r0);
    rho.set({0, 0}, {1, 1}, lambda * r0);
    rho.set({1, 1}, {1, 1}, lambda * lambda * r0);
    rho.set({0, 1}, {0, 1}, eps * lambda * lambda * r0);
    rho.mark_hermitian(0.0);
    return rho;
}

enum class ExampleKind { Example1, Example2, Example3 };

inline const char* to_string(ExampleKind k) {
    switch (k) {
        case ExampleKind::Example1: return "example1";
        case ExampleKind::Example2: return "example2";
        case ExampleKind::Example3: return "example3";
    }
    return "?";
}

struct ExampleSpec {
    ExampleKind kind = ExampleKind::Example1;
    double epsilon = 0.0;
};

/// Example 1: pure, (|00> + eps|11>)/sqrt(1+eps^2), eps in [0,1).
/// Example 2: mixed, weight 1/(2+eps) on the |00>,|11> block plus eps/(2+eps) on |01>, eps >= 0.
/// Example 3: as Example 1 with the coherences halved, eps in [0,1).
inline FockOperator example_state(const ExampleSpec& spec, int cutoff) {
    const double e = spec.epsilon;
    if (cutoff < 1) throw DomainError("example_state: cutoff must be at least 1");
    FockOperator rho(2, cutoff);
    switch (spec.kind) {
        case ExampleKind::Example1:
        case ExampleKind::Example3: {
            if (!(e >= 0.0 && e < 1.0)) throw DomainError("example_state: epsilon must lie in [0, 1)");
            const double n = 1.0 + e * e;
            const double coh = spec.kind == ExampleKind::Example1 ? e / n : e / (2.0 * n);
            rho.set({0, 0}, {0, 0}, 1.0 / n);
            rho.set({1, 1}, {0, 0}, coh);
            rho.set({0, 0}, {1, 1}, coh);
            rho.set({1, 1}, {1, 1}, e * e / n);
            break;
        }
        case ExampleKind::Example2: {
            if (!(e >= 0.0 && std::isfinite(e))) throw DomainError("example_state: epsilon must lie in [0, inf)");
            const double w = 1.0 / (2.0 + e);
            rho.set({0, 0}, {0, 0}, w);
            rho.set({1, 1}, {0, 0}, w);
            rho.set({0, 0}, {1, 1}, w);
            rho.set({1, 1}, {1, 1}, w);
            rho.set({0, 1}, {0, 1}, e * w);
            break;
        }
    }
    rho.mark_hermitian(0.0);
    return rho;
}

// ---------------------------------------------------------------------------
// Preparatory step
// ---------------------------------------------------------------------------

struct PreparationOutcome {
    FockOperator state;         // normalised two-mode output
    double probability = 0.0;   // both detectors click
};

/// Two copies of a squeezed pair (amplitude lambda0) are mixed copy-to-copy
/// on beam splitters with real T and R = i sqrt(1 - T^2); both detectors on
/// the first output port must click.
inline PreparationOutcome prepare_from_tmss(double lambda0, double transmittance, int cutoff) {
    if (!(transmittance > 0.0 && transmittance < 1.0))
        throw DomainError("prepare_from_tmss: transmittance must lie in (0, 1)");
    const FockOperator pair = normalized(tmss_fock(lambda0, cutoff));
    FockOperator four = tensor_product(pair, pair);
    const Complex t{transmittance, 0.0};
    const Complex r{0.0, std::sqrt(1.0 - transmittance * transmittance)};
    four = apply_beam_splitter(four, {t, r, 0, 2});
    four = apply_beam_splitter(four, {t, r, 1, 3});
    FockOperator kept = condition(four, KrausElement::click(0));
    kept = condition(kept, KrausElement::click(0));
    const double p = trace(kept).real();
    if (!(p > 0.0)) throw NumericalError("prepare_from_tmss: zero click probability");
    return {normalized(kept), p};
}

/// <psi|rho|psi> for psi = (|00> + lambda|11>)/sqrt(1 + lambda^2).
inline double fidelity_to_pair_target(const FockOperator& rho, double lambda) {
    rho.require_modes(2, "fidelity_to_pair_target");
    const double n = 1.0 + lambda * lambda;
    const Complex f = rho(0, 0, 0, 0) + lambda * (rho(1, 1, 0, 0) + rho(0, 0, 1, 1)) + lambda * lambda * rho(1, 1, 1, 1);
    return f.real() / n;
}

struct PreparationScanOptions {
    int cutoff = 3;
    double lambda0_min = 1e-3;
    double lambda0_max = 0.6;
    int lambda0_samples = 25;
    int transmittance_samples = 19;
    double refine_tol = 1e-7;
};

struct PreparationPoint {
    double lambda0 = 0.0;
    double xi = 1.0;            // (1 + lambda0^2)/(1 - lambda0^2), the local covariance entry
    double transmittance = 0.0;
    double fidelity = 0.0;
    double probability = 0.0;
};

/// Grid search over (lambda0, T) with golden-section refinement of T at the
/// best grid cell.
inline PreparationPoint scan_preparation(double target_lambda, const PreparationScanOptions& opt = {}) {
    if (!(target_lambda >= 0.0 && target_lambda <= 1.0))
        throw DomainError("scan_preparation: target lambda must lie in [0, 1]");
    if (opt.lambda0_samples < 1 || opt.transmittance_samples < 3 || !(opt.lambda0_min > 0.0) ||
        !(opt.lambda0_max < 1.0) || opt.lambda0_min > opt.lambda0_max)
        throw DomainError("scan_preparation: invalid grid");

    auto evaluate = [&](double l0, double t) {
        const PreparationOutcome o = prepare_from_tmss(l0, t, opt.cutoff);
        PreparationPoint p;
        p.lambda0 = l0;
        p.xi = (1.0 + l0 * l0) / (1.0 - l0 * l0);
        p.transmittance = t;
        p.fidelity = fidelity_to_pair_target(o.state, target_lambda);
        p.probability = o.probability;
        return p;
    };

    const double step_t = 1.0 / (opt.transmittance_samples + 1);
    PreparationPoint best;
    best.fidelity = -1.0;
    for (int i = 0; i < opt.lambda0_samples; ++i) {
        const double f = opt.lambda0_samples == 1 ? 0.0 : static_cast<double>(i) / (opt.lambda0_samples - 1);
        const double l0 = opt.lambda0_min * std::pow(opt.lambda0_max / opt.lambda0_min, f);
        for (int j = 1; j <= opt.transmittance_samples; ++j) {
            const PreparationPoint p = evaluate(l0, j * step_t);
            if (p.fidelity > best.fidelity) best = p;
        }
    }

    double lo = std::max(1e-6, best.transmittance - step_t);
    double hi = std::min(1.0 - 1e-6, best.transmittance + step_t);
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    PreparationPoint p1 = evaluate(best.lambda0, x1), p2 = evaluate(best.lambda0, x2);
    while (hi - lo > opt.refine_tol) {
        if (p1.fidelity >= p2.fidelity) {
            hi = x2;
            x2 = x1;
            p2 = p1;
            x1 = hi - g * (hi - lo);
            p1 = evaluate(best.lambda0, x1);
        } else {
            lo = x1;
            x1 = x2;
            p1 = p2;
            x2 = lo + g * (hi - lo);
            p2 = evaluate(best.lambda0, x2);
        }
    }
    const PreparationPoint refined = p1.fidelity >= p2.fidelity ? p1 : p2;
    return refined.fidelity > best.fidelity ? refined : best;
}

} // namespace gaussify
