#pragma once

// One Gaussification step and the multi-step driver.
//
// Ideal step (perfect vacuum detectors):
//   rho'_{a,b;c,d} = sum M^{s,t;n,m}_{a,b;c,d} rho_{s,t;n,m} rho_{a-s,b-t;c-n,d-m}
//   M = 2^{-(a+b+c+d)/2} (-1)^{(a+b+c+d)-(s+t+n+m)} sqrt(C(a,s) C(b,t) C(c,n) C(d,m))
// Lossy step (efficiency eta): each detector is preceded by a loss of
// transmittance sqrt(eta); k and l photons lost from the two detector modes
// are summed with weight (1-eta)^(k+l).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <fftw3.h>

#include "gaussify/error.hpp"
#include "gaussify/fock_operator.hpp"
#include "gaussify/gaussian_cv.hpp"
#include "gaussify/parallel.hpp"
#include "gaussify/prep.hpp"
#include "gaussify/warnings.hpp"

namespace gaussify {

inline constexpr double kMinSuccessProbability = 1e-12;

// ---------------------------------------------------------------------------
// Coefficient tables
// ---------------------------------------------------------------------------

struct IdealMapCoefficients {
    int cutoff = 0;
    std::vector<double> sqrt_factorial; // sqrt(k!), k <= cutoff
    std::vector<double> sign;           // (-1)^k, k <= 4 cutoff
    std::vector<double> pow2;           // 2^{-k/2}, k <= 4 cutoff
    std::vector<double> sqrt_binom;     // sqrt(C(n,k)), (cutoff+1)^2, row n

    explicit IdealMapCoefficients(int c) : cutoff(c) {
        if (c < 0) throw DomainError("IdealMapCoefficients: negative cutoff");
        sqrt_factorial.resize(static_cast<std::size_t>(c) + 1);
        sqrt_factorial[0] = 1.0;
        for (int k = 1; k <= c; ++k)
            sqrt_factorial[static_cast<std::size_t>(k)] = sqrt_factorial[static_cast<std::size_t>(k) - 1] * std::sqrt(k);
        sign.resize(static_cast<std::size_t>(4 * c) + 1);
        pow2.resize(static_cast<std::size_t>(4 * c) + 1);
        for (int k = 0; k <= 4 * c; ++k) {
            sign[static_cast<std::size_t>(k)] = k % 2 == 0 ? 1.0 : -1.0;
            pow2[static_cast<std::size_t>(k)] = std::pow(2.0, -0.5 * k);
        }
        const auto binom = detail::binomial_table(c);
        sqrt_binom.assign(static_cast<std::size_t>((c + 1) * (c + 1)), 0.0);
        for (int n = 0; n <= c; ++n)
            for (int k = 0; k <= n; ++k)
                sqrt_binom[static_cast<std::size_t>(n * (c + 1) + k)] =
                    std::sqrt(binom[static_cast<std::size_t>(n)][static_cast<std::size_t>(k)]);
    }

    double sb(int n, int k) const { return sqrt_binom[static_cast<std::size_t>(n * (cutoff + 1) + k)]; }

    /// M^{s,t;n,m}_{a,b;c,d}; zero unless s<=a, t<=b, n<=c, m<=d.
    double coefficient(int a, int b, int c, int d, int s, int t, int n, int m) const {
        if (s > a || t > b || n > c || m > d || s < 0 || t < 0 || n < 0 || m < 0) return 0.0;
        const int big = a + b + c + d;
        return pow2[static_cast<std::size_t>(big)] * sign[static_cast<std::size_t>(big - (s + t + n + m))] * sb(a, s) *
               sb(b, t) * sb(c, n) * sb(d, m);
    }
};

/// Per-mode factor of the lossy map,
///   g(A,k,a) = 2^{-(A+k)/2} sum_s (-1)^{A-a+s}
///              sqrt(C(a,s) C(k,s) C(A+k-a,k-s) C(A,a-s)),
/// where A is the output photon number, k the photons lost from the detector
/// mode and a the photon number taken from the first copy.
struct LossyMapCoefficients {
    int cutoff = 0;
    double eta = 1.0;
    int loss_photon_limit = 0;
    std::vector<double> weight; // (1-eta)^k, k <= loss_photon_limit
    std::vector<double> g;      // [A][k][a], A,a <= cutoff, k <= loss_photon_limit

    LossyMapCoefficients(int c, double efficiency, int k_max) : cutoff(c), eta(efficiency), loss_photon_limit(k_max) {
        if (!(efficiency >= 0.0 && efficiency <= 1.0)) throw DomainError("lossy map: eta must lie in [0, 1]");
        if (c < 0 || k_max < 0) throw DomainError("lossy map: negative cutoff or loss-photon limit");
        weight.resize(static_cast<std::size_t>(k_max) + 1);
        for (int k = 0; k <= k_max; ++k) weight[static_cast<std::size_t>(k)] = detail::ipow(1.0 - efficiency, k);
        const auto binom = detail::binomial_table(c + k_max);
        auto C = [&](int n, int r) {
            if (r < 0 || n < 0 || r > n) return 0.0;
            return binom[static_cast<std::size_t>(n)][static_cast<std::size_t>(r)];
        };
        g.assign(static_cast<std::size_t>((c + 1) * (k_max + 1) * (c + 1)), 0.0);
        for (int A = 0; A <= c; ++A)
            for (int k = 0; k <= k_max; ++k)
                for (int a = 0; a <= std::min(c, A + k); ++a) {
                    double acc = 0.0;
                    for (int s = 0; s <= std::min(a, k); ++s) {
                        const double term = C(a, s) * C(k, s) * C(A + k - a, k - s) * C(A, a - s);
                        if (term == 0.0) continue;
                        acc += ((A - a + s) % 2 == 0 ? 1.0 : -1.0) * std::sqrt(term);
                    }
                    g[index(A, k, a)] = std::pow(2.0, -0.5 * (A + k)) * acc;
                }
    }

    std::size_t index(int A, int k, int a) const {
        return static_cast<std::size_t>((A * (loss_photon_limit + 1) + k) * (cutoff + 1) + a);
    }
    double factor(int A, int k, int a) const { return g[index(A, k, a)]; }

    /// Full coefficient N for output (A,B;C,D), loss photons (k,l) and
    /// first-copy indices (a,b;c,d).
    double coefficient(int A, int B, int C, int D, int k, int l, int a, int b, int c, int d) const {
        return weight[static_cast<std::size_t>(k)] * weight[static_cast<std::size_t>(l)] * factor(A, k, a) *
               factor(B, l, b) * factor(C, k, c) * factor(D, l, d);
    }
};

/// Shared read-only tables, built once per cutoff.
inline std::shared_ptr<const IdealMapCoefficients> ideal_map_coefficients(int cutoff) {
    static std::mutex mu;
    static std::map<int, std::shared_ptr<const IdealMapCoefficients>> cache;
    std::lock_guard lock(mu);
    auto& slot = cache[cutoff];
    if (!slot) slot = std::make_shared<const IdealMapCoefficients>(cutoff);
    return slot;
}

/// Shared read-only tables, built once per (cutoff, eta, loss-photon limit).
inline std::shared_ptr<const LossyMapCoefficients> lossy_map_coefficients(int cutoff, double eta, int loss_photon_limit) {
    static std::mutex mu;
    static std::map<std::tuple<int, double, int>, std::shared_ptr<const LossyMapCoefficients>> cache;
    std::lock_guard lock(mu);
    auto& slot = cache[{cutoff, eta, loss_photon_limit}];
    if (!slot) slot = std::make_shared<const LossyMapCoefficients>(cutoff, eta, loss_photon_limit);
    return slot;
}

namespace detail {

inline void require_step_input(const FockOperator& rho, const char* where) {
    rho.require_modes(2, where);
    if (rho.cutoff() < 1) throw DomainError(std::string(where) + ": cutoff must be at least 1");
    if (!rho.hermitian()) throw NotHermitianError(std::string(where) + ": input must be marked hermitian");
}

/// Fills the upper triangle (ket <= bra) via value(ket, bra) and mirrors it.
template <class Value>
FockOperator hermitian_from_upper(int cutoff, Value&& value) {
    FockOperator out(2, cutoff);
    const std::size_t dim = out.dim();
    std::vector<Complex> coeffs(dim * dim, Complex{0.0, 0.0});
    parallel_for(dim, [&](std::size_t k) {
        for (std::size_t b = k; b < dim; ++b) coeffs[k * dim + b] = value(out.unflat(k), out.unflat(b));
    });
    for (std::size_t k = 0; k < dim; ++k) {
        coeffs[k * dim + k] = {coeffs[k * dim + k].real(), 0.0};
        for (std::size_t b = k + 1; b < dim; ++b) coeffs[b * dim + k] = std::conj(coeffs[k * dim + b]);
    }
    FockOperator result(2, cutoff, std::move(coeffs));
    result.mark_hermitian(0.0);
    return result;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Ideal step
// ---------------------------------------------------------------------------

/// Unnormalised output E(rho (x) rho); its trace is the probability that
/// both detectors see vacuum. Direct summation, bra indices outermost.
inline FockOperator ideal_step(const FockOperator& rho) {
    detail::require_step_input(rho, "ideal_step");
    const int c = rho.cutoff();
    const auto coef = ideal_map_coefficients(c);
    const ModeIndex ext = support_extent(rho);
    const int e0 = ext[0], e1 = ext[1];
    const std::size_t d = static_cast<std::size_t>(c) + 1;
    const auto in = rho.coefficients();
    auto at = [&](int s, int t, int n, int m) {
        return in[((static_cast<std::size_t>(s) * d + static_cast<std::size_t>(t)) * d + static_cast<std::size_t>(n)) * d +
                  static_cast<std::size_t>(m)];
    };

    return detail::hermitian_from_upper(c, [&](const ModeIndex& ket, const ModeIndex& bra) {
        const int a = ket[0], b = ket[1], cc = bra[0], dd = bra[1];
        // both factors need indices within the support
        if (a > 2 * e0 || cc > 2 * e0 || b > 2 * e1 || dd > 2 * e1) return Complex{0.0, 0.0};
        const int big = a + b + cc + dd;
        Complex acc{0.0, 0.0};
        for (int n = std::max(0, cc - e0); n <= std::min(cc, e0); ++n)
            for (int m = std::max(0, dd - e1); m <= std::min(dd, e1); ++m) {
                const double wb = coef->sb(cc, n) * coef->sb(dd, m);
                for (int s = std::max(0, a - e0); s <= std::min(a, e0); ++s)
                    for (int t = std::max(0, b - e1); t <= std::min(b, e1); ++t) {
                        const double w = coef->sign[static_cast<std::size_t>(big - (s + t + n + m))] * wb *
                                         coef->sb(a, s) * coef->sb(b, t);
                        acc += w * at(s, t, n, m) * at(a - s, b - t, cc - n, dd - m);
                    }
            }
        return coef->pow2[static_cast<std::size_t>(big)] * acc;
    });
}

namespace detail {

inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwDeleter {
    void operator()(fftw_complex* p) const { fftw_free(p); }
};
using FftwBuffer = std::unique_ptr<fftw_complex[], FftwDeleter>;

inline FftwBuffer fftw_buffer(std::size_t n) {
    auto* p = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
    if (!p) throw ResourceError("fftw_malloc failed");
    return FftwBuffer(p);
}

} // namespace detail

/// Same map through the factorisation u = rho/sqrt(s!t!n!m!),
/// v = (-1)^(s+t+n+m) u, rho' = 2^{-N/2} sqrt(a!b!c!d!) (u * v), with the
/// four-index convolution done by FFT.
inline FockOperator ideal_step_fast(const FockOperator& rho) {
    detail::require_step_input(rho, "ideal_step_fast");
    const int c = rho.cutoff();
    const auto coef = ideal_map_coefficients(c);
    const ModeIndex ext = support_extent(rho);
    const int e[4] = {ext[0], ext[1], ext[0], ext[1]};
    int len[4];
    std::size_t total = 1;
    for (int i = 0; i < 4; ++i) {
        len[i] = 2 * e[i] + 1;
        total *= static_cast<std::size_t>(len[i]);
    }
    auto u = detail::fftw_buffer(total);
    auto v = detail::fftw_buffer(total);
    std::fill_n(&u[0][0], 2 * total, 0.0);
    std::fill_n(&v[0][0], 2 * total, 0.0);
    auto pos = [&](int s, int t, int n, int m) {
        return ((static_cast<std::size_t>(s) * len[1] + static_cast<std::size_t>(t)) * len[2] + static_cast<std::size_t>(n)) *
                   len[3] +
               static_cast<std::size_t>(m);
    };
    const auto& sf = coef->sqrt_factorial;
    for (int s = 0; s <= e[0]; ++s)
        for (int t = 0; t <= e[1]; ++t)
            for (int n = 0; n <= e[2]; ++n)
                for (int m = 0; m <= e[3]; ++m) {
                    const Complex x = rho(s, t, n, m) / (sf[static_cast<std::size_t>(s)] * sf[static_cast<std::size_t>(t)] *
                                                         sf[static_cast<std::size_t>(n)] * sf[static_cast<std::size_t>(m)]);
                    const double sg = coef->sign[static_cast<std::size_t>(s + t + n + m)];
                    const std::size_t p = pos(s, t, n, m);
                    u[p][0] = x.real();
                    u[p][1] = x.imag();
                    v[p][0] = sg * x.real();
                    v[p][1] = sg * x.imag();
                }

    fftw_plan fwd_u, fwd_v, bwd;
    {
        std::lock_guard lock(detail::fftw_planner_mutex());
        fwd_u = fftw_plan_dft(4, len, u.get(), u.get(), FFTW_FORWARD, FFTW_ESTIMATE);
        fwd_v = fftw_plan_dft(4, len, v.get(), v.get(), FFTW_FORWARD, FFTW_ESTIMATE);
        bwd = fftw_plan_dft(4, len, u.get(), u.get(), FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    fftw_execute(fwd_u);
    fftw_execute(fwd_v);
    for (std::size_t i = 0; i < total; ++i) {
        const double re = u[i][0] * v[i][0] - u[i][1] * v[i][1];
        const double im = u[i][0] * v[i][1] + u[i][1] * v[i][0];
        u[i][0] = re;
        u[i][1] = im;
    }
    fftw_execute(bwd);
    {
        std::lock_guard lock(detail::fftw_planner_mutex());
        fftw_destroy_plan(fwd_u);
        fftw_destroy_plan(fwd_v);
        fftw_destroy_plan(bwd);
    }

    const double scale = 1.0 / static_cast<double>(total);
    return detail::hermitian_from_upper(c, [&](const ModeIndex& ket, const ModeIndex& bra) {
        const int idx[4] = {ket[0], ket[1], bra[0], bra[1]};
        for (int i = 0; i < 4; ++i)
            if (idx[i] > 2 * e[i]) return Complex{0.0, 0.0};
        const std::size_t p = pos(idx[0], idx[1], idx[2], idx[3]);
        const double w = scale * coef->pow2[static_cast<std::size_t>(idx[0] + idx[1] + idx[2] + idx[3])] *
                         sf[static_cast<std::size_t>(idx[0])] * sf[static_cast<std::size_t>(idx[1])] *
                         sf[static_cast<std::size_t>(idx[2])] * sf[static_cast<std::size_t>(idx[3])];
        return Complex{w * u[p][0], w * u[p][1]};
    });
}

// ---------------------------------------------------------------------------
// Lossy step
// ---------------------------------------------------------------------------

struct LossyStepOptions {
    /// Largest number of photons lost per detector mode; negative means the
    /// cutoff. 2*cutoff gives the exact map of the truncated input.
    int loss_photon_limit = -1;
};

namespace detail {

inline Complex lossy_output(const LossyMapCoefficients& co, std::span<const Complex> in, std::size_t d, const ModeIndex& e,
                            int A, int B, int C, int D, int k_lo, int l_lo) {
    auto at = [&](int s, int t, int n, int m) {
        return in[((static_cast<std::size_t>(s) * d + static_cast<std::size_t>(t)) * d + static_cast<std::size_t>(n)) * d +
                  static_cast<std::size_t>(m)];
    };
    const int K = co.loss_photon_limit;
    Complex acc{0.0, 0.0};
    for (int k = 0; k <= K; ++k) {
        const double wk = co.weight[static_cast<std::size_t>(k)];
        if (wk == 0.0) continue;
        for (int l = 0; l <= K; ++l) {
            if (k < k_lo && l < l_lo) continue;
            const double wkl = wk * co.weight[static_cast<std::size_t>(l)];
            if (wkl == 0.0) continue;
            Complex part{0.0, 0.0};
            for (int c = std::max(0, C + k - e[0]); c <= std::min(C + k, e[0]); ++c) {
                const double gc = co.factor(C, k, c);
                if (gc == 0.0) continue;
                for (int dd = std::max(0, D + l - e[1]); dd <= std::min(D + l, e[1]); ++dd) {
                    const double gd = gc * co.factor(D, l, dd);
                    if (gd == 0.0) continue;
                    for (int a = std::max(0, A + k - e[0]); a <= std::min(A + k, e[0]); ++a) {
                        const double ga = gd * co.factor(A, k, a);
                        if (ga == 0.0) continue;
                        for (int b = std::max(0, B + l - e[1]); b <= std::min(B + l, e[1]); ++b) {
                            const double w = ga * co.factor(B, l, b);
                            part += w * at(a, b, c, dd) * at(A + k - a, B + l - b, C + k - c, D + l - dd);
                        }
                    }
                }
            }
            acc += wkl * part;
        }
    }
    return acc;
}

} // namespace detail

/// Unnormalised output of one step with detector efficiency eta.
inline FockOperator lossy_step(const FockOperator& rho, double eta, const LossyStepOptions& opt = {}) {
    detail::require_step_input(rho, "lossy_step");
    if (!(eta >= 0.0 && eta <= 1.0)) throw DomainError("lossy_step: eta must lie in [0, 1]");
    const int c = rho.cutoff();
    const int K = opt.loss_photon_limit < 0 ? c : opt.loss_photon_limit;
    const auto co = lossy_map_coefficients(c, eta, K);
    const ModeIndex ext = support_extent(rho);
    const std::size_t d = static_cast<std::size_t>(c) + 1;
    const auto in = rho.coefficients();
    return detail::hermitian_from_upper(c, [&](const ModeIndex& ket, const ModeIndex& bra) {
        return detail::lossy_output(*co, in, d, ext, ket[0], ket[1], bra[0], bra[1], 0, 0);
    });
}

/// Trace that the lossy step drops by cutting loss-photon numbers at the
/// limit instead of running them to 2*cutoff.
inline double lossy_truncation_tail(const FockOperator& rho, double eta, const LossyStepOptions& opt = {}) {
    detail::require_step_input(rho, "lossy_truncation_tail");
    if (!(eta >= 0.0 && eta <= 1.0)) throw DomainError("lossy_truncation_tail: eta must lie in [0, 1]");
    const int c = rho.cutoff();
    const int K = opt.loss_photon_limit < 0 ? c : opt.loss_photon_limit;
    if (K >= 2 * c || eta == 1.0) return 0.0;
    const auto co = lossy_map_coefficients(c, eta, 2 * c);
    const ModeIndex ext = support_extent(rho);
    const std::size_t d = static_cast<std::size_t>(c) + 1;
    double tail = 0.0;
    for (int A = 0; A <= c; ++A)
        for (int B = 0; B <= c; ++B)
            tail += detail::lossy_output(*co, rho.coefficients(), d, ext, A, B, A, B, K + 1, K + 1).real();
    return tail;
}

/// Reference construction on the materialised four-mode space: rho (x) rho,
/// balanced beam splitters per (copy-1, copy-2) mode pair, loss of
/// transmittance sqrt(eta) on the first output port, vacuum projection there.
/// `working_cutoff` (default: the input cutoff) sets the four-mode truncation.
inline FockOperator lossy_step_oracle(const FockOperator& rho, double eta, int working_cutoff = -1) {
    detail::require_step_input(rho, "lossy_step_oracle");
    if (!(eta >= 0.0 && eta <= 1.0)) throw DomainError("lossy_step_oracle: eta must lie in [0, 1]");
    const int wc = working_cutoff < 0 ? rho.cutoff() : working_cutoff;
    if (wc < rho.cutoff()) throw DomainError("lossy_step_oracle: working cutoff below input cutoff");
    const double entries = std::pow(static_cast<double>(wc + 1), 8);
    if (entries > 4e6) throw ResourceError("lossy_step_oracle: four-mode operator too large for materialisation");
    const FockOperator wide = with_cutoff(rho, wc);
    FockOperator four = tensor_product(wide, wide);
    four = apply_beam_splitter(four, BeamSplitterSpec::balanced(0, 2));
    four = apply_beam_splitter(four, BeamSplitterSpec::balanced(1, 3));
    const double theta = std::sqrt(eta);
    four = loss_channel_fock(four, 0, theta);
    four = loss_channel_fock(four, 1, theta);
    FockOperator out = condition(four, KrausElement::vacuum(0));
    out = condition(out, KrausElement::vacuum(0));
    return with_cutoff(out, rho.cutoff());
}

// ---------------------------------------------------------------------------
// Iteration
// ---------------------------------------------------------------------------

/// Figures of merit attached to a record; NaN when not requested.
struct MeasureValues {
    double log_negativity = std::numeric_limits<double>::quiet_NaN();
    double entropy = std::numeric_limits<double>::quiet_NaN();
    double purity = std::numeric_limits<double>::quiet_NaN();
    double squeezing_es = std::numeric_limits<double>::quiet_NaN();
    double squeezing_ets = std::numeric_limits<double>::quiet_NaN();
};

struct IterationRecord {
    int step = 0;
    double success_probability = 1.0;
    double cumulative_probability = 1.0;
    std::optional<SeedCoefficients> seeds;
    double boundary_weight = 0.0;
    double truncation_tail = 0.0;
    MeasureValues measures;
};

enum class IterationStatus { Completed, VanishingSuccessProbability };

struct IterationResult {
    std::vector<FockOperator> states; // normalised rho^(i)
    std::vector<IterationRecord> records;
    IterationStatus status = IterationStatus::Completed;
};

struct IterateOptions {
    double p_min = kMinSuccessProbability;
    bool fast = false;
    LossyStepOptions lossy;
};

inline std::optional<SeedCoefficients> try_seed_coefficients(const FockOperator& rho) {
    if (rho.cutoff() < 2 || std::abs(rho(0, 0, 0, 0)) <= kVacuumFloor) return std::nullopt;
    return seed_coefficients(rho);
}

/// One unnormalised step with efficiency eta.
inline FockOperator distill_step(const FockOperator& rho, double eta, const IterateOptions& opt = {}) {
    if (eta == 1.0) return opt.fast ? ideal_step_fast(rho) : ideal_step(rho);
    return lossy_step(rho, eta, opt.lossy);
}

inline IterationResult iterate(const FockOperator& rho0, int steps, double eta, const IterateOptions& opt = {}) {
    rho0.require_modes(2, "iterate");
    if (steps < 0) throw DomainError("iterate: steps must be non-negative");
    if (!(eta >= 0.0 && eta <= 1.0)) throw DomainError("iterate: eta must lie in [0, 1]");
    if (std::abs(trace(rho0) - 1.0) > 1e-10) throw DomainError("iterate: input must have unit trace");

    IterationResult result;
    auto record_for = [&](const FockOperator& state, int step, double p, double cumulative, double tail) {
        IterationRecord r;
        r.step = step;
        r.success_probability = p;
        r.cumulative_probability = cumulative;
        r.seeds = try_seed_coefficients(state);
        r.boundary_weight = boundary_shell_weight(state);
        r.truncation_tail = tail;
        if (r.boundary_weight > kBoundaryWarnLevel)
            warn("step " + std::to_string(step) + ": boundary-shell weight " + std::to_string(r.boundary_weight) +
                 " exceeds " + std::to_string(kBoundaryWarnLevel) + "; raise the cutoff");
        return r;
    };

    result.states.push_back(rho0);
    result.records.push_back(record_for(rho0, 0, 1.0, 1.0, 0.0));
    double cumulative = 1.0;
    for (int i = 1; i <= steps; ++i) {
        const FockOperator& prev = result.states.back();
        const FockOperator raw = distill_step(prev, eta, opt);
        const double p = trace(raw).real();
        if (!(p > opt.p_min)) {
            result.status = IterationStatus::VanishingSuccessProbability;
            warn("step " + std::to_string(i) + ": success probability " + std::to_string(p) + " below floor");
            break;
        }
        const double tail = eta < 1.0 ? lossy_truncation_tail(prev, eta, opt.lossy) : 0.0;
        cumulative *= p;
        FockOperator next = normalized(raw);
        next.mark_hermitian(0.0);
        result.records.push_back(record_for(next, i, p, cumulative, tail));
        result.states.push_back(std::move(next));
    }
    return result;
}

} // namespace gaussify
