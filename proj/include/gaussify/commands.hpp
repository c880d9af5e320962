#pragma once

// Batch commands behind the gaussify executable. Each returns a process exit
// code and writes its table to config.out:
//   0 success, 2 configuration error, 3 numerical abort, 4 unphysical limit.

#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "gaussify/config.hpp"
#include "gaussify/distill_map.hpp"
#include "gaussify/gaussian_cv.hpp"
#include "gaussify/measures.hpp"
#include "gaussify/parallel.hpp"
#include "gaussify/serialization.hpp"

namespace gaussify {

inline constexpr const char* kVersion = "1.0.0";

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitNumerical = 3, kExitUnphysical = 4 };

using Cell = std::variant<double, long long, std::string>;

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
};

namespace detail {

inline std::string csv_cell(const Cell& c) {
    if (const auto* d = std::get_if<double>(&c)) return format_double(*d);
    if (const auto* i = std::get_if<long long>(&c)) return std::to_string(*i);
    return std::get<std::string>(c);
}

inline json json_cell(const Cell& c) {
    if (const auto* d = std::get_if<double>(&c)) return std::isfinite(*d) ? json(*d) : json(nullptr);
    if (const auto* i = std::get_if<long long>(&c)) return json(*i);
    return json(std::get<std::string>(c));
}

} // namespace detail

inline std::string render_table(const Table& t, const ProtocolConfig& cfg) {
    if (cfg.format == OutputFormat::Csv) {
        std::string s;
        for (std::size_t i = 0; i < t.columns.size(); ++i) s += (i ? "," : "") + t.columns[i];
        s += '\n';
        for (const auto& row : t.rows) {
            for (std::size_t i = 0; i < row.size(); ++i) s += (i ? "," : "") + detail::csv_cell(row[i]);
            s += '\n';
        }
        return s;
    }
    json rows = json::array();
    for (const auto& row : t.rows) {
        json r = json::object();
        for (std::size_t i = 0; i < row.size(); ++i) r[t.columns[i]] = detail::json_cell(row[i]);
        rows.push_back(std::move(r));
    }
    json env = {{"config", config_to_json(cfg)}, {"rows", std::move(rows)}, {"version", kVersion}};
    return env.dump(2) + "\n";
}

inline void write_table(const Table& t, const ProtocolConfig& cfg) {
    std::ofstream out(cfg.out, std::ios::binary);
    if (!out) throw ConfigError("cannot open output file " + cfg.out);
    out << render_table(t, cfg);
    if (!out) throw ConfigError("failed writing " + cfg.out);
}

inline MeasureToggles toggles_of(const ProtocolConfig& c) {
    return {c.measure_log_negativity, c.measure_entropy, c.measure_purity, c.measure_squeezing};
}

inline IterateOptions iterate_options_of(const ProtocolConfig& c) {
    IterateOptions o;
    o.p_min = c.p_min;
    o.fast = c.fast;
    o.lossy.loss_photon_limit = c.loss_photon_limit;
    return o;
}

/// Limit predicted for the ideal map from rho^(1) = E(rho0 (x) rho0)/p.
inline LimitPrediction predicted_limit_of(const FockOperator& rho0, bool fast = false) {
    const FockOperator raw = fast ? ideal_step_fast(rho0) : ideal_step(rho0);
    const double p = trace(raw).real();
    if (!(p > kMinSuccessProbability)) return LimitPrediction{};
    FockOperator rho1 = normalized(raw);
    rho1.mark_hermitian(0.0);
    return predict_limit(rho1);
}

inline double limit_log_negativity(const LimitPrediction& lp) {
    return lp.verdict == LimitVerdict::Convergent ? gaussian_log_negativity(lp.covariance())
                                                  : std::numeric_limits<double>::quiet_NaN();
}

inline double formal_limit_log_negativity(const LimitPrediction& lp) {
    return lp.gamma ? gaussian_log_negativity(lp.covariance(), false) : std::numeric_limits<double>::quiet_NaN();
}

namespace detail {

inline void require_output(const ProtocolConfig& c) {
    if (c.out.empty()) throw ConfigError("no output path (--out)");
}

template <class Body>
int guarded(std::ostream& log, Body&& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DomainError& e) {
        log << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ShapeError& e) {
        log << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const Error& e) {
        log << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    }
}

} // namespace detail

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

inline Table run_table_header() {
    Table t;
    t.columns = {"step", "success_prob", "cumulative_prob", "E_N[bits]", "S_vN[bits]", "purity", "E_S[nats]",
                 "E_S[dB]", "E_TS[nats]", "boundary_weight", "truncation_tail"};
    for (const char* n : SeedCoefficients::names()) {
        t.columns.push_back(std::string(n) + "_re");
        t.columns.push_back(std::string(n) + "_im");
    }
    t.columns.push_back("limit_E_N[bits]");
    return t;
}

inline int cmd_run(const ProtocolConfig& cfg, std::ostream& log) {
    return detail::guarded(log, [&] {
        validate(cfg);
        detail::require_output(cfg);
        const FockOperator rho0 = initial_state(cfg);
        IterationResult res = iterate(rho0, cfg.steps, cfg.eta, iterate_options_of(cfg));
        attach_measures(res, toggles_of(cfg));

        double limit_en = std::numeric_limits<double>::quiet_NaN();
        bool unphysical = false;
        if (cfg.eta == 1.0) {
            const LimitPrediction lp = predicted_limit_of(rho0, cfg.fast);
            unphysical = lp.verdict == LimitVerdict::Unphysical;
            limit_en = limit_log_negativity(lp);
            if (unphysical) log << "predicted limit violates the uncertainty relation: no physical Gaussian limit\n";
        }

        Table t = run_table_header();
        const double nan = std::numeric_limits<double>::quiet_NaN();
        for (const IterationRecord& r : res.records) {
            std::vector<Cell> row{static_cast<long long>(r.step), r.success_probability, r.cumulative_probability,
                                  r.measures.log_negativity, r.measures.entropy, r.measures.purity,
                                  r.measures.squeezing_es, squeezing_db(r.measures.squeezing_es),
                                  r.measures.squeezing_ets, r.boundary_weight, r.truncation_tail};
            for (std::size_t i = 0; i < 6; ++i) {
                const Complex s = r.seeds ? r.seeds->as_array()[i] : Complex{nan, nan};
                row.emplace_back(s.real());
                row.emplace_back(s.imag());
            }
            row.emplace_back(limit_en);
            t.rows.push_back(std::move(row));
        }
        write_table(t, cfg);
        if (res.status == IterationStatus::VanishingSuccessProbability) {
            log << "aborted: success probability below p_min after step " << res.records.back().step << '\n';
            return static_cast<int>(kExitNumerical);
        }
        return static_cast<int>(unphysical ? kExitUnphysical : kExitOk);
    });
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

inline std::vector<double> sweep_values(const ProtocolConfig& c) {
    static const std::vector<std::string> axes{"epsilon", "eta", "lambda", "theta"};
    if (std::find(axes.begin(), axes.end(), c.sweep_axis) == axes.end())
        throw ConfigError("sweep_axis must be one of epsilon, eta, lambda, theta");
    if (c.sweep_count < 1 || !(c.sweep_min <= c.sweep_max) || (c.sweep_count > 1 && c.sweep_min == c.sweep_max))
        throw ConfigError("empty sweep range");
    std::vector<double> v(static_cast<std::size_t>(c.sweep_count));
    for (int i = 0; i < c.sweep_count; ++i)
        v[static_cast<std::size_t>(i)] =
            c.sweep_count == 1 ? c.sweep_min : c.sweep_min + (c.sweep_max - c.sweep_min) * i / (c.sweep_count - 1);
    return v;
}

inline ProtocolConfig sweep_point(const ProtocolConfig& c, double value) {
    ProtocolConfig p = c;
    apply_setting(p, c.sweep_axis, format_double(value));
    return p;
}

inline int cmd_sweep(const ProtocolConfig& cfg, std::ostream& log) {
    return detail::guarded(log, [&] {
        validate(cfg);
        detail::require_output(cfg);
        const std::vector<double> values = sweep_values(cfg);
        // every point must be a valid config before anything is computed
        for (double v : values) {
            const ProtocolConfig p = sweep_point(cfg, v);
            validate(p);
            (void)initial_state(p);
        }

        struct PointResult {
            std::vector<std::vector<Cell>> rows;
            bool aborted = false;
            bool unphysical = false;
            std::string error;
        };
        std::vector<PointResult> results(values.size());
        detail::parallel_for(values.size(), [&](std::size_t i) {
            PointResult& out = results[i];
            const ProtocolConfig p = sweep_point(cfg, values[i]);
            try {
                const FockOperator rho0 = initial_state(p);
                const IterationResult res = iterate(rho0, p.steps, p.eta, iterate_options_of(p));
                const LimitPrediction lp = predicted_limit_of(rho0, p.fast);
                const double en_limit = p.eta == 1.0 ? limit_log_negativity(lp) : std::numeric_limits<double>::quiet_NaN();
                const double en_formal = p.eta == 1.0 ? formal_limit_log_negativity(lp) : std::numeric_limits<double>::quiet_NaN();
                out.unphysical = p.eta == 1.0 && lp.verdict == LimitVerdict::Unphysical;
                out.aborted = res.status == IterationStatus::VanishingSuccessProbability;
                const double en0 = log_negativity(res.states.front());
                for (std::size_t k = 0; k < res.records.size(); ++k) {
                    const IterationRecord& r = res.records[k];
                    out.rows.push_back({values[i], static_cast<long long>(r.step), r.success_probability,
                                        r.cumulative_probability, en0, log_negativity(res.states[k]), en_limit, en_formal,
                                        std::string(p.eta == 1.0 ? to_string(lp.verdict) : "n/a")});
                }
            } catch (const Error& e) {
                out.aborted = true;
                out.error = e.what();
            }
        });

        Table t;
        t.columns = {cfg.sweep_axis,  "step",          "success_prob",           "cumulative_prob", "E_N_initial[bits]",
                     "E_N[bits]",     "E_N_limit[bits]", "E_N_limit_formal[bits]", "limit_verdict"};
        bool aborted = false, unphysical = false;
        for (std::size_t i = 0; i < results.size(); ++i) {
            for (auto& row : results[i].rows) t.rows.push_back(std::move(row));
            if (!results[i].error.empty()) log << cfg.sweep_axis << "=" << values[i] << ": " << results[i].error << '\n';
            aborted = aborted || results[i].aborted;
            unphysical = unphysical || results[i].unphysical;
        }
        write_table(t, cfg);
        if (aborted) return static_cast<int>(kExitNumerical);
        if (unphysical) {
            log << "some sweep points have no physical Gaussian limit\n";
            return static_cast<int>(kExitUnphysical);
        }
        return static_cast<int>(kExitOk);
    });
}

// ---------------------------------------------------------------------------
// wigner
// ---------------------------------------------------------------------------

inline int cmd_wigner(const ProtocolConfig& cfg, std::ostream& log) {
    return detail::guarded(log, [&] {
        validate(cfg);
        detail::require_output(cfg);
        const FockOperator rho0 = initial_state(cfg);
        const int max_step = *std::max_element(cfg.wigner_steps.begin(), cfg.wigner_steps.end());
        const IterationResult res = iterate(rho0, max_step, cfg.eta, iterate_options_of(cfg));

        Table t;
        json grids = json::array();
        if (cfg.format == OutputFormat::Csv) t.columns = {"step", "q", "p", "W"};
        else t.columns = {"step", "normalization", "min_W", "negative_region", "excess_kurtosis", "non_gaussian_kurtosis",
                          "gaussian_fit_residual", "q_min", "q_max", "p_min", "p_max", "q_samples", "p_samples", "W"};
        for (int step : cfg.wigner_steps) {
            if (static_cast<std::size_t>(step) >= res.states.size()) {
                log << "aborted: step " << step << " not reached\n";
                return static_cast<int>(kExitNumerical);
            }
            FockOperator reduced = partial_trace(res.states[static_cast<std::size_t>(step)], cfg.wigner_mode);
            reduced.mark_hermitian(1e-12);
            const WignerGrid grid = wigner_single_mode(reduced, cfg.wigner_grid);
            const WignerIndicators ind = wigner_indicators(reduced, grid);
            log << "step " << step << ": normalization " << format_double(ind.normalization) << ", min "
                << format_double(ind.min_value) << ", negative region " << (ind.has_negative_region ? "yes" : "no")
                << ", excess kurtosis " << format_double(ind.excess_kurtosis) << " ("
                << (ind.non_gaussian_kurtosis ? "non-Gaussian" : "Gaussian") << "), fit residual "
                << format_double(ind.gaussian_fit_residual) << '\n';
            const auto& s = grid.spec;
            if (cfg.format == OutputFormat::Csv) {
                for (int i = 0; i < s.q_samples; ++i)
                    for (int j = 0; j < s.p_samples; ++j)
                        t.rows.push_back({static_cast<long long>(step), s.q(i), s.p(j), grid.at(i, j)});
            } else {
                t.rows.push_back({static_cast<long long>(step), ind.normalization, ind.min_value,
                                  std::string(ind.has_negative_region ? "true" : "false"), ind.excess_kurtosis,
                                  std::string(ind.non_gaussian_kurtosis ? "true" : "false"), ind.gaussian_fit_residual,
                                  s.q_min, s.q_max, s.p_min, s.p_max, static_cast<long long>(s.q_samples),
                                  static_cast<long long>(s.p_samples), std::string()});
                grids.push_back(grid.values);
            }
        }
        if (cfg.format == OutputFormat::Csv) {
            write_table(t, cfg);
        } else {
            // rows carry the metadata; the sample arrays are attached per row
            json env = json::parse(render_table(t, cfg));
            for (std::size_t i = 0; i < grids.size(); ++i) env["rows"][i]["W"] = grids[i];
            std::ofstream out(cfg.out, std::ios::binary);
            if (!out) throw ConfigError("cannot open output file " + cfg.out);
            out << env.dump(2) << '\n';
        }
        return static_cast<int>(kExitOk);
    });
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

inline int cmd_predict(const ProtocolConfig& cfg, std::ostream& log) {
    return detail::guarded(log, [&] {
        validate(cfg);
        detail::require_output(cfg);
        const FockOperator rho0 = initial_state(cfg);
        const LimitPrediction lp = predicted_limit_of(rho0, cfg.fast);
        const PureConvergenceReport pc = pure_convergence_check(rho0);
        const double nan = std::numeric_limits<double>::quiet_NaN();

        Table t;
        t.columns = {"quantity", "value"};
        auto add = [&](const std::string& k, Cell v) { t.rows.push_back({k, std::move(v)}); };
        add("verdict", std::string(to_string(lp.verdict)));
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) add("B_" + std::to_string(i + 1) + std::to_string(j + 1), lp.b(i, j));
        add("det_B", lp.determinant);
        add("condition_number_B", lp.condition_number);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                add("gamma_" + std::to_string(i + 1) + std::to_string(j + 1), lp.gamma ? (*lp.gamma)(i, j) : nan);
        Eigen::VectorXd nu = Eigen::VectorXd::Constant(2, nan);
        if (lp.gamma) nu = symplectic_eigenvalues(Eigen::MatrixXd(*lp.gamma));
        add("nu_1", nu(0));
        add("nu_2", nu(1));
        add("heisenberg_min_eig", lp.heisenberg_min_eigenvalue);
        add("limit_E_N[bits]", limit_log_negativity(lp));
        add("limit_EN_formal[bits]", formal_limit_log_negativity(lp));
        add("limit_E_S[nats]", lp.verdict == LimitVerdict::Convergent ? squeezing_ES(lp.covariance()) : nan);
        add("pure_convergent", std::string(pc.pure_convergent ? "true" : "false"));
        add("vacuum_positive", std::string(pc.vacuum_positive ? "true" : "false"));
        add("residual_10_10", pc.residuals[0]);
        add("residual_01_01", pc.residuals[1]);
        add("residual_10_01", pc.residuals[2]);
        add("spectral_norm", pc.spectral_norm);
        write_table(t, cfg);

        switch (lp.verdict) {
            case LimitVerdict::Convergent: return static_cast<int>(kExitOk);
            case LimitVerdict::Singular:
                log << "B is singular: the iteration does not converge to a Gaussian state\n";
                return static_cast<int>(kExitOk);
            case LimitVerdict::Unphysical:
                log << "predicted limit violates the uncertainty relation: no physical Gaussian limit\n";
                return static_cast<int>(kExitUnphysical);
        }
        return static_cast<int>(kExitOk);
    });
}

/// Dispatch by command name; unknown commands are configuration errors.
inline int run_command(const std::string& name, const ProtocolConfig& cfg, std::ostream& log) {
    if (name == "run") return cmd_run(cfg, log);
    if (name == "sweep") return cmd_sweep(cfg, log);
    if (name == "wigner") return cmd_wigner(cfg, log);
    if (name == "predict") return cmd_predict(cfg, log);
    log << "config error: unknown command '" << name << "'\n";
    return kExitConfig;
}

} // namespace gaussify
