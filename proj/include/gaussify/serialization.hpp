#pragma once

// State files, covariance matrices and CSV number formatting.
//
// State file: {"modes": n, "cutoff": c, "coeffs": [[re, im], ...]} with the
// coefficients in FockOperator storage order. Doubles are written with 17
// significant digits, which round-trips exactly.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include <json.hpp>

#include "gaussify/error.hpp"
#include "gaussify/fock_operator.hpp"
#include "gaussify/gaussian_cv.hpp"

namespace gaussify {

using json = nlohmann::json;

/// %.17g, with nan/inf spelled the same on every platform and -0 printed as 0.
inline std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (x == 0.0) return "0";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline json to_json(const FockOperator& op) {
    json coeffs = json::array();
    for (const Complex& c : op.coefficients()) coeffs.push_back({c.real(), c.imag()});
    return {{"modes", op.modes()}, {"cutoff", op.cutoff()}, {"coeffs", std::move(coeffs)}};
}

/// Parses a state document; the hermitian mark is set when the coefficients
/// are exactly hermitian.
inline FockOperator fock_operator_from_json(const json& j) {
    try {
        const int modes = j.at("modes").get<int>();
        const int cutoff = j.at("cutoff").get<int>();
        const auto& arr = j.at("coeffs");
        std::vector<Complex> coeffs;
        coeffs.reserve(arr.size());
        for (const auto& pair : arr) {
            if (!pair.is_array() || pair.size() != 2) throw DomainError("state file: coefficient must be [re, im]");
            coeffs.emplace_back(pair[0].get<double>(), pair[1].get<double>());
        }
        FockOperator op(modes, cutoff, std::move(coeffs));
        if (op.hermiticity_defect() == 0.0) op.mark_hermitian(0.0);
        return op;
    } catch (const json::exception& e) {
        throw DomainError(std::string("state file: ") + e.what());
    }
}

inline void write_state_file(const std::string& path, const FockOperator& op) {
    std::ofstream out(path);
    if (!out) throw DomainError("cannot open " + path + " for writing");
    // dump() prints doubles with the shortest exact representation
    out << to_json(op).dump() << '\n';
}

inline FockOperator read_state_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open state file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DomainError("state file " + path + ": " + e.what());
    }
    return fock_operator_from_json(j);
}

inline json to_json(const CovMat& g) {
    json m = json::array();
    for (int i = 0; i < g.dim(); ++i)
        for (int k = 0; k < g.dim(); ++k) m.push_back(g(i, k));
    json mean = json::array();
    for (int i = 0; i < g.dim(); ++i) mean.push_back(g.mean()(i));
    return {{"dim", g.dim()}, {"matrix", std::move(m)}, {"mean", std::move(mean)}};
}

inline CovMat covmat_from_json(const json& j) {
    try {
        const int dim = j.at("dim").get<int>();
        const auto& arr = j.at("matrix");
        if (dim <= 0 || arr.size() != static_cast<std::size_t>(dim * dim)) throw DomainError("CovMat: matrix size mismatch");
        Eigen::MatrixXd g(dim, dim);
        for (int i = 0; i < dim; ++i)
            for (int k = 0; k < dim; ++k) g(i, k) = arr[static_cast<std::size_t>(i * dim + k)].get<double>();
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
        if (j.contains("mean"))
            for (int i = 0; i < dim; ++i) mean(i) = j["mean"][static_cast<std::size_t>(i)].get<double>();
        return CovMat(g, mean);
    } catch (const json::exception& e) {
        throw DomainError(std::string("CovMat: ") + e.what());
    }
}

inline json to_json(const SeedCoefficients& s) {
    json j;
    const auto vals = s.as_array();
    const auto names = SeedCoefficients::names();
    for (std::size_t i = 0; i < vals.size(); ++i) j[names[i]] = {vals[i].real(), vals[i].imag()};
    return j;
}

} // namespace gaussify
