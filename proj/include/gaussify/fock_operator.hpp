#pragma once

// Truncated Fock-space operators on one to four bosonic modes.
//
// Coefficients are stored densely, row-major over (ket multi-index, bra
// multi-index), with mode 0 the most significant digit of each multi-index.
// For two modes the coefficient rho_{s,t;n,m} multiplies |s,t><n,m| and lives
// at offset ((s*d + t)*d + n)*d + m, d = cutoff + 1.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gaussify/error.hpp"

namespace gaussify {

using Complex = std::complex<double>;
using RowMatrixXcd = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr int kMaxModes = 4;
inline constexpr double kPositivityTol = 1e-10;
inline constexpr double kSpectralTol = 1e-10;
inline constexpr double kBoundaryWarnLevel = 1e-6;

/// Per-mode photon numbers of a ket or bra; entries past modes() are ignored.
using ModeIndex = std::array<int, kMaxModes>;

class FockOperator {
public:
    FockOperator(int modes, int cutoff) : modes_(modes), cutoff_(cutoff) {
        if (modes < 1 || modes > kMaxModes)
            throw ShapeError("FockOperator: modes must be in [1, 4], got " + std::to_string(modes));
        if (cutoff < 0) throw DomainError("FockOperator: cutoff must be non-negative");
        dim_ = 1;
        for (int i = 0; i < modes; ++i) dim_ *= local_dim();
        coeffs_.assign(dim_ * dim_, Complex{0.0, 0.0});
    }

    FockOperator(int modes, int cutoff, std::vector<Complex> coeffs) : FockOperator(modes, cutoff) {
        if (coeffs.size() != coeffs_.size())
            throw ShapeError("FockOperator: expected " + std::to_string(coeffs_.size()) +
                             " coefficients, got " + std::to_string(coeffs.size()));
        coeffs_ = std::move(coeffs);
    }

    static FockOperator from_matrix(int modes, int cutoff, const RowMatrixXcd& m) {
        FockOperator op(modes, cutoff);
        if (static_cast<std::size_t>(m.rows()) != op.dim_ || static_cast<std::size_t>(m.cols()) != op.dim_)
            throw ShapeError("FockOperator::from_matrix: dimension mismatch");
        std::copy(m.data(), m.data() + m.size(), op.coeffs_.begin());
        return op;
    }

    int modes() const noexcept { return modes_; }
    int cutoff() const noexcept { return cutoff_; }
    std::size_t local_dim() const noexcept { return static_cast<std::size_t>(cutoff_) + 1; }
    /// Dimension of the truncated Hilbert space.
    std::size_t dim() const noexcept { return dim_; }

    std::span<const Complex> coefficients() const noexcept { return coeffs_; }
    /// Mutable access drops the hermitian mark.
    std::span<Complex> mutable_coefficients() noexcept {
        hermitian_ = false;
        return coeffs_;
    }

    std::size_t flat(const ModeIndex& idx) const noexcept {
        std::size_t f = 0;
        for (int i = 0; i < modes_; ++i) f = f * local_dim() + static_cast<std::size_t>(idx[i]);
        return f;
    }

    ModeIndex unflat(std::size_t f) const noexcept {
        ModeIndex idx{};
        for (int i = modes_ - 1; i >= 0; --i) {
            idx[i] = static_cast<int>(f % local_dim());
            f /= local_dim();
        }
        return idx;
    }

    Complex element(std::size_t ket, std::size_t bra) const noexcept { return coeffs_[ket * dim_ + bra]; }
    Complex& element(std::size_t ket, std::size_t bra) noexcept {
        hermitian_ = false;
        return coeffs_[ket * dim_ + bra];
    }

    Complex get(const ModeIndex& ket, const ModeIndex& bra) const {
        check_index(ket);
        check_index(bra);
        return element(flat(ket), flat(bra));
    }
    void set(const ModeIndex& ket, const ModeIndex& bra, Complex value) {
        check_index(ket);
        check_index(bra);
        element(flat(ket), flat(bra)) = value;
    }

    /// rho_{s,t;n,m} of a two-mode operator.
    Complex operator()(int s, int t, int n, int m) const {
        require_modes(2, "operator()(s,t,n,m)");
        return get({s, t, 0, 0}, {n, m, 0, 0});
    }
    /// rho_{m;n} of a one-mode operator.
    Complex operator()(int m, int n) const {
        require_modes(1, "operator()(m,n)");
        return get({m, 0, 0, 0}, {n, 0, 0, 0});
    }

    Eigen::Map<const RowMatrixXcd> matrix() const {
        return {coeffs_.data(), static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(dim_)};
    }

    bool hermitian() const noexcept { return hermitian_; }

    /// Largest |c(k;b) - conj(c(b;k))|.
    double hermiticity_defect() const noexcept {
        double worst = 0.0;
        for (std::size_t k = 0; k < dim_; ++k)
            for (std::size_t b = k; b < dim_; ++b)
                worst = std::max(worst, std::abs(coeffs_[k * dim_ + b] - std::conj(coeffs_[b * dim_ + k])));
        return worst;
    }

    /// Verifies hermiticity within tol, then makes it exact (upper triangle
    /// wins, diagonal made real) and sets the mark.
    FockOperator& mark_hermitian(double tol = 1e-12) {
        const double defect = hermiticity_defect();
        if (defect > tol)
            throw NotHermitianError("mark_hermitian: defect " + std::to_string(defect) + " exceeds tolerance");
        for (std::size_t k = 0; k < dim_; ++k) {
            coeffs_[k * dim_ + k] = Complex{coeffs_[k * dim_ + k].real(), 0.0};
            for (std::size_t b = k + 1; b < dim_; ++b) coeffs_[b * dim_ + k] = std::conj(coeffs_[k * dim_ + b]);
        }
        hermitian_ = true;
        return *this;
    }

    bool same_shape(const FockOperator& other) const noexcept {
        return modes_ == other.modes_ && cutoff_ == other.cutoff_;
    }

    FockOperator& operator+=(const FockOperator& rhs) {
        require_same_shape(rhs, "operator+=");
        for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += rhs.coeffs_[i];
        hermitian_ = hermitian_ && rhs.hermitian_;
        return *this;
    }
    FockOperator& operator-=(const FockOperator& rhs) {
        require_same_shape(rhs, "operator-=");
        for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] -= rhs.coeffs_[i];
        hermitian_ = hermitian_ && rhs.hermitian_;
        return *this;
    }
    FockOperator& operator*=(double s) {
        for (auto& c : coeffs_) c *= s;
        return *this;
    }

    friend FockOperator operator+(FockOperator a, const FockOperator& b) { return a += b; }
    friend FockOperator operator-(FockOperator a, const FockOperator& b) { return a -= b; }
    friend FockOperator operator*(FockOperator a, double s) { return a *= s; }
    friend FockOperator operator*(double s, FockOperator a) { return a *= s; }

    /// Bit-level equality of shape and coefficients.
    friend bool operator==(const FockOperator& a, const FockOperator& b) {
        return a.same_shape(b) && a.coeffs_ == b.coeffs_;
    }

    void require_modes(int n, const char* where) const {
        if (modes_ != n)
            throw ShapeError(std::string(where) + ": expected a " + std::to_string(n) + "-mode operator, got " +
                             std::to_string(modes_));
    }
    void require_same_shape(const FockOperator& other, const char* where) const {
        if (!same_shape(other)) throw ShapeError(std::string(where) + ": operator shapes differ");
    }

private:
    void check_index(const ModeIndex& idx) const {
        for (int i = 0; i < modes_; ++i)
            if (idx[i] < 0 || idx[i] > cutoff_) throw DomainError("FockOperator: photon number outside [0, cutoff]");
    }

    int modes_;
    int cutoff_;
    std::size_t dim_ = 1;
    std::vector<Complex> coeffs_;
    bool hermitian_ = false;
};

struct SpectralDecomposition {
    Eigen::VectorXd eigenvalues;  // descending
    Eigen::MatrixXcd eigenvectors; // columns, matching eigenvalues
};

inline Complex trace(const FockOperator& op) {
    Complex t{0.0, 0.0};
    for (std::size_t k = 0; k < op.dim(); ++k) t += op.element(k, k);
    return t;
}

/// Transpose on the second mode: out_{s,t;n,m} = in_{s,m;n,t}.
inline FockOperator partial_transpose(const FockOperator& op) {
    op.require_modes(2, "partial_transpose");
    const int d = op.cutoff() + 1;
    std::vector<Complex> out(op.coefficients().size());
    const auto in = op.coefficients();
    for (int s = 0; s < d; ++s)
        for (int t = 0; t < d; ++t)
            for (int n = 0; n < d; ++n)
                for (int m = 0; m < d; ++m)
                    out[((s * d + t) * d + n) * d + m] = in[((s * d + m) * d + n) * d + t];
    FockOperator result(2, op.cutoff(), std::move(out));
    if (op.hermitian()) result.mark_hermitian(0.0);
    return result;
}

/// Traces out `mode`, returning an operator on the remaining modes (order kept).
inline FockOperator trace_out(const FockOperator& op, int mode) {
    if (op.modes() < 2) throw ShapeError("trace_out: need at least two modes");
    if (mode < 0 || mode >= op.modes()) throw DomainError("trace_out: invalid mode id " + std::to_string(mode));
    FockOperator out(op.modes() - 1, op.cutoff());
    std::vector<Complex> acc(out.coefficients().size(), Complex{0.0, 0.0});
    auto drop = [&](const ModeIndex& idx) {
        ModeIndex r{};
        for (int i = 0, j = 0; i < op.modes(); ++i)
            if (i != mode) r[j++] = idx[i];
        return r;
    };
    for (std::size_t kf = 0; kf < op.dim(); ++kf) {
        const ModeIndex ket = op.unflat(kf);
        const std::size_t ok = out.flat(drop(ket));
        // the bra agrees with the ket on the traced mode
        for (std::size_t rb = 0; rb < out.dim(); ++rb) {
            const ModeIndex rbra = out.unflat(rb);
            ModeIndex bra{};
            for (int i = 0, q = 0; i < op.modes(); ++i) bra[i] = (i == mode) ? ket[mode] : rbra[q++];
            acc[ok * out.dim() + rb] += op.element(kf, op.flat(bra));
        }
    }
    FockOperator result(op.modes() - 1, op.cutoff(), std::move(acc));
    if (op.hermitian()) result.mark_hermitian(1e-12);
    return result;
}

/// Reduced state of mode `keep` (0 or 1) of a two-mode operator.
inline FockOperator partial_trace(const FockOperator& op, int keep) {
    op.require_modes(2, "partial_trace");
    if (keep != 0 && keep != 1) throw DomainError("partial_trace: keep must be 0 or 1");
    return trace_out(op, 1 - keep);
}

/// a (x) b on modes [a's modes..., b's modes...]; cutoffs must agree.
inline FockOperator tensor_product(const FockOperator& a, const FockOperator& b) {
    if (a.cutoff() != b.cutoff()) throw ShapeError("tensor_product: cutoffs differ");
    if (a.modes() + b.modes() > kMaxModes) throw ShapeError("tensor_product: more than four modes");
    FockOperator out(a.modes() + b.modes(), a.cutoff());
    auto coeffs = out.mutable_coefficients();
    const std::size_t db = b.dim();
    const std::size_t dout = out.dim();
    for (std::size_t ka = 0; ka < a.dim(); ++ka)
        for (std::size_t ba = 0; ba < a.dim(); ++ba) {
            const Complex ca = a.element(ka, ba);
            if (ca == Complex{0.0, 0.0}) continue;
            for (std::size_t kb = 0; kb < db; ++kb)
                for (std::size_t bb = 0; bb < db; ++bb)
                    coeffs[(ka * db + kb) * dout + (ba * db + bb)] = ca * b.element(kb, bb);
        }
    if (a.hermitian() && b.hermitian()) out.mark_hermitian(1e-12);
    return out;
}

inline SpectralDecomposition eig_hermitian(const FockOperator& op) {
    if (!op.hermitian()) throw NotHermitianError("eig_hermitian: operator is not marked hermitian");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(Eigen::MatrixXcd(op.matrix()));
    if (solver.info() != Eigen::Success) throw NumericalError("eig_hermitian: eigensolver failed");
    SpectralDecomposition out;
    out.eigenvalues = solver.eigenvalues().reverse();
    out.eigenvectors = solver.eigenvectors().rowwise().reverse();
    return out;
}

inline Eigen::VectorXd eigenvalues_hermitian(const FockOperator& op) {
    if (!op.hermitian()) throw NotHermitianError("eigenvalues_hermitian: operator is not marked hermitian");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(Eigen::MatrixXcd(op.matrix()), Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw NumericalError("eigenvalues_hermitian: eigensolver failed");
    return solver.eigenvalues().reverse();
}

/// Max-norm distance between V diag(w) V^dagger and the operator.
inline double reconstruction_error(const SpectralDecomposition& sd, const FockOperator& op) {
    const Eigen::MatrixXcd rebuilt =
        sd.eigenvectors * sd.eigenvalues.cast<Complex>().asDiagonal() * sd.eigenvectors.adjoint();
    return (rebuilt - Eigen::MatrixXcd(op.matrix())).cwiseAbs().maxCoeff();
}

inline double trace_norm(const FockOperator& op) { return eigenvalues_hermitian(op).cwiseAbs().sum(); }

inline double min_eigenvalue(const FockOperator& op) { return eigenvalues_hermitian(op).minCoeff(); }

/// Diagonal weight on kets with any photon number equal to the cutoff.
inline double boundary_shell_weight(const FockOperator& op) {
    double w = 0.0;
    for (std::size_t k = 0; k < op.dim(); ++k) {
        const ModeIndex idx = op.unflat(k);
        bool edge = false;
        for (int i = 0; i < op.modes(); ++i) edge = edge || idx[i] == op.cutoff();
        if (edge) w += op.element(k, k).real();
    }
    return w;
}

inline double max_abs_difference(const FockOperator& a, const FockOperator& b) {
    a.require_same_shape(b, "max_abs_difference");
    double worst = 0.0;
    for (std::size_t i = 0; i < a.coefficients().size(); ++i)
        worst = std::max(worst, std::abs(a.coefficients()[i] - b.coefficients()[i]));
    return worst;
}

/// Largest photon number carrying a nonzero coefficient, per mode.
inline ModeIndex support_extent(const FockOperator& op) {
    ModeIndex ext{};
    for (std::size_t k = 0; k < op.dim(); ++k)
        for (std::size_t b = 0; b < op.dim(); ++b) {
            if (op.element(k, b) == Complex{0.0, 0.0}) continue;
            const ModeIndex ik = op.unflat(k);
            const ModeIndex ib = op.unflat(b);
            for (int i = 0; i < op.modes(); ++i) ext[i] = std::max({ext[i], ik[i], ib[i]});
        }
    return ext;
}

/// Copy of the operator scaled to unit trace.
inline FockOperator normalized(const FockOperator& op) {
    const double t = trace(op).real();
    if (!(t > 0.0)) throw NumericalError("normalized: non-positive trace");
    FockOperator out = op;
    out *= 1.0 / t;
    return out;
}

/// Same operator re-embedded at a different cutoff; dropped entries are lost.
inline FockOperator with_cutoff(const FockOperator& op, int cutoff) {
    FockOperator out(op.modes(), cutoff);
    const int lim = std::min(op.cutoff(), cutoff);
    auto coeffs = out.mutable_coefficients();
    for (std::size_t k = 0; k < op.dim(); ++k) {
        const ModeIndex ik = op.unflat(k);
        if (*std::max_element(ik.begin(), ik.begin() + op.modes()) > lim) continue;
        const std::size_t ok = out.flat(ik);
        for (std::size_t b = 0; b < op.dim(); ++b) {
            const ModeIndex ib = op.unflat(b);
            if (*std::max_element(ib.begin(), ib.begin() + op.modes()) > lim) continue;
            coeffs[ok * out.dim() + out.flat(ib)] = op.element(k, b);
        }
    }
    if (op.hermitian()) out.mark_hermitian(0.0);
    return out;
}

} // namespace gaussify
