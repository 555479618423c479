#pragma once
#include <cmath>
#include <sstream>
#include <string>

#include <cggm/errors.hpp>
#include <cggm/types.hpp>

namespace cggm {

inline Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

inline bool all_finite(const Matrix& a) { return a.allFinite(); }

/// Cholesky-based positive definiteness test.
inline bool is_positive_definite(const Matrix& a)
{
    if (a.rows() != a.cols() || a.rows() == 0 || !a.allFinite())
        return false;
    Eigen::LLT<Matrix> llt(a);
    return llt.info() == Eigen::Success;
}

/// Symmetric matrix with smallest eigenvalue above rel_tol times the largest.
inline bool is_invertible_spd(const Matrix& a, double rel_tol = 1e-10)
{
    if (a.rows() == 0)
        return true;
    if (!a.allFinite())
        return false;
    Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    return ev(ev.size() - 1) > 0.0 && ev(0) > rel_tol * ev(ev.size() - 1);
}

/// log det of a symmetric positive definite matrix; DomainError otherwise.
inline double log_det_pd(const Matrix& a)
{
    Eigen::LLT<Matrix> llt(a);
    if (a.rows() != a.cols() || llt.info() != Eigen::Success)
        throw DomainError("log det undefined: matrix is not positive definite");
    const Matrix& l = llt.matrixLLT();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < l.rows(); ++i)
        acc += std::log(l(i, i));
    return 2.0 * acc;
}

inline void validate(const Dataset& data)
{
    if (data.y.rows() != data.x.rows()) {
        std::ostringstream os;
        os << "row count mismatch: Y has " << data.y.rows() << " rows, X has " << data.x.rows();
        throw InputError(os.str());
    }
    if (data.y.rows() < 2)
        throw InputError("at least two observations are required");
    if (!data.y.allFinite() || !data.x.allFinite())
        throw InputError("dataset contains non-finite entries");
}

inline SufficientStats sufficient_stats(const Dataset& data, bool center = true)
{
    validate(data);
    const auto n = data.y.rows();
    Matrix y = data.y;
    Matrix x = data.x;
    if (center) {
        y.rowwise() -= y.colwise().mean();
        x.rowwise() -= x.colwise().mean();
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    SufficientStats s;
    s.cy = symmetrize(inv_n * (y.transpose() * y));
    s.cyx = inv_n * (y.transpose() * x);
    s.cx = symmetrize(inv_n * (x.transpose() * x));
    s.n = static_cast<std::size_t>(n);
    return s;
}

/// S_Gamma = C_Y - C_YX Gamma' - Gamma C_YX' + Gamma C_X Gamma'.
inline Matrix residual_scatter(const SufficientStats& stats, const Matrix& gamma)
{
    if (gamma.rows() != stats.p() || gamma.cols() != stats.q())
        throw InputError("gamma must be p x q");
    Matrix cross = stats.cyx * gamma.transpose();
    Matrix s = stats.cy - cross - cross.transpose() + gamma * stats.cx * gamma.transpose();
    return symmetrize(s);
}

inline double neg_log_likelihood(const SufficientStats& stats, const Matrix& theta, const Matrix& gamma)
{
    if (theta.rows() != stats.p() || theta.cols() != stats.p())
        throw InputError("theta must be p x p");
    const double ld = log_det_pd(theta);
    return -ld + residual_scatter(stats, gamma).cwiseProduct(theta).sum();
}

/// lambda * sum w|gamma| + rho * sum w|theta|, diagonal of theta included.
inline double penalty_value(const Matrix& theta, const Matrix& gamma, const PenaltySpec& pen)
{
    double g = pen.gamma_weights ? pen.gamma_weights->cwiseProduct(gamma.cwiseAbs()).sum()
                                 : gamma.cwiseAbs().sum();
    double t = pen.theta_weights ? pen.theta_weights->cwiseProduct(theta.cwiseAbs()).sum()
                                 : theta.cwiseAbs().sum();
    // lambda may be +inf with Gamma = 0; treat 0 * inf as 0.
    double gpart = (g == 0.0) ? 0.0 : pen.lambda * g;
    double tpart = (t == 0.0) ? 0.0 : pen.rho * t;
    return gpart + tpart;
}

inline void validate(const PenaltySpec& pen, Eigen::Index p, Eigen::Index q)
{
    if (!(pen.lambda >= 0.0) || !(pen.rho >= 0.0))
        throw InputError("penalty levels must be nonnegative");
    if (pen.adaptive && !(pen.exponent > 0.0))
        throw InputError("adaptive exponent must be positive");
    if (pen.gamma_weights) {
        const Matrix& w = *pen.gamma_weights;
        if (w.rows() != p || w.cols() != q || !w.allFinite() || (w.array() < 0.0).any())
            throw InputError("gamma weights must be a finite nonnegative p x q matrix");
    }
    if (pen.theta_weights) {
        const Matrix& w = *pen.theta_weights;
        if (w.rows() != p || w.cols() != p || !w.allFinite() || (w.array() < 0.0).any())
            throw InputError("theta weights must be a finite nonnegative p x p matrix");
    }
}

inline double penalized_objective(const SufficientStats& stats, const Matrix& theta, const Matrix& gamma,
                                  const PenaltySpec& pen)
{
    return neg_log_likelihood(stats, theta, gamma) + penalty_value(theta, gamma, pen);
}

struct MleEstimate {
    Matrix theta;
    Matrix gamma;
};

/// Unpenalized global minimizer: Gamma = C_YX C_X^{-1}, Theta = (C_Y - C_YX C_X^{-1} C_YX')^{-1}.
inline MleEstimate mle_fit(const SufficientStats& stats)
{
    Eigen::LLT<Matrix> cx_llt(stats.cx);
    if (stats.q() > 0 && (!is_invertible_spd(stats.cx) || cx_llt.info() != Eigen::Success))
        throw RankError("C_X is singular; the MLE does not exist");
    MleEstimate m;
    if (stats.q() > 0) {
        m.gamma = cx_llt.solve(stats.cyx.transpose()).transpose();
    } else {
        m.gamma = Matrix::Zero(stats.p(), 0);
    }
    Matrix resid = residual_scatter(stats, m.gamma);
    Eigen::LLT<Matrix> r_llt(resid);
    if (!is_invertible_spd(resid) || r_llt.info() != Eigen::Success)
        throw RankError("residual scatter is singular; the MLE does not exist");
    m.theta = symmetrize(r_llt.solve(Matrix::Identity(stats.p(), stats.p())));
    return m;
}

} // namespace cggm
