#pragma once
#include <cmath>
#include <cstddef>

#include <cggm/errors.hpp>
#include <cggm/types.hpp>

namespace cggm {

/// tr((Theta^{-1} Theta_hat - I)^2)
inline double quadratic_loss(const Matrix& theta_true, const Matrix& theta_hat)
{
    if (theta_true.rows() != theta_hat.rows() || theta_true.cols() != theta_hat.cols())
        throw InputError("quadratic_loss: shape mismatch");
    Eigen::LLT<Matrix> llt(theta_true);
    if (llt.info() != Eigen::Success)
        throw DomainError("quadratic_loss: true precision matrix is not positive definite");
    Matrix m = llt.solve(theta_hat);
    m.diagonal().array() -= 1.0;
    return (m * m).trace();
}

struct DeltaNorms {
    double elem_inf = 0.0;  ///< max |d_ij|
    double mat_inf = 0.0;   ///< max row sum of |d_ij|
    double spectral = 0.0;  ///< largest singular value
    double frobenius = 0.0;
};

inline DeltaNorms delta_norms(const Matrix& theta_true, const Matrix& theta_hat)
{
    if (theta_true.rows() != theta_hat.rows() || theta_true.cols() != theta_hat.cols())
        throw InputError("delta_norms: shape mismatch");
    const Matrix d = theta_true - theta_hat;
    DeltaNorms r;
    if (d.size() == 0)
        return r;
    r.elem_inf = d.cwiseAbs().maxCoeff();
    r.mat_inf = d.cwiseAbs().rowwise().sum().maxCoeff();
    r.spectral = Eigen::JacobiSVD<Matrix>(d).singularValues()(0);
    r.frobenius = d.norm();
    return r;
}

struct SupportMetrics {
    std::size_t dist = 0;
    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
    double spe = 0.0;
    double sen = 0.0;
    double mcc = 0.0;
    /// A SPE, SEN or MCC denominator was zero and the score was reported as 0.
    bool degenerate = false;
};

/// DIST counts mismatches over every (i, j) including the diagonal;
/// TP/TN/FP/FN count off-diagonal ordered pairs.
template <class A, class B>
SupportMetrics support_metrics_from(const A& truth_nz, const B& est_nz, Eigen::Index p)
{
    SupportMetrics m;
    for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) {
            const bool t = truth_nz(i, j);
            const bool e = est_nz(i, j);
            if (t != e)
                ++m.dist;
            if (i == j)
                continue;
            if (t && e)
                ++m.tp;
            else if (!t && !e)
                ++m.tn;
            else if (e)
                ++m.fp;
            else
                ++m.fn;
        }
    }
    const auto d = [](std::size_t v) { return static_cast<double>(v); };
    if (m.tn + m.fp > 0)
        m.spe = d(m.tn) / d(m.tn + m.fp);
    else
        m.degenerate = true;
    if (m.tp + m.fn > 0)
        m.sen = d(m.tp) / d(m.tp + m.fn);
    else
        m.degenerate = true;
    const double denom = std::sqrt(d(m.tp + m.fp) * d(m.tp + m.fn) * d(m.tn + m.fp) * d(m.tn + m.fn));
    if (denom > 0.0)
        m.mcc = (d(m.tp) * d(m.tn) - d(m.fp) * d(m.fn)) / denom;
    else
        m.degenerate = true;
    return m;
}

inline SupportMetrics support_metrics(const Matrix& theta_true, const Matrix& theta_hat, double tol = 1e-10)
{
    if (theta_true.rows() != theta_hat.rows() || theta_true.cols() != theta_hat.cols() ||
        theta_true.rows() != theta_true.cols())
        throw InputError("support_metrics: shape mismatch");
    auto t = [&](Eigen::Index i, Eigen::Index j) { return std::abs(theta_true(i, j)) > tol; };
    auto e = [&](Eigen::Index i, Eigen::Index j) { return std::abs(theta_hat(i, j)) > tol; };
    return support_metrics_from(t, e, theta_true.rows());
}

struct GraphReport {
    double loss = 0.0;
    double norm_elem_inf = 0.0;
    double norm_mat_inf = 0.0;
    double norm_spectral = 0.0;
    double norm_frobenius = 0.0;
    std::size_t dist = 0;
    double spe = 0.0;
    double sen = 0.0;
    double mcc = 0.0;
    bool degenerate = false;
};

inline GraphReport evaluate(const Matrix& theta_true, const Matrix& theta_hat, double tol = 1e-10)
{
    GraphReport r;
    r.loss = quadratic_loss(theta_true, theta_hat);
    const DeltaNorms dn = delta_norms(theta_true, theta_hat);
    r.norm_elem_inf = dn.elem_inf;
    r.norm_mat_inf = dn.mat_inf;
    r.norm_spectral = dn.spectral;
    r.norm_frobenius = dn.frobenius;
    const SupportMetrics sm = support_metrics(theta_true, theta_hat, tol);
    r.dist = sm.dist;
    r.spe = sm.spe;
    r.sen = sm.sen;
    r.mcc = sm.mcc;
    r.degenerate = sm.degenerate;
    return r;
}

} // namespace cggm
