#pragma once
#include <cmath>
#include <optional>
#include <sstream>
#include <vector>

#include <cggm/errors.hpp>
#include <cggm/lasso_kernel.hpp>
#include <cggm/model_core.hpp>
#include <cggm/types.hpp>

namespace cggm {

struct GlassoResult {
    Matrix theta;
    Matrix w;
    std::size_t sweeps = 0;
    bool converged = false;
};

struct GlassoOptions {
    /// Stop when the mean absolute change of the off-diagonal of W over a
    /// sweep is at most tol times the mean absolute off-diagonal of S.
    double tol = 1e-4;
    std::size_t max_sweeps = 100;
    /// Tolerance handed to each column's lasso subproblem.
    double lasso_tol = 1e-6;
    std::size_t lasso_max_iter = 1000;
    /// Element-wise penalty weights (p x p); the diagonal scales rho on W's diagonal.
    std::optional<Matrix> theta_weights;
    /// Starting covariance estimate; its diagonal is overwritten with s_ii + rho * w_ii.
    std::optional<Matrix> init_w;
    /// Starting precision estimate, used only to warm start the column lasso problems.
    std::optional<Matrix> init_theta;
    /// When set, receives the penalized objective of Theta after each sweep.
    std::vector<double>* sweep_objectives = nullptr;
};

namespace detail {

inline std::vector<Eigen::Index> all_but(Eigen::Index p, Eigen::Index j)
{
    std::vector<Eigen::Index> idx;
    idx.reserve(static_cast<std::size_t>(p > 0 ? p - 1 : 0));
    for (Eigen::Index k = 0; k < p; ++k)
        if (k != j)
            idx.push_back(k);
    return idx;
}

inline double glasso_objective(const Matrix& s, const Matrix& theta, double rho, const std::optional<Matrix>& wts)
{
    double pen = wts ? wts->cwiseProduct(theta.cwiseAbs()).sum() : theta.cwiseAbs().sum();
    return -log_det_pd(theta) + s.cwiseProduct(theta).sum() + (pen == 0.0 ? 0.0 : rho * pen);
}

inline void check_scatter(const Matrix& s, double rho)
{
    if (s.rows() != s.cols() || s.rows() == 0)
        throw InputError("scatter matrix must be square and nonempty");
    if (!s.allFinite())
        throw InputError("scatter matrix has non-finite entries");
    const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
    if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw InputError("scatter matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(s), Eigen::EigenvaluesOnly);
    if (es.eigenvalues()(0) < -1e-10 * scale)
        throw InputError("scatter matrix is not positive semidefinite");
    if (!(rho >= 0.0))
        throw InputError("rho must be nonnegative");
    if (rho == 0.0 && es.eigenvalues()(0) <= 1e-10 * scale)
        throw InputError("rho = 0 requires a positive definite scatter matrix");
}

} // namespace detail

/// Block-wise coordinate descent for the L1-penalized precision matrix:
/// minimize -log det Theta + tr(S Theta) + rho * sum w_ij |theta_ij|.
/// Each column solves a lasso problem in W11 and fills w12 = W11 beta.
inline GlassoResult glasso(const Matrix& s, double rho, const GlassoOptions& opts = {})
{
    detail::check_scatter(s, rho);
    const Eigen::Index p = s.rows();
    if (opts.theta_weights) {
        const Matrix& wt = *opts.theta_weights;
        if (wt.rows() != p || wt.cols() != p || !wt.allFinite() || (wt.array() < 0.0).any())
            throw InputError("theta weights must be a finite nonnegative p x p matrix");
    }
    auto weight = [&](Eigen::Index i, Eigen::Index j) { return opts.theta_weights ? (*opts.theta_weights)(i, j) : 1.0; };

    Matrix w = opts.init_w ? symmetrize(*opts.init_w) : s;
    if (w.rows() != p || w.cols() != p)
        throw InputError("initial W must be p x p");
    for (Eigen::Index i = 0; i < p; ++i)
        w(i, i) = s(i, i) + rho * weight(i, i);

    GlassoResult res;
    if (p == 1) {
        if (!(w(0, 0) > 0.0))
            throw NumericalError("glasso: nonpositive variance");
        res.w = w;
        res.theta = Matrix::Constant(1, 1, 1.0 / w(0, 0));
        res.converged = true;
        return res;
    }

    // betas.col(j) holds the lasso coefficients of column j (entry j unused).
    Matrix betas = Matrix::Zero(p, p);
    if (opts.init_theta && opts.init_theta->rows() == p && opts.init_theta->cols() == p) {
        const Matrix& t = *opts.init_theta;
        for (Eigen::Index j = 0; j < p; ++j)
            if (t(j, j) > 0.0)
                betas.col(j) = -t.col(j) / t(j, j);
    }
    Matrix theta = Matrix::Zero(p, p);

    double off_scale = 0.0;
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = 0; j < p; ++j)
            if (i != j)
                off_scale += std::abs(s(i, j));
    off_scale /= static_cast<double>(p * (p - 1));
    if (off_scale == 0.0)
        off_scale = s.diagonal().cwiseAbs().mean();
    const double threshold = opts.tol * off_scale;

    LassoOptions lopts;
    lopts.tol = opts.lasso_tol;
    lopts.max_iter = opts.lasso_max_iter;

    auto recover_column = [&](Eigen::Index j, const std::vector<Eigen::Index>& idx, const Vector& beta) {
        const double denom = w(j, j) - w(idx, Eigen::all).col(j).dot(beta);
        if (!(denom > 0.0)) {
            std::ostringstream os;
            os << "glasso: positive definiteness lost at column " << j << " (Schur complement " << denom << ")";
            throw NumericalError(os.str());
        }
        const double t22 = 1.0 / denom;
        theta(j, j) = t22;
        for (std::size_t k = 0; k < idx.size(); ++k)
            theta(idx[k], j) = -beta(static_cast<Eigen::Index>(k)) * t22;
    };

    for (std::size_t sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
        double change = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            const auto idx = detail::all_but(p, j);
            QuadLassoProblem prob;
            prob.q = w(idx, idx);
            prob.linear = s(idx, Eigen::all).col(j);
            prob.penalty = rho;
            if (opts.theta_weights)
                prob.weights = Vector((*opts.theta_weights)(idx, Eigen::all).col(j));
            prob.start = Vector(betas(idx, Eigen::all).col(j));
            Vector beta;
            try {
                beta = solve_quad_lasso(prob, lopts);
            } catch (const LassoConvergenceError& e) {
                beta = e.last_iterate;
            }
            const Vector w12 = prob.q * beta;
            for (std::size_t k = 0; k < idx.size(); ++k) {
                const auto i = idx[k];
                const double v = w12(static_cast<Eigen::Index>(k));
                change += std::abs(v - w(i, j));
                w(i, j) = v;
                w(j, i) = v;
                betas(i, j) = beta(static_cast<Eigen::Index>(k));
            }
            recover_column(j, idx, beta);
        }
        res.sweeps = sweep;
        if (opts.sweep_objectives) {
            const Matrix t = symmetrize(theta);
            opts.sweep_objectives->push_back(is_positive_definite(t)
                                                 ? detail::glasso_objective(s, t, rho, opts.theta_weights)
                                                 : std::numeric_limits<double>::quiet_NaN());
        }
        change /= static_cast<double>(p * (p - 1));
        if (change <= threshold) {
            res.converged = true;
            break;
        }
    }

    // Recompute every column of Theta against the final W.
    for (Eigen::Index j = 0; j < p; ++j) {
        const auto idx = detail::all_but(p, j);
        recover_column(j, idx, Vector(betas(idx, Eigen::all).col(j)));
    }
    res.theta = symmetrize(theta);
    res.w = w;
    return res;
}

} // namespace cggm
