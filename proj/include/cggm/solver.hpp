#pragma once
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <cggm/errors.hpp>
#include <cggm/glasso.hpp>
#include <cggm/lasso_kernel.hpp>
#include <cggm/model_core.hpp>
#include <cggm/types.hpp>

namespace cggm {

struct SolveOptions {
    /// Outer loop stops when |change in objective| <= tol_outer * max(1, |objective|).
    double tol_outer = 1e-6;
    /// ...and the largest entry change of Theta and Gamma over the iteration is
    /// at most tol_param * max(1, largest entry). The objective alone can stall
    /// while the two blocks still drift against each other.
    double tol_param = 1e-4;
    std::size_t max_outer = 200;
    /// Gamma passes repeat until the largest entry change is at most tol_inner.
    double tol_inner = 1e-6;
    std::size_t max_inner = 100;
    /// Only consulted by callers that build statistics from raw data.
    bool center = true;
    bool trace = true;
    /// Glasso settings for the Theta step. Tighter than the standalone
    /// defaults so that each Theta step is an accurate block minimum.
    double glasso_tol = 1e-8;
    std::size_t glasso_max_sweeps = 500;
    double glasso_lasso_tol = 1e-9;
    /// Run the Gamma step before the Theta step in each outer iteration.
    bool gamma_first = false;
};

/// Optional starting point (e.g. the neighbouring cell of a tuning grid).
struct FitStart {
    Matrix gamma;
    Matrix w;
    Matrix theta;
};

struct InitState {
    Matrix gamma;
    Matrix w;
    bool used_mle = false;
};

/// Starting values: the unpenalized regression when C_X is invertible,
/// otherwise Gamma = 0 and W = C_Y + rho I.
inline InitState init(const SufficientStats& stats, double rho)
{
    const auto p = stats.p();
    InitState st;
    if (stats.q() > 0 && is_invertible_spd(stats.cx)) {
        Eigen::LDLT<Matrix> ldlt(stats.cx);
        st.gamma = ldlt.solve(stats.cyx.transpose()).transpose();
        st.w = residual_scatter(stats, st.gamma) + rho * Matrix::Identity(p, p);
        st.used_mle = true;
    } else {
        st.gamma = Matrix::Zero(p, stats.q());
        st.w = stats.cy + rho * Matrix::Identity(p, p);
    }
    return st;
}

namespace detail {

/// Working state for in-place Gamma coordinate updates given Theta.
/// Keeps R = Gamma C_X so that (C_X Gamma' Theta)_ji = R.col(j) . Theta.col(i).
class GammaUpdater {
public:
    GammaUpdater(const SufficientStats& stats, const Matrix& theta, Matrix& gamma, double lambda,
                 const std::optional<Matrix>& weights)
        : stats_(stats), theta_(theta), gamma_(gamma), lambda_(lambda), weights_(weights)
    {
        if (theta.rows() != stats.p() || theta.cols() != stats.p())
            throw InputError("theta must be p x p");
        if (gamma.rows() != stats.p() || gamma.cols() != stats.q())
            throw InputError("gamma must be p x q");
        for (Eigen::Index i = 0; i < theta.rows(); ++i)
            if (!(theta(i, i) > 0.0))
                throw InputError("theta must have a strictly positive diagonal");
        a_ = stats.cyx.transpose() * theta;
        r_ = gamma * stats.cx;
    }

    /// One cyclic pass i = 1..p, j = 1..q. Returns the largest entry change.
    double pass(std::vector<std::string>* warnings)
    {
        const auto p = stats_.p();
        const auto q = stats_.q();
        double max_change = 0.0;
        for (Eigen::Index j = 0; j < q; ++j) {
            if (stats_.cx(j, j) > 0.0)
                continue;
            for (Eigen::Index i = 0; i < p; ++i)
                apply(i, j, 0.0, max_change);
            if (warnings && !warned_) {
                std::ostringstream os;
                os << "marker " << j << " has zero variance; its coefficients are fixed at 0";
                warnings->push_back(os.str());
            }
        }
        warned_ = true;
        for (Eigen::Index i = 0; i < p; ++i) {
            const double tii = theta_(i, i);
            for (Eigen::Index j = 0; j < q; ++j) {
                const double cjj = stats_.cx(j, j);
                if (!(cjj > 0.0))
                    continue;
                const double curv = cjj * tii;
                const double g = 2.0 * (a_(j, i) + curv * gamma_(i, j) - r_.col(j).dot(theta_.col(i)));
                const double wt = weights_ ? (*weights_)(i, j) : 1.0;
                const double next = soft_threshold(g, wt == 0.0 ? 0.0 : lambda_ * wt) / (2.0 * curv);
                apply(i, j, next, max_change);
            }
        }
        return max_change;
    }

private:
    void apply(Eigen::Index i, Eigen::Index j, double next, double& max_change)
    {
        const double delta = next - gamma_(i, j);
        if (delta == 0.0)
            return;
        gamma_(i, j) = next;
        r_.row(i).noalias() += delta * stats_.cx.row(j);
        max_change = std::max(max_change, std::abs(delta));
    }

    const SufficientStats& stats_;
    const Matrix& theta_;
    Matrix& gamma_;
    double lambda_;
    const std::optional<Matrix>& weights_;
    Matrix a_;
    Matrix r_;
    bool warned_ = false;
};

inline void check_descent(std::vector<double>& trace, double value, const char* step)
{
    if (!trace.empty()) {
        const double prev = trace.back();
        if (value > prev + 1e-8 * (1.0 + std::abs(prev))) {
            std::ostringstream os;
            os.precision(17);
            os << "objective increased during " << step << ": " << prev << " -> " << value;
            throw InternalError(os.str());
        }
    }
    trace.push_back(value);
}

} // namespace detail

/// One full cyclic pass of the closed-form coordinate update for Gamma given Theta.
inline Matrix update_gamma(const SufficientStats& stats, const Matrix& theta, const Matrix& gamma_prev, double lambda,
                           const std::optional<Matrix>& gamma_weights = std::nullopt,
                           std::vector<std::string>* warnings = nullptr)
{
    Matrix gamma = gamma_prev;
    detail::GammaUpdater upd(stats, theta, gamma, lambda, gamma_weights);
    upd.pass(warnings);
    return gamma;
}

/// Alternating block coordinate descent: glasso on S_Gamma for Theta, then
/// coordinate passes on Gamma, until the penalized objective stalls.
inline CggmFit fit(const SufficientStats& stats, const PenaltySpec& pen, const SolveOptions& opts = {},
                   const FitStart* start = nullptr)
{
    const auto p = stats.p();
    const auto q = stats.q();
    validate(pen, p, q);
    if (!(pen.rho > 0.0))
        throw InputError("rho must be positive");
    if (!(opts.tol_outer > 0.0) || !(opts.tol_inner > 0.0) || !(opts.tol_param > 0.0) || opts.max_outer < 1)
        throw InputError("solver tolerances must be positive and max_outer >= 1");
    if (stats.cy.rows() != stats.cy.cols() || stats.cyx.rows() != p || stats.cyx.cols() != q ||
        stats.cx.rows() != stats.cx.cols())
        throw InputError("sufficient statistics have inconsistent shapes");

    CggmFit out;
    out.penalty = pen;
    Matrix gamma;
    Matrix w;
    Matrix theta;
    if (start) {
        gamma = start->gamma;
        w = start->w;
        theta = start->theta;
    } else {
        InitState st = init(stats, pen.rho);
        gamma = std::move(st.gamma);
        w = std::move(st.w);
        if (pen.theta_weights)
            for (Eigen::Index i = 0; i < p; ++i)
                w(i, i) += pen.rho * ((*pen.theta_weights)(i, i) - 1.0);
        Eigen::LLT<Matrix> llt(w);
        if (llt.info() != Eigen::Success)
            throw NumericalError("initial covariance estimate is not positive definite");
        theta = symmetrize(llt.solve(Matrix::Identity(p, p)));
    }

    std::vector<double> trace;
    detail::check_descent(trace, penalized_objective(stats, theta, gamma, pen), "initialization");

    GlassoOptions gopts;
    gopts.tol = opts.glasso_tol;
    gopts.max_sweeps = opts.glasso_max_sweeps;
    gopts.lasso_tol = opts.glasso_lasso_tol;
    gopts.theta_weights = pen.theta_weights;

    auto theta_step = [&] {
        gopts.init_w = w;
        gopts.init_theta = theta;
        GlassoResult gl = glasso(residual_scatter(stats, gamma), pen.rho, gopts);
        theta = std::move(gl.theta);
        w = std::move(gl.w);
        detail::check_descent(trace, penalized_objective(stats, theta, gamma, pen), "Theta step");
        return gl.converged;
    };
    auto gamma_step = [&] {
        detail::GammaUpdater upd(stats, theta, gamma, pen.lambda, pen.gamma_weights);
        bool ok = false;
        for (std::size_t k = 0; k < opts.max_inner; ++k) {
            if (upd.pass(&out.warnings) <= opts.tol_inner) {
                ok = true;
                break;
            }
        }
        detail::check_descent(trace, penalized_objective(stats, theta, gamma, pen), "Gamma step");
        return ok;
    };

    auto rel_change = [](const Matrix& now, const Matrix& before) {
        if (now.size() == 0)
            return 0.0;
        return (now - before).cwiseAbs().maxCoeff() / std::max(1.0, now.cwiseAbs().maxCoeff());
    };

    double last_outer = trace.back();
    for (std::size_t it = 1; it <= opts.max_outer; ++it) {
        const Matrix theta_before = theta;
        const Matrix gamma_before = gamma;
        bool inner_ok = true;
        if (opts.gamma_first) {
            inner_ok &= gamma_step();
            inner_ok &= theta_step();
        } else {
            inner_ok &= theta_step();
            inner_ok &= gamma_step();
        }
        out.iterations = it;
        const double now = trace.back();
        const double change = std::abs(last_outer - now);
        last_outer = now;
        const double moved = std::max(rel_change(theta, theta_before), rel_change(gamma, gamma_before));
        if (it > 1 && inner_ok && change <= opts.tol_outer * std::max(1.0, std::abs(now)) && moved <= opts.tol_param) {
            out.converged = true;
            break;
        }
    }

    out.theta = std::move(theta);
    out.w = std::move(w);
    out.gamma = std::move(gamma);
    if (opts.trace)
        out.objective_trace = std::move(trace);
    else
        out.objective_trace = {trace.back()};
    return out;
}

/// |x|^{-exponent}, capped; zero entries receive the cap.
inline Matrix adaptive_weights(const Matrix& pilot, double exponent = 0.5, double cap = 1e6)
{
    return pilot.unaryExpr([&](double v) {
        const double a = std::abs(v);
        if (a == 0.0)
            return cap;
        return std::min(cap, std::pow(a, -exponent));
    });
}

/// Adaptive-lasso variant: weights from the unpenalized MLE of Gamma and Theta.
inline CggmFit fit_adaptive(const SufficientStats& stats, double lambda, double rho, const SolveOptions& opts = {},
                            double exponent = 0.5, double cap = 1e6)
{
    const auto n = static_cast<Eigen::Index>(stats.n);
    if (n <= std::max(stats.p(), stats.q()))
        throw InputError("adaptive fit needs n > max(p, q) for the MLE weights; use the non-adaptive fit");
    MleEstimate mle;
    try {
        mle = mle_fit(stats);
    } catch (const RankError& e) {
        throw InputError(std::string("adaptive fit unavailable (") + e.what() + "); use the non-adaptive fit");
    }
    PenaltySpec pen;
    pen.lambda = lambda;
    pen.rho = rho;
    pen.adaptive = true;
    pen.exponent = exponent;
    pen.gamma_weights = adaptive_weights(mle.gamma, exponent, cap);
    pen.theta_weights = adaptive_weights(mle.theta, exponent, cap);
    return fit(stats, pen, opts);
}

} // namespace cggm
