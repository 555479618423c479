#pragma once
#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <cggm/errors.hpp>
#include <cggm/types.hpp>

namespace cggm {

/// sgn(z) * max(|z| - t, 0)
inline double soft_threshold(double z, double t)
{
    if (z > t)
        return z - t;
    if (z < -t)
        return z + t;
    return 0.0;
}

/// minimize (1/2) b'Qb - b'linear + penalty * sum_j weights_j |b_j|
struct QuadLassoProblem {
    Matrix q;
    Vector linear;
    double penalty = 0.0;
    std::optional<Vector> weights;
    std::optional<Vector> start;
};

class LassoConvergenceError : public ConvergenceError {
public:
    LassoConvergenceError(const std::string& what, Vector last)
        : ConvergenceError(what), last_iterate(std::move(last)) {}
    Vector last_iterate;
};

struct LassoOptions {
    double tol = 1e-6;
    std::size_t max_iter = 1000;
    /// Coordinate visiting order; ascending when empty.
    std::vector<Eigen::Index> order;
    /// When set, receives the objective after every sweep.
    std::vector<double>* sweep_objectives = nullptr;
    /// Number of sweeps actually run.
    std::size_t* sweeps = nullptr;
};

inline double quad_lasso_objective(const QuadLassoProblem& prob, const Vector& beta)
{
    double pen = prob.weights ? prob.weights->cwiseProduct(beta.cwiseAbs()).sum() : beta.cwiseAbs().sum();
    return 0.5 * beta.dot(prob.q * beta) - beta.dot(prob.linear) + prob.penalty * pen;
}

inline void validate(const QuadLassoProblem& prob)
{
    const auto d = prob.linear.size();
    if (prob.q.rows() != d || prob.q.cols() != d)
        throw InputError("quadratic form must be d x d");
    if (!(prob.penalty >= 0.0))
        throw InputError("penalty must be nonnegative");
    if (!prob.q.allFinite() || !prob.linear.allFinite())
        throw InputError("lasso problem has non-finite entries");
    if ((prob.q - prob.q.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + prob.q.cwiseAbs().maxCoeff()))
        throw InputError("quadratic form must be symmetric");
    if (prob.weights) {
        if (prob.weights->size() != d || !prob.weights->allFinite() || (prob.weights->array() < 0.0).any())
            throw InputError("lasso weights must be finite and nonnegative");
    }
    if (prob.start && prob.start->size() != d)
        throw InputError("start vector has wrong length");
}

/// Cyclic coordinate descent with soft-thresholding. Stops when the largest
/// coordinate change in a sweep is at most tol.
inline Vector solve_quad_lasso(const QuadLassoProblem& prob, const LassoOptions& opts = {})
{
    validate(prob);
    if (!(opts.tol > 0.0))
        throw InputError("tolerance must be positive");
    const auto d = prob.linear.size();
    Vector beta = prob.start ? *prob.start : Vector::Zero(d);
    // residual gradient: linear - Q beta
    Vector r = prob.linear - prob.q * beta;

    std::vector<Eigen::Index> order = opts.order;
    if (order.empty()) {
        order.resize(static_cast<std::size_t>(d));
        for (Eigen::Index j = 0; j < d; ++j)
            order[static_cast<std::size_t>(j)] = j;
    }

    for (std::size_t sweep = 1; sweep <= opts.max_iter; ++sweep) {
        double max_change = 0.0;
        for (Eigen::Index j : order) {
            const double qjj = prob.q(j, j);
            const double old = beta(j);
            double next = 0.0;
            if (qjj > 0.0) {
                const double t = prob.penalty * (prob.weights ? (*prob.weights)(j) : 1.0);
                next = soft_threshold(r(j) + qjj * old, t) / qjj;
            }
            const double delta = next - old;
            if (delta != 0.0) {
                beta(j) = next;
                r.noalias() -= delta * prob.q.col(j);
                max_change = std::max(max_change, std::abs(delta));
            }
        }
        if (opts.sweep_objectives)
            opts.sweep_objectives->push_back(quad_lasso_objective(prob, beta));
        if (max_change <= opts.tol) {
            if (opts.sweeps)
                *opts.sweeps = sweep;
            return beta;
        }
    }
    if (opts.sweeps)
        *opts.sweeps = opts.max_iter;
    throw LassoConvergenceError("coordinate descent did not converge within max_iter sweeps", beta);
}

/// minimize (1/2n)||response - design b||^2 + penalty ||b||_1
inline Vector lasso_regression(const Matrix& design, const Vector& response, double penalty, double tol = 1e-6,
                               std::size_t max_iter = 1000)
{
    if (design.rows() != response.size())
        throw InputError("design and response row counts differ");
    if (design.rows() == 0)
        throw InputError("empty design");
    const double inv_n = 1.0 / static_cast<double>(design.rows());
    QuadLassoProblem prob;
    prob.q = inv_n * (design.transpose() * design);
    prob.q = 0.5 * (prob.q + prob.q.transpose()).eval();
    prob.linear = inv_n * (design.transpose() * response);
    prob.penalty = penalty;
    LassoOptions opts;
    opts.tol = tol;
    opts.max_iter = max_iter;
    return solve_quad_lasso(prob, opts);
}

} // namespace cggm
