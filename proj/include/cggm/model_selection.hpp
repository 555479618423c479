#pragma once
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <cggm/errors.hpp>
#include <cggm/model_core.hpp>
#include <cggm/parallel.hpp>
#include <cggm/solver.hpp>
#include <cggm/types.hpp>

namespace cggm {

/// Entries with magnitude at or below this count as zero in BIC degrees of freedom.
inline constexpr double kNonzeroTol = 1e-10;

struct BicRecord {
    double lambda = 0.0;
    double rho = 0.0;
    double bic = std::numeric_limits<double>::quiet_NaN();
    std::size_t s_n = 0; ///< nonzero off-diagonal Theta entries, both orders
    std::size_t k_n = 0; ///< nonzero Gamma entries
    bool converged = false;
    std::string error;
};

inline std::size_t count_offdiag_nonzero(const Matrix& theta, double tol = kNonzeroTol)
{
    std::size_t c = 0;
    for (Eigen::Index j = 0; j < theta.cols(); ++j)
        for (Eigen::Index i = 0; i < theta.rows(); ++i)
            if (i != j && std::abs(theta(i, j)) > tol)
                ++c;
    return c;
}

inline std::size_t count_nonzero(const Matrix& a, double tol = kNonzeroTol)
{
    return static_cast<std::size_t>((a.array().abs() > tol).count());
}

/// -n log det Theta + n tr(Theta S) + log(n) (s_n / 2 + p + k_n)
inline double bic_value(const Matrix& theta, const Matrix& scatter, std::size_t k_n, std::size_t n)
{
    const double dn = static_cast<double>(n);
    const double s_n = static_cast<double>(count_offdiag_nonzero(theta));
    const double p = static_cast<double>(theta.rows());
    return -dn * log_det_pd(theta) + dn * theta.cwiseProduct(scatter).sum() +
           std::log(dn) * (s_n / 2.0 + p + static_cast<double>(k_n));
}

inline double bic(const CggmFit& fit, const SufficientStats& stats)
{
    return bic_value(fit.theta, residual_scatter(stats, fit.gamma), count_nonzero(fit.gamma), stats.n);
}

/// n points from hi down to hi * lo_ratio, evenly spaced on the log scale.
inline std::vector<double> log_grid(double hi, double lo_ratio, std::size_t n)
{
    if (!(hi > 0.0) || !(lo_ratio > 0.0) || n == 0)
        throw InputError("log_grid needs hi > 0, lo_ratio > 0 and n >= 1");
    std::vector<double> g(n);
    if (n == 1) {
        g[0] = hi;
        return g;
    }
    const double step = std::log(lo_ratio) / static_cast<double>(n - 1);
    for (std::size_t k = 0; k < n; ++k)
        g[k] = hi * std::exp(step * static_cast<double>(k));
    return g;
}

/// Smallest lambda for which the first Gamma pass from Gamma = 0 stays at 0,
/// with Theta = (C_Y + rho I)^{-1}: max |2 (C_YX' Theta)_ji| / w_ij.
inline double lambda_max(const SufficientStats& stats, double rho, const std::optional<Matrix>& weights = std::nullopt)
{
    const auto p = stats.p();
    Eigen::LLT<Matrix> llt(stats.cy + rho * Matrix::Identity(p, p));
    if (llt.info() != Eigen::Success)
        throw NumericalError("lambda_max: C_Y + rho I is not positive definite");
    const Matrix theta = llt.solve(Matrix::Identity(p, p));
    const Matrix g = 2.0 * (theta * stats.cyx); // p x q, (i, j) = 2 (C_YX' Theta)_ji
    double m = 0.0;
    for (Eigen::Index i = 0; i < g.rows(); ++i)
        for (Eigen::Index j = 0; j < g.cols(); ++j) {
            const double w = weights ? (*weights)(i, j) : 1.0;
            if (w > 0.0)
                m = std::max(m, std::abs(g(i, j)) / w);
        }
    return m;
}

/// Largest off-diagonal |S_Gamma0| at the solver's starting Gamma.
inline double rho_max(const SufficientStats& stats)
{
    const InitState st = init(stats, 0.0);
    const Matrix s = residual_scatter(stats, st.gamma);
    double m = 0.0;
    for (Eigen::Index j = 0; j < s.cols(); ++j)
        for (Eigen::Index i = 0; i < s.rows(); ++i)
            if (i != j)
                m = std::max(m, std::abs(s(i, j)));
    return m;
}

struct DefaultGrids {
    std::vector<double> lambda;
    std::vector<double> rho;
};

/// Log-spaced grids from lambda_max / rho_max down to ratio times the maximum.
inline DefaultGrids default_grids(const SufficientStats& stats, std::size_t n_lambda = 10, std::size_t n_rho = 10,
                                  double ratio = 0.05, const std::optional<Matrix>& gamma_weights = std::nullopt)
{
    DefaultGrids g;
    double rmax = rho_max(stats);
    if (!(rmax > 0.0))
        rmax = std::max(1e-3, stats.cy.diagonal().mean() * 1e-2);
    g.rho = log_grid(rmax, ratio, n_rho);
    double lmax = lambda_max(stats, g.rho.back(), gamma_weights);
    if (!(lmax > 0.0))
        lmax = 1e-3;
    g.lambda = log_grid(lmax, ratio, n_lambda);
    return g;
}

struct GridOptions {
    std::size_t threads = 1;
    /// Within each rho row, visit lambdas from largest to smallest and start
    /// each fit from the previous cell's solution.
    bool warm_start = true;
};

struct GridSearchResult {
    CggmFit best;
    std::size_t best_index = 0;
    /// Row-major by (rho index, lambda index) in the caller's grid order.
    std::vector<BicRecord> table;
};

/// Index of the BIC minimizer among converged cells; ties go to the larger
/// lambda + rho, then to the lower index.
inline std::optional<std::size_t> select_best(const std::vector<BicRecord>& table)
{
    std::optional<std::size_t> best;
    for (std::size_t k = 0; k < table.size(); ++k) {
        const auto& r = table[k];
        if (!r.converged || !std::isfinite(r.bic))
            continue;
        if (!best) {
            best = k;
            continue;
        }
        const auto& b = table[*best];
        if (r.bic < b.bic || (r.bic == b.bic && r.lambda + r.rho > b.lambda + b.rho))
            best = k;
    }
    return best;
}

inline GridSearchResult grid_search(const SufficientStats& stats, const std::vector<double>& lambda_grid,
                                    const std::vector<double>& rho_grid, bool adaptive, const SolveOptions& opts = {},
                                    const GridOptions& gopts = {})
{
    if (lambda_grid.empty() || rho_grid.empty())
        throw InputError("tuning grids must be nonempty");
    for (double v : lambda_grid)
        if (!(v > 0.0))
            throw InputError("lambda grid entries must be positive");
    for (double v : rho_grid)
        if (!(v > 0.0))
            throw InputError("rho grid entries must be positive");

    PenaltySpec base;
    if (adaptive) {
        if (static_cast<Eigen::Index>(stats.n) <= std::max(stats.p(), stats.q()))
            throw InputError("adaptive tuning needs n > max(p, q); use the non-adaptive search");
        MleEstimate mle;
        try {
            mle = mle_fit(stats);
        } catch (const RankError& e) {
            throw InputError(std::string("adaptive tuning unavailable: ") + e.what());
        }
        base.adaptive = true;
        base.gamma_weights = adaptive_weights(mle.gamma, base.exponent);
        base.theta_weights = adaptive_weights(mle.theta, base.exponent);
    }

    const std::size_t nl = lambda_grid.size();
    const std::size_t nr = rho_grid.size();
    std::vector<BicRecord> table(nl * nr);
    std::vector<std::optional<CggmFit>> fits(nl * nr);

    std::vector<std::size_t> lambda_order(nl);
    std::iota(lambda_order.begin(), lambda_order.end(), std::size_t{0});
    std::stable_sort(lambda_order.begin(), lambda_order.end(),
                     [&](std::size_t a, std::size_t b) { return lambda_grid[a] > lambda_grid[b]; });

    parallel_for(nr, gopts.threads, [&](std::size_t r) {
        std::optional<FitStart> start;
        for (std::size_t li : lambda_order) {
            const std::size_t k = r * nl + li;
            BicRecord& rec = table[k];
            rec.lambda = lambda_grid[li];
            rec.rho = rho_grid[r];
            PenaltySpec pen = base;
            pen.lambda = rec.lambda;
            pen.rho = rec.rho;
            try {
                CggmFit f = fit(stats, pen, opts, (gopts.warm_start && start) ? &*start : nullptr);
                rec.converged = f.converged;
                rec.s_n = count_offdiag_nonzero(f.theta);
                rec.k_n = count_nonzero(f.gamma);
                rec.bic = bic(f, stats);
                if (gopts.warm_start)
                    start = FitStart{f.gamma, f.w, f.theta};
                fits[k] = std::move(f);
            } catch (const std::exception& e) {
                rec.converged = false;
                rec.error = e.what();
                start.reset();
            }
        }
    });

    const auto best = select_best(table);
    if (!best)
        throw ConvergenceError("grid search: no grid cell produced a converged fit");
    GridSearchResult res;
    res.best_index = *best;
    res.best = std::move(*fits[*best]);
    res.table = std::move(table);
    return res;
}

} // namespace cggm
