#pragma once
// Independent reference computations for the test suites. Nothing here calls
// the coordinate-descent solvers under test.
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline double soft(double z, double t) { return z > t ? z - t : (z < -t ? z + t : 0.0); }

inline double logdet_or_nan(const Matrix& a)
{
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success)
        return std::numeric_limits<double>::quiet_NaN();
    return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

/// Penalized cGGM objective written out in the four-trace form.
inline double cggm_objective(const Matrix& cy, const Matrix& cyx, const Matrix& cx, const Matrix& theta,
                             const Matrix& gamma, double lambda, double rho)
{
    const double ld = logdet_or_nan(theta);
    if (!std::isfinite(ld))
        return std::numeric_limits<double>::infinity();
    const double tr = (cy * theta).trace() - (cyx * gamma.transpose() * theta).trace() -
                      (gamma * cyx.transpose() * theta).trace() + (gamma * cx * gamma.transpose() * theta).trace();
    return -ld + tr + lambda * gamma.cwiseAbs().sum() + rho * theta.cwiseAbs().sum();
}

/// Golden-section minimum of a unimodal f on [a, b].
inline double golden(const std::function<double(double)>& f, double a, double b, double tol = 1e-11)
{
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

/// Coordinate-wise golden-section polish of f over x; each coordinate is
/// convex along its own line, so a bracket search finds its minimum.
inline double polish(const std::function<double(const Vector&)>& f, Vector& x, int rounds = 200,
                     double start_width = 0.5)
{
    double best = f(x);
    double width = start_width;
    for (int r = 0; r < rounds; ++r) {
        const double before = best;
        for (Eigen::Index k = 0; k < x.size(); ++k) {
            auto line = [&](double v) {
                Vector y = x;
                y(k) = v;
                return f(y);
            };
            const double v = golden(line, x(k) - width, x(k) + width);
            double cand = line(v);
            double val = v;
            const double at_zero = line(0.0);
            if (at_zero < cand) {
                cand = at_zero;
                val = 0.0;
            }
            if (cand < best) {
                best = cand;
                x(k) = val;
            }
        }
        if (before - best < 1e-13)
            width *= 0.5;
        if (width < 1e-9)
            break;
    }
    return best;
}

struct ProbeResult {
    double value;
    Matrix theta;
    Matrix gamma;
};

/// Brute-force minimum of the penalized cGGM objective for small p, q:
/// `points` uniform random draws in a box, then coordinate polish from the
/// best few.
inline ProbeResult probe_cggm(const Matrix& cy, const Matrix& cyx, const Matrix& cx, double lambda, double rho,
                              std::uint64_t seed, int points = 100000)
{
    const auto p = cy.rows();
    const auto q = cx.rows();
    const Eigen::Index nt = p * (p + 1) / 2;
    const Eigen::Index dim = nt + p * q;
    auto unpack = [&](const Vector& x, Matrix& theta, Matrix& gamma) {
        theta.resize(p, p);
        gamma.resize(p, q);
        Eigen::Index k = 0;
        for (Eigen::Index i = 0; i < p; ++i)
            for (Eigen::Index j = i; j < p; ++j, ++k) {
                theta(i, j) = x(k);
                theta(j, i) = x(k);
            }
        for (Eigen::Index i = 0; i < p; ++i)
            for (Eigen::Index j = 0; j < q; ++j, ++k)
                gamma(i, j) = x(k);
    };
    auto f = [&](const Vector& x) {
        Matrix t, g;
        unpack(x, t, g);
        return cggm_objective(cy, cyx, cx, t, g, lambda, rho);
    };
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double diag_hi = 3.0 * std::max(1.0, 1.0 / cy.diagonal().minCoeff());
    std::vector<std::pair<double, Vector>> top;
    for (int s = 0; s < points; ++s) {
        Vector x(dim);
        Eigen::Index k = 0;
        for (Eigen::Index i = 0; i < p; ++i)
            for (Eigen::Index j = i; j < p; ++j, ++k)
                x(k) = (i == j) ? 0.05 + u(rng) * diag_hi : (u(rng) - 0.5) * diag_hi;
        for (; k < dim; ++k)
            x(k) = (u(rng) - 0.5) * 4.0;
        const double v = f(x);
        if (!std::isfinite(v))
            continue;
        top.emplace_back(v, x);
        if (top.size() > 64) {
            std::nth_element(top.begin(), top.begin() + 8, top.end(),
                             [](const auto& a, const auto& b) { return a.first < b.first; });
            top.resize(8);
        }
    }
    std::sort(top.begin(), top.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    if (top.size() > 8)
        top.resize(8);
    ProbeResult best{std::numeric_limits<double>::infinity(), {}, {}};
    for (auto& [v, x] : top) {
        const double pv = polish(f, x);
        if (pv < best.value) {
            best.value = pv;
            unpack(x, best.theta, best.gamma);
        }
    }
    return best;
}

/// Proximal gradient with backtracking for
/// -log det T + tr(S T) + rho * sum |t_ij|.
inline Matrix prox_glasso(const Matrix& s, double rho, int iters = 200000, double tol = 1e-12)
{
    const auto p = s.rows();
    Matrix t = (s + rho * Matrix::Identity(p, p)).inverse();
    t = 0.5 * (t + t.transpose());
    auto smooth = [&](const Matrix& m) {
        const double ld = logdet_or_nan(m);
        return std::isfinite(ld) ? -ld + (s * m).trace() : std::numeric_limits<double>::infinity();
    };
    auto full = [&](const Matrix& m) { return smooth(m) + rho * m.cwiseAbs().sum(); };
    double step = 1.0;
    double cur = full(t);
    for (int it = 0; it < iters; ++it) {
        const Matrix grad = s - t.inverse();
        const double f0 = smooth(t);
        Matrix next;
        while (true) {
            next = (t - step * grad).unaryExpr([&](double z) { return soft(z, step * rho); });
            next = 0.5 * (next + next.transpose());
            const double f1 = smooth(next);
            const Matrix d = next - t;
            if (std::isfinite(f1) && f1 <= f0 + grad.cwiseProduct(d).sum() + d.squaredNorm() / (2.0 * step) + 1e-15 * (1.0 + std::abs(f0)))
                break;
            step *= 0.5;
            if (step < 1e-20)
                return t;
        }
        const double nv = full(next);
        // gradient-mapping norm, not the raw step, so small steps do not stop early
        const double change = (next - t).cwiseAbs().maxCoeff() / step;
        t = next;
        cur = nv;
        step *= 1.5;
        if (change < tol)
            break;
    }
    (void)cur;
    return t;
}

struct Kkt {
    double theta_violation = 0.0;
    double gamma_violation = 0.0;
};

/// Subgradient residuals of the penalized objective at (theta, gamma), using
/// an independently computed inverse of theta.
/// Theta: Theta^{-1} - S - rho W .* Lambda = 0 with Lambda in sgn(Theta).
/// Gamma: 2 [Theta (Gamma C_X - C_YX)]_ij + lambda w_ij sgn(gamma_ij) = 0.
inline Kkt kkt(const Matrix& cy, const Matrix& cyx, const Matrix& cx, const Matrix& theta, const Matrix& gamma,
               double lambda, double rho, const Matrix* gamma_w = nullptr, const Matrix* theta_w = nullptr,
               double zero_tol = 1e-10)
{
    Kkt k;
    const Matrix s = cy - cyx * gamma.transpose() - gamma * cyx.transpose() + gamma * cx * gamma.transpose();
    const Matrix g = theta.inverse() - s;
    for (Eigen::Index i = 0; i < theta.rows(); ++i)
        for (Eigen::Index j = 0; j < theta.cols(); ++j) {
            const double pen = rho * (theta_w ? (*theta_w)(i, j) : 1.0);
            const double t = theta(i, j);
            const double v = std::abs(t) > zero_tol ? std::abs(g(i, j) - pen * (t > 0 ? 1.0 : -1.0))
                                                    : std::max(0.0, std::abs(g(i, j)) - pen);
            k.theta_violation = std::max(k.theta_violation, v);
        }
    const Matrix d = 2.0 * theta * (gamma * cx - cyx);
    for (Eigen::Index i = 0; i < gamma.rows(); ++i)
        for (Eigen::Index j = 0; j < gamma.cols(); ++j) {
            const double pen = lambda * (gamma_w ? (*gamma_w)(i, j) : 1.0);
            const double v = gamma(i, j);
            const double r = std::abs(v) > zero_tol ? std::abs(d(i, j) + pen * (v > 0 ? 1.0 : -1.0))
                                                    : std::max(0.0, std::abs(d(i, j)) - pen);
            k.gamma_violation = std::max(k.gamma_violation, r);
        }
    return k;
}

/// Direct summation of the cross-product matrices.
inline void cross_products(const Matrix& y, const Matrix& x, Matrix& cy, Matrix& cyx, Matrix& cx)
{
    const auto n = y.rows();
    cy = Matrix::Zero(y.cols(), y.cols());
    cyx = Matrix::Zero(y.cols(), x.cols());
    cx = Matrix::Zero(x.cols(), x.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        cy += y.row(i).transpose() * y.row(i);
        cyx += y.row(i).transpose() * x.row(i);
        cx += x.row(i).transpose() * x.row(i);
    }
    cy /= static_cast<double>(n);
    cyx /= static_cast<double>(n);
    cx /= static_cast<double>(n);
}

} // namespace oracle
