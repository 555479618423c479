#pragma once
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cggm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Paired observations; rows are samples. Y is n x p expression, X is n x q markers.
struct Dataset {
    Matrix y;
    Matrix x;
};

/// Cross-product matrices (1/n) sum y y', (1/n) sum y x', (1/n) sum x x'.
struct SufficientStats {
    Matrix cy;
    Matrix cyx;
    Matrix cx;
    std::size_t n = 0;

    Eigen::Index p() const { return cy.rows(); }
    Eigen::Index q() const { return cx.rows(); }
};

struct PenaltySpec {
    double lambda = 0.0; ///< penalty level on Gamma
    double rho = 0.0;    ///< penalty level on Theta
    bool adaptive = false;
    double exponent = 0.5;
    std::optional<Matrix> gamma_weights; ///< p x q
    std::optional<Matrix> theta_weights; ///< p x p
};

struct CggmFit {
    Matrix theta;
    Matrix w;
    Matrix gamma;
    PenaltySpec penalty;
    /// Penalized objective after every half-step (Theta step, Gamma step, ...).
    std::vector<double> objective_trace;
    std::size_t iterations = 0;
    bool converged = false;
    std::vector<std::string> warnings;
};

} // namespace cggm
