#pragma once

#include "vcph/curve_fit.hpp"
#include "vcph/data.hpp"
#include "vcph/kernels.hpp"
#include "vcph/local_plik.hpp"

#include <Eigen/Core>

#include <vector>

namespace vcph {

struct PenaltyConfig {
    double rho = 0.3;
    double a = 3.7;
    double threshold = 0.5;  // voting fraction
    double zero_tol = 1e-4;  // on the standardized scale

    void validate() const;
};

// p'_rho(theta) = rho { I(theta <= rho) + (a rho - theta)_+ / ((a - 1) rho) I(theta > rho) }
double scad_deriv(double theta, double rho, double a);
// p_rho(theta), the integral of scad_deriv from 0
double scad_penalty(double theta, double rho, double a);

struct Standardization {
    Eigen::VectorXd ave;
    Eigen::VectorXd sd;

    CovariateTransform transform() const { return {ave, sd}; }
};

// Kernel-weighted mean and (biased) standard deviation of Z(0) around w0.
Standardization local_standardize(const SurvivalDataset& d, const LocalDesign& des);

// Penalty scale per packed component: 1 for delta, and the kernel-weighted
// sd of the column Z_j (W - w0) (eta) or W - w0 (gamma) as it enters X*.
Eigen::VectorXd penalty_scale(const SurvivalDataset& d, const LocalDesign& des);

struct LqaOptions {
    double tol = 1e-8;   // sup-norm of the change in H xi
    int max_iter = 200;
    int max_halvings = 30;
    double ridge = 1e-8;
};

struct PenalizedFit {
    LocalParams xi;            // scale of the design's covariates
    std::vector<bool> zero;    // per packed component
    bool converged = false;
    int iterations = 0;
    double objective = 0.0;    // l_n - sum p_rho(c_j |xi_j|)
};

// Maximizes l_n(xi) - sum_j p_rho(c_j |xi_j|) with c = penalty_scale by
// local quadratic approximation; components are frozen at zero once
// c_j |xi_j| falls below zero_tol.
PenalizedFit penalized_fit(const SurvivalDataset& d, const LocalDesign& des, const PenaltyConfig& cfg,
                           const LocalParams& init, const LqaOptions& opts = {});

struct SelectionResult {
    Grid grid;
    double h = 0.0;
    Kernel kernel;
    Eigen::Index p = 0;
    PenaltyConfig config;
    std::vector<bool> degenerate;                                    // per grid point
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> zero_pattern; // grid x (2p + 1)
    Eigen::VectorXd zero_fraction;                                   // 2p + 1, over non-degenerate points
    std::vector<Eigen::Index> kept;                                  // 0-based Z indices
    bool g_kept = true;
    Eigen::MatrixXd delta;                                           // penalized beta, original scale; NaN when degenerate

    // Re-apply the voting rule at another threshold.
    std::vector<Eigen::Index> kept_at(double threshold) const;
    bool g_kept_at(double threshold) const;
};

SelectionResult select_variables(const SurvivalDataset& d, const Grid& grid, double h, Kernel kernel,
                                 const PenaltyConfig& cfg, const CurveOptions& opts = {});

// Unpenalized refit on the surviving variables (and g only if kept).
// Returns an empty optional when no variable survives.
std::optional<CurveEstimate> refit_selected(const SurvivalDataset& d, const SelectionResult& sel,
                                            FitMethod method = FitMethod::full, const CurveOptions& opts = {});

} // namespace vcph
