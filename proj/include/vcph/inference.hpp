#pragma once

#include "vcph/curve_fit.hpp"
#include "vcph/data.hpp"
#include "vcph/kernels.hpp"
#include "vcph/local_plik.hpp"

#include <Eigen/Core>

#include <span>
#include <vector>

namespace vcph {

// Breslow-type cumulative baseline hazard. Also carries the fitted
// per-subject effects beta-hat(W_j), g-hat(W_j) that produced it, which
// define lambda_i(u) = exp(beta_i' Z_i(u) + g_i) dLambda0(u).
struct BaselineHazard {
    std::vector<double> jump_times;  // distinct event times, ascending
    std::vector<double> jump_sizes;
    Eigen::MatrixXd subject_beta;    // n x p
    Eigen::VectorXd subject_g;       // n

    double cumulative(double t) const;
    // beta_i' Z_i(u) + g_i
    double linear_predictor(const SurvivalDataset& d, std::size_t i, double u) const;
};

BaselineHazard breslow_cumhaz(const SurvivalDataset& d, const Eigen::MatrixXd& subject_beta,
                              const Eigen::VectorXd& subject_g);
BaselineHazard breslow_cumhaz(const SurvivalDataset& d, const CurveEstimate& curve);

// lambda0(t) = sum_jumps W_b(t - s) dLambda0(s)
std::vector<double> smooth_hazard(const BaselineHazard& bh, double b, Kernel kernel, std::span<const double> t_grid);

// (range of event times) * n^(-1/5)
double default_hazard_bandwidth(const SurvivalDataset& d);

enum class SandwichVariant { hazard_based, martingale };

// Sandwich pieces in the U* = H^-1 X* parameterization, plus the derived
// bias, covariance and standard errors on the original xi scale.
struct LocalInference {
    Eigen::MatrixXd A_hat;
    Eigen::VectorXd B_hat;   // empty unless a baseline hazard was supplied
    Eigen::VectorXd B_tilde;
    Eigen::MatrixXd Pi_hat;  // empty unless a baseline hazard was supplied
    Eigen::MatrixXd Pi_tilde;
    SandwichVariant variant = SandwichVariant::martingale;
    Eigen::VectorXd bias_est; // H^-1 A^-1 B
    Eigen::MatrixXd cov_est;  // H^-1 (nh)^-1 A^-1 Pi A^-1 H^-1
    Eigen::VectorXd se;
};

// bh may be null for the martingale variant.
LocalInference sandwich(const SurvivalDataset& d, const LocalDesign& des, const LocalParams& xi_hat,
                        const BaselineHazard* bh, SandwichVariant variant = SandwichVariant::martingale);

struct Band {
    Eigen::MatrixXd lo; // grid x p
    Eigen::MatrixXd hi;
};

// Pointwise beta_j(w_k) +- z se_j(w_k); bias is subtracted only on request.
Band confidence_band(const CurveEstimate& curve, const std::vector<LocalInference>& infs, double level,
                     bool subtract_bias = false);

double normal_quantile(double p);

} // namespace vcph
