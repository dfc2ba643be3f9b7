#pragma once

#include "vcph/data.hpp"
#include "vcph/kernels.hpp"
#include "vcph/local_plik.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace vcph {

struct Grid {
    std::vector<double> points;          // strictly ascending
    std::vector<std::size_t> anchors;    // full-fit seeds for one-step propagation

    // n equispaced points over [lo, hi] with n_anchors anchors placed like
    // u20, u60, ..., u180 on a 200-point grid.
    static Grid equispaced(double lo, double hi, std::size_t n, std::size_t n_anchors = 5);
    static std::vector<std::size_t> default_anchors(std::size_t n, std::size_t n_anchors = 5);
    void validate() const;
    std::size_t size() const { return points.size(); }
};

enum class FitMethod { full, one_step };

std::string_view method_name(FitMethod m);

struct PointFit {
    LocalParams xi;
    bool converged = false;
    bool degenerate = false; // no estimate at this point
    int iterations = 0;
    FitMethod method = FitMethod::full;
};

struct CurveEstimate {
    Grid grid;
    double h = 0.0;
    Kernel kernel;
    Eigen::Index p = 0;
    bool with_g = true;
    std::vector<PointFit> points;
    // reconstructed g; nullopt marks a degenerate point
    std::vector<std::optional<double>> g;

    std::size_t degenerate_count() const;
    // Linear interpolation over non-degenerate points, constant beyond the ends.
    Eigen::VectorXd beta_at(double w) const;
    double g_at(double w) const;
};

struct CurveOptions {
    NewtonOptions newton;
    double max_degenerate_fraction = 0.2;
};

// Newton fit at every grid point, warm-started left to right.
CurveEstimate fit_full(const SurvivalDataset& d, const Grid& grid, double h, Kernel kernel, bool with_g = true,
                       const CurveOptions& opts = {});

// One Newton update from init, taken in the H-rescaled coordinates.
LocalParams one_step(const SurvivalDataset& d, const LocalDesign& des, const LocalParams& init,
                     double ridge = 1e-8);

// The pure update xi - hess^-1 score, exposed for objectives other than the
// local partial likelihood.
Eigen::VectorXd one_step_update(const Eigen::VectorXd& xi, const Eigen::VectorXd& score,
                                const Eigen::MatrixXd& hessian, const ScalingMatrix& scaling, double ridge = 1e-8);

// A propagation chain: sequence of (point, seed) pairs evaluated in order;
// the first seed is an anchor.
struct Chain {
    std::vector<std::size_t> points;
    std::vector<std::size_t> seeds;
};

// Every non-anchor point is owned by its nearest anchor (ties to the left)
// and reached by stepping outward from it one point at a time.
std::vector<Chain> propagation_chains(std::size_t n_points, const std::vector<std::size_t>& anchors);

CurveEstimate fit_onestep(const SurvivalDataset& d, const Grid& grid, double h, Kernel kernel, bool with_g = true,
                          const CurveOptions& opts = {});

// Trapezoid integration of gamma-hat, anchored at 0 on the first
// non-degenerate point; degenerate points are bridged and left as nullopt.
std::vector<std::optional<double>> reconstruct_g(const CurveEstimate& curve);

struct CvOptions {
    std::size_t folds = 20;
    FitMethod method = FitMethod::full;
    CurveOptions curve;
};

struct CvResult {
    double best_h = 0.0;
    std::vector<double> candidates;
    std::vector<double> prediction_error; // +inf when every fold failed for that h
    std::vector<std::size_t> folds_used;
    std::vector<std::string> warnings;
};

CvResult cv_bandwidth(const SurvivalDataset& d, const Grid& grid, const std::vector<double>& candidates,
                      Kernel kernel, const CvOptions& opts = {});

} // namespace vcph
