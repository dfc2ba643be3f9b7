#pragma once

#include "vcph/curve_fit.hpp"
#include "vcph/data.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace vcph {

using Rng = std::mt19937_64;

// Stream for replication `rep` under root seed `seed`; independent of the
// order in which replications run.
Rng child_rng(std::uint64_t seed, std::uint64_t rep);

struct GenOptions {
    bool null_effects = false; // every coefficient (and g) forced to 0
    bool censor = true;
};

struct Simulated {
    SurvivalDataset data;
    std::vector<double> latent_time; // T before censoring
    std::vector<bool> high_risk;     // Example 1: b > b0 (short censoring window)
};

// Example 1 linear predictor b(Z1, Z2, W) and its censoring cut b0.
double example1_b(double z1, double z2, double w);
double example1_b0();
// H(t) = t^4 e^{b_a} on [0, 1], e^{b_a} + (t^4 - 1) e^{b_b} beyond
double example1_cumhaz(double t, double b_a, double b_b);
double example1_event_time(double e, double b_a, double b_b);

Simulated simulate_example1(std::size_t n, Rng& rng, const GenOptions& opts = {});
Simulated simulate_example2(std::size_t n, Rng& rng, const GenOptions& opts = {});
SurvivalDataset gen_example1(std::size_t n, Rng& rng);
SurvivalDataset gen_example2(std::size_t n, Rng& rng);

enum class Example { ex1, ex2 };

struct Truth {
    std::vector<std::function<double(double)>> beta;
    std::function<double(double)> g;
};

Truth example_truth(Example ex);

enum class MseWeights { reciprocal_var, unit };

// (1/n_grid) sum_j sum_k a_j (est(k, j) - beta_j(w_k))^2
double wmse(const Eigen::MatrixXd& est, const std::vector<double>& grid, const Truth& truth, MseWeights weights);
double wmse(const CurveEstimate& curve, const Truth& truth, MseWeights weights);
// Curve values at the grid points; degenerate points are interpolated.
Eigen::MatrixXd curve_beta(const CurveEstimate& curve);

enum class StudyMethod { full, one_step, both };

struct StudyConfig {
    Example example = Example::ex1;
    std::size_t n = 300;
    std::size_t reps = 200;
    double h = 0.2;
    std::uint64_t seed = 1;
    std::size_t grid_n = 200;
    StudyMethod method = StudyMethod::full;
    double rho = 0.3;
    std::vector<double> votes{0.5};
    bool standard_errors = true;
    unsigned threads = 1;

    void validate() const;
};

inline const std::vector<double>& probe_points() {
    static const std::vector<double> w{0.3, 0.75, 1.5, 2.25, 2.7};
    return w;
}

struct RepResult {
    bool ok = false;
    std::string failure;
    double censoring = 0.0;
    double censoring_high = 0.0; // Example 1 regions
    double censoring_low = 0.0;
    std::optional<double> wmse_full, wmse_onestep, umse_full, umse_onestep;
    // Example 2
    std::optional<double> umse_selected, umse_oracle;
    std::vector<bool> joint_deleted; // per vote threshold
    Eigen::VectorXd zero_fraction;
    // probe estimates and standard errors, probes x (p + 1): beta_1..p, g'
    Eigen::MatrixXd probe_est;
    Eigen::MatrixXd probe_se;
    // curve used for the median-replication output
    Eigen::MatrixXd curve_beta;
    std::vector<double> curve_g;
};

struct SeRow {
    double w0;
    std::string coef;
    std::optional<double> sd;
    double se_ave;
    std::optional<double> se_std;
    std::size_t count;
};

struct StudyReport {
    StudyConfig config;
    std::vector<RepResult> reps;
    std::size_t failures = 0;
    std::vector<SeRow> se_table;
    std::vector<double> deletion_rate; // per vote threshold
    std::optional<std::size_t> median_rep;
    std::vector<double> grid;
};

// Runs replications in parallel over config.threads workers; the report does
// not depend on the thread count.
StudyReport run_study(const StudyConfig& cfg);

// report.json, wmse.csv, se_table.csv, curves_median_rep.csv
void write_report(const StudyReport& r, const std::filesystem::path& dir);

// Calls f(i) for i in [0, count) on up to `threads` workers.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& f);

} // namespace vcph
