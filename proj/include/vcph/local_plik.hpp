#pragma once

#include "vcph/data.hpp"
#include "vcph/kernels.hpp"

#include <Eigen/Core>

#include <optional>
#include <vector>

namespace vcph {

// Local coefficients at w0: delta = beta(w0), eta = beta'(w0), gamma = g'(w0).
// Packed as xi = (delta, eta, gamma); gamma is dropped when the design
// excludes g.
struct LocalParams {
    Eigen::VectorXd delta;
    Eigen::VectorXd eta;
    double gamma = 0.0;

    static LocalParams zeros(Eigen::Index p);
    Eigen::Index p() const { return delta.size(); }
    Eigen::VectorXd pack(bool with_g = true) const;
    static LocalParams unpack(const Eigen::VectorXd& xi, Eigen::Index p, bool with_g = true);
};

// Affine map z -> (z - center) / scale applied to covariates inside X*.
struct CovariateTransform {
    Eigen::VectorXd center;
    Eigen::VectorXd scale;
};

// H = diag(1 x p, h x (p + 1)), or h x p when g is excluded.
class ScalingMatrix {
  public:
    ScalingMatrix(Eigen::Index p, double h, bool with_g = true);

    const Eigen::VectorXd& diagonal() const { return diag_; }
    Eigen::VectorXd apply(const Eigen::VectorXd& xi) const { return diag_.cwiseProduct(xi); }
    Eigen::VectorXd apply_inverse(const Eigen::VectorXd& v) const { return v.cwiseQuotient(diag_); }
    // H^-1 M H^-1
    Eigen::MatrixXd sandwich_inverse(const Eigen::MatrixXd& m) const;

  private:
    Eigen::VectorXd diag_;
};

struct LocalDesign {
    LocalDesign(const SurvivalDataset& d, double w0, double h, Kernel kernel, bool with_g = true);

    double w0;
    double h;
    Kernel kernel;
    bool with_g;
    Eigen::Index p;
    std::vector<double> weights; // K_h(W_i - w0)
    std::optional<CovariateTransform> transform;

    Eigen::Index dim() const { return 2 * p + (with_g ? 1 : 0); }
    ScalingMatrix scaling() const { return ScalingMatrix(p, h, with_g); }

    // X*_i(t) = (Z_i(t), Z_i(t)(W_i - w0), W_i - w0)
    void xstar(const Subject& s, double t, Eigen::Ref<Eigen::VectorXd> out) const;
    Eigen::VectorXd xstar(const Subject& s, double t) const;
};

struct LocalEval {
    double loglik = 0.0;
    Eigen::VectorXd score;
    Eigen::MatrixXd hessian;
};

enum class EvalOrder { value, score, hessian };

// One sweep over the risk sets gives the value and, on request, the
// analytic gradient and Hessian. Everything is scaled by 1/n.
LocalEval evaluate_local(const SurvivalDataset& d, const LocalDesign& des, const Eigen::VectorXd& xi,
                         EvalOrder order);

double local_loglik(const SurvivalDataset& d, const LocalDesign& des, const LocalParams& xi);
Eigen::VectorXd local_score(const SurvivalDataset& d, const LocalDesign& des, const LocalParams& xi);
Eigen::MatrixXd local_hessian(const SurvivalDataset& d, const LocalDesign& des, const LocalParams& xi);

// Weighted risk-set moments of X* at one distinct event time, scaled by
// exp(-log_scale): s0 = sum w_j e_j, s1 = sum w_j e_j x_j, s2 = sum w_j e_j x_j x_j'.
struct RiskSetMoments {
    double time = 0.0;
    double log_scale = 0.0;
    double s0 = 0.0;
    Eigen::VectorXd s1;
    Eigen::MatrixXd s2;

    Eigen::VectorXd mean() const { return s1 / s0; }
};

// Moments at every event group of d (ascending time). Groups whose risk set
// has no positive-weight subject report s0 = 0.
std::vector<RiskSetMoments> risk_set_moments(const SurvivalDataset& d, const LocalDesign& des,
                                             const Eigen::VectorXd& xi, bool second_order);

struct NewtonOptions {
    double tol = 1e-8;       // sup-norm of the H-rescaled score
    int max_iter = 50;
    int max_halvings = 30;
    double ridge = 1e-8;     // relative ridge used when the Hessian is singular
};

struct NewtonResult {
    LocalParams params;
    bool converged = false;
    int iterations = 0;
    double loglik = 0.0;
};

// Throws DegenerateNeighborhood when fewer than dim() events fall inside
// the kernel's effective radius around w0.
void check_neighborhood(const SurvivalDataset& d, const LocalDesign& des);

// Newton increment -hess^-1 score, solved in the H-rescaled coordinates,
// with a ridge fallback. Throws NonIdentifiableFit if still singular.
Eigen::VectorXd newton_increment(const Eigen::VectorXd& score, const Eigen::MatrixXd& hessian,
                                 const ScalingMatrix& scaling, double ridge = 1e-8);

NewtonResult newton_fit(const SurvivalDataset& d, const LocalDesign& des, const LocalParams& init,
                        const NewtonOptions& opts = {});

} // namespace vcph
