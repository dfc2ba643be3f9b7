#include "vcph/inference.hpp"

#include "vcph/errors.hpp"
#include "vcph/io.hpp"

#include <Eigen/Cholesky>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace vcph {

double BaselineHazard::cumulative(double t) const {
    double s = 0.0;
    for (std::size_t k = 0; k < jump_times.size() && jump_times[k] <= t; ++k) s += jump_sizes[k];
    return s;
}

double BaselineHazard::linear_predictor(const SurvivalDataset& d, std::size_t i, double u) const {
    return subject_beta.row(static_cast<Eigen::Index>(i)).dot(d.subject(i).z.at(u)) +
           subject_g[static_cast<Eigen::Index>(i)];
}

BaselineHazard breslow_cumhaz(const SurvivalDataset& d, const Eigen::MatrixXd& subject_beta,
                              const Eigen::VectorXd& subject_g) {
    const auto n = static_cast<Eigen::Index>(d.n());
    if (subject_beta.rows() != n || subject_beta.cols() != d.p() || subject_g.size() != n)
        throw ArgumentError("subject effects do not match the dataset");
    BaselineHazard bh;
    bh.subject_beta = subject_beta;
    bh.subject_g = subject_g;
    std::vector<double> lp(d.n());
    for (const auto& g : d.event_groups()) {
        double m = -std::numeric_limits<double>::infinity();
        std::size_t at_risk = 0;
        for (std::size_t j = 0; j < d.n(); ++j) {
            if (d.subject(j).time < g.time) continue;
            lp[j] = bh.linear_predictor(d, j, g.time);
            if (!std::isfinite(lp[j])) throw NumericalError("non-finite linear predictor at t=" + io::format_double(g.time));
            m = std::max(m, lp[j]);
            ++at_risk;
        }
        if (at_risk == 0) throw NumericalError("empty risk set at event time t=" + io::format_double(g.time));
        double s0 = 0.0;
        for (std::size_t j = 0; j < d.n(); ++j)
            if (d.subject(j).time >= g.time) s0 += std::exp(lp[j] - m);
        bh.jump_times.push_back(g.time);
        bh.jump_sizes.push_back(static_cast<double>(g.subjects.size()) * std::exp(-m) / s0);
    }
    return bh;
}

BaselineHazard breslow_cumhaz(const SurvivalDataset& d, const CurveEstimate& curve) {
    const auto n = static_cast<Eigen::Index>(d.n());
    Eigen::MatrixXd beta(n, d.p());
    Eigen::VectorXd g(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double w = d.subject(static_cast<std::size_t>(i)).w;
        beta.row(i) = curve.beta_at(w).transpose();
        g[i] = curve.with_g ? curve.g_at(w) : 0.0;
    }
    return breslow_cumhaz(d, beta, g);
}

std::vector<double> smooth_hazard(const BaselineHazard& bh, double b, Kernel kernel, std::span<const double> t_grid) {
    if (!(b > 0.0) || !std::isfinite(b)) throw ArgumentError("hazard bandwidth must be positive");
    std::vector<double> out(t_grid.size(), 0.0);
    for (std::size_t k = 0; k < t_grid.size(); ++k)
        for (std::size_t j = 0; j < bh.jump_times.size(); ++j)
            out[k] += eval_scaled(kernel, t_grid[k] - bh.jump_times[j], b) * bh.jump_sizes[j];
    return out;
}

double default_hazard_bandwidth(const SurvivalDataset& d) {
    const auto groups = d.event_groups();
    double range = groups.empty() ? 0.0 : groups.back().time - groups.front().time;
    if (!(range > 0.0)) range = d.tau();
    return range * std::pow(static_cast<double>(d.n()), -0.2);
}

namespace {

Eigen::MatrixXd inverse_information(const Eigen::MatrixXd& a) {
    Eigen::LDLT<Eigen::MatrixXd> f(a);
    auto ok = [](const Eigen::LDLT<Eigen::MatrixXd>& ff) {
        if (ff.info() != Eigen::Success) return false;
        const auto dv = ff.vectorD();
        const double dmax = dv.cwiseAbs().maxCoeff();
        return dmax > 0.0 && dv.minCoeff() > 1e-13 * dmax;
    };
    if (!ok(f)) {
        const double scale = a.cwiseAbs().maxCoeff();
        if (!(scale > 0.0)) throw NonIdentifiableFit("sandwich: A-hat is zero");
        Eigen::MatrixXd r = a;
        r.diagonal().array() += 1e-8 * scale;
        f.compute(r);
        if (!ok(f)) throw NonIdentifiableFit("sandwich: A-hat is singular after ridge");
    }
    return f.solve(Eigen::MatrixXd::Identity(a.rows(), a.cols()));
}

} // namespace

LocalInference sandwich(const SurvivalDataset& d, const LocalDesign& des, const LocalParams& xi_hat,
                        const BaselineHazard* bh, SandwichVariant variant) {
    if (variant == SandwichVariant::hazard_based && bh == nullptr)
        throw ArgumentError("hazard-based sandwich needs a baseline hazard");
    const auto dim = des.dim();
    const Eigen::VectorXd xi = xi_hat.pack(des.with_g);
    const auto scaling = des.scaling();
    const Eigen::VectorXd inv = scaling.diagonal().cwiseInverse();
    const double n = static_cast<double>(d.n());
    const double h = des.h;

    const auto ev = evaluate_local(d, des, xi, EvalOrder::hessian);
    if (!std::isfinite(ev.loglik)) throw NumericalError("sandwich: local likelihood overflow");
    LocalInference out;
    out.variant = variant;
    out.A_hat = scaling.sandwich_inverse(-ev.hessian);

    const auto moments = risk_set_moments(d, des, xi, false);
    const auto groups = d.event_groups();

    out.B_tilde = Eigen::VectorXd::Zero(dim);
    out.Pi_tilde = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd x(dim), resid(dim);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (!(moments[g].s0 > 0.0)) continue;
        const Eigen::VectorXd xbar = moments[g].mean();
        for (auto i : groups[g].subjects) {
            const double ki = des.weights[i];
            if (!(ki > 0.0)) continue;
            des.xstar(d.subject(i), groups[g].time, x);
            resid = inv.cwiseProduct(x - xbar);
            out.B_tilde.noalias() += ki * resid;
            out.Pi_tilde.noalias() += ki * ki * resid * resid.transpose();
        }
    }
    out.B_tilde /= n;
    out.Pi_tilde *= h / n;

    if (bh != nullptr) {
        if (bh->subject_g.size() != static_cast<Eigen::Index>(d.n()))
            throw ArgumentError("baseline hazard was estimated on a different dataset");
        out.B_hat = Eigen::VectorXd::Zero(dim);
        out.Pi_hat = Eigen::MatrixXd::Zero(dim, dim);
        // dLambda0 at each event group of d
        std::vector<double> jump(groups.size(), 0.0);
        for (std::size_t g = 0; g < groups.size(); ++g) {
            auto it = std::lower_bound(bh->jump_times.begin(), bh->jump_times.end(), groups[g].time);
            if (it != bh->jump_times.end() && *it == groups[g].time)
                jump[g] = bh->jump_sizes[static_cast<std::size_t>(it - bh->jump_times.begin())];
        }
        std::vector<Eigen::VectorXd> means(groups.size());
        for (std::size_t g = 0; g < groups.size(); ++g)
            if (moments[g].s0 > 0.0) means[g] = moments[g].mean();
        for (std::size_t i = 0; i < d.n(); ++i) {
            const double ki = des.weights[i];
            if (!(ki > 0.0)) continue;
            const auto& s = d.subject(i);
            for (std::size_t g = 0; g < groups.size() && groups[g].time <= s.time; ++g) {
                if (!(moments[g].s0 > 0.0) || jump[g] == 0.0) continue;
                const double u = groups[g].time;
                const double rate = std::exp(bh->linear_predictor(d, i, u)) * jump[g];
                des.xstar(s, u, x);
                resid = inv.cwiseProduct(x - means[g]);
                out.B_hat.noalias() += (ki * rate) * resid;
                out.Pi_hat.noalias() += (ki * ki * rate) * resid * resid.transpose();
            }
        }
        out.B_hat /= n;
        out.Pi_hat *= h / n;
    }

    const Eigen::MatrixXd a_inv = inverse_information(out.A_hat);
    const bool hazard = variant == SandwichVariant::hazard_based;
    const Eigen::VectorXd& b = hazard ? out.B_hat : out.B_tilde;
    const Eigen::MatrixXd& pi = hazard ? out.Pi_hat : out.Pi_tilde;
    out.bias_est = inv.cwiseProduct(a_inv * b);
    Eigen::MatrixXd cov_h = a_inv * pi * a_inv / (n * h);
    cov_h = 0.5 * (cov_h + cov_h.transpose());
    out.cov_est = scaling.sandwich_inverse(cov_h);
    out.se = out.cov_est.diagonal().cwiseMax(0.0).cwiseSqrt();
    return out;
}

double normal_quantile(double p) {
    static const boost::math::normal_distribution<double> standard;
    return boost::math::quantile(standard, p);
}

Band confidence_band(const CurveEstimate& curve, const std::vector<LocalInference>& infs, double level,
                     bool subtract_bias) {
    if (!(level > 0.0 && level < 1.0)) throw ArgumentError("confidence level must lie in (0, 1)");
    if (infs.size() != curve.points.size()) throw ArgumentError("one inference result per grid point is required");
    const double z = normal_quantile(0.5 * (1.0 + level));
    const auto k = static_cast<Eigen::Index>(curve.points.size());
    Band band{Eigen::MatrixXd(k, curve.p), Eigen::MatrixXd(k, curve.p)};
    for (Eigen::Index r = 0; r < k; ++r) {
        const auto& pt = curve.points[static_cast<std::size_t>(r)];
        const auto& inf = infs[static_cast<std::size_t>(r)];
        if (pt.degenerate || inf.se.size() == 0) {
            band.lo.row(r).setConstant(std::numeric_limits<double>::quiet_NaN());
            band.hi.row(r).setConstant(std::numeric_limits<double>::quiet_NaN());
            continue;
        }
        Eigen::VectorXd centre = pt.xi.delta;
        if (subtract_bias) centre -= inf.bias_est.head(curve.p);
        band.lo.row(r) = (centre - z * inf.se.head(curve.p)).transpose();
        band.hi.row(r) = (centre + z * inf.se.head(curve.p)).transpose();
    }
    return band;
}

} // namespace vcph
