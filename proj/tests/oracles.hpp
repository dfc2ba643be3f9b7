#pragma once

#include "vcph/data.hpp"
#include "vcph/kernels.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <vector>

namespace oracle {

// Direct double loop over events and risk sets, no log-sum-exp, no sorting.
inline double local_loglik(const vcph::SurvivalDataset& d, double w0, double h, vcph::Kernel k,
                           const Eigen::VectorXd& xi, bool with_g = true) {
    const auto p = d.p();
    auto xs = [&](const vcph::Subject& s, double t) {
        Eigen::VectorXd x(2 * p + (with_g ? 1 : 0));
        const auto& z = s.z.at(t);
        x.head(p) = z;
        x.segment(p, p) = z * (s.w - w0);
        if (with_g) x[2 * p] = s.w - w0;
        return x;
    };
    double total = 0.0;
    for (std::size_t i = 0; i < d.n(); ++i) {
        const auto& si = d.subject(i);
        if (!si.event || si.time > d.tau()) continue;
        const double t = si.time;
        double denom = 0.0;
        for (std::size_t j = 0; j < d.n(); ++j) {
            const auto& sj = d.subject(j);
            if (sj.time >= t) denom += vcph::eval_scaled(k, sj.w - w0, h) * std::exp(xi.dot(xs(sj, t)));
        }
        total += vcph::eval_scaled(k, si.w - w0, h) * (xi.dot(xs(si, t)) - std::log(denom));
    }
    return total / static_cast<double>(d.n());
}

// Unlocalized Cox partial log-likelihood (Breslow ties), time-constant covariates.
inline double cox_loglik(const std::vector<double>& time, const std::vector<int>& status,
                         const std::vector<Eigen::VectorXd>& z, const Eigen::VectorXd& beta) {
    double total = 0.0;
    for (std::size_t i = 0; i < time.size(); ++i) {
        if (!status[i]) continue;
        double denom = 0.0;
        for (std::size_t j = 0; j < time.size(); ++j)
            if (time[j] >= time[i]) denom += std::exp(beta.dot(z[j]));
        total += beta.dot(z[i]) - std::log(denom);
    }
    return total;
}

// Plain Newton with numeric derivatives followed by a local grid polish; good
// to ~1e-7 on well-posed small problems.
inline Eigen::VectorXd cox_fit(const std::vector<double>& time, const std::vector<int>& status,
                               const std::vector<Eigen::VectorXd>& z) {
    const auto p = z.front().size();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
    auto f = [&](const Eigen::VectorXd& v) { return cox_loglik(time, status, z, v); };
    const double e = 1e-4;
    for (int it = 0; it < 100; ++it) {
        Eigen::VectorXd g(p);
        Eigen::MatrixXd hm(p, p);
        for (Eigen::Index a = 0; a < p; ++a) {
            Eigen::VectorXd ea = Eigen::VectorXd::Zero(p);
            ea[a] = e;
            g[a] = (f(b + ea) - f(b - ea)) / (2 * e);
            for (Eigen::Index c = 0; c < p; ++c) {
                Eigen::VectorXd ec = Eigen::VectorXd::Zero(p);
                ec[c] = e;
                hm(a, c) = (f(b + ea + ec) - f(b + ea - ec) - f(b - ea + ec) + f(b - ea - ec)) / (4 * e * e);
            }
        }
        const Eigen::VectorXd step = hm.ldlt().solve(-g);
        b += step;
        if (step.cwiseAbs().maxCoeff() < 1e-10) break;
    }
    return b;
}

// Profile maximizer over a 1-d grid.
inline double grid_argmax(const std::function<double(double)>& f, double lo, double hi, double step) {
    double best = lo, fbest = f(lo);
    const auto n = static_cast<long>(std::llround((hi - lo) / step));
    for (long k = 1; k <= n; ++k) {
        const double x = lo + static_cast<double>(k) * step;
        const double v = f(x);
        if (v > fbest) {
            fbest = v;
            best = x;
        }
    }
    return best;
}

inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                   double rel = 1e-5) {
    Eigen::VectorXd g(x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double e = rel * std::max(1.0, std::abs(x[j]));
        Eigen::VectorXd a = x, b = x;
        a[j] += e;
        b[j] -= e;
        g[j] = (f(a) - f(b)) / (2 * e);
    }
    return g;
}

inline Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double rel = 1e-5) {
    const Eigen::VectorXd f0 = f(x);
    Eigen::MatrixXd j(f0.size(), x.size());
    for (Eigen::Index c = 0; c < x.size(); ++c) {
        const double e = rel * std::max(1.0, std::abs(x[c]));
        Eigen::VectorXd a = x, b = x;
        a[c] += e;
        b[c] -= e;
        j.col(c) = (f(a) - f(b)) / (2 * e);
    }
    return j;
}

inline double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return (a - b).norm() / std::max(1e-12, b.norm());
}

// Nelson-Aalen increments keyed by event time.
inline std::map<double, double> nelson_aalen(const vcph::SurvivalDataset& d) {
    std::map<double, int> deaths;
    for (const auto& s : d.subjects())
        if (s.event && s.time <= d.tau()) ++deaths[s.time];
    std::map<double, double> out;
    for (const auto& [t, k] : deaths) {
        int at_risk = 0;
        for (const auto& s : d.subjects())
            if (s.time >= t) ++at_risk;
        out[t] = static_cast<double>(k) / at_risk;
    }
    return out;
}

struct Moments {
    Eigen::VectorXd mean;
    Eigen::VectorXd var;
};

// Two-pass weighted mean and biased variance of the rows of x.
inline Moments weighted_moments(const Eigen::MatrixXd& x, const std::vector<double>& w) {
    double sw = 0.0;
    for (double v : w) sw += v;
    Eigen::VectorXd m = Eigen::VectorXd::Zero(x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) m += w[static_cast<std::size_t>(i)] * x.row(i).transpose();
    m /= sw;
    Eigen::VectorXd v = Eigen::VectorXd::Zero(x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        v += w[static_cast<std::size_t>(i)] * (x.row(i).transpose() - m).cwiseAbs2();
    v /= sw;
    return {m, v};
}

inline double wmse(const Eigen::MatrixXd& est, const Eigen::MatrixXd& truth, const Eigen::VectorXd& a) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < est.rows(); ++k)
        for (Eigen::Index j = 0; j < est.cols(); ++j) s += a[j] * (est(k, j) - truth(k, j)) * (est(k, j) - truth(k, j));
    return s / static_cast<double>(est.rows());
}

struct InstanceOptions {
    std::size_t n = 10;
    Eigen::Index p = 2;
    bool ties = true;
    bool time_dependent = true;
    double w_lo = 0.0, w_hi = 1.0;
};

// Small random dataset with optional tied times and two-segment paths.
inline vcph::SurvivalDataset random_instance(std::mt19937_64& rng, const InstanceOptions& o) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> nz(0.0, 1.0);
    std::vector<vcph::Subject> subs;
    for (std::size_t i = 0; i < o.n; ++i) {
        vcph::Subject s;
        s.time = o.ties ? 0.25 * std::ceil(8.0 * u(rng) + 1e-9) : 0.1 + 2.0 * u(rng);
        s.event = u(rng) < 0.7;
        s.w = o.w_lo + (o.w_hi - o.w_lo) * u(rng);
        Eigen::VectorXd z0(o.p);
        for (Eigen::Index j = 0; j < o.p; ++j) z0[j] = nz(rng);
        if (o.time_dependent && u(rng) < 0.5) {
            Eigen::VectorXd z1(o.p);
            for (Eigen::Index j = 0; j < o.p; ++j) z1[j] = nz(rng);
            s.z = vcph::CovariatePath({{0.0, z0}, {0.3 + u(rng), z1}});
        } else {
            s.z = vcph::CovariatePath(z0);
        }
        subs.push_back(std::move(s));
    }
    subs.front().event = true;
    return vcph::SurvivalDataset(std::move(subs));
}

inline Eigen::VectorXd random_xi(std::mt19937_64& rng, Eigen::Index dim, double scale = 0.7) {
    std::normal_distribution<double> nz(0.0, scale);
    Eigen::VectorXd x(dim);
    for (Eigen::Index j = 0; j < dim; ++j) x[j] = nz(rng);
    return x;
}

} // namespace oracle
