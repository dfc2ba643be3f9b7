#include "vcph/local_plik.hpp"

#include "vcph/errors.hpp"
#include "vcph/io.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>

namespace vcph {

LocalParams LocalParams::zeros(Eigen::Index p) {
    return {Eigen::VectorXd::Zero(p), Eigen::VectorXd::Zero(p), 0.0};
}

Eigen::VectorXd LocalParams::pack(bool with_g) const {
    const auto p = delta.size();
    Eigen::VectorXd xi(2 * p + (with_g ? 1 : 0));
    xi.head(p) = delta;
    xi.segment(p, p) = eta;
    if (with_g) xi[2 * p] = gamma;
    return xi;
}

LocalParams LocalParams::unpack(const Eigen::VectorXd& xi, Eigen::Index p, bool with_g) {
    if (xi.size() != 2 * p + (with_g ? 1 : 0)) throw ArgumentError("packed parameter has wrong dimension");
    return {xi.head(p), xi.segment(p, p), with_g ? xi[2 * p] : 0.0};
}

ScalingMatrix::ScalingMatrix(Eigen::Index p, double h, bool with_g) {
    diag_ = Eigen::VectorXd::Constant(2 * p + (with_g ? 1 : 0), h);
    diag_.head(p).setOnes();
}

Eigen::MatrixXd ScalingMatrix::sandwich_inverse(const Eigen::MatrixXd& m) const {
    const Eigen::VectorXd inv = diag_.cwiseInverse();
    return inv.asDiagonal() * m * inv.asDiagonal();
}

LocalDesign::LocalDesign(const SurvivalDataset& d, double w0_, double h_, Kernel kernel_, bool with_g_)
    : w0(w0_), h(h_), kernel(kernel_), with_g(with_g_), p(d.p()) {
    if (!(h > 0.0) || !std::isfinite(h)) throw ArgumentError("bandwidth must be positive");
    if (!std::isfinite(w0)) throw ArgumentError("w0 must be finite");
    weights.resize(d.n());
    for (std::size_t i = 0; i < d.n(); ++i) weights[i] = eval_scaled(kernel, d.subject(i).w - w0, h);
}

void LocalDesign::xstar(const Subject& s, double t, Eigen::Ref<Eigen::VectorXd> out) const {
    const double dw = s.w - w0;
    const auto& z = s.z.at(t);
    if (transform)
        out.head(p) = (z - transform->center).cwiseQuotient(transform->scale);
    else
        out.head(p) = z;
    out.segment(p, p) = out.head(p) * dw;
    if (with_g) out[2 * p] = dw;
}

Eigen::VectorXd LocalDesign::xstar(const Subject& s, double t) const {
    Eigen::VectorXd out(dim());
    xstar(s, t, out);
    return out;
}

namespace {

// Streaming log-sum-exp accumulator: sums are kept relative to the running
// maximum exponent m, so additions never lose the dominant terms.
struct Accumulator {
    explicit Accumulator(Eigen::Index dim) : s1(Eigen::VectorXd::Zero(dim)), s2(Eigen::MatrixXd::Zero(dim, dim)) {}

    void reset() {
        m = -std::numeric_limits<double>::infinity();
        s0 = 0.0;
        s1.setZero();
        s2.setZero();
        finite = true;
    }

    void add(double e, const Eigen::VectorXd& x, EvalOrder order) {
        if (!std::isfinite(e)) {
            finite = false;
            return;
        }
        if (e > m) {
            const double r = std::exp(m - e);
            s0 *= r;
            if (order != EvalOrder::value) s1 *= r;
            if (order == EvalOrder::hessian) s2.triangularView<Eigen::Lower>() *= r;
            m = e;
        }
        const double c = std::exp(e - m);
        s0 += c;
        if (order != EvalOrder::value) s1.noalias() += c * x;
        if (order == EvalOrder::hessian) s2.selfadjointView<Eigen::Lower>().rankUpdate(x, c);
    }

    double m = -std::numeric_limits<double>::infinity();
    double s0 = 0.0;
    Eigen::VectorXd s1;
    Eigen::MatrixXd s2; // lower triangle only
    bool finite = true;
};

// Visits event groups in descending time. Within one interval between
// covariate breakpoints every path is constant, so the risk set grows by
// additions only as time decreases.
template <class OnGroup>
void sweep_risk_sets(const SurvivalDataset& d, const LocalDesign& des, const Eigen::VectorXd& xi, EvalOrder order,
                     OnGroup&& on_group) {
    const auto groups = d.event_groups();
    const auto order_desc = d.by_time_desc();
    const auto bps = d.breakpoints();
    Accumulator acc(des.dim());
    Eigen::VectorXd x(des.dim());

    std::ptrdiff_t gi = static_cast<std::ptrdiff_t>(groups.size()) - 1;
    while (gi >= 0) {
        const double t_top = groups[static_cast<std::size_t>(gi)].time;
        const auto k = std::upper_bound(bps.begin(), bps.end(), t_top) - bps.begin();
        const double interval_start = k == 0 ? 0.0 : bps[static_cast<std::size_t>(k - 1)];
        acc.reset();
        std::size_t pos = 0;
        for (; gi >= 0 && groups[static_cast<std::size_t>(gi)].time >= interval_start; --gi) {
            const auto& g = groups[static_cast<std::size_t>(gi)];
            while (pos < order_desc.size() && d.subject(order_desc[pos]).time >= g.time) {
                const auto j = order_desc[pos++];
                const double wj = des.weights[j];
                if (!(wj > 0.0)) continue;
                des.xstar(d.subject(j), g.time, x);
                acc.add(xi.dot(x) + std::log(wj), x, order);
            }
            on_group(g, acc);
        }
    }
}

[[noreturn]] void throw_degenerate(const SurvivalDataset& d, const LocalDesign& des, double t) {
    (void)d;
    throw DegenerateNeighborhood(des.w0, t,
                                 "degenerate neighborhood at w0=" + io::format_double(des.w0) +
                                     ": no event with positive kernel weight (first zero-weight risk set at t=" +
                                     io::format_double(t) + ")");
}

} // namespace

LocalEval evaluate_local(const SurvivalDataset& d, const LocalDesign& des, const Eigen::VectorXd& xi,
                         EvalOrder order) {
    const auto dim = des.dim();
    if (xi.size() != dim) throw ArgumentError("parameter dimension does not match design");
    LocalEval out;
    if (order != EvalOrder::value) out.score = Eigen::VectorXd::Zero(dim);
    if (order == EvalOrder::hessian) out.hessian = Eigen::MatrixXd::Zero(dim, dim);
    if (d.event_groups().empty()) return out;

    bool contributed = false;
    bool finite = true;
    double first_empty = std::numeric_limits<double>::quiet_NaN();
    Eigen::VectorXd x(dim);
    Eigen::VectorXd xbar(dim);
    sweep_risk_sets(d, des, xi, order, [&](const EventGroup& g, const Accumulator& acc) {
        if (!acc.finite) {
            finite = false;
            return;
        }
        if (acc.s0 <= 0.0) {
            first_empty = g.time;
            return;
        }
        double sum_k = 0.0;
        const double lse = acc.m + std::log(acc.s0);
        for (auto i : g.subjects) {
            const double ki = des.weights[i];
            if (!(ki > 0.0)) continue;
            des.xstar(d.subject(i), g.time, x);
            out.loglik += ki * (xi.dot(x) - lse);
            if (order != EvalOrder::value) out.score.noalias() += ki * x;
            sum_k += ki;
        }
        if (sum_k == 0.0) return;
        contributed = true;
        if (order == EvalOrder::value) return;
        xbar = acc.s1 / acc.s0;
        out.score.noalias() -= sum_k * xbar;
        if (order == EvalOrder::hessian) {
            out.hessian.triangularView<Eigen::Lower>() -= (sum_k / acc.s0) * acc.s2;
            out.hessian.selfadjointView<Eigen::Lower>().rankUpdate(xbar, sum_k);
        }
    });

    if (!finite) {
        out.loglik = -std::numeric_limits<double>::infinity();
        return out;
    }
    if (!contributed) throw_degenerate(d, des, std::isnan(first_empty) ? d.event_groups().front().time : first_empty);

    const double inv_n = 1.0 / static_cast<double>(d.n());
    out.loglik *= inv_n;
    if (order != EvalOrder::value) out.score *= inv_n;
    if (order == EvalOrder::hessian) {
        out.hessian *= inv_n;
        out.hessian.triangularView<Eigen::StrictlyUpper>() = out.hessian.transpose();
    }
    return out;
}

double local_loglik(const SurvivalDataset& d, const LocalDesign& des, const LocalParams& xi) {
    return evaluate_local(d, des, xi.pack(des.with_g), EvalOrder::value).loglik;
}

Eigen::VectorXd local_score(const SurvivalDataset& d, const LocalDesign& des, const LocalParams& xi) {
    auto ev = evaluate_local(d, des, xi.pack(des.with_g), EvalOrder::score);
    if (!std::isfinite(ev.loglik)) throw NumericalError("local score overflow");
    return ev.score;
}

Eigen::MatrixXd local_hessian(const SurvivalDataset& d, const LocalDesign& des, const LocalParams& xi) {
    auto ev = evaluate_local(d, des, xi.pack(des.with_g), EvalOrder::hessian);
    if (!std::isfinite(ev.loglik)) throw NumericalError("local Hessian overflow");
    return ev.hessian;
}

std::vector<RiskSetMoments> risk_set_moments(const SurvivalDataset& d, const LocalDesign& des,
                                             const Eigen::VectorXd& xi, bool second_order) {
    const auto order = second_order ? EvalOrder::hessian : EvalOrder::score;
    std::vector<RiskSetMoments> out(d.event_groups().size());
    const auto* base = d.event_groups().data();
    bool finite = true;
    sweep_risk_sets(d, des, xi, order, [&](const EventGroup& g, const Accumulator& acc) {
        if (!acc.finite) finite = false;
        auto& m = out[static_cast<std::size_t>(&g - base)];
        m.time = g.time;
        m.log_scale = acc.s0 > 0.0 ? acc.m : 0.0;
        m.s0 = acc.s0;
        m.s1 = acc.s1;
        if (second_order) {
            m.s2 = acc.s2;
            m.s2.triangularView<Eigen::StrictlyUpper>() = m.s2.transpose();
        }
    });
    if (!finite) throw NumericalError("risk-set moments overflow");
    return out;
}

void check_neighborhood(const SurvivalDataset& d, const LocalDesign& des) {
    const double radius = effective_radius(des.kernel) * des.h;
    Eigen::Index count = 0;
    for (const auto& g : d.event_groups())
        for (auto i : g.subjects)
            if (std::abs(d.subject(i).w - des.w0) <= radius && des.weights[i] > 0.0) ++count;
    if (count < des.dim()) {
        const double t = d.event_groups().empty() ? 0.0 : d.event_groups().front().time;
        throw DegenerateNeighborhood(des.w0, t,
                                     "degenerate neighborhood at w0=" + io::format_double(des.w0) + ": " +
                                         std::to_string(count) + " events within " + io::format_double(radius) +
                                         ", need " + std::to_string(des.dim()));
    }
}

Eigen::VectorXd newton_increment(const Eigen::VectorXd& score, const Eigen::MatrixXd& hessian,
                                 const ScalingMatrix& scaling, double ridge) {
    const Eigen::VectorXd inv = scaling.diagonal().cwiseInverse();
    // information and score in zeta = H xi coordinates
    Eigen::MatrixXd info = -(inv.asDiagonal() * hessian * inv.asDiagonal());
    const Eigen::VectorXd rhs = inv.cwiseProduct(score);

    auto well_posed = [](const Eigen::LDLT<Eigen::MatrixXd>& f) {
        if (f.info() != Eigen::Success) return false;
        const auto dvec = f.vectorD();
        const double dmax = dvec.cwiseAbs().maxCoeff();
        return dmax > 0.0 && dvec.minCoeff() > 1e-13 * dmax;
    };

    Eigen::LDLT<Eigen::MatrixXd> f(info);
    if (!well_posed(f)) {
        const double scale = info.cwiseAbs().maxCoeff();
        if (!(scale > 0.0) || !std::isfinite(scale)) throw NonIdentifiableFit("local information matrix is zero");
        info.diagonal().array() += ridge * scale;
        f.compute(info);
        if (!well_posed(f)) throw NonIdentifiableFit("local information matrix is singular after ridge");
    }
    const Eigen::VectorXd step_zeta = f.solve(rhs);
    return inv.cwiseProduct(step_zeta);
}

NewtonResult newton_fit(const SurvivalDataset& d, const LocalDesign& des, const LocalParams& init,
                        const NewtonOptions& opts) {
    check_neighborhood(d, des);
    const auto scaling = des.scaling();
    const Eigen::VectorXd inv = scaling.diagonal().cwiseInverse();

    Eigen::VectorXd xi = init.pack(des.with_g);
    auto ev = evaluate_local(d, des, xi, EvalOrder::hessian);
    if (!std::isfinite(ev.loglik)) {
        xi.setZero();
        ev = evaluate_local(d, des, xi, EvalOrder::hessian);
    }

    NewtonResult res;
    for (int iter = 0;; ++iter) {
        const double grad_norm = inv.cwiseProduct(ev.score).cwiseAbs().maxCoeff();
        if (grad_norm < opts.tol) {
            res.converged = true;
            res.iterations = iter;
            break;
        }
        if (iter >= opts.max_iter) {
            res.iterations = iter;
            break;
        }
        const Eigen::VectorXd step = newton_increment(ev.score, ev.hessian, scaling, opts.ridge);
        const double slack = 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(ev.loglik));
        double t = 1.0;
        bool accepted = false;
        Eigen::VectorXd cand(xi.size());
        for (int k = 0; k <= opts.max_halvings; ++k, t *= 0.5) {
            cand = xi + t * step;
            const double ll = evaluate_local(d, des, cand, EvalOrder::value).loglik;
            if (std::isfinite(ll) && ll >= ev.loglik - slack) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            res.iterations = iter;
            break;
        }
        xi = cand;
        ev = evaluate_local(d, des, xi, EvalOrder::hessian);
    }
    res.params = LocalParams::unpack(xi, des.p, des.with_g);
    res.loglik = ev.loglik;
    return res;
}

} // namespace vcph
