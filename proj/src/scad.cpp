#include "vcph/scad.hpp"

#include "vcph/errors.hpp"
#include "vcph/io.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>

namespace vcph {

void PenaltyConfig::validate() const {
    if (!(rho > 0.0) || !std::isfinite(rho)) throw ArgumentError("rho must be positive");
    if (!(a > 2.0) || !std::isfinite(a)) throw ArgumentError("SCAD shape a must exceed 2");
    if (!(threshold > 0.0 && threshold < 1.0)) throw ArgumentError("vote threshold must lie in (0, 1)");
    if (!(zero_tol > 0.0) || !std::isfinite(zero_tol)) throw ArgumentError("zero_tol must be positive");
}

double scad_deriv(double theta, double rho, double a) {
    if (!(a > 2.0)) throw ArgumentError("SCAD shape a must exceed 2");
    if (!(rho > 0.0)) throw ArgumentError("rho must be positive");
    if (!(theta >= 0.0)) throw ArgumentError("SCAD argument must be nonnegative");
    if (theta <= rho) return rho;
    return std::max(a * rho - theta, 0.0) / (a - 1.0);
}

double scad_penalty(double theta, double rho, double a) {
    if (!(a > 2.0)) throw ArgumentError("SCAD shape a must exceed 2");
    if (!(rho > 0.0)) throw ArgumentError("rho must be positive");
    if (!(theta >= 0.0)) throw ArgumentError("SCAD argument must be nonnegative");
    if (theta <= rho) return rho * theta;
    if (theta <= a * rho) return -(theta * theta - 2.0 * a * rho * theta + rho * rho) / (2.0 * (a - 1.0));
    return 0.5 * (a + 1.0) * rho * rho;
}

Standardization local_standardize(const SurvivalDataset& d, const LocalDesign& des) {
    const auto p = d.p();
    Standardization s{Eigen::VectorXd::Zero(p), Eigen::VectorXd::Zero(p)};
    Eigen::VectorXd m2 = Eigen::VectorXd::Zero(p);
    double total = 0.0;
    // weighted incremental mean / sum of squares
    for (std::size_t i = 0; i < d.n(); ++i) {
        const double w = des.weights[i];
        if (!(w > 0.0)) continue;
        const Eigen::VectorXd z = d.subject(i).z.at(0.0);
        total += w;
        const Eigen::VectorXd diff = z - s.ave;
        s.ave += (w / total) * diff;
        m2 += w * diff.cwiseProduct(z - s.ave);
    }
    if (!(total > 0.0)) throw DegenerateNeighborhood(des.w0, 0.0, "no kernel mass at w0=" + io::format_double(des.w0));
    for (Eigen::Index j = 0; j < p; ++j) {
        const double var = m2[j] / total;
        if (var <= 1e-12)
            throw ConstantCovariate(static_cast<int>(j), "covariate " + std::to_string(j + 1) +
                                                             " is locally constant at w0=" + io::format_double(des.w0));
        s.sd[j] = std::sqrt(var);
    }
    return s;
}

Eigen::VectorXd penalty_scale(const SurvivalDataset& d, const LocalDesign& des) {
    const auto dim = des.dim();
    const auto p = des.p;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim), m2 = Eigen::VectorXd::Zero(dim);
    double total = 0.0;
    Eigen::VectorXd x(dim);
    for (std::size_t i = 0; i < d.n(); ++i) {
        const double w = des.weights[i];
        if (!(w > 0.0)) continue;
        des.xstar(d.subject(i), 0.0, x);
        total += w;
        const Eigen::VectorXd diff = x - mean;
        mean += (w / total) * diff;
        m2 += w * diff.cwiseProduct(x - mean);
    }
    Eigen::VectorXd c = Eigen::VectorXd::Ones(dim);
    if (!(total > 0.0)) return c;
    for (Eigen::Index j = p; j < dim; ++j) {
        const double sd = std::sqrt(std::max(m2[j] / total, 0.0));
        if (sd > 0.0) c[j] = sd;
    }
    return c;
}

namespace {

double penalty_sum(const Eigen::VectorXd& xi, const Eigen::VectorXd& c, const PenaltyConfig& cfg) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < xi.size(); ++j) s += scad_penalty(c[j] * std::abs(xi[j]), cfg.rho, cfg.a);
    return s;
}

// -(hess - diag(sigma))^-1 grad on the active set, in H-rescaled coordinates.
Eigen::VectorXd lqa_increment(const Eigen::VectorXd& grad, const Eigen::MatrixXd& hess, const Eigen::VectorXd& scale,
                              double ridge) {
    const Eigen::VectorXd inv = scale.cwiseInverse();
    const Eigen::MatrixXd info = -(inv.asDiagonal() * hess * inv.asDiagonal());
    const Eigen::VectorXd rhs = inv.cwiseProduct(grad);
    Eigen::LDLT<Eigen::MatrixXd> f(info);
    auto ok = [](const Eigen::LDLT<Eigen::MatrixXd>& ff) {
        if (ff.info() != Eigen::Success) return false;
        const auto dv = ff.vectorD();
        const double dmax = dv.cwiseAbs().maxCoeff();
        return dmax > 0.0 && dv.minCoeff() > 1e-13 * dmax;
    };
    if (!ok(f)) {
        const double m = info.cwiseAbs().maxCoeff();
        if (!(m > 0.0)) throw NonIdentifiableFit("penalized fit: zero information");
        Eigen::MatrixXd r = info;
        r.diagonal().array() += ridge * m;
        f.compute(r);
        if (!ok(f)) throw NonIdentifiableFit("penalized fit: singular information after ridge");
    }
    return inv.cwiseProduct(f.solve(rhs));
}

} // namespace

PenalizedFit penalized_fit(const SurvivalDataset& d, const LocalDesign& des, const PenaltyConfig& cfg,
                           const LocalParams& init, const LqaOptions& opts) {
    cfg.validate();
    check_neighborhood(d, des);
    const auto dim = des.dim();
    const Eigen::VectorXd scale = des.scaling().diagonal();
    const Eigen::VectorXd pc = penalty_scale(d, des);

    Eigen::VectorXd xi = init.pack(des.with_g);
    std::vector<bool> zero(static_cast<std::size_t>(dim), false);
    auto freeze = [&](Eigen::VectorXd& v) {
        bool changed = false;
        for (Eigen::Index j = 0; j < dim; ++j) {
            if (!zero[static_cast<std::size_t>(j)] && pc[j] * std::abs(v[j]) < cfg.zero_tol) {
                zero[static_cast<std::size_t>(j)] = true;
                changed = true;
            }
            if (zero[static_cast<std::size_t>(j)]) v[j] = 0.0;
        }
        return changed;
    };
    freeze(xi);

    PenalizedFit out;
    auto ev = evaluate_local(d, des, xi, EvalOrder::hessian);
    if (!std::isfinite(ev.loglik)) {
        xi.setZero();
        std::fill(zero.begin(), zero.end(), true);
        ev = evaluate_local(d, des, xi, EvalOrder::hessian);
    }
    double q = ev.loglik - penalty_sum(xi, pc, cfg);

    for (int iter = 0;; ++iter) {
        std::vector<Eigen::Index> active;
        for (Eigen::Index j = 0; j < dim; ++j)
            if (!zero[static_cast<std::size_t>(j)]) active.push_back(j);
        if (active.empty()) {
            out.converged = true;
            out.iterations = iter;
            break;
        }
        if (iter >= opts.max_iter) {
            out.iterations = iter;
            break;
        }
        const auto na = static_cast<Eigen::Index>(active.size());
        Eigen::VectorXd grad(na), sc(na);
        Eigen::MatrixXd hess(na, na);
        for (Eigen::Index r = 0; r < na; ++r) {
            const auto j = active[static_cast<std::size_t>(r)];
            const double theta = std::abs(xi[j]);
            const double sigma = pc[j] * scad_deriv(pc[j] * theta, cfg.rho, cfg.a) / theta;
            grad[r] = ev.score[j] - sigma * xi[j];
            sc[r] = scale[j];
            for (Eigen::Index c = 0; c < na; ++c) hess(r, c) = ev.hessian(j, active[static_cast<std::size_t>(c)]);
            hess(r, r) -= sigma;
        }
        const Eigen::VectorXd step = lqa_increment(grad, hess, sc, opts.ridge);

        const double slack = 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(q));
        Eigen::VectorXd cand = xi;
        double q_new = q;
        bool accepted = false;
        double t = 1.0;
        for (int k = 0; k <= opts.max_halvings; ++k, t *= 0.5) {
            cand = xi;
            for (Eigen::Index r = 0; r < na; ++r) cand[active[static_cast<std::size_t>(r)]] += t * step[r];
            const double ll = evaluate_local(d, des, cand, EvalOrder::value).loglik;
            if (!std::isfinite(ll)) continue;
            q_new = ll - penalty_sum(cand, pc, cfg);
            if (q_new >= q - slack) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            out.iterations = iter;
            break;
        }
        const bool froze = freeze(cand);
        const double change = scale.cwiseProduct(cand - xi).cwiseAbs().maxCoeff();
        xi = cand;
        ev = evaluate_local(d, des, xi, EvalOrder::hessian);
        q = ev.loglik - penalty_sum(xi, pc, cfg);
        if (!froze && change < opts.tol) {
            out.converged = true;
            out.iterations = iter + 1;
            break;
        }
    }
    out.xi = LocalParams::unpack(xi, des.p, des.with_g);
    out.zero = std::move(zero);
    out.objective = q;
    return out;
}

std::vector<Eigen::Index> SelectionResult::kept_at(double thr) const {
    std::vector<Eigen::Index> k;
    for (Eigen::Index j = 0; j < p; ++j)
        if (zero_fraction[j] < thr) k.push_back(j);
    return k;
}

bool SelectionResult::g_kept_at(double thr) const { return zero_fraction[2 * p] < thr; }

SelectionResult select_variables(const SurvivalDataset& d, const Grid& grid, double h, Kernel kernel,
                                 const PenaltyConfig& cfg, const CurveOptions& opts) {
    cfg.validate();
    grid.validate();
    if (!(h > 0.0) || !std::isfinite(h)) throw ArgumentError("bandwidth must be positive");
    const auto p = d.p();
    const auto dim = 2 * p + 1;
    const auto k_pts = static_cast<Eigen::Index>(grid.size());

    SelectionResult sel;
    sel.grid = grid;
    sel.h = h;
    sel.kernel = kernel;
    sel.p = p;
    sel.config = cfg;
    sel.degenerate.assign(grid.size(), false);
    sel.zero_pattern.setConstant(k_pts, dim, false);
    sel.delta.setConstant(k_pts, p, std::numeric_limits<double>::quiet_NaN());

    LocalParams warm = LocalParams::zeros(p);
    for (Eigen::Index k = 0; k < k_pts; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        LocalDesign des(d, grid.points[ku], h, kernel, true);
        try {
            const auto st = local_standardize(d, des);
            des.transform = st.transform();
            const auto init = newton_fit(d, des, warm, opts.newton);
            if (init.converged) warm = init.params;
            const auto pf = penalized_fit(d, des, cfg, init.params);
            for (Eigen::Index j = 0; j < dim; ++j) sel.zero_pattern(k, j) = pf.zero[static_cast<std::size_t>(j)];
            sel.delta.row(k) = pf.xi.delta.cwiseQuotient(st.sd).transpose();
        } catch (const NumericalError&) {
            sel.degenerate[ku] = true;
        } catch (const ConstantCovariate&) {
            sel.degenerate[ku] = true;
        }
    }

    std::size_t bad = 0;
    std::vector<double> failing;
    for (std::size_t k = 0; k < grid.size(); ++k)
        if (sel.degenerate[k]) {
            ++bad;
            failing.push_back(grid.points[k]);
        }
    if (static_cast<double>(bad) > opts.max_degenerate_fraction * static_cast<double>(grid.size()))
        throw BandwidthTooSmall(failing, "bandwidth too small: " + std::to_string(bad) + " of " +
                                             std::to_string(grid.size()) + " grid points are degenerate");

    sel.zero_fraction = Eigen::VectorXd::Zero(dim);
    const double good = static_cast<double>(grid.size() - bad);
    for (Eigen::Index k = 0; k < k_pts; ++k) {
        if (sel.degenerate[static_cast<std::size_t>(k)]) continue;
        for (Eigen::Index j = 0; j < dim; ++j)
            if (sel.zero_pattern(k, j)) sel.zero_fraction[j] += 1.0;
    }
    sel.zero_fraction /= good;
    sel.kept = sel.kept_at(cfg.threshold);
    sel.g_kept = sel.g_kept_at(cfg.threshold);
    return sel;
}

std::optional<CurveEstimate> refit_selected(const SurvivalDataset& d, const SelectionResult& sel, FitMethod method,
                                            const CurveOptions& opts) {
    if (sel.kept.empty()) return std::nullopt;
    const auto reduced = d.with_covariates(sel.kept);
    if (method == FitMethod::full) return fit_full(reduced, sel.grid, sel.h, sel.kernel, sel.g_kept, opts);
    return fit_onestep(reduced, sel.grid, sel.h, sel.kernel, sel.g_kept, opts);
}

} // namespace vcph
