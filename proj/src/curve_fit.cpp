#include "vcph/curve_fit.hpp"

#include "vcph/errors.hpp"
#include "vcph/inference.hpp"
#include "vcph/io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace vcph {

std::string_view method_name(FitMethod m) { return m == FitMethod::full ? "full" : "onestep"; }

std::vector<std::size_t> Grid::default_anchors(std::size_t n, std::size_t n_anchors) {
    std::vector<std::size_t> out;
    if (n == 0 || n_anchors == 0) return out;
    for (std::size_t j = 0; j < n_anchors; ++j) {
        // 1-based position round(n (2j + 1) / (2 n_anchors))
        std::size_t pos = (n * (2 * j + 1) + n_anchors) / (2 * n_anchors);
        pos = std::clamp<std::size_t>(pos, 1, n);
        out.push_back(pos - 1);
    }
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

Grid Grid::equispaced(double lo, double hi, std::size_t n, std::size_t n_anchors) {
    if (n == 0) throw ArgumentError("grid needs at least one point");
    if (!(hi >= lo)) throw ArgumentError("grid range is empty");
    if (n > 1 && !(hi > lo)) throw ArgumentError("grid range must have positive width");
    Grid g;
    g.points.resize(n);
    for (std::size_t k = 0; k < n; ++k)
        g.points[k] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1);
    g.anchors = default_anchors(n, n_anchors);
    return g;
}

void Grid::validate() const {
    if (points.empty()) throw ArgumentError("grid is empty");
    for (std::size_t k = 0; k < points.size(); ++k) {
        if (!std::isfinite(points[k])) throw ArgumentError("grid has a non-finite point");
        if (k > 0 && !(points[k] > points[k - 1])) throw ArgumentError("grid points must be strictly ascending");
    }
    if (anchors.empty()) throw ArgumentError("grid needs at least one anchor");
    for (std::size_t k = 0; k < anchors.size(); ++k) {
        if (anchors[k] >= points.size()) throw ArgumentError("anchor index out of range");
        if (k > 0 && !(anchors[k] > anchors[k - 1])) throw ArgumentError("anchors must be strictly ascending");
    }
}

std::size_t CurveEstimate::degenerate_count() const {
    return static_cast<std::size_t>(std::count_if(points.begin(), points.end(), [](const PointFit& f) { return f.degenerate; }));
}

namespace {

// Bracketing non-degenerate points for w and the linear weight of the right one.
struct Bracket {
    std::size_t left, right;
    double t;
};

Bracket bracket(const CurveEstimate& c, double w) {
    std::vector<std::size_t> valid;
    valid.reserve(c.points.size());
    for (std::size_t k = 0; k < c.points.size(); ++k)
        if (!c.points[k].degenerate) valid.push_back(k);
    if (valid.empty()) throw NumericalError("curve has no estimated points");
    const auto& gp = c.grid.points;
    if (w <= gp[valid.front()]) return {valid.front(), valid.front(), 0.0};
    if (w >= gp[valid.back()]) return {valid.back(), valid.back(), 0.0};
    auto it = std::upper_bound(valid.begin(), valid.end(), w, [&](double v, std::size_t k) { return v < gp[k]; });
    const auto r = *it;
    const auto l = *std::prev(it);
    return {l, r, (w - gp[l]) / (gp[r] - gp[l])};
}

} // namespace

Eigen::VectorXd CurveEstimate::beta_at(double w) const {
    const auto b = bracket(*this, w);
    return (1.0 - b.t) * points[b.left].xi.delta + b.t * points[b.right].xi.delta;
}

double CurveEstimate::g_at(double w) const {
    const auto b = bracket(*this, w);
    const double gl = g[b.left].value_or(0.0);
    const double gr = g[b.right].value_or(0.0);
    return (1.0 - b.t) * gl + b.t * gr;
}

namespace {

CurveEstimate empty_curve(const SurvivalDataset& d, const Grid& grid, double h, Kernel kernel, bool with_g) {
    grid.validate();
    if (!(h > 0.0) || !std::isfinite(h)) throw ArgumentError("bandwidth must be positive");
    CurveEstimate c;
    c.grid = grid;
    c.h = h;
    c.kernel = kernel;
    c.p = d.p();
    c.with_g = with_g;
    c.points.resize(grid.size());
    for (auto& pt : c.points) pt.xi = LocalParams::zeros(d.p());
    return c;
}

void finish_curve(CurveEstimate& c, const CurveOptions& opts) {
    const auto bad = c.degenerate_count();
    if (static_cast<double>(bad) > opts.max_degenerate_fraction * static_cast<double>(c.points.size())) {
        std::vector<double> failing;
        for (std::size_t k = 0; k < c.points.size(); ++k)
            if (c.points[k].degenerate) failing.push_back(c.grid.points[k]);
        throw BandwidthTooSmall(failing, "bandwidth too small: " + std::to_string(bad) + " of " +
                                             std::to_string(c.points.size()) + " grid points are degenerate");
    }
    c.g = reconstruct_g(c);
}

// Full fit at one point; returns false when the point is degenerate.
bool fit_point(const SurvivalDataset& d, const LocalDesign& des, const LocalParams& init, const NewtonOptions& opts,
               PointFit& out) {
    try {
        auto r = newton_fit(d, des, init, opts);
        out.xi = std::move(r.params);
        out.converged = r.converged;
        out.iterations = r.iterations;
        out.method = FitMethod::full;
        out.degenerate = false;
        return true;
    } catch (const NumericalError&) {
        out.xi = LocalParams::zeros(des.p);
        out.degenerate = true;
        out.converged = false;
        out.method = FitMethod::full;
        return false;
    }
}

} // namespace

CurveEstimate fit_full(const SurvivalDataset& d, const Grid& grid, double h, Kernel kernel, bool with_g,
                       const CurveOptions& opts) {
    auto c = empty_curve(d, grid, h, kernel, with_g);
    LocalParams warm = LocalParams::zeros(d.p());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        LocalDesign des(d, grid.points[k], h, kernel, with_g);
        if (fit_point(d, des, warm, opts.newton, c.points[k]) && c.points[k].converged) warm = c.points[k].xi;
    }
    finish_curve(c, opts);
    return c;
}

Eigen::VectorXd one_step_update(const Eigen::VectorXd& xi, const Eigen::VectorXd& score,
                                const Eigen::MatrixXd& hessian, const ScalingMatrix& scaling, double ridge) {
    return xi + newton_increment(score, hessian, scaling, ridge);
}

LocalParams one_step(const SurvivalDataset& d, const LocalDesign& des, const LocalParams& init, double ridge) {
    const Eigen::VectorXd xi = init.pack(des.with_g);
    const auto ev = evaluate_local(d, des, xi, EvalOrder::hessian);
    if (!std::isfinite(ev.loglik)) throw NumericalError("local likelihood overflow at the one-step initial value");
    return LocalParams::unpack(one_step_update(xi, ev.score, ev.hessian, des.scaling(), ridge), des.p, des.with_g);
}

std::vector<Chain> propagation_chains(std::size_t n_points, const std::vector<std::size_t>& anchors) {
    if (anchors.empty()) throw ArgumentError("propagation needs at least one anchor");
    std::vector<Chain> chains;
    for (std::size_t a = 0; a < anchors.size(); ++a) {
        const auto at = anchors[a];
        // territory: points closer to this anchor than to its neighbours, ties to the left anchor
        std::size_t lo = 0;
        if (a > 0) {
            const auto prev = anchors[a - 1];
            lo = prev + (at - prev) / 2 + 1; // midpoint belongs to prev
        }
        std::size_t hi = n_points - 1;
        if (a + 1 < anchors.size()) {
            const auto next = anchors[a + 1];
            hi = at + (next - at) / 2; // midpoint stays with this (left) anchor
        }
        if (at > lo) {
            Chain left;
            for (std::size_t k = at; k-- > lo;) {
                left.points.push_back(k);
                left.seeds.push_back(k + 1);
            }
            chains.push_back(std::move(left));
        }
        if (hi > at) {
            Chain right;
            for (std::size_t k = at + 1; k <= hi; ++k) {
                right.points.push_back(k);
                right.seeds.push_back(k - 1);
            }
            chains.push_back(std::move(right));
        }
    }
    return chains;
}

CurveEstimate fit_onestep(const SurvivalDataset& d, const Grid& grid, double h, Kernel kernel, bool with_g,
                          const CurveOptions& opts) {
    auto c = empty_curve(d, grid, h, kernel, with_g);
    LocalParams warm = LocalParams::zeros(d.p());
    for (auto a : grid.anchors) {
        LocalDesign des(d, grid.points[a], h, kernel, with_g);
        if (fit_point(d, des, warm, opts.newton, c.points[a]) && c.points[a].converged) warm = c.points[a].xi;
    }
    for (const auto& chain : propagation_chains(grid.size(), grid.anchors)) {
        for (std::size_t s = 0; s < chain.points.size(); ++s) {
            const auto k = chain.points[s];
            const auto& seed = c.points[chain.seeds[s]];
            LocalDesign des(d, grid.points[k], h, kernel, with_g);
            auto& out = c.points[k];
            if (!seed.degenerate) {
                try {
                    check_neighborhood(d, des);
                    auto xi = one_step(d, des, seed.xi, opts.newton.ridge);
                    if (xi.pack(with_g).allFinite()) {
                        out.xi = std::move(xi);
                        out.converged = true;
                        out.iterations = 1;
                        out.method = FitMethod::one_step;
                        out.degenerate = false;
                        continue;
                    }
                } catch (const DegenerateNeighborhood&) {
                    out.xi = LocalParams::zeros(d.p());
                    out.degenerate = true;
                    out.method = FitMethod::one_step;
                    continue;
                } catch (const NumericalError&) {
                }
            }
            fit_point(d, des, LocalParams::zeros(d.p()), opts.newton, out);
        }
    }
    finish_curve(c, opts);
    return c;
}

std::vector<std::optional<double>> reconstruct_g(const CurveEstimate& curve) {
    const auto n = curve.points.size();
    std::vector<std::optional<double>> g(n);
    std::optional<std::size_t> last;
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        if (curve.points[k].degenerate) continue;
        if (last && curve.with_g) {
            const auto j = *last;
            acc += 0.5 * (curve.points[j].xi.gamma + curve.points[k].xi.gamma) *
                   (curve.grid.points[k] - curve.grid.points[j]);
        }
        g[k] = acc;
        last = k;
    }
    return g;
}

namespace {

// Sum over held-out subjects and held-out event times s of
// (N_i(s) - E N_i(s))^2, with E N_i(s) = sum_{u <= min(s, X_i)} exp(lp_i(u)) dLambda0(u).
double fold_prediction_error(const SurvivalDataset& test, const CurveEstimate& curve, const BaselineHazard& bh) {
    const auto ev = event_times(test);
    std::vector<double> s_times;
    for (const auto& e : ev) s_times.push_back(e.time);
    double err = 0.0;
    std::vector<double> cum(bh.jump_times.size());
    for (std::size_t i = 0; i < test.n(); ++i) {
        const auto& subj = test.subject(i);
        const Eigen::VectorXd beta = curve.beta_at(subj.w);
        const double gi = curve.with_g ? curve.g_at(subj.w) : 0.0;
        double running = 0.0;
        for (std::size_t j = 0; j < bh.jump_times.size(); ++j) {
            const double u = bh.jump_times[j];
            if (u <= subj.time) running += std::exp(beta.dot(subj.z.at(u)) + gi) * bh.jump_sizes[j];
            cum[j] = running;
        }
        for (double s : s_times) {
            const double n_is = (subj.event && subj.time <= s && subj.time <= test.tau()) ? 1.0 : 0.0;
            const auto it = std::upper_bound(bh.jump_times.begin(), bh.jump_times.end(), s);
            const double en = it == bh.jump_times.begin() ? 0.0 : cum[static_cast<std::size_t>(it - bh.jump_times.begin() - 1)];
            err += (n_is - en) * (n_is - en);
        }
    }
    return err;
}

} // namespace

CvResult cv_bandwidth(const SurvivalDataset& d, const Grid& grid, const std::vector<double>& candidates, Kernel kernel,
                      const CvOptions& opts) {
    if (candidates.empty()) throw ArgumentError("cv needs at least one candidate bandwidth");
    if (opts.folds < 2) throw ArgumentError("cv needs at least 2 folds");
    if (opts.folds > d.n()) throw ArgumentError("more folds than subjects");
    for (double h : candidates)
        if (!(h > 0.0) || !std::isfinite(h)) throw ArgumentError("candidate bandwidths must be positive");

    std::vector<std::vector<std::size_t>> train(opts.folds), test(opts.folds);
    for (std::size_t i = 0; i < d.n(); ++i)
        for (std::size_t k = 0; k < opts.folds; ++k) (i % opts.folds == k ? test : train)[k].push_back(i);

    CvResult res;
    res.candidates = candidates;
    std::vector<bool> skip(opts.folds, false);
    for (std::size_t k = 0; k < opts.folds; ++k) {
        const auto t = d.subset(test[k]);
        if (t.event_count() == 0) {
            skip[k] = true;
            res.warnings.push_back("fold " + std::to_string(k + 1) + " has no events; skipped");
        }
    }
    if (std::all_of(skip.begin(), skip.end(), [](bool b) { return b; }))
        throw NumericalError("cross-validation: every fold was skipped");

    for (double h : candidates) {
        double total = 0.0;
        std::size_t used = 0;
        bool failed = false;
        for (std::size_t k = 0; k < opts.folds && !failed; ++k) {
            if (skip[k]) continue;
            const auto tr = d.subset(train[k]);
            const auto te = d.subset(test[k]);
            try {
                const auto curve = opts.method == FitMethod::full ? fit_full(tr, grid, h, kernel, true, opts.curve)
                                                                  : fit_onestep(tr, grid, h, kernel, true, opts.curve);
                const auto bh = breslow_cumhaz(tr, curve);
                total += fold_prediction_error(te, curve, bh);
                ++used;
            } catch (const NumericalError& e) {
                failed = true;
                res.warnings.push_back("h=" + io::format_double(h) + " fold " + std::to_string(k + 1) + ": " + e.what());
            }
        }
        res.prediction_error.push_back(failed ? std::numeric_limits<double>::infinity() : total);
        res.folds_used.push_back(failed ? 0 : used);
    }

    std::size_t best = 0;
    for (std::size_t k = 1; k < candidates.size(); ++k) {
        const double a = res.prediction_error[k], b = res.prediction_error[best];
        if (a < b || (a == b && candidates[k] < candidates[best])) best = k;
    }
    if (!std::isfinite(res.prediction_error[best])) throw NumericalError("cross-validation: no candidate bandwidth could be fitted");
    res.best_h = candidates[best];
    return res;
}

} // namespace vcph
