#include "vcph/simbench.hpp"

#include "vcph/errors.hpp"
#include "vcph/inference.hpp"
#include "vcph/io.hpp"
#include "vcph/local_plik.hpp"
#include "vcph/scad.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <numbers>
#include <numeric>
#include <thread>

namespace vcph {

Rng child_rng(std::uint64_t seed, std::uint64_t rep) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(rep), static_cast<std::uint32_t>(rep >> 32)};
    return Rng(seq);
}

double example1_b(double z1, double z2, double w) {
    return 0.5 * w * (1.5 - w) * z1 + std::sin(2.0 * w) * z2 + 0.5 * (std::exp(w - 1.5) - std::exp(-1.5));
}

namespace {

struct Ex1Draw {
    double w, z1, z2;
};

Ex1Draw draw_ex1_covariates(Rng& rng) {
    std::uniform_real_distribution<double> unif(0.0, 3.0);
    std::normal_distribution<double> norm;
    Ex1Draw x;
    x.w = unif(rng);
    const double u1 = norm(rng);
    const double u2 = norm(rng);
    x.z1 = 5.0 * u1;
    x.z2 = 5.0 * (0.5 * u1 + std::sqrt(0.75) * u2);
    return x;
}

double compute_b0() {
    Rng rng(20050101ULL);
    const std::size_t draws = 1000000;
    double sum = 0.0;
    for (std::size_t k = 0; k < draws; ++k) {
        const auto x = draw_ex1_covariates(rng);
        sum += example1_b(x.z1, x.z2, x.w);
    }
    return sum / static_cast<double>(draws);
}

} // namespace

double example1_b0() {
    static const double b0 = compute_b0();
    return b0;
}

double example1_cumhaz(double t, double b_a, double b_b) {
    const double t4 = t * t * t * t;
    if (t <= 1.0) return t4 * std::exp(b_a);
    return std::exp(b_a) + (t4 - 1.0) * std::exp(b_b);
}

double example1_event_time(double e, double b_a, double b_b) {
    const double ea = std::exp(b_a);
    if (e <= ea) return std::pow(e / ea, 0.25);
    return std::pow(1.0 + (e - ea) * std::exp(-b_b), 0.25);
}

Simulated simulate_example1(std::size_t n, Rng& rng, const GenOptions& opts) {
    const double b0 = example1_b0();
    const double after_one = std::nextafter(1.0, 2.0);
    std::exponential_distribution<double> expo(1.0);
    std::vector<Subject> subjects;
    subjects.reserve(n);
    std::vector<double> latent;
    std::vector<bool> high_risk;
    for (std::size_t i = 0; i < n; ++i) {
        const auto x = draw_ex1_covariates(rng);
        const double e = expo(rng);
        double b_a = 0.0, b_b = 0.0;
        if (!opts.null_effects) {
            b_a = example1_b(0.25 * x.z1, x.z2, x.w);
            b_b = example1_b(x.z1, x.z2, x.w);
        }
        const double t = example1_event_time(e, b_a, b_b);
        const bool high = example1_b(x.z1, x.z2, x.w) > b0;
        const double cmax = high ? 0.8 : 20.0;
        const double c = std::uniform_real_distribution<double>(0.0, cmax)(rng);

        Subject s;
        s.w = x.w;
        if (opts.censor) {
            s.time = std::min(t, c);
            s.event = t <= c;
        } else {
            s.time = t;
            s.event = true;
        }
        s.z = CovariatePath(std::vector<PathSegment>{{0.0, Eigen::Vector2d(0.25 * x.z1, x.z2)},
                                                     {after_one, Eigen::Vector2d(x.z1, x.z2)}});
        subjects.push_back(std::move(s));
        latent.push_back(t);
        high_risk.push_back(high);
    }
    return Simulated{SurvivalDataset(std::move(subjects)), std::move(latent), std::move(high_risk)};
}

Simulated simulate_example2(std::size_t n, Rng& rng, const GenOptions& opts) {
    // variance 2, covariance 1.2: Z_j = sqrt(1.2) U0 + sqrt(0.8) U_j
    const double common = std::sqrt(1.2);
    const double own = std::sqrt(0.8);
    const auto truth = example_truth(Example::ex2);
    std::uniform_real_distribution<double> unif(0.0, 3.0);
    std::normal_distribution<double> norm;
    std::exponential_distribution<double> expo(1.0);
    std::uniform_real_distribution<double> cens(0.0, 7.0);
    std::vector<Subject> subjects;
    subjects.reserve(n);
    std::vector<double> latent;
    std::vector<bool> high_risk;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = unif(rng);
        const double u0 = norm(rng);
        Eigen::Vector4d z;
        for (int j = 0; j < 4; ++j) z[j] = common * u0 + own * norm(rng);
        double lp = 0.0;
        if (!opts.null_effects)
            for (int j = 0; j < 4; ++j) lp += z[j] * truth.beta[static_cast<std::size_t>(j)](w);
        const double t = expo(rng) * std::exp(-lp);
        const double c = cens(rng);
        Subject s;
        s.w = w;
        s.time = opts.censor ? std::min(t, c) : t;
        s.event = opts.censor ? t <= c : true;
        s.z = CovariatePath(Eigen::VectorXd(z));
        subjects.push_back(std::move(s));
        latent.push_back(t);
        high_risk.push_back(false);
    }
    return Simulated{SurvivalDataset(std::move(subjects)), std::move(latent), std::move(high_risk)};
}

SurvivalDataset gen_example1(std::size_t n, Rng& rng) { return simulate_example1(n, rng).data; }
SurvivalDataset gen_example2(std::size_t n, Rng& rng) { return simulate_example2(n, rng).data; }

Truth example_truth(Example ex) {
    Truth t;
    if (ex == Example::ex1) {
        t.beta = {[](double w) { return 0.5 * w * (1.5 - w); }, [](double w) { return std::sin(2.0 * w); }};
        t.g = [](double w) { return 0.5 * (std::exp(w - 1.5) - std::exp(-1.5)); };
    } else {
        t.beta = {[](double w) { return 3.0 * (w - 2.0) * (w - 2.0); },
                  [](double w) { return 4.0 * std::cos((w - 1.5) * std::numbers::pi / 5.0); },
                  [](double) { return 0.0; }, [](double) { return 0.0; }};
        t.g = [](double) { return 0.0; };
    }
    return t;
}

double wmse(const Eigen::MatrixXd& est, const std::vector<double>& grid, const Truth& truth, MseWeights weights) {
    const auto k = static_cast<Eigen::Index>(grid.size());
    const auto p = static_cast<Eigen::Index>(truth.beta.size());
    if (est.rows() != k || est.cols() != p) throw ArgumentError("estimate does not match grid and truth");
    if (k == 0) throw ArgumentError("empty grid");
    Eigen::MatrixXd tv(k, p);
    for (Eigen::Index r = 0; r < k; ++r)
        for (Eigen::Index j = 0; j < p; ++j) tv(r, j) = truth.beta[static_cast<std::size_t>(j)](grid[static_cast<std::size_t>(r)]);
    Eigen::VectorXd a = Eigen::VectorXd::Ones(p);
    if (weights == MseWeights::reciprocal_var) {
        if (k < 2) throw ArgumentError("reciprocal-variance weights need at least two grid points");
        for (Eigen::Index j = 0; j < p; ++j) {
            const double var = (tv.col(j).array() - tv.col(j).mean()).square().sum() / static_cast<double>(k - 1);
            if (!(var > 0.0))
                throw ArgumentError("true coefficient " + std::to_string(j + 1) + " is constant on the grid");
            a[j] = 1.0 / var;
        }
    }
    return ((est - tv).array().square().rowwise() * a.transpose().array()).sum() / static_cast<double>(k);
}

Eigen::MatrixXd curve_beta(const CurveEstimate& curve) {
    const auto k = static_cast<Eigen::Index>(curve.grid.size());
    Eigen::MatrixXd est(k, curve.p);
    for (Eigen::Index r = 0; r < k; ++r) {
        const auto& pt = curve.points[static_cast<std::size_t>(r)];
        if (pt.degenerate)
            est.row(r) = curve.beta_at(curve.grid.points[static_cast<std::size_t>(r)]).transpose();
        else
            est.row(r) = pt.xi.delta.transpose();
    }
    return est;
}

double wmse(const CurveEstimate& curve, const Truth& truth, MseWeights weights) {
    return wmse(curve_beta(curve), curve.grid.points, truth, weights);
}

void StudyConfig::validate() const {
    if (n < 50) throw ArgumentError("--n must be at least 50");
    if (reps < 1) throw ArgumentError("--reps must be at least 1");
    if (!(h > 0.0) || !std::isfinite(h)) throw ArgumentError("--h must be positive");
    if (grid_n < 2) throw ArgumentError("grid size must be at least 2");
    if (!(rho > 0.0) || !std::isfinite(rho)) throw ArgumentError("--rho must be positive");
    if (votes.empty()) throw ArgumentError("at least one --vote threshold is required");
    for (double v : votes)
        if (!(v > 0.0 && v < 1.0)) throw ArgumentError("--vote must lie in (0, 1)");
}

void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& f) {
    const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < workers; ++t)
        pool.emplace_back([&] {
            for (;;) {
                const auto i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    f(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(mu);
                    if (!err) err = std::current_exception();
                    next = count;
                }
            }
        });
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

namespace {

// Unpenalized fit plus martingale sandwich directly at each probe point.
void probe_inference(const SurvivalDataset& d, double h, RepResult& r) {
    const auto& probes = probe_points();
    const auto p = d.p();
    r.probe_est.resize(static_cast<Eigen::Index>(probes.size()), p + 1);
    r.probe_se.resize(static_cast<Eigen::Index>(probes.size()), p + 1);
    for (std::size_t k = 0; k < probes.size(); ++k) {
        const LocalDesign des(d, probes[k], h, gaussian_kernel, true);
        const auto fit = newton_fit(d, des, LocalParams::zeros(p));
        if (!fit.converged) throw NumericalError("probe fit did not converge at w0=" + io::format_double(probes[k]));
        const auto inf = sandwich(d, des, fit.params, nullptr);
        const auto row = static_cast<Eigen::Index>(k);
        r.probe_est.row(row).head(p) = fit.params.delta.transpose();
        r.probe_est(row, p) = fit.params.gamma;
        r.probe_se.row(row).head(p) = inf.se.head(p).transpose();
        r.probe_se(row, p) = inf.se[2 * p];
    }
}

CurveEstimate fit_curve(const SurvivalDataset& d, const Grid& grid, double h, bool with_g, FitMethod m) {
    return m == FitMethod::full ? fit_full(d, grid, h, gaussian_kernel, with_g)
                                : fit_onestep(d, grid, h, gaussian_kernel, with_g);
}

void run_ex1(const StudyConfig& cfg, const Grid& grid, const Simulated& sim, RepResult& r) {
    const auto truth = example_truth(Example::ex1);
    const auto& d = sim.data;
    std::size_t hi = 0, hi_c = 0, lo = 0, lo_c = 0;
    for (std::size_t i = 0; i < d.n(); ++i) {
        const bool cens = !d.subject(i).event;
        if (sim.high_risk[i]) {
            ++hi;
            hi_c += cens;
        } else {
            ++lo;
            lo_c += cens;
        }
    }
    r.censoring_high = hi ? static_cast<double>(hi_c) / static_cast<double>(hi) : 0.0;
    r.censoring_low = lo ? static_cast<double>(lo_c) / static_cast<double>(lo) : 0.0;

    std::optional<CurveEstimate> main;
    if (cfg.method != StudyMethod::one_step) {
        auto c = fit_curve(d, grid, cfg.h, true, FitMethod::full);
        r.wmse_full = wmse(c, truth, MseWeights::reciprocal_var);
        r.umse_full = wmse(c, truth, MseWeights::unit);
        main = std::move(c);
    }
    if (cfg.method != StudyMethod::full) {
        auto c = fit_curve(d, grid, cfg.h, true, FitMethod::one_step);
        r.wmse_onestep = wmse(c, truth, MseWeights::reciprocal_var);
        r.umse_onestep = wmse(c, truth, MseWeights::unit);
        main = std::move(c);
    }
    r.curve_beta = curve_beta(*main);
    for (const auto& g : main->g) r.curve_g.push_back(g ? *g : std::numeric_limits<double>::quiet_NaN());
    if (cfg.standard_errors) probe_inference(d, cfg.h, r);
}

void run_ex2(const StudyConfig& cfg, const Grid& grid, const Simulated& sim, RepResult& r) {
    const auto truth = example_truth(Example::ex2);
    const auto& d = sim.data;
    const auto method = cfg.method == StudyMethod::one_step ? FitMethod::one_step : FitMethod::full;
    const auto full = fit_curve(d, grid, cfg.h, true, method);
    r.umse_full = wmse(full, truth, MseWeights::unit);

    PenaltyConfig pc;
    pc.rho = cfg.rho;
    pc.threshold = cfg.votes.front();
    const auto sel = select_variables(d, grid, cfg.h, gaussian_kernel, pc);
    r.zero_fraction = sel.zero_fraction;
    for (double v : cfg.votes) {
        const auto kept = sel.kept_at(v);
        const bool z3 = std::find(kept.begin(), kept.end(), 2) == kept.end();
        const bool z4 = std::find(kept.begin(), kept.end(), 3) == kept.end();
        r.joint_deleted.push_back(z3 && z4 && !sel.g_kept_at(v));
    }

    Eigen::MatrixXd est = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(grid.size()), d.p());
    std::vector<double> g(grid.size(), 0.0);
    if (auto refit = refit_selected(d, sel, method)) {
        const auto b = curve_beta(*refit);
        for (std::size_t j = 0; j < sel.kept.size(); ++j) est.col(sel.kept[j]) = b.col(static_cast<Eigen::Index>(j));
        if (refit->with_g)
            for (std::size_t k = 0; k < grid.size(); ++k)
                g[k] = refit->g[k] ? *refit->g[k] : std::numeric_limits<double>::quiet_NaN();
    }
    r.umse_selected = wmse(est, grid.points, truth, MseWeights::unit);
    r.curve_beta = est;
    r.curve_g = g;

    const std::vector<Eigen::Index> oracle_cols{0, 1};
    const auto oracle = fit_curve(d.with_covariates(oracle_cols), grid, cfg.h, false, method);
    Eigen::MatrixXd oest = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(grid.size()), d.p());
    oest.leftCols(2) = curve_beta(oracle);
    r.umse_oracle = wmse(oest, grid.points, truth, MseWeights::unit);

    if (cfg.standard_errors) probe_inference(d, cfg.h, r);
}

double sample_sd(const std::vector<double>& v) {
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

} // namespace

StudyReport run_study(const StudyConfig& cfg) {
    cfg.validate();
    StudyReport rep;
    rep.config = cfg;
    const auto grid = Grid::equispaced(0.0, 3.0, cfg.grid_n);
    rep.grid = grid.points;
    if (cfg.example == Example::ex1) (void)example1_b0();
    rep.reps.resize(cfg.reps);

    parallel_for(cfg.reps, cfg.threads, [&](std::size_t k) {
        auto rng = child_rng(cfg.seed, k);
        auto& r = rep.reps[k];
        const auto sim = cfg.example == Example::ex1 ? simulate_example1(cfg.n, rng) : simulate_example2(cfg.n, rng);
        const auto& d = sim.data;
        r.censoring = 1.0 - static_cast<double>(d.event_count()) / static_cast<double>(d.n());
        try {
            if (cfg.example == Example::ex1)
                run_ex1(cfg, grid, sim, r);
            else
                run_ex2(cfg, grid, sim, r);
            r.ok = true;
        } catch (const NumericalError& e) {
            r.ok = false;
            r.failure = e.what();
        }
    });

    std::vector<std::size_t> good;
    for (std::size_t k = 0; k < rep.reps.size(); ++k) {
        if (rep.reps[k].ok)
            good.push_back(k);
        else
            ++rep.failures;
    }

    if (cfg.standard_errors && !good.empty()) {
        const auto p = cfg.example == Example::ex1 ? 2 : 4;
        for (std::size_t pr = 0; pr < probe_points().size(); ++pr) {
            for (int c = 0; c <= p; ++c) {
                std::vector<double> est, se;
                for (auto k : good) {
                    est.push_back(rep.reps[k].probe_est(static_cast<Eigen::Index>(pr), c));
                    se.push_back(rep.reps[k].probe_se(static_cast<Eigen::Index>(pr), c));
                }
                SeRow row;
                row.w0 = probe_points()[pr];
                row.coef = c < p ? "beta_" + std::to_string(c + 1) : "gprime";
                row.count = good.size();
                row.se_ave = std::accumulate(se.begin(), se.end(), 0.0) / static_cast<double>(se.size());
                if (good.size() >= 2) {
                    row.sd = sample_sd(est);
                    row.se_std = sample_sd(se);
                }
                rep.se_table.push_back(row);
            }
        }
    }

    if (cfg.example == Example::ex2 && !good.empty()) {
        for (std::size_t v = 0; v < cfg.votes.size(); ++v) {
            std::size_t hits = 0;
            for (auto k : good) hits += rep.reps[k].joint_deleted[v];
            rep.deletion_rate.push_back(static_cast<double>(hits) / static_cast<double>(good.size()));
        }
    }

    if (!good.empty()) {
        auto score = [&](std::size_t k) {
            const auto& r = rep.reps[k];
            if (cfg.example == Example::ex2) return *r.umse_selected;
            return r.wmse_onestep ? *r.wmse_onestep : *r.wmse_full;
        };
        auto order = good;
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return score(a) < score(b); });
        rep.median_rep = order[(order.size() - 1) / 2];
    }
    return rep;
}

namespace {

std::string fmt(const std::optional<double>& v) { return v ? io::format_double(*v) : std::string(); }

nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

} // namespace

void write_report(const StudyReport& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto& cfg = r.config;
    const bool ex1 = cfg.example == Example::ex1;

    nlohmann::ordered_json j;
    j["example"] = ex1 ? 1 : 2;
    j["n"] = cfg.n;
    j["reps"] = cfg.reps;
    j["h"] = cfg.h;
    j["seed"] = cfg.seed;
    j["grid_n"] = cfg.grid_n;
    j["method"] = cfg.method == StudyMethod::full ? "full" : cfg.method == StudyMethod::one_step ? "onestep" : "both";
    if (!ex1) {
        j["rho"] = cfg.rho;
        j["votes"] = cfg.votes;
    }
    j["failures"] = r.failures;
    std::vector<double> cens, wf, wo, uf, uo, us, uor;
    for (const auto& rr : r.reps) {
        if (!rr.ok) continue;
        cens.push_back(rr.censoring);
        if (rr.wmse_full) wf.push_back(*rr.wmse_full);
        if (rr.wmse_onestep) wo.push_back(*rr.wmse_onestep);
        if (rr.umse_full) uf.push_back(*rr.umse_full);
        if (rr.umse_onestep) uo.push_back(*rr.umse_onestep);
        if (rr.umse_selected) us.push_back(*rr.umse_selected);
        if (rr.umse_oracle) uor.push_back(*rr.umse_oracle);
    }
    auto med = [](const std::vector<double>& v) { return v.empty() ? nlohmann::json(nullptr) : nlohmann::json(median(v)); };
    j["censoring_mean"] = cens.empty() ? nlohmann::json(nullptr)
                                       : nlohmann::json(std::accumulate(cens.begin(), cens.end(), 0.0) /
                                                        static_cast<double>(cens.size()));
    if (ex1) {
        j["median_wmse_full"] = med(wf);
        j["median_wmse_onestep"] = med(wo);
    }
    j["median_umse_full"] = med(uf);
    if (ex1) j["median_umse_onestep"] = med(uo);
    if (!ex1) {
        j["median_umse_selected"] = med(us);
        j["median_umse_oracle"] = med(uor);
        j["deletion_rate"] = r.deletion_rate;
    }
    auto se = nlohmann::json::array();
    for (const auto& row : r.se_table)
        se.push_back({{"w0", row.w0}, {"coef", row.coef}, {"sd", opt_json(row.sd)}, {"se_ave", row.se_ave},
                      {"se_std", opt_json(row.se_std)}, {"count", row.count}});
    j["se_table"] = se;
    j["median_rep"] = r.median_rep ? nlohmann::json(*r.median_rep) : nlohmann::json(nullptr);
    {
        std::ofstream out(dir / "report.json");
        out << j.dump(2) << "\n";
    }

    {
        std::ofstream out(dir / "wmse.csv");
        out << "rep,ok,censoring";
        if (ex1) out << ",censoring_high,censoring_low,wmse_full,wmse_onestep,umse_full,umse_onestep";
        else {
            out << ",umse_full,umse_selected,umse_oracle";
            for (double v : cfg.votes) out << ",deleted_" << io::format_short(v);
            for (int q = 1; q <= 4; ++q) out << ",zero_fraction_z" << q;
            out << ",zero_fraction_g";
        }
        out << "\n";
        for (std::size_t k = 0; k < r.reps.size(); ++k) {
            const auto& rr = r.reps[k];
            out << k << "," << (rr.ok ? 1 : 0) << "," << io::format_double(rr.censoring);
            if (ex1)
                out << "," << io::format_double(rr.censoring_high) << "," << io::format_double(rr.censoring_low) << ","
                    << fmt(rr.wmse_full) << "," << fmt(rr.wmse_onestep) << "," << fmt(rr.umse_full) << ","
                    << fmt(rr.umse_onestep);
            else {
                out << "," << fmt(rr.umse_full) << "," << fmt(rr.umse_selected) << "," << fmt(rr.umse_oracle);
                for (std::size_t v = 0; v < cfg.votes.size(); ++v)
                    out << "," << (v < rr.joint_deleted.size() ? (rr.joint_deleted[v] ? "1" : "0") : "");
                for (Eigen::Index q = 0; q < 5; ++q)
                    out << "," << (rr.zero_fraction.size() == 9 ? io::format_double(rr.zero_fraction[q < 4 ? q : 8]) : "");
            }
            out << "\n";
        }
    }

    {
        std::ofstream out(dir / "se_table.csv");
        out << "w0,coef,sd,se_ave,se_std,count\n";
        for (const auto& row : r.se_table)
            out << io::format_double(row.w0) << "," << row.coef << "," << fmt(row.sd) << ","
                << io::format_double(row.se_ave) << "," << fmt(row.se_std) << "," << row.count << "\n";
    }

    {
        std::ofstream out(dir / "curves_median_rep.csv");
        const auto truth = example_truth(cfg.example);
        const auto p = truth.beta.size();
        out << "w";
        for (std::size_t q = 0; q < p; ++q) out << ",beta_" << q + 1 << "_true,beta_" << q + 1;
        out << ",g_true,g\n";
        if (r.median_rep) {
            const auto& rr = r.reps[*r.median_rep];
            for (std::size_t k = 0; k < r.grid.size(); ++k) {
                const double w = r.grid[k];
                out << io::format_double(w);
                for (std::size_t q = 0; q < p; ++q)
                    out << "," << io::format_double(truth.beta[q](w)) << ","
                        << io::format_double(rr.curve_beta(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(q)));
                out << "," << io::format_double(truth.g(w) - truth.g(r.grid.front())) << ","
                    << io::format_double(rr.curve_g[k]) << "\n";
            }
        }
    }
}

} // namespace vcph
