#include "vcph/cli.hpp"

#include "vcph/curve_fit.hpp"
#include "vcph/data.hpp"
#include "vcph/errors.hpp"
#include "vcph/inference.hpp"
#include "vcph/io.hpp"
#include "vcph/local_plik.hpp"
#include "vcph/scad.hpp"
#include "vcph/simbench.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

namespace vcph::cli {

namespace {

struct DataOpts {
    std::string path;
    std::string format = "wide";
    double tau = 0.0;
};

struct CurveOpts {
    double h = 0.0;
    std::string kernel = "gaussian";
    std::size_t grid_n = 200;
    std::size_t anchors = 5;
    std::string method = "full";
};

void add_data(CLI::App* sub, DataOpts& o) {
    sub->add_option("data", o.path, "input CSV")->required()->check(CLI::ExistingFile);
    sub->add_option("--format", o.format, "CSV layout")->check(CLI::IsMember({"wide", "long"}));
    sub->add_option("--tau", o.tau, "study end time")->check(CLI::PositiveNumber);
}

void add_curve(CLI::App* sub, CurveOpts& o, bool need_h) {
    auto* h = sub->add_option("--h", o.h, "bandwidth")->check(CLI::PositiveNumber);
    if (need_h) h->required();
    sub->add_option("--kernel", o.kernel, "smoothing kernel")->check(CLI::IsMember({"gaussian", "epanechnikov"}));
    sub->add_option("--grid-n", o.grid_n, "grid size")->check(CLI::Range(std::size_t{2}, std::size_t{100000}));
    sub->add_option("--anchors", o.anchors, "number of one-step anchors")
        ->check(CLI::Range(std::size_t{1}, std::size_t{100000}));
    sub->add_option("--method", o.method, "fitting method")->check(CLI::IsMember({"full", "onestep"}));
}

SurvivalDataset load(const DataOpts& o, const CLI::App* sub) {
    const auto fmt = o.format == "long" ? CsvFormat::long_form : CsvFormat::wide;
    std::optional<double> tau;
    if (sub->count("--tau")) tau = o.tau;
    return load_csv(o.path, fmt, tau);
}

Grid make_grid(const SurvivalDataset& d, const CurveOpts& o) {
    if (o.anchors > o.grid_n) throw ArgumentError("--anchors cannot exceed --grid-n");
    return Grid::equispaced(d.w_min(), d.w_max(), o.grid_n, o.anchors);
}

FitMethod fit_method(const std::string& m) { return m == "onestep" ? FitMethod::one_step : FitMethod::full; }

CurveEstimate fit_curve(const SurvivalDataset& d, const Grid& grid, const CurveOpts& o, bool with_g = true) {
    const auto k = parse_kernel(o.kernel);
    return fit_method(o.method) == FitMethod::full ? fit_full(d, grid, o.h, k, with_g)
                                                   : fit_onestep(d, grid, o.h, k, with_g);
}

std::string fixed2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string cell(double v) { return std::isfinite(v) ? io::format_double(v) : std::string(); }

struct Output {
    std::unique_ptr<std::ofstream> file;
    std::ostream* os;
    Output(const std::string& path, std::ostream& fallback) : os(&fallback) {
        if (!path.empty()) {
            file = std::make_unique<std::ofstream>(path);
            if (!*file) throw InputError("cannot open output file " + path);
            os = file.get();
        }
    }
    std::ostream& operator*() { return *os; }
};

void write_curve(std::ostream& out, const SurvivalDataset& d, const CurveEstimate& c, bool se, double band,
                 const std::string& variant) {
    const auto p = c.p;
    out << "w";
    for (Eigen::Index j = 0; j < p; ++j) out << ",beta_" << j + 1;
    for (Eigen::Index j = 0; j < p; ++j) out << ",dbeta_" << j + 1;
    out << ",gprime,g,converged,method";
    if (se) {
        for (Eigen::Index j = 0; j < p; ++j) out << ",se_beta_" << j + 1;
        out << ",se_gprime";
        for (Eigen::Index j = 0; j < p; ++j) out << ",bias_" << j + 1;
    }
    const bool with_band = std::isfinite(band);
    if (with_band) {
        for (Eigen::Index j = 0; j < p; ++j) out << ",lo_" << j + 1;
        for (Eigen::Index j = 0; j < p; ++j) out << ",hi_" << j + 1;
    }
    out << "\n";

    std::vector<LocalInference> infs(c.points.size());
    std::optional<BaselineHazard> bh;
    const auto sv = variant == "hazard" ? SandwichVariant::hazard_based : SandwichVariant::martingale;
    if (se) {
        if (sv == SandwichVariant::hazard_based) bh = breslow_cumhaz(d, c);
        for (std::size_t k = 0; k < c.points.size(); ++k) {
            if (c.points[k].degenerate) continue;
            const LocalDesign des(d, c.grid.points[k], c.h, c.kernel, c.with_g);
            infs[k] = sandwich(d, des, c.points[k].xi, bh ? &*bh : nullptr, sv);
        }
    }
    std::optional<Band> bands;
    if (with_band) bands = confidence_band(c, infs, band);

    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t k = 0; k < c.points.size(); ++k) {
        const auto& pt = c.points[k];
        const bool ok = !pt.degenerate;
        out << io::format_double(c.grid.points[k]);
        for (Eigen::Index j = 0; j < p; ++j) out << "," << cell(ok ? pt.xi.delta[j] : nan);
        for (Eigen::Index j = 0; j < p; ++j) out << "," << cell(ok ? pt.xi.eta[j] : nan);
        out << "," << cell(ok && c.with_g ? pt.xi.gamma : nan);
        out << "," << cell(c.with_g && c.g[k] ? *c.g[k] : nan);
        out << "," << (pt.converged ? 1 : 0) << "," << method_name(pt.method);
        if (se) {
            const auto& inf = infs[k];
            for (Eigen::Index j = 0; j < p; ++j) out << "," << cell(ok ? inf.se[j] : nan);
            out << "," << cell(ok && c.with_g ? inf.se[2 * p] : nan);
            for (Eigen::Index j = 0; j < p; ++j) out << "," << cell(ok ? inf.bias_est[j] : nan);
        }
        if (with_band) {
            const auto r = static_cast<Eigen::Index>(k);
            for (Eigen::Index j = 0; j < p; ++j) out << "," << cell(bands->lo(r, j));
            for (Eigen::Index j = 0; j < p; ++j) out << "," << cell(bands->hi(r, j));
        }
        out << "\n";
    }
}

// Splices key=value lines from --config into argv as flags placed after the
// subcommand, skipping keys already given on the command line.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
    std::string path;
    std::vector<std::string> rest;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) throw CLI::ArgumentMismatch("--config: expected a file path");
            path = args[++i];
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
        } else {
            rest.push_back(args[i]);
        }
    }
    if (path.empty()) return rest;
    std::ifstream in(path);
    if (!in) throw InputError("--config: cannot open " + path);
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::string> extra;
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = io::trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string_view::npos) throw ParseError(lineno, "--config: expected key=value");
        const std::string key(io::trim(t.substr(0, eq)));
        const std::string value(io::trim(t.substr(eq + 1)));
        const std::string flag = "--" + key;
        bool given = false;
        for (const auto& a : rest)
            if (a == flag || a.rfind(flag + "=", 0) == 0) given = true;
        if (given) continue;
        if (value == "true") {
            extra.push_back(flag);
        } else if (value != "false") {
            extra.push_back(flag);
            extra.push_back(value);
        }
    }
    rest.insert(rest.end(), extra.begin(), extra.end());
    return rest;
}

std::string version_text() {
    std::ostringstream o;
    NewtonOptions nw;
    PenaltyConfig pc;
    CvOptions cv;
    o << "vcph " << library_version << "\n"
      << "defaults:\n"
      << "  kernel          gaussian\n"
      << "  grid_n          200\n"
      << "  anchors         5\n"
      << "  h (simulate)    0.2 (example 1), 0.3 (example 2)\n"
      << "  newton tol      " << io::format_double(nw.tol) << "\n"
      << "  newton max_iter " << nw.max_iter << "\n"
      << "  zero_tol        " << io::format_double(pc.zero_tol) << "\n"
      << "  scad a          " << io::format_double(pc.a) << "\n"
      << "  vote            " << io::format_double(pc.threshold) << "\n"
      << "  cv folds        " << cv.folds << "\n";
    return o.str();
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Varying-coefficient proportional hazards by local partial likelihood"};
    app.name("vcph");
    app.set_help_flag("--help", "print help");
    app.require_subcommand(1);
    unsigned threads = 1;
    app.add_option("--threads", threads, "worker threads")->check(CLI::Range(1u, 1024u));
    app.add_option("--config", "key=value file; command-line flags take precedence");
    bool show_version = false;
    app.add_flag("--version", show_version, "print version and defaults");

    // fit
    DataOpts fit_d;
    CurveOpts fit_c;
    bool fit_se = false;
    double fit_band = 0.0;
    std::string fit_variant = "martingale";
    std::string fit_out;
    auto* fit = app.add_subcommand("fit", "estimate coefficient curves");
    add_data(fit, fit_d);
    add_curve(fit, fit_c, true);
    fit->add_flag("--se", fit_se, "append standard errors and bias estimates");
    fit->add_option("--band", fit_band, "pointwise confidence level in (0,1)")
        ->check(CLI::Range(0.0, 1.0).description("(0,1)"));
    fit->add_option("--variant", fit_variant, "sandwich variant")->check(CLI::IsMember({"martingale", "hazard"}));
    fit->add_option("-o,--output", fit_out, "output CSV (default stdout)");

    // select
    DataOpts sel_d;
    CurveOpts sel_c;
    PenaltyConfig pen;
    std::string sel_out, sel_refit;
    auto* sel = app.add_subcommand("select", "SCAD variable selection with voting");
    add_data(sel, sel_d);
    add_curve(sel, sel_c, true);
    sel->add_option("--rho", pen.rho, "SCAD regularization")->required()->check(CLI::PositiveNumber);
    sel->add_option("--a", pen.a, "SCAD shape (> 2)");
    sel->add_option("--vote", pen.threshold, "voting threshold in (0,1)");
    sel->add_option("--zero-tol", pen.zero_tol, "zero threshold on the standardized scale")
        ->check(CLI::PositiveNumber);
    sel->add_option("-o,--output", sel_out, "zero-fraction table (default stdout)");
    sel->add_option("--refit", sel_refit, "post-selection curve CSV");

    // hazard
    DataOpts hz_d;
    CurveOpts hz_c;
    double hz_b = 0.0;
    std::string hz_out;
    auto* hz = app.add_subcommand("hazard", "baseline hazard estimates");
    add_data(hz, hz_d);
    add_curve(hz, hz_c, true);
    hz->add_option("--b", hz_b, "hazard smoothing bandwidth")->check(CLI::PositiveNumber);
    hz->add_option("-o,--output", hz_out, "output CSV (default stdout)");

    // cv
    DataOpts cv_d;
    CurveOpts cv_c;
    std::vector<double> candidates;
    std::size_t folds = 20;
    std::string cv_out;
    auto* cv = app.add_subcommand("cv", "K-fold cross-validated bandwidth");
    add_data(cv, cv_d);
    add_curve(cv, cv_c, false);
    cv->add_option("--candidates", candidates, "candidate bandwidths")
        ->required()
        ->expected(1, -1)
        ->check(CLI::PositiveNumber);
    cv->add_option("--folds", folds, "fold count")->check(CLI::Range(std::size_t{2}, std::size_t{100000}));
    cv->add_option("-o,--output", cv_out, "output CSV (default stdout)");

    // simulate
    StudyConfig study;
    int example = 1;
    double sim_h = 0.0;
    std::string sim_method = "full";
    std::string sim_dir = ".";
    bool no_se = false;
    auto* sim = app.add_subcommand("simulate", "Monte Carlo study");
    sim->add_option("--example", example, "1 or 2")->check(CLI::IsMember({1, 2}));
    sim->add_option("--n", study.n, "sample size")->check(CLI::Range(std::size_t{50}, std::size_t{100000000}));
    sim->add_option("--reps", study.reps, "replications")->check(CLI::Range(std::size_t{1}, std::size_t{100000000}));
    sim->add_option("--h", sim_h, "bandwidth")->check(CLI::PositiveNumber);
    sim->add_option("--seed", study.seed, "root seed");
    sim->add_option("--rho", study.rho, "SCAD regularization (example 2)")->check(CLI::PositiveNumber);
    sim->add_option("--vote", study.votes, "voting thresholds (example 2)")
        ->expected(1, -1)
        ->check(CLI::Range(0.0, 1.0));
    sim->add_option("--method", sim_method, "fitting method")->check(CLI::IsMember({"full", "onestep", "both"}));
    sim->add_option("--grid-n", study.grid_n, "grid size")->check(CLI::Range(std::size_t{2}, std::size_t{100000}));
    sim->add_option("--out-dir", sim_dir, "output directory");
    sim->add_flag("--no-se", no_se, "skip probe-point standard errors");

    std::vector<std::string> raw(argv + 1, argv + argc);
    for (const auto& a : raw)
        if (a == "--version") {
            out << version_text();
            return 0;
        }
    try {
        auto args = expand_config(raw);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const InputError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (fit->parsed()) {
            if (fit->count("--band") && !fit_se) throw ArgumentError("--band requires --se");
            if (fit->count("--band") && !(fit_band > 0.0 && fit_band < 1.0))
                throw ArgumentError("--band must lie in (0,1)");
            const auto d = load(fit_d, fit);
            const auto grid = make_grid(d, fit_c);
            const auto c = fit_curve(d, grid, fit_c);
            Output o(fit_out, out);
            write_curve(*o, d, c, fit_se, fit->count("--band") ? fit_band : std::numeric_limits<double>::quiet_NaN(),
                        fit_variant);
        } else if (sel->parsed()) {
            pen.validate();
            const auto d = load(sel_d, sel);
            const auto grid = make_grid(d, sel_c);
            const auto res = select_variables(d, grid, sel_c.h, parse_kernel(sel_c.kernel), pen);
            Output o(sel_out, out);
            *o << "variable,zero_fraction,verdict\n";
            for (Eigen::Index j = 0; j < d.p(); ++j) {
                const bool kept = std::find(res.kept.begin(), res.kept.end(), j) != res.kept.end();
                *o << "z" << j + 1 << "," << io::format_double(res.zero_fraction[j]) << ","
                   << (kept ? "kept" : "deleted") << "\n";
            }
            *o << "g," << io::format_double(res.zero_fraction[2 * d.p()]) << ","
               << (res.g_kept ? "kept" : "deleted") << "\n";
            if (!sel_refit.empty()) {
                auto refit = refit_selected(d, res, fit_method(sel_c.method));
                if (!refit) throw NumericalError("every variable was deleted; nothing to refit");
                Output r(sel_refit, out);
                write_curve(*r, d.with_covariates(res.kept), *refit, false,
                            std::numeric_limits<double>::quiet_NaN(), "martingale");
            }
        } else if (hz->parsed()) {
            const auto d = load(hz_d, hz);
            const auto grid = make_grid(d, hz_c);
            const auto c = fit_curve(d, grid, hz_c);
            const auto bh = breslow_cumhaz(d, c);
            const double b = hz->count("--b") ? hz_b : default_hazard_bandwidth(d);
            const auto lam = smooth_hazard(bh, b, parse_kernel(hz_c.kernel), bh.jump_times);
            Output o(hz_out, out);
            *o << "t,cumhaz,hazard\n";
            double cum = 0.0;
            for (std::size_t k = 0; k < bh.jump_times.size(); ++k) {
                cum += bh.jump_sizes[k];
                *o << io::format_double(bh.jump_times[k]) << "," << io::format_double(cum) << ","
                   << io::format_double(lam[k]) << "\n";
            }
        } else if (cv->parsed()) {
            const auto d = load(cv_d, cv);
            const auto grid = make_grid(d, cv_c);
            CvOptions opts;
            opts.folds = folds;
            opts.method = fit_method(cv_c.method);
            const auto res = cv_bandwidth(d, grid, candidates, parse_kernel(cv_c.kernel), opts);
            for (const auto& w : res.warnings) err << "warning: " << w << "\n";
            Output o(cv_out, out);
            *o << "h,prediction_error,folds_used,selected\n";
            for (std::size_t k = 0; k < res.candidates.size(); ++k)
                *o << io::format_double(res.candidates[k]) << "," << io::format_double(res.prediction_error[k]) << ","
                   << res.folds_used[k] << "," << (res.candidates[k] == res.best_h ? 1 : 0) << "\n";
        } else if (sim->parsed()) {
            study.example = example == 1 ? Example::ex1 : Example::ex2;
            study.h = sim->count("--h") ? sim_h : (example == 1 ? 0.2 : 0.3);
            study.method = sim_method == "full"      ? StudyMethod::full
                           : sim_method == "onestep" ? StudyMethod::one_step
                                                     : StudyMethod::both;
            study.standard_errors = !no_se;
            study.threads = threads;
            study.validate();
            const auto t0 = std::chrono::steady_clock::now();
            const auto report = run_study(study);
            write_report(report, sim_dir);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            err << "simulate: " << study.reps << " replications, " << report.failures << " failed, "
                << fixed2(secs) << " s\n";
            out << (std::filesystem::path(sim_dir) / "report.json").string() << "\n";
        }
    } catch (const BandwidthTooSmall& e) {
        err << "numerical error: " << e.what() << "; failing grid points:";
        for (double w : e.failing_points()) err << " " << io::format_double(w);
        err << "\n";
        return 2;
    } catch (const DegenerateNeighborhood& e) {
        err << "numerical error: " << e.what() << " (w0=" << io::format_double(e.w0()) << ")\n";
        return 2;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << "\n";
        return 2;
    } catch (const InputError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

int run(int argc, const char* const* argv) { return run(argc, argv, std::cout, std::cerr); }

} // namespace vcph::cli
