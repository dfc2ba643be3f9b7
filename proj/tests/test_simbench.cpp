#include "oracles.hpp"

#include "vcph/errors.hpp"
#include "vcph/simbench.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace vcph;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

double censoring_rate(const SurvivalDataset& d) {
    std::size_t c = 0;
    for (const auto& s : d.subjects()) c += !s.event;
    return static_cast<double>(c) / static_cast<double>(d.n());
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("vcph_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

} // namespace

TEST_CASE("child streams are reproducible and distinct", "[simbench]") {
    Rng a = child_rng(1, 0), b = child_rng(1, 0), c = child_rng(1, 1), e = child_rng(2, 0);
    const auto x = a();
    REQUIRE(x == b());
    REQUIRE(x != c());
    REQUIRE(x != e());
}

TEST_CASE("Example 1 null model has survival exp(-t^4)", "[simbench]") {
    Rng rng = child_rng(401, 0);
    const auto sim = simulate_example1(2000, rng, {.null_effects = true, .censor = false});
    auto t = sim.latent_time;
    std::sort(t.begin(), t.end());
    double ks = 0.0;
    const double n = static_cast<double>(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double f = 1.0 - std::exp(-std::pow(t[i], 4));
        ks = std::max({ks, std::abs(f - static_cast<double>(i) / n), std::abs(f - static_cast<double>(i + 1) / n)});
    }
    REQUIRE(ks < 0.05);
}

TEST_CASE("Example 1 censoring rate", "[simbench]") {
    Rng rng = child_rng(403, 0);
    const auto sim = simulate_example1(10000, rng);
    const double r = censoring_rate(sim.data);
    INFO("censoring " << r);
    REQUIRE(r >= 0.30);
    REQUIRE(r <= 0.40);
}

TEST_CASE("Example 1 event times invert the cumulative hazard", "[simbench][property]") {
    std::mt19937_64 rng(405);
    std::exponential_distribution<double> ex(1.0);
    std::normal_distribution<double> nz(0.0, 3.0);
    for (int k = 0; k < 10000; ++k) {
        const double e = ex(rng), ba = nz(rng), bb = nz(rng);
        const double t = example1_event_time(e, ba, bb);
        REQUIRE_THAT(example1_cumhaz(t, ba, bb), WithinAbs(e, 1e-10 * std::max(1.0, e)));
    }
}

TEST_CASE("Example 1 covariate paths switch after t = 1", "[simbench][property]") {
    Rng rng = child_rng(407, 0);
    const auto d = gen_example1(500, rng);
    for (const auto& s : d.subjects()) {
        const auto late = s.z.at(1.5);
        for (double t : {0.0, 0.5, 1.0}) {
            REQUIRE(s.z.at(t)[0] == 0.25 * late[0]);
            REQUIRE(s.z.at(t)[1] == late[1]);
        }
        REQUIRE(s.z.at(std::nextafter(1.0, 2.0)) == late);
    }
}

TEST_CASE("Example 1 censoring cut is stable", "[simbench]") {
    // independent draw of (W, Z1, Z2) with another seed
    std::mt19937_64 rng(409);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    std::normal_distribution<double> nz(0.0, 1.0);
    const std::size_t m = 1000000;
    double s = 0.0, s2 = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        const double w = u(rng), u1 = nz(rng), u2 = nz(rng);
        const double b = example1_b(5.0 * u1, 5.0 * (0.5 * u1 + std::sqrt(0.75) * u2), w);
        s += b;
        s2 += b * b;
    }
    const double mean = s / m;
    const double sd = std::sqrt(s2 / m - mean * mean);
    REQUIRE(std::abs(example1_b0() - mean) < 0.01 * sd);
    const double analytic = 0.5 * ((std::exp(1.5) - std::exp(-1.5)) / 3.0 - std::exp(-1.5));
    REQUIRE(std::abs(example1_b0() - analytic) < 0.01 * sd);
}

TEST_CASE("Example 2 null model gives unit exponential times", "[simbench]") {
    Rng rng = child_rng(411, 0);
    const auto sim = simulate_example2(5000, rng, {.null_effects = true, .censor = false});
    double m = 0.0;
    for (double t : sim.latent_time) m += t;
    m /= 5000.0;
    REQUIRE(std::abs(m - 1.0) < 3.0 / std::sqrt(5000.0));
}

TEST_CASE("Example 2 censoring rate", "[simbench][known_gap]") {
    Rng rng = child_rng(413, 0);
    const auto sim = simulate_example2(10000, rng);
    const double r = censoring_rate(sim.data);
    INFO("censoring " << r);
    REQUIRE(r >= 0.30);
    REQUIRE(r <= 0.40);
}

TEST_CASE("Example 2 covariates are equicorrelated", "[simbench]") {
    Rng rng = child_rng(415, 0);
    const auto d = gen_example2(50000, rng);
    Eigen::MatrixXd z(50000, 4);
    for (std::size_t i = 0; i < d.n(); ++i) z.row(static_cast<Eigen::Index>(i)) = d.subject(i).z.at(0.0).transpose();
    const Eigen::MatrixXd c = z.rowwise() - z.colwise().mean();
    const Eigen::MatrixXd cov = c.transpose() * c / 49999.0;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) REQUIRE(std::abs(cov(a, b) - (a == b ? 2.0 : 1.2)) < 0.03 * (a == b ? 2.0 : 1.0));
    double wmin = 1e9, wmax = -1e9;
    for (const auto& s : d.subjects()) {
        wmin = std::min(wmin, s.w);
        wmax = std::max(wmax, s.w);
    }
    REQUIRE(wmin >= 0.0);
    REQUIRE(wmax <= 3.0);
}

TEST_CASE("weighted mean squared error", "[simbench]") {
    const auto truth = example_truth(Example::ex1);
    std::vector<double> grid{0.3, 0.9, 1.7, 2.4};
    Eigen::MatrixXd est(4, 2);
    for (int k = 0; k < 4; ++k)
        for (int j = 0; j < 2; ++j) est(k, j) = truth.beta[static_cast<std::size_t>(j)](grid[static_cast<std::size_t>(k)]);
    REQUIRE(wmse(est, grid, truth, MseWeights::reciprocal_var) == 0.0);
    REQUIRE(wmse(est, grid, truth, MseWeights::unit) == 0.0);

    Truth one;
    one.beta = {[](double) { return 2.0; }};
    Eigen::MatrixXd e1(1, 1);
    e1(0, 0) = 2.5;
    REQUIRE(wmse(e1, {1.0}, one, MseWeights::unit) == 0.25);
    REQUIRE_THROWS_AS(wmse(e1, {1.0}, one, MseWeights::reciprocal_var), ArgumentError);
}

TEST_CASE("weighted mean squared error matches a double loop", "[simbench][property]") {
    std::mt19937_64 rng(417);
    std::normal_distribution<double> nz(0.0, 0.3);
    const auto truth = example_truth(Example::ex1);
    std::vector<double> grid;
    for (int k = 0; k < 50; ++k) grid.push_back(0.06 * k);
    Eigen::MatrixXd tv(50, 2), est(50, 2);
    for (int k = 0; k < 50; ++k)
        for (int j = 0; j < 2; ++j) {
            tv(k, j) = truth.beta[static_cast<std::size_t>(j)](grid[static_cast<std::size_t>(k)]);
            est(k, j) = tv(k, j) + nz(rng);
        }
    Eigen::VectorXd a(2);
    for (int j = 0; j < 2; ++j) {
        double m = 0.0, v = 0.0;
        for (int k = 0; k < 50; ++k) m += tv(k, j);
        m /= 50.0;
        for (int k = 0; k < 50; ++k) v += (tv(k, j) - m) * (tv(k, j) - m);
        a[j] = 49.0 / v;
    }
    REQUIRE_THAT(wmse(est, grid, truth, MseWeights::reciprocal_var), WithinRel(oracle::wmse(est, tv, a), 1e-12));
    REQUIRE_THAT(wmse(est, grid, truth, MseWeights::unit), WithinRel(oracle::wmse(est, tv, Eigen::VectorXd::Ones(2)), 1e-12));
}

TEST_CASE("study configuration validation", "[simbench]") {
    StudyConfig c;
    REQUIRE_NOTHROW(c.validate());
    c.n = 49;
    REQUIRE_THROWS_AS(c.validate(), ArgumentError);
    c = StudyConfig{};
    c.reps = 0;
    REQUIRE_THROWS_AS(c.validate(), ArgumentError);
    c = StudyConfig{};
    c.votes = {1.0};
    REQUIRE_THROWS_AS(c.validate(), ArgumentError);
}

TEST_CASE("single replication reports no Monte Carlo SD", "[simbench]") {
    StudyConfig c;
    c.n = 150;
    c.reps = 1;
    c.grid_n = 30;
    c.h = 0.3;
    const auto r = run_study(c);
    REQUIRE(r.reps.size() == 1);
    REQUIRE(r.reps[0].ok);
    REQUIRE(r.se_table.size() == probe_points().size() * 3);
    for (std::size_t k = 0; k < r.se_table.size(); ++k) {
        const auto& row = r.se_table[k];
        REQUIRE_FALSE(row.sd.has_value());
        REQUIRE_FALSE(row.se_std.has_value());
        REQUIRE(row.count == 1);
        REQUIRE(row.se_ave == r.reps[0].probe_se(static_cast<Eigen::Index>(k / 3), static_cast<Eigen::Index>(k % 3)));
        REQUIRE(row.se_ave >= 0.0);
    }
    REQUIRE(r.reps[0].censoring >= 0.0);
    REQUIRE(r.reps[0].censoring <= 1.0);
}

TEST_CASE("studies are bit-identical across runs and thread counts", "[simbench][property]") {
    for (auto ex : {Example::ex1, Example::ex2}) {
        StudyConfig c;
        c.example = ex;
        c.n = 120;
        c.reps = 4;
        c.grid_n = 30;
        c.h = 0.35;
        c.seed = 99;
        c.method = StudyMethod::both;
        c.votes = {0.5, 0.6};
        std::vector<std::string> outputs;
        for (unsigned threads : {1u, 1u, 3u}) {
            c.threads = threads;
            const auto dir = scratch("det_" + std::to_string(outputs.size()));
            write_report(run_study(c), dir);
            std::string all;
            for (const char* f : {"report.json", "wmse.csv", "se_table.csv", "curves_median_rep.csv"}) all += slurp(dir / f);
            outputs.push_back(all);
            std::filesystem::remove_all(dir);
        }
        REQUIRE(!outputs[0].empty());
        REQUIRE(outputs[0] == outputs[1]);
        REQUIRE(outputs[0] == outputs[2]);
    }
}

TEST_CASE("parallel_for visits every index once", "[simbench]") {
    std::vector<int> hits(1000, 0);
    parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
    for (int h : hits) REQUIRE(h == 1);
    REQUIRE_THROWS_AS(parallel_for(10, 2, [](std::size_t i) {
                          if (i == 7) throw NumericalError("boom");
                      }),
                      NumericalError);
}
