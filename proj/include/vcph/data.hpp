#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace vcph {

struct PathSegment {
    double start = 0.0;
    Eigen::VectorXd value;
};

// Piecewise-constant, right-continuous covariate path on [0, inf).
// Segment k holds on [start_k, start_{k+1}); the last segment never ends.
class CovariatePath {
  public:
    CovariatePath() = default;
    explicit CovariatePath(Eigen::VectorXd constant);
    explicit CovariatePath(std::vector<PathSegment> segments);

    const Eigen::VectorXd& at(double t) const;
    std::span<const PathSegment> segments() const { return segments_; }
    Eigen::Index dim() const { return segments_.empty() ? 0 : segments_.front().value.size(); }
    bool time_constant() const { return segments_.size() == 1; }

  private:
    std::vector<PathSegment> segments_;
};

struct Subject {
    double time = 0.0;  // observed X = min(T, C)
    bool event = false; // failure indicator
    double w = 0.0;     // exposure
    CovariatePath z;
};

struct EventTime {
    double time;
    std::size_t subject;
    friend bool operator==(const EventTime&, const EventTime&) = default;
};

// Distinct event time with the subjects failing at it (ascending index).
struct EventGroup {
    double time;
    std::vector<std::size_t> subjects;
};

// Immutable after construction. The sorted views used by the likelihood
// sweeps are computed once here.
class SurvivalDataset {
  public:
    // tau defaults to the largest observed time.
    explicit SurvivalDataset(std::vector<Subject> subjects, std::optional<double> tau = std::nullopt);

    std::size_t n() const { return subjects_.size(); }
    Eigen::Index p() const { return p_; }
    double tau() const { return tau_; }
    const Subject& subject(std::size_t i) const { return subjects_[i]; }
    std::span<const Subject> subjects() const { return subjects_; }

    // Events with X <= tau, ascending by time.
    std::span<const EventGroup> event_groups() const { return groups_; }
    std::size_t event_count() const { return event_count_; }
    // Subject indices by descending X (ties by ascending index).
    std::span<const std::size_t> by_time_desc() const { return by_time_desc_; }
    // Distinct positive segment starts over all paths.
    std::span<const double> breakpoints() const { return breakpoints_; }
    double w_min() const { return w_min_; }
    double w_max() const { return w_max_; }

    SurvivalDataset with_tau(double tau) const;
    SurvivalDataset subset(std::span<const std::size_t> indices) const;
    // Keeps only the listed covariate columns (0-based), in the given order.
    SurvivalDataset with_covariates(std::span<const Eigen::Index> columns) const;

  private:
    std::vector<Subject> subjects_;
    Eigen::Index p_ = 0;
    double tau_ = 0.0;
    std::vector<EventGroup> groups_;
    std::size_t event_count_ = 0;
    std::vector<std::size_t> by_time_desc_;
    std::vector<double> breakpoints_;
    double w_min_ = 0.0;
    double w_max_ = 0.0;
};

const Eigen::VectorXd& covariate_at(const Subject& s, double t);

// Indices with X_i >= t, ascending.
std::vector<std::size_t> risk_set(const SurvivalDataset& d, double t);

// All (X_i, i) with an event and X_i <= tau, ascending; ties by index.
std::vector<EventTime> event_times(const SurvivalDataset& d);

enum class CsvFormat { wide, long_form };

// wide: time,status,w,z1..zp      long: id,start,stop,status,w,z1..zp
SurvivalDataset load_csv(const std::filesystem::path& path, CsvFormat format,
                         std::optional<double> tau = std::nullopt);
SurvivalDataset parse_csv(std::istream& in, CsvFormat format, std::optional<double> tau = std::nullopt);
void write_csv(std::ostream& out, const SurvivalDataset& d, CsvFormat format);

} // namespace vcph
