#include "vcph/data.hpp"

#include "vcph/errors.hpp"
#include "vcph/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

namespace vcph {

CovariatePath::CovariatePath(Eigen::VectorXd constant) {
    segments_.push_back({0.0, std::move(constant)});
}

CovariatePath::CovariatePath(std::vector<PathSegment> segments) : segments_(std::move(segments)) {
    if (segments_.empty()) throw ValidationError("covariate path has no segments");
    if (segments_.front().start != 0.0) throw ValidationError("covariate path must start at time 0");
    const auto p = segments_.front().value.size();
    for (std::size_t k = 0; k < segments_.size(); ++k) {
        const auto& s = segments_[k];
        if (s.value.size() != p) throw ValidationError("covariate path segments differ in dimension");
        if (!s.value.allFinite()) throw ValidationError("covariate path has non-finite values");
        if (k > 0 && !(s.start > segments_[k - 1].start))
            throw ValidationError("covariate path segments must have strictly increasing starts");
    }
}

const Eigen::VectorXd& CovariatePath::at(double t) const {
    // last segment with start <= t
    auto it = std::upper_bound(segments_.begin(), segments_.end(), t,
                               [](double v, const PathSegment& s) { return v < s.start; });
    if (it == segments_.begin()) return segments_.front().value;
    return std::prev(it)->value;
}

SurvivalDataset::SurvivalDataset(std::vector<Subject> subjects, std::optional<double> tau)
    : subjects_(std::move(subjects)) {
    if (subjects_.size() < 2) throw ValidationError("dataset needs at least 2 subjects");
    p_ = subjects_.front().z.dim();
    if (p_ < 1) throw ValidationError("dataset needs at least one covariate");

    double max_time = 0.0;
    w_min_ = subjects_.front().w;
    w_max_ = subjects_.front().w;
    for (std::size_t i = 0; i < subjects_.size(); ++i) {
        const auto& s = subjects_[i];
        if (!std::isfinite(s.time) || s.time < 0.0)
            throw ValidationError("subject " + std::to_string(i + 1) + ": observed time must be finite and >= 0");
        if (!std::isfinite(s.w)) throw ValidationError("subject " + std::to_string(i + 1) + ": exposure must be finite");
        if (s.z.dim() != p_)
            throw ValidationError("subject " + std::to_string(i + 1) + ": covariate dimension differs");
        max_time = std::max(max_time, s.time);
        w_min_ = std::min(w_min_, s.w);
        w_max_ = std::max(w_max_, s.w);
    }
    tau_ = tau.value_or(max_time);
    if (!(tau_ > 0.0) || !std::isfinite(tau_)) throw ValidationError("tau must be positive and finite");

    by_time_desc_.resize(subjects_.size());
    std::iota(by_time_desc_.begin(), by_time_desc_.end(), std::size_t{0});
    std::stable_sort(by_time_desc_.begin(), by_time_desc_.end(),
                     [&](std::size_t a, std::size_t b) { return subjects_[a].time > subjects_[b].time; });

    std::vector<EventTime> ev = event_times(*this);
    event_count_ = ev.size();
    for (const auto& e : ev) {
        if (groups_.empty() || groups_.back().time != e.time) groups_.push_back({e.time, {}});
        groups_.back().subjects.push_back(e.subject);
    }

    for (const auto& s : subjects_)
        for (const auto& seg : s.z.segments())
            if (seg.start > 0.0) breakpoints_.push_back(seg.start);
    std::sort(breakpoints_.begin(), breakpoints_.end());
    breakpoints_.erase(std::unique(breakpoints_.begin(), breakpoints_.end()), breakpoints_.end());
}

SurvivalDataset SurvivalDataset::with_tau(double tau) const { return SurvivalDataset(subjects_, tau); }

SurvivalDataset SurvivalDataset::subset(std::span<const std::size_t> indices) const {
    std::vector<Subject> out;
    out.reserve(indices.size());
    for (auto i : indices) out.push_back(subjects_.at(i));
    return SurvivalDataset(std::move(out), tau_);
}

SurvivalDataset SurvivalDataset::with_covariates(std::span<const Eigen::Index> columns) const {
    for (auto c : columns)
        if (c < 0 || c >= p_) throw ArgumentError("covariate column out of range");
    std::vector<Subject> out = subjects_;
    for (auto& s : out) {
        std::vector<PathSegment> segs;
        for (const auto& seg : s.z.segments()) {
            Eigen::VectorXd v(static_cast<Eigen::Index>(columns.size()));
            for (std::size_t k = 0; k < columns.size(); ++k) v[static_cast<Eigen::Index>(k)] = seg.value[columns[k]];
            segs.push_back({seg.start, std::move(v)});
        }
        s.z = CovariatePath(std::move(segs));
    }
    return SurvivalDataset(std::move(out), tau_);
}

const Eigen::VectorXd& covariate_at(const Subject& s, double t) { return s.z.at(t); }

std::vector<std::size_t> risk_set(const SurvivalDataset& d, double t) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < d.n(); ++i)
        if (d.subject(i).time >= t) out.push_back(i);
    return out;
}

std::vector<EventTime> event_times(const SurvivalDataset& d) {
    std::vector<EventTime> out;
    for (std::size_t i = 0; i < d.n(); ++i) {
        const auto& s = d.subject(i);
        if (s.event && s.time <= d.tau()) out.push_back({s.time, i});
    }
    std::stable_sort(out.begin(), out.end(), [](const EventTime& a, const EventTime& b) { return a.time < b.time; });
    return out;
}

namespace {

std::vector<std::string_view> expected_header(CsvFormat format) {
    if (format == CsvFormat::wide) return {"time", "status", "w"};
    return {"id", "start", "stop", "status", "w"};
}

double field_value(std::string_view f, std::size_t line, const char* name) {
    auto v = io::parse_double(f);
    if (!v) throw ParseError(line, std::string("invalid numeric value '") + std::string(f) + "' in column " + name);
    return *v;
}

bool status_value(std::string_view f, std::size_t line) {
    const double v = field_value(f, line, "status");
    if (v != 0.0 && v != 1.0) throw ParseError(line, "status must be 0 or 1");
    return v == 1.0;
}

struct LongRow {
    std::size_t line;
    double start, stop;
    bool status;
    double w;
    Eigen::VectorXd z;
};

} // namespace

SurvivalDataset parse_csv(std::istream& in, CsvFormat format, std::optional<double> tau) {
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::string_view> header;
    std::string header_line;
    while (std::getline(in, line)) {
        ++lineno;
        if (!io::trim(line).empty()) {
            header_line = line;
            break;
        }
    }
    if (header_line.empty()) throw ParseError(lineno, "missing header");
    header = io::split_fields(header_line);
    const auto fixed = expected_header(format);
    if (header.size() <= fixed.size()) throw ParseError(lineno, "header needs at least one covariate column");
    for (std::size_t k = 0; k < fixed.size(); ++k)
        if (header[k] != fixed[k])
            throw ParseError(lineno, "expected column '" + std::string(fixed[k]) + "', found '" + std::string(header[k]) + "'");
    const auto ncols = header.size();
    const auto p = static_cast<Eigen::Index>(ncols - fixed.size());

    std::vector<Subject> subjects;
    // long format: id -> rows, in order of first appearance
    std::vector<std::string> ids;
    std::map<std::string, std::vector<LongRow>, std::less<>> rows;

    while (std::getline(in, line)) {
        ++lineno;
        if (io::trim(line).empty()) continue;
        auto f = io::split_fields(line);
        if (f.size() != ncols)
            throw ParseError(lineno, "expected " + std::to_string(ncols) + " fields, found " + std::to_string(f.size()));
        Eigen::VectorXd z(p);
        for (Eigen::Index j = 0; j < p; ++j)
            z[j] = field_value(f[fixed.size() + static_cast<std::size_t>(j)], lineno, "z");
        if (format == CsvFormat::wide) {
            Subject s;
            s.time = field_value(f[0], lineno, "time");
            s.event = status_value(f[1], lineno);
            s.w = field_value(f[2], lineno, "w");
            if (s.time < 0.0) throw ValidationError("line " + std::to_string(lineno) + ": negative time");
            s.z = CovariatePath(std::move(z));
            subjects.push_back(std::move(s));
        } else {
            if (f[0].empty()) throw ParseError(lineno, "empty id");
            LongRow r{lineno, field_value(f[1], lineno, "start"), field_value(f[2], lineno, "stop"),
                      status_value(f[3], lineno), field_value(f[4], lineno, "w"), std::move(z)};
            if (r.start < 0.0 || r.stop < 0.0) throw ValidationError("line " + std::to_string(lineno) + ": negative time");
            if (!(r.stop > r.start) && !(r.start == 0.0 && r.stop == 0.0))
                throw ValidationError("line " + std::to_string(lineno) + ": interval stop must exceed start");
            auto key = std::string(f[0]);
            auto it = rows.find(key);
            if (it == rows.end()) {
                ids.push_back(key);
                rows.emplace(key, std::vector<LongRow>{std::move(r)});
            } else {
                if (ids.back() != key)
                    throw ValidationError("line " + std::to_string(lineno) + ": rows for id '" + key +
                                          "' are not contiguous");
                it->second.push_back(std::move(r));
            }
        }
    }

    if (format == CsvFormat::long_form) {
        for (const auto& id : ids) {
            const auto& rs = rows.at(id);
            if (rs.front().start != 0.0)
                throw ValidationError("line " + std::to_string(rs.front().line) + ": first interval for id '" + id +
                                      "' must start at 0");
            std::vector<PathSegment> segs;
            for (std::size_t k = 0; k < rs.size(); ++k) {
                if (k > 0) {
                    if (rs[k].start > rs[k - 1].stop)
                        throw ValidationError("line " + std::to_string(rs[k].line) + ": gap in intervals for id '" + id + "'");
                    if (rs[k].start < rs[k - 1].stop)
                        throw ValidationError("line " + std::to_string(rs[k].line) + ": overlapping intervals for id '" + id + "'");
                    if (rs[k - 1].status)
                        throw ValidationError("line " + std::to_string(rs[k - 1].line) +
                                              ": status may only be set on the last interval");
                    if (rs[k].w != rs[0].w)
                        throw ValidationError("line " + std::to_string(rs[k].line) + ": exposure w changes within id '" + id + "'");
                }
                segs.push_back({rs[k].start, rs[k].z});
            }
            Subject s;
            s.time = rs.back().stop;
            s.event = rs.back().status;
            s.w = rs.front().w;
            s.z = CovariatePath(std::move(segs));
            subjects.push_back(std::move(s));
        }
    }
    return SurvivalDataset(std::move(subjects), tau);
}

SurvivalDataset load_csv(const std::filesystem::path& path, CsvFormat format, std::optional<double> tau) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    return parse_csv(in, format, tau);
}

void write_csv(std::ostream& out, const SurvivalDataset& d, CsvFormat format) {
    const auto p = d.p();
    out << (format == CsvFormat::wide ? "time,status,w" : "id,start,stop,status,w");
    for (Eigen::Index j = 0; j < p; ++j) out << ",z" << (j + 1);
    out << '\n';
    for (std::size_t i = 0; i < d.n(); ++i) {
        const auto& s = d.subject(i);
        if (format == CsvFormat::wide) {
            if (!s.z.time_constant()) throw ArgumentError("wide format needs time-constant covariates");
            out << io::format_double(s.time) << ',' << (s.event ? 1 : 0) << ',' << io::format_double(s.w);
            for (Eigen::Index j = 0; j < p; ++j) out << ',' << io::format_double(s.z.at(0.0)[j]);
            out << '\n';
            continue;
        }
        const auto segs = s.z.segments();
        // segments starting at or after X carry no information
        std::size_t last = 0;
        while (last + 1 < segs.size() && segs[last + 1].start < s.time) ++last;
        for (std::size_t k = 0; k <= last; ++k) {
            const double stop = k == last ? s.time : segs[k + 1].start;
            out << (i + 1) << ',' << io::format_double(segs[k].start) << ',' << io::format_double(stop) << ','
                << (k == last && s.event ? 1 : 0) << ',' << io::format_double(s.w);
            for (Eigen::Index j = 0; j < p; ++j) out << ',' << io::format_double(segs[k].value[j]);
            out << '\n';
        }
    }
}

} // namespace vcph
