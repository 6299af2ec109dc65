#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "bdarch/error.hpp"

namespace bdarch {

/// Lower clamp applied to simplex entries before taking logs or building densities.
inline constexpr double kSimplexFloor = 1e-12;
/// Sum tolerance within which a near-composition is silently renormalized.
inline constexpr double kSumTolerance = 1e-9;

/// A point on the open simplex: J >= 2 strictly positive shares summing to one.
class Composition {
public:
    Composition() = default;

    /// Validates and renormalizes; sums further than `sum_tolerance` from 1 are rejected.
    explicit Composition(Eigen::VectorXd values, double sum_tolerance = kSumTolerance) : values_(std::move(values)) {
        if (values_.size() < 2) throw DomainError("composition needs at least two components");
        for (Eigen::Index j = 0; j < values_.size(); ++j) {
            const double v = values_[j];
            if (!std::isfinite(v) || v <= 0.0 || v >= 1.0)
                throw DomainError("composition entry " + std::to_string(j) + " outside (0, 1): " + std::to_string(v));
        }
        const double sum = values_.sum();
        if (std::abs(sum - 1.0) > sum_tolerance)
            throw DomainError("composition sums to " + std::to_string(sum) + ", not 1");
        values_ /= sum;
    }

    Composition(std::initializer_list<double> values)
        : Composition(Eigen::Map<const Eigen::VectorXd>(values.begin(), static_cast<Eigen::Index>(values.size()))) {}

    /// Wraps values already known to be a valid composition (internal fast path).
    static Composition trusted(Eigen::VectorXd values) {
        Composition c;
        c.values_ = std::move(values);
        return c;
    }

    [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(values_.size()); }
    [[nodiscard]] double operator[](std::size_t j) const { return values_[static_cast<Eigen::Index>(j)]; }
    [[nodiscard]] const Eigen::VectorXd& values() const noexcept { return values_; }

private:
    Eigen::VectorXd values_;
};

/// Additive log-ratio coordinates together with the (0-based) reference component they omit.
struct AlrVector {
    Eigen::VectorXd values;
    std::size_t reference = 0;

    [[nodiscard]] std::size_t components() const noexcept { return static_cast<std::size_t>(values.size()) + 1; }
};

/// Closes a strictly positive vector onto the simplex by dividing by its sum.
inline Composition close(const Eigen::VectorXd& raw) {
    if (raw.size() < 2) throw DomainError("close: need at least two components");
    for (Eigen::Index j = 0; j < raw.size(); ++j)
        if (!(raw[j] > 0.0) || !std::isfinite(raw[j]))
            throw DomainError("close: entry " + std::to_string(j) + " must be positive and finite");
    Eigen::VectorXd v = raw / raw.sum();
    for (Eigen::Index j = 0; j < v.size(); ++j) v[j] = std::clamp(v[j], kSimplexFloor, 1.0 - kSimplexFloor);
    return Composition::trusted(v / v.sum());
}

/// alr(c)_k = log(c_j / c_ref) over j != ref, component order preserved.
inline AlrVector alr(const Composition& c, std::size_t reference) {
    const std::size_t J = c.size();
    if (reference >= J) throw DomainError("alr: reference index out of range");
    AlrVector out{Eigen::VectorXd(static_cast<Eigen::Index>(J - 1)), reference};
    const double log_ref = std::log(c[reference]);
    Eigen::Index k = 0;
    for (std::size_t j = 0; j < J; ++j) {
        if (j == reference) continue;
        out.values[k++] = std::log(c[j]) - log_ref;
    }
    if (!out.values.allFinite()) throw DomainError("alr: non-finite log ratio");
    return out;
}

namespace detail {
/// Writes alr^{-1}(eta) into `mu` (length d + 1). Max-subtracted softmax, clamped to
/// [floor, 1 - floor] and renormalized.
inline void alr_inv_into(const double* eta, std::size_t d, std::size_t reference, double* mu) {
    double hi = 0.0;
    for (std::size_t k = 0; k < d; ++k) hi = std::max(hi, eta[k]);
    double sum = 0.0;
    std::size_t k = 0;
    for (std::size_t j = 0; j <= d; ++j) {
        mu[j] = (j == reference) ? std::exp(-hi) : std::exp(eta[k++] - hi);
        sum += mu[j];
    }
    double total = 0.0;
    for (std::size_t j = 0; j <= d; ++j) {
        mu[j] = std::clamp(mu[j] / sum, kSimplexFloor, 1.0 - kSimplexFloor);
        total += mu[j];
    }
    for (std::size_t j = 0; j <= d; ++j) mu[j] /= total;
}
}  // namespace detail

inline Composition alr_inv(const AlrVector& v) {
    if (!v.values.allFinite()) throw DomainError("alr_inv: non-finite input");
    const std::size_t d = static_cast<std::size_t>(v.values.size());
    if (v.reference > d) throw DomainError("alr_inv: reference index out of range");
    Eigen::VectorXd mu(static_cast<Eigen::Index>(d + 1));
    detail::alr_inv_into(v.values.data(), d, v.reference, mu.data());
    return Composition::trusted(std::move(mu));
}

/// Centered log-ratio: log(c_j / g(c)), g the geometric mean. Entries sum to zero.
inline Eigen::VectorXd clr(const Composition& c) {
    Eigen::VectorXd logs = c.values().array().log().matrix();
    if (!logs.allFinite()) throw DomainError("clr: non-finite log");
    return logs.array() - logs.mean();
}

/// One step of a sequential binary partition: a group split into `numerator` and `denominator`.
struct PartitionStep {
    std::vector<std::size_t> numerator;    // S_j
    std::vector<std::size_t> denominator;  // H_j
};
using Partition = std::vector<PartitionStep>;

/// Pivot partition: {j} against {j+1, ..., J-1}, for j = 0..J-2.
inline Partition pivot_partition(std::size_t J) {
    Partition p;
    for (std::size_t j = 0; j + 1 < J; ++j) {
        PartitionStep step;
        step.numerator = {j};
        for (std::size_t i = j + 1; i < J; ++i) step.denominator.push_back(i);
        p.push_back(std::move(step));
    }
    return p;
}

/// Throws ConfigError unless `p` is a sequential binary partition of {0..J-1}.
inline void validate_partition(const Partition& p, std::size_t J) {
    if (p.size() + 1 != J) throw ConfigError("partition must have J-1 steps");
    auto sorted = [](std::vector<std::size_t> v) {
        std::sort(v.begin(), v.end());
        return v;
    };
    std::vector<std::size_t> all(J);
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::vector<std::vector<std::size_t>> open{all};  // groups still to be split
    for (const auto& step : p) {
        if (step.numerator.empty() || step.denominator.empty()) throw ConfigError("partition step with an empty side");
        std::vector<std::size_t> merged = step.numerator;
        merged.insert(merged.end(), step.denominator.begin(), step.denominator.end());
        merged = sorted(merged);
        if (std::adjacent_find(merged.begin(), merged.end()) != merged.end())
            throw ConfigError("partition step sides overlap");
        auto it = std::find(open.begin(), open.end(), merged);
        if (it == open.end()) throw ConfigError("partition step does not split an existing group");
        open.erase(it);
        if (step.numerator.size() > 1) open.push_back(sorted(step.numerator));
        if (step.denominator.size() > 1) open.push_back(sorted(step.denominator));
    }
    if (!open.empty()) throw ConfigError("partition leaves groups unsplit");
}

/**
 * Isometric log-ratio coordinates for a sequential binary partition.
 *
 * z_j = sqrt(r s / (r + s)) * log(g(S_j) / g(H_j)) with s = |S_j|, r = |H_j| and g the
 * geometric mean. For the pivot partition (s = 1) the coefficient is sqrt(r / (r + 1)).
 */
inline Eigen::VectorXd ilr(const Composition& c, const Partition& partition) {
    const std::size_t J = c.size();
    validate_partition(partition, J);
    Eigen::VectorXd logs = c.values().array().log().matrix();
    if (!logs.allFinite()) throw DomainError("ilr: non-finite log");
    Eigen::VectorXd z(static_cast<Eigen::Index>(J - 1));
    for (std::size_t j = 0; j + 1 < J; ++j) {
        const auto& step = partition[j];
        const double s = static_cast<double>(step.numerator.size());
        const double r = static_cast<double>(step.denominator.size());
        double mean_num = 0.0;
        for (auto i : step.numerator) mean_num += logs[static_cast<Eigen::Index>(i)];
        double mean_den = 0.0;
        for (auto i : step.denominator) mean_den += logs[static_cast<Eigen::Index>(i)];
        z[static_cast<Eigen::Index>(j)] = std::sqrt(r * s / (r + s)) * (mean_num / s - mean_den / r);
    }
    return z;
}

inline Eigen::VectorXd ilr(const Composition& c) { return ilr(c, pivot_partition(c.size())); }

namespace detail {
inline bool parse_integer(const std::string& s, long long& out) {
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc() && ptr == end;
}
}  // namespace detail

/// Ordered sequence of compositions sharing one J, with time labels.
class CompositionalSeries {
public:
    CompositionalSeries() = default;

    CompositionalSeries(std::vector<Composition> rows, std::vector<std::string> time_index,
                        std::vector<std::string> component_names = {})
        : rows_(std::move(rows)), time_index_(std::move(time_index)), names_(std::move(component_names)) {
        if (rows_.empty()) throw DomainError("series is empty");
        if (rows_.size() != time_index_.size()) throw DomainError("series: time index length mismatch");
        const std::size_t J = rows_.front().size();
        for (const auto& r : rows_)
            if (r.size() != J) throw DomainError("series rows do not share J");
        if (names_.empty())
            for (std::size_t j = 0; j < J; ++j) names_.push_back("c" + std::to_string(j + 1));
        if (names_.size() != J) throw DomainError("series: component name count mismatch");
        check_increasing();
    }

    /// Series labelled 1..T.
    explicit CompositionalSeries(std::vector<Composition> rows) : CompositionalSeries(rows, default_labels(rows.size())) {}

    [[nodiscard]] std::size_t length() const noexcept { return rows_.size(); }
    [[nodiscard]] std::size_t components() const noexcept { return rows_.empty() ? 0 : rows_.front().size(); }
    [[nodiscard]] const Composition& operator[](std::size_t t) const { return rows_[t]; }
    [[nodiscard]] const std::vector<Composition>& rows() const noexcept { return rows_; }
    [[nodiscard]] const std::vector<std::string>& time_index() const noexcept { return time_index_; }
    [[nodiscard]] const std::vector<std::string>& component_names() const noexcept { return names_; }

    /// Rows [begin, end).
    [[nodiscard]] CompositionalSeries slice(std::size_t begin, std::size_t end) const {
        if (begin >= end || end > rows_.size()) throw DomainError("series slice out of range");
        return CompositionalSeries({rows_.begin() + static_cast<std::ptrdiff_t>(begin), rows_.begin() + static_cast<std::ptrdiff_t>(end)},
                                   {time_index_.begin() + static_cast<std::ptrdiff_t>(begin),
                                    time_index_.begin() + static_cast<std::ptrdiff_t>(end)},
                                   names_);
    }

    /// T x J matrix of shares.
    [[nodiscard]] Eigen::MatrixXd matrix() const {
        Eigen::MatrixXd m(static_cast<Eigen::Index>(length()), static_cast<Eigen::Index>(components()));
        for (std::size_t t = 0; t < length(); ++t) m.row(static_cast<Eigen::Index>(t)) = rows_[t].values().transpose();
        return m;
    }

    static std::vector<std::string> default_labels(std::size_t T, std::size_t first = 1) {
        std::vector<std::string> labels;
        labels.reserve(T);
        for (std::size_t t = 0; t < T; ++t) labels.push_back(std::to_string(first + t));
        return labels;
    }

private:
    void check_increasing() const {
        bool numeric = true;
        std::vector<long long> ints(time_index_.size());
        for (std::size_t t = 0; t < time_index_.size() && numeric; ++t) numeric = detail::parse_integer(time_index_[t], ints[t]);
        for (std::size_t t = 1; t < time_index_.size(); ++t) {
            const bool ok = numeric ? ints[t - 1] < ints[t] : time_index_[t - 1] < time_index_[t];
            if (!ok) throw DomainError("time index not strictly increasing at position " + std::to_string(t));
        }
    }

    std::vector<Composition> rows_;
    std::vector<std::string> time_index_;
    std::vector<std::string> names_;
};

}  // namespace bdarch
