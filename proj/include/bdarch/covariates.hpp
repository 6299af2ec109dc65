#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

#include "bdarch/error.hpp"

namespace bdarch {

/// Fourier block: K harmonics of a season of length `period` (in time steps).
struct SeasonalBlock {
    double period = 7.0;
    std::size_t harmonics = 1;
};

struct CovariateSpec {
    bool include_intercept = true;
    bool include_trend = false;
    std::vector<SeasonalBlock> seasonal_blocks;
    /// Mean model only: one coefficient set shared by all ALR coordinates.
    bool share_across_components = false;

    void validate() const {
        for (const auto& b : seasonal_blocks) {
            if (!(b.period > 1.0)) throw ConfigError("seasonal period must exceed 1");
            if (b.harmonics == 0) throw ConfigError("seasonal block needs at least one harmonic");
            if (static_cast<double>(b.harmonics) > b.period / 2.0)
                throw ConfigError("seasonal harmonics K=" + std::to_string(b.harmonics) + " exceed period/2 for period " +
                                  std::to_string(b.period));
        }
    }

    [[nodiscard]] std::size_t columns() const {
        std::size_t n = (include_intercept ? 1 : 0) + (include_trend ? 1 : 0);
        for (const auto& b : seasonal_blocks) n += 2 * b.harmonics;
        return n;
    }
};

enum class ColumnKind { Intercept, Trend, Fourier, Other };

/**
 * Deterministic covariates for the mean (X_t) and precision (z_t) models.
 *
 * Stored compactly as per-time feature rows. X_t is the (J-1) x r_beta block
 * matrix that gives every ALR coordinate its own copy of the features (or, when
 * shared, one copy reused by all coordinates); `mean_offset` and
 * `add_mean_gradient` apply it without materializing the blocks.
 */
class DesignMatrices {
public:
    DesignMatrices() = default;

    DesignMatrices(std::size_t coords, Eigen::MatrixXd mean_features, std::vector<ColumnKind> mean_kinds,
                   Eigen::MatrixXd precision_features, std::vector<ColumnKind> precision_kinds, bool shared = false,
                   std::vector<std::string> mean_names = {}, std::vector<std::string> precision_names = {})
        : coords_(coords),
          shared_(shared),
          mean_(std::move(mean_features)),
          prec_(std::move(precision_features)),
          mean_kinds_(std::move(mean_kinds)),
          prec_kinds_(std::move(precision_kinds)),
          mean_names_(std::move(mean_names)),
          prec_names_(std::move(precision_names)) {
        if (mean_.rows() != prec_.rows()) throw ConfigError("design row counts differ");
        if (static_cast<std::size_t>(mean_.cols()) != mean_kinds_.size() ||
            static_cast<std::size_t>(prec_.cols()) != prec_kinds_.size())
            throw ConfigError("design column kinds do not match column counts");
        if (!mean_.allFinite() || !prec_.allFinite()) throw ConfigError("design entries must be finite");
        if (mean_names_.empty())
            for (std::size_t c = 0; c < mean_kinds_.size(); ++c) mean_names_.push_back("x" + std::to_string(c + 1));
        if (prec_names_.empty())
            for (std::size_t c = 0; c < prec_kinds_.size(); ++c) prec_names_.push_back("z" + std::to_string(c + 1));
        mean_t_ = mean_.transpose();
    }

    [[nodiscard]] std::size_t rows() const noexcept { return static_cast<std::size_t>(mean_.rows()); }
    [[nodiscard]] std::size_t coords() const noexcept { return coords_; }
    [[nodiscard]] bool shared() const noexcept { return shared_; }
    [[nodiscard]] std::size_t mean_columns() const noexcept { return static_cast<std::size_t>(mean_.cols()); }
    [[nodiscard]] std::size_t r_beta() const noexcept { return shared_ ? mean_columns() : coords_ * mean_columns(); }
    [[nodiscard]] std::size_t r_gamma() const noexcept { return static_cast<std::size_t>(prec_.cols()); }
    [[nodiscard]] const Eigen::MatrixXd& mean_features() const noexcept { return mean_; }
    [[nodiscard]] const Eigen::MatrixXd& precision_features() const noexcept { return prec_; }

    [[nodiscard]] ColumnKind beta_kind(std::size_t i) const { return mean_kinds_[i % mean_columns()]; }
    [[nodiscard]] ColumnKind gamma_kind(std::size_t i) const { return prec_kinds_[i]; }
    [[nodiscard]] std::string beta_name(std::size_t i) const {
        const std::size_t n = mean_columns();
        if (shared_) return mean_names_[i];
        return mean_names_[i % n] + "[" + std::to_string(i / n + 1) + "]";
    }
    [[nodiscard]] const std::string& gamma_name(std::size_t i) const { return prec_names_[i]; }

    /// Dense X_t, (J-1) x r_beta.
    [[nodiscard]] Eigen::MatrixXd X(std::size_t t) const {
        const auto n = static_cast<Eigen::Index>(mean_columns());
        const auto d = static_cast<Eigen::Index>(coords_);
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d, static_cast<Eigen::Index>(r_beta()));
        for (Eigen::Index k = 0; k < d; ++k) out.block(k, shared_ ? 0 : k * n, 1, n) = mean_.row(static_cast<Eigen::Index>(t));
        return out;
    }

    [[nodiscard]] Eigen::VectorXd z(std::size_t t) const { return prec_.row(static_cast<Eigen::Index>(t)).transpose(); }

    /// out = X_t beta (length J-1).
    void mean_offset(std::size_t t, const Eigen::VectorXd& beta, double* out) const {
        const auto n = static_cast<Eigen::Index>(mean_columns());
        const double* x = mean_t_.col(static_cast<Eigen::Index>(t)).data();
        for (std::size_t k = 0; k < coords_; ++k) {
            const double* b = beta.data() + (shared_ ? 0 : static_cast<Eigen::Index>(k) * n);
            double s = 0.0;
            for (Eigen::Index c = 0; c < n; ++c) s += x[c] * b[c];
            out[k] = s;
        }
    }

    /// grad_beta += X_t' g.
    void add_mean_gradient(std::size_t t, const double* g, Eigen::VectorXd& grad_beta) const {
        const auto n = static_cast<Eigen::Index>(mean_columns());
        const double* x = mean_t_.col(static_cast<Eigen::Index>(t)).data();
        for (std::size_t k = 0; k < coords_; ++k) {
            double* b = grad_beta.data() + (shared_ ? 0 : static_cast<Eigen::Index>(k) * n);
            for (Eigen::Index c = 0; c < n; ++c) b[c] += x[c] * g[k];
        }
    }

    [[nodiscard]] double precision_offset(std::size_t t, const Eigen::VectorXd& gamma) const {
        if (gamma.size() == 0) return 0.0;
        return prec_.row(static_cast<Eigen::Index>(t)).dot(gamma);
    }

    /// Rows of `this` followed by rows of `later` (same column layout).
    [[nodiscard]] DesignMatrices append(const DesignMatrices& later) const {
        if (later.mean_columns() != mean_columns() || later.r_gamma() != r_gamma() || later.coords_ != coords_ ||
            later.shared_ != shared_)
            throw ConfigError("appended designs have a different layout");
        Eigen::MatrixXd m(mean_.rows() + later.mean_.rows(), mean_.cols());
        m << mean_, later.mean_;
        Eigen::MatrixXd p(prec_.rows() + later.prec_.rows(), prec_.cols());
        p << prec_, later.prec_;
        return DesignMatrices(coords_, std::move(m), mean_kinds_, std::move(p), prec_kinds_, shared_, mean_names_, prec_names_);
    }

    /// Rows [begin, end).
    [[nodiscard]] DesignMatrices slice(std::size_t begin, std::size_t end) const {
        const auto b = static_cast<Eigen::Index>(begin);
        const auto n = static_cast<Eigen::Index>(end - begin);
        return DesignMatrices(coords_, mean_.middleRows(b, n), mean_kinds_, prec_.middleRows(b, n), prec_kinds_, shared_,
                              mean_names_, prec_names_);
    }

private:
    std::size_t coords_ = 0;
    bool shared_ = false;
    Eigen::MatrixXd mean_;
    Eigen::MatrixXd mean_t_;  // column t = features at time t
    Eigen::MatrixXd prec_;
    std::vector<ColumnKind> mean_kinds_;
    std::vector<ColumnKind> prec_kinds_;
    std::vector<std::string> mean_names_;
    std::vector<std::string> prec_names_;
};

namespace detail {
inline void feature_columns(const CovariateSpec& spec, std::size_t T, std::size_t t0, double trend_scale,
                            Eigen::MatrixXd& features, std::vector<ColumnKind>& kinds, std::vector<std::string>& names) {
    features.resize(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(spec.columns()));
    kinds.clear();
    names.clear();
    Eigen::Index col = 0;
    if (spec.include_intercept) {
        features.col(col++).setOnes();
        kinds.push_back(ColumnKind::Intercept);
        names.emplace_back("intercept");
    }
    if (spec.include_trend) {
        for (std::size_t t = 0; t < T; ++t)
            features(static_cast<Eigen::Index>(t), col) = static_cast<double>(t0 + t + 1) / trend_scale;
        ++col;
        kinds.push_back(ColumnKind::Trend);
        names.emplace_back("trend");
    }
    for (const auto& block : spec.seasonal_blocks) {
        for (std::size_t k = 1; k <= block.harmonics; ++k) {
            for (std::size_t t = 0; t < T; ++t) {
                const double phase = 2.0 * std::numbers::pi * static_cast<double>(k) * static_cast<double>(t0 + t + 1) / block.period;
                features(static_cast<Eigen::Index>(t), col) = std::sin(phase);
                features(static_cast<Eigen::Index>(t), col + 1) = std::cos(phase);
            }
            col += 2;
            kinds.push_back(ColumnKind::Fourier);
            kinds.push_back(ColumnKind::Fourier);
            char buf[64];
            std::snprintf(buf, sizeof buf, "sin(%g,%zu)", block.period, k);
            names.emplace_back(buf);
            std::snprintf(buf, sizeof buf, "cos(%g,%zu)", block.period, k);
            names.emplace_back(buf);
        }
    }
}
}  // namespace detail

/**
 * Builds X_t and z_t for T consecutive steps whose absolute (1-based) times are
 * t0 + 1, ..., t0 + T. Absolute times keep seasonal phase continuous across
 * train/validation/test splits. The trend column is (absolute time) / train_length,
 * with train_length defaulting to T.
 */
inline DesignMatrices build_designs(const CovariateSpec& mean_spec, const CovariateSpec& precision_spec, std::size_t T,
                                    std::size_t J, std::size_t t0 = 0, std::size_t train_length = 0) {
    if (T < 1) throw ConfigError("build_designs: T must be at least 1");
    if (J < 2) throw ConfigError("build_designs: J must be at least 2");
    mean_spec.validate();
    precision_spec.validate();
    const double scale = static_cast<double>(train_length == 0 ? T : train_length);
    Eigen::MatrixXd mean, prec;
    std::vector<ColumnKind> mk, pk;
    std::vector<std::string> mn, pn;
    detail::feature_columns(mean_spec, T, t0, scale, mean, mk, mn);
    detail::feature_columns(precision_spec, T, t0, scale, prec, pk, pn);
    return DesignMatrices(J - 1, std::move(mean), std::move(mk), std::move(prec), std::move(pk),
                          mean_spec.share_across_components, std::move(mn), std::move(pn));
}

}  // namespace bdarch
