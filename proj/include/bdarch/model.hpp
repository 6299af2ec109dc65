#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "bdarch/correlation.hpp"
#include "bdarch/covariates.hpp"
#include "bdarch/error.hpp"

namespace bdarch {

/// The three model families: Dirichlet VARMA with deterministic precision, the same
/// with a DARCH recursion on log precision, and a Gaussian VARMA on ALR-transformed data.
enum class Variant { BDarma, BDarmaDarch, BTvarma };

inline std::string to_string(Variant v) {
    switch (v) {
        case Variant::BDarma: return "bdarma";
        case Variant::BDarmaDarch: return "bdarma_darch";
        case Variant::BTvarma: return "btvarma";
    }
    return "unknown";
}

inline Variant parse_variant(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    std::replace(s.begin(), s.end(), '-', '_');
    if (s == "bdarma") return Variant::BDarma;
    if (s == "bdarma_darch" || s == "bdarch" || s == "darch") return Variant::BDarmaDarch;
    if (s == "btvarma" || s == "tvarma") return Variant::BTvarma;
    throw ConfigError("unknown model variant '" + s + "'");
}

struct ModelSpec {
    Variant variant = Variant::BDarma;
    std::size_t components = 0;          // J
    std::size_t ar_order = 1;            // P
    std::size_t ma_order = 0;            // Q
    std::size_t precision_ar_order = 0;  // L
    std::size_t precision_ma_order = 0;  // K
    /// 0-based reference component; defaults to the last one.
    std::optional<std::size_t> reference;
    CovariateSpec mean_covariates;
    CovariateSpec precision_covariates;

    [[nodiscard]] std::size_t dim() const noexcept { return components - 1; }
    [[nodiscard]] std::size_t reference_index() const noexcept { return reference.value_or(components - 1); }
    [[nodiscard]] bool dirichlet() const noexcept { return variant != Variant::BTvarma; }
    /// Number of leading observations conditioned on: m = max(P, Q, L, K).
    [[nodiscard]] std::size_t max_lag() const noexcept {
        return std::max({ar_order, ma_order, precision_ar_order, precision_ma_order});
    }

    void validate() const {
        if (components < 2) throw ConfigError("model needs J >= 2 components");
        if (reference_index() >= components) throw ConfigError("reference component out of range");
        if (variant != Variant::BDarmaDarch && (precision_ar_order != 0 || precision_ma_order != 0))
            throw ConfigError("precision AR/MA orders are only allowed for the DARCH variant");
        mean_covariates.validate();
        precision_covariates.validate();
    }

    void validate(std::size_t T) const {
        validate();
        if (max_lag() >= T) throw ConfigError("series too short: need T > max(P, Q, L, K)");
    }
};

struct NormalPrior {
    double mean = 0.0;
    double sd = 1.0;
};

/// Independent priors per parameter group. Defaults are the simulation-study set.
struct Priors {
    NormalPrior ar_diagonal{0.0, 1.0};
    NormalPrior ar_off_diagonal{0.0, 1.0};
    NormalPrior ma_diagonal{0.0, 1.0};
    NormalPrior ma_off_diagonal{0.0, 1.0};
    NormalPrior mean_intercept{0.0, 0.3};
    NormalPrior mean_trend{0.0, 0.1};
    NormalPrior mean_fourier{0.0, 1.0};
    NormalPrior precision_intercept{7.0, 1.5};
    NormalPrior precision_trend{0.0, 0.1};
    NormalPrior precision_fourier{0.0, 1.0};
    NormalPrior precision_ar{0.35, 0.5};
    NormalPrior precision_ma{-0.75, 0.5};
    double sigma_scale = 0.5;  // half-normal scale for the tVARMA sigma
    double lkj_shape = 3.0;

    static Priors simulation() { return Priors{}; }

    /// Weakly informative set used for the daily currency-share fits.
    static Priors currency() {
        Priors p;
        p.ar_diagonal = {0.4, 0.5};
        p.ar_off_diagonal = {0.0, 0.5};
        p.ma_diagonal = {0.4, 0.5};
        p.ma_off_diagonal = {0.0, 0.5};
        p.mean_intercept = {0.0, 2.0};
        p.mean_trend = {0.0, 0.1};
        p.mean_fourier = {0.0, 1.0};
        p.precision_intercept = {0.0, 2.0};
        p.precision_trend = {0.0, 0.1};
        p.precision_fourier = {0.0, 1.0};
        p.precision_ar = {0.0, 1.0};
        p.precision_ma = {0.0, 1.0};
        p.sigma_scale = 0.5;
        p.lkj_shape = 3.0;
        return p;
    }

    void validate() const {
        for (const NormalPrior* n : {&ar_diagonal, &ar_off_diagonal, &ma_diagonal, &ma_off_diagonal, &mean_intercept,
                                     &mean_trend, &mean_fourier, &precision_intercept, &precision_trend,
                                     &precision_fourier, &precision_ar, &precision_ma})
            if (!(n->sd > 0.0) || !std::isfinite(n->mean)) throw ConfigError("prior standard deviations must be positive");
        if (!(sigma_scale > 0.0)) throw ConfigError("sigma prior scale must be positive");
        if (!(lkj_shape >= 1.0)) throw ConfigError("LKJ shape must be at least 1");
    }

    [[nodiscard]] const NormalPrior& mean_prior(ColumnKind k) const {
        switch (k) {
            case ColumnKind::Intercept: return mean_intercept;
            case ColumnKind::Trend: return mean_trend;
            default: return mean_fourier;
        }
    }
    [[nodiscard]] const NormalPrior& precision_prior(ColumnKind k) const {
        switch (k) {
            case ColumnKind::Intercept: return precision_intercept;
            case ColumnKind::Trend: return precision_trend;
            default: return precision_fourier;
        }
    }
};

/// Model parameters on their natural (constrained) scale. Also used to hold gradients.
struct ParamVector {
    std::vector<Eigen::MatrixXd> A;  // P matrices, (J-1) x (J-1)
    std::vector<Eigen::MatrixXd> B;  // Q matrices
    Eigen::VectorXd beta;
    Eigen::VectorXd gamma;
    Eigen::VectorXd alpha;  // DARCH AR on log precision
    Eigen::VectorXd tau;    // DARCH response to squared ALR innovations
    double sigma = 1.0;              // tVARMA only
    Eigen::MatrixXd omega_chol;      // tVARMA only; lower triangular, unit-norm rows
};

/**
 * Flat layout of the C-vector theta:
 *   A_1..A_P (row-major), B_1..B_Q, beta, gamma, alpha, tau, [log sigma, omega free].
 * The flat constrained row (draw files) stores sigma itself and the strictly-lower
 * entries of omega_chol in place of the unconstrained values.
 */
class ParamLayout {
public:
    ParamLayout() = default;

    ParamLayout(const ModelSpec& spec, const DesignMatrices& designs) : spec_(spec) {
        d_ = spec.dim();
        if (designs.coords() != d_) throw ConfigError("designs built for a different J");
        const std::size_t dd = d_ * d_;
        std::size_t off = 0;
        a_ = off;
        off += spec.ar_order * dd;
        b_ = off;
        off += spec.ma_order * dd;
        beta_ = off;
        n_beta_ = designs.r_beta();
        off += n_beta_;
        gamma_ = off;
        n_gamma_ = spec.dirichlet() ? designs.r_gamma() : 0;
        off += n_gamma_;
        alpha_ = off;
        off += spec.precision_ar_order;
        tau_ = off;
        off += spec.precision_ma_order;
        sigma_ = off;
        if (spec.variant == Variant::BTvarma) {
            off += 1;
            omega_ = off;
            off += correlation::free_size(d_);
        } else {
            omega_ = off;
        }
        size_ = off;
        for (std::size_t i = 0; i < n_beta_; ++i) {
            beta_kinds_.push_back(designs.beta_kind(i));
            beta_names_.push_back(designs.beta_name(i));
        }
        for (std::size_t i = 0; i < n_gamma_; ++i) {
            gamma_kinds_.push_back(designs.gamma_kind(i));
            gamma_names_.push_back(designs.gamma_name(i));
        }
    }

    [[nodiscard]] std::size_t size() const noexcept { return size_; }
    [[nodiscard]] const ModelSpec& spec() const noexcept { return spec_; }
    [[nodiscard]] std::size_t dim() const noexcept { return d_; }
    [[nodiscard]] std::size_t a_offset(std::size_t p) const { return a_ + p * d_ * d_; }
    [[nodiscard]] std::size_t b_offset(std::size_t q) const { return b_ + q * d_ * d_; }
    [[nodiscard]] std::size_t beta_offset() const noexcept { return beta_; }
    [[nodiscard]] std::size_t gamma_offset() const noexcept { return gamma_; }
    [[nodiscard]] std::size_t alpha_offset() const noexcept { return alpha_; }
    [[nodiscard]] std::size_t tau_offset() const noexcept { return tau_; }
    [[nodiscard]] std::size_t sigma_offset() const noexcept { return sigma_; }
    [[nodiscard]] std::size_t omega_offset() const noexcept { return omega_; }
    [[nodiscard]] ColumnKind beta_kind(std::size_t i) const { return beta_kinds_[i]; }
    [[nodiscard]] ColumnKind gamma_kind(std::size_t i) const { return gamma_kinds_[i]; }
    [[nodiscard]] bool tvarma() const noexcept { return spec_.variant == Variant::BTvarma; }

    [[nodiscard]] std::vector<std::string> names() const {
        std::vector<std::string> out;
        out.reserve(size_);
        auto matrix_names = [&](const char* tag, std::size_t count) {
            for (std::size_t p = 0; p < count; ++p)
                for (std::size_t r = 0; r < d_; ++r)
                    for (std::size_t s = 0; s < d_; ++s)
                        out.push_back(std::string(tag) + std::to_string(p + 1) + "[" + std::to_string(r + 1) + "," +
                                      std::to_string(s + 1) + "]");
        };
        matrix_names("A", spec_.ar_order);
        matrix_names("B", spec_.ma_order);
        for (const auto& n : beta_names_) out.push_back("beta." + n);
        for (const auto& n : gamma_names_) out.push_back("gamma." + n);
        for (std::size_t l = 0; l < spec_.precision_ar_order; ++l) out.push_back("alpha" + std::to_string(l + 1));
        for (std::size_t k = 0; k < spec_.precision_ma_order; ++k) out.push_back("tau" + std::to_string(k + 1));
        if (tvarma()) {
            out.emplace_back("sigma");
            for (std::size_t i = 1; i < d_; ++i)
                for (std::size_t j = 0; j < i; ++j)
                    out.push_back("L_omega[" + std::to_string(i + 1) + "," + std::to_string(j + 1) + "]");
        }
        return out;
    }

    /// All-zero parameter set with the right shapes (omega_chol zero, sigma zero).
    [[nodiscard]] ParamVector zeros() const {
        ParamVector p;
        const auto d = static_cast<Eigen::Index>(d_);
        p.A.assign(spec_.ar_order, Eigen::MatrixXd::Zero(d, d));
        p.B.assign(spec_.ma_order, Eigen::MatrixXd::Zero(d, d));
        p.beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_beta_));
        p.gamma = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_gamma_));
        p.alpha = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec_.precision_ar_order));
        p.tau = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec_.precision_ma_order));
        p.sigma = 0.0;
        if (tvarma()) p.omega_chol = Eigen::MatrixXd::Zero(d, d);
        return p;
    }

    /// Unconstrained vector -> parameters. Adds log|Jacobian| to *log_jacobian when given.
    [[nodiscard]] ParamVector constrain(const Eigen::VectorXd& u, double* log_jacobian = nullptr) const {
        check_size(u);
        if (!u.allFinite()) throw DomainError("constrain: non-finite unconstrained value");
        ParamVector p = read_common(u);
        double lj = 0.0;
        if (tvarma()) {
            p.sigma = std::exp(u[static_cast<Eigen::Index>(sigma_)]);
            lj += u[static_cast<Eigen::Index>(sigma_)];
            lj += correlation::constrain(u.data() + omega_, d_, p.omega_chol);
        }
        if (log_jacobian) *log_jacobian += lj;
        return p;
    }

    [[nodiscard]] Eigen::VectorXd unconstrain(const ParamVector& p) const {
        Eigen::VectorXd u(static_cast<Eigen::Index>(size_));
        write_common(p, u);
        if (tvarma()) {
            if (!(p.sigma > 0.0)) throw DomainError("unconstrain: sigma must be positive");
            u[static_cast<Eigen::Index>(sigma_)] = std::log(p.sigma);
            u.segment(static_cast<Eigen::Index>(omega_), static_cast<Eigen::Index>(correlation::free_size(d_))) =
                correlation::unconstrain(p.omega_chol);
        }
        if (!u.allFinite()) throw DomainError("unconstrain: non-finite result");
        return u;
    }

    /// log|Jacobian| of `constrain` at u.
    [[nodiscard]] double log_jacobian(const Eigen::VectorXd& u) const {
        double lj = 0.0;
        (void)constrain(u, &lj);
        return lj;
    }

    /// Constrained flat row (draw-file representation).
    [[nodiscard]] Eigen::VectorXd flatten(const ParamVector& p) const {
        Eigen::VectorXd v(static_cast<Eigen::Index>(size_));
        write_common(p, v);
        if (tvarma()) {
            v[static_cast<Eigen::Index>(sigma_)] = p.sigma;
            std::size_t idx = omega_;
            for (std::size_t i = 1; i < d_; ++i)
                for (std::size_t j = 0; j < i; ++j)
                    v[static_cast<Eigen::Index>(idx++)] = p.omega_chol(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        }
        return v;
    }

    /// Inverse of `flatten`; the omega_chol diagonal is rebuilt from the unit-row-norm constraint.
    [[nodiscard]] ParamVector unflatten(const Eigen::VectorXd& v) const {
        check_size(v);
        ParamVector p = read_common(v);
        if (tvarma()) {
            p.sigma = v[static_cast<Eigen::Index>(sigma_)];
            const auto d = static_cast<Eigen::Index>(d_);
            p.omega_chol = Eigen::MatrixXd::Zero(d, d);
            std::size_t idx = omega_;
            for (Eigen::Index i = 0; i < d; ++i) {
                double sum_sq = 0.0;
                for (Eigen::Index j = 0; j < i; ++j) {
                    p.omega_chol(i, j) = v[static_cast<Eigen::Index>(idx++)];
                    sum_sq += p.omega_chol(i, j) * p.omega_chol(i, j);
                }
                if (sum_sq >= 1.0) throw DomainError("unflatten: correlation row norm exceeds one");
                p.omega_chol(i, i) = std::sqrt(1.0 - sum_sq);
            }
        }
        return p;
    }

private:
    void check_size(const Eigen::VectorXd& v) const {
        if (static_cast<std::size_t>(v.size()) != size_)
            throw DomainError("parameter vector has length " + std::to_string(v.size()) + ", expected " + std::to_string(size_));
    }

    ParamVector read_common(const Eigen::VectorXd& v) const {
        ParamVector p;
        const auto d = static_cast<Eigen::Index>(d_);
        auto read_matrix = [&](std::size_t off) {
            Eigen::MatrixXd m(d, d);
            for (Eigen::Index r = 0; r < d; ++r)
                for (Eigen::Index s = 0; s < d; ++s) m(r, s) = v[static_cast<Eigen::Index>(off) + r * d + s];
            return m;
        };
        for (std::size_t q = 0; q < spec_.ar_order; ++q) p.A.push_back(read_matrix(a_offset(q)));
        for (std::size_t q = 0; q < spec_.ma_order; ++q) p.B.push_back(read_matrix(b_offset(q)));
        p.beta = v.segment(static_cast<Eigen::Index>(beta_), static_cast<Eigen::Index>(n_beta_));
        p.gamma = v.segment(static_cast<Eigen::Index>(gamma_), static_cast<Eigen::Index>(n_gamma_));
        p.alpha = v.segment(static_cast<Eigen::Index>(alpha_), static_cast<Eigen::Index>(spec_.precision_ar_order));
        p.tau = v.segment(static_cast<Eigen::Index>(tau_), static_cast<Eigen::Index>(spec_.precision_ma_order));
        return p;
    }

    void write_common(const ParamVector& p, Eigen::VectorXd& v) const {
        const auto d = static_cast<Eigen::Index>(d_);
        auto write_matrix = [&](const Eigen::MatrixXd& m, std::size_t off) {
            if (m.rows() != d || m.cols() != d) throw DomainError("coefficient matrix has the wrong shape");
            for (Eigen::Index r = 0; r < d; ++r)
                for (Eigen::Index s = 0; s < d; ++s) v[static_cast<Eigen::Index>(off) + r * d + s] = m(r, s);
        };
        if (p.A.size() != spec_.ar_order || p.B.size() != spec_.ma_order) throw DomainError("wrong number of lag matrices");
        if (static_cast<std::size_t>(p.beta.size()) != n_beta_ || static_cast<std::size_t>(p.gamma.size()) != n_gamma_ ||
            static_cast<std::size_t>(p.alpha.size()) != spec_.precision_ar_order ||
            static_cast<std::size_t>(p.tau.size()) != spec_.precision_ma_order)
            throw DomainError("parameter group has the wrong length");
        for (std::size_t q = 0; q < spec_.ar_order; ++q) write_matrix(p.A[q], a_offset(q));
        for (std::size_t q = 0; q < spec_.ma_order; ++q) write_matrix(p.B[q], b_offset(q));
        v.segment(static_cast<Eigen::Index>(beta_), static_cast<Eigen::Index>(n_beta_)) = p.beta;
        v.segment(static_cast<Eigen::Index>(gamma_), static_cast<Eigen::Index>(n_gamma_)) = p.gamma;
        v.segment(static_cast<Eigen::Index>(alpha_), p.alpha.size()) = p.alpha;
        v.segment(static_cast<Eigen::Index>(tau_), p.tau.size()) = p.tau;
    }

    ModelSpec spec_;
    std::size_t d_ = 0;
    std::size_t a_ = 0, b_ = 0, beta_ = 0, gamma_ = 0, alpha_ = 0, tau_ = 0, sigma_ = 0, omega_ = 0, size_ = 0;
    std::size_t n_beta_ = 0, n_gamma_ = 0;
    std::vector<ColumnKind> beta_kinds_, gamma_kinds_;
    std::vector<std::string> beta_names_, gamma_names_;
};

}  // namespace bdarch
