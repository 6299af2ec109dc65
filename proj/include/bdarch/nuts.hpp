#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>

#include "bdarch/error.hpp"
#include "bdarch/random.hpp"
#include "bdarch/special.hpp"

namespace bdarch {

/// Anything exposing `dimension()` and `log_density_gradient(u, grad) -> double`.
template <class T>
concept DifferentiableTarget = requires(const T& t, const Eigen::VectorXd& u, Eigen::VectorXd& g) {
    { t.dimension() } -> std::convertible_to<std::size_t>;
    { t.log_density_gradient(u, g) } -> std::convertible_to<double>;
};

namespace nuts {

/// Position, momentum and cached log density/gradient along a trajectory.
struct PhasePoint {
    Eigen::VectorXd q, p, grad;
    double log_density = -std::numeric_limits<double>::infinity();
};

struct Transition {
    double accept_stat = 0.0;
    int depth = 0;
    int n_leapfrog = 0;
    bool divergent = false;
    double energy = 0.0;
};

/// Dual averaging of log step size towards a target acceptance statistic.
class StepSizeAdaptation {
public:
    double target = 0.8, gamma = 0.05, kappa = 0.75, t0 = 10.0;

    void set_mu(double mu) { mu_ = mu; }
    void restart() {
        counter_ = 0.0;
        s_bar_ = 0.0;
        x_bar_ = 0.0;
    }
    void learn(double& epsilon, double accept_stat) {
        counter_ += 1.0;
        accept_stat = std::min(1.0, accept_stat);
        const double eta = 1.0 / (counter_ + t0);
        s_bar_ = (1.0 - eta) * s_bar_ + eta * (target - accept_stat);
        const double x = mu_ - s_bar_ * std::sqrt(counter_) / gamma;
        const double x_eta = std::pow(counter_, -kappa);
        x_bar_ = (1.0 - x_eta) * x_bar_ + x_eta * x;
        epsilon = std::exp(x);
    }
    [[nodiscard]] double final_step_size() const { return std::exp(x_bar_); }

private:
    double mu_ = 0.0, counter_ = 0.0, s_bar_ = 0.0, x_bar_ = 0.0;
};

/**
 * Diagonal metric estimation over expanding windows: an initial fast buffer,
 * doubling slow windows, then a terminal fast buffer. Variances are shrunk
 * towards 1e-3 with weight 5/(n+5).
 */
class MetricAdaptation {
public:
    MetricAdaptation(std::size_t num_warmup, std::size_t dim, std::size_t init_buffer = 75, std::size_t term_buffer = 50,
                     std::size_t base_window = 25)
        : warmup_(num_warmup), init_(init_buffer), term_(term_buffer), base_(base_window),
          mean_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim))), m2_(mean_) {
        if (warmup_ < 20) {
            enabled_ = false;
        } else if (init_ + base_ + term_ > warmup_) {
            init_ = static_cast<std::size_t>(0.15 * static_cast<double>(warmup_));
            term_ = static_cast<std::size_t>(0.1 * static_cast<double>(warmup_));
            base_ = warmup_ - (init_ + term_);
        }
        window_size_ = base_;
        next_window_ = init_ + window_size_ - 1;
    }

    /// Feeds one warm-up position; returns true when `inv_metric` was updated.
    bool learn(Eigen::VectorXd& inv_metric, const Eigen::VectorXd& q) {
        if (!enabled_) return false;
        if (in_window()) add(q);
        if (end_of_window()) {
            next_window();
            const double n = static_cast<double>(n_);
            Eigen::VectorXd var = m2_ / (n - 1.0);
            inv_metric = (n / (n + 5.0)) * var.array() + 1e-3 * (5.0 / (n + 5.0));
            mean_.setZero();
            m2_.setZero();
            n_ = 0;
            ++counter_;
            return true;
        }
        ++counter_;
        return false;
    }

private:
    [[nodiscard]] bool in_window() const {
        return counter_ >= init_ && counter_ < warmup_ - term_ && counter_ != warmup_;
    }
    [[nodiscard]] bool end_of_window() const { return counter_ == next_window_ && counter_ != warmup_; }
    void next_window() {
        if (next_window_ == warmup_ - term_ - 1) return;
        window_size_ *= 2;
        next_window_ = counter_ + window_size_;
        if (next_window_ != warmup_ - term_ - 1) {
            const std::size_t boundary = next_window_ + 2 * window_size_;
            if (boundary >= warmup_ - term_) next_window_ = warmup_ - term_ - 1;
        }
    }
    void add(const Eigen::VectorXd& q) {
        ++n_;
        const Eigen::VectorXd delta = q - mean_;
        mean_ += delta / static_cast<double>(n_);
        m2_ += delta.cwiseProduct(q - mean_);
    }

    std::size_t warmup_, init_, term_, base_;
    bool enabled_ = true;
    std::size_t counter_ = 0, window_size_ = 0, next_window_ = 0, n_ = 0;
    Eigen::VectorXd mean_, m2_;
};

/// Multinomial no-U-turn sampler with a diagonal Euclidean metric.
template <DifferentiableTarget Target>
class Sampler {
public:
    Sampler(const Target& target, Rng& rng, int max_depth = 10, double max_delta_h = 1000.0)
        : target_(target), rng_(rng), max_depth_(max_depth), max_delta_h_(max_delta_h) {
        const auto n = static_cast<Eigen::Index>(target.dimension());
        inv_metric_ = Eigen::VectorXd::Ones(n);
    }

    void set_position(const Eigen::VectorXd& q) {
        z_.q = q;
        z_.log_density = target_.log_density_gradient(z_.q, z_.grad);
        if (!std::isfinite(z_.log_density)) throw InitializationError("sampler started at a point with zero density");
    }

    [[nodiscard]] const Eigen::VectorXd& position() const noexcept { return z_.q; }
    [[nodiscard]] double log_density() const noexcept { return z_.log_density; }
    [[nodiscard]] double step_size() const noexcept { return epsilon_; }
    void set_step_size(double e) { epsilon_ = e; }
    Eigen::VectorXd& inv_metric() noexcept { return inv_metric_; }

    /// Doubles or halves the step size until one leapfrog step crosses acceptance 0.8.
    void init_step_size() {
        if (epsilon_ == 0.0 || epsilon_ > 1e7 || std::isnan(epsilon_)) return;
        const PhasePoint start = z_;
        auto one_step = [&] {
            z_ = start;
            sample_momentum();
            const double h0 = hamiltonian(z_);
            leapfrog(z_, epsilon_);
            double h = hamiltonian(z_);
            if (std::isnan(h)) h = std::numeric_limits<double>::infinity();
            return h0 - h;
        };
        const int direction = one_step() > std::log(0.8) ? 1 : -1;
        for (int iter = 0; iter < 100; ++iter) {
            const double delta_h = one_step();
            if (direction == 1 && !(delta_h > std::log(0.8))) break;
            if (direction == -1 && !(delta_h < std::log(0.8))) break;
            epsilon_ = direction == 1 ? 2.0 * epsilon_ : 0.5 * epsilon_;
            if (epsilon_ > 1e7 || epsilon_ < 1e-12) break;
        }
        epsilon_ = std::clamp(epsilon_, 1e-12, 1e7);
        z_ = start;
    }

    Transition transition() {
        sample_momentum();
        PhasePoint z_fwd = z_, z_bck = z_, z_sample = z_, z_propose = z_;
        const Eigen::VectorXd p_sharp0 = inv_metric_.cwiseProduct(z_.p);
        Eigen::VectorXd p_sharp_fwd_fwd = p_sharp0, p_sharp_fwd_bck = p_sharp0;
        Eigen::VectorXd p_sharp_bck_fwd = p_sharp0, p_sharp_bck_bck = p_sharp0;
        Eigen::VectorXd p_fwd_fwd = z_.p, p_fwd_bck = z_.p, p_bck_fwd = z_.p, p_bck_bck = z_.p;
        Eigen::VectorXd rho = z_.p;
        double log_sum_weight = 0.0;
        const double h0 = hamiltonian(z_);
        int n_leapfrog = 0;
        double sum_metro = 0.0;
        int depth = 0;
        divergent_ = false;

        while (depth < max_depth_) {
            const auto n = rho.size();
            Eigen::VectorXd rho_fwd = Eigen::VectorXd::Zero(n), rho_bck = Eigen::VectorXd::Zero(n);
            bool valid = false;
            double log_sum_weight_subtree = -std::numeric_limits<double>::infinity();
            if (uniform01(rng_) > 0.5) {
                z_ = z_fwd;
                rho_bck = rho;
                p_bck_fwd = p_fwd_bck;
                p_sharp_bck_fwd = p_sharp_fwd_bck;
                valid = build_tree(depth, z_propose, p_sharp_fwd_bck, p_sharp_fwd_fwd, rho_fwd, p_fwd_bck, p_fwd_fwd, h0, 1.0,
                                   n_leapfrog, log_sum_weight_subtree, sum_metro);
                z_fwd = z_;
            } else {
                z_ = z_bck;
                rho_fwd = rho;
                p_fwd_bck = p_bck_fwd;
                p_sharp_fwd_bck = p_sharp_bck_fwd;
                valid = build_tree(depth, z_propose, p_sharp_bck_fwd, p_sharp_bck_bck, rho_bck, p_bck_fwd, p_bck_bck, h0, -1.0,
                                   n_leapfrog, log_sum_weight_subtree, sum_metro);
                z_bck = z_;
            }
            if (!valid) break;
            ++depth;
            if (log_sum_weight_subtree > log_sum_weight) {
                z_sample = z_propose;
            } else if (uniform01(rng_) < std::exp(log_sum_weight_subtree - log_sum_weight)) {
                z_sample = z_propose;
            }
            log_sum_weight = special::log_sum_exp(log_sum_weight, log_sum_weight_subtree);
            rho = rho_bck + rho_fwd;
            bool persist = criterion(p_sharp_bck_bck, p_sharp_fwd_fwd, rho);
            persist = persist && criterion(p_sharp_bck_bck, p_sharp_fwd_bck, rho_bck + p_fwd_bck);
            persist = persist && criterion(p_sharp_bck_fwd, p_sharp_fwd_fwd, rho_fwd + p_bck_fwd);
            if (!persist) break;
        }
        z_ = z_sample;
        Transition t;
        t.depth = depth;
        t.n_leapfrog = n_leapfrog;
        t.accept_stat = n_leapfrog > 0 ? sum_metro / n_leapfrog : 0.0;
        t.divergent = divergent_;
        t.energy = hamiltonian(z_);
        return t;
    }

private:
    static bool criterion(const Eigen::VectorXd& p_sharp_minus, const Eigen::VectorXd& p_sharp_plus, const Eigen::VectorXd& rho) {
        return p_sharp_plus.dot(rho) > 0.0 && p_sharp_minus.dot(rho) > 0.0;
    }

    void sample_momentum() {
        z_.p.resize(inv_metric_.size());
        for (Eigen::Index i = 0; i < inv_metric_.size(); ++i) z_.p[i] = standard_normal(rng_) / std::sqrt(inv_metric_[i]);
    }

    [[nodiscard]] double hamiltonian(const PhasePoint& z) const {
        return -z.log_density + 0.5 * z.p.dot(inv_metric_.cwiseProduct(z.p));
    }

    void leapfrog(PhasePoint& z, double eps) const {
        z.p += 0.5 * eps * z.grad;
        z.q += eps * inv_metric_.cwiseProduct(z.p);
        z.log_density = target_.log_density_gradient(z.q, z.grad);
        if (!std::isfinite(z.log_density) || !z.grad.allFinite()) {
            z.log_density = -std::numeric_limits<double>::infinity();
            z.grad.setZero(z.q.size());
            return;
        }
        z.p += 0.5 * eps * z.grad;
    }

    bool build_tree(int depth, PhasePoint& z_propose, Eigen::VectorXd& p_sharp_beg, Eigen::VectorXd& p_sharp_end,
                    Eigen::VectorXd& rho, Eigen::VectorXd& p_beg, Eigen::VectorXd& p_end, double h0, double sign,
                    int& n_leapfrog, double& log_sum_weight, double& sum_metro) {
        if (depth == 0) {
            leapfrog(z_, sign * epsilon_);
            ++n_leapfrog;
            double h = hamiltonian(z_);
            if (std::isnan(h)) h = std::numeric_limits<double>::infinity();
            if (h - h0 > max_delta_h_) divergent_ = true;
            log_sum_weight = special::log_sum_exp(log_sum_weight, h0 - h);
            sum_metro += h0 - h > 0.0 ? 1.0 : std::exp(h0 - h);
            z_propose = z_;
            p_sharp_beg = inv_metric_.cwiseProduct(z_.p);
            p_sharp_end = p_sharp_beg;
            rho += z_.p;
            p_beg = z_.p;
            p_end = p_beg;
            return !divergent_;
        }
        const auto n = z_.q.size();
        double lsw_init = -std::numeric_limits<double>::infinity();
        Eigen::VectorXd p_init_end(n), p_sharp_init_end(n), rho_init = Eigen::VectorXd::Zero(n);
        if (!build_tree(depth - 1, z_propose, p_sharp_beg, p_sharp_init_end, rho_init, p_beg, p_init_end, h0, sign,
                        n_leapfrog, lsw_init, sum_metro))
            return false;

        PhasePoint z_propose_final = z_;
        double lsw_final = -std::numeric_limits<double>::infinity();
        Eigen::VectorXd p_final_beg(n), p_sharp_final_beg(n), rho_final = Eigen::VectorXd::Zero(n);
        if (!build_tree(depth - 1, z_propose_final, p_sharp_final_beg, p_sharp_end, rho_final, p_final_beg, p_end, h0, sign,
                        n_leapfrog, lsw_final, sum_metro))
            return false;

        const double lsw_subtree = special::log_sum_exp(lsw_init, lsw_final);
        log_sum_weight = special::log_sum_exp(log_sum_weight, lsw_subtree);
        if (lsw_final > lsw_subtree) {
            z_propose = z_propose_final;
        } else if (uniform01(rng_) < std::exp(lsw_final - lsw_subtree)) {
            z_propose = z_propose_final;
        }
        const Eigen::VectorXd rho_subtree = rho_init + rho_final;
        rho += rho_subtree;
        bool persist = criterion(p_sharp_beg, p_sharp_end, rho_subtree);
        persist = persist && criterion(p_sharp_beg, p_sharp_final_beg, rho_init + p_final_beg);
        persist = persist && criterion(p_sharp_init_end, p_sharp_end, rho_final + p_init_end);
        return persist;
    }

    const Target& target_;
    Rng& rng_;
    int max_depth_;
    double max_delta_h_;
    double epsilon_ = 1.0;
    bool divergent_ = false;
    Eigen::VectorXd inv_metric_;
    PhasePoint z_;
};

}  // namespace nuts
}  // namespace bdarch
