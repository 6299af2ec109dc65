#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "bdarch/error.hpp"

namespace bdarch {

/// One validation-grid cell: model orders, yearly Fourier harmonics, and its validation scores.
struct SweepCell {
    std::size_t P = 1;
    std::size_t Q = 0;
    std::size_t k_year = 0;
    double fmae = 0.0;  // average over components
    double frss = 0.0;  // total over components

    [[nodiscard]] std::tuple<std::size_t, std::size_t, std::size_t> key() const { return {P, Q, k_year}; }
};

struct SweepGrid {
    std::vector<std::size_t> k_year{6, 8, 10, 12, 14, 16, 18};
    /// Orders tried in the second stage; (1, 0) is always included through stage one.
    std::vector<std::pair<std::size_t, std::size_t>> orders{{0, 1}, {1, 1}, {1, 2}, {1, 3}, {2, 1},
                                                            {2, 2}, {2, 3}, {3, 1}, {3, 2}, {3, 3}};

    void validate() const {
        if (k_year.empty()) throw ConfigError("sweep: empty K_year grid");
        for (const auto& [p, q] : orders)
            if (p == 0 && q == 0) throw ConfigError("sweep: order (0, 0) has no dynamics to select");
    }
};

struct SweepResult {
    std::vector<SweepCell> stage1;
    std::vector<SweepCell> stage2;  // includes the stage-one winner
    SweepCell stage1_best;
    SweepCell best;

    [[nodiscard]] std::string to_csv() const {
        std::ostringstream os;
        os.precision(10);
        os << "stage,P,Q,k_year,fmae,frss,selected\n";
        const auto emit = [&](int stage, const SweepCell& c, const SweepCell& pick) {
            os << stage << "," << c.P << "," << c.Q << "," << c.k_year << "," << c.fmae << "," << c.frss << ","
               << (c.key() == pick.key() ? 1 : 0) << "\n";
        };
        for (const auto& c : stage1) emit(1, c, stage1_best);
        for (const auto& c : stage2) emit(2, c, best);
        return os.str();
    }
};

/// Lowest FMAE; ties go to the smaller P + Q, then the smaller K_year.
inline const SweepCell& select_best(const std::vector<SweepCell>& cells) {
    if (cells.empty()) throw ConfigError("sweep: nothing to select from");
    const SweepCell* best = &cells.front();
    for (const auto& c : cells) {
        if (!std::isfinite(c.fmae)) continue;
        const auto rank = [](const SweepCell& x) { return std::make_tuple(x.fmae, x.P + x.Q, x.k_year); };
        if (!std::isfinite(best->fmae) || rank(c) < rank(*best)) best = &c;
    }
    if (!std::isfinite(best->fmae)) throw DomainError("sweep: no cell produced a finite FMAE");
    return *best;
}

/// Scores a (P, Q, K_year) cell on the validation window: returns {average FMAE, total FRSS}.
using CellEvaluator = std::function<std::pair<double, double>(std::size_t P, std::size_t Q, std::size_t k_year)>;

/**
 * Two-stage validation sweep. Stage one varies K_year at (P, Q) = (1, 0);
 * stage two keeps the winning K_year and varies (P, Q). Each cell is evaluated once.
 */
inline SweepResult run_sweep(const SweepGrid& grid, const CellEvaluator& evaluate) {
    grid.validate();
    SweepResult r;
    for (std::size_t k : grid.k_year) {
        const auto [fmae, frss] = evaluate(1, 0, k);
        r.stage1.push_back({1, 0, k, fmae, frss});
    }
    r.stage1_best = select_best(r.stage1);
    r.stage2.push_back(r.stage1_best);
    for (const auto& [p, q] : grid.orders) {
        if (p == 1 && q == 0) continue;
        const auto [fmae, frss] = evaluate(p, q, r.stage1_best.k_year);
        r.stage2.push_back({p, q, r.stage1_best.k_year, fmae, frss});
    }
    r.best = select_best(r.stage2);
    return r;
}

/// Evaluator backed by precomputed scores; a missing cell is an error.
inline CellEvaluator table_evaluator(const std::vector<SweepCell>& cells) {
    std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::pair<double, double>> table;
    for (const auto& c : cells) table[c.key()] = {c.fmae, c.frss};
    return [table](std::size_t P, std::size_t Q, std::size_t k) {
        const auto it = table.find({P, Q, k});
        if (it == table.end())
            throw ConfigError("sweep: no precomputed score for P=" + std::to_string(P) + " Q=" + std::to_string(Q) +
                              " K_year=" + std::to_string(k));
        return it->second;
    };
}

/// Grid covering exactly the cells of a precomputed table: its K_year values at (1, 0) and its other orders.
inline SweepGrid grid_from_cells(const std::vector<SweepCell>& cells) {
    SweepGrid g;
    g.k_year.clear();
    g.orders.clear();
    for (const auto& c : cells) {
        if (c.P == 1 && c.Q == 0) {
            if (std::find(g.k_year.begin(), g.k_year.end(), c.k_year) == g.k_year.end()) g.k_year.push_back(c.k_year);
        } else if (std::find(g.orders.begin(), g.orders.end(), std::make_pair(c.P, c.Q)) == g.orders.end()) {
            g.orders.emplace_back(c.P, c.Q);
        }
    }
    std::sort(g.k_year.begin(), g.k_year.end());
    return g;
}

}  // namespace bdarch
