#include <gtest/gtest.h>

#include <bdarch/sweep.hpp>

#include <algorithm>
#include <limits>
#include <map>
#include <set>

#include "regional_validation_scores.hpp"

using namespace bdarch;

namespace {

// Brute-force argmin written out independently of select_best.
SweepCell argmin(const std::vector<SweepCell>& cells) {
    SweepCell best{};
    bool have = false;
    for (const auto& c : cells) {
        if (!std::isfinite(c.fmae)) continue;
        const bool better = !have || c.fmae < best.fmae || (c.fmae == best.fmae && c.P + c.Q < best.P + best.Q) ||
                            (c.fmae == best.fmae && c.P + c.Q == best.P + best.Q && c.k_year < best.k_year);
        if (better) best = c, have = true;
    }
    return best;
}

SweepResult sweep_table(const std::vector<SweepCell>& cells) { return run_sweep(grid_from_cells(cells), table_evaluator(cells)); }

}  // namespace

TEST(Sweep, RegionOneStageOnePicksEightHarmonics) {
    const SweepResult r = sweep_table(regional_scores::region1());
    EXPECT_EQ(r.stage1.size(), 7u);
    EXPECT_EQ(r.stage1_best.k_year, 8u);
    EXPECT_DOUBLE_EQ(r.stage1_best.fmae, 0.36);
    EXPECT_EQ(r.best.P, 1u);
    EXPECT_EQ(r.best.Q, 0u);
    EXPECT_EQ(r.best.k_year, 8u);
    EXPECT_DOUBLE_EQ(r.best.fmae, 0.36);
    EXPECT_DOUBLE_EQ(r.best.frss, 1.73);
}

TEST(Sweep, ThreeCellStageOneExample) {
    const std::vector<SweepCell> cells{{1, 0, 8, 0.36, 1.73}, {1, 0, 10, 0.45, 2.65}, {1, 0, 6, 0.38, 1.75}};
    const SweepResult r = sweep_table(cells);
    EXPECT_EQ(r.stage1_best.k_year, 8u);
    EXPECT_EQ(r.best.k_year, 8u);
    ASSERT_EQ(r.stage1.size(), 3u);
    EXPECT_EQ(r.stage1.front().k_year, 6u);  // visited in ascending K_year
}

TEST(Sweep, AllRegionsMatchPublishedSelections) {
    struct Expected {
        std::size_t P, Q, k;
        double fmae, frss;
    };
    const std::vector<std::pair<std::vector<SweepCell>, Expected>> regions{
        {regional_scores::region1(), {1, 0, 8, 0.36, 1.73}},
        {regional_scores::region2(), {1, 1, 10, 1.27, 20.18}},
        {regional_scores::region3(), {1, 1, 10, 2.83, 113.95}},
        {regional_scores::region4(), {3, 2, 8, 1.16, 15.53}},
    };
    for (std::size_t i = 0; i < regions.size(); ++i) {
        const auto& [cells, want] = regions[i];
        const SweepResult r = sweep_table(cells);
        EXPECT_EQ(r.best.P, want.P) << "region " << i + 1;
        EXPECT_EQ(r.best.Q, want.Q) << "region " << i + 1;
        EXPECT_EQ(r.best.k_year, want.k) << "region " << i + 1;
        EXPECT_DOUBLE_EQ(r.best.fmae, want.fmae) << "region " << i + 1;
        EXPECT_DOUBLE_EQ(r.best.frss, want.frss) << "region " << i + 1;

        std::vector<SweepCell> stage1;
        for (const auto& c : cells)
            if (c.P == 1 && c.Q == 0) stage1.push_back(c);
        EXPECT_EQ(r.stage1_best.key(), argmin(stage1).key()) << "region " << i + 1;
        std::vector<SweepCell> stage2;
        for (const auto& c : cells)
            if (c.k_year == r.stage1_best.k_year) stage2.push_back(c);
        EXPECT_EQ(r.best.key(), argmin(stage2).key()) << "region " << i + 1;
    }
}

TEST(Sweep, EvaluatesEachCellOnceAndStageTwoUsesWinningHarmonics) {
    std::map<std::tuple<std::size_t, std::size_t, std::size_t>, int> calls;
    const SweepGrid grid;
    const SweepResult r = run_sweep(grid, [&](std::size_t P, std::size_t Q, std::size_t k) {
        ++calls[{P, Q, k}];
        // stage one favours K_year 12; stage two favours (2, 1)
        const double stage1 = std::abs(static_cast<double>(k) - 12.0);
        const double stage2 = std::abs(static_cast<double>(P) - 2.0) + std::abs(static_cast<double>(Q) - 1.0);
        return std::make_pair(stage1 + stage2 * 0.5 + 0.01, 1.0);
    });
    for (const auto& [key, n] : calls) EXPECT_EQ(n, 1);
    EXPECT_EQ(calls.size(), grid.k_year.size() + grid.orders.size());
    for (const auto& c : r.stage2) EXPECT_EQ(c.k_year, 12u);
    EXPECT_EQ(r.stage2.size(), grid.orders.size() + 1);
    EXPECT_EQ(r.best.P, 2u);
    EXPECT_EQ(r.best.Q, 1u);
}

TEST(Sweep, SingleCellGridReturnsThatCell) {
    SweepGrid g;
    g.k_year = {4};
    g.orders.clear();
    const SweepResult r = run_sweep(g, [](std::size_t, std::size_t, std::size_t) { return std::make_pair(0.7, 2.5); });
    EXPECT_EQ(r.best.key(), std::make_tuple(std::size_t{1}, std::size_t{0}, std::size_t{4}));
    EXPECT_DOUBLE_EQ(r.best.fmae, 0.7);
    EXPECT_DOUBLE_EQ(r.best.frss, 2.5);
}

TEST(Sweep, TiesGoToFewerOrdersThenFewerHarmonics) {
    const std::vector<SweepCell> by_order{{2, 1, 8, 0.5, 9.0}, {1, 1, 8, 0.5, 1.0}, {3, 0, 8, 0.5, 0.1}};
    EXPECT_EQ(select_best(by_order).P, 1u);
    EXPECT_EQ(select_best(by_order).Q, 1u);
    const std::vector<SweepCell> by_k{{1, 0, 12, 0.5, 1.0}, {1, 0, 6, 0.5, 9.0}, {1, 0, 8, 0.5, 0.0}};
    EXPECT_EQ(select_best(by_k).k_year, 6u);
    // FRSS is reported but never decides
    const std::vector<SweepCell> frss{{1, 0, 6, 0.51, 0.0}, {1, 0, 8, 0.50, 100.0}};
    EXPECT_EQ(select_best(frss).k_year, 8u);
}

TEST(Sweep, FailedCellsAreSkipped) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const std::vector<SweepCell> cells{{1, 0, 6, nan, nan}, {1, 0, 8, 0.9, 1.0}, {1, 0, 10, nan, nan}};
    EXPECT_EQ(select_best(cells).k_year, 8u);
    EXPECT_THROW(select_best({{1, 0, 6, nan, nan}}), DomainError);
}

TEST(Sweep, RejectsEmptyGridsAndMissingCells) {
    SweepGrid g;
    g.k_year.clear();
    EXPECT_THROW(run_sweep(g, [](std::size_t, std::size_t, std::size_t) { return std::make_pair(1.0, 1.0); }), ConfigError);
    SweepGrid zero;
    zero.orders = {{0, 0}};
    EXPECT_THROW(zero.validate(), ConfigError);
    EXPECT_THROW(select_best({}), ConfigError);

    auto cells = regional_scores::region1();
    cells.erase(std::remove_if(cells.begin(), cells.end(), [](const SweepCell& c) { return c.P == 2 && c.Q == 2; }), cells.end());
    SweepGrid full;
    full.k_year = {6, 8};
    EXPECT_THROW(run_sweep(full, table_evaluator(cells)), ConfigError);
}

TEST(Sweep, CsvMarksOneSelectionPerStage) {
    const SweepResult r = sweep_table(regional_scores::region4());
    const std::string csv = r.to_csv();
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "stage,P,Q,k_year,fmae,frss,selected");
    int selected1 = 0, selected2 = 0, rows = 0;
    std::size_t pos = csv.find('\n') + 1;
    while (pos < csv.size()) {
        const std::size_t end = csv.find('\n', pos);
        const std::string line = csv.substr(pos, end - pos);
        ++rows;
        if (line.back() == '1') (line[0] == '1' ? selected1 : selected2)++;
        pos = end + 1;
    }
    EXPECT_EQ(rows, 7 + 11);
    EXPECT_EQ(selected1, 1);
    EXPECT_EQ(selected2, 1);
    EXPECT_NE(csv.find("2,3,2,8,1.16,15.53,1"), std::string::npos);
}
