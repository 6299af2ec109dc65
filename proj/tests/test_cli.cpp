#include <gtest/gtest.h>

#include <bdarch/cli.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "regional_validation_scores.hpp"

using namespace bdarch;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("bdarch_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }
    [[nodiscard]] std::string path(const std::string& name) const { return (dir_ / name).string(); }
    fs::path dir_;
};

const std::vector<std::string> kTinySampler{"--chains", "2", "--warmup", "100", "--keep", "60"};

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

}  // namespace

TEST_F(CliTest, SimulateWritesOneRowPerReplicateAndModel) {
    const auto args = concat({"simulate", "--study", "2", "--replicates", "2", "--seed", "7", "--length", "40", "--train", "30"},
                             kTinySampler);
    const Result a = run(concat(args, {"--out", path("a")}));
    ASSERT_EQ(a.code, 0) << a.err;
    const std::string csv = slurp(path("a/metrics.csv"));
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2 * 3);
    EXPECT_TRUE(fs::exists(path("a/pacf.csv")));
    const auto manifest = cli::json::parse(slurp(path("a/manifest.json")));
    EXPECT_EQ(manifest["seed"].get<std::uint64_t>(), 7u);
    EXPECT_EQ(manifest["seed_source"], "flag");

    const Result b = run(concat(args, {"--out", path("b")}));
    ASSERT_EQ(b.code, 0);
    EXPECT_EQ(slurp(path("b/metrics.csv")), csv);
    EXPECT_EQ(slurp(path("b/pacf.csv")), slurp(path("a/pacf.csv")));
}

TEST_F(CliTest, UnknownStudyIsAUsageError) {
    const Result r = run({"simulate", "--study", "7", "--replicates", "1", "--out", path("x")});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("study"), std::string::npos);
    EXPECT_NE(r.err.find("usage"), std::string::npos);
    EXPECT_EQ(run({"simulate"}).code, 2);          // --study is required
    EXPECT_EQ(run({"no-such-command"}).code, 2);
    EXPECT_EQ(run({}).code, 2);
    EXPECT_EQ(run({"--help"}).code, 0);
}

TEST_F(CliTest, MissingSeedIsDrawnAndRecorded) {
    const Result r = run({"simulate", "--study", "1", "--replicates", "1", "--series-only", "--out", path("s")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto manifest = cli::json::parse(slurp(path("s/manifest.json")));
    EXPECT_EQ(manifest["seed_source"], "entropy");
    const auto seed = manifest["seed"].get<std::uint64_t>();
    const Result again = run({"simulate", "--study", "1", "--replicates", "1", "--series-only", "--seed", std::to_string(seed), "--out",
                              path("t")});
    ASSERT_EQ(again.code, 0);
    EXPECT_EQ(slurp(path("s/series_1.csv")), slurp(path("t/series_1.csv")));
}

TEST_F(CliTest, OutputDirectoryFallsBackToEnvironment) {
    const std::string env = path("from_env");
    ::setenv(cli::kOutDirEnv, env.c_str(), 1);
    const Result r = run({"simulate", "--study", "3", "--replicates", "1", "--series-only", "--seed", "1"});
    ::unsetenv(cli::kOutDirEnv);
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(env + "/series_1.csv"));
}

TEST_F(CliTest, FitForecastEvaluateRoundTrip) {
    ASSERT_EQ(run({"simulate", "--study", "1", "--replicates", "1", "--length", "70", "--no-perturb", "--series-only", "--seed", "3",
                   "--out", path("sim")})
                  .code,
              0);
    // first 60 rows for fitting; the last 10 are held out
    std::istringstream full(slurp(path("sim/series_1.csv")));
    std::ostringstream train;
    std::string line;
    for (int i = 0; i < 61 && std::getline(full, line); ++i) train << line << "\n";
    spit(path("train.csv"), train.str());

    const Result fit = run(concat({"fit", "--data", path("train.csv"), "--variant", "bdarma_darch", "--prec-ar", "1", "--prec-ma", "1",
                                   "--ref-component", "c2", "--seed", "5", "--out", path("fit")},
                                  kTinySampler));
    ASSERT_TRUE(fit.code == 0 || fit.code == 3) << fit.err;
    const auto summary = cli::json::parse(slurp(path("fit/fit_summary.json")));
    EXPECT_EQ(summary["model"]["reference_index"].get<std::size_t>(), 1u);
    EXPECT_EQ(summary["reference"], "c2");
    EXPECT_EQ(summary["fit_rows"].get<std::size_t>(), 60u);
    EXPECT_EQ(summary["diagnostics"]["converged"].get<bool>(), fit.code == 0);
    const std::string draws = slurp(path("fit/draws.csv"));
    EXPECT_EQ(draws.rfind("chain,draw,", 0), 0u);
    EXPECT_EQ(std::count(draws.begin(), draws.end(), '\n'), 1 + 2 * 60);

    const std::vector<std::string> fc_args{"forecast", "--draws", path("fit/draws.csv"), "--data", path("train.csv"), "--horizon", "10",
                                           "--seed", "9"};
    const Result fc = run(concat(fc_args, {"--out", path("fc")}));
    ASSERT_EQ(fc.code, 0) << fc.err;
    std::istringstream fin(slurp(path("fc/forecast.csv")));
    const io::ForecastTable table = io::read_forecast_csv(fin);
    EXPECT_EQ(table.times.front(), "61");
    EXPECT_EQ(table.times.back(), "70");
    EXPECT_EQ(table.point.rows(), 10);
    EXPECT_EQ(table.point.cols(), 5);
    EXPECT_TRUE((table.lower_95->array() <= table.upper_95->array()).all());
    for (Eigen::Index s = 0; s < 10; ++s) EXPECT_NEAR(table.point.row(s).sum(), 1.0, 1e-9);
    ASSERT_EQ(run(concat(fc_args, {"--out", path("fc2")})).code, 0);
    EXPECT_EQ(slurp(path("fc2/forecast.csv")), slurp(path("fc/forecast.csv")));

    const Result ev = run({"evaluate", "--forecast", path("fc/forecast.csv"), "--actuals", path("sim/series_1.csv"), "--out", path("ev")});
    ASSERT_EQ(ev.code, 0) << ev.err;
    std::istringstream metrics(slurp(path("ev/metrics.csv")));
    std::getline(metrics, line);
    EXPECT_EQ(line, "component,frmse,fmae,frss,coverage");
    int rows = 0;
    while (std::getline(metrics, line)) {
        ++rows;
        std::istringstream fields(line);
        std::string f;
        std::getline(fields, f, ',');
        while (std::getline(fields, f, ',')) EXPECT_TRUE(std::isfinite(std::stod(f))) << line;
    }
    EXPECT_EQ(rows, 5 + 2);
}

TEST_F(CliTest, FitRejectsMalformedRowsWithLineNumber) {
    spit(path("bad.csv"), "time,a,b,c\n1,0.2,0.3,0.5\n2,0.2,-0.3,1.1\n");
    const Result r = run({"fit", "--data", path("bad.csv"), "--seed", "1", "--out", path("o")});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("bad.csv:3"), std::string::npos) << r.err;
    spit(path("good.csv"), "time,a,b,c\n1,0.2,0.3,0.5\n2,0.3,0.3,0.4\n3,0.2,0.4,0.4\n");
    const Result ref = run({"fit", "--data", path("good.csv"), "--ref-component", "ZZZ", "--out", path("o")});
    EXPECT_EQ(ref.code, 2);
    EXPECT_NE(ref.err.find("ZZZ"), std::string::npos) << ref.err;
}

TEST_F(CliTest, ForecastRejectsNonPositiveHorizon) {
    spit(path("d.csv"), "chain,draw,x\n1,1,0\n");
    spit(path("s.csv"), "time,a,b\n1,0.5,0.5\n");
    EXPECT_EQ(run({"forecast", "--draws", path("d.csv"), "--data", path("s.csv"), "--horizon", "0"}).code, 2);
    EXPECT_EQ(run({"forecast", "--draws", path("d.csv"), "--data", path("s.csv"), "--horizon", "-3"}).code, 2);
}

TEST_F(CliTest, EvaluatePerfectForecastScoresZeroAndScaleOnlyChangesDisplay) {
    spit(path("actual.csv"), "time,a,b\n1,0.4,0.6\n2,0.3,0.7\n");
    spit(path("fc.csv"),
         "time,component,point,lower_95,upper_95\n2,a,0.3,0.2,0.4\n2,b,0.7,0.6,0.8\n1,a,0.4,0.5,0.6\n1,b,0.6,0.5,0.7\n");
    const Result r = run({"evaluate", "--forecast", path("fc.csv"), "--actuals", path("actual.csv"), "--out", path("e")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("mean,0,0,0,0.75"), std::string::npos) << r.out;  // a at time 1 falls outside its interval

    spit(path("off.csv"), "time,component,point\n1,a,0.5\n1,b,0.5\n");
    const Result raw = run({"evaluate", "--forecast", path("off.csv"), "--actuals", path("actual.csv"), "--out", path("e1")});
    const Result scaled =
        run({"evaluate", "--forecast", path("off.csv"), "--actuals", path("actual.csv"), "--scale", "100", "--out", path("e2")});
    ASSERT_EQ(raw.code, 0);
    EXPECT_NE(raw.out.find("a,0.1,0.1,0.01"), std::string::npos) << raw.out;
    EXPECT_NE(scaled.out.find("a,10,10,1\n"), std::string::npos) << scaled.out;
    EXPECT_EQ(raw.out.find("coverage"), std::string::npos);
}

TEST_F(CliTest, EvaluateNamesFirstMisalignedKey) {
    spit(path("actual.csv"), "time,a,b\n1,0.4,0.6\n");
    spit(path("fc.csv"), "time,component,point\n1,a,0.4\n1,b,0.6\n2,a,0.4\n2,b,0.6\n");
    const Result r = run({"evaluate", "--forecast", path("fc.csv"), "--actuals", path("actual.csv")});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("'2'"), std::string::npos) << r.err;
}

TEST_F(CliTest, SweepTableModeSelectsRegionOneCell) {
    std::ostringstream table;
    table << "P,Q,k_year,fmae,frss\n";
    for (const auto& c : regional_scores::region1()) table << c.P << "," << c.Q << "," << c.k_year << "," << c.fmae << "," << c.frss << "\n";
    spit(path("cells.csv"), table.str());
    const Result r = run({"sweep", "--table", path("cells.csv"), "--out", path("sw")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("stage 1 best: K_year=8"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("selected: P=1 Q=0 K_year=8 FMAE 0.36 FRSS 1.73"), std::string::npos) << r.out;
    EXPECT_TRUE(fs::exists(path("sw/sweep.csv")));

    const Result narrowed = run({"sweep", "--table", path("cells.csv"), "--k-year", "6,8", "--orders", "2:1", "--out", path("sw2")});
    ASSERT_EQ(narrowed.code, 0) << narrowed.err;
    EXPECT_NE(narrowed.out.find("selected: P=1 Q=0 K_year=8"), std::string::npos) << narrowed.out;
    EXPECT_EQ(std::count(narrowed.out.begin(), narrowed.out.end(), '\n'), 2);
    // (2, 1) was only scored at K_year 8, so a stage-one pick of 10 leaves it without a score
    const Result missing = run({"sweep", "--table", path("cells.csv"), "--k-year", "10", "--orders", "2:1", "--out", path("sw3")});
    EXPECT_EQ(missing.code, 2);
    EXPECT_NE(missing.err.find("K_year=10"), std::string::npos) << missing.err;
}

TEST_F(CliTest, SweepEmptyGridIsAUsageError) {
    spit(path("cfg.json"), R"({"sweep": {"k_year": []}, "data": {"path": "nowhere.csv"}})");
    EXPECT_EQ(run({"sweep", "--config", path("cfg.json")}).code, 2);
    spit(path("cells.csv"), "P,Q,k_year,fmae,frss\n2,1,8,0.4,3.96\n");
    EXPECT_EQ(run({"sweep", "--table", path("cells.csv")}).code, 2);  // no (1, 0) cells: stage one is empty
    EXPECT_EQ(run({"sweep"}).code, 2);
}

TEST_F(CliTest, ConfigFileIsStrictAndFlagsOverrideIt) {
    spit(path("typo.json"), R"({"modle": {}})");
    const Result typo = run({"simulate", "--study", "1", "--config", path("typo.json")});
    EXPECT_EQ(typo.code, 2);
    EXPECT_NE(typo.err.find("modle"), std::string::npos);

    spit(path("cfg.json"), R"({"seed": 11, "output": {"dir": ")" + path("cfg_out") + R"("}})");
    ASSERT_EQ(run({"simulate", "--study", "1", "--replicates", "1", "--series-only", "--config", path("cfg.json")}).code, 0);
    EXPECT_EQ(cli::json::parse(slurp(path("cfg_out/manifest.json")))["seed"].get<int>(), 11);
    EXPECT_EQ(cli::json::parse(slurp(path("cfg_out/manifest.json")))["seed_source"], "config");
    ASSERT_EQ(run({"simulate", "--study", "1", "--replicates", "1", "--series-only", "--config", path("cfg.json"), "--seed", "12",
                   "--out", path("flag_out")})
                  .code,
              0);
    EXPECT_EQ(cli::json::parse(slurp(path("flag_out/manifest.json")))["seed"].get<int>(), 12);
}

TEST(CliConfig, JsonRoundTrip) {
    cli::RunConfig c;
    c.model.variant = Variant::BDarmaDarch;
    c.model.ar_order = 2;
    c.model.precision_ar_order = 1;
    c.model.mean_covariates.include_trend = true;
    c.model.mean_covariates.seasonal_blocks = {{7.0, 3}, {365.25, 8}};
    c.reference = "USD";
    c.priors = Priors::currency();
    c.sampler.n_chains = 3;
    c.train_end = "2020-06-30";
    c.validation_end = "2020-09-30";
    c.scale = 100;
    c.seed = 99;
    c.grid.k_year = {6, 8};
    const cli::json j = c.to_json();
    const cli::RunConfig back = cli::RunConfig::from_json(j);
    EXPECT_EQ(back.to_json(), j);
    EXPECT_EQ(back.model.variant, Variant::BDarmaDarch);
    EXPECT_EQ(back.model.mean_covariates.seasonal_blocks[1].harmonics, 8u);
    EXPECT_EQ(*back.reference, "USD");
    EXPECT_DOUBLE_EQ(back.priors.mean_intercept.sd, 2.0);
}

TEST(CliConfig, SplitResolution) {
    const CompositionalSeries s(std::vector<Composition>(10, Composition{0.5, 0.5}));
    cli::RunConfig c;
    EXPECT_EQ(cli::resolve_split(c, s).train, 10u);
    c.train_rows = 6;
    c.validation_rows = 2;
    const auto r = cli::resolve_split(c, s);
    EXPECT_EQ(r.train, 6u);
    EXPECT_EQ(r.validation_end, 8u);
    c.train_end = "4";
    c.validation_end = "9";
    EXPECT_EQ(cli::resolve_split(c, s).train, 4u);
    EXPECT_EQ(cli::resolve_split(c, s).validation_end, 9u);
    c.validation_end = "3";
    EXPECT_THROW(cli::resolve_split(c, s), ConfigError);
    c.validation_end = "11";
    EXPECT_THROW(cli::resolve_split(c, s), ConfigError);
}

TEST(CliLabels, IntegersDatesAndOtherLabels) {
    EXPECT_EQ(cli::next_labels("60", 2), (std::vector<std::string>{"61", "62"}));
    EXPECT_EQ(cli::next_labels("2020-02-28", 3), (std::vector<std::string>{"2020-02-29", "2020-03-01", "2020-03-02"}));
    EXPECT_EQ(cli::next_labels("2020-12-31", 1), (std::vector<std::string>{"2021-01-01"}));
    EXPECT_EQ(cli::next_labels("week-a", 1), (std::vector<std::string>{"week-a+1"}));
}

TEST(CliReference, NameThenPosition) {
    const std::vector<std::string> names{"USD", "EUR", "3"};
    EXPECT_EQ(cli::resolve_reference("EUR", names), 1u);
    EXPECT_EQ(cli::resolve_reference("3", names), 2u);  // a name wins over a position
    EXPECT_EQ(cli::resolve_reference("1", names), 0u);
    EXPECT_THROW(cli::resolve_reference("4", names), ConfigError);
    EXPECT_THROW(cli::resolve_reference("GBP", names), ConfigError);
}
