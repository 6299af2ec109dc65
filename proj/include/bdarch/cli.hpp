#pragma once

// Command-line front end. Needs CLI11 (CLI11.hpp on the include path) and nlohmann/json.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "bdarch/covariates.hpp"
#include "bdarch/error.hpp"
#include "bdarch/forecast.hpp"
#include "bdarch/inference.hpp"
#include "bdarch/io.hpp"
#include "bdarch/metrics.hpp"
#include "bdarch/model.hpp"
#include "bdarch/simulation.hpp"
#include "bdarch/sweep.hpp"

#ifndef BDARCH_VERSION
#define BDARCH_VERSION "dev"
#endif

namespace bdarch::cli {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitUsage = 2, kExitNotConverged = 3 };

/// Environment variable naming the default output directory.
inline constexpr const char* kOutDirEnv = "BDARCH_OUT_DIR";

namespace detail {

inline void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* a : allowed) known = known || it.key() == a;
        if (!known) throw ConfigError("unknown key '" + it.key() + "' in " + where);
    }
}

template <class T>
void read_key(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

// ---------------------------------------------------------------- JSON mapping

inline json to_json(const CovariateSpec& c) {
    json seasonal = json::array();
    for (const auto& b : c.seasonal_blocks) seasonal.push_back({{"period", b.period}, {"harmonics", b.harmonics}});
    return {{"intercept", c.include_intercept}, {"trend", c.include_trend}, {"seasonal", seasonal}, {"shared", c.share_across_components}};
}

inline CovariateSpec covariates_from_json(const json& j, const std::string& where) {
    detail::check_keys(j, {"intercept", "trend", "seasonal", "shared"}, where);
    CovariateSpec c;
    detail::read_key(j, "intercept", c.include_intercept);
    detail::read_key(j, "trend", c.include_trend);
    detail::read_key(j, "shared", c.share_across_components);
    if (j.contains("seasonal"))
        for (const auto& b : j.at("seasonal")) {
            detail::check_keys(b, {"period", "harmonics"}, where + ".seasonal");
            c.seasonal_blocks.push_back({b.at("period").get<double>(), b.at("harmonics").get<std::size_t>()});
        }
    return c;
}

inline json to_json(const NormalPrior& p) { return {{"mean", p.mean}, {"sd", p.sd}}; }

namespace detail {
inline std::vector<std::pair<const char*, NormalPrior Priors::*>> prior_fields() {
    return {{"ar_diagonal", &Priors::ar_diagonal},
            {"ar_off_diagonal", &Priors::ar_off_diagonal},
            {"ma_diagonal", &Priors::ma_diagonal},
            {"ma_off_diagonal", &Priors::ma_off_diagonal},
            {"mean_intercept", &Priors::mean_intercept},
            {"mean_trend", &Priors::mean_trend},
            {"mean_fourier", &Priors::mean_fourier},
            {"precision_intercept", &Priors::precision_intercept},
            {"precision_trend", &Priors::precision_trend},
            {"precision_fourier", &Priors::precision_fourier},
            {"precision_ar", &Priors::precision_ar},
            {"precision_ma", &Priors::precision_ma}};
}
}  // namespace detail

inline json to_json(const Priors& p) {
    json j;
    for (const auto& [name, field] : detail::prior_fields()) j[name] = to_json(p.*field);
    j["sigma_scale"] = p.sigma_scale;
    j["lkj_shape"] = p.lkj_shape;
    return j;
}

/// "preset" picks a base set ("simulation" or "currency"); any other key overrides one group.
inline Priors priors_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("priors must be a JSON object");
    Priors p = Priors::simulation();
    if (j.contains("preset")) {
        const auto preset = j.at("preset").get<std::string>();
        if (preset == "currency") p = Priors::currency();
        else if (preset != "simulation") throw ConfigError("unknown prior preset '" + preset + "'");
    }
    const auto fields = detail::prior_fields();
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (it.key() == "preset") continue;
        if (it.key() == "sigma_scale") {
            p.sigma_scale = it->get<double>();
            continue;
        }
        if (it.key() == "lkj_shape") {
            p.lkj_shape = it->get<double>();
            continue;
        }
        const auto f = std::find_if(fields.begin(), fields.end(), [&](const auto& x) { return it.key() == x.first; });
        if (f == fields.end()) throw ConfigError("unknown key '" + it.key() + "' in priors");
        detail::check_keys(*it, {"mean", "sd"}, "priors." + it.key());
        detail::read_key(*it, "mean", (p.*(f->second)).mean);
        detail::read_key(*it, "sd", (p.*(f->second)).sd);
    }
    p.validate();
    return p;
}

inline json to_json(const SamplerConfig& s) {
    return {{"chains", s.n_chains},           {"warmup", s.n_warmup},     {"keep", s.n_keep},
            {"target_accept", s.target_accept}, {"max_tree_depth", s.max_tree_depth}, {"init_range", s.init_range},
            {"parallel", s.parallel}};
}

inline SamplerConfig sampler_from_json(const json& j, SamplerConfig s = {}) {
    detail::check_keys(j, {"chains", "warmup", "keep", "target_accept", "max_tree_depth", "init_range", "parallel"}, "sampler");
    detail::read_key(j, "chains", s.n_chains);
    detail::read_key(j, "warmup", s.n_warmup);
    detail::read_key(j, "keep", s.n_keep);
    detail::read_key(j, "target_accept", s.target_accept);
    detail::read_key(j, "max_tree_depth", s.max_tree_depth);
    detail::read_key(j, "init_range", s.init_range);
    detail::read_key(j, "parallel", s.parallel);
    s.validate();
    return s;
}

/// Model section. J and the reference index are only present once resolved against data.
inline json to_json(const ModelSpec& m) {
    json j{{"variant", to_string(m.variant)},
           {"P", m.ar_order},
           {"Q", m.ma_order},
           {"L", m.precision_ar_order},
           {"K", m.precision_ma_order},
           {"mean_covariates", to_json(m.mean_covariates)},
           {"precision_covariates", to_json(m.precision_covariates)}};
    if (m.components) j["components"] = m.components;
    if (m.reference) j["reference_index"] = *m.reference;
    return j;
}

inline ModelSpec model_from_json(const json& j, std::optional<std::string>* reference_label = nullptr) {
    detail::check_keys(j, {"variant", "P", "Q", "L", "K", "reference", "reference_index", "components", "mean_covariates",
                           "precision_covariates"},
                       "model");
    ModelSpec m;
    if (j.contains("variant")) m.variant = parse_variant(j.at("variant").get<std::string>());
    detail::read_key(j, "P", m.ar_order);
    detail::read_key(j, "Q", m.ma_order);
    detail::read_key(j, "L", m.precision_ar_order);
    detail::read_key(j, "K", m.precision_ma_order);
    detail::read_key(j, "components", m.components);
    if (j.contains("reference_index")) m.reference = j.at("reference_index").get<std::size_t>();
    if (j.contains("reference") && reference_label) {
        const json& r = j.at("reference");
        *reference_label = r.is_string() ? r.get<std::string>() : std::to_string(r.get<std::size_t>());
    }
    if (j.contains("mean_covariates")) m.mean_covariates = covariates_from_json(j.at("mean_covariates"), "model.mean_covariates");
    if (j.contains("precision_covariates"))
        m.precision_covariates = covariates_from_json(j.at("precision_covariates"), "model.precision_covariates");
    return m;
}

// ---------------------------------------------------------------- run configuration

/// Everything a command can take from a config file. Command-line flags override these.
struct RunConfig {
    ModelSpec model;
    /// Reference component by name, or by 1-based column position.
    std::optional<std::string> reference;
    Priors priors = Priors::simulation();
    SamplerConfig sampler;
    std::string data_path;
    bool long_format = false;
    /// Split by time label (inclusive ends) or by row count; labels win when both are given.
    std::optional<std::string> train_end, validation_end;
    std::optional<std::size_t> train_rows, validation_rows;
    std::string out_dir;
    double scale = 1.0;
    std::optional<std::uint64_t> seed;
    SweepGrid grid;
    std::size_t k_week = 3;

    [[nodiscard]] json to_json() const {
        json j;
        j["model"] = cli::to_json(model);
        if (reference) j["model"]["reference"] = *reference;
        j["priors"] = cli::to_json(priors);
        j["sampler"] = cli::to_json(sampler);
        j["data"] = {{"path", data_path}, {"long", long_format}};
        json split = json::object();
        if (train_end) split["train_end"] = *train_end;
        if (validation_end) split["validation_end"] = *validation_end;
        if (train_rows) split["train_rows"] = *train_rows;
        if (validation_rows) split["validation_rows"] = *validation_rows;
        j["split"] = split;
        j["output"] = {{"dir", out_dir}, {"scale", scale}};
        if (seed) j["seed"] = *seed;
        json orders = json::array();
        for (const auto& [p, q] : grid.orders) orders.push_back({p, q});
        j["sweep"] = {{"k_year", grid.k_year}, {"orders", orders}, {"k_week", k_week}};
        return j;
    }

    static RunConfig from_json(const json& j) {
        detail::check_keys(j, {"model", "priors", "sampler", "data", "split", "output", "seed", "sweep"}, "config");
        RunConfig c;
        if (j.contains("model")) c.model = model_from_json(j.at("model"), &c.reference);
        if (j.contains("priors")) c.priors = priors_from_json(j.at("priors"));
        if (j.contains("sampler")) c.sampler = sampler_from_json(j.at("sampler"));
        if (j.contains("data")) {
            const json& d = j.at("data");
            detail::check_keys(d, {"path", "long"}, "data");
            detail::read_key(d, "path", c.data_path);
            detail::read_key(d, "long", c.long_format);
        }
        if (j.contains("split")) {
            const json& s = j.at("split");
            detail::check_keys(s, {"train_end", "validation_end", "train_rows", "validation_rows"}, "split");
            if (s.contains("train_end")) c.train_end = s.at("train_end").get<std::string>();
            if (s.contains("validation_end")) c.validation_end = s.at("validation_end").get<std::string>();
            if (s.contains("train_rows")) c.train_rows = s.at("train_rows").get<std::size_t>();
            if (s.contains("validation_rows")) c.validation_rows = s.at("validation_rows").get<std::size_t>();
        }
        if (j.contains("output")) {
            const json& o = j.at("output");
            detail::check_keys(o, {"dir", "scale"}, "output");
            detail::read_key(o, "dir", c.out_dir);
            detail::read_key(o, "scale", c.scale);
        }
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("sweep")) {
            const json& s = j.at("sweep");
            detail::check_keys(s, {"k_year", "orders", "k_week"}, "sweep");
            detail::read_key(s, "k_year", c.grid.k_year);
            detail::read_key(s, "k_week", c.k_week);
            if (s.contains("orders")) {
                c.grid.orders.clear();
                for (const auto& o : s.at("orders")) {
                    if (!o.is_array() || o.size() != 2) throw ConfigError("sweep.orders entries are [P, Q] pairs");
                    c.grid.orders.emplace_back(o[0].get<std::size_t>(), o[1].get<std::size_t>());
                }
            }
        }
        if (!(c.scale > 0.0)) throw ConfigError("output.scale must be positive");
        return c;
    }

    static RunConfig load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw InputError("cannot open config '" + path + "'");
        json j;
        try {
            j = json::parse(in);
        } catch (const json::parse_error& e) {
            throw InputError(path + ": " + e.what());
        }
        return from_json(j);
    }
};

/// Row boundaries: [0, train) trains, [train, validation_end) validates, the rest tests.
struct SplitRows {
    std::size_t train = 0;
    std::size_t validation_end = 0;
    [[nodiscard]] bool has_validation() const noexcept { return validation_end > train; }
};

inline SplitRows resolve_split(const RunConfig& cfg, const CompositionalSeries& s) {
    const std::size_t T = s.length();
    const auto position = [&](const std::string& label) {
        const auto& idx = s.time_index();
        const auto it = std::find(idx.begin(), idx.end(), label);
        if (it == idx.end()) throw ConfigError("split label '" + label + "' is not a time in the data");
        return static_cast<std::size_t>(it - idx.begin()) + 1;
    };
    SplitRows r{T, T};
    if (cfg.train_end) r.train = position(*cfg.train_end);
    else if (cfg.train_rows) r.train = *cfg.train_rows;
    r.validation_end = r.train;
    if (cfg.validation_end) r.validation_end = position(*cfg.validation_end);
    else if (cfg.validation_rows) r.validation_end = r.train + *cfg.validation_rows;
    else if (!cfg.train_end && !cfg.train_rows) r.validation_end = T;
    if (r.train < 1 || r.train > T) throw ConfigError("training split must cover between 1 and T rows");
    if (r.validation_end > T) throw ConfigError("validation split runs past the end of the data");
    if ((cfg.validation_end || cfg.validation_rows) && r.validation_end <= r.train)
        throw ConfigError("validation split must end after the training split");
    return r;
}

/// Name first, then a 1-based column position.
inline std::size_t resolve_reference(const std::string& ref, const std::vector<std::string>& names) {
    const auto it = std::find(names.begin(), names.end(), ref);
    if (it != names.end()) return static_cast<std::size_t>(it - names.begin());
    long long k = 0;
    if (bdarch::detail::parse_integer(ref, k) && k >= 1 && static_cast<std::size_t>(k) <= names.size())
        return static_cast<std::size_t>(k - 1);
    throw ConfigError("reference component '" + ref + "' is neither a component name nor a column position");
}

// ---------------------------------------------------------------- time labels

namespace detail {

inline std::optional<std::chrono::sys_days> parse_date(const std::string& s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
    long long y = 0, m = 0, d = 0;
    if (!bdarch::detail::parse_integer(s.substr(0, 4), y) || !bdarch::detail::parse_integer(s.substr(5, 2), m) ||
        !bdarch::detail::parse_integer(s.substr(8, 2), d))
        return std::nullopt;
    const std::chrono::year_month_day ymd{std::chrono::year{static_cast<int>(y)}, std::chrono::month{static_cast<unsigned>(m)},
                                          std::chrono::day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) return std::nullopt;
    return std::chrono::sys_days{ymd};
}

inline std::string format_date(std::chrono::sys_days day) {
    const std::chrono::year_month_day ymd{day};
    std::ostringstream os;
    os << std::setfill('0') << std::setw(4) << static_cast<int>(ymd.year()) << "-" << std::setw(2)
       << static_cast<unsigned>(ymd.month()) << "-" << std::setw(2) << static_cast<unsigned>(ymd.day());
    return os.str();
}

}  // namespace detail

/// Labels for the S steps after `last`: integers count on, ISO dates advance by a day, anything else gets "+s".
inline std::vector<std::string> next_labels(const std::string& last, std::size_t S) {
    std::vector<std::string> out;
    long long k = 0;
    const bool integer = bdarch::detail::parse_integer(last, k);
    const auto date = integer ? std::nullopt : detail::parse_date(last);
    for (std::size_t s = 1; s <= S; ++s) {
        if (integer) out.push_back(std::to_string(k + static_cast<long long>(s)));
        else if (date) out.push_back(detail::format_date(*date + std::chrono::days{static_cast<int>(s)}));
        else out.push_back(last + "+" + std::to_string(s));
    }
    return out;
}

// ---------------------------------------------------------------- shared plumbing

struct SeedChoice {
    std::uint64_t value = 0;
    std::string source;  // "flag", "config" or "entropy"
};

inline SeedChoice resolve_seed(const std::optional<std::uint64_t>& flag, const std::optional<std::uint64_t>& config) {
    if (flag) return {*flag, "flag"};
    if (config) return {*config, "config"};
    std::random_device rd;
    return {(static_cast<std::uint64_t>(rd()) << 32) ^ rd(), "entropy"};
}

inline fs::path resolve_out_dir(const std::string& flag, const std::string& config) {
    fs::path dir = !flag.empty() ? fs::path(flag) : !config.empty() ? fs::path(config) : fs::path(".");
    if (flag.empty() && config.empty())
        if (const char* env = std::getenv(kOutDirEnv); env && *env) dir = env;
    fs::create_directories(dir);
    return dir;
}

inline void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("cannot write '" + path.string() + "'");
    os << text;
}

inline void write_manifest(const fs::path& dir, const std::string& command, const SeedChoice& seed, const std::vector<std::string>& args,
                           const std::vector<std::string>& outputs, json extra = json::object()) {
    json m{{"command", command},
           {"version", BDARCH_VERSION},
           {"seed", seed.value},
           {"seed_source", seed.source},
           {"arguments", args},
           {"outputs", outputs}};
    for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
    write_text(dir / "manifest.json", m.dump(2) + "\n");
}

/// Covariates used by the sweep: trend plus weekly and yearly Fourier terms in the mean,
/// the same seasonal terms in the precision.
inline ModelSpec sweep_model(const ModelSpec& base, std::size_t P, std::size_t Q, std::size_t k_week, std::size_t k_year) {
    ModelSpec m = base;
    m.ar_order = P;
    m.ma_order = Q;
    std::vector<SeasonalBlock> seasonal;
    if (k_week) seasonal.push_back({7.0, k_week});
    if (k_year) seasonal.push_back({365.25, k_year});
    m.mean_covariates = CovariateSpec{true, true, seasonal, false};
    m.precision_covariates = CovariateSpec{true, false, seasonal, false};
    return m;
}

struct FitOutcome {
    SamplingResult result;
    DesignMatrices designs;
};

/// Fits `spec` to the first `rows` rows; designs extend `extra` steps further on the same time anchor.
inline FitOutcome fit_rows(const ModelSpec& spec, const Priors& priors, const SamplerConfig& sampler, const CompositionalSeries& s,
                           std::size_t rows, std::size_t extra = 0) {
    FitOutcome out;
    out.designs = build_designs(spec.mean_covariates, spec.precision_covariates, rows + extra, spec.components, 0, rows);
    const Posterior post(spec, priors, s.slice(0, rows), out.designs.slice(0, rows));
    out.result = sample_posterior(post, sampler);
    return out;
}

inline bool all_converged(const Diagnostics& d, double threshold = 1.1) {
    for (Eigen::Index i = 0; i < d.rhat.size(); ++i)
        if (!(d.rhat[i] <= threshold)) return false;
    return true;
}

// ---------------------------------------------------------------- commands

struct SimulateArgs {
    int study = 0;
    std::size_t replicates = 50;
    std::size_t length = 100;
    std::size_t train = 60;
    std::size_t components = 5;
    bool no_perturb = false;
    bool series_only = false;
};

struct SamplerArgs {
    std::optional<std::size_t> chains, warmup, keep;
    std::optional<double> target_accept;
    bool parallel = false;

    void apply(SamplerConfig& s) const {
        if (chains) s.n_chains = *chains;
        if (warmup) s.n_warmup = *warmup;
        if (keep) s.n_keep = *keep;
        if (target_accept) s.target_accept = *target_accept;
        if (parallel) s.parallel = true;
        s.validate();
    }
};

struct CommonArgs {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<double> scale;
    SamplerArgs sampler;

    [[nodiscard]] RunConfig load() const { return config.empty() ? RunConfig{} : RunConfig::load(config); }
};

inline int cmd_simulate(const SimulateArgs& a, const CommonArgs& c, const std::vector<std::string>& argv, std::ostream& out) {
    const RunConfig rc = c.load();
    StudyConfig sc;
    sc.study_id = a.study;
    sc.n_replicates = a.replicates;
    sc.T = a.length;
    sc.train_len = a.train;
    sc.J = a.components;
    sc.perturb = !a.no_perturb;
    const SeedChoice seed = resolve_seed(c.seed, rc.seed);
    sc.seed = seed.value;
    sc.validate();
    SamplerConfig sampler = rc.sampler;
    c.sampler.apply(sampler);
    const fs::path dir = resolve_out_dir(c.out, rc.out_dir);

    std::vector<std::string> outputs;
    if (a.series_only) {
        json reps = json::array();
        for (std::size_t r = 0; r < sc.n_replicates; ++r) {
            const ReplicateData d = simulate_replicate(sc, r);
            const std::string name = "series_" + std::to_string(r + 1) + ".csv";
            std::ostringstream os;
            io::write_wide_csv(os, d.series);
            write_text(dir / name, os.str());
            outputs.push_back(name);
            reps.push_back({{"replicate", r + 1}, {"shock_times", d.shock_times}, {"shift_start", d.shift_start}});
        }
        write_manifest(dir, "simulate", seed, argv, outputs, {{"study", sc.study_id}, {"replicates", reps}});
        out << "wrote " << outputs.size() << " series to " << dir.string() << "\n";
        return kExitOk;
    }

    const StudyResult res = run_study(sc, sampler, rc.priors);
    write_text(dir / "metrics.csv", res.metrics_csv());
    write_text(dir / "pacf.csv", res.pacf_csv());
    outputs = {"metrics.csv", "pacf.csv"};
    const double scale = c.scale.value_or(rc.scale);
    json summary = json::object();
    out << "study " << sc.study_id << ", " << sc.n_replicates << " replicates\n";
    for (Variant v : sc.models) {
        const double frmse = res.mean_frmse(v);
        out << "  " << std::left << std::setw(14) << to_string(v) << " mean FRMSE " << frmse * scale << "  failures "
            << res.failures(v) << "\n";
        summary[to_string(v)] = {{"mean_frmse", frmse}, {"mean_fmae", res.mean_fmae(v)}, {"failures", res.failures(v)}};
    }
    write_manifest(dir, "simulate", seed, argv, outputs,
                   {{"study", sc.study_id}, {"sampler", to_json(sampler)}, {"summary", summary}});
    return kExitOk;
}

struct FitArgs {
    std::string data;
    bool long_format = false;
    std::string ref;
    std::string variant;
    std::optional<std::size_t> P, Q, L, K;
    std::string through;  // train | validation | all
};

inline int cmd_fit(const FitArgs& a, const CommonArgs& c, const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
    RunConfig rc = c.load();
    if (!a.data.empty()) rc.data_path = a.data;
    if (a.long_format) rc.long_format = true;
    if (!a.ref.empty()) rc.reference = a.ref;
    if (!a.variant.empty()) rc.model.variant = parse_variant(a.variant);
    if (a.P) rc.model.ar_order = *a.P;
    if (a.Q) rc.model.ma_order = *a.Q;
    if (a.L) rc.model.precision_ar_order = *a.L;
    if (a.K) rc.model.precision_ma_order = *a.K;
    c.sampler.apply(rc.sampler);
    if (rc.data_path.empty()) throw ConfigError("fit needs --data or data.path in the config");
    const SeedChoice seed = resolve_seed(c.seed, rc.seed);
    rc.seed = seed.value;
    rc.sampler.base_seed = seed.value;

    const CompositionalSeries series = io::read_series(rc.data_path, rc.long_format);
    ModelSpec spec = rc.model;
    spec.components = series.components();
    if (rc.reference) spec.reference = resolve_reference(*rc.reference, series.component_names());
    spec.validate();

    const SplitRows split = resolve_split(rc, series);
    const std::string through = a.through.empty() ? "train" : a.through;
    std::size_t rows = split.train;
    if (through == "validation") rows = split.validation_end;
    else if (through == "all") rows = series.length();
    else if (through != "train") throw ConfigError("--through must be train, validation or all");

    const fs::path dir = resolve_out_dir(c.out, rc.out_dir);
    const FitOutcome fit = fit_rows(spec, rc.priors, rc.sampler, series, rows);
    const Diagnostics& d = fit.result.diagnostics;
    const PosteriorDraws& draws = fit.result.draws;

    std::ostringstream dcsv;
    io::write_draws_csv(dcsv, draws);
    write_text(dir / "draws.csv", dcsv.str());

    json params = json::array();
    const Eigen::VectorXd mean = draws.mean();
    for (Eigen::Index i = 0; i < draws.draws.cols(); ++i) {
        const double sd = std::sqrt((draws.draws.col(i).array() - mean[i]).square().sum() / std::max<double>(1.0, static_cast<double>(draws.size() - 1)));
        params.push_back({{"name", draws.names[static_cast<std::size_t>(i)]},
                          {"mean", mean[i]},
                          {"sd", sd},
                          {"rhat", d.rhat[i]},
                          {"ess_bulk", d.ess_bulk[i]}});
    }
    const bool converged = all_converged(d);
    const auto& names = series.component_names();
    json summary{{"config", rc.to_json()},
                 {"model", to_json(spec)},
                 {"components", names},
                 {"reference", names[spec.reference_index()]},
                 {"fit_rows", rows},
                 {"trend_scale", rows},
                 {"first_time", series.time_index().front()},
                 {"last_time", series.time_index()[rows - 1]},
                 {"diagnostics",
                  {{"converged", converged},
                   {"max_rhat", d.max_rhat()},
                   {"min_ess_bulk", d.min_ess()},
                   {"divergences", d.divergences},
                   {"divergence_rate", d.divergence_rate()},
                   {"treedepth_saturated", d.treedepth_saturated},
                   {"parameters", params}}}};
    write_text(dir / "fit_summary.json", summary.dump(2) + "\n");
    write_manifest(dir, "fit", seed, argv, {"draws.csv", "fit_summary.json"});

    out << "fit " << to_string(spec.variant) << " on " << rows << " rows: " << draws.size() << " draws, max R-hat "
        << d.max_rhat() << ", min bulk ESS " << d.min_ess() << ", divergences " << d.divergences << "\n";
    if (!converged) {
        err << "warning: chains did not converge (R-hat above 1.1); see fit_summary.json\n";
        return kExitNotConverged;
    }
    return kExitOk;
}

struct ForecastArgs {
    std::string draws;
    std::string data;
    std::string summary;
    bool long_format = false;
    long long horizon = 0;
};

inline int cmd_forecast(const ForecastArgs& a, const CommonArgs& c, const std::vector<std::string>& argv, std::ostream& out) {
    if (a.horizon <= 0) throw ConfigError("forecast horizon must be a positive integer");
    const RunConfig rc = c.load();
    const fs::path summary_path = a.summary.empty() ? fs::path(a.draws).parent_path() / "fit_summary.json" : fs::path(a.summary);
    std::ifstream sin(summary_path);
    if (!sin) throw InputError("cannot open fit summary '" + summary_path.string() + "'");
    json summary;
    try {
        summary = json::parse(sin);
    } catch (const json::parse_error& e) {
        throw InputError(summary_path.string() + ": " + e.what());
    }
    const ModelSpec spec = model_from_json(summary.at("model"));
    const auto fit_rows_n = summary.at("fit_rows").get<std::size_t>();
    const auto trend_scale = summary.at("trend_scale").get<std::size_t>();
    const auto names = summary.at("components").get<std::vector<std::string>>();

    std::ifstream din = io::open_input(a.draws);
    const PosteriorDraws draws = io::read_draws_csv(din, a.draws);
    const CompositionalSeries series = io::read_series(a.data, a.long_format || rc.long_format);
    if (series.component_names() != names) throw InputError(a.data + ": components differ from the fitted model");
    if (series.length() < fit_rows_n || series.time_index()[fit_rows_n - 1] != summary.at("last_time").get<std::string>())
        throw InputError(a.data + ": does not contain the fitted rows ending at '" + summary.at("last_time").get<std::string>() + "'");

    const SeedChoice seed = resolve_seed(c.seed, rc.seed);
    const auto S = static_cast<std::size_t>(a.horizon);
    const CompositionalSeries history = series.slice(0, fit_rows_n);
    const DesignMatrices designs =
        build_designs(spec.mean_covariates, spec.precision_covariates, fit_rows_n + S, spec.components, 0, trend_scale);
    Rng rng = make_stream(seed.value, 0);
    const ForecastResult fc = predict(spec, draws, history, designs, S, rng);

    const IntervalBounds b95 = interval(fc, 0.95), b50 = interval(fc, 0.5);
    const bool nested = (b95.lower.array() <= b50.lower.array()).all() && (b50.lower.array() <= b50.upper.array()).all() &&
                        (b50.upper.array() <= b95.upper.array()).all();
    if (!nested) throw std::logic_error("forecast intervals are not nested");

    const fs::path dir = resolve_out_dir(c.out, rc.out_dir);
    std::ostringstream os;
    io::write_forecast_csv(os, fc, next_labels(history.time_index().back(), S), names);
    write_text(dir / "forecast.csv", os.str());
    write_manifest(dir, "forecast", seed, argv, {"forecast.csv"},
                   {{"horizon", S}, {"draws", fc.n_draws()}, {"invalid_paths", fc.invalid_paths}, {"few_draws", b95.few_draws}});
    out << "forecast " << S << " steps x " << fc.components << " components from " << fc.n_draws() << " draws";
    if (fc.invalid_paths) out << " (" << fc.invalid_paths << " invalid paths dropped)";
    out << "\n";
    return kExitOk;
}

struct EvaluateArgs {
    std::string forecast;
    std::string actuals;
    bool long_format = false;
};

inline int cmd_evaluate(const EvaluateArgs& a, const CommonArgs& c, const std::vector<std::string>& argv, std::ostream& out) {
    const RunConfig rc = c.load();
    std::ifstream fin = io::open_input(a.forecast);
    const io::ForecastTable fc = io::read_forecast_csv(fin, a.forecast);
    const CompositionalSeries actuals = io::read_series(a.actuals, a.long_format || rc.long_format);
    const Eigen::MatrixXd actual = io::align_actuals(fc, actuals);
    std::optional<IntervalBounds> bounds;
    if (fc.lower_95) bounds = IntervalBounds{*fc.lower_95, *fc.upper_95, 0.95, false};
    MetricsReport report = evaluate_forecast(actual, fc.point, fc.components, bounds ? &*bounds : nullptr);
    report.scale = c.scale.value_or(rc.scale);
    if (!(report.scale > 0.0)) throw ConfigError("--scale must be positive");
    const std::string csv = report.to_csv();
    const fs::path dir = resolve_out_dir(c.out, rc.out_dir);
    write_text(dir / "metrics.csv", csv);
    write_manifest(dir, "evaluate", SeedChoice{0, "unused"}, argv, {"metrics.csv"}, {{"scale", report.scale}});
    out << csv;
    return kExitOk;
}

struct SweepArgs {
    std::string table;
    std::vector<std::size_t> k_year;
    std::vector<std::string> orders;  // "P:Q"
};

inline std::pair<std::size_t, std::size_t> parse_order(const std::string& s) {
    const auto colon = s.find(':');
    long long p = -1, q = -1;
    if (colon == std::string::npos || !bdarch::detail::parse_integer(s.substr(0, colon), p) ||
        !bdarch::detail::parse_integer(s.substr(colon + 1), q) || p < 0 || q < 0)
        throw ConfigError("order '" + s + "' is not of the form P:Q");
    return {static_cast<std::size_t>(p), static_cast<std::size_t>(q)};
}

inline int cmd_sweep(const SweepArgs& a, const CommonArgs& c, const std::vector<std::string>& argv, std::ostream& out,
                     std::ostream& err) {
    RunConfig rc = c.load();
    c.sampler.apply(rc.sampler);
    const double scale = c.scale.value_or(rc.scale);
    SweepGrid grid = rc.grid;
    CellEvaluator evaluate;
    SeedChoice seed{0, "unused"};
    std::vector<SweepCell> cells;
    if (!a.table.empty()) {
        std::ifstream in = io::open_input(a.table);
        cells = io::read_sweep_csv(in, a.table);
        grid = grid_from_cells(cells);
    }
    if (!a.k_year.empty()) grid.k_year = a.k_year;
    if (!a.orders.empty()) {
        grid.orders.clear();
        for (const auto& o : a.orders) grid.orders.push_back(parse_order(o));
    }
    grid.validate();

    if (!a.table.empty()) {
        evaluate = table_evaluator(cells);
    } else {
        if (rc.data_path.empty()) throw ConfigError("sweep needs --table, or a config with data and a validation split");
        seed = resolve_seed(c.seed, rc.seed);
        const CompositionalSeries series = io::read_series(rc.data_path, rc.long_format);
        const SplitRows split = resolve_split(rc, series);
        if (!split.has_validation()) throw ConfigError("sweep needs a validation split");
        ModelSpec base = rc.model;
        base.components = series.components();
        if (rc.reference) base.reference = resolve_reference(*rc.reference, series.component_names());
        const Eigen::MatrixXd actual =
            series.matrix().middleRows(static_cast<Eigen::Index>(split.train), static_cast<Eigen::Index>(split.validation_end - split.train));
        const std::size_t k_week = rc.k_week;
        evaluate = [=, &err](std::size_t P, std::size_t Q, std::size_t k) -> std::pair<double, double> {
            const ModelSpec spec = sweep_model(base, P, Q, k_week, k);
            SamplerConfig sc = rc.sampler;
            sc.base_seed = derive_seed(seed.value, P * 10000 + Q * 100 + k);
            try {
                const std::size_t S = split.validation_end - split.train;
                const FitOutcome fit = fit_rows(spec, rc.priors, sc, series, split.train, S);
                Rng rng = make_stream(derive_seed(seed.value, P * 10000 + Q * 100 + k, 1), 0);
                const ForecastResult fc = predict(spec, fit.result.draws, series.slice(0, split.train), fit.designs, S, rng);
                const MetricsReport m = evaluate_forecast(actual, fc.point, series.component_names());
                return {m.fmae.mean, m.frss.total};
            } catch (const std::exception& e) {
                err << "cell P=" << P << " Q=" << Q << " K_year=" << k << " failed: " << e.what() << "\n";
                const double nan = std::numeric_limits<double>::quiet_NaN();
                return {nan, nan};
            }
        };
    }
    const SweepResult res = run_sweep(grid, evaluate);
    const fs::path dir = resolve_out_dir(c.out, rc.out_dir);
    write_text(dir / "sweep.csv", res.to_csv());
    write_manifest(dir, "sweep", seed, argv, {"sweep.csv"},
                   {{"stage1_best", {{"P", res.stage1_best.P}, {"Q", res.stage1_best.Q}, {"k_year", res.stage1_best.k_year}}},
                    {"best",
                     {{"P", res.best.P}, {"Q", res.best.Q}, {"k_year", res.best.k_year}, {"fmae", res.best.fmae}, {"frss", res.best.frss}}}});
    out << "stage 1 best: K_year=" << res.stage1_best.k_year << " FMAE " << res.stage1_best.fmae * scale << "\n";
    out << "selected: P=" << res.best.P << " Q=" << res.best.Q << " K_year=" << res.best.k_year << " FMAE " << res.best.fmae * scale
        << " FRSS " << res.best.frss * scale << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- entry point

/// Parses `args` (without the program name) and runs one subcommand. Never throws.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Bayesian Dirichlet ARMA models with DARCH precision for compositional time series", "bdarch"};
    app.require_subcommand(1);
    app.set_version_flag("--version", BDARCH_VERSION);

    CommonArgs common;
    const auto add_common = [&](CLI::App* cmd, bool sampler) {
        cmd->add_option("--config", common.config, "JSON config; flags override its values")->check(CLI::ExistingFile);
        cmd->add_option("--out", common.out, std::string("output directory (default: $") + kOutDirEnv + " or .)");
        cmd->add_option("--seed", common.seed, "random seed; drawn from entropy and recorded when absent");
        cmd->add_option("--scale", common.scale, "display multiplier for error metrics, e.g. 100");
        if (sampler) {
            cmd->add_option("--chains", common.sampler.chains, "number of chains");
            cmd->add_option("--warmup", common.sampler.warmup, "warm-up iterations per chain");
            cmd->add_option("--keep", common.sampler.keep, "retained draws per chain");
            cmd->add_option("--target-accept", common.sampler.target_accept, "step-size adaptation target");
            cmd->add_flag("--parallel", common.sampler.parallel, "run chains on separate threads");
        }
    };

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "run a simulation study and score the three models");
    simulate->add_option("--study", sim.study, "study id 1-6")->required();
    simulate->add_option("--replicates", sim.replicates, "number of replicates")->capture_default_str();
    simulate->add_option("--length", sim.length, "series length T")->capture_default_str();
    simulate->add_option("--train", sim.train, "training rows")->capture_default_str();
    simulate->add_option("--components", sim.components, "number of components J")->capture_default_str();
    simulate->add_flag("--no-perturb", sim.no_perturb, "skip shocks and regime shifts");
    simulate->add_flag("--series-only", sim.series_only, "write the simulated series without fitting");
    add_common(simulate, true);

    FitArgs fit;
    auto* fitc = app.add_subcommand("fit", "sample the posterior of one model");
    fitc->add_option("--data", fit.data, "wide CSV: time label, then one column per component");
    fitc->add_flag("--long", fit.long_format, "data is long CSV with time, component, value columns");
    fitc->add_option("--ref-component", fit.ref, "reference component name or 1-based column position");
    fitc->add_option("--variant", fit.variant, "bdarma, bdarma_darch or btvarma");
    fitc->add_option("--ar", fit.P, "mean AR order P");
    fitc->add_option("--ma", fit.Q, "mean MA order Q");
    fitc->add_option("--prec-ar", fit.L, "precision AR order L (DARCH only)");
    fitc->add_option("--prec-ma", fit.K, "precision MA order K (DARCH only)");
    fitc->add_option("--through", fit.through, "fit rows through train (default), validation or all");
    add_common(fitc, true);

    ForecastArgs fca;
    auto* forecast = app.add_subcommand("forecast", "posterior predictive forecast from a draw file");
    forecast->add_option("--draws", fca.draws, "draw file written by fit")->required()->check(CLI::ExistingFile);
    forecast->add_option("--data", fca.data, "data the model was fitted on")->required()->check(CLI::ExistingFile);
    forecast->add_option("--summary", fca.summary, "fit summary (default: fit_summary.json next to the draws)");
    forecast->add_option("--horizon", fca.horizon, "steps ahead")->required();
    forecast->add_flag("--long", fca.long_format, "data is long CSV");
    add_common(forecast, false);

    EvaluateArgs ev;
    auto* evaluate = app.add_subcommand("evaluate", "score a forecast file against actual shares");
    evaluate->add_option("--forecast", ev.forecast, "forecast CSV")->required()->check(CLI::ExistingFile);
    evaluate->add_option("--actuals", ev.actuals, "actual shares, wide CSV")->required()->check(CLI::ExistingFile);
    evaluate->add_flag("--long", ev.long_format, "actuals are long CSV");
    add_common(evaluate, false);

    SweepArgs sw;
    auto* sweep = app.add_subcommand("sweep", "two-stage validation sweep over K_year, then (P, Q)");
    sweep->add_option("--table", sw.table, "precomputed scores: P,Q,k_year,fmae,frss")->check(CLI::ExistingFile);
    sweep->add_option("--k-year", sw.k_year, "K_year values for stage one")->delimiter(',');
    sweep->add_option("--orders", sw.orders, "P:Q pairs for stage two")->delimiter(',');
    add_common(sweep, true);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        // help and version requests exit 0; everything else is a usage error
        return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (simulate->parsed()) return cmd_simulate(sim, common, args, out);
        if (fitc->parsed()) return cmd_fit(fit, common, args, out, err);
        if (forecast->parsed()) return cmd_forecast(fca, common, args, out);
        if (evaluate->parsed()) return cmd_evaluate(ev, common, args, out);
        if (sweep->parsed()) return cmd_sweep(sw, common, args, out, err);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n" << "run 'bdarch <command> --help' for usage\n";
        return kExitUsage;
    } catch (const InputError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const json::exception& e) {
        err << "error: config: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitUsage;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    return run(std::vector<std::string>(argv + 1, argv + argc), out, err);
}

}  // namespace bdarch::cli
