#pragma once

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "bdarch/compositional.hpp"
#include "bdarch/error.hpp"
#include "bdarch/forecast.hpp"
#include "bdarch/inference.hpp"
#include "bdarch/sweep.hpp"

namespace bdarch::io {

/// Tolerance for renormalizing input rows that do not quite sum to one.
inline constexpr double kRowSumTolerance = 1e-6;

/// Splits one CSV record. Double-quoted fields may contain commas; "" is a literal quote.
inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                field += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                field += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(std::move(field));
            field.clear();
        } else if (ch != '\r') {
            field += ch;
        }
    }
    out.push_back(std::move(field));
    for (auto& f : out) {
        const auto b = f.find_first_not_of(" \t");
        const auto e = f.find_last_not_of(" \t");
        f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
    }
    return out;
}

inline std::string quote_csv(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

inline std::optional<double> parse_double(const std::string& s) {
    double v = 0.0;
    const char* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end || s.empty()) return std::nullopt;
    return v;
}

namespace detail {

struct CsvReader {
    std::istream& in;
    std::string source;
    std::size_t line_no = 0;

    bool next(std::vector<std::string>& fields) {
        std::string line;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            fields = split_csv(line);
            return true;
        }
        return false;
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw InputError(source + ":" + std::to_string(line_no) + ": " + msg);
    }

    double number(const std::string& s, const std::string& what) const {
        const auto v = parse_double(s);
        if (!v || !std::isfinite(*v)) fail("cannot parse " + what + " '" + s + "' as a finite number");
        return *v;
    }
};

inline Composition make_row(const Eigen::VectorXd& v, const CsvReader& r) {
    for (Eigen::Index j = 0; j < v.size(); ++j)
        if (!(v[j] > 0.0)) r.fail("share " + std::to_string(j + 1) + " is not strictly positive (" + std::to_string(v[j]) + ")");
    const double sum = v.sum();
    if (std::abs(sum - 1.0) > kRowSumTolerance) r.fail("shares sum to " + std::to_string(sum) + ", not 1");
    return Composition(v / sum);
}

}  // namespace detail

/// Wide layout: header "time,<component>,...", then one row per time with J shares.
inline CompositionalSeries read_wide_csv(std::istream& in, const std::string& source = "<input>") {
    detail::CsvReader r{in, source};
    std::vector<std::string> header, fields;
    if (!r.next(header)) r.fail("empty file");
    if (header.size() < 3) r.fail("need a time column and at least two component columns");
    const std::vector<std::string> names(header.begin() + 1, header.end());
    std::vector<Composition> rows;
    std::vector<std::string> times;
    while (r.next(fields)) {
        if (fields.size() != header.size())
            r.fail("expected " + std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()));
        Eigen::VectorXd v(static_cast<Eigen::Index>(names.size()));
        for (std::size_t j = 0; j < names.size(); ++j) v[static_cast<Eigen::Index>(j)] = r.number(fields[j + 1], "share");
        rows.push_back(detail::make_row(v, r));
        times.push_back(fields[0]);
    }
    if (rows.empty()) r.fail("no data rows");
    try {
        return CompositionalSeries(std::move(rows), std::move(times), names);
    } catch (const DomainError& e) {
        throw InputError(source + ": " + e.what());
    }
}

/// Long layout: header with columns time, component, value (any order); one row per (time, component).
inline CompositionalSeries read_long_csv(std::istream& in, const std::string& source = "<input>") {
    detail::CsvReader r{in, source};
    std::vector<std::string> header, fields;
    if (!r.next(header)) r.fail("empty file");
    const auto col = [&](const std::string& name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) r.fail("missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t ct = col("time"), cc = col("component"), cv = col("value");
    std::vector<std::string> times, names;
    std::map<std::string, std::size_t> time_pos, name_pos;
    std::map<std::pair<std::size_t, std::size_t>, std::pair<double, std::size_t>> cells;
    while (r.next(fields)) {
        if (fields.size() != header.size()) r.fail("expected " + std::to_string(header.size()) + " fields");
        const auto [ti, new_t] = time_pos.emplace(fields[ct], times.size());
        if (new_t) times.push_back(fields[ct]);
        const auto [ni, new_n] = name_pos.emplace(fields[cc], names.size());
        if (new_n) names.push_back(fields[cc]);
        if (!cells.emplace(std::make_pair(ti->second, ni->second), std::make_pair(r.number(fields[cv], "value"), r.line_no)).second)
            r.fail("duplicate entry for time '" + fields[ct] + "', component '" + fields[cc] + "'");
    }
    if (times.empty()) r.fail("no data rows");
    std::vector<Composition> rows;
    for (std::size_t t = 0; t < times.size(); ++t) {
        Eigen::VectorXd v(static_cast<Eigen::Index>(names.size()));
        std::size_t line = 0;
        for (std::size_t j = 0; j < names.size(); ++j) {
            const auto it = cells.find({t, j});
            if (it == cells.end()) throw InputError(source + ": time '" + times[t] + "' has no value for '" + names[j] + "'");
            v[static_cast<Eigen::Index>(j)] = it->second.first;
            line = std::max(line, it->second.second);
        }
        r.line_no = line;
        rows.push_back(detail::make_row(v, r));
    }
    try {
        return CompositionalSeries(std::move(rows), std::move(times), names);
    } catch (const DomainError& e) {
        throw InputError(source + ": " + e.what());
    }
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    return in;
}

inline CompositionalSeries read_series(const std::string& path, bool long_format = false) {
    std::ifstream in = open_input(path);
    return long_format ? read_long_csv(in, path) : read_wide_csv(in, path);
}

inline void write_wide_csv(std::ostream& os, const CompositionalSeries& s) {
    os.precision(17);
    os << "time";
    for (const auto& n : s.component_names()) os << "," << quote_csv(n);
    os << "\n";
    for (std::size_t t = 0; t < s.length(); ++t) {
        os << quote_csv(s.time_index()[t]);
        for (std::size_t j = 0; j < s.components(); ++j) os << "," << s[t][j];
        os << "\n";
    }
}

/// Draw file: chain, draw (1-based within chain), then one column per parameter on the constrained scale.
inline void write_draws_csv(std::ostream& os, const PosteriorDraws& d) {
    os.precision(17);
    os << "chain,draw";
    for (const auto& n : d.names) os << "," << quote_csv(n);
    os << "\n";
    std::vector<std::size_t> counter;
    for (Eigen::Index r = 0; r < d.draws.rows(); ++r) {
        const std::size_t c = d.chain_id.empty() ? 0 : d.chain_id[static_cast<std::size_t>(r)];
        if (counter.size() <= c) counter.resize(c + 1, 0);
        os << c + 1 << "," << ++counter[c];
        for (Eigen::Index j = 0; j < d.draws.cols(); ++j) os << "," << d.draws(r, j);
        os << "\n";
    }
}

inline PosteriorDraws read_draws_csv(std::istream& in, const std::string& source = "<draws>") {
    detail::CsvReader r{in, source};
    std::vector<std::string> header, fields;
    if (!r.next(header)) r.fail("empty draw file");
    if (header.size() < 3 || header[0] != "chain" || header[1] != "draw") r.fail("draw file must start with 'chain,draw'");
    PosteriorDraws d;
    d.names.assign(header.begin() + 2, header.end());
    std::vector<std::vector<double>> rows;
    std::size_t n_chains = 0;
    while (r.next(fields)) {
        if (fields.size() != header.size()) r.fail("expected " + std::to_string(header.size()) + " fields");
        const double chain = r.number(fields[0], "chain");
        if (chain < 1 || chain != std::floor(chain)) r.fail("chain ids are positive integers");
        d.chain_id.push_back(static_cast<std::size_t>(chain) - 1);
        n_chains = std::max(n_chains, static_cast<std::size_t>(chain));
        std::vector<double> row;
        for (std::size_t j = 2; j < fields.size(); ++j) row.push_back(r.number(fields[j], "parameter value"));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) r.fail("draw file has no draws");
    d.draws.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d.names.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < d.names.size(); ++j) d.draws(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    d.chains.resize(n_chains);
    return d;
}

/// Forecast file: time, component, point, lower_95, upper_95, lower_50, upper_50.
inline void write_forecast_csv(std::ostream& os, const ForecastResult& fc, const std::vector<std::string>& times,
                               const std::vector<std::string>& names) {
    if (times.size() != fc.horizon || names.size() != fc.components) throw ConfigError("forecast labels do not match the result");
    const IntervalBounds b95 = interval(fc, 0.95), b50 = interval(fc, 0.5);
    os.precision(17);
    os << "time,component,point,lower_95,upper_95,lower_50,upper_50\n";
    for (std::size_t s = 0; s < fc.horizon; ++s)
        for (std::size_t j = 0; j < fc.components; ++j) {
            const auto ss = static_cast<Eigen::Index>(s), jj = static_cast<Eigen::Index>(j);
            os << quote_csv(times[s]) << "," << quote_csv(names[j]) << "," << fc.point(ss, jj) << "," << b95.lower(ss, jj) << ","
               << b95.upper(ss, jj) << "," << b50.lower(ss, jj) << "," << b50.upper(ss, jj) << "\n";
        }
}

/// Parsed forecast file in (time, component) order of appearance.
struct ForecastTable {
    std::vector<std::string> times;
    std::vector<std::string> components;
    Eigen::MatrixXd point;  // S x J
    std::optional<Eigen::MatrixXd> lower_95, upper_95;
};

inline ForecastTable read_forecast_csv(std::istream& in, const std::string& source = "<forecast>") {
    detail::CsvReader r{in, source};
    std::vector<std::string> header, fields;
    if (!r.next(header)) r.fail("empty forecast file");
    const auto find = [&](const std::string& name) -> std::optional<std::size_t> {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) return std::nullopt;
        return static_cast<std::size_t>(it - header.begin());
    };
    const auto ct = find("time"), cc = find("component"), cp = find("point");
    if (!ct || !cc || !cp) r.fail("forecast file needs time, component and point columns");
    const auto lo = find("lower_95"), hi = find("upper_95");
    const bool bounds = lo && hi;
    ForecastTable t;
    std::map<std::string, std::size_t> tpos, cpos;
    std::map<std::pair<std::size_t, std::size_t>, std::array<double, 3>> cells;
    while (r.next(fields)) {
        if (fields.size() != header.size()) r.fail("expected " + std::to_string(header.size()) + " fields");
        const auto [ti, nt] = tpos.emplace(fields[*ct], t.times.size());
        if (nt) t.times.push_back(fields[*ct]);
        const auto [ci, nc] = cpos.emplace(fields[*cc], t.components.size());
        if (nc) t.components.push_back(fields[*cc]);
        std::array<double, 3> v{r.number(fields[*cp], "point"), 0.0, 0.0};
        if (bounds) {
            v[1] = r.number(fields[*lo], "lower_95");
            v[2] = r.number(fields[*hi], "upper_95");
        }
        if (!cells.emplace(std::make_pair(ti->second, ci->second), v).second)
            r.fail("duplicate forecast for time '" + fields[*ct] + "', component '" + fields[*cc] + "'");
    }
    if (cells.empty()) r.fail("forecast file has no rows");
    const auto S = static_cast<Eigen::Index>(t.times.size()), J = static_cast<Eigen::Index>(t.components.size());
    t.point.resize(S, J);
    if (bounds) {
        t.lower_95 = Eigen::MatrixXd(S, J);
        t.upper_95 = Eigen::MatrixXd(S, J);
    }
    for (Eigen::Index s = 0; s < S; ++s)
        for (Eigen::Index j = 0; j < J; ++j) {
            const auto it = cells.find({static_cast<std::size_t>(s), static_cast<std::size_t>(j)});
            if (it == cells.end())
                throw InputError(source + ": no forecast for time '" + t.times[static_cast<std::size_t>(s)] + "', component '" +
                                 t.components[static_cast<std::size_t>(j)] + "'");
            t.point(s, j) = it->second[0];
            if (bounds) {
                (*t.lower_95)(s, j) = it->second[1];
                (*t.upper_95)(s, j) = it->second[2];
            }
        }
    return t;
}

/// Actual shares aligned to a forecast's (time, component) grid; the first missing key is named.
inline Eigen::MatrixXd align_actuals(const ForecastTable& fc, const CompositionalSeries& actuals) {
    std::map<std::string, std::size_t> tpos, cpos;
    for (std::size_t t = 0; t < actuals.length(); ++t) tpos.emplace(actuals.time_index()[t], t);
    for (std::size_t j = 0; j < actuals.components(); ++j) cpos.emplace(actuals.component_names()[j], j);
    Eigen::MatrixXd out(static_cast<Eigen::Index>(fc.times.size()), static_cast<Eigen::Index>(fc.components.size()));
    for (std::size_t j = 0; j < fc.components.size(); ++j)
        if (!cpos.count(fc.components[j])) throw InputError("actuals have no component '" + fc.components[j] + "'");
    for (std::size_t s = 0; s < fc.times.size(); ++s) {
        const auto it = tpos.find(fc.times[s]);
        if (it == tpos.end()) throw InputError("actuals have no row for time '" + fc.times[s] + "'");
        for (std::size_t j = 0; j < fc.components.size(); ++j)
            out(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j)) = actuals[it->second][cpos.at(fc.components[j])];
    }
    return out;
}

/// Precomputed sweep scores: columns P, Q, k_year, fmae, frss.
inline std::vector<SweepCell> read_sweep_csv(std::istream& in, const std::string& source = "<sweep>") {
    detail::CsvReader r{in, source};
    std::vector<std::string> header, fields;
    if (!r.next(header)) r.fail("empty sweep table");
    const std::vector<std::string> need{"P", "Q", "k_year", "fmae", "frss"};
    std::vector<std::size_t> pos;
    for (const auto& n : need) {
        const auto it = std::find(header.begin(), header.end(), n);
        if (it == header.end()) r.fail("missing column '" + n + "'");
        pos.push_back(static_cast<std::size_t>(it - header.begin()));
    }
    std::vector<SweepCell> cells;
    while (r.next(fields)) {
        if (fields.size() != header.size()) r.fail("expected " + std::to_string(header.size()) + " fields");
        const auto whole = [&](const std::string& s, const std::string& what) {
            const double v = r.number(s, what);
            if (v < 0 || v != std::floor(v)) r.fail(what + " must be a non-negative integer");
            return static_cast<std::size_t>(v);
        };
        cells.push_back({whole(fields[pos[0]], "P"), whole(fields[pos[1]], "Q"), whole(fields[pos[2]], "k_year"),
                         r.number(fields[pos[3]], "fmae"), r.number(fields[pos[4]], "frss")});
    }
    if (cells.empty()) r.fail("sweep table has no rows");
    return cells;
}

}  // namespace bdarch::io
