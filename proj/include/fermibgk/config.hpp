#pragma once

#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "fermibgk/equilibrium.hpp"
#include "fermibgk/errors.hpp"
#include "fermibgk/solver.hpp"

namespace fermibgk {

// ---------------------------------------------------------------------------
// Minimal TOML subset: [section] headers and key = value lines, where value is
// a bool, a number, a "string", or an array of numbers. Exactly what the run
// configuration needs; anything else is a parse error with a line number.
// ---------------------------------------------------------------------------

using TomlValue = std::variant<bool, double, std::string, std::vector<double>>;
using TomlTable = std::map<std::string, std::map<std::string, TomlValue>>;

namespace detail {

    inline std::string toml_trim(const std::string& s)
    {
        std::size_t b = s.find_first_not_of(" \t\r");
        std::size_t e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    }

    inline std::string toml_strip_comment(const std::string& line)
    {
        bool in_string = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"')
                in_string = !in_string;
            else if (line[i] == '#' && !in_string)
                return line.substr(0, i);
        }
        return line;
    }

    inline double toml_number(const std::string& text, int lineno)
    {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(text, &used);
        } catch (const std::exception&) {
            throw ConfigError("line " + std::to_string(lineno) + ": expected a number, got '" + text + "'");
        }
        if (used != text.size())
            throw ConfigError("line " + std::to_string(lineno) + ": trailing characters in number '" + text + "'");
        return v;
    }

    inline TomlValue toml_value(const std::string& raw, int lineno)
    {
        if (raw.empty())
            throw ConfigError("line " + std::to_string(lineno) + ": missing value");
        if (raw == "true")
            return true;
        if (raw == "false")
            return false;
        if (raw.front() == '"') {
            if (raw.size() < 2 || raw.back() != '"')
                throw ConfigError("line " + std::to_string(lineno) + ": unterminated string");
            return raw.substr(1, raw.size() - 2);
        }
        if (raw.front() == '[') {
            if (raw.back() != ']')
                throw ConfigError("line " + std::to_string(lineno) + ": unterminated array");
            std::vector<double> vals;
            std::string body = raw.substr(1, raw.size() - 2);
            std::stringstream ss(body);
            std::string item;
            while (std::getline(ss, item, ',')) {
                item = toml_trim(item);
                if (item.empty())
                    throw ConfigError("line " + std::to_string(lineno) + ": empty array element");
                vals.push_back(toml_number(item, lineno));
            }
            return vals;
        }
        return toml_number(raw, lineno);
    }

} // namespace detail

inline TomlTable parse_toml(std::istream& in)
{
    TomlTable table;
    std::string section;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = detail::toml_trim(detail::toml_strip_comment(line));
        if (line.empty())
            continue;
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3)
                throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
            section = detail::toml_trim(line.substr(1, line.size() - 2));
            table.try_emplace(section);
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = detail::toml_trim(line.substr(0, eq));
        const std::string raw = detail::toml_trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        auto [it, fresh] = table[section].try_emplace(key, detail::toml_value(raw, lineno));
        if (!fresh)
            throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    return table;
}

inline TomlTable parse_toml_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file " + path);
    return parse_toml(in);
}

// ---------------------------------------------------------------------------
// Scenario configuration
// ---------------------------------------------------------------------------

enum class PerturbProfile { e1, e2, e3, e4, e5, gaussian };

/// Full description of one run: RunConfig plus grids, equilibrium, perturbation
/// and per-scenario extras, assembled from a preset and optional file overrides.
struct ScenarioConfig {
    std::string scenario = "decay1x3v";
    RunConfig run;
    unsigned long long seed = 12345;

    int n_x = 16;
    int n_p = 24;
    double p_max_scale = 6.0; ///< p_max = scale / sqrt(a0)
    double domain_length = 1.0;
    double adequacy_tol = 1e-6;

    bool equilibrium_from_params = true;
    double a0 = 1.0, c0 = 0.0;
    double N0 = 0.0, E0 = 0.0;

    double amplitude = 1e-3;
    PerturbProfile profile = PerturbProfile::e1;
    std::array<double, 3> gaussian_center{ 1.0, 0.0, 0.0 };
    double gaussian_width = 1.0;

    int picard_iterations = 12;
    int lincheck_samples = 100;

    double betatable_c_min = -std::log(3.0);
    double betatable_c_max = 10.0;
    int betatable_n = 100;

    Moments invert_moments{ 1.0, { 0.0, 0.0, 0.0 }, 1.0 };

    VelocityGrid make_velocity_grid() const
    {
        return VelocityGrid::make(p_max_scale / std::sqrt(a0 > 0.0 ? a0 : 1.0), n_p);
    }
    SpatialGrid make_spatial_grid() const { return SpatialGrid::make(domain_length, n_x); }
    GlobalEquilibrium make_equilibrium() const
    {
        return equilibrium_from_params
            ? GlobalEquilibrium::from_params(a0, c0, make_velocity_grid(), adequacy_tol)
            : GlobalEquilibrium::from_moments(N0, E0, make_velocity_grid(), adequacy_tol);
    }
};

namespace detail {

    inline ScenarioConfig scenario_preset(const std::string& id)
    {
        ScenarioConfig c;
        c.scenario = id;
        if (id == "relax0d") {
            c.n_x = 1;
            c.n_p = 24;
            c.run.dt = 0.1;
            c.run.t_end = 8.0;
            c.amplitude = 0.05;
            c.profile = PerturbProfile::gaussian;
        } else if (id == "decay1x3v") {
            c.n_x = 16;
            c.n_p = 24;
            c.run.dt = 0.02;
            c.run.t_end = 10.0;
            c.run.diag_every = 5;
            c.amplitude = 1e-3;
            c.profile = PerturbProfile::e1;
        } else if (id == "picard") {
            c.n_x = 8;
            c.n_p = 24;
            c.run.dt = 0.025;
            c.run.t_end = 0.5;
            c.amplitude = 1e-3;
            c.profile = PerturbProfile::e1;
        } else if (id == "lincheck") {
            c.n_p = 64;
            c.n_x = 1;
        } else if (id == "betatable" || id == "invert-roundtrip") {
            // nothing grid-related to preset
        } else {
            throw ConfigError("unknown scenario '" + id + "'");
        }
        return c;
    }

    inline const TomlValue& require(const std::map<std::string, TomlValue>& sec, const std::string& key)
    {
        return sec.at(key);
    }

    template <typename T>
    inline T as(const TomlValue& v, const std::string& where)
    {
        if (!std::holds_alternative<T>(v))
            throw ConfigError(where + ": wrong value type");
        return std::get<T>(v);
    }

    inline int as_int(const TomlValue& v, const std::string& where)
    {
        const double d = as<double>(v, where);
        if (d != std::floor(d))
            throw ConfigError(where + ": expected an integer");
        return static_cast<int>(d);
    }

} // namespace detail

/// Builds the scenario configuration from a parsed table, validating every key.
/// `scenario_override`, when nonempty, wins over the file's [run] scenario.
inline ScenarioConfig scenario_from_table(const TomlTable& table, const std::string& scenario_override = "")
{
    std::string id = scenario_override;
    if (id.empty()) {
        if (auto run = table.find("run"); run != table.end())
            if (auto s = run->second.find("scenario"); s != run->second.end())
                id = detail::as<std::string>(s->second, "run.scenario");
    }
    if (id.empty())
        throw ConfigError("no scenario given (run.scenario or command line)");

    ScenarioConfig cfg = detail::scenario_preset(id);

    bool saw_params = false, saw_moments = false;
    for (const auto& [section, entries] : table) {
        for (const auto& [key, value] : entries) {
            const std::string where = section + "." + key;
            auto num = [&] { return detail::as<double>(value, where); };
            auto integer = [&] { return detail::as_int(value, where); };
            auto str = [&] { return detail::as<std::string>(value, where); };

            if (section == "run") {
                if (key == "scenario")
                    continue; // already consumed
                else if (key == "dt")
                    cfg.run.dt = num();
                else if (key == "t_end")
                    cfg.run.t_end = num();
                else if (key == "diag_every")
                    cfg.run.diag_every = integer();
                else if (key == "snapshot_every")
                    cfg.run.snapshot_every = integer();
                else if (key == "threads")
                    cfg.run.threads = integer();
                else if (key == "seed")
                    cfg.seed = static_cast<unsigned long long>(integer());
                else if (key == "transport") {
                    const std::string v = str();
                    if (v == "semi_lagrangian")
                        cfg.run.transport = TransportScheme::semi_lagrangian;
                    else if (v == "upwind")
                        cfg.run.transport = TransportScheme::upwind;
                    else
                        throw ConfigError(where + ": expected semi_lagrangian or upwind");
                } else if (key == "inversion") {
                    const std::string v = str();
                    if (v == "continuous")
                        cfg.run.inversion = InversionMode::continuous;
                    else if (v == "discrete")
                        cfg.run.inversion = InversionMode::discrete;
                    else
                        throw ConfigError(where + ": expected continuous or discrete");
                } else
                    throw ConfigError("unknown key " + where);
            } else if (section == "tau") {
                if (key == "poly")
                    cfg.run.tau.poly = detail::as<std::vector<double>>(value, where);
                else if (key == "C1")
                    cfg.run.tau.C1 = num();
                else if (key == "C2")
                    cfg.run.tau.C2 = num();
                else if (key == "C3")
                    cfg.run.tau.C3 = num();
                else if (key == "C4")
                    cfg.run.tau.C4 = num();
                else if (key == "n")
                    cfg.run.tau.n = num();
                else if (key == "m")
                    cfg.run.tau.m = num();
                else
                    throw ConfigError("unknown key " + where);
            } else if (section == "grid") {
                if (key == "n_x")
                    cfg.n_x = integer();
                else if (key == "n_p")
                    cfg.n_p = integer();
                else if (key == "p_max_scale")
                    cfg.p_max_scale = num();
                else if (key == "domain_length")
                    cfg.domain_length = num();
                else if (key == "adequacy_tol")
                    cfg.adequacy_tol = num();
                else
                    throw ConfigError("unknown key " + where);
            } else if (section == "equilibrium") {
                if (key == "a0") {
                    cfg.a0 = num();
                    saw_params = true;
                } else if (key == "c0") {
                    cfg.c0 = num();
                    saw_params = true;
                } else if (key == "N0") {
                    cfg.N0 = num();
                    saw_moments = true;
                } else if (key == "E0") {
                    cfg.E0 = num();
                    saw_moments = true;
                } else
                    throw ConfigError("unknown key " + where);
            } else if (section == "perturbation") {
                if (key == "amplitude")
                    cfg.amplitude = num();
                else if (key == "profile") {
                    const std::string v = str();
                    if (v == "e1")
                        cfg.profile = PerturbProfile::e1;
                    else if (v == "e2")
                        cfg.profile = PerturbProfile::e2;
                    else if (v == "e3")
                        cfg.profile = PerturbProfile::e3;
                    else if (v == "e4")
                        cfg.profile = PerturbProfile::e4;
                    else if (v == "e5")
                        cfg.profile = PerturbProfile::e5;
                    else if (v == "gaussian")
                        cfg.profile = PerturbProfile::gaussian;
                    else
                        throw ConfigError(where + ": expected e1..e5 or gaussian");
                } else if (key == "gaussian_center") {
                    const auto v = detail::as<std::vector<double>>(value, where);
                    if (v.size() != 3)
                        throw ConfigError(where + ": expected three components");
                    cfg.gaussian_center = { v[0], v[1], v[2] };
                } else if (key == "gaussian_width")
                    cfg.gaussian_width = num();
                else
                    throw ConfigError("unknown key " + where);
            } else if (section == "picard") {
                if (key == "iterations")
                    cfg.picard_iterations = integer();
                else
                    throw ConfigError("unknown key " + where);
            } else if (section == "lincheck") {
                if (key == "samples")
                    cfg.lincheck_samples = integer();
                else
                    throw ConfigError("unknown key " + where);
            } else if (section == "betatable") {
                if (key == "c_min")
                    cfg.betatable_c_min = num();
                else if (key == "c_max")
                    cfg.betatable_c_max = num();
                else if (key == "n")
                    cfg.betatable_n = integer();
                else
                    throw ConfigError("unknown key " + where);
            } else if (section == "invert") {
                if (key == "N")
                    cfg.invert_moments.N = num();
                else if (key == "E")
                    cfg.invert_moments.E = num();
                else if (key == "P") {
                    const auto v = detail::as<std::vector<double>>(value, where);
                    if (v.size() != 3)
                        throw ConfigError(where + ": expected three components");
                    cfg.invert_moments.P = { v[0], v[1], v[2] };
                } else
                    throw ConfigError("unknown key " + where);
            } else
                throw ConfigError("unknown section [" + section + "]");
        }
    }

    if (saw_params && saw_moments)
        throw ConfigError("[equilibrium]: give either (a0, c0) or (N0, E0), not both");
    cfg.equilibrium_from_params = !saw_moments;

    if (cfg.n_x < 1 || cfg.n_p < 2)
        throw ConfigError("grid: need n_x >= 1 and n_p >= 2");
    cfg.run.tau.validate();
    return cfg;
}

} // namespace fermibgk
