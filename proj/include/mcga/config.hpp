#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcga/problem.hpp"
#include "mcga/problems.hpp"
#include "mcga/solver.hpp"

namespace mcga {

// Raw key/value configuration as accumulated from defaults, a config file and
// command-line overrides (later layers win).
struct ConfigInput {
    std::map<std::string, std::string> values;

    void set(const std::string& key, const std::string& value) { values[key] = value; }
    bool has(const std::string& key) const { return values.count(key) > 0; }

    std::optional<std::string> get(const std::string& key) const {
        const auto it = values.find(key);
        if (it == values.end()) return std::nullopt;
        return it->second;
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline long long to_ll(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const long long out = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (...) {
        throw std::invalid_argument("config: bad integer for " + key + ": '" + v + "'");
    }
}

inline double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double out = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (...) {
        throw std::invalid_argument("config: bad number for " + key + ": '" + v + "'");
    }
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw std::invalid_argument("config: bad boolean for " + key + ": '" + v + "'");
}

inline std::vector<int> to_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(static_cast<int>(to_ll(key, item)));
    }
    if (out.empty()) throw std::invalid_argument("config: empty list for " + key);
    return out;
}

}  // namespace detail

// Flat key = value format, '#' comments. Unknown keys are rejected up front
// so sweep scripts fail loudly on typos.
inline ConfigInput parse_flat_config(std::istream& in, const std::string& origin) {
    ConfigInput out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(origin + ":" + std::to_string(line_no) +
                                        ": expected key = value");
        out.set(detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    }
    return out;
}

// Accepts either a flat key = value file or a JSON document (a config object,
// or any object holding one under "config" -- e.g. an emitted summary.json),
// so a run can be reproduced directly from its own output.
inline ConfigInput load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    char first = 0;
    in >> std::ws;
    in.get(first);
    in.unget();
    if (first != '{') return parse_flat_config(in, path);

    const nlohmann::json doc = nlohmann::json::parse(in);
    const nlohmann::json& cfg = doc.contains("config") ? doc.at("config") : doc;
    ConfigInput out;
    for (const auto& [key, value] : cfg.items()) {
        if (value.is_string())
            out.set(key, value.get<std::string>());
        else if (value.is_boolean())
            out.set(key, value.get<bool>() ? "1" : "0");
        else if (value.is_number_integer())
            out.set(key, std::to_string(value.get<long long>()));
        else if (value.is_number_unsigned())
            out.set(key, std::to_string(value.get<unsigned long long>()));
        else if (value.is_number_float())
            out.set(key, format_full(value.get<double>()));
        else if (value.is_array()) {
            std::string list;
            for (const auto& item : value) {
                if (!list.empty()) list += ",";
                list += std::to_string(item.get<long long>());
            }
            out.set(key, list);
        } else
            throw std::invalid_argument("config: unsupported JSON value for key " + key);
    }
    return out;
}

// Fully resolved experiment configuration. Scaling has already been applied:
// n and replicates hold effective values and requested_scale records what was
// asked for, so re-running from an emitted config is idempotent.
struct ExperimentConfig {
    std::string experiment;  // exp1 | exp2 | custom
    long long n = 0;
    double t0 = 0.0;
    double t_star = 0.0;
    double dt = 0.0;
    std::uint64_t seed = 0;
    std::string mode;  // neglect | exact | both
    int grid_m = 0;
    std::vector<int> resolutions;
    int replicates = 1;
    double diffusion_d = 0.1;
    int jobs = 0;  // 0 = hardware concurrency
    double requested_scale = 1.0;
    std::string out_dir = "out";
    bool emit_snapshots = false;
    double relerr_floor = 1e-12;
    SolverOptions solver;
    bool has_custom = false;
    CustomProblemDesc custom;

    RunConfig run_config(CouplingMode coupling) const {
        return RunConfig(n, t0, t_star, dt, seed, coupling, replicates);
    }

    std::vector<CouplingMode> coupling_modes() const {
        if (mode == "both") return {CouplingMode::neglect, CouplingMode::exact};
        return {coupling_mode_from_string(mode)};
    }
};

namespace detail {

inline void parse_custom_block(const ConfigInput& in, ExperimentConfig& cfg) {
    const auto get = [&](const std::string& key) { return in.get("custom." + key); };
    CustomProblemDesc& d = cfg.custom;
    if (const auto v = get("name")) d.name = *v;
    if (const auto v = get("domain")) {
        std::stringstream ss(*v);
        char c1 = 0, c2 = 0, c3 = 0;
        if (!(ss >> d.domain.x_min >> c1 >> d.domain.x_max >> c2 >> d.domain.y_min >> c3 >>
              d.domain.y_max) ||
            c1 != ',' || c2 != ',' || c3 != ',')
            throw std::invalid_argument("config: custom.domain must be x_min,x_max,y_min,y_max");
    }
    const auto v_diff = get("diffusion");
    if (!v_diff) throw std::invalid_argument("config: custom.diffusion is required");
    d.diffusion = Polynomial2D::parse(*v_diff);
    if (const auto v = get("advection_x")) d.advection_x = Polynomial2D::parse(*v);
    if (const auto v = get("advection_y")) d.advection_y = Polynomial2D::parse(*v);
    if (const auto v = get("reaction")) d.reaction = Polynomial2D::parse(*v);
    if (const auto v = get("exact_poly")) {
        d.has_exact = true;
        d.exact.poly = Polynomial2D::parse(*v);
        if (const auto e = get("exact_exp")) d.exact.exponent = Polynomial2D::parse(*e);
        if (const auto g = get("exact_decay"))
            d.exact.time_decay = to_double("custom.exact_decay", *g);
    }
    if (const auto v = get("initial_poly")) {
        d.has_initial = true;
        d.initial.poly = Polynomial2D::parse(*v);
        if (const auto e = get("initial_exp")) d.initial.exponent = Polynomial2D::parse(*e);
    }
    if (const auto v = get("dirichlet_poly")) {
        d.has_dirichlet = true;
        d.dirichlet.poly = Polynomial2D::parse(*v);
        if (const auto e = get("dirichlet_exp")) d.dirichlet.exponent = Polynomial2D::parse(*e);
        if (const auto g = get("dirichlet_decay"))
            d.dirichlet.time_decay = to_double("custom.dirichlet_decay", *g);
    }
    cfg.has_custom = true;
}

}  // namespace detail

// Apply per-experiment defaults, overrides and the --scale factor; validate.
inline ExperimentConfig resolve_config(const ConfigInput& in) {
    ExperimentConfig cfg;
    cfg.experiment = in.get("experiment").value_or("exp1");
    if (cfg.experiment != "exp1" && cfg.experiment != "exp2" && cfg.experiment != "custom")
        throw std::invalid_argument("config: experiment must be exp1, exp2 or custom");

    if (cfg.experiment == "exp1") {
        cfg.n = 500000;
        cfg.t0 = 0.0;
        cfg.t_star = 1.0;
        cfg.dt = 0.001;
        cfg.grid_m = 15;
        cfg.mode = "both";
        cfg.replicates = 1;
    } else if (cfg.experiment == "exp2") {
        cfg.n = 500000;
        cfg.t0 = 5.0;
        cfg.t_star = 6.0;
        cfg.dt = 0.01;
        cfg.grid_m = 21;
        cfg.mode = "neglect";
        cfg.replicates = 20;
        cfg.resolutions = {11, 21, 41, 81};
    } else {
        cfg.n = 100000;
        cfg.t0 = 0.0;
        cfg.t_star = 1.0;
        cfg.dt = 0.001;
        cfg.grid_m = 15;
        cfg.mode = "neglect";
        cfg.replicates = 1;
    }
    cfg.seed = 1905;

    using detail::to_bool;
    using detail::to_double;
    using detail::to_int_list;
    using detail::to_ll;
    if (const auto v = in.get("n")) cfg.n = to_ll("n", *v);
    if (const auto v = in.get("t0")) cfg.t0 = to_double("t0", *v);
    if (const auto v = in.get("t_star")) cfg.t_star = to_double("t_star", *v);
    if (const auto v = in.get("dt")) cfg.dt = to_double("dt", *v);
    if (const auto v = in.get("seed")) {
        try {
            std::size_t pos = 0;
            cfg.seed = std::stoull(*v, &pos);
            if (pos != v->size()) throw std::invalid_argument(*v);
        } catch (...) {
            throw std::invalid_argument("config: bad integer for seed: '" + *v + "'");
        }
    }
    if (const auto v = in.get("mode")) cfg.mode = *v;
    if (const auto v = in.get("grid_m")) cfg.grid_m = static_cast<int>(to_ll("grid_m", *v));
    if (const auto v = in.get("resolutions")) cfg.resolutions = to_int_list("resolutions", *v);
    if (const auto v = in.get("replicates"))
        cfg.replicates = static_cast<int>(to_ll("replicates", *v));
    if (const auto v = in.get("diffusion_d")) cfg.diffusion_d = to_double("diffusion_d", *v);
    if (const auto v = in.get("jobs")) cfg.jobs = static_cast<int>(to_ll("jobs", *v));
    if (const auto v = in.get("out_dir")) cfg.out_dir = *v;
    if (const auto v = in.get("emit_snapshots")) cfg.emit_snapshots = to_bool("emit_snapshots", *v);
    if (const auto v = in.get("relerr_floor")) cfg.relerr_floor = to_double("relerr_floor", *v);
    if (const auto v = in.get("n_per_cell"))
        cfg.solver.n_per_cell = static_cast<int>(to_ll("n_per_cell", *v));
    if (const auto v = in.get("w_cap")) cfg.solver.w_cap = to_double("w_cap", *v);
    if (const auto v = in.get("pop_cap_factor"))
        cfg.solver.pop_cap_factor = to_double("pop_cap_factor", *v);
    if (const auto v = in.get("trailing_window"))
        cfg.solver.trailing_window = to_ll("trailing_window", *v);

    double scale = 1.0;
    if (const auto v = in.get("scale")) scale = to_double("scale", *v);
    if (!(scale > 0.0)) throw std::invalid_argument("config: scale must be positive");
    if (scale != 1.0) {
        cfg.n = std::max<long long>(1, std::llround(static_cast<double>(cfg.n) * scale));
        cfg.replicates =
            std::max(1, static_cast<int>(std::llround(cfg.replicates * scale)));
        cfg.requested_scale = scale;
    }

    if (cfg.experiment == "custom") detail::parse_custom_block(in, cfg);

    for (const auto& [key, value] : in.values) {
        static const std::vector<std::string> known = {
            "experiment", "n", "t0", "t_star", "dt", "seed", "mode", "grid_m", "resolutions",
            "replicates", "diffusion_d", "jobs", "scale", "out_dir", "emit_snapshots",
            "relerr_floor", "n_per_cell", "w_cap", "pop_cap_factor", "trailing_window"};
        if (key.rfind("custom.", 0) == 0) {
            if (cfg.experiment != "custom")
                throw std::invalid_argument("config: custom.* keys require experiment = custom");
            continue;
        }
        bool ok = false;
        for (const auto& k : known) ok = ok || k == key;
        if (!ok) throw std::invalid_argument("config: unknown key '" + key + "'");
        (void)value;
    }

    if (cfg.experiment == "exp2") {
        if (!(cfg.t0 > 0.0))
            throw std::invalid_argument("config: exp2 requires t0 > 0 (solution singular at t=0)");
        if (cfg.resolutions.empty())
            throw std::invalid_argument("config: exp2 requires at least one resolution");
        for (int m : cfg.resolutions)
            if (m < 3) throw std::invalid_argument("config: resolutions must be at least 3");
    }
    if (cfg.grid_m < 3) throw std::invalid_argument("config: grid_m must be at least 3");
    if (cfg.mode != "neglect" && cfg.mode != "exact" && cfg.mode != "both")
        throw std::invalid_argument("config: mode must be neglect, exact or both");
    if (!(cfg.diffusion_d > 0.0)) throw std::invalid_argument("config: diffusion_d must be positive");
    if (cfg.solver.n_per_cell < 1)
        throw std::invalid_argument("config: n_per_cell must be at least 1");
    if (!(cfg.solver.w_cap > 0.0)) throw std::invalid_argument("config: w_cap must be positive");
    (void)cfg.run_config(CouplingMode::neglect);  // validates N, times, dt, replicates
    return cfg;
}

// Normalized config echo; loading this back reproduces the run bit for bit.
inline nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg) {
    nlohmann::ordered_json j;
    j["experiment"] = cfg.experiment;
    j["n"] = cfg.n;
    j["t0"] = cfg.t0;
    j["t_star"] = cfg.t_star;
    j["dt"] = cfg.dt;
    j["seed"] = cfg.seed;
    j["mode"] = cfg.mode;
    j["grid_m"] = cfg.grid_m;
    if (!cfg.resolutions.empty()) j["resolutions"] = cfg.resolutions;
    j["replicates"] = cfg.replicates;
    j["diffusion_d"] = cfg.diffusion_d;
    j["jobs"] = cfg.jobs;
    j["scale"] = 1.0;  // n and replicates are already effective values
    j["out_dir"] = cfg.out_dir;
    j["emit_snapshots"] = cfg.emit_snapshots;
    j["relerr_floor"] = cfg.relerr_floor;
    j["n_per_cell"] = cfg.solver.n_per_cell;
    j["w_cap"] = cfg.solver.w_cap;
    j["pop_cap_factor"] = cfg.solver.pop_cap_factor;
    j["trailing_window"] = cfg.solver.trailing_window;
    if (cfg.has_custom) {
        j["custom.name"] = cfg.custom.name;
        j["custom.domain"] = format_full(cfg.custom.domain.x_min) + "," +
                             format_full(cfg.custom.domain.x_max) + "," +
                             format_full(cfg.custom.domain.y_min) + "," +
                             format_full(cfg.custom.domain.y_max);
        j["custom.diffusion"] = cfg.custom.diffusion.to_string();
        if (!cfg.custom.advection_x.empty())
            j["custom.advection_x"] = cfg.custom.advection_x.to_string();
        if (!cfg.custom.advection_y.empty())
            j["custom.advection_y"] = cfg.custom.advection_y.to_string();
        if (!cfg.custom.reaction.empty()) j["custom.reaction"] = cfg.custom.reaction.to_string();
        if (cfg.custom.has_exact) {
            j["custom.exact_poly"] = cfg.custom.exact.poly.to_string();
            if (!cfg.custom.exact.exponent.empty())
                j["custom.exact_exp"] = cfg.custom.exact.exponent.to_string();
            if (cfg.custom.exact.time_decay != 0.0)
                j["custom.exact_decay"] = cfg.custom.exact.time_decay;
        }
        if (cfg.custom.has_initial) {
            j["custom.initial_poly"] = cfg.custom.initial.poly.to_string();
            if (!cfg.custom.initial.exponent.empty())
                j["custom.initial_exp"] = cfg.custom.initial.exponent.to_string();
        }
        if (cfg.custom.has_dirichlet) {
            j["custom.dirichlet_poly"] = cfg.custom.dirichlet.poly.to_string();
            if (!cfg.custom.dirichlet.exponent.empty())
                j["custom.dirichlet_exp"] = cfg.custom.dirichlet.exponent.to_string();
            if (cfg.custom.dirichlet.time_decay != 0.0)
                j["custom.dirichlet_decay"] = cfg.custom.dirichlet.time_decay;
        }
    }
    return j;
}

}  // namespace mcga
