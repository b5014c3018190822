#ifndef QPIC_IO_CONFIG_HPP
#define QPIC_IO_CONFIG_HPP

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qpic/budget.hpp"
#include "qpic/cavity_qed.hpp"
#include "qpic/protocol.hpp"
#include "qpic/units.hpp"

// Declarative device/scenario configuration. The format is a plain
// key-value file with [section] headers; repeated keys (budget stages) keep
// their file order. Shipped presets live under presets/ as data files.

namespace qpic::io {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Raw parsed file: section -> ordered (key, value) pairs.
struct KeyValueFile {
    std::map<std::string, std::vector<std::pair<std::string, std::string>>> sections;

    bool has(const std::string& section, const std::string& key) const {
        auto it = sections.find(section);
        if (it == sections.end()) return false;
        for (const auto& [k, v] : it->second)
            if (k == key) return true;
        return false;
    }
    std::string get(const std::string& section, const std::string& key) const {
        auto it = sections.find(section);
        if (it != sections.end())
            for (const auto& [k, v] : it->second)
                if (k == key) return v;
        throw ConfigError("missing key [" + section + "] " + key);
    }
    std::string get_or(const std::string& section, const std::string& key,
                       const std::string& fallback) const {
        return has(section, key) ? get(section, key) : fallback;
    }
    double get_num(const std::string& section, const std::string& key) const {
        const std::string s = get(section, key);
        try {
            std::size_t used = 0;
            double v = std::stod(s, &used);
            if (used != s.size()) throw ConfigError("");
            return v;
        } catch (...) {
            throw ConfigError("non-numeric value for [" + section + "] " + key + ": " + s);
        }
    }
    double get_num_or(const std::string& section, const std::string& key, double fallback) const {
        return has(section, key) ? get_num(section, key) : fallback;
    }
    std::vector<std::string> get_all(const std::string& section, const std::string& key) const {
        std::vector<std::string> out;
        auto it = sections.find(section);
        if (it != sections.end())
            for (const auto& [k, v] : it->second)
                if (k == key) out.push_back(v);
        return out;
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(trim(item));
    return out;
}

}  // namespace detail

inline KeyValueFile parse_config(std::istream& in, const std::string& origin = "<stream>") {
    KeyValueFile f;
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(origin + ":" + std::to_string(line_no) + ": unterminated section");
            section = detail::trim(line.substr(1, line.size() - 2));
            f.sections[section];
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
        f.sections[section].emplace_back(detail::trim(line.substr(0, eq)),
                                         detail::trim(line.substr(eq + 1)));
    }
    return f;
}

inline KeyValueFile load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    return parse_config(in, path);
}

/// Searches the preset name in $QPIC_PRESET_PATH, ./presets and the
/// build-time preset directory. A name that is already a readable path
/// wins outright.
inline std::string resolve_preset(const std::string& name) {
    namespace fs = std::filesystem;
    if (fs::exists(name)) return name;
    std::vector<std::string> dirs;
    if (const char* env = std::getenv("QPIC_PRESET_PATH")) dirs.push_back(env);
    dirs.push_back("presets");
#ifdef QPIC_PRESET_DIR
    dirs.push_back(QPIC_PRESET_DIR);
#endif
    for (const auto& d : dirs) {
        fs::path p = fs::path(d) / (name + ".ini");
        if (fs::exists(p)) return p.string();
        p = fs::path(d) / name;
        if (fs::exists(p)) return p.string();
    }
    throw ConfigError("preset not found: " + name);
}

// ---------------------------------------------------------------------------
// Typed assembly
// ---------------------------------------------------------------------------

struct SweepSpec {
    double coupling_min = 1e-3, coupling_max = 1.0;
    std::size_t coupling_points = 60;
    double gamma_star_min_mhz = 1e-2, gamma_star_max_mhz = 1e3;
    std::size_t gamma_star_points = 60;
};

struct DeviceConfig {
    std::optional<cavity::SpinCavitySystem> system;
    protocol::ProtocolConfig protocol;
    protocol::EfficiencyPair efficiency;
    std::optional<budget::EfficiencyChain> chain;
    double detector_eff = 0.65;
    SweepSpec sweep;
    std::string source;
};

namespace detail {

inline protocol::ProtocolConfig parse_protocol(const KeyValueFile& f) {
    protocol::ProtocolConfig p;
    const std::string sec = "protocol";
    const std::string states = f.get_or(sec, "input_states", "cardinal6");
    if (states == "cardinal6")
        p.input_state_policy = protocol::InputStatePolicy::CardinalSixAverage;
    else if (states == "equal-superposition")
        p.input_state_policy = protocol::InputStatePolicy::FixedEqualSuperposition;
    else
        throw ConfigError("unknown input_states: " + states);
    const std::string herald = f.get_or(sec, "herald", "both");
    if (herald == "both")
        p.herald_policy = protocol::HeraldPolicy::BothWithFeedForward;
    else if (herald == "plus-only")
        p.herald_policy = protocol::HeraldPolicy::PlusOnly;
    else
        throw ConfigError("unknown herald: " + herald);
    const std::string deph = f.get_or(sec, "dephasing", "slow-diffusion");
    if (deph == "slow-diffusion")
        p.dephasing_model = protocol::DephasingModel::SlowDiffusion;
    else if (deph == "fast-linewidth")
        p.dephasing_model = protocol::DephasingModel::FastLinewidth;
    else
        throw ConfigError("unknown dephasing: " + deph);
    const std::string amp = f.get_or(sec, "amplitude", "phase-contrast");
    if (amp == "phase-contrast")
        p.amplitude_policy = protocol::AmplitudePolicy::PhaseContrast;
    else if (amp == "heralded-amplitudes")
        p.amplitude_policy = protocol::AmplitudePolicy::HeraldedAmplitudes;
    else
        throw ConfigError("unknown amplitude: " + amp);
    p.quadrature.n_points = static_cast<int>(f.get_num_or(sec, "quadrature_points", 129));
    p.quadrature.truncation_fwhm = f.get_num_or(sec, "truncation_fwhm", 20.0);
    if (f.has(sec, "probe_thz"))
        p.probe_frequency = units::Frequency{f.get_num(sec, "probe_thz") * 1e12};
    p.r_v = {f.get_num_or(sec, "r_v_real", 1.0), f.get_num_or(sec, "r_v_imag", 0.0)};
    p.validate();
    return p;
}

inline budget::EfficiencyChain parse_chain(const KeyValueFile& f) {
    budget::EfficiencyChain chain;
    for (const auto& raw : f.get_all("budget", "stage")) {
        // subsystem : name : value[:count][:flags]; value may end in "db"
        auto fields = split(raw, ':');
        if (fields.size() < 3)
            throw ConfigError("budget stage needs subsystem : name : value -- got: " + raw);
        budget::EfficiencyStage s;
        s.subsystem = fields[0];
        s.name = fields[1];
        std::string val = fields[2];
        if (val.size() > 2 && (val.ends_with("db") || val.ends_with("dB")))
            s.value = budget::db_to_efficiency(std::stod(val.substr(0, val.size() - 2)));
        else
            s.value = std::stod(val);
        if (fields.size() > 3 && !fields[3].empty()) s.count = std::stoi(fields[3]);
        if (fields.size() > 4) s.device_coupling = fields[4] == "device-coupling";
        chain.stages.push_back(s);
    }
    chain.validate();
    return chain;
}

}  // namespace detail

/// Builds the typed configuration from a parsed file; physical invariants
/// of the embedded types are enforced here, at load time.
inline DeviceConfig build_device_config(const KeyValueFile& f, const std::string& source = "") {
    DeviceConfig cfg;
    cfg.source = source;
    if (f.sections.contains("cavity") && f.sections.contains("emitter")) {
        cavity::SpinCavitySystem sys;
        sys.cavity.nu_c = units::Frequency{f.get_num("cavity", "resonance_thz") * 1e12};
        sys.cavity.q = f.get_num("cavity", "q");
        sys.cavity.coupling_ratio = f.get_num("cavity", "coupling_ratio");
        sys.cavity.scatter_ratio =
            f.get_num_or("cavity", "scatter_ratio", 1.0 - sys.cavity.coupling_ratio);
        sys.cavity.v_norm = f.get_num_or("cavity", "mode_volume", 0.8);

        sys.emitter.nu_e = units::Frequency{
            f.get_num_or("emitter", "zpl_thz", sys.cavity.nu_c.hz / 1e12) * 1e12};
        sys.emitter.tau_on_ns = f.get_num("emitter", "tau_on_ns");
        sys.emitter.tau_off_ns = f.get_num("emitter", "tau_off_ns");
        sys.emitter.tau_bulk_ns = f.get_num_or("emitter", "tau_bulk_ns", 5.10);
        sys.emitter.quantum_efficiency = f.get_num_or("emitter", "quantum_efficiency", 0.80);
        sys.emitter.debye_waller = f.get_num_or("emitter", "debye_waller", 0.57);
        sys.emitter.gamma_star = units::LinewidthFwhm{f.get_num_or("emitter", "gamma_star_mhz", 0.0) * 1e6};
        sys.emitter.zeeman_split =
            units::Frequency{f.get_num_or("emitter", "zeeman_split_ghz", 0.0) * 1e9};

        if (f.has("system", "g_ghz"))
            sys.g = units::AngularRate{units::two_pi * f.get_num("system", "g_ghz") * 1e9};
        else
            sys.g = cavity::coupling_g_from_enhanced_rate(
                units::inverse_lifetime(sys.emitter.tau_on_ns), sys.cavity.kappa());
        if (f.get_or("system", "spin_up_model", "uncoupled") == "zeeman-detuned")
            sys.spin_up_model = cavity::SpinUpModel::ZeemanDetuned;
        sys.validate();
        cfg.system = sys;
    }
    cfg.protocol = detail::parse_protocol(f);
    cfg.efficiency.eta_det = f.get_num_or("efficiency", "eta_det", 0.0);
    cfg.efficiency.eta_exc = f.get_num_or("efficiency", "eta_exc", 0.0);
    cfg.efficiency.validate();
    if (f.sections.contains("budget")) {
        cfg.chain = detail::parse_chain(f);
        cfg.detector_eff = f.get_num_or("budget", "detector", 0.65);
    }
    if (f.sections.contains("sweep")) {
        cfg.sweep.coupling_min = f.get_num_or("sweep", "coupling_min", 1e-3);
        cfg.sweep.coupling_max = f.get_num_or("sweep", "coupling_max", 1.0);
        cfg.sweep.coupling_points =
            static_cast<std::size_t>(f.get_num_or("sweep", "coupling_points", 60));
        cfg.sweep.gamma_star_min_mhz = f.get_num_or("sweep", "gamma_star_min_mhz", 1e-2);
        cfg.sweep.gamma_star_max_mhz = f.get_num_or("sweep", "gamma_star_max_mhz", 1e3);
        cfg.sweep.gamma_star_points =
            static_cast<std::size_t>(f.get_num_or("sweep", "gamma_star_points", 60));
    }
    return cfg;
}

inline DeviceConfig load_device_config(const std::string& name_or_path) {
    const std::string path = resolve_preset(name_or_path);
    return build_device_config(load_config(path), path);
}

}  // namespace qpic::io

#endif
