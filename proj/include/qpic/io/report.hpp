#ifndef QPIC_IO_REPORT_HPP
#define QPIC_IO_REPORT_HPP

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "qpic/fit/levmar.hpp"
#include "qpic/protocol.hpp"

// Machine-readable run reports. The deterministic section carries no
// timestamps so identical inputs serialize byte-identically.

namespace qpic::io {

inline constexpr const char* tool_version = "qpic 1.0.0";

class Report {
  public:
    explicit Report(std::string command) {
        doc_["command"] = std::move(command);
        doc_["tool_version"] = tool_version;
        doc_["deterministic"] = true;
        doc_["inputs"] = nlohmann::json::object();
        doc_["outputs"] = nlohmann::json::object();
        doc_["warnings"] = nlohmann::json::array();
    }

    void input(const std::string& key, const nlohmann::json& value) { doc_["inputs"][key] = value; }
    void output(const std::string& key, const nlohmann::json& value) { doc_["outputs"][key] = value; }
    void warn(const std::string& message) { doc_["warnings"].push_back(message); }

    void add_fit_outcome(const std::string& key, const fit::FitOutcome& fit) {
        nlohmann::json j;
        for (std::size_t i = 0; i < fit.param_names.size(); ++i) {
            j["params"][fit.param_names[i]] = fit.params[i];
            j["stderr"][fit.param_names[i]] =
                fit.covariance.empty() ? 0.0 : std::sqrt(std::max(
                    fit.covariance[i * fit.param_names.size() + i], 0.0));
        }
        for (const auto& [k, v] : fit.derived) j["derived"][k] = v;
        j["reduced_chi2"] = fit.reduced_chi2;
        j["iterations"] = fit.n_iterations;
        j["converged"] = fit.converged;
        doc_["outputs"][key] = j;
    }

    std::string serialize() const { return doc_.dump(2) + "\n"; }

    void write(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write report: " + path);
        out << serialize();
    }

    const nlohmann::json& json() const { return doc_; }

  private:
    nlohmann::json doc_;
};

/// Grid CSV layout: first row is the kappa_wg/kappa axis (leading cell
/// blank), first column the gamma* axis in MHz, body the values.
inline void write_grid_csv(const std::string& path, const protocol::SweepGrid& grid,
                           bool fidelity) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write grid: " + path);
    out << std::setprecision(10);
    out << "gamma_star_mhz\\coupling_ratio";
    for (double c : grid.coupling_ratios) out << ',' << c;
    out << '\n';
    const auto& body = fidelity ? grid.fidelity : grid.success_prob;
    for (std::size_t j = 0; j < grid.gamma_star_mhz.size(); ++j) {
        out << grid.gamma_star_mhz[j];
        for (double v : body[j]) out << ',' << v;
        out << '\n';
    }
}

}  // namespace qpic::io

#endif
