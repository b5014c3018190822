#ifndef QPIC_BUDGET_HPP
#define QPIC_BUDGET_HPP

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

// Composable optical-loss chain: ordered multiplicative stages grouped into
// subsystem scopes, with dB entry as a convenience converter.

namespace qpic::budget {

struct EfficiencyStage {
    std::string name;
    double value = 1.0;   // transmission fraction in [0,1]
    int count = 1;        // repetition multiplier (e.g. two fiber junctions)
    std::string subsystem;        // subtotal marker, e.g. "i", "ii", "iii"
    bool device_coupling = false; // flagged so protocol consumers can exclude it

    void validate() const {
        if (value < 0.0 || value > 1.0)
            throw std::domain_error("EfficiencyStage '" + name + "': value outside [0,1]");
        if (count < 0)
            throw std::domain_error("EfficiencyStage '" + name + "': negative count");
    }
};

struct EfficiencyChain {
    std::vector<EfficiencyStage> stages;

    void validate() const {
        for (const auto& s : stages) s.validate();
    }
};

struct ChainResult {
    std::map<std::string, double> subtotals;  // per subsystem marker
    double total = 1.0;
};

/// dB loss to transmission fraction, eta = 10^(-dB/10).
inline double db_to_efficiency(double loss_db) {
    if (loss_db < 0.0) throw std::domain_error("db_to_efficiency: negative loss");
    return std::pow(10.0, -loss_db / 10.0);
}

inline double efficiency_to_db(double eta) {
    if (!(eta > 0.0)) throw std::domain_error("efficiency_to_db: non-positive efficiency");
    return -10.0 * std::log10(eta);
}

/// Product of stage value^count per subsystem marker, plus the grand total.
inline ChainResult chain_efficiency(const EfficiencyChain& chain,
                                    bool include_device_coupling = true) {
    chain.validate();
    ChainResult r;
    for (const auto& s : chain.stages) {
        if (!include_device_coupling && s.device_coupling) continue;
        const double factor = std::pow(s.value, s.count);
        r.total *= factor;
        if (!s.subsystem.empty()) {
            auto [it, inserted] = r.subtotals.try_emplace(s.subsystem, 1.0);
            it->second *= factor;
        }
    }
    return r;
}

/// Chain total times detector efficiency.
inline double overall_detection(const EfficiencyChain& chain, double detector_eff,
                                bool include_device_coupling = true) {
    if (detector_eff < 0.0 || detector_eff > 1.0)
        throw std::domain_error("overall_detection: detector efficiency outside [0,1]");
    return chain_efficiency(chain, include_device_coupling).total * detector_eff;
}

}  // namespace qpic::budget

#endif
