#ifndef QPIC_TRACE_HPP
#define QPIC_TRACE_HPP

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace qpic {

enum class AxisKind { WavelengthNm, FrequencyThz, TimeDelayNs, Unknown };

inline std::string axis_kind_name(AxisKind k) {
    switch (k) {
        case AxisKind::WavelengthNm: return "wavelength_nm";
        case AxisKind::FrequencyThz: return "frequency_thz";
        case AxisKind::TimeDelayNs: return "time_ns";
        default: return "unknown";
    }
}

/// Ordered (x, y, sigma_y) samples. sigma_y defaults to the Poisson
/// counting estimate sqrt(max(y, 1)) when not supplied.
struct SpectrumTrace {
    AxisKind axis = AxisKind::Unknown;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> sigma_y;

    std::size_t size() const { return x.size(); }

    void default_sigma() {
        sigma_y.resize(y.size());
        std::transform(y.begin(), y.end(), sigma_y.begin(),
                       [](double v) { return std::sqrt(std::max(v, 1.0)); });
    }

    void validate() const {
        if (x.size() != y.size() || x.size() != sigma_y.size())
            throw std::invalid_argument("SpectrumTrace: column lengths differ");
        if (x.empty()) throw std::invalid_argument("SpectrumTrace: empty trace");
        for (std::size_t i = 1; i < x.size(); ++i)
            if (!(x[i] > x[i - 1]))
                throw std::invalid_argument("SpectrumTrace: x must be strictly increasing at index " +
                                            std::to_string(i));
        for (double s : sigma_y)
            if (!(s > 0.0)) throw std::invalid_argument("SpectrumTrace: sigma_y must be positive");
    }
};

}  // namespace qpic

#endif
