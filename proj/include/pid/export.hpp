#pragma once

// Text and image artifacts: ledger JSON, CSV grids, 8-bit PGM, stability
// report JSON.

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pid/detect.hpp"
#include "pid/format.hpp"

namespace pid {

namespace detail {

inline std::string features_json(const InteractionCandidate& c) {
    std::string out = "[";
    for (std::size_t k = 0; k < c.features.size(); ++k) {
        if (k) out.push_back(',');
        out += std::to_string(c.features[k]);
    }
    out.push_back(']');
    return out;
}

}  // namespace detail

/// `[{"features":[1,2],"strength":0.42}, ...]` in rank order.
inline std::string ledger_to_json(const PersistenceLedger& ledger) {
    std::string out = "[";
    bool first = true;
    for (const auto& item : rank(ledger)) {
        out += first ? "\n" : ",\n";
        first = false;
        out += "{\"features\":" + detail::features_json(item.candidate) + ",\"strength\":" + fmt::real(item.strength) +
               "}";
    }
    out += first ? "]\n" : "\n]\n";
    return out;
}

inline std::vector<RankedCandidate> parse_ledger_json(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("ledger JSON: ") + e.what());
    }
    if (!doc.is_array()) throw ParseError("ledger JSON must be an array");
    std::vector<RankedCandidate> out;
    for (const auto& item : doc) {
        if (!item.is_object() || !item.contains("features") || !item.contains("strength") ||
            !item["features"].is_array() || !item["strength"].is_number())
            throw ParseError("ledger entries need 'features' and 'strength'");
        RankedCandidate rc;
        for (const auto& f : item["features"]) {
            if (!f.is_number_unsigned()) throw ParseError("feature indices must be non-negative integers");
            rc.candidate.features.push_back(f.get<std::uint32_t>());
        }
        std::sort(rc.candidate.features.begin(), rc.candidate.features.end());
        rc.strength = item["strength"].get<double>();
        out.push_back(std::move(rc));
    }
    return out;
}

inline std::string matrix_to_csv(const Matrix& m) {
    std::string out;
    for (std::size_t i = 0; i < m.rows; ++i) {
        for (std::size_t j = 0; j < m.cols; ++j) {
            if (j) out.push_back(',');
            out += fmt::real(m.at(i, j));
        }
        out.push_back('\n');
    }
    return out;
}

/// Binary (P5) 8-bit greyscale image of a grid, max-normalized to 0..255.
inline std::string grid_to_pgm(const Matrix& grid) {
    const Matrix n = normalize_max(grid);
    std::string out = "P5\n" + std::to_string(n.cols) + " " + std::to_string(n.rows) + "\n255\n";
    out.reserve(out.size() + n.data.size());
    for (double v : n.data) {
        const double c = std::clamp(v, 0.0, 1.0);
        out.push_back(static_cast<char>(static_cast<std::uint8_t>(std::lround(c * 255.0))));
    }
    return out;
}

inline std::string stability_to_json(const StabilityReport& rep) {
    auto cand_list = [](const std::vector<InteractionCandidate>& cs) {
        std::string s = "[";
        for (std::size_t k = 0; k < cs.size(); ++k) {
            if (k) s.push_back(',');
            s += detail::features_json(cs[k]);
        }
        return s + "]";
    };
    std::string out = "{";
    out += "\"bound\":" + fmt::real(rep.bound);
    out += ",\n\"common\":[";
    for (std::size_t k = 0; k < rep.common.size(); ++k) {
        const auto& r = rep.common[k];
        out += k ? ",\n" : "\n";
        out += "{\"diff\":" + fmt::real(r.diff) + ",\"features\":" + detail::features_json(r.candidate) +
               ",\"rho_f\":" + fmt::real(r.rho_f) + ",\"rho_g\":" + fmt::real(r.rho_g) + "}";
    }
    out += "]";
    out += ",\n\"delta\":" + fmt::real(rep.delta);
    out += ",\n\"layer\":" + std::to_string(rep.layer);
    out += ",\n\"max_diff\":" + fmt::real(rep.max_diff());
    out += ",\n\"mean_diff\":" + fmt::real(rep.mean_diff());
    out += ",\n\"only_in_f\":" + cand_list(rep.only_in_f);
    out += ",\n\"only_in_g\":" + cand_list(rep.only_in_g);
    out += ",\n\"p\":" + fmt::real(rep.p);
    out += ",\n\"units\":" + std::to_string(rep.units);
    out += ",\n\"violations\":" + std::to_string(rep.violations());
    out += "}\n";
    return out;
}

}  // namespace pid
