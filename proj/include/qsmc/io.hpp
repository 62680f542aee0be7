#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <string_view>

#include <json.hpp>

#include "qsmc/schedule.hpp"
#include "qsmc/state.hpp"

namespace qsmc {

// Numeric CSV cell: 12 significant digits, '.' decimal separator, no locale.
inline std::string format_csv_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

// Writes via a temp file in the target directory followed by a rename, so a
// crash never leaves a half-written file. Refuses to replace an existing file
// unless `force`.
inline void atomic_write_file(const std::filesystem::path& path, std::string_view content,
                              bool force = false) {
    namespace fs = std::filesystem;
    if (!force && fs::exists(path))
        throw ConfigError("output file already exists (pass --force to overwrite): " +
                          path.string());
    fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
    fs::path tmp = dir / (path.filename().string() + ".tmp" +
                           std::to_string(std::random_device{}()));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot open output file for writing: " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) {
            fs::remove(tmp);
            throw ConfigError("failed writing output file: " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw ConfigError("failed to move output into place: " + path.string() + " (" +
                          ec.message() + ")");
    }
}

inline nlohmann::json schedule_to_json(const ControlSchedule& sched) {
    nlohmann::json j;
    if (sched.instantaneous) {
        j["instantaneous"] = true;
        nlohmann::json rows = nlohmann::json::array();
        for (Eigen::Index r = 0; r < sched.unitary.rows(); ++r) {
            nlohmann::json row = nlohmann::json::array();
            for (Eigen::Index c = 0; c < sched.unitary.cols(); ++c)
                row.push_back({sched.unitary(r, c).real(), sched.unitary(r, c).imag()});
            rows.push_back(std::move(row));
        }
        j["unitary"] = std::move(rows);
        return j;
    }
    nlohmann::json segs = nlohmann::json::array();
    for (const auto& s : sched.segments) segs.push_back({{"u", s.u}, {"dt", s.dt}});
    j["segments"] = std::move(segs);
    return j;
}

inline ControlSchedule schedule_from_json(const nlohmann::json& j) {
    ControlSchedule sched;
    if (j.value("instantaneous", false)) {
        sched.instantaneous = true;
        const auto& rows = j.at("unitary");
        auto n = static_cast<Eigen::Index>(rows.size());
        sched.unitary = Mat::Zero(n, n);
        for (Eigen::Index r = 0; r < n; ++r) {
            const auto& row = rows.at(static_cast<std::size_t>(r));
            if (static_cast<Eigen::Index>(row.size()) != n)
                throw ConfigError("schedule unitary must be square");
            for (Eigen::Index c = 0; c < n; ++c) {
                const auto& cell = row.at(static_cast<std::size_t>(c));
                sched.unitary(r, c) = Complex(cell.at(0).get<double>(), cell.at(1).get<double>());
            }
        }
    } else {
        for (const auto& s : j.at("segments"))
            sched.segments.push_back({s.at("u").get<double>(), s.at("dt").get<double>()});
    }
    sched.validate();
    return sched;
}

}  // namespace qsmc
