#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "lorafp/channel.hpp"
#include "lorafp/signal.hpp"

// SigMF-style recording pairs: <name>.sigmf-data holds interleaved
// little-endian float32 I,Q; <name>.sigmf-meta holds JSON metadata. Scenario
// fields live under the "lorafp:" annotation namespace since core SigMF has
// no day/location/config vocabulary. The reader tolerates and preserves
// unknown fields so externally produced metadata survives a round trip.

namespace lorafp {

inline constexpr const char* kSigmfDatatype = "cf32_le";

enum class SigmfErrorCode {
    missing_data_file,
    missing_meta_file,
    truncated_data,
    unknown_datatype,
    invalid_samples,
    bad_metadata,
    io_failure,
};

class SigmfError : public std::runtime_error {
public:
    SigmfError(SigmfErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    SigmfErrorCode code() const { return code_; }

private:
    SigmfErrorCode code_;
};

struct RecordingMeta {
    double sample_rate_hz = 1e6;
    double carrier_hz = 915e6;
    std::string datatype = kSigmfDatatype;
    std::string datetime;  // synthetic, derived from scenario seeds, not wall clock
    int device_id = 0;
    int day = 1;
    Location location = Location::room;
    int config_id = 1;
    int receiver_id = 1;
    int transmission_index = 0;
    std::string scenario_id;
    std::string description;
    nlohmann::json raw;  // full document as stored; unknown keys preserved

    nlohmann::json to_json(std::uint64_t sample_count) const {
        nlohmann::json j = raw.is_object() ? raw : nlohmann::json::object();
        j["global"]["core:datatype"] = datatype;
        j["global"]["core:sample_rate"] = sample_rate_hz;
        j["global"]["core:version"] = "1.0.0";
        if (!description.empty()) j["global"]["core:description"] = description;
        nlohmann::json capture = nlohmann::json::object();
        if (j.contains("captures") && j["captures"].is_array() && !j["captures"].empty())
            capture = j["captures"][0];
        capture["core:sample_start"] = 0;
        capture["core:frequency"] = carrier_hz;
        if (!datetime.empty()) capture["core:datetime"] = datetime;
        j["captures"] = nlohmann::json::array({capture});
        nlohmann::json ann = nlohmann::json::object();
        if (j.contains("annotations") && j["annotations"].is_array() && !j["annotations"].empty())
            ann = j["annotations"][0];
        ann["core:sample_start"] = 0;
        ann["core:sample_count"] = sample_count;
        ann["lorafp:device_id"] = device_id;
        ann["lorafp:day"] = day;
        ann["lorafp:location"] = to_string(location);
        ann["lorafp:config_id"] = config_id;
        ann["lorafp:receiver_id"] = receiver_id;
        ann["lorafp:transmission_index"] = transmission_index;
        ann["lorafp:scenario_id"] = scenario_id;
        j["annotations"] = nlohmann::json::array({ann});
        return j;
    }

    static RecordingMeta from_json(const nlohmann::json& j) {
        RecordingMeta m;
        m.raw = j;
        try {
            const auto& g = j.at("global");
            m.datatype = g.at("core:datatype").get<std::string>();
            m.sample_rate_hz = g.at("core:sample_rate").get<double>();
            if (g.contains("core:description"))
                m.description = g["core:description"].get<std::string>();
            if (j.contains("captures") && !j["captures"].empty()) {
                const auto& c = j["captures"][0];
                if (c.contains("core:frequency")) m.carrier_hz = c["core:frequency"].get<double>();
                if (c.contains("core:datetime")) m.datetime = c["core:datetime"].get<std::string>();
            }
            if (j.contains("annotations") && !j["annotations"].empty()) {
                const auto& a = j["annotations"][0];
                if (a.contains("lorafp:device_id")) m.device_id = a["lorafp:device_id"].get<int>();
                if (a.contains("lorafp:day")) m.day = a["lorafp:day"].get<int>();
                if (a.contains("lorafp:location"))
                    m.location = location_from_string(a["lorafp:location"].get<std::string>());
                if (a.contains("lorafp:config_id")) m.config_id = a["lorafp:config_id"].get<int>();
                if (a.contains("lorafp:receiver_id"))
                    m.receiver_id = a["lorafp:receiver_id"].get<int>();
                if (a.contains("lorafp:transmission_index"))
                    m.transmission_index = a["lorafp:transmission_index"].get<int>();
                if (a.contains("lorafp:scenario_id"))
                    m.scenario_id = a["lorafp:scenario_id"].get<std::string>();
            }
        } catch (const nlohmann::json::exception& e) {
            throw SigmfError(SigmfErrorCode::bad_metadata,
                             std::string("sigmf: malformed metadata: ") + e.what());
        }
        return m;
    }
};

// path_base is the recording name without extension; the pair of files gets
// the .sigmf-data / .sigmf-meta suffixes.
inline void write_recording(const ComplexSampleBuffer& buf, const RecordingMeta& meta,
                            const std::string& path_base) {
    require_nonempty(buf, "write_recording");
    for (const auto& s : buf.samples)
        if (!std::isfinite(s.real()) || !std::isfinite(s.imag()))
            throw SigmfError(SigmfErrorCode::invalid_samples,
                             "write_recording: NaN/Inf sample rejected");

    std::vector<float> interleaved(buf.samples.size() * 2);
    for (std::size_t i = 0; i < buf.samples.size(); ++i) {
        interleaved[2 * i] = static_cast<float>(buf.samples[i].real());
        interleaved[2 * i + 1] = static_cast<float>(buf.samples[i].imag());
    }
    {
        std::ofstream data(path_base + ".sigmf-data", std::ios::binary | std::ios::trunc);
        if (!data)
            throw SigmfError(SigmfErrorCode::io_failure,
                             "write_recording: cannot open " + path_base + ".sigmf-data");
        data.write(reinterpret_cast<const char*>(interleaved.data()),
                   static_cast<std::streamsize>(interleaved.size() * sizeof(float)));
        if (!data)
            throw SigmfError(SigmfErrorCode::io_failure,
                             "write_recording: short write to " + path_base + ".sigmf-data");
    }
    {
        std::ofstream metaf(path_base + ".sigmf-meta", std::ios::trunc);
        if (!metaf)
            throw SigmfError(SigmfErrorCode::io_failure,
                             "write_recording: cannot open " + path_base + ".sigmf-meta");
        metaf << meta.to_json(buf.samples.size()).dump(2) << "\n";
    }
}

inline std::pair<ComplexSampleBuffer, RecordingMeta> read_recording(const std::string& path_base) {
    namespace fs = std::filesystem;
    const std::string data_path = path_base + ".sigmf-data";
    const std::string meta_path = path_base + ".sigmf-meta";
    if (!fs::exists(data_path))
        throw SigmfError(SigmfErrorCode::missing_data_file, "sigmf: missing " + data_path);
    if (!fs::exists(meta_path))
        throw SigmfError(SigmfErrorCode::missing_meta_file, "sigmf: missing " + meta_path);

    nlohmann::json j;
    try {
        std::ifstream metaf(meta_path);
        metaf >> j;
    } catch (const nlohmann::json::exception& e) {
        throw SigmfError(SigmfErrorCode::bad_metadata,
                         std::string("sigmf: cannot parse ") + meta_path + ": " + e.what());
    }
    RecordingMeta meta = RecordingMeta::from_json(j);
    if (meta.datatype != kSigmfDatatype)
        throw SigmfError(SigmfErrorCode::unknown_datatype,
                         "sigmf: unsupported datatype " + meta.datatype);

    const auto bytes = fs::file_size(data_path);
    if (bytes % (2 * sizeof(float)) != 0)
        throw SigmfError(SigmfErrorCode::truncated_data,
                         "sigmf: data size not divisible by 8: " + data_path);
    const std::size_t n = bytes / (2 * sizeof(float));

    std::vector<float> interleaved(n * 2);
    std::ifstream data(data_path, std::ios::binary);
    data.read(reinterpret_cast<char*>(interleaved.data()), static_cast<std::streamsize>(bytes));
    if (!data)
        throw SigmfError(SigmfErrorCode::io_failure, "sigmf: short read from " + data_path);

    ComplexSampleBuffer buf;
    buf.sample_rate_hz = meta.sample_rate_hz;
    buf.carrier_hz = meta.carrier_hz;
    buf.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        buf.samples[i] = cplx{interleaved[2 * i], interleaved[2 * i + 1]};
    return {std::move(buf), std::move(meta)};
}

struct DatasetIndex {
    struct Entry {
        std::string path_base;
        RecordingMeta meta;
    };
    std::vector<Entry> entries;                      // sorted by path
    std::map<std::string, std::vector<int>> by_scenario;  // scenario_id -> entry indices
    std::vector<std::string> coverage_warnings;

    std::vector<int> device_ids() const {
        std::vector<int> ids;
        for (const auto& e : entries)
            if (std::find(ids.begin(), ids.end(), e.meta.device_id) == ids.end())
                ids.push_back(e.meta.device_id);
        std::sort(ids.begin(), ids.end());
        return ids;
    }
};

// Scans a directory tree for recording pairs, groups them by scenario and
// checks that every device appears in every scenario. Missing coverage is
// reported, not fatal.
inline DatasetIndex build_dataset_index(
    const std::string& root_dir,
    const std::function<bool(const RecordingMeta&)>& filter = nullptr) {
    namespace fs = std::filesystem;
    DatasetIndex index;
    if (!fs::exists(root_dir))
        throw SigmfError(SigmfErrorCode::io_failure, "build_dataset_index: no such dir " + root_dir);

    std::vector<std::string> meta_paths;
    for (const auto& entry : fs::recursive_directory_iterator(root_dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string p = entry.path().string();
        if (p.ends_with(".sigmf-meta")) meta_paths.push_back(p.substr(0, p.size() - 11));
    }
    std::sort(meta_paths.begin(), meta_paths.end());

    for (const auto& base : meta_paths) {
        if (!fs::exists(base + ".sigmf-data")) {
            index.coverage_warnings.push_back("missing data file for " + base);
            continue;
        }
        nlohmann::json j;
        std::ifstream metaf(base + ".sigmf-meta");
        try {
            metaf >> j;
        } catch (const nlohmann::json::exception&) {
            index.coverage_warnings.push_back("unparseable metadata for " + base);
            continue;
        }
        RecordingMeta meta = RecordingMeta::from_json(j);
        if (filter && !filter(meta)) continue;
        index.by_scenario[meta.scenario_id].push_back(static_cast<int>(index.entries.size()));
        index.entries.push_back({base, std::move(meta)});
    }

    const std::vector<int> all_devices = index.device_ids();
    for (const auto& [scenario, idxs] : index.by_scenario) {
        std::vector<int> present;
        for (int i : idxs) present.push_back(index.entries[static_cast<std::size_t>(i)].meta.device_id);
        for (int d : all_devices)
            if (std::find(present.begin(), present.end(), d) == present.end())
                index.coverage_warnings.push_back("scenario " + scenario + " missing device " +
                                                  std::to_string(d));
    }
    return index;
}

}  // namespace lorafp
