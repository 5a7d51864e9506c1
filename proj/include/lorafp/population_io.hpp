#pragma once

#include <cinttypes>
#include <cstdio>
#include <string>
#include <vector>

#include "lorafp/config_file.hpp"
#include "lorafp/impairments.hpp"

// Population files are plain key/value configs with one [device N] section per
// profile. The generate CLI writes them and every experiment re-reads them, so
// parameter values are serialized with full round-trip precision.

namespace lorafp {

namespace detail {

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string fmt_u64(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%" PRIu64, v);
    return buf;
}

}  // namespace detail

inline ConfigFile population_to_config(const std::vector<DeviceProfile>& devices) {
    ConfigFile cfg;
    for (const auto& d : devices) {
        ConfigSection s;
        s.name = "device " + std::to_string(d.device_id);
        s.set("phase_noise_magnitude", detail::fmt_double(d.phase_noise_magnitude));
        s.set("cfo_hz", detail::fmt_double(d.cfo_hz));
        s.set("iq_gain_imbalance_db", detail::fmt_double(d.iq_gain_imbalance_db));
        s.set("iq_phase_imbalance_rad", detail::fmt_double(d.iq_phase_imbalance_rad));
        s.set("dc_offset_re", detail::fmt_double(d.dc_offset.real()));
        s.set("dc_offset_im", detail::fmt_double(d.dc_offset.imag()));
        s.set("rng_seed", detail::fmt_u64(d.rng_seed));
        cfg.sections.push_back(std::move(s));
    }
    return cfg;
}

inline void write_population(const std::vector<DeviceProfile>& devices, const std::string& path) {
    population_to_config(devices).save(path);
}

inline std::vector<DeviceProfile> population_from_config(const ConfigFile& cfg) {
    std::vector<DeviceProfile> devices;
    for (const ConfigSection* s : cfg.with_prefix("device")) {
        DeviceProfile d;
        d.device_id = std::stoi(s->name.substr(7));
        d.phase_noise_magnitude = s->get_double("phase_noise_magnitude");
        d.cfo_hz = s->get_double("cfo_hz");
        d.iq_gain_imbalance_db = s->get_double("iq_gain_imbalance_db");
        d.iq_phase_imbalance_rad = s->get_double("iq_phase_imbalance_rad");
        d.dc_offset = {s->get_double("dc_offset_re"), s->get_double("dc_offset_im")};
        d.rng_seed = s->get_u64("rng_seed");
        devices.push_back(d);
    }
    return devices;
}

inline std::vector<DeviceProfile> read_population(const std::string& path) {
    return population_from_config(ConfigFile::load(path));
}

}  // namespace lorafp
