#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "wrinkle/measure.hpp"
#include "wrinkle/relaxed.hpp"

namespace wrinkle::io {

struct GridSettings {
    std::size_t nr_relaxed = 2048;
    std::size_t nr_energy = 512;
    std::size_t nr_measure = 200;
    std::size_t nk = 64;
    std::size_t ntheta = 256;
};

// Named tolerances with the acceptance defaults pinned.
std::map<std::string, double> default_tolerances();

struct RunConfig {
    relaxed::LameConfig lame{1.8, 1.0, 1.0, 2.0};
    GridSettings grids;
    std::map<std::string, double> tolerances = default_tolerances();
    std::vector<double> schedule = {512.0, 1024.0, 2048.0, 4096.0};
    std::string output_dir = "out";
    std::uint64_t seed = 1;
    std::string measure_path;  // optional input for `recover`
};

RunConfig parse_config(const std::string& text);
std::string serialize_config(const RunConfig& cfg);
std::string config_hash_hex(const RunConfig& cfg);

struct ResultManifest {
    std::string command;
    std::string config_hash;
    std::string version;
    std::vector<std::string> files;
    std::map<std::string, double> timings_ms;
};

void write_manifest(const ResultManifest& man, const std::string& path);

// Measure persistence: CSV table (r, k, b, db_dr) plus a JSON header with
// the grids, the constraint residual and the energy split.
void save_measure(const measure::FrequencyMeasure& mu, const relaxed::RelaxedSolution& sol,
                  const std::string& csv_path, const std::string& json_path);
measure::FrequencyMeasure load_measure(const std::string& csv_path, const std::string& json_path);

// Dispatch one CLI command; returns the process exit status.
int run_command(const std::string& name, const RunConfig& cfg);

}  // namespace wrinkle::io
