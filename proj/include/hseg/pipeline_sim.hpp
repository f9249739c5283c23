#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hseg/error.hpp"

namespace hseg {

struct Processor {
    std::string name;
    double active_power_w = 1.0;
    double idle_power_w = 0.0;
};

struct Stage {
    std::string name;
    std::string processor;
    double compute_ms = 1.0; // per frame
};

enum class TransferMode { Shared, Copy };

// Hand-off between consecutive chain stages. Shared buffers cost nothing;
// Copy adds a fixed delay that occupies no processor.
struct TransferEdge {
    std::string from;
    std::string to;
    TransferMode mode = TransferMode::Shared;
    double copy_ms = 0.0;
};

// Blocking serializes the whole chain per frame (processors wait);
// FenceAsync lets stages overlap across frames, a stage starting as soon as
// its input fence signals and its processor is free. Neither mode reorders a
// single frame's stages.
enum class SyncMode { Blocking, FenceAsync };

struct PipelineConfig {
    std::string name;
    std::vector<Processor> processors;
    std::vector<Stage> stages; // chain order
    std::vector<TransferEdge> edges;
    SyncMode sync = SyncMode::Blocking;
    int n_frames = 1000;

    void validate() const; // chain topology, known processors, positive times
    double copy_ms_between(size_t stage_index) const; // stage i -> i+1
};

PipelineConfig parse_pipeline_config(const std::string& json_text);
std::string pipeline_config_json(const PipelineConfig& cfg);

// Scenario file: {"comment": ..., "configs": [...]} with the first config as
// the comparison baseline.
struct Scenario {
    std::string comment;
    std::vector<PipelineConfig> configs;
};
Scenario parse_scenario(const std::string& json_text);

struct SimReport {
    std::string name;
    int n_frames = 0;
    double e2e_latency_ms = 0.0;   // enqueue -> final stage done, steady mean
    double throughput_fps = 0.0;   // measured over the last n/2 frames
    double energy_per_frame_mj = 0.0;
    double makespan_ms = 0.0;
    std::map<std::string, double> busy_ms; // whole run, per processor
    std::map<std::string, double> idle_ms;
};

// Deterministic discrete-event simulation (microsecond integer ticks).
// Throughput comes from a saturated run; under FenceAsync, latency and the
// energy accounting come from a second run with frames enqueued at the
// pipeline's sustainable rate, so queueing ahead of the bottleneck does not
// inflate them.
SimReport simulate(const PipelineConfig& cfg, int n_frames_override = -1);

// Reports plus ratios against the first (baseline) config; needs >= 2.
std::vector<SimReport> compare(const std::vector<PipelineConfig>& cfgs, int n_frames_override = -1);
std::string compare_table(const std::vector<SimReport>& reports);
std::string compare_csv(const std::vector<SimReport>& reports);

// Re-simulate with one field varied. Parameters: "copy_ms" (all copy edges),
// "copy_ms:<from>:<to>", "stage_ms:<stage>", "sync_mode", "n_frames".
std::vector<SimReport> sweep(const PipelineConfig& cfg, const std::string& parameter,
                             const std::vector<std::string>& values);

} // namespace hseg
