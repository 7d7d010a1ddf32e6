#pragma once

#include <string>
#include <vector>

#include "ttpsim/config.hpp"
#include "ttpsim/metrics.hpp"

namespace ttpsim {

struct RunResult {
  RunStats stats;
  int width = 0;
  int height = 0;
  std::vector<HitRecord> hit_buffer;  // per pixel, sample 0 of the primary wave
  std::vector<StackEvent> trace;      // filled only when collect_trace was set
};

// One full deterministic experiment: scene, BVH, primary wave plus bounce
// waves, timed against the memory hierarchy. Conservation identities are
// checked before returning.
RunResult run_experiment(const SimConfig& cfg, bool collect_trace = false);

// Binary PPM with one color per primitive id; misses are black, hits never
// are. Byte-identical buffers give byte-identical files.
std::string ppm_bytes(const std::vector<HitRecord>& hits, int width, int height);
void write_ppm(const std::vector<HitRecord>& hits, int width, int height,
               const std::string& path);

// Text trace, one `cycle thread_id push|pop 0xADDR` line per stack event.
std::string trace_text(const std::vector<StackEvent>& trace);
void write_trace(const std::vector<StackEvent>& trace, const std::string& path);

}  // namespace ttpsim
