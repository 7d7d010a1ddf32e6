#include <cstdio>
#include <fstream>
#include <string>

#include "doctest.h"
#include "ttpsim/capi.h"

namespace {

struct ConfigHandle {
  ttp_config* cfg = ttp_config_create();
  ~ConfigHandle() { ttp_config_destroy(cfg); }
};

struct ResultHandle {
  ttp_result* res = nullptr;
  ~ResultHandle() { ttp_result_destroy(res); }
};

void set_small_scene(ttp_config* cfg) {
  REQUIRE(ttp_config_set(cfg, "image.width", "4") == TTP_OK);
  REQUIRE(ttp_config_set(cfg, "image.height", "4") == TTP_OK);
  REQUIRE(ttp_config_set(cfg, "scene", "synthetic:random-boxes:20") == TTP_OK);
  REQUIRE(ttp_config_set(cfg, "sm_count", "2") == TTP_OK);
}

std::string file_bytes(const char* path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("config handles create, set, clone and reject bad input") {
  ConfigHandle h;
  REQUIRE(h.cfg != nullptr);
  CHECK(ttp_config_set(h.cfg, "seed", "41") == TTP_OK);

  ttp_config* copy = ttp_config_clone(h.cfg);
  REQUIRE(copy != nullptr);
  CHECK(ttp_config_set(h.cfg, "seed", "99") == TTP_OK);

  CHECK(ttp_config_set(h.cfg, "no_such_key", "1") == TTP_ERR_CONFIG);
  CHECK(std::string(ttp_last_error()) == "unknown key 'no_such_key'");
  CHECK(ttp_config_set(h.cfg, "warp_size", "zero") == TTP_ERR_CONFIG);
  CHECK(std::string(ttp_last_error()).find("invalid value") != std::string::npos);
  CHECK(ttp_config_set(nullptr, "seed", "1") == TTP_ERR_INVALID_ARG);
  CHECK(ttp_config_set(h.cfg, nullptr, "1") == TTP_ERR_INVALID_ARG);

  // The clone kept the value it was copied with; run both to prove it.
  set_small_scene(h.cfg);
  set_small_scene(copy);
  ResultHandle a, b;
  REQUIRE(ttp_run(h.cfg, 0, &a.res) == TTP_OK);
  REQUIRE(ttp_run(copy, 0, &b.res) == TTP_OK);
  double seed_a_visits = 0, seed_b_visits = 0;
  REQUIRE(ttp_result_metric(a.res, nullptr, "node_visits", &seed_a_visits) == TTP_OK);
  REQUIRE(ttp_result_metric(b.res, nullptr, "node_visits", &seed_b_visits) == TTP_OK);
  CHECK(seed_a_visits > 0);
  CHECK(seed_b_visits > 0);
  ttp_config_destroy(copy);
}

TEST_CASE("loading a file replaces earlier overrides") {
  const char* path = "capi_cfg.ini";
  {
    std::ofstream out(path);
    out << "image.width = 4\nimage.height = 4\n";
  }
  ConfigHandle h;
  CHECK(ttp_config_set(h.cfg, "image.width", "128") == TTP_OK);
  REQUIRE(ttp_config_load_file(h.cfg, path) == TTP_OK);
  std::remove(path);

  // Width came back to the file's 4, and untouched keys are defaults again.
  REQUIRE(ttp_config_set(h.cfg, "scene", "synthetic:random-boxes:20") == TTP_OK);
  ResultHandle r;
  REQUIRE(ttp_run(h.cfg, 0, &r.res) == TTP_OK);
  double rays = 0;
  REQUIRE(ttp_result_metric(r.res, nullptr, "rays", &rays) == TTP_OK);
  CHECK(rays >= 16);
  CHECK(rays < 128 * 128);

  CHECK(ttp_config_load_file(h.cfg, "missing.ini") == TTP_ERR_IO);
  CHECK(std::string(ttp_last_error()).find("cannot open config file") != std::string::npos);
}

TEST_CASE("running yields metrics, csv and honest errors") {
  ConfigHandle base_cfg;
  set_small_scene(base_cfg.cfg);
  ResultHandle base;
  REQUIRE(ttp_run(base_cfg.cfg, 0, &base.res) == TTP_OK);
  CHECK(std::string(ttp_result_policy(base.res)) == "off");
  CHECK(ttp_result_cycles(base.res) > 0);

  ConfigHandle ttp_cfg;
  set_small_scene(ttp_cfg.cfg);
  REQUIRE(ttp_config_set(ttp_cfg.cfg, "policy", "ttp-dfs") == TTP_OK);
  ResultHandle run;
  REQUIRE(ttp_run(ttp_cfg.cfg, 0, &run.res) == TTP_OK);
  CHECK(std::string(ttp_result_policy(run.res)) == "ttp-dfs");

  double v = 0;
  CHECK(ttp_result_metric(run.res, nullptr, "cycles", &v) == TTP_OK);
  CHECK(v == static_cast<double>(ttp_result_cycles(run.res)));
  CHECK(ttp_result_metric(run.res, nullptr, "l1_mpki", &v) == TTP_OK);
  CHECK(v >= 0.0);
  CHECK(ttp_result_metric(run.res, nullptr, "dram_reads", &v) == TTP_OK);
  CHECK(v > 0.0);

  SUBCASE("comparative metrics demand a baseline") {
    CHECK(ttp_result_metric(run.res, nullptr, "speedup", &v) == TTP_ERR_INVALID_ARG);
    CHECK(std::string(ttp_last_error()) == "speedup requires a baseline result");
    CHECK(ttp_result_metric(run.res, base.res, "speedup", &v) == TTP_OK);
    CHECK(v > 0.0);
    CHECK(ttp_result_metric(run.res, nullptr, "l1_coverage", &v) == TTP_ERR_INVALID_ARG);
    CHECK(ttp_result_metric(run.res, base.res, "l1_coverage", &v) == TTP_OK);
  }
  SUBCASE("metrics undefined for a run say so") {
    // The baseline never prefetches, so accuracy has no denominator.
    CHECK(ttp_result_metric(base.res, nullptr, "l1_accuracy", &v) == TTP_ERR_RUNTIME);
    CHECK(std::string(ttp_last_error()).find("undefined") != std::string::npos);
  }
  SUBCASE("unknown names are rejected") {
    CHECK(ttp_result_metric(run.res, nullptr, "l3_accuracy", &v) == TTP_ERR_INVALID_ARG);
    CHECK(std::string(ttp_last_error()) == "unknown metric 'l3_accuracy'");
    CHECK(ttp_result_metric(nullptr, nullptr, "cycles", &v) == TTP_ERR_INVALID_ARG);
  }
  SUBCASE("csv output matches the header shape") {
    std::string header = ttp_csv_header();
    CHECK(header.compare(0, 7, "run_id,") == 0);
    char* row = ttp_result_csv_row(run.res, base.res, "ttp");
    REQUIRE(row != nullptr);
    std::string row_s = row;
    ttp_string_free(row);
    auto commas = [](const std::string& s) {
      std::size_t n = 0;
      for (char c : s)
        if (c == ',') ++n;
      return n;
    };
    CHECK(commas(row_s) == commas(header));
    CHECK(row_s.compare(0, 4, "ttp,") == 0);
    CHECK(ttp_result_csv_row(nullptr, nullptr, "x") == nullptr);
  }
}

TEST_CASE("image and trace files land on disk") {
  ConfigHandle h;
  set_small_scene(h.cfg);
  ResultHandle without_trace, with_trace;
  REQUIRE(ttp_run(h.cfg, 0, &without_trace.res) == TTP_OK);
  REQUIRE(ttp_run(h.cfg, 1, &with_trace.res) == TTP_OK);

  const char* img = "capi_out.ppm";
  REQUIRE(ttp_result_write_image(with_trace.res, img) == TTP_OK);
  std::string bytes = file_bytes(img);
  std::remove(img);
  CHECK(bytes.compare(0, 9, "P6\n4 4\n25") == 0);
  CHECK(bytes.size() == std::string("P6\n4 4\n255\n").size() + 3u * 16u);

  const char* trace = "capi_out.trace";
  CHECK(ttp_result_write_trace(without_trace.res, trace) == TTP_ERR_RUNTIME);
  CHECK(std::string(ttp_last_error()).find("trace") != std::string::npos);
  REQUIRE(ttp_result_write_trace(with_trace.res, trace) == TTP_OK);
  std::string text = file_bytes(trace);
  std::remove(trace);
  CHECK(text.find(" 0x") != std::string::npos);
  CHECK((text.find(" push ") != std::string::npos || text.find(" pop ") != std::string::npos));

  CHECK(ttp_result_write_image(with_trace.res, "/no/such/dir/x.ppm") == TTP_ERR_IO);
  CHECK(ttp_result_write_image(nullptr, img) == TTP_ERR_INVALID_ARG);
}

TEST_CASE("invalid configurations fail at run time with a message") {
  ConfigHandle h;
  REQUIRE(ttp_config_set(h.cfg, "policy", "ttp-bfs") == TTP_OK);
  // traversal_order is still dfs; the cross-field check fires inside run.
  ResultHandle r;
  CHECK(ttp_run(h.cfg, 0, &r.res) == TTP_ERR_CONFIG);
  CHECK(r.res == nullptr);
  CHECK(std::string(ttp_last_error()).find("requires traversal_order") != std::string::npos);
  CHECK(ttp_run(nullptr, 0, &r.res) == TTP_ERR_INVALID_ARG);
}
