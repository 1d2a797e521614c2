#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "otasim/config.hpp"
#include "otasim/csvio.hpp"
#include "otasim/svgplot.hpp"

using namespace otasim;
using namespace otasim::config;

TEST_CASE("empty config yields the documented defaults") {
  ExperimentConfig cfg = parse_config_text("{}");
  CHECK(cfg.seed == 1);
  CHECK(cfg.dataset.kind == "mnist");
  CHECK(cfg.device.g_max == 25.0);
  CHECK(cfg.device.t_c == 20.0);
  CHECK(cfg.device.t_read == 250e-9);
  CHECK(cfg.energy.spec.g_max_us == 50.0);
  CHECK(cfg.energy.cells_per_sensor == 260);
  CHECK(cfg.channel.snr_db == 10.0);
  CHECK(cfg.train.learning_rate == 0.001);
  // The resolved echo reflects every default.
  const std::string echo = cfg.canonical_json();
  CHECK(echo.find("\"g_max_us\": 25.0") != std::string::npos);
  CHECK(echo.find("\"learning_rate\": 0.001") != std::string::npos);
}

TEST_CASE("unknown keys are rejected with their full path") {
  try {
    parse_config_text(R"({"device": {"g_maxx": 50}})");
    FAIL("expected config error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("device.g_maxx") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config_text(R"({"unknown_top": 1})"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"device": {"g_max_us": "wide"}})"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"fusion": {"p": -2.0}})"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"fusion": {"mode": "average", "p_trainable": true}})"),
                  ConfigError);
  CHECK_THROWS_AS(parse_config_text("not json"), ConfigError);
}

TEST_CASE("overrides beat file values and are echoed") {
  Overrides ov;
  ov.seed = 99;
  ov.dataset_root = "/elsewhere";
  ExperimentConfig cfg = parse_config_text(R"({"seed": 5, "dataset": {"root": "/file"}})", ov);
  CHECK(cfg.seed == 99);
  CHECK(cfg.dataset.root == "/elsewhere");
  CHECK(cfg.canonical_json().find("/elsewhere") != std::string::npos);
  CHECK(cfg.canonical_json().find("\"seed\": 99") != std::string::npos);
}

TEST_CASE("csv emission: header, count, determinism, empty refusal") {
  std::vector<pipeline::SweepRow> rows;
  for (int cell = 0; cell < 6; ++cell) {
    for (int trial = 0; trial < 25; ++trial) {
      pipeline::SweepRow r;
      r.experiment_id = "snr_matrix";
      r.sensors = 3;
      r.train_snr_db = static_cast<double>(cell / 2);
      r.test_snr_db = static_cast<double>(cell % 2);
      r.drift_time_s = 1.0;
      r.trial_id = trial;
      r.accuracy = 0.5 + 0.001 * trial;
      r.p_final = 0.97;
      r.sigma_n2 = 0.123456789;
      rows.push_back(r);
    }
  }
  const std::string text = csvio::to_csv(rows);
  CHECK(text.substr(0, std::string(csvio::kHeader).size()) == csvio::kHeader);
  size_t lines = 0;
  for (char c : text) {
    if (c == '\n') ++lines;
  }
  CHECK(lines == 151);  // header + 150 rows, newline-terminated
  CHECK(text.back() == '\n');
  CHECK(csvio::to_csv(rows) == text);

  pipeline::SweepRow single = rows[0];
  const std::string one = csvio::to_csv({single});
  size_t one_lines = 0;
  for (char c : one) {
    if (c == '\n') ++one_lines;
  }
  CHECK(one_lines == 2);

  CHECK_THROWS_AS(csvio::to_csv({}), std::invalid_argument);

  const std::string path = "otasim_test_rows.csv";
  csvio::emit_csv(rows, path);
  std::vector<pipeline::SweepRow> back = csvio::parse_csv(path);
  REQUIRE(back.size() == rows.size());
  CHECK(back[7].accuracy == rows[7].accuracy);
  CHECK(back[7].experiment_id == rows[7].experiment_id);
  CHECK_FALSE(back[7].energy_total_j.has_value());
  std::remove(path.c_str());
}

TEST_CASE("csv parse errors carry line numbers") {
  const std::string path = "otasim_test_bad.csv";
  {
    std::ofstream os(path);
    os << csvio::kHeader << "\n";
    os << "drift,1,10,10,1,0,0.9,1.0,0.1,\n";
    os << "drift,1,10,10,1,oops,0.9,1.0,0.1,\n";
  }
  try {
    csvio::parse_csv(path);
    FAIL("expected parse error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  std::remove(path.c_str());
}

TEST_CASE("svg plots: determinism, drift series, error handling") {
  std::vector<pipeline::SweepRow> rows;
  const double times[] = {1.0, 3600.0, 86400.0, 2592000.0, 31536000.0};
  for (double t : times) {
    for (int trial = 0; trial < 5; ++trial) {
      pipeline::SweepRow r;
      r.experiment_id = "drift";
      r.sensors = 5;
      r.train_snr_db = 10.0;
      r.test_snr_db = 10.0;
      r.drift_time_s = t;
      r.trial_id = trial;
      r.accuracy = 0.9 - 0.02 * (t > 1.0) - 0.001 * trial;
      r.p_final = 1.0;
      r.sigma_n2 = 0.1;
      rows.push_back(r);
    }
  }
  const std::string svg1 = svg::render_plot(rows, svg::PlotKind::drift);
  const std::string svg2 = svg::render_plot(rows, svg::PlotKind::drift);
  CHECK(svg1 == svg2);
  CHECK(svg1.find("<svg") != std::string::npos);
  CHECK(svg1.find("drift time") != std::string::npos);
  // 5 drift cells produce 5 markers.
  size_t markers = 0, pos = 0;
  while ((pos = svg1.find("<circle", pos)) != std::string::npos) {
    ++markers;
    pos += 7;
  }
  CHECK(markers == 5);
  // Error bars present (std > 0 per cell).
  CHECK(svg1.find("stroke-width=\"1\"") != std::string::npos);

  CHECK_THROWS_AS(svg::render_plot({}, svg::PlotKind::drift), std::runtime_error);
}
