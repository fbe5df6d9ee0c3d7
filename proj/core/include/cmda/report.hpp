// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "cmda/modality.hpp"
#include "cmda/trainer.hpp"

namespace cmda {

/// Per-step CSV log: step, loss components, agreement rates, usage entropy.
class TrainLogWriter {
 public:
  TrainLogWriter(const std::string& path, Mode mode);
  void append(const StepStats& stats);
  const std::vector<StepStats>& history() const { return history_; }

 private:
  std::ofstream out_;
  Mode mode_;
  std::vector<StepStats> history_;
};

/// Metrics file: one JSON object per line.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path);
  void record(const std::string& task, const std::string& direction, const std::string& metric,
              double value);
  void record_fields(const std::map<std::string, std::string>& fields);

 private:
  std::ofstream out_;
};

/// Standalone SVG emission: line charts for curves, bar charts for
/// histograms. No external renderer needed.
namespace svg {
void write_curves(const std::string& path, const std::string& title,
                  const std::vector<std::string>& names,
                  const std::vector<std::vector<double>>& series);
void write_bars(const std::string& path, const std::string& title,
                const std::vector<std::string>& labels, const std::vector<double>& values);
}  // namespace svg

/// Reproducibility manifest for one run directory.
struct RunManifest {
  std::string command;
  std::string config_text;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> input_hashes;
  std::vector<std::string> outputs;
  double wall_seconds = 0.0;

  void write(const std::string& path) const;
};

std::string file_content_hash(const std::string& path);

}  // namespace cmda
