// SPDX-License-Identifier: Apache-2.0
#include "cmda/report.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "cmda/hash.hpp"

namespace cmda {

namespace {

std::string pair_name(const std::array<ModalityId, 2>& pair) {
  return std::string(1, modality_name(pair[0])[0]) + std::string(1, modality_name(pair[1])[0]);
}

}  // namespace

TrainLogWriter::TrainLogWriter(const std::string& path, Mode mode) : out_(path), mode_(mode) {
  if (!out_) throw std::runtime_error("TrainLogWriter: cannot open " + path);
  const auto mods = modalities(mode);
  const auto pairs = modality_pairs(mode);
  out_ << "step,total";
  for (auto m : mods) out_ << ",rec_" << modality_name(m)[0];
  for (auto m : mods) out_ << ",commit_" << modality_name(m)[0];
  for (const auto& p : pairs) out_ << ",cpc_" << pair_name(p);
  for (const auto& p : pairs) out_ << ",cmcm_" << pair_name(p);
  for (const auto& p : pairs) out_ << ",agree_" << pair_name(p);
  out_ << ",agree_all";
  for (auto m : mods) out_ << ",entropy_" << modality_name(m)[0];
  out_ << '\n';
}

void TrainLogWriter::append(const StepStats& stats) {
  out_ << stats.step << ',' << stats.bundle.total;
  for (double v : stats.bundle.reconstruction) out_ << ',' << v;
  for (double v : stats.bundle.commitment) out_ << ',' << v;
  for (double v : stats.bundle.cpc) out_ << ',' << v;
  for (double v : stats.bundle.cmcm) out_ << ',' << v;
  for (double v : stats.agreement_pairwise) out_ << ',' << v;
  out_ << ',' << stats.agreement_overall;
  for (double v : stats.usage_entropy) out_ << ',' << v;
  out_ << '\n';
  out_.flush();
  history_.push_back(stats);
}

MetricsWriter::MetricsWriter(const std::string& path) : out_(path) {
  if (!out_) throw std::runtime_error("MetricsWriter: cannot open " + path);
}

void MetricsWriter::record(const std::string& task, const std::string& direction,
                           const std::string& metric, double value) {
  nlohmann::json line{{"task", task}, {"direction", direction}, {"metric", metric},
                      {"value", value}};
  out_ << line.dump() << '\n';
  out_.flush();
}

void MetricsWriter::record_fields(const std::map<std::string, std::string>& fields) {
  nlohmann::json line;
  for (const auto& [k, v] : fields) line[k] = v;
  out_ << line.dump() << '\n';
  out_.flush();
}

namespace svg {

namespace {
constexpr int kWidth = 720, kHeight = 420, kMargin = 50;
const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

void header(std::ostream& out, const std::string& title) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      << "font-size=\"16\">" << title << "</text>\n";
}

}  // namespace

void write_curves(const std::string& path, const std::string& title,
                  const std::vector<std::string>& names,
                  const std::vector<std::vector<double>>& series) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("svg::write_curves: cannot open " + path);
  header(out, title);

  double lo = 0.0, hi = 1e-12;
  std::size_t longest = 1;
  for (const auto& s : series)
    for (double v : s) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  for (const auto& s : series) longest = std::max(longest, s.size());
  if (hi <= lo) hi = lo + 1.0;

  const double plot_w = kWidth - 2 * kMargin, plot_h = kHeight - 2 * kMargin;
  auto sx = [&](std::size_t i, std::size_t n) {
    return kMargin + plot_w * (n <= 1 ? 0.0 : static_cast<double>(i) / (n - 1));
  };
  auto sy = [&](double v) { return kHeight - kMargin - plot_h * (v - lo) / (hi - lo); };

  out << "<line x1=\"" << kMargin << "\" y1=\"" << kHeight - kMargin << "\" x2=\""
      << kWidth - kMargin << "\" y2=\"" << kHeight - kMargin << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << kMargin << "\" y1=\"" << kMargin << "\" x2=\"" << kMargin << "\" y2=\""
      << kHeight - kMargin << "\" stroke=\"black\"/>\n";
  out << "<text x=\"8\" y=\"" << sy(hi) + 5 << "\" font-family=\"sans-serif\" font-size=\"11\">"
      << std::setprecision(4) << hi << "</text>\n";
  out << "<text x=\"8\" y=\"" << sy(lo) + 5 << "\" font-family=\"sans-serif\" font-size=\"11\">"
      << std::setprecision(4) << lo << "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    if (series[s].empty()) continue;
    out << "<polyline fill=\"none\" stroke=\"" << kColors[s % 6] << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < series[s].size(); ++i)
      out << sx(i, series[s].size()) << ',' << sy(series[s][i]) << ' ';
    out << "\"/>\n";
    out << "<text x=\"" << kWidth - kMargin + 4 << "\" y=\"" << kMargin + 16 * s + 12
        << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" << kColors[s % 6] << "\">"
        << (s < names.size() ? names[s] : "series") << "</text>\n";
  }
  out << "</svg>\n";
}

void write_bars(const std::string& path, const std::string& title,
                const std::vector<std::string>& labels, const std::vector<double>& values) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("svg::write_bars: cannot open " + path);
  header(out, title);
  double hi = 1e-12;
  for (double v : values) hi = std::max(hi, v);
  const double plot_w = kWidth - 2 * kMargin, plot_h = kHeight - 2 * kMargin;
  const double bar_w = plot_w / std::max<std::size_t>(values.size(), 1);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double h = plot_h * values[i] / hi;
    out << "<rect x=\"" << kMargin + bar_w * i + 1 << "\" y=\"" << kHeight - kMargin - h
        << "\" width=\"" << std::max(bar_w - 2, 1.0) << "\" height=\"" << h
        << "\" fill=\"#1f77b4\"/>\n";
    if (i < labels.size() && !labels[i].empty())
      out << "<text x=\"" << kMargin + bar_w * i + bar_w / 2 << "\" y=\"" << kHeight - kMargin + 14
          << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << labels[i]
          << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace svg

void RunManifest::write(const std::string& path) const {
  nlohmann::json j;
  j["command"] = command;
  j["seed"] = seed;
  j["config"] = config_text;
  j["input_hashes"] = input_hashes;
  j["outputs"] = outputs;
  j["wall_seconds"] = wall_seconds;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("RunManifest::write: cannot open " + path);
  out << j.dump(2) << '\n';
}

std::string file_content_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("file_content_hash: cannot open " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[8192];
  while (in) {
    in.read(buf, sizeof(buf));
    const auto got = static_cast<std::size_t>(in.gcount());
    h = fnv1a64({reinterpret_cast<const unsigned char*>(buf), got}, h);
  }
  return hash_hex(h);
}

}  // namespace cmda
