// SPDX-License-Identifier: Apache-2.0
#include "cmda/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "cmda/hash.hpp"

namespace cmda {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::string strip_quotes(const std::string& s) {
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\'')))
    return s.substr(1, s.size() - 2);
  return s;
}

Rational parse_rational_text(const std::string& text) {
  const auto slash = text.find('/');
  if (slash == std::string::npos) return rational_from_decimal(text);
  const auto num = std::stoll(text.substr(0, slash));
  const auto den = std::stoll(text.substr(slash + 1));
  return Rational(num, den);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse_string(const std::string& text) {
  KeyValueConfig kv;
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("line " + std::to_string(line_no) + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = strip_quotes(trim(line.substr(eq + 1)));
    if (key.empty() || value.empty())
      throw ConfigError("line " + std::to_string(line_no) + ": empty key or value");
    if (!section.empty()) key = section + "." + key;
    kv.values_[key] = value;
  }
  return kv;
}

KeyValueConfig KeyValueConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config file not readable: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str());
}

std::string KeyValueConfig::raw(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing config key: " + key);
  return it->second;
}

std::int64_t KeyValueConfig::get_int(const std::string& key, std::int64_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t used = 0;
    const auto v = std::stoll(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key + " must be an integer, got '" + it->second + "'");
  }
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key + " must be a number, got '" + it->second + "'");
  }
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw ConfigError(key + " must be true or false, got '" + it->second + "'");
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

Rational KeyValueConfig::get_rational(const std::string& key, const Rational& fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    return parse_rational_text(it->second);
  } catch (const std::exception&) {
    throw ConfigError(key + " must be a decimal or num/den literal, got '" + it->second + "'");
  }
}

void TrainConfig::validate() const {
  if (batch < 2) throw ConfigError("batch must be at least 2 (in-batch contrastive terms)");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(beta > 0.0)) throw ConfigError("beta must be positive");
  if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("rho must lie in (0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  if (!(cmcm_floor > 0.0)) throw ConfigError("cmcm_floor must be positive");
  if (reset_threshold < 1) throw ConfigError("reset_threshold must be at least 1");
  if (codebook_size < 2) throw ConfigError("codebook_size must be at least 2");
  if (embed_dim < 1) throw ConfigError("embed_dim must be at least 1");
  if (horizon < 1) throw ConfigError("horizon must be at least 1");
  if (lambda_self.num < 0 || lambda_cross.num < 0)
    throw ConfigError("mixing weights must be nonnegative");

  // Convexity, exact: lambda_self + (#other modalities) * lambda_cross == 1.
  const std::int64_t others = static_cast<std::int64_t>(modality_count(mode)) - 1;
  const Rational total = lambda_self + Rational(others) * lambda_cross;
  if (!(total == Rational(1)))
    throw ConfigError("lambda convexity: lambda_self + " + std::to_string(others) +
                      " * lambda_cross must equal 1 exactly, got " + total.to_string());

  try {
    cascade_order.validate(mode);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("cascade_order: ") + e.what());
  }
}

std::uint64_t TrainConfig::content_hash() const {
  const std::string text = train_config_to_text(*this);
  return fnv1a64({reinterpret_cast<const unsigned char*>(text.data()), text.size()});
}

void HeadConfig::validate() const {
  if (hidden < 1) throw ConfigError("head.hidden must be at least 1");
  if (!(learning_rate > 0.0)) throw ConfigError("head.learning_rate must be positive");
  if (batch < 1) throw ConfigError("head.batch must be at least 1");
}

void SplitConfig::validate() const {
  if (train < 0 || validation < 0 || test < 0)
    throw ConfigError("split fractions must be nonnegative");
  if (std::abs(train + validation + test - 1.0) > 1e-9)
    throw ConfigError("split fractions must sum to 1");
}

namespace {

const std::set<std::string> kTrainKeys = {
    "epochs",        "batch",      "learning_rate", "beta",        "rho",
    "epsilon",       "lambda_self", "lambda_cross", "tau",         "cmcm_floor",
    "reset_threshold", "codebook_size", "embed_dim", "hidden_dim", "horizon",
    "cascade_order", "cpc",        "dta",           "csa",         "dqa",
    "mode",          "seed"};

const std::set<std::string> kDataKeys = {
    "samples",   "timesteps", "classes",   "persistence", "nuisance_step", "seed",
    "audio_dim", "video_dim", "text_dim",  "audio_nuisance", "video_nuisance",
    "text_nuisance", "audio_noise", "video_noise", "text_noise", "mode",
    "instance_dims", "instance_scale", "class_scale"};

const std::set<std::string> kHeadKeys = {"hidden", "epochs", "learning_rate",
                                         "batch",  "input",  "seed"};

const std::set<std::string> kSplitKeys = {"train", "validation", "test", "seed"};

void reject_unknown(const KeyValueConfig& kv, const std::string& section,
                    const std::set<std::string>& known) {
  for (const auto& [key, value] : kv.entries()) {
    const auto dot = key.find('.');
    if (dot == std::string::npos) continue;
    if (key.substr(0, dot) != section) continue;
    if (!known.count(key.substr(dot + 1)))
      throw ConfigError("unknown config key: " + key);
  }
}

Mode parse_mode(const std::string& text) {
  if (text == "trimodal") return Mode::kTrimodal;
  if (text == "bimodal") return Mode::kBimodal;
  throw ConfigError("mode must be 'bimodal' or 'trimodal', got '" + text + "'");
}

}  // namespace

TrainConfig train_config_from(const KeyValueConfig& kv) {
  reject_unknown(kv, "train", kTrainKeys);
  TrainConfig c;
  c.mode = parse_mode(kv.get_string("train.mode", "trimodal"));
  c.epochs = static_cast<std::size_t>(kv.get_int("train.epochs", 6));
  c.batch = static_cast<std::size_t>(kv.get_int("train.batch", 64));
  c.learning_rate = kv.get_double("train.learning_rate", 2e-3);
  c.beta = kv.get_double("train.beta", 0.25);
  c.rho = kv.get_double("train.rho", 0.99);
  c.epsilon = kv.get_double("train.epsilon", 1e-5);
  // Mode-specific defaults: 0.6/0.2 trimodal, 0.75/0.25 bimodal.
  const Rational default_self = c.mode == Mode::kTrimodal ? Rational(3, 5) : Rational(3, 4);
  const Rational default_cross = c.mode == Mode::kTrimodal ? Rational(1, 5) : Rational(1, 4);
  c.lambda_self = kv.get_rational("train.lambda_self", default_self);
  c.lambda_cross = kv.get_rational("train.lambda_cross", default_cross);
  c.tau = kv.get_double("train.tau", 1.0);
  c.cmcm_floor = kv.get_double("train.cmcm_floor", 1e-8);
  c.reset_threshold = static_cast<std::uint64_t>(kv.get_int("train.reset_threshold", 300));
  c.codebook_size = static_cast<std::size_t>(kv.get_int("train.codebook_size", 32));
  c.embed_dim = static_cast<std::size_t>(kv.get_int("train.embed_dim", 16));
  c.hidden_dim = static_cast<std::size_t>(kv.get_int("train.hidden_dim", 0));
  c.horizon = static_cast<std::size_t>(kv.get_int("train.horizon", 2));
  const std::string default_order = c.mode == Mode::kTrimodal ? "t->a->v" : "a->v";
  try {
    c.cascade_order = CascadeOrder::parse(kv.get_string("train.cascade_order", default_order));
  } catch (const std::exception& e) {
    throw ConfigError(std::string("cascade_order: ") + e.what());
  }
  c.flags.cpc = kv.get_bool("train.cpc", true);
  c.flags.dta = kv.get_bool("train.dta", true);
  c.flags.csa = kv.get_bool("train.csa", true);
  c.flags.dqa = kv.get_bool("train.dqa", true);
  c.seed = static_cast<std::uint64_t>(kv.get_int("train.seed", 1));
  c.validate();
  return c;
}

GeneratorConfig generator_config_from(const KeyValueConfig& kv) {
  reject_unknown(kv, "data", kDataKeys);
  GeneratorConfig c;
  c.mode = parse_mode(kv.get_string("data.mode", "trimodal"));
  c.samples = static_cast<std::size_t>(kv.get_int("data.samples", 2048));
  c.timesteps = static_cast<std::size_t>(kv.get_int("data.timesteps", 10));
  c.classes = static_cast<std::size_t>(kv.get_int("data.classes", 8));
  c.persistence = kv.get_double("data.persistence", 0.9);
  c.nuisance_step = kv.get_double("data.nuisance_step", 0.25);
  c.class_scale = kv.get_double("data.class_scale", 0.5);
  c.instance_dims = static_cast<std::size_t>(kv.get_int("data.instance_dims", 0));
  c.instance_scale = kv.get_double("data.instance_scale", 1.0);
  c.seed = static_cast<std::uint64_t>(kv.get_int("data.seed", 1));

  const char* names[3] = {"audio", "video", "text"};
  const std::size_t default_signal[3] = {24, 40, 16};
  const std::size_t n = modality_count(c.mode);
  c.signal_dims.clear();
  c.nuisance_dims.clear();
  c.noise.clear();
  for (std::size_t m = 0; m < n; ++m) {
    const std::string base = std::string("data.") + names[m];
    c.signal_dims.push_back(static_cast<std::size_t>(
        kv.get_int(base + "_dim", static_cast<std::int64_t>(default_signal[m]))));
    c.nuisance_dims.push_back(static_cast<std::size_t>(kv.get_int(base + "_nuisance", 4)));
    c.noise.push_back(kv.get_double(base + "_noise", 0.2));
  }
  try {
    c.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return c;
}

HeadConfig head_config_from(const KeyValueConfig& kv) {
  reject_unknown(kv, "head", kHeadKeys);
  HeadConfig c;
  c.hidden = static_cast<std::size_t>(kv.get_int("head.hidden", 64));
  c.epochs = static_cast<std::size_t>(kv.get_int("head.epochs", 20));
  c.learning_rate = kv.get_double("head.learning_rate", 2.5e-4);
  c.batch = static_cast<std::size_t>(kv.get_int("head.batch", 256));
  const std::string input = kv.get_string("head.input", "trimodal");
  if (input == "unimodal") c.trimodal_input = false;
  else if (input == "trimodal") c.trimodal_input = true;
  else throw ConfigError("head.input must be 'unimodal' or 'trimodal'");
  c.seed = static_cast<std::uint64_t>(kv.get_int("head.seed", 7));
  c.validate();
  return c;
}

SplitConfig split_config_from(const KeyValueConfig& kv) {
  reject_unknown(kv, "split", kSplitKeys);
  SplitConfig c;
  c.train = kv.get_double("split.train", 0.8);
  c.validation = kv.get_double("split.validation", 0.1);
  c.test = kv.get_double("split.test", 0.1);
  c.seed = static_cast<std::uint64_t>(kv.get_int("split.seed", 11));
  c.validate();
  return c;
}

std::string train_config_to_text(const TrainConfig& config) {
  std::ostringstream out;
  out.precision(17);
  out << "[train]\n";
  out << "mode = " << (config.mode == Mode::kTrimodal ? "trimodal" : "bimodal") << '\n';
  out << "epochs = " << config.epochs << '\n';
  out << "batch = " << config.batch << '\n';
  out << "learning_rate = " << config.learning_rate << '\n';
  out << "beta = " << config.beta << '\n';
  out << "rho = " << config.rho << '\n';
  out << "epsilon = " << config.epsilon << '\n';
  out << "lambda_self = " << config.lambda_self.num << '/' << config.lambda_self.den << '\n';
  out << "lambda_cross = " << config.lambda_cross.num << '/' << config.lambda_cross.den << '\n';
  out << "tau = " << config.tau << '\n';
  out << "cmcm_floor = " << config.cmcm_floor << '\n';
  out << "reset_threshold = " << config.reset_threshold << '\n';
  out << "codebook_size = " << config.codebook_size << '\n';
  out << "embed_dim = " << config.embed_dim << '\n';
  out << "hidden_dim = " << config.hidden_dim << '\n';
  out << "horizon = " << config.horizon << '\n';
  out << "cascade_order = " << config.cascade_order.to_string() << '\n';
  out << "cpc = " << (config.flags.cpc ? "true" : "false") << '\n';
  out << "dta = " << (config.flags.dta ? "true" : "false") << '\n';
  out << "csa = " << (config.flags.csa ? "true" : "false") << '\n';
  out << "dqa = " << (config.flags.dqa ? "true" : "false") << '\n';
  out << "seed = " << config.seed << '\n';
  return out.str();
}

}  // namespace cmda
