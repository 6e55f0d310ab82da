#include "hwdnet/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "hwdnet/error.hpp"

namespace hwdnet {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("train.lr must be > 0");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("train.momentum must lie in [0, 1)");
  if (weight_decay < 0.0) throw ConfigError("train.weight_decay must be >= 0");
  if (!(lr_gamma > 0.0)) throw ConfigError("train.lr_gamma must be > 0");
  if (restrainer_lr_scale < 0.0) throw ConfigError("train.restrainer_lr_scale must be >= 0");
  if (checkpoint_every < 0 || eval_every < 0) throw ConfigError("checkpoint/eval intervals must be >= 0");
  if (eval.max_rank < 1) throw ConfigError("eval.max_rank must be >= 1");
  if (eval.single_shot_seeds < 1) throw ConfigError("eval.seeds must be >= 1");
  if (augment.crop_padding < 0) throw ConfigError("augment.crop_padding must be >= 0");
  if (augment.erase_probability < 0.0 || augment.erase_probability > 1.0) {
    throw ConfigError("augment.erase_probability must lie in [0, 1]");
  }
  batch.validate();
  encoder.validate();
  decouple.validate(encoder.dim);
  loss.validate();
}

double TrainConfig::lr_at(int epoch) const {
  if (lr_schedule == LrSchedule::constant) return lr;
  double out = lr;
  for (int s : lr_steps) {
    if (epoch >= s) out *= lr_gamma;
  }
  return out;
}

TrainConfig desk_preset() {
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.lr = 0.1;
  cfg.lr_steps = {20, 26};
  cfg.restrainer_lr_scale = 0.01;
  cfg.loss.reduction = Reduction::mean;
  cfg.checkpoint_every = 10;
  cfg.batch.image_height = 64;
  cfg.batch.image_width = 48;
  cfg.augment.crop_padding = 4;
  cfg.encoder.arch = EncoderArch::desk;
  cfg.encoder.dim = 128;
  cfg.encoder.base_channels = 16;
  return cfg;
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  // shortest form that still round-trips
  for (int prec = 1; prec <= 17; ++prec) {
    char tmp[64];
    std::snprintf(tmp, sizeof tmp, "%.*g", prec, v);
    if (std::strtod(tmp, nullptr) == v) return tmp;
  }
  return buf;
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

template <typename T>
T parse_int(const std::string& key, const std::string& v) {
  T out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(out)) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  if (v.empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_int<int>(key, item));
  return out;
}

std::string join(const std::vector<int>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + std::to_string(xs[i]);
  return s;
}

struct Field {
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string& key, const std::string&)> set;
};

#define HWD_INT(KEY, MEMBER)                                                                   \
  {KEY, Field{[](const TrainConfig& c) { return std::to_string(c.MEMBER); },                    \
              [](TrainConfig& c, const std::string& k, const std::string& v) {                  \
                c.MEMBER = parse_int<std::decay_t<decltype(c.MEMBER)>>(k, v);                   \
              }}}
#define HWD_DBL(KEY, MEMBER)                                                                   \
  {KEY, Field{[](const TrainConfig& c) { return fmt_double(c.MEMBER); },                        \
              [](TrainConfig& c, const std::string& k, const std::string& v) { c.MEMBER = parse_double(k, v); }}}
#define HWD_BOOL(KEY, MEMBER)                                                                  \
  {KEY, Field{[](const TrainConfig& c) { return fmt_bool(c.MEMBER); },                          \
              [](TrainConfig& c, const std::string& k, const std::string& v) { c.MEMBER = parse_bool(k, v); }}}
#define HWD_ENUM(KEY, MEMBER, PARSE)                                                           \
  {KEY, Field{[](const TrainConfig& c) { return std::string(to_string(c.MEMBER)); },            \
              [](TrainConfig& c, const std::string&, const std::string& v) { c.MEMBER = PARSE(v); }}}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      HWD_INT("train.epochs", epochs),
      HWD_DBL("train.lr", lr),
      HWD_DBL("train.momentum", momentum),
      HWD_DBL("train.weight_decay", weight_decay),
      HWD_INT("train.seed", seed),
      {"train.lr_schedule",
       Field{[](const TrainConfig& c) { return std::string(c.lr_schedule == LrSchedule::step ? "step" : "constant"); },
             [](TrainConfig& c, const std::string& k, const std::string& v) {
               if (v == "step") c.lr_schedule = LrSchedule::step;
               else if (v == "constant") c.lr_schedule = LrSchedule::constant;
               else throw ConfigError(k + ": expected step or constant, got '" + v + "'");
             }}},
      {"train.lr_steps", Field{[](const TrainConfig& c) { return join(c.lr_steps); },
                               [](TrainConfig& c, const std::string& k, const std::string& v) {
                                 c.lr_steps = parse_int_list(k, v);
                               }}},
      HWD_DBL("train.lr_gamma", lr_gamma),
      HWD_DBL("train.restrainer_lr_scale", restrainer_lr_scale),
      HWD_INT("train.checkpoint_every", checkpoint_every),
      HWD_INT("train.eval_every", eval_every),
      HWD_BOOL("train.deterministic", deterministic),
      HWD_INT("batch.ids_per_batch", batch.ids_per_batch),
      HWD_INT("batch.images_per_id", batch.images_per_id_per_modality),
      HWD_INT("batch.height", batch.image_height),
      HWD_INT("batch.width", batch.image_width),
      HWD_BOOL("augment.flip", augment.flip),
      HWD_BOOL("augment.crop", augment.crop),
      HWD_INT("augment.crop_padding", augment.crop_padding),
      HWD_BOOL("augment.erase", augment.erase),
      HWD_DBL("augment.erase_probability", augment.erase_probability),
      HWD_ENUM("encoder.arch", encoder.arch, parse_encoder_arch),
      HWD_INT("encoder.dim", encoder.dim),
      HWD_INT("encoder.base_channels", encoder.base_channels),
      {"plan.stage", Field{[](const TrainConfig& c) { return c.plan.name(); },
                           [](TrainConfig& c, const std::string&, const std::string& v) {
                             c.plan = RelationPlan::parse(v);
                           }}},
      HWD_ENUM("restrainer.granularity", restrainer.granularity, parse_restrainer_granularity),
      HWD_DBL("restrainer.init_a", restrainer.init_a),
      HWD_DBL("restrainer.init_b", restrainer.init_b),
      HWD_ENUM("decouple.variant", decouple.variant, parse_decouple_variant),
      HWD_DBL("decouple.split_fraction", decouple.split_fraction),
      HWD_INT("decouple.mlp_hidden", decouple.mlp_hidden),
      HWD_DBL("loss.margin", loss.weights.margin),
      HWD_ENUM("loss.centroid_mode", loss.centroid_mode, parse_centroid_mode),
      HWD_ENUM("loss.similarity", loss.similarity, parse_similarity),
      HWD_ENUM("loss.reduction", loss.reduction, parse_reduction),
      HWD_ENUM("loss.triplet_input", loss.triplet_input, parse_triplet_input),
      HWD_BOOL("loss.enable.wr", loss.enable.wr),
      HWD_BOOL("loss.enable.id", loss.enable.id),
      HWD_BOOL("loss.enable.tri", loss.enable.tri),
      HWD_BOOL("loss.enable.orient", loss.enable.orient),
      HWD_BOOL("loss.enable.centroid", loss.enable.centroid),
      HWD_DBL("loss.weight.wr", loss.weights.wr),
      HWD_DBL("loss.weight.id", loss.weights.id),
      HWD_DBL("loss.weight.tri", loss.weights.tri),
      HWD_DBL("loss.weight.orient", loss.weights.orient),
      HWD_DBL("loss.weight.centroid", loss.weights.centroid),
      HWD_INT("eval.max_rank", eval.max_rank),
      HWD_INT("eval.seeds", eval.single_shot_seeds),
      HWD_BOOL("eval.exclude_same_camera", eval.exclude_same_camera),
  };
  return table;
}

#undef HWD_INT
#undef HWD_DBL
#undef HWD_BOOL
#undef HWD_ENUM

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

Settings to_settings(const TrainConfig& cfg) {
  Settings out;
  for (const auto& [key, field] : fields()) out.emplace_back(key, field.get(cfg));
  return out;
}

void apply_setting(TrainConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& [k, field] : fields()) {
    if (k == key) {
      field.set(cfg, key, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void apply_settings(TrainConfig& cfg, const Settings& settings) {
  for (const auto& [k, v] : settings) apply_setting(cfg, k, v);
}

Settings parse_settings(const std::string& text, const std::string& origin) {
  Settings out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

Settings read_settings_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read config file " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_settings(ss.str(), file.string());
}

std::string format_settings(const Settings& settings) {
  std::string out;
  for (const auto& [k, v] : settings) out += k + " = " + v + "\n";
  return out;
}

std::vector<std::string> known_setting_keys() {
  std::vector<std::string> out;
  for (const auto& [k, _] : fields()) out.push_back(k);
  return out;
}

}  // namespace hwdnet
