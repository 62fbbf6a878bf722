#include "airfl/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace airfl::config {
namespace {

using json = nlohmann::json;

struct Context {
  std::string source;
  std::map<std::string, int> lines;

  [[noreturn]] void fail(const std::string& pointer, const std::string& message) const {
    // Report the line of the key itself, or of its closest located ancestor.
    std::string p = pointer;
    int line = 0;
    while (true) {
      auto it = lines.find(p);
      if (it != lines.end()) {
        line = it->second;
        break;
      }
      const auto slash = p.rfind('/');
      if (slash == std::string::npos || p.empty()) break;
      p.erase(slash);
    }
    std::string where = source + (line > 0 ? ":" + std::to_string(line) : std::string());
    throw ConfigError(where + ": " + (pointer.empty() ? std::string("/") : pointer) + ": " + message);
  }
};

// Typed access to one JSON object, rejecting keys that are never read.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string pointer, const Context& ctx, std::set<std::string> allowed)
      : j_(j), pointer_(std::move(pointer)), ctx_(ctx) {
    if (!j_.is_object()) ctx_.fail(pointer_, "expected an object");
    for (const auto& [k, v] : j_.items()) {
      if (!allowed.count(k)) ctx_.fail(pointer_ + "/" + k, "unknown key '" + k + "'");
    }
  }

  [[nodiscard]] bool has(const std::string& key) const { return j_.contains(key); }
  [[nodiscard]] const json& at(const std::string& key) const { return j_.at(key); }
  [[nodiscard]] std::string ptr(const std::string& key) const { return pointer_ + "/" + key; }
  [[noreturn]] void fail(const std::string& key, const std::string& message) const { ctx_.fail(ptr(key), message); }

  double number(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const auto& v = at(key);
    if (!v.is_number()) fail(key, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(key, "must be finite");
    return d;
  }

  std::size_t count(const std::string& key, std::size_t fallback, std::size_t min_value = 0) const {
    if (!has(key)) return fallback;
    const auto& v = at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)) {
      fail(key, "expected a non-negative integer");
    }
    const auto n = v.get<std::uint64_t>();
    if (n < min_value) fail(key, "must be >= " + std::to_string(min_value));
    return static_cast<std::size_t>(n);
  }

  std::string text(const std::string& key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    const auto& v = at(key);
    if (!v.is_string()) fail(key, "expected a string");
    return v.get<std::string>();
  }

  // Exactly one of the SI key and the dB-suffixed key may be given.
  double either(const std::string& si_key, const std::string& db_key, double fallback,
                double (*convert)(double)) const {
    if (has(si_key) && has(db_key)) fail(db_key, "give either '" + si_key + "' or '" + db_key + "', not both");
    if (has(db_key)) return convert(number(db_key, 0.0));
    return number(si_key, fallback);
  }

 private:
  const json& j_;
  std::string pointer_;
  const Context& ctx_;
};

double dbm_hz_to_w_hz(double v) { return dbm_to_watts(v); }

SystemConfig parse_system(const json& j, const std::string& pointer, const Context& ctx, SystemConfig base) {
  ObjectReader r(j, pointer, ctx,
                 {"num_targets", "num_interferers", "ris_elements", "target_power_w", "target_power_dbm",
                  "interferer_power_w", "interferer_power_dbm", "noise_psd_w_per_hz", "noise_psd_dbm_hz",
                  "bandwidth_hz", "gradient_bound", "pathloss_exponent", "ps_ris_distance_m", "device_disk_radius_m",
                  "reference_gain", "reference_gain_db", "seed"});
  SystemConfig c = base;
  c.num_targets = r.count("num_targets", c.num_targets, 1);
  c.num_interferers = r.count("num_interferers", c.num_interferers);
  c.ris_elements = r.count("ris_elements", c.ris_elements, 1);
  c.target_power_w = r.either("target_power_w", "target_power_dbm", c.target_power_w, dbm_to_watts);
  c.interferer_power_w = r.either("interferer_power_w", "interferer_power_dbm", c.interferer_power_w, dbm_to_watts);
  c.noise_psd_w_per_hz = r.either("noise_psd_w_per_hz", "noise_psd_dbm_hz", c.noise_psd_w_per_hz, dbm_hz_to_w_hz);
  c.bandwidth_hz = r.number("bandwidth_hz", c.bandwidth_hz);
  c.gradient_bound = r.number("gradient_bound", c.gradient_bound);
  c.pathloss_exponent = r.number("pathloss_exponent", c.pathloss_exponent);
  c.ps_ris_distance_m = r.number("ps_ris_distance_m", c.ps_ris_distance_m);
  c.device_disk_radius_m = r.number("device_disk_radius_m", c.device_disk_radius_m);
  c.reference_gain = r.either("reference_gain", "reference_gain_db", c.reference_gain, db_to_amplitude);
  c.seed = r.count("seed", c.seed);
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    ctx.fail(pointer, e.what());
  }
  return c;
}

PhaseImpairment parse_phase(const json& j, const std::string& pointer, const Context& ctx) {
  ObjectReader r(j, pointer, ctx, {"quantization_bits", "uniform_noise_rad"});
  PhaseImpairment p;
  p.quantization_bits = static_cast<int>(r.count("quantization_bits", 0));
  if (p.quantization_bits > 52) r.fail("quantization_bits", "must be <= 52 (0 means continuous)");
  p.uniform_noise_rad = r.number("uniform_noise_rad", 0.0);
  if (p.uniform_noise_rad < 0.0) r.fail("uniform_noise_rad", "must be non-negative");
  return p;
}

InterferenceMode parse_interference(const ObjectReader& r, const std::string& key, InterferenceMode fallback) {
  if (!r.has(key)) return fallback;
  const auto name = r.text(key, "");
  const auto mode = interference_mode_from_string(name);
  if (!mode) r.fail(key, "unknown interference mode '" + name + "' (random_unit, zero_gradient_attack, constant_unit)");
  return *mode;
}

harness::TaskSpec parse_task(const json& j, const std::string& pointer, const Context& ctx) {
  ObjectReader r(j, pointer, ctx,
                 {"dataset", "mnist_dir", "samples_per_client", "test_samples", "features", "classes", "separation",
                  "labels_per_client", "model", "hidden"});
  harness::TaskSpec t;
  t.dataset = r.text("dataset", t.dataset);
  if (t.dataset != "synthetic" && t.dataset != "mnist") r.fail("dataset", "must be 'synthetic' or 'mnist'");
  t.mnist_dir = r.text("mnist_dir", t.mnist_dir);
  if (t.dataset == "mnist" && t.mnist_dir.empty()) r.fail("dataset", "dataset 'mnist' needs 'mnist_dir'");
  t.samples_per_client = r.count("samples_per_client", t.samples_per_client);
  t.test_samples = r.count("test_samples", t.test_samples, 1);
  t.features = r.count("features", t.features, 1);
  t.classes = r.count("classes", t.classes, 2);
  t.separation = r.number("separation", t.separation);
  if (t.separation < 0.0) r.fail("separation", "must be non-negative");
  t.labels_per_client = r.count("labels_per_client", t.labels_per_client, 1);
  const auto model = r.text("model", std::string(fl::to_string(t.model)));
  const auto kind = fl::model_kind_from_string(model);
  if (!kind) r.fail("model", "unknown model '" + model + "' (softmax_regression, mlp_one_hidden)");
  t.model = *kind;
  t.hidden = r.count("hidden", t.hidden, 1);
  if (t.dataset == "synthetic" && t.samples_per_client == 0) r.fail("samples_per_client", "must be >= 1");
  return t;
}

std::optional<Strategy> parse_aggregator(const std::string& name) { return strategy_from_string(name); }

}  // namespace

std::vector<std::pair<std::string, int>> key_lines(const std::string& text) {
  struct Frame {
    bool object;
    std::string key;
    std::size_t index = 0;
    bool want_key = true;
  };
  std::vector<Frame> stack;
  std::vector<std::pair<std::string, int>> out;
  int line = 1;
  auto pointer = [&] {
    std::string p;
    for (const auto& f : stack) p += "/" + (f.object ? f.key : std::to_string(f.index));
    return p;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (ch == '\n') {
      ++line;
    } else if (ch == '"') {
      std::string s;
      for (++i; i < text.size() && text[i] != '"'; ++i) {
        if (text[i] == '\\' && i + 1 < text.size()) ++i;
        if (text[i] == '\n') ++line;
        s += text[i];
      }
      if (!stack.empty() && stack.back().object && stack.back().want_key) {
        stack.back().key = s;
        stack.back().want_key = false;
        out.emplace_back(pointer(), line);
      }
    } else if (ch == '{' || ch == '[') {
      stack.push_back({ch == '{', "", 0, true});
    } else if (ch == '}' || ch == ']') {
      if (!stack.empty()) stack.pop_back();
    } else if (ch == ',' && !stack.empty()) {
      if (stack.back().object) {
        stack.back().want_key = true;
      } else {
        ++stack.back().index;
      }
    }
  }
  return out;
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    // Convert the byte offset into line:column.
    int line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": malformed JSON: " +
                      e.what());
  }

  Context ctx{source, {}};
  for (auto& [p, l] : key_lines(text)) ctx.lines.emplace(p, l);

  ObjectReader r(doc, "", ctx,
                 {"schema_version", "output_dir", "seeds", "trials", "system", "schemes", "interference", "phase",
                  "gradients", "sweep", "train", "bound"});
  ExperimentConfig c;
  if (!r.has("schema_version")) ctx.fail("", "missing 'schema_version'");
  if (!r.at("schema_version").is_number_integer() || r.at("schema_version").get<long long>() != kSchemaVersion) {
    r.fail("schema_version", "unsupported schema version (expected " + std::to_string(kSchemaVersion) + ")");
  }
  c.output_dir = r.text("output_dir", c.output_dir);
  c.trials = r.count("trials", c.trials, harness::kMinTrials);
  if (r.has("system")) c.system = parse_system(r.at("system"), "/system", ctx, SystemConfig{});

  c.seeds = {c.system.seed};
  if (r.has("seeds")) {
    const auto& s = r.at("seeds");
    if (!s.is_array() || s.empty()) r.fail("seeds", "expected a non-empty array of non-negative integers");
    c.seeds.clear();
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!s[i].is_number_unsigned()) ctx.fail("/seeds/" + std::to_string(i), "expected a non-negative integer");
      c.seeds.push_back(s[i].get<std::uint64_t>());
    }
  }

  c.schemes = {Strategy::SchemeI, Strategy::SchemeII, Strategy::BevRandom, Strategy::BevRoundRobin};
  if (r.has("schemes")) {
    const auto& s = r.at("schemes");
    if (!s.is_array() || s.empty()) r.fail("schemes", "expected a non-empty array of scheme names");
    c.schemes.clear();
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto name = s[i].is_string() ? s[i].get<std::string>() : std::string();
      const auto st = strategy_from_string(name);
      if (!st) {
        ctx.fail("/schemes/" + std::to_string(i),
                 "unknown scheme '" + name + "' (scheme1, scheme2, bev_random, bev_rr, bev_minmse)");
      }
      c.schemes.push_back(*st);
    }
  }
  c.interference = parse_interference(r, "interference", c.interference);
  if (r.has("phase")) c.phase = parse_phase(r.at("phase"), "/phase", ctx);

  if (r.has("gradients")) {
    ObjectReader g(r.at("gradients"), "/gradients", ctx, {"source", "dimension", "correlation", "record_rounds"});
    const auto src = g.text("source", "fixed_synthetic");
    if (src == "fixed_synthetic") {
      c.gradients.source = harness::GradSource::FixedSynthetic;
    } else if (src == "recorded_training") {
      c.gradients.source = harness::GradSource::RecordedTraining;
    } else {
      g.fail("source", "must be 'fixed_synthetic' or 'recorded_training'");
    }
    c.gradients.dimension = g.count("dimension", c.gradients.dimension, 1);
    c.gradients.correlation = g.number("correlation", c.gradients.correlation);
    if (c.gradients.correlation < 0.0 || c.gradients.correlation > 1.0) g.fail("correlation", "must be in [0, 1]");
    c.gradients.record_rounds = g.count("record_rounds", c.gradients.record_rounds, 1);
  }

  if (r.has("sweep")) {
    ObjectReader s(r.at("sweep"), "/sweep", ctx, {"axis", "values"});
    const auto name = s.text("axis", "N");
    const auto axis = harness::axis_from_string(name);
    if (!axis) s.fail("axis", "unknown axis '" + name + "' (N, P, K, M, bits)");
    c.sweep.axis = *axis;
    if (!s.has("values")) s.fail("values", "missing axis values");
    const auto& v = s.at("values");
    if (!v.is_array() || v.empty()) s.fail("values", "expected a non-empty array");
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string p = "/sweep/values/" + std::to_string(i);
      double x = 0.0;
      if (v[i].is_number()) {
        x = v[i].get<double>();
      } else if (v[i].is_string() && v[i].get<std::string>() == "inf") {
        x = std::numeric_limits<double>::infinity();
      } else {
        ctx.fail(p, "expected a number (or \"inf\" on the bits axis)");
      }
      try {
        SystemConfig tmp = c.system;
        PhaseImpairment imp = c.phase;
        harness::apply_axis(c.sweep.axis, x, tmp, imp);
      } catch (const std::invalid_argument& e) {
        ctx.fail(p, e.what());
      }
      c.sweep.values.push_back(x);
    }
  }

  if (r.has("bound")) {
    ObjectReader b(r.at("bound"), "/bound", ctx, {"rounds", "pilot_rounds"});
    c.bound.rounds = b.count("rounds", c.bound.rounds, 1);
    c.bound.pilot_rounds = b.count("pilot_rounds", c.bound.pilot_rounds, 2);
  }

  if (r.has("train")) {
    ObjectReader t(r.at("train"), "/train", ctx,
                   {"rounds", "learning_rate", "batch_size", "gradient_bound", "pilot_rounds", "task", "runs"});
    auto& ts = c.train;
    ts.rounds = t.count("rounds", ts.rounds, 1);
    ts.learning_rate = t.number("learning_rate", ts.learning_rate);
    if (!(ts.learning_rate > 0.0)) t.fail("learning_rate", "must be positive");
    ts.batch_size = t.count("batch_size", ts.batch_size, 1);
    if (t.has("gradient_bound")) {
      const auto& g = t.at("gradient_bound");
      if (g.is_string() && g.get<std::string>() == "pilot") {
        ts.gradient_bound.reset();
      } else if (g.is_number() && g.get<double>() > 0.0) {
        ts.gradient_bound = g.get<double>();
      } else {
        t.fail("gradient_bound", "expected a positive number or \"pilot\"");
      }
    }
    ts.pilot_rounds = t.count("pilot_rounds", ts.pilot_rounds, 1);
    if (t.has("task")) ts.task = parse_task(t.at("task"), "/train/task", ctx);
    if (t.has("runs")) {
      const auto& runs = t.at("runs");
      if (!runs.is_array() || runs.empty()) t.fail("runs", "expected a non-empty array");
      std::set<std::string> labels;
      for (std::size_t i = 0; i < runs.size(); ++i) {
        const std::string p = "/train/runs/" + std::to_string(i);
        ObjectReader rr(runs[i], p, ctx, {"label", "aggregator", "interference", "phase", "system"});
        fl::RunConfig run;
        run.aggregator.interference = c.interference;
        run.aggregator.impairment = c.phase;
        const auto agg = rr.text("aggregator", "ideal");
        if (agg != "ideal") {
          const auto st = parse_aggregator(agg);
          if (!st) rr.fail("aggregator", "unknown aggregator '" + agg + "'");
          run.aggregator.strategy = *st;
        }
        run.label = rr.text("label", agg);
        if (run.label.empty() || run.label.find_first_of("/\\ ") != std::string::npos) {
          rr.fail("label", "labels must be non-empty and contain no spaces or slashes");
        }
        if (!labels.insert(run.label).second) rr.fail("label", "duplicate run label '" + run.label + "'");
        run.aggregator.interference = parse_interference(rr, "interference", run.aggregator.interference);
        if (rr.has("phase")) run.aggregator.impairment = parse_phase(rr.at("phase"), p + "/phase", ctx);
        run.system = rr.has("system") ? parse_system(rr.at("system"), p + "/system", ctx, c.system) : c.system;
        if (run.system.num_targets != c.system.num_targets) {
          ctx.fail(p + "/system", "runs must share num_targets with the base system");
        }
        run.rounds = ts.rounds;
        run.learning_rate = ts.learning_rate;
        run.batch_size = ts.batch_size;
        ts.runs.push_back(std::move(run));
      }
    }
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

json to_json(const SystemConfig& c) {
  return json{{"num_targets", c.num_targets},
              {"num_interferers", c.num_interferers},
              {"ris_elements", c.ris_elements},
              {"target_power_w", c.target_power_w},
              {"interferer_power_w", c.interferer_power_w},
              {"noise_psd_w_per_hz", c.noise_psd_w_per_hz},
              {"bandwidth_hz", c.bandwidth_hz},
              {"gradient_bound", c.gradient_bound},
              {"pathloss_exponent", c.pathloss_exponent},
              {"ps_ris_distance_m", c.ps_ris_distance_m},
              {"device_disk_radius_m", c.device_disk_radius_m},
              {"reference_gain", c.reference_gain},
              {"seed", c.seed}};
}

namespace {

json phase_json(const PhaseImpairment& p) {
  return json{{"quantization_bits", p.quantization_bits}, {"uniform_noise_rad", p.uniform_noise_rad}};
}

}  // namespace

json to_json(const ExperimentConfig& c) {
  json schemes = json::array();
  for (auto s : c.schemes) schemes.push_back(std::string(to_string(s)));
  json values = json::array();
  for (double v : c.sweep.values) {
    if (std::isinf(v)) {
      values.push_back("inf");
    } else {
      values.push_back(v);
    }
  }
  const auto& t = c.train;
  json runs = json::array();
  for (const auto& r : t.runs) {
    runs.push_back(json{{"label", r.label},
                        {"aggregator", r.aggregator.name()},
                        {"interference", std::string(to_string(r.aggregator.interference))},
                        {"phase", phase_json(r.aggregator.impairment)},
                        {"system", to_json(r.system)}});
  }
  json task{{"dataset", t.task.dataset},
            {"samples_per_client", t.task.samples_per_client},
            {"test_samples", t.task.test_samples},
            {"features", t.task.features},
            {"classes", t.task.classes},
            {"separation", t.task.separation},
            {"labels_per_client", t.task.labels_per_client},
            {"model", std::string(fl::to_string(t.task.model))},
            {"hidden", t.task.hidden}};
  if (!t.task.mnist_dir.empty()) task["mnist_dir"] = t.task.mnist_dir;
  json train{{"rounds", t.rounds},
             {"learning_rate", t.learning_rate},
             {"batch_size", t.batch_size},
             {"pilot_rounds", t.pilot_rounds},
             {"task", task},
             {"runs", runs}};
  if (t.gradient_bound) {
    train["gradient_bound"] = *t.gradient_bound;
  } else {
    train["gradient_bound"] = "pilot";
  }
  if (runs.empty()) train.erase("runs");
  json out{{"schema_version", c.schema_version},
           {"output_dir", c.output_dir},
           {"seeds", c.seeds},
           {"trials", c.trials},
           {"system", to_json(c.system)},
           {"schemes", schemes},
           {"interference", std::string(to_string(c.interference))},
           {"phase", phase_json(c.phase)},
           {"gradients",
            {{"source", std::string(harness::to_string(c.gradients.source))},
             {"dimension", c.gradients.dimension},
             {"correlation", c.gradients.correlation},
             {"record_rounds", c.gradients.record_rounds}}},
           {"bound", {{"rounds", c.bound.rounds}, {"pilot_rounds", c.bound.pilot_rounds}}},
           {"train", train}};
  if (!values.empty()) out["sweep"] = json{{"axis", std::string(harness::to_string(c.sweep.axis))}, {"values", values}};
  return out;
}

}  // namespace airfl::config
