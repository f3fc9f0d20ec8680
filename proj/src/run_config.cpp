#include "protoda/train/run_config.hpp"

#include "json.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace protoda {

using nlohmann::json;

std::string to_string(Regime r) { return r == Regime::seen ? "seen" : "unseen"; }
std::string to_string(TaskSet t) { return t == TaskSet::single ? "single" : "multi"; }
std::string to_string(Method m) { return m == Method::protonet ? "protonet" : "conv_tl"; }

namespace {

template <typename E>
E parse_enum(const std::string& key, const std::string& v, std::initializer_list<E> all) {
  std::string options;
  for (E e : all) {
    if (to_string(e) == v) return e;
    options += (options.empty() ? "" : "|") + to_string(e);
  }
  throw ConfigError(key + ": expected " + options + ", got '" + v + "'");
}

json adam_json(const AdamOptions& a) {
  return {{"lr", a.lr}, {"beta1", a.beta1}, {"beta2", a.beta2}, {"epsilon", a.epsilon}};
}

json synthetic_json(const SyntheticTaskSpec& s) {
  return {{"tasks", s.tasks},
          {"classes", s.classes},
          {"dim", s.dim},
          {"separation", s.separation},
          {"within_std", s.within_std},
          {"train_per_class", s.train_per_class},
          {"validation_per_class", s.validation_per_class},
          {"seed", s.seed}};
}

json encoder_json(const EncoderConfig& e) {
  return {{"kind", to_string(e.kind)}, {"char_dim", e.char_dim},   {"kernel", e.kernel},
          {"filters1", e.filters1},    {"filters2", e.filters2},   {"pool", e.pool},
          {"dropout", e.dropout},      {"word_dim", e.word_dim},   {"hidden", e.hidden},
          {"mean_output_dim", e.mean_output_dim}};
}

json head_json(const ProtoHeadConfig& h) {
  return {{"hidden", h.hidden}, {"output_dim", h.output_dim}, {"dropout", h.dropout},
          {"distance", to_string(h.distance)}};
}

json augment_json(const AugmentConfig& a) {
  return {{"method", to_string(a.method)},
          {"space", to_string(a.space)},
          {"ratio", a.ratio},
          {"noise_variance_fraction", a.noise_variance_fraction},
          {"hallucinator_dropout", a.hallucinator_dropout},
          {"identity_layout", to_string(a.identity_layout)}};
}

json to_document(const RunConfig& c) {
  json raw = json::object();
  for (const auto& [k, v] : c.data.raw) raw[k] = v.string();
  json j;
  j["regime"] = to_string(c.regime);
  j["task_set"] = to_string(c.task_set);
  j["method"] = to_string(c.method);
  j["data"] = {{"corpus_dir", c.data.corpus_dir.string()},
               {"corpora", c.data.corpora},
               {"word_vectors", c.data.word_vectors.string()},
               {"raw", raw},
               {"synthetic", c.data.synthetic ? synthetic_json(*c.data.synthetic) : json(nullptr)}};
  j["test"] = {{"task", c.test.task}, {"intents", c.test.intents}};
  j["encoder"] = encoder_json(c.encoder);
  j["head"] = head_json(c.head);
  j["augment"] = augment_json(c.augment);
  j["schedule"] = {{"phase1_episodes", c.schedule.phase1_episodes},
                   {"phase2_episodes", c.schedule.phase2_episodes},
                   {"k", c.schedule.k},
                   {"q", c.schedule.q},
                   {"adam", adam_json(c.schedule.adam)},
                   {"checkpoint_every", c.schedule.checkpoint_every},
                   {"log_every", c.schedule.log_every}};
  j["conv_tl"] = {{"epochs", c.conv_tl.epochs},
                  {"batch", c.conv_tl.batch},
                  {"finetune_steps", c.conv_tl.finetune_steps},
                  {"finetune_batch_cap", c.conv_tl.finetune_batch_cap},
                  {"hidden", c.conv_tl.hidden},
                  {"dropout", c.conv_tl.dropout},
                  {"adam", adam_json(c.conv_tl.adam)}};
  j["eval"] = {{"trials", c.eval.trials}, {"k", c.eval.k}, {"seed_base", c.eval.seed_base}};
  j["output_dir"] = c.output_dir.string();
  j["seed"] = c.seed;
  return j;
}

/// Paths whose value is replaced wholesale rather than merged key by key.
bool free_form(const std::string& path) { return path == "data.raw" || path == "data.synthetic"; }

void merge_strict(json& base, const json& patch, const std::string& path) {
  if (!patch.is_object()) throw ConfigError((path.empty() ? "config" : path) + ": expected an object");
  for (const auto& [key, value] : patch.items()) {
    const std::string full = path.empty() ? key : path + "." + key;
    if (!base.contains(key)) throw ConfigError("unknown config key: " + full);
    json& slot = base[key];
    if (free_form(full)) {
      if (full == "data.synthetic" && value.is_object()) {
        json merged = slot.is_null() ? synthetic_json(SyntheticTaskSpec{}) : slot;
        merge_strict(merged, value, full);
        slot = merged;
      } else {
        slot = value;
      }
    } else if (slot.is_object()) {
      merge_strict(slot, value, full);
    } else {
      slot = value;
    }
  }
}

template <typename T>
T get(const json& j, const char* key, const std::string& path) {
  try {
    const json& v = j.at(key);
    if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer() || (std::is_unsigned_v<T> && !v.is_number_unsigned())) {
        throw ConfigError(path + "." + key + ": expected a " +
                          (std::is_unsigned_v<T> ? "nonnegative " : "") + "integer, got " + v.dump());
      }
    }
    return v.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(path + "." + key + ": " + e.what());
  }
}

template <typename T>
T positive(const json& j, const char* key, const std::string& path) {
  const auto v = get<T>(j, key, path);
  if (!(v > T(0))) throw ConfigError(path + "." + key + " must be positive");
  return v;
}

double probability(const json& j, const char* key, const std::string& path) {
  const auto v = get<double>(j, key, path);
  if (!(v >= 0.0 && v < 1.0)) throw ConfigError(path + "." + key + " must lie in [0, 1)");
  return v;
}

AdamOptions read_adam(const json& j, const std::string& path) {
  AdamOptions a;
  a.lr = positive<double>(j, "lr", path);
  a.beta1 = probability(j, "beta1", path);
  a.beta2 = probability(j, "beta2", path);
  a.epsilon = positive<double>(j, "epsilon", path);
  return a;
}

template <typename F>
auto wrap(const std::string& key, F&& f) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

RunConfig from_document(const json& j) {
  RunConfig c;
  c.regime = parse_enum(std::string("regime"), get<std::string>(j, "regime", "config"), {Regime::seen, Regime::unseen});
  c.task_set = parse_enum(std::string("task_set"), get<std::string>(j, "task_set", "config"),
                          {TaskSet::single, TaskSet::multi});
  c.method = parse_enum(std::string("method"), get<std::string>(j, "method", "config"),
                        {Method::protonet, Method::conv_tl});

  const json& d = j.at("data");
  c.data.corpus_dir = get<std::string>(d, "corpus_dir", "data");
  c.data.corpora = get<std::vector<std::string>>(d, "corpora", "data");
  c.data.word_vectors = get<std::string>(d, "word_vectors", "data");
  if (!d.at("raw").is_object()) throw ConfigError("data.raw: expected an object");
  for (const auto& [k, v] : d.at("raw").items()) {
    if (k != "fb" && k != "atis" && k != "snips") throw ConfigError("data.raw: unknown source format '" + k + "'");
    if (!v.is_string()) throw ConfigError("data.raw." + k + ": expected a path string");
    c.data.raw[k] = v.get<std::string>();
  }
  if (!d.at("synthetic").is_null()) {
    const json& s = d.at("synthetic");
    const std::string p = "data.synthetic";
    SyntheticTaskSpec spec;
    spec.tasks = positive<std::size_t>(s, "tasks", p);
    spec.classes = positive<std::size_t>(s, "classes", p);
    spec.dim = positive<Index>(s, "dim", p);
    spec.separation = get<double>(s, "separation", p);
    spec.within_std = get<double>(s, "within_std", p);
    if (spec.separation < 0 || spec.within_std < 0) throw ConfigError(p + ": separation and within_std must be >= 0");
    spec.train_per_class = positive<std::size_t>(s, "train_per_class", p);
    spec.validation_per_class = positive<std::size_t>(s, "validation_per_class", p);
    spec.seed = get<std::uint64_t>(s, "seed", p);
    c.data.synthetic = spec;
  }

  const json& t = j.at("test");
  c.test.task = get<std::string>(t, "task", "test");
  if (c.test.task.empty()) throw ConfigError("test.task must not be empty");
  c.test.intents = get<std::vector<std::string>>(t, "intents", "test");

  const json& e = j.at("encoder");
  c.encoder.kind = wrap("encoder.kind", [&] { return parse_encoder_kind(get<std::string>(e, "kind", "encoder")); });
  c.encoder.char_dim = positive<Index>(e, "char_dim", "encoder");
  c.encoder.kernel = positive<Index>(e, "kernel", "encoder");
  if (c.encoder.kernel % 2 == 0) throw ConfigError("encoder.kernel must be odd");
  c.encoder.filters1 = positive<Index>(e, "filters1", "encoder");
  c.encoder.filters2 = positive<Index>(e, "filters2", "encoder");
  c.encoder.pool = positive<Index>(e, "pool", "encoder");
  c.encoder.dropout = probability(e, "dropout", "encoder");
  c.encoder.word_dim = positive<Index>(e, "word_dim", "encoder");
  c.encoder.hidden = positive<Index>(e, "hidden", "encoder");
  c.encoder.mean_output_dim = positive<Index>(e, "mean_output_dim", "encoder");

  const json& h = j.at("head");
  c.head.hidden = positive<Index>(h, "hidden", "head");
  c.head.output_dim = positive<Index>(h, "output_dim", "head");
  c.head.dropout = probability(h, "dropout", "head");
  c.head.distance = wrap("head.distance", [&] { return parse_distance(get<std::string>(h, "distance", "head")); });

  const json& a = j.at("augment");
  c.augment.method = wrap("augment.method", [&] { return parse_augment_method(get<std::string>(a, "method", "augment")); });
  c.augment.space = wrap("augment.space", [&] { return parse_augment_space(get<std::string>(a, "space", "augment")); });
  c.augment.ratio = get<double>(a, "ratio", "augment");
  if (!(c.augment.ratio > 0 && c.augment.ratio <= 1)) throw ConfigError("augment.ratio must lie in (0, 1]");
  c.augment.noise_variance_fraction = get<double>(a, "noise_variance_fraction", "augment");
  if (!(c.augment.noise_variance_fraction >= 0)) throw ConfigError("augment.noise_variance_fraction must be >= 0");
  c.augment.hallucinator_dropout = probability(a, "hallucinator_dropout", "augment");
  c.augment.identity_layout =
      wrap("augment.identity_layout", [&] { return parse_identity_layout(get<std::string>(a, "identity_layout", "augment")); });

  const json& s = j.at("schedule");
  c.schedule.phase1_episodes = positive<std::size_t>(s, "phase1_episodes", "schedule");
  c.schedule.phase2_episodes = get<std::size_t>(s, "phase2_episodes", "schedule");
  c.schedule.k = positive<std::size_t>(s, "k", "schedule");
  c.schedule.q = positive<std::size_t>(s, "q", "schedule");
  c.schedule.adam = read_adam(s.at("adam"), "schedule.adam");
  c.schedule.checkpoint_every = positive<std::size_t>(s, "checkpoint_every", "schedule");
  c.schedule.log_every = positive<std::size_t>(s, "log_every", "schedule");
  if (c.schedule.checkpoint_every % c.schedule.log_every != 0) {
    throw ConfigError("schedule.checkpoint_every must be a multiple of schedule.log_every");
  }
  if (c.augment.method == AugmentMethod::hallucinate && c.schedule.phase2_episodes == 0) {
    throw ConfigError("schedule.phase2_episodes must be positive when augment.method is hallucinate");
  }

  const json& ct = j.at("conv_tl");
  c.conv_tl.epochs = get<std::size_t>(ct, "epochs", "conv_tl");
  c.conv_tl.batch = positive<std::size_t>(ct, "batch", "conv_tl");
  c.conv_tl.finetune_steps = get<std::size_t>(ct, "finetune_steps", "conv_tl");
  c.conv_tl.finetune_batch_cap = positive<std::size_t>(ct, "finetune_batch_cap", "conv_tl");
  c.conv_tl.hidden = positive<Index>(ct, "hidden", "conv_tl");
  c.conv_tl.dropout = probability(ct, "dropout", "conv_tl");
  c.conv_tl.adam = read_adam(ct.at("adam"), "conv_tl.adam");

  const json& ev = j.at("eval");
  c.eval.trials = get<std::size_t>(ev, "trials", "eval");
  if (c.eval.trials < 2) throw ConfigError("eval.trials must be >= 2");
  c.eval.k = get<std::vector<std::size_t>>(ev, "k", "eval");
  if (c.eval.k.empty()) throw ConfigError("eval.k must list at least one shot count");
  for (auto k : c.eval.k)
    if (k == 0) throw ConfigError("eval.k entries must be positive");
  c.eval.seed_base = get<std::uint64_t>(ev, "seed_base", "eval");

  c.output_dir = get<std::string>(j, "output_dir", "config");
  c.seed = get<std::uint64_t>(j, "seed", "config");
  c.schedule.seed = c.seed;

  if (!c.data.synthetic && c.data.corpora.empty()) throw ConfigError("data.corpora must not be empty");
  if (c.method == Method::conv_tl && c.augment.method != AugmentMethod::none) {
    throw ConfigError("augment.method must be none for method conv_tl");
  }
  return c;
}

json parse_override_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return json(text);
  }
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text, const std::vector<std::string>& overrides) {
  json doc = to_document(RunConfig{});
  json user;
  try {
    user = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  merge_strict(doc, user, "");
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + ov + "' is not key=value");
    const std::string key = ov.substr(0, eq);
    json patch = parse_override_value(ov.substr(eq + 1));
    std::string rest = key;
    std::vector<std::string> parts;
    for (std::size_t pos; (pos = rest.find('.')) != std::string::npos; rest = rest.substr(pos + 1)) {
      parts.push_back(rest.substr(0, pos));
    }
    parts.push_back(rest);
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = json{{*it, patch}};
    merge_strict(doc, patch, "");
  }
  try {
    return from_document(doc);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), overrides);
}

std::string to_json(const RunConfig& cfg) { return to_document(cfg).dump(2); }

std::string config_digest(const RunConfig& cfg) {
  const std::string text = to_json(cfg);
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ModelConfig model_config(const RunConfig& cfg) {
  ModelConfig m;
  m.text = !cfg.data.synthetic.has_value();
  m.encoder = cfg.encoder;
  m.head = cfg.head;
  m.augment = cfg.augment;
  m.head.input_dim = m.text ? cfg.encoder.output_dim() : cfg.data.synthetic->dim;
  return m;
}

std::string model_signature(const RunConfig& cfg) {
  const ModelConfig m = model_config(cfg);
  json j{{"text", m.text}, {"head", head_json(m.head)}, {"input_dim", m.head.input_dim},
         {"method", to_string(cfg.method)}, {"augment", augment_json(m.augment)}};
  if (m.text) j["encoder"] = encoder_json(m.encoder);
  if (cfg.method == Method::conv_tl) j["conv_tl"] = {{"hidden", cfg.conv_tl.hidden}, {"dropout", cfg.conv_tl.dropout}};
  return j.dump();
}

}  // namespace protoda
