#include "dio/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "json_io.hpp"

namespace dio {

ConfigError::ConfigError(std::string field, const std::string& message)
    : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}

namespace detail {

json number(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

namespace {

// Strict object reader: every key must be consumed, types are checked.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_.empty() ? "<root>" : where_, "expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!has(key)) return;
    out = as<T>(j_.at(key), path(key));
  }

  const json* child(const std::string& key) {
    seen_.insert(key);
    return has(key) ? &j_.at(key) : nullptr;
  }

  void skip(const std::string& key) { seen_.insert(key); }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError(path(k), "unknown key");
  }

  std::string path(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

 private:
  template <class T>
  static T as(const json& v, const std::string& field) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(field, "expected a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(field, "expected a string");
      return v.get<std::string>();
    } else if constexpr (std::is_same_v<T, double>) {
      if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        throw ConfigError(field, "expected a number");
      }
      if (!v.is_number()) throw ConfigError(field, "expected a number");
      return v.get<double>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(field, "expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_unsigned()) return static_cast<T>(v.get<std::uint64_t>());
        if (v.get<std::int64_t>() < 0) throw ConfigError(field, "must be >= 0");
      }
      return static_cast<T>(v.get<std::int64_t>());
    } else if constexpr (std::is_same_v<T, std::vector<int>>) {
      if (!v.is_array()) throw ConfigError(field, "expected an array of integers");
      std::vector<int> out;
      for (const auto& e : v) out.push_back(as<int>(e, field));
      return out;
    } else if constexpr (std::is_same_v<T, Shape>) {
      if (!v.is_array() || v.empty()) throw ConfigError(field, "expected a non-empty array");
      Shape out;
      for (const auto& e : v) out.push_back(as<std::size_t>(e, field));
      return out;
    } else {
      static_assert(sizeof(T) == 0, "unsupported config type");
    }
  }

  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace

json to_json(const AttackSpec& s) {
  json j = {{"kind", to_string(s.kind)},
            {"eps", number(s.eps)},
            {"step", s.step},
            {"iters", s.iters},
            {"seed", s.seed},
            {"random_start", s.random_start},
            {"literal_uniform_start", s.literal_uniform_start}};
  if (s.kind == AttackKind::cw_l2)
    j["cw"] = {{"c", s.cw.c},
               {"kappa", s.cw.kappa},
               {"lr", s.cw.lr},
               {"binary_search_steps", s.cw.binary_search_steps},
               {"max_inner_iters", s.cw.max_inner_iters}};
  if (s.kind == AttackKind::adapt_a2) j["head"] = s.head;
  if (s.kind == AttackKind::transfer) j["transfer_inner"] = to_string(s.transfer_inner);
  if (s.kind == AttackKind::square_l2) j["p_init"] = s.square_p_init;
  return j;
}

AttackSpec attack_from_json(const json& j, const std::string& where) {
  Reader r(j, where);
  std::string kind = "pgd";
  r.get("kind", kind);
  AttackSpec s;
  try {
    s = default_attack(parse_attack_kind(kind));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(r.path("kind"), e.what());
  }
  r.get("eps", s.eps);
  r.get("step", s.step);
  r.get("iters", s.iters);
  r.get("seed", s.seed);
  r.get("random_start", s.random_start);
  r.get("literal_uniform_start", s.literal_uniform_start);
  r.get("head", s.head);
  r.get("p_init", s.square_p_init);
  std::string inner = to_string(s.transfer_inner);
  r.get("transfer_inner", inner);
  try {
    s.transfer_inner = parse_attack_kind(inner);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(r.path("transfer_inner"), e.what());
  }
  if (const json* cw = r.child("cw")) {
    Reader c(*cw, r.path("cw"));
    c.get("c", s.cw.c);
    c.get("kappa", s.cw.kappa);
    c.get("lr", s.cw.lr);
    c.get("binary_search_steps", s.cw.binary_search_steps);
    c.get("max_inner_iters", s.cw.max_inner_iters);
    c.finish();
  }
  r.finish();
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where, e.what());
  }
  return s;
}

json to_json(const ArchSpec& a) {
  return {{"kind", a.kind},
          {"input_shape", a.input_shape},
          {"hidden", a.hidden},
          {"features", a.features},
          {"classes", a.classes},
          {"heads", a.heads},
          {"feature_relu", a.feature_relu},
          {"conv1_channels", a.conv1_channels},
          {"conv2_channels", a.conv2_channels}};
}

ArchSpec arch_from_json(const json& j, const std::string& where) {
  Reader r(j, where);
  ArchSpec a;
  r.get("kind", a.kind);
  r.get("input_shape", a.input_shape);
  r.get("hidden", a.hidden);
  r.get("features", a.features);
  r.get("classes", a.classes);
  r.get("heads", a.heads);
  r.get("feature_relu", a.feature_relu);
  r.get("conv1_channels", a.conv1_channels);
  r.get("conv2_channels", a.conv2_channels);
  r.finish();
  if (a.kind != "mlp" && a.kind != "cnn") throw ConfigError(r.path("kind"), "expected mlp or cnn");
  return a;
}

json to_json(const DataSpec& d) {
  json j = {{"kind", d.kind}};
  if (d.kind == "gaussians") {
    const auto& g = d.gaussians;
    j.update({{"classes", g.classes},
              {"dim", g.dim},
              {"train_per_class", g.per_class},
              {"test_per_class", d.test_per_class},
              {"separation", g.separation},
              {"sigma", g.sigma},
              {"center", g.center},
              {"rotate", g.rotate},
              {"rotation_seed", g.rotation_seed},
              {"seed", g.seed},
              {"test_seed", d.test_seed}});
  } else {
    j.update({{"train_images", d.train_images},
              {"train_labels", d.train_labels},
              {"test_images", d.test_images},
              {"test_labels", d.test_labels},
              {"num_classes", d.num_classes}});
  }
  return j;
}

namespace {

DataSpec data_from_json(const json& j, const std::string& where) {
  Reader r(j, where);
  DataSpec d;
  r.get("kind", d.kind);
  auto& g = d.gaussians;
  r.get("classes", g.classes);
  r.get("dim", g.dim);
  r.get("train_per_class", g.per_class);
  r.get("test_per_class", d.test_per_class);
  r.get("separation", g.separation);
  r.get("sigma", g.sigma);
  r.get("center", g.center);
  r.get("rotate", g.rotate);
  r.get("rotation_seed", g.rotation_seed);
  r.get("seed", g.seed);
  r.get("test_seed", d.test_seed);
  r.get("train_images", d.train_images);
  r.get("train_labels", d.train_labels);
  r.get("test_images", d.test_images);
  r.get("test_labels", d.test_labels);
  r.get("num_classes", d.num_classes);
  r.finish();
  if (d.kind != "gaussians" && d.kind != "idx") throw ConfigError(r.path("kind"), "expected gaussians or idx");
  if (d.kind == "idx" && (d.train_images.empty() || d.train_labels.empty() || d.test_images.empty() ||
                          d.test_labels.empty()))
    throw ConfigError(where, "idx data needs train_images, train_labels, test_images, test_labels");
  if (d.kind == "gaussians" && g.classes < 2) throw ConfigError(r.path("classes"), "must be >= 2");
  return d;
}

}  // namespace

json to_json(const TrainConfig& c) {
  json arch = to_json(c.arch);
  arch.erase("heads");
  json j = {{"name", c.name},
            {"seed", c.seed},
            {"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"lr", c.lr.initial},
            {"lr_decay", c.lr.decay},
            {"lr_milestones", c.lr.milestones},
            {"momentum", c.momentum},
            {"weight_decay", c.weight_decay},
            {"heads", c.arch.heads},
            {"alpha", c.weights.alpha},
            {"beta", c.weights.beta},
            {"tau", c.weights.tau},
            {"adv_train", c.adv_train},
            {"adv", to_json(c.adv_spec)},
            {"select_best", c.select_best},
            {"best_attack", to_json(c.best_spec)},
            {"best_eval_samples", c.best_eval_samples},
            {"arch", arch},
            {"data", to_json(c.data)}};
  return j;
}

TrainConfig config_from_json(const json& j) {
  Reader r(j, "");
  TrainConfig c;
  r.skip("preset");
  r.get("name", c.name);
  r.get("seed", c.seed);
  r.get("epochs", c.epochs);
  r.get("batch_size", c.batch_size);
  r.get("lr", c.lr.initial);
  r.get("lr_decay", c.lr.decay);
  r.get("lr_milestones", c.lr.milestones);
  r.get("momentum", c.momentum);
  r.get("weight_decay", c.weight_decay);
  r.get("alpha", c.weights.alpha);
  r.get("beta", c.weights.beta);
  const bool has_tau = r.has("tau");
  r.get("tau", c.weights.tau);
  r.get("adv_train", c.adv_train);
  r.get("select_best", c.select_best);
  r.get("best_eval_samples", c.best_eval_samples);
  if (const json* a = r.child("arch")) c.arch = arch_from_json(*a, "arch");
  r.get("heads", c.arch.heads);
  if (const json* a = r.child("adv")) c.adv_spec = attack_from_json(*a, "adv");
  if (const json* a = r.child("best_attack")) c.best_spec = attack_from_json(*a, "best_attack");
  if (const json* d = r.child("data")) c.data = data_from_json(*d, "data");
  r.finish();

  if (c.weights.beta > 0 && !has_tau) throw ConfigError("tau", "required when beta > 0");
  if (c.data.kind == "gaussians") {
    c.arch.input_shape = Shape{c.data.gaussians.dim};
    c.arch.classes = c.data.gaussians.classes;
  }
  try {
    c.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    const auto colon = msg.find(':');
    throw ConfigError(colon == std::string::npos ? "<config>" : msg.substr(0, colon),
                      colon == std::string::npos ? msg : msg.substr(colon + 2));
  }
  return c;
}

}  // namespace detail

// ---------------------------------------------------------------------------

namespace {

using detail::json;

json synth_base() {
  return json::parse(R"({
    "name": "dio-vanilla-synth",
    "seed": 8,
    "epochs": 30,
    "batch_size": 50,
    "lr": 0.01,
    "lr_decay": 0.1,
    "lr_milestones": [22, 27],
    "momentum": 0.9,
    "weight_decay": 0.0005,
    "heads": 4,
    "alpha": 0.1,
    "beta": 0.1,
    "tau": 2.0,
    "adv_train": false,
    "adv": {"kind": "pgd", "eps": 0.05, "step": 0.0125, "iters": 10},
    "select_best": true,
    "best_attack": {"kind": "pgd", "eps": 0.05, "step": 0.0125, "iters": 20},
    "best_eval_samples": 500,
    "arch": {"kind": "mlp", "hidden": 64, "features": 128, "feature_relu": false},
    "data": {"kind": "gaussians", "classes": 4, "dim": 20, "train_per_class": 500,
             "test_per_class": 500, "separation": 0.45, "sigma": 0.03, "center": 0.5,
             "rotate": true, "rotation_seed": 7, "seed": 1, "test_seed": 2}
  })");
}

json make_preset(const std::string& name) {
  json j = synth_base();
  j["name"] = name;
  auto single_head = [&] {
    j["heads"] = 1;
    j["alpha"] = 0.0;
    j["beta"] = 0.0;
    j.erase("tau");
  };
  if (name == "dio-vanilla-synth") return j;
  if (name == "baseline-vanilla-synth") {
    single_head();
    return j;
  }
  if (name == "at-dio-synth") {
    j["adv_train"] = true;
    return j;
  }
  if (name == "at-baseline-synth") {
    single_head();
    j["adv_train"] = true;
    return j;
  }
  throw ConfigError("preset", "unknown preset '" + name + "'");
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"dio-vanilla-synth", "baseline-vanilla-synth", "at-dio-synth", "at-baseline-synth"};
}

std::string preset_json(const std::string& name) { return make_preset(name).dump(2); }

TrainConfig preset(const std::string& name) { return detail::config_from_json(make_preset(name)); }

std::optional<std::uint64_t> seed_from_env() {
  const char* v = std::getenv("DIO_SEED");
  if (!v || !*v) return std::nullopt;
  const std::string s(v);
  if (s.find_first_not_of("0123456789") != std::string::npos)
    throw ConfigError("DIO_SEED", "expected an unsigned integer, got '" + s + "'");
  try {
    return std::stoull(s);
  } catch (const std::exception&) {
    throw ConfigError("DIO_SEED", "out of range");
  }
}

namespace {

json parse_document(const std::string& text, const std::string& what) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(what, std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError(what, "expected a JSON object");
  return doc;
}

}  // namespace

TrainConfig parse_config(const std::string& json_text, const std::string& overrides_json,
                         bool apply_env) {
  const json doc = parse_document(json_text, "<config>");
  const json over = parse_document(overrides_json, "<flags>");
  std::string name = "dio-vanilla-synth";
  for (const json* d : {&doc, &over})
    if (d->contains("preset")) {
      if (!(*d)["preset"].is_string()) throw ConfigError("preset", "expected a string");
      name = (*d)["preset"].get<std::string>();
    }
  json merged = make_preset(name);
  merged.merge_patch(doc);
  if (apply_env)
    if (auto s = seed_from_env()) merged["seed"] = *s;
  merged.merge_patch(over);
  merged.erase("preset");
  return detail::config_from_json(merged);
}

TrainConfig parse_config(const std::string& json_text, bool apply_env) {
  return parse_config(json_text, "{}", apply_env);
}

TrainConfig load_config(const std::filesystem::path& path, bool apply_env) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), apply_env);
}

std::string config_to_json(const TrainConfig& config) { return detail::to_json(config).dump(2); }

std::string attack_to_json(const AttackSpec& spec) { return detail::to_json(spec).dump(); }

AttackSpec attack_from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<attack>", std::string("malformed JSON: ") + e.what());
  }
  return detail::attack_from_json(j, "");
}

}  // namespace dio
