/*
 * Copyright 2026 The ehoi Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "config.hpp"

#include <fstream>
#include <sstream>
#include <type_traits>

#include "ehoi/error.hpp"

namespace ehoi::cli {

namespace {

const char* to_string(metrics::ApIntegration m) {
  return m == metrics::ApIntegration::AllPoint ? "all_point" : "eleven_point";
}

metrics::ApIntegration parse_integration(const std::string& s) {
  if (s == "all_point") return metrics::ApIntegration::AllPoint;
  if (s == "eleven_point") return metrics::ApIntegration::ElevenPoint;
  throw validation_error("integration: unknown value '" + s + "' (all_point, eleven_point)");
}

template <typename T>
bool has_type(const json& j) {
  if constexpr (std::is_same_v<T, bool>) return j.is_boolean();
  else if constexpr (std::is_integral_v<T>) return j.is_number_integer() && (std::is_signed_v<T> || j >= 0);
  else if constexpr (std::is_floating_point_v<T>) return j.is_number();
  else if constexpr (std::is_same_v<T, std::string>) return j.is_string();
  else {
    if (!j.is_array()) return false;
    for (const auto& e : j)
      if (!has_type<typename T::value_type>(e)) return false;
    return true;
  }
}

template <typename T>
const char* type_name() {
  if constexpr (std::is_same_v<T, bool>) return "a boolean";
  else if constexpr (std::is_integral_v<T>) return std::is_signed_v<T> ? "an integer" : "a non-negative integer";
  else if constexpr (std::is_floating_point_v<T>) return "a number";
  else if constexpr (std::is_same_v<T, std::string>) return "a string";
  else return "an array";
}

struct Writer {
  json& j;

  template <typename T>
  void operator()(const char* key, const T& v) {
    j[key] = v;
  }
  template <typename E, typename Parse>
  void choice(const char* key, const E& v, Parse&&) {
    j[key] = to_string(v);
  }
  template <typename F>
  void section(const char* key, F&& f) {
    json sub = json::object();
    Writer w{sub};
    f(w);
    j[key] = std::move(sub);
  }
};

struct Reader {
  const json& j;
  std::string path;

  template <typename T>
  void operator()(const char* key, T& v) {
    if (!j.contains(key)) return;
    if (!has_type<T>(j[key]))
      throw validation_error("config: " + path + key + ": expected " + type_name<T>() + ", got " + j[key].dump());
    v = j[key].template get<T>();
  }
  template <typename E, typename Parse>
  void choice(const char* key, E& v, Parse&& parse) {
    if (!j.contains(key)) return;
    if (!j[key].is_string()) throw validation_error("config: " + path + key + ": expected a string");
    try {
      v = parse(j[key].template get<std::string>());
    } catch (const Error& e) {
      throw validation_error("config: " + path + key + ": " + e.what());
    }
  }
  template <typename F>
  void section(const char* key, F&& f) {
    if (!j.contains(key)) return;
    Reader r{j[key], path + key + "."};
    f(r);
  }
};

template <typename V, typename S>
void visit_scene(V& v, S& c) {
  v("width", c.width);
  v("height", c.height);
  v("min_objects", c.min_objects);
  v("max_objects", c.max_objects);
  v("min_hands", c.min_hands);
  v("max_hands", c.max_hands);
  v("glove_probability", c.glove_probability);
  v("contact_probability", c.contact_probability);
  v("num_categories", c.num_categories);
  v("hand_length", c.hand_length);
  v("min_object_size", c.min_object_size);
  v("max_object_size", c.max_object_size);
  v("skin_hue_min", c.skin_hue_min);
  v("skin_hue_max", c.skin_hue_max);
  v("glove_hue_min", c.glove_hue_min);
  v("glove_hue_max", c.glove_hue_max);
  v("color_jitter", c.color_jitter);
  v("noise_sigma", c.noise_sigma);
}

template <typename V, typename C>
void visit(V& v, C& c) {
  v("seed", c.seed);
  v("out_dir", c.out_dir);
  v.section("data", [&](auto& s) {
    s("synth", c.data.synth);
    s("real", c.data.real);
    s("eval", c.data.eval);
    s("eval_split", c.data.eval_split);
    s("val_split", c.data.val_split);
  });
  v.section("synth", [&](auto& s) {
    visit_scene(s, c.synth.scene);
    s("n_train", c.synth.n_train);
    s("n_val", c.synth.n_val);
    s("n_test", c.synth.n_test);
  });
  v.section("augval", [&](auto& s) {
    s("original_dir", c.augval.original_dir);
    s("augmented_dir", c.augval.augmented_dir);
    s("annotations", c.augval.annotations);
    s("threshold", c.augval.threshold);
    s("margin", c.augval.margin);
    s("mock_augment", c.augval.mock_augment);
    s.section("ssim", [&](auto& t) {
      t("dynamic_range", c.augval.ssim.dynamic_range);
      t("k1", c.augval.ssim.k1);
      t("k2", c.augval.ssim.k2);
      t("window", c.augval.ssim.window);
      t("sigma", c.augval.ssim.sigma);
    });
  });
  v.section("model", [&](auto& s) {
    auto& m = c.model;
    s("pyramid_dim", m.pyramid_dim);
    s("head_hidden", m.head_hidden);
    s("roi_size", m.roi_size);
    s("keypoint_roi", m.keypoint_roi);
    s("keypoint_grid", m.keypoint_grid);
    s("keypoint_sigma", m.keypoint_sigma);
    s("keypoint_margin", m.keypoint_margin);
    s("crop_size", m.crop_size);
    s("crop_margin", m.crop_margin);
    s("num_categories", m.num_categories);
    s.choice("late_fusion", m.late_fusion, net::parse_late_fusion);
    s("fusion_weight", m.fusion_weight);
    s("detector_threshold", m.detector_threshold);
    s("detector_max_per_class", m.detector_max_per_class);
  });
  v.section("train", [&](auto& s) {
    auto& t = c.train;
    s.choice("regime", c.regime, net::parse_regime);
    s("epochs", t.epochs);
    s("batch_size", t.batch_size);
    s("learning_rate", t.learning_rate);
    s("momentum", t.momentum);
    s("weight_decay", t.weight_decay);
    s("lr_steps", t.lr_steps);
    s("lr_gamma", t.lr_gamma);
    s("grad_clip", t.grad_clip);
    s("train_detector", t.train_detector);
    s("finetune_epochs", t.finetune_epochs);
    s("finetune_learning_rate", t.finetune_learning_rate);
    s("finetune_lr_steps", t.finetune_lr_steps);
    s("real_fraction", t.real_fraction);
    s.section("loss", [&](auto& l) {
      l("smooth_l1_beta", t.loss.smooth_l1_beta);
      l("focal_alpha", t.loss.focal_alpha);
      l("focal_beta", t.loss.focal_beta);
    });
  });
  v.section("eval", [&](auto& s) {
    s("iou_threshold", c.eval.metrics.iou_threshold);
    s.choice("integration", c.eval.metrics.integration, parse_integration);
    s.choice("mode", c.eval.mode, net::parse_infer_mode);
    s("checkpoint", c.eval.checkpoint);
    s("predictions", c.eval.predictions);
    s("compare", c.eval.compare);
  });
  v.section("bench", [&](auto& s) {
    s("checkpoint", c.bench.checkpoint);
    s.choice("mode", c.bench.mode, net::parse_infer_mode);
    s("warmup", c.bench.warmup);
    s("frames", c.bench.frames);
  });
}

void check_keys(const json& doc, const json& schema, const std::string& path) {
  for (const auto& [key, value] : doc.items()) {
    if (!schema.contains(key)) throw validation_error("config: unknown key '" + path + key + "'");
    if (schema[key].is_object()) {
      if (!value.is_object()) throw validation_error("config: " + path + key + ": expected an object");
      check_keys(value, schema[key], path + key + ".");
    }
  }
}

json parse_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return text;
  }
}

/// Sets `dotted` in doc; string-typed fields take the raw text, others parse it as JSON.
void set_path(json& doc, const json& schema, const std::string& dotted, const std::string& text) {
  json* node = &doc;
  const json* shape = &schema;
  std::stringstream parts(dotted);
  std::string part, seen;
  while (std::getline(parts, part, '.')) {
    if (!shape->is_object() || !shape->contains(part)) throw validation_error("config: unknown key '" + seen + part + "'");
    shape = &(*shape)[part];
    node = &(*node)[part];
    seen += part + ".";
  }
  if (shape->is_object()) throw validation_error("config: --" + dotted + ": is a section, not a field");
  *node = shape->is_string() ? json(text) : parse_value(text);
}

}  // namespace

void RunConfig::validate() const {
  synth.scene.validate();
  model.validate();
  train.validate();
  eval.metrics.validate();
  augval.ssim.validate();
  if (synth.n_train < 0 || synth.n_val < 0 || synth.n_test < 0)
    throw validation_error("config: synth.n_train/n_val/n_test: must be non-negative");
  if (!(augval.threshold >= -1 && augval.threshold <= 1)) throw validation_error("config: augval.threshold: must lie in [-1, 1]");
  if (augval.margin < 0) throw validation_error("config: augval.margin: must be non-negative");
  if (bench.warmup < 0 || bench.frames <= 0) throw validation_error("config: bench.warmup/frames: must be >= 0 / > 0");
  if (out_dir.empty()) throw validation_error("config: out_dir: must not be empty");
}

json to_json(const RunConfig& c) {
  json j = json::object();
  Writer w{j};
  visit(w, c);
  return j;
}

RunConfig load_config(const std::filesystem::path& file, const std::vector<std::string>& overrides) {
  const json schema = to_json(RunConfig{});
  json doc = schema;
  if (!file.empty()) {
    std::ifstream in(file);
    if (!in) throw io_error("cannot read config " + file.string());
    json user;
    try {
      user = json::parse(in);
    } catch (const json::exception& e) {
      throw validation_error("config: " + file.string() + ": " + e.what());
    }
    if (!user.is_object()) throw validation_error("config: " + file.string() + ": top level must be an object");
    check_keys(user, schema, "");
    doc.merge_patch(user);
  }
  for (std::size_t i = 0; i < overrides.size(); ++i) {
    std::string key = overrides[i], value;
    if (key.rfind("--", 0) != 0) throw validation_error("config: unexpected argument '" + key + "'");
    key = key.substr(2);
    if (const auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key = key.substr(0, eq);
    } else {
      if (i + 1 >= overrides.size()) throw validation_error("config: --" + key + " needs a value");
      value = overrides[++i];
    }
    set_path(doc, schema, key, value);
  }
  RunConfig c;
  Reader r{doc, ""};
  visit(r, c);
  c.validate();
  return c;
}

}  // namespace ehoi::cli
