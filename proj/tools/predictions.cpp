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

#include "predictions.hpp"

#include <fstream>

#include "ehoi/error.hpp"

namespace ehoi::cli {

namespace {

json box_json(const BBox& b) { return json::array({b.x_min, b.y_min, b.x_max, b.y_max}); }

BBox box_from(const json& j) {
  if (!j.is_array() || j.size() != 4) throw validation_error("predictions: bbox must be [x_min, y_min, x_max, y_max]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

template <typename E>
E pick(const json& j, const char* key, const char* a, E ea, const char* b, E eb) {
  const std::string s = j.at(key).get<std::string>();
  if (s == a) return ea;
  if (s == b) return eb;
  throw validation_error(std::string("predictions: ") + key + ": unknown value '" + s + "'");
}

}  // namespace

json predictions_to_json(const std::vector<metrics::ImagePrediction>& predictions) {
  json images = json::array();
  for (const auto& ip : predictions) {
    json hands = json::array();
    for (const auto& h : ip.hands)
      hands.push_back({{"bbox", box_json(h.bbox)},
                       {"confidence", h.confidence},
                       {"side", to_string(h.side)},
                       {"contact", to_string(h.contact)},
                       {"glove", to_string(h.glove)},
                       {"object_bbox", h.object_bbox ? box_json(*h.object_bbox) : json(nullptr)},
                       {"object_category", h.object_category ? json(*h.object_category) : json(nullptr)}});
    images.push_back({{"image_id", ip.image_id}, {"hands", hands}});
  }
  return {{"images", images}};
}

std::vector<metrics::ImagePrediction> predictions_from_json(const json& doc) {
  std::vector<metrics::ImagePrediction> out;
  try {
    for (const auto& im : doc.at("images")) {
      metrics::ImagePrediction ip;
      ip.image_id = im.at("image_id").get<std::string>();
      for (const auto& h : im.at("hands")) {
        metrics::PredictedHand p;
        p.bbox = box_from(h.at("bbox"));
        p.confidence = h.at("confidence").get<double>();
        p.side = pick(h, "side", "left", HandSide::Left, "right", HandSide::Right);
        p.contact = pick(h, "contact", "no_contact", ContactState::NoContact, "contact", ContactState::Contact);
        p.glove = pick(h, "glove", "no_glove", GloveStatus::NoGlove, "glove", GloveStatus::Glove);
        if (h.contains("object_bbox") && !h["object_bbox"].is_null()) p.object_bbox = box_from(h["object_bbox"]);
        if (h.contains("object_category") && !h["object_category"].is_null())
          p.object_category = h["object_category"].get<int>();
        ip.hands.push_back(p);
      }
      out.push_back(std::move(ip));
    }
  } catch (const json::exception& e) {
    throw validation_error(std::string("predictions: ") + e.what());
  }
  return out;
}

std::vector<metrics::ImagePrediction> read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot read predictions " + path.string());
  try {
    return predictions_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw validation_error("predictions: " + path.string() + ": " + e.what());
  }
}

}  // namespace ehoi::cli
