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

#include "ehoi/annotations.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "ehoi/error.hpp"
#include "json.hpp"

namespace ehoi {

using json = nlohmann::ordered_json;

namespace {

std::string field_error(const std::string& image_id, const std::string& field, const std::string& what) {
  return "invariant violation: image '" + image_id + "' field '" + field + "': " + what;
}

template <typename T>
T get_field(const json& j, const char* key, const std::string& ctx) {
  auto it = j.find(key);
  if (it == j.end()) throw validation_error("malformed document: " + ctx + " missing '" + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw validation_error("malformed document: " + ctx + " field '" + key + "': " + e.what());
  }
}

BBox parse_bbox(const json& j, const std::string& ctx) {
  if (!j.is_array() || j.size() != 4) throw validation_error("malformed document: " + ctx + " bbox must have 4 numbers");
  for (const auto& v : j)
    if (!v.is_number()) throw validation_error("malformed document: " + ctx + " bbox must have 4 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

json bbox_json(const BBox& b) { return json::array({b.x_min, b.y_min, b.x_max, b.y_max}); }

std::optional<std::string> optional_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw validation_error(std::string("malformed document: '") + key + "' must be a string or null");
  return it->get<std::string>();
}

template <typename E>
E parse_enum(const json& j, const char* key, const char* a, const char* b, E ea, E eb, const std::string& ctx) {
  const auto s = get_field<std::string>(j, key, ctx);
  if (s == a) return ea;
  if (s == b) return eb;
  throw validation_error("malformed document: " + ctx + " '" + key + "' has unknown value '" + s + "'");
}

/// Clamps into the image; records a warning when anything moved.
BBox clamp_with_warning(const BBox& b, const ImageRecord& rec, const std::string& what,
                        std::vector<ParseWarning>& warnings) {
  const BBox c = b.clamped(rec.width, rec.height);
  if (!(c == b)) warnings.push_back({rec.image_id, what + " bbox clamped to image bounds"});
  return c;
}

ImageRecord parse_record(const json& j, std::vector<ParseWarning>& warnings) {
  if (!j.is_object()) throw validation_error("malformed document: image entry is not an object");
  ImageRecord rec;
  rec.image_id = get_field<std::string>(j, "image_id", "image");
  const std::string ctx = "image '" + rec.image_id + "'";
  rec.width = get_field<int>(j, "width", ctx);
  rec.height = get_field<int>(j, "height", ctx);
  rec.rgb_path = get_field<std::string>(j, "rgb_path", ctx);
  rec.depth_path = optional_string(j, "depth_path");
  rec.mask_path = optional_string(j, "mask_path");
  if (rec.width <= 0 || rec.height <= 0) throw validation_error(field_error(rec.image_id, "width/height", "must be positive"));

  for (const auto& hj : get_field<json>(j, "hands", ctx)) {
    HandAnnotation h;
    h.id = get_field<int>(hj, "id", ctx + " hand");
    const std::string hctx = ctx + " hand " + std::to_string(h.id);
    h.bbox = clamp_with_warning(parse_bbox(get_field<json>(hj, "bbox", hctx), hctx), rec, "hand " + std::to_string(h.id),
                                warnings);
    h.side = parse_enum(hj, "side", "left", "right", HandSide::Left, HandSide::Right, hctx);
    h.contact = parse_enum(hj, "contact", "no_contact", "contact", ContactState::NoContact, ContactState::Contact, hctx);
    h.glove = parse_enum(hj, "glove", "no_glove", "glove", GloveStatus::NoGlove, GloveStatus::Glove, hctx);
    const auto kps = get_field<json>(hj, "keypoints", hctx);
    if (!kps.is_array() || kps.size() != kNumKeypoints)
      throw validation_error(field_error(rec.image_id, "hands[" + std::to_string(h.id) + "].keypoints",
                                         "expected exactly 21 keypoints"));
    for (int k = 0; k < kNumKeypoints; ++k) {
      const auto& kp = kps[k];
      if (!kp.is_array() || kp.size() != 3 || !kp[0].is_number() || !kp[1].is_number())
        throw validation_error("malformed document: " + hctx + " keypoint must be [x, y, visible]");
      h.keypoints[k].x = kp[0].get<double>();
      h.keypoints[k].y = kp[1].get<double>();
      if (kp[2].is_boolean())
        h.keypoints[k].visible = kp[2].get<bool>();
      else if (kp[2].is_number_integer())
        h.keypoints[k].visible = kp[2].get<int>() != 0;
      else
        throw validation_error("malformed document: " + hctx + " keypoint visibility must be bool");
    }
    if (auto it = hj.find("offset"); it != hj.end() && !it->is_null()) {
      if (!it->is_array() || it->size() != 3) throw validation_error("malformed document: " + hctx + " offset must be [v_x, v_y, m]");
      h.offset = OffsetVector{(*it)[0].get<double>(), (*it)[1].get<double>(), (*it)[2].get<double>()};
    }
    if (auto it = hj.find("active_object_id"); it != hj.end() && !it->is_null()) h.active_object_id = it->get<int>();
    rec.hands.push_back(h);
  }
  for (const auto& oj : get_field<json>(j, "objects", ctx)) {
    ObjectAnnotation o;
    o.id = get_field<int>(oj, "id", ctx + " object");
    const std::string octx = ctx + " object " + std::to_string(o.id);
    o.bbox = clamp_with_warning(parse_bbox(get_field<json>(oj, "bbox", octx), octx), rec, "object " + std::to_string(o.id),
                                warnings);
    o.category_id = get_field<int>(oj, "category_id", octx);
    o.active = get_field<bool>(oj, "active", octx);
    rec.objects.push_back(o);
  }
  return rec;
}

std::vector<Category> parse_categories(const json& doc) {
  std::vector<Category> cats;
  for (const auto& cj : get_field<json>(doc, "categories", "document"))
    cats.push_back({get_field<int>(cj, "id", "category"), get_field<std::string>(cj, "name", "category")});
  for (std::size_t i = 0; i < cats.size(); ++i)
    if (cats[i].id != static_cast<int>(i))
      throw validation_error("invariant violation: category ids must be dense from 0 in file order");
  return cats;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

const ObjectAnnotation* ImageRecord::find_object(int id) const {
  for (const auto& o : objects)
    if (o.id == id) return &o;
  return nullptr;
}

const Split* Dataset::find_split(const std::string& name) const {
  for (const auto& s : splits)
    if (s.name == name) return &s;
  return nullptr;
}

std::size_t Dataset::num_images() const {
  std::size_t n = 0;
  for (const auto& s : splits) n += s.images.size();
  return n;
}

void validate_record(const ImageRecord& rec, const std::vector<Category>& categories) {
  const auto& id = rec.image_id;
  std::set<int> ids;
  for (const auto& h : rec.hands)
    if (!ids.insert(h.id).second) throw validation_error(field_error(id, "id", "duplicate id " + std::to_string(h.id)));
  for (const auto& o : rec.objects)
    if (!ids.insert(o.id).second) throw validation_error(field_error(id, "id", "duplicate id " + std::to_string(o.id)));

  std::set<int> referenced;
  for (const auto& h : rec.hands) {
    const std::string f = "hands[" + std::to_string(h.id) + "]";
    if (!h.bbox.valid()) throw validation_error(field_error(id, f + ".bbox", "degenerate or non-finite box"));
    for (int k = 0; k < kNumKeypoints; ++k) {
      const auto& kp = h.keypoints[k];
      if (!std::isfinite(kp.x) || !std::isfinite(kp.y))
        throw validation_error(field_error(id, f + ".keypoints", "non-finite coordinate"));
      if (kp.visible && (kp.x < 0 || kp.y < 0 || kp.x > rec.width || kp.y > rec.height))
        throw validation_error(field_error(id, f + ".keypoints", "visible keypoint outside the image"));
    }
    const bool contact = h.contact == ContactState::Contact;
    if (h.offset.has_value() != h.active_object_id.has_value())
      throw validation_error(field_error(id, f + ".offset", "offset and active_object_id must be jointly present"));
    if (contact != h.active_object_id.has_value())
      throw validation_error(field_error(id, f + ".active_object_id", "present iff contact"));
    if (h.offset) {
      const auto& o = *h.offset;
      if (!std::isfinite(o.v_x) || !std::isfinite(o.v_y) || !std::isfinite(o.m) || o.m < 0)
        throw validation_error(field_error(id, f + ".offset", "magnitude must be finite and non-negative"));
      if (o.m > 0 && std::abs(o.v_x * o.v_x + o.v_y * o.v_y - 1.0) > 1e-6)
        throw validation_error(field_error(id, f + ".offset", "direction is not unit length"));
      if (o.m == 0 && (o.v_x != 1.0 || o.v_y != 0.0))
        throw validation_error(field_error(id, f + ".offset", "zero magnitude requires direction (1, 0)"));
    }
    if (h.active_object_id) {
      const auto* obj = rec.find_object(*h.active_object_id);
      if (!obj) throw validation_error(field_error(id, f + ".active_object_id", "dangling active_object_id"));
      if (!obj->active) throw validation_error(field_error(id, f + ".active_object_id", "references an inactive object"));
      referenced.insert(obj->id);
    }
  }
  for (const auto& o : rec.objects) {
    const std::string f = "objects[" + std::to_string(o.id) + "]";
    if (!o.bbox.valid()) throw validation_error(field_error(id, f + ".bbox", "degenerate or non-finite box"));
    if (o.category_id < 0 || o.category_id >= static_cast<int>(categories.size()))
      throw validation_error(field_error(id, f + ".category_id", "not in the category table"));
    if (o.active != referenced.contains(o.id))
      throw validation_error(field_error(id, f + ".active", "active must be true iff some hand references the object"));
  }
}

ParseResult parse_split_text(const std::string& text, const std::string& split_name) {
  ParseResult result;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw validation_error(std::string("malformed document: ") + e.what());
  }
  if (!doc.is_object()) throw validation_error("malformed document: top level must be an object");
  result.dataset.categories = parse_categories(doc);
  Split split{split_name, {}};
  std::set<std::string> seen;
  for (const auto& ij : get_field<json>(doc, "images", "document")) {
    auto rec = parse_record(ij, result.warnings);
    if (!seen.insert(rec.image_id).second) throw validation_error("invariant violation: duplicate image_id '" + rec.image_id + "'");
    validate_record(rec, result.dataset.categories);
    split.images.push_back(std::move(rec));
  }
  result.dataset.splits.push_back(std::move(split));
  return result;
}

ParseResult parse_dataset(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  if (!fs::exists(path)) throw io_error("dataset path '" + path.string() + "' does not exist");
  if (!fs::is_directory(path)) {
    auto r = parse_split_text(read_file(path), path.stem().string());
    r.dataset.root = path.parent_path();
    return r;
  }
  ParseResult result;
  result.dataset.root = path;
  bool any = false;
  for (const char* name : {"train", "val", "test"}) {
    const auto file = path / (std::string(name) + ".json");
    if (!fs::exists(file)) continue;
    auto r = parse_split_text(read_file(file), name);
    if (any && r.dataset.categories != result.dataset.categories)
      throw validation_error("invariant violation: split '" + std::string(name) + "' has a different category table");
    result.dataset.categories = r.dataset.categories;
    result.dataset.splits.push_back(std::move(r.dataset.splits.front()));
    result.warnings.insert(result.warnings.end(), r.warnings.begin(), r.warnings.end());
    any = true;
  }
  if (!any) throw io_error("directory '" + path.string() + "' holds no train/val/test.json");
  return result;
}

std::string write_split_text(const std::vector<Category>& categories, const Split& split) {
  json doc;
  doc["categories"] = json::array();
  for (const auto& c : categories) doc["categories"].push_back({{"id", c.id}, {"name", c.name}});
  doc["images"] = json::array();
  for (const auto& r : split.images) {
    json ij;
    ij["image_id"] = r.image_id;
    ij["width"] = r.width;
    ij["height"] = r.height;
    ij["rgb_path"] = r.rgb_path;
    ij["depth_path"] = r.depth_path ? json(*r.depth_path) : json(nullptr);
    ij["mask_path"] = r.mask_path ? json(*r.mask_path) : json(nullptr);
    ij["hands"] = json::array();
    for (const auto& h : r.hands) {
      json hj;
      hj["id"] = h.id;
      hj["bbox"] = bbox_json(h.bbox);
      hj["side"] = to_string(h.side);
      hj["contact"] = to_string(h.contact);
      hj["glove"] = to_string(h.glove);
      hj["keypoints"] = json::array();
      for (const auto& kp : h.keypoints) hj["keypoints"].push_back(json::array({kp.x, kp.y, kp.visible}));
      hj["offset"] = h.offset ? json::array({h.offset->v_x, h.offset->v_y, h.offset->m}) : json(nullptr);
      hj["active_object_id"] = h.active_object_id ? json(*h.active_object_id) : json(nullptr);
      ij["hands"].push_back(std::move(hj));
    }
    ij["objects"] = json::array();
    for (const auto& o : r.objects)
      ij["objects"].push_back({{"id", o.id}, {"bbox", bbox_json(o.bbox)}, {"category_id", o.category_id}, {"active", o.active}});
    doc["images"].push_back(std::move(ij));
  }
  return doc.dump() + "\n";
}

void write_split_file(const std::vector<Category>& categories, const Split& split, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write '" + path.string() + "'");
  out << write_split_text(categories, split);
  if (!out) throw io_error("write failed for '" + path.string() + "'");
}

DatasetStats compute_stats(const std::vector<ImageRecord>& images, const std::string& label) {
  DatasetStats s;
  s.split = label;
  std::int64_t gloved = 0;
  for (const auto& r : images) {
    ++s.n_images;
    s.n_objects += static_cast<std::int64_t>(r.objects.size());
    for (const auto& h : r.hands) {
      ++s.n_hands;
      (h.side == HandSide::Left ? s.n_left : s.n_right)++;
      if (h.contact == ContactState::Contact) ++s.n_ehois;
      if (h.glove == GloveStatus::Glove) ++gloved;
    }
  }
  if (s.n_hands > 0) s.glove_fraction = std::round(10000.0 * static_cast<double>(gloved) / static_cast<double>(s.n_hands)) / 100.0;
  return s;
}

std::vector<DatasetStats> compute_stats(const Dataset& dataset, bool per_split) {
  std::vector<DatasetStats> out;
  std::vector<ImageRecord> all;
  for (const auto& split : dataset.splits) {
    if (per_split) out.push_back(compute_stats(split.images, split.name));
    all.insert(all.end(), split.images.begin(), split.images.end());
  }
  out.push_back(compute_stats(all, "total"));
  return out;
}

std::string format_stats_table(const std::vector<DatasetStats>& stats) {
  std::ostringstream os;
  int name_w = 10;
  for (const auto& s : stats) name_w = std::max(name_w, static_cast<int>(s.split.size()) + 2);
  os << std::left << std::setw(name_w) << "split" << std::right << std::setw(10) << "#images" << std::setw(10) << "#hands"
     << std::setw(10) << "#EHOIs" << std::setw(8) << "#left" << std::setw(8) << "#right" << std::setw(10) << "#objects"
     << std::setw(10) << "%glove" << "\n";
  for (const auto& s : stats) {
    os << std::left << std::setw(name_w) << s.split << std::right << std::setw(10) << s.n_images << std::setw(10) << s.n_hands
       << std::setw(10) << s.n_ehois << std::setw(8) << s.n_left << std::setw(8) << s.n_right << std::setw(10)
       << s.n_objects << std::setw(10) << std::fixed << std::setprecision(2) << s.glove_fraction << "\n";
  }
  return os.str();
}

OffsetVector derive_offset(const BBox& hand, const BBox& object, double width, double height) {
  const Point2d d = object.center() - hand.center();
  const double dist = d.norm();
  if (dist == 0.0) return {1.0, 0.0, 0.0};
  return {d.x() / dist, d.y() / dist, dist / std::hypot(width, height)};
}

Point2d project_interaction_point(const BBox& hand, const OffsetVector& offset, double width, double height) {
  const double reach = offset.m * std::hypot(width, height);
  return hand.center() + reach * Point2d(offset.v_x, offset.v_y);
}

const char* to_string(HandSide s) { return s == HandSide::Left ? "left" : "right"; }
const char* to_string(ContactState s) { return s == ContactState::Contact ? "contact" : "no_contact"; }
const char* to_string(GloveStatus s) { return s == GloveStatus::Glove ? "glove" : "no_glove"; }

}  // namespace ehoi
