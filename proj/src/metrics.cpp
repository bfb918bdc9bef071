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

#include "ehoi/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_map>

#include "ehoi/error.hpp"
#include "json.hpp"

namespace ehoi::metrics {

namespace {

struct Ranked {
  const PredictedHand* pred;
  std::size_t image;  // index into ground truth, or npos-like for unknown ids
};

auto sort_key(const Ranked& r) {
  const auto& p = *r.pred;
  const BBox ob = p.object_bbox.value_or(BBox{});
  return std::make_tuple(-p.confidence, r.image, p.bbox.x_min, p.bbox.y_min, p.bbox.x_max, p.bbox.y_max,
                         static_cast<int>(p.side), static_cast<int>(p.contact), static_cast<int>(p.glove),
                         p.object_bbox.has_value(), ob.x_min, ob.y_min, ob.x_max, ob.y_max, p.object_category.value_or(-1));
}

/// Ground-truth entry the greedy matcher assigns predictions to.
struct GtEntry {
  const HandAnnotation* hand;
  std::optional<BBox> object_bbox;
};

using GtIndex = std::vector<std::vector<GtEntry>>;  // per image

std::unordered_map<std::string, std::size_t> image_lookup(const std::vector<ImageRecord>& gt) {
  std::unordered_map<std::string, std::size_t> m;
  for (std::size_t i = 0; i < gt.size(); ++i) m.emplace(gt[i].image_id, i);
  return m;
}

bool attrs_agree(const PredictedHand& p, const HandAnnotation& g, unsigned required) {
  if ((required & kSide) && p.side != g.side) return false;
  if ((required & kState) && p.contact != g.contact) return false;
  if ((required & kGlove) && p.glove != g.glove) return false;
  return true;
}

/// Ranks predictions and greedily marks true positives.
template <typename IsTp>
ApResult ranked_ap(std::vector<Ranked> ranked, const GtIndex& gt, std::size_t n_gt, const EvalConfig& cfg, IsTp&& is_tp) {
  std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) { return sort_key(a) < sort_key(b); });
  std::vector<std::vector<bool>> used(gt.size());
  for (std::size_t i = 0; i < gt.size(); ++i) used[i].assign(gt[i].size(), false);

  ApResult res;
  res.n_gt = n_gt;
  res.n_pred = ranked.size();
  std::size_t tp = 0;
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    const auto& r = ranked[k];
    bool hit = false;
    if (r.image < gt.size()) {
      double best = -1;
      std::size_t best_j = 0;
      for (std::size_t j = 0; j < gt[r.image].size(); ++j) {
        if (used[r.image][j]) continue;
        const double v = iou(r.pred->bbox, gt[r.image][j].hand->bbox);
        if (v > best) best = v, best_j = j;
      }
      if (best >= cfg.iou_threshold) {
        used[r.image][best_j] = true;
        hit = is_tp(*r.pred, gt[r.image][best_j]);
      }
    }
    tp += hit ? 1 : 0;
    res.curve.precision.push_back(static_cast<double>(tp) / static_cast<double>(k + 1));
    res.curve.recall.push_back(n_gt ? static_cast<double>(tp) / static_cast<double>(n_gt) : 0.0);
  }
  if (n_gt == 0)
    res.ap = ranked.empty() ? 100.0 : 0.0;
  else
    res.ap = average_precision(res.curve.precision, res.curve.recall, cfg.integration);
  return res;
}

std::vector<Ranked> flatten(const std::vector<ImagePrediction>& preds, const std::vector<ImageRecord>& gt) {
  const auto lookup = image_lookup(gt);
  std::vector<Ranked> out;
  for (const auto& ip : preds) {
    auto it = lookup.find(ip.image_id);
    const std::size_t idx = it == lookup.end() ? gt.size() : it->second;
    for (const auto& h : ip.hands) out.push_back({&h, idx});
  }
  return out;
}

}  // namespace

void EvalConfig::validate() const {
  if (!(iou_threshold > 0 && iou_threshold < 1)) throw validation_error("eval config: iou_threshold must be in (0, 1)");
}

double average_precision(const std::vector<double>& precision, const std::vector<double>& recall, ApIntegration mode) {
  if (mode == ApIntegration::ElevenPoint) {
    double sum = 0;
    for (int t = 0; t <= 10; ++t) {
      const double r = t / 10.0;
      double p = 0;
      for (std::size_t i = 0; i < recall.size(); ++i)
        if (recall[i] >= r - 1e-12) p = std::max(p, precision[i]);
      sum += p;
    }
    return 100.0 * sum / 11.0;
  }
  std::vector<double> mrec{0.0}, mpre{0.0};
  mrec.insert(mrec.end(), recall.begin(), recall.end());
  mpre.insert(mpre.end(), precision.begin(), precision.end());
  mrec.push_back(1.0);
  mpre.push_back(0.0);
  for (std::size_t i = mpre.size() - 1; i > 0; --i) mpre[i - 1] = std::max(mpre[i - 1], mpre[i]);
  double ap = 0;
  for (std::size_t i = 1; i < mrec.size(); ++i)
    if (mrec[i] != mrec[i - 1]) ap += (mrec[i] - mrec[i - 1]) * mpre[i];
  return 100.0 * ap;
}

ApResult compound_ap(const std::vector<ImagePrediction>& predictions, const std::vector<ImageRecord>& ground_truth,
                     unsigned required, const EvalConfig& config) {
  config.validate();
  GtIndex gt(ground_truth.size());
  std::size_t n_gt = 0;
  for (std::size_t i = 0; i < ground_truth.size(); ++i)
    for (const auto& h : ground_truth[i].hands) {
      gt[i].push_back({&h, std::nullopt});
      ++n_gt;
    }
  return ranked_ap(flatten(predictions, ground_truth), gt, n_gt, config,
                   [&](const PredictedHand& p, const GtEntry& g) { return attrs_agree(p, *g.hand, required); });
}

PairApTable pair_map(const std::vector<ImagePrediction>& predictions, const std::vector<ImageRecord>& ground_truth,
                     unsigned required, const EvalConfig& config) {
  config.validate();
  std::set<int> categories;
  for (const auto& rec : ground_truth)
    for (const auto& h : rec.hands)
      if (h.active_object_id)
        if (const auto* o = rec.find_object(*h.active_object_id)) categories.insert(o->category_id);
  std::set<int> gt_categories = categories;
  for (const auto& ip : predictions)
    for (const auto& h : ip.hands)
      if (h.contact == ContactState::Contact && h.object_bbox && h.object_category) categories.insert(*h.object_category);

  const auto all = flatten(predictions, ground_truth);
  PairApTable table;
  double sum = 0;
  for (int cat : categories) {
    GtIndex gt(ground_truth.size());
    std::size_t n_gt = 0;
    for (std::size_t i = 0; i < ground_truth.size(); ++i)
      for (const auto& h : ground_truth[i].hands) {
        if (!h.active_object_id) continue;
        const auto* o = ground_truth[i].find_object(*h.active_object_id);
        if (!o || o->category_id != cat) continue;
        gt[i].push_back({&h, o->bbox});
        ++n_gt;
      }
    std::vector<Ranked> preds;
    for (const auto& r : all)
      if (r.pred->contact == ContactState::Contact && r.pred->object_bbox && r.pred->object_category == cat)
        preds.push_back(r);
    auto res = ranked_ap(std::move(preds), gt, n_gt, config, [&](const PredictedHand& p, const GtEntry& g) {
      return iou(*p.object_bbox, *g.object_bbox) >= config.iou_threshold && attrs_agree(p, *g.hand, required);
    });
    if (gt_categories.contains(cat)) sum += res.ap;
    table.per_category.emplace(cat, std::move(res));
  }
  if (gt_categories.empty()) {
    const bool any_pred = categories.size() > 0;
    table.map = any_pred ? 0.0 : 100.0;
  } else {
    table.map = sum / static_cast<double>(gt_categories.size());
  }
  return table;
}

MetricsReport evaluate(const std::vector<ImagePrediction>& predictions, const std::vector<ImageRecord>& ground_truth,
                       const EvalConfig& config) {
  config.validate();
  std::set<std::string> gt_ids, pred_ids;
  for (const auto& r : ground_truth) gt_ids.insert(r.image_id);
  for (const auto& p : predictions)
    if (!pred_ids.insert(p.image_id).second) throw validation_error("split mismatch: duplicate prediction entry for '" + p.image_id + "'");
  if (gt_ids != pred_ids) throw validation_error("split mismatch: prediction and ground-truth image ids differ");

  MetricsReport r;
  const auto hand = compound_ap(predictions, ground_truth, kNone, config);
  r.ap_hand = hand.ap;
  r.hand_curve = hand.curve;
  r.n_gt_hands = hand.n_gt;
  r.n_pred_hands = hand.n_pred;
  r.ap_hand_side = compound_ap(predictions, ground_truth, kSide, config).ap;
  r.ap_hand_glove = compound_ap(predictions, ground_truth, kGlove, config).ap;
  r.ap_hand_state = compound_ap(predictions, ground_truth, kState, config).ap;
  const auto obj = map_hand_obj(predictions, ground_truth, config);
  const auto all = map_hand_all(predictions, ground_truth, config);
  r.map_hand_obj = obj.map;
  r.map_hand_all = all.map;
  for (const auto& [cat, res] : obj.per_category) {
    r.per_category[cat] = {res.ap, all.per_category.at(cat).ap};
    r.n_gt_pairs += res.n_gt;
    r.n_pred_pairs += res.n_pred;
  }
  return r;
}

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["ap_hand"] = ap_hand;
  j["ap_hand_side"] = ap_hand_side;
  j["ap_hand_glove"] = ap_hand_glove;
  j["ap_hand_state"] = ap_hand_state;
  j["map_hand_obj"] = map_hand_obj;
  j["map_hand_all"] = map_hand_all;
  j["per_category"] = nlohmann::ordered_json::array();
  for (const auto& [cat, v] : per_category)
    j["per_category"].push_back({{"category_id", cat}, {"ap_hand_obj", v.first}, {"ap_hand_all", v.second}});
  j["counts"] = {{"gt_hands", n_gt_hands}, {"pred_hands", n_pred_hands}, {"gt_pairs", n_gt_pairs}, {"pred_pairs", n_pred_pairs}};
  return j.dump(2) + "\n";
}

std::string MetricsReport::to_table() const {
  std::ostringstream os;
  const char* heads[] = {"AP Hand", "AP Hand+Side", "AP Hand+Glove", "AP Hand+State", "mAP Hand+Obj", "mAP Hand+All"};
  const double vals[] = {ap_hand, ap_hand_side, ap_hand_glove, ap_hand_state, map_hand_obj, map_hand_all};
  for (const char* h : heads) os << std::setw(15) << h;
  os << "\n" << std::fixed << std::setprecision(2);
  for (double v : vals) os << std::setw(15) << v;
  os << "\n";
  return os.str();
}

}  // namespace ehoi::metrics
