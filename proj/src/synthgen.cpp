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

#include "ehoi/synthgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

#include "ehoi/error.hpp"
#include "ehoi/raster.hpp"
#include "ehoi/rng.hpp"

namespace ehoi::synth {

namespace {

constexpr int kMaxRetries = 32;

struct Rgb {
  double r, g, b;
};

Rgb hsv(double h_deg, double s, double v) {
  const double h = std::fmod(std::fmod(h_deg, 360.0) + 360.0, 360.0) / 60.0;
  const double c = v * s, x = c * (1 - std::abs(std::fmod(h, 2.0) - 1)), m = v - c;
  Rgb out{0, 0, 0};
  switch (static_cast<int>(h)) {
    case 0: out = {c, x, 0}; break;
    case 1: out = {x, c, 0}; break;
    case 2: out = {0, c, x}; break;
    case 3: out = {0, x, c}; break;
    case 4: out = {x, 0, c}; break;
    default: out = {c, 0, x}; break;
  }
  return {255 * (out.r + m), 255 * (out.g + m), 255 * (out.b + m)};
}

double hue_of(const std::uint8_t* p) {
  const double r = p[0], g = p[1], b = p[2];
  const double mx = std::max({r, g, b}), mn = std::min({r, g, b}), d = mx - mn;
  if (d == 0) return 0;
  double h;
  if (mx == r)
    h = std::fmod((g - b) / d, 6.0);
  else if (mx == g)
    h = (b - r) / d + 2;
  else
    h = (r - g) / d + 4;
  h *= 60;
  return h < 0 ? h + 360 : h;
}

// Right-hand template viewed from the back, wrist at the origin, fingers
// toward -y, lengths in units of the hand length. Left hands mirror x.
using Pose = std::array<Point2d, kNumKeypoints>;

const Pose kOpenPose = {{
    {0.00, 0.00},
    {-0.15, -0.10}, {-0.29, -0.22}, {-0.38, -0.34}, {-0.45, -0.45},
    {-0.14, -0.45}, {-0.16, -0.65}, {-0.17, -0.78}, {-0.18, -0.90},
    {-0.02, -0.48}, {-0.02, -0.70}, {-0.02, -0.85}, {-0.02, -1.00},
    {0.09, -0.46}, {0.11, -0.65}, {0.12, -0.78}, {0.13, -0.90},
    {0.19, -0.40}, {0.24, -0.55}, {0.26, -0.65}, {0.28, -0.75},
}};

// Pinch grip: thumb and index tips meet, remaining fingers curled.
const Pose kGraspPose = {{
    {0.00, 0.00},
    {-0.15, -0.10}, {-0.27, -0.24}, {-0.31, -0.42}, {-0.29, -0.60},
    {-0.14, -0.45}, {-0.19, -0.62}, {-0.24, -0.68}, {-0.27, -0.64},
    {-0.02, -0.48}, {-0.05, -0.64}, {-0.08, -0.68}, {-0.09, -0.61},
    {0.09, -0.46}, {0.08, -0.60}, {0.05, -0.63}, {0.04, -0.57},
    {0.19, -0.40}, {0.19, -0.52}, {0.17, -0.55}, {0.15, -0.50},
}};

struct HandGeometry {
  Pose keypoints;  // image frame
  BBox bbox;
  double finger_radius = 1;
  double length = 0;
};

HandGeometry place_hand(const Pose& pose, HandSide side, double angle, double length, const Point2d& wrist,
                        Rng& rng) {
  HandGeometry g;
  g.length = length;
  g.finger_radius = std::max(1.0, 0.055 * length);
  const double c = std::cos(angle), s = std::sin(angle);
  const double mirror = side == HandSide::Left ? -1.0 : 1.0;
  double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
  for (int k = 0; k < kNumKeypoints; ++k) {
    Point2d p = pose[k];
    if (k != kWrist) p += Point2d(rng.uniform(-0.015, 0.015), rng.uniform(-0.015, 0.015));
    p.x() *= mirror;
    const Point2d q = wrist + length * Point2d(c * p.x() - s * p.y(), s * p.x() + c * p.y());
    g.keypoints[k] = q;
    x0 = std::min(x0, q.x()), y0 = std::min(y0, q.y());
    x1 = std::max(x1, q.x()), y1 = std::max(y1, q.y());
  }
  const double pad = g.finger_radius + 0.5;
  g.bbox = {x0 - pad, y0 - pad, x1 + pad, y1 + pad};
  return g;
}

/// Keypoint geometry relative to the wrist for a given pose, angle, length (no jitter).
Point2d pose_point(const Pose& pose, int k, HandSide side, double angle, double length) {
  const double c = std::cos(angle), s = std::sin(angle);
  Point2d p = pose[k];
  if (side == HandSide::Left) p.x() = -p.x();
  return length * Point2d(c * p.x() - s * p.y(), s * p.x() + c * p.y());
}

bool inside_image(const BBox& b, int w, int h) { return b.x_min >= 0 && b.y_min >= 0 && b.x_max <= w && b.y_max <= h; }

bool overlaps(const BBox& a, const BBox& b) {
  return a.x_min < b.x_max && b.x_min < a.x_max && a.y_min < b.y_max && b.y_min < a.y_max;
}

struct PlacedObject {
  ObjectAnnotation ann;
  double depth = 0;
  Rgb color{};
  int pattern_phase = 0;
};

struct PlacedHand {
  HandAnnotation ann;
  HandGeometry geo;
  double depth = 0;
  Rgb color{};
  int active_index = -1;
};

class Canvas {
 public:
  Canvas(int w, int h) : rgb(w, h), depth(w, h), mask(w, h), w_(w), h_(h), value_(static_cast<std::size_t>(w) * h * 3) {}

  void put(int x, int y, const Rgb& c, double d, int instance) {
    double* v = &value_[3 * (static_cast<std::size_t>(y) * w_ + x)];
    v[0] = c.r, v[1] = c.g, v[2] = c.b;
    depth.at(x, y) = encode_depth(d);
    mask.at(x, y) = static_cast<std::uint16_t>(instance);
  }
  void put_background(int x, int y, const Rgb& c, double d) { put(x, y, c, d, 0); }

  /// Applies per-scene gains and sensor noise, then quantizes.
  void finish(const std::array<double, 3>& gains, double noise_sigma, Rng& rng) {
    for (std::size_t i = 0; i < value_.size(); ++i) {
      double v = value_[i] * gains[i % 3];
      if (noise_sigma > 0) v += noise_sigma * rng.normal();
      rgb.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
    }
  }

  int width() const { return w_; }
  int height() const { return h_; }

  RgbImage rgb;
  Gray16Image depth, mask;

 private:
  int w_, h_;
  std::vector<double> value_;
};

void draw_object(Canvas& cv, const PlacedObject& o) {
  const BBox& b = o.ann.bbox;
  const int id = o.ann.id + 1;
  const Point2d c = b.center();
  const double rx = b.width() / 2, ry = b.height() / 2;
  // Category-specific shape; stripe texture keyed on category.
  auto plot = [&](int x, int y) {
    const bool stripe = ((x + y + o.pattern_phase) / 3) % 2 == 0;
    const double k = stripe ? 1.0 : 0.8;
    cv.put(x, y, {o.color.r * k, o.color.g * k, o.color.b * k}, o.depth, id);
  };
  const int W = cv.width(), H = cv.height();
  switch (o.ann.category_id % 10) {
    case 0: raster::fill_rect(b, W, H, plot); break;
    case 1: raster::fill_ellipse(c, rx, ry, W, H, plot); break;
    case 2: {
      const std::array<Point2d, 3> tri{Point2d(c.x(), b.y_min), Point2d(b.x_max, b.y_max), Point2d(b.x_min, b.y_max)};
      raster::fill_polygon(tri, W, H, plot);
      break;
    }
    case 3: {
      const std::array<Point2d, 4> dia{Point2d(c.x(), b.y_min), Point2d(b.x_max, c.y()), Point2d(c.x(), b.y_max),
                                       Point2d(b.x_min, c.y())};
      raster::fill_polygon(dia, W, H, plot);
      break;
    }
    case 4: {  // ring
      raster::fill_ellipse(c, rx, ry, W, H, [&](int x, int y) {
        const double dx = (x + 0.5 - c.x()) / rx, dy = (y + 0.5 - c.y()) / ry;
        if (dx * dx + dy * dy >= 0.3) plot(x, y);
      });
      break;
    }
    case 5: {  // cross
      raster::fill_rect({b.x_min, c.y() - ry / 3, b.x_max, c.y() + ry / 3}, W, H, plot);
      raster::fill_rect({c.x() - rx / 3, b.y_min, c.x() + rx / 3, b.y_max}, W, H, plot);
      break;
    }
    case 6: {
      std::array<Point2d, 6> hex;
      for (int i = 0; i < 6; ++i) {
        const double a = std::numbers::pi / 3 * i;
        hex[i] = c + Point2d(rx * std::cos(a), ry * std::sin(a));
      }
      raster::fill_polygon(hex, W, H, plot);
      break;
    }
    case 7: {  // handle + head
      raster::fill_rect({b.x_min, c.y() - ry / 4, b.x_max, c.y() + ry / 4}, W, H, plot);
      raster::fill_rect({b.x_max - rx / 2, b.y_min, b.x_max, b.y_max}, W, H, plot);
      break;
    }
    case 8: {  // rounded bar
      raster::fill_capsule(Point2d(b.x_min + ry / 2, c.y()), Point2d(b.x_max - ry / 2, c.y()), ry / 2, W, H, plot);
      raster::fill_rect({b.x_min + ry / 2, b.y_min, b.x_max - ry / 2, b.y_max}, W, H, plot);
      break;
    }
    default: {  // frame
      raster::fill_rect(b, W, H, [&](int x, int y) {
        if (x + 0.5 < b.x_min + rx / 2 || x + 0.5 > b.x_max - rx / 2 || y + 0.5 < b.y_min + ry / 2 ||
            y + 0.5 > b.y_max - ry / 2)
          plot(x, y);
      });
      break;
    }
  }
}

void draw_hand(Canvas& cv, const PlacedHand& h) {
  const auto& kp = h.geo.keypoints;
  const int id = h.ann.id + 1;
  const int W = cv.width(), H = cv.height();
  const bool gloved = h.ann.glove == GloveStatus::Glove;
  const Point2d wrist = kp[kWrist];
  const double cuff = 0.14 * h.geo.length;
  auto plot = [&](int x, int y) {
    const Point2d p(x + 0.5, y + 0.5);
    // Gloves get a darker cuff band around the wrist.
    const double k = (gloved && (p - wrist).norm() < cuff) ? 0.6 : 1.0;
    cv.put(x, y, {h.color.r * k, h.color.g * k, h.color.b * k}, h.depth, id);
  };
  const std::array<Point2d, 6> palm{kp[kWrist], kp[kThumbCmc], kp[kIndexMcp], kp[kMiddleMcp], kp[kRingMcp], kp[kPinkyMcp]};
  raster::fill_polygon(palm, W, H, plot);
  const double r = h.geo.finger_radius;
  raster::fill_capsule(kp[kWrist], kp[kThumbCmc], r, W, H, plot);
  raster::fill_capsule(kp[kWrist], kp[kPinkyMcp], r, W, H, plot);
  for (int f = 0; f < 5; ++f) {
    const int base = 1 + 4 * f;
    if (f > 0) raster::fill_capsule(kp[kWrist], kp[base], r, W, H, plot);
    for (int j = 0; j < 3; ++j) raster::fill_capsule(kp[base + j], kp[base + j + 1], r, W, H, plot);
  }
}

ObjectAnnotation make_object_box(const SceneConfig& cfg, Rng& rng, int id) {
  const double dim = std::min(cfg.width, cfg.height);
  const double w = dim * rng.uniform(cfg.min_object_size, cfg.max_object_size);
  const double h = dim * rng.uniform(cfg.min_object_size, cfg.max_object_size);
  const double x = rng.uniform(2.0, cfg.width - 2.0 - w), y = rng.uniform(2.0, cfg.height - 2.0 - h);
  ObjectAnnotation o;
  o.id = id;
  o.bbox = {x, y, x + w, y + h};
  o.category_id = rng.uniform_int(0, cfg.num_categories - 1);
  return o;
}

// Object hues avoid the skin and glove ranges.
constexpr std::array<double, 10> kCategoryHue = {0, 215, 130, 275, 185, 320, 245, 165, 200, 350};

struct Attempt {
  bool ok = false;
  std::vector<PlacedObject> objects;
  std::vector<PlacedHand> hands;
};

Attempt try_layout(const SceneConfig& cfg, Rng& rng, int n_objects, const std::vector<HandSide>& sides,
                   const std::vector<bool>& wants_contact) {
  Attempt at;
  const double gap = 4;
  for (int i = 0; i < n_objects; ++i) {
    bool placed = false;
    for (int t = 0; t < kMaxRetries && !placed; ++t) {
      ObjectAnnotation o = make_object_box(cfg, rng, i);
      const BBox& grown = o.bbox;
      bool clash = false;
      for (const auto& other : at.objects) {
        const BBox ob{other.ann.bbox.x_min - gap, other.ann.bbox.y_min - gap, other.ann.bbox.x_max + gap,
                      other.ann.bbox.y_max + gap};
        clash |= overlaps(grown, ob);
      }
      if (clash) continue;
      PlacedObject po;
      po.ann = o;
      po.depth = rng.uniform(0.35, 0.55);
      const int cat = o.category_id % static_cast<int>(kCategoryHue.size());
      po.color = cat == 8 ? hsv(0, 0, rng.uniform(0.35, 0.6)) : hsv(kCategoryHue[cat] + rng.uniform(-8, 8), rng.uniform(0.6, 0.9), rng.uniform(0.45, 0.85));
      po.pattern_phase = rng.uniform_int(0, 5);
      at.objects.push_back(po);
      placed = true;
    }
    if (!placed) return at;
  }

  const double dim = std::min(cfg.width, cfg.height);
  std::vector<int> order(sides.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  // Contact hands first so free hands can avoid them.
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return wants_contact[a] > wants_contact[b]; });
  std::vector<PlacedHand> placed_hands(sides.size());
  for (int hi : order) {
    const HandSide side = sides[hi];
    const bool contact = wants_contact[hi];
    bool placed = false;
    for (int t = 0; t < kMaxRetries && !placed; ++t) {
      const double length = dim * cfg.hand_length * rng.uniform(0.85, 1.15);
      // Right hands lean left, left hands lean right.
      const double lean = rng.uniform(-0.15, 0.5) * (side == HandSide::Right ? -1.0 : 1.0);
      PlacedHand ph;
      Point2d wrist;
      int target = -1;
      if (contact) {
        std::vector<int> free_objects;
        for (int oi = 0; oi < static_cast<int>(at.objects.size()); ++oi) {
          bool taken = false;
          for (const auto& other : placed_hands) taken |= other.active_index == oi;
          if (!taken) free_objects.push_back(oi);
        }
        if (free_objects.empty()) return at;
        target = free_objects[rng.uniform_int(0, static_cast<int>(free_objects.size()) - 1)];
        const BBox& ob = at.objects[target].ann.bbox;
        const Point2d aim = ob.center() + Point2d(rng.uniform(-0.2, 0.2) * ob.width(), rng.uniform(-0.2, 0.2) * ob.height());
        const Point2d pinch = 0.5 * (pose_point(kGraspPose, kThumbTip, side, lean, length) +
                                     pose_point(kGraspPose, kIndexTip, side, lean, length));
        wrist = aim - pinch;
      } else {
        wrist = Point2d(rng.uniform(0, cfg.width), rng.uniform(0.4 * cfg.height, cfg.height));
      }
      ph.geo = place_hand(contact ? kGraspPose : kOpenPose, side, lean, length, wrist, rng);
      if (!inside_image(ph.geo.bbox, cfg.width, cfg.height)) continue;
      bool clash = false;
      for (const auto& other : placed_hands)
        if (other.geo.length > 0) clash |= overlaps(ph.geo.bbox.dilated(0.1), other.geo.bbox);
      for (int oi = 0; oi < static_cast<int>(at.objects.size()); ++oi) {
        if (oi == target) continue;
        clash |= overlaps(ph.geo.bbox.dilated(0.1), at.objects[oi].ann.bbox);
      }
      if (contact) {
        const BBox& ob = at.objects[target].ann.bbox;
        clash |= !ob.contains(ph.geo.keypoints[kThumbTip]) || !ob.contains(ph.geo.keypoints[kIndexTip]);
        for (const auto& other : placed_hands)
          if (other.geo.length > 0 && other.active_index < 0) clash |= overlaps(other.geo.bbox.dilated(0.1), ob);
      } else {
        for (const auto& other : placed_hands)
          if (other.active_index >= 0) clash |= overlaps(ph.geo.bbox.dilated(0.1), at.objects[other.active_index].ann.bbox);
      }
      if (clash) continue;
      ph.active_index = target;
      ph.depth = contact ? at.objects[target].depth + 0.08 : rng.uniform(0.70, 0.90);
      placed_hands[hi] = std::move(ph);
      placed = true;
    }
    if (!placed) return at;
  }
  at.hands = std::move(placed_hands);
  at.ok = true;
  return at;
}

void render(const SceneConfig& cfg, Attempt& layout, const std::vector<HandSide>& sides, const std::vector<bool>& glove,
            Rng& rng, RenderedScene& scene) {
  // Background: tinted desk with a vertical brightness ramp; bottom rows are nearer.
  Canvas cv(cfg.width, cfg.height);
  const double bg_hue = rng.uniform(0, 360), bg_sat = rng.uniform(0.05, 0.2), bg_val = rng.uniform(0.35, 0.65);
  const double ramp = rng.uniform(-0.15, 0.15);
  for (int y = 0; y < cfg.height; ++y) {
    const double t = (y + 0.5) / cfg.height;
    for (int x = 0; x < cfg.width; ++x) {
      const double tex = 0.03 * std::sin(0.9 * x + 0.35 * y) + 0.02 * std::sin(0.23 * x - 0.61 * y);
      cv.put_background(x, y, hsv(bg_hue, bg_sat, std::clamp(bg_val + ramp * (t - 0.5) + tex, 0.0, 1.0)), 0.10 + 0.15 * t);
    }
  }

  const int n_obj = static_cast<int>(layout.objects.size());
  for (auto& o : layout.objects) draw_object(cv, o);
  for (std::size_t i = 0; i < layout.hands.size(); ++i) {
    auto& h = layout.hands[i];
    h.ann.id = n_obj + static_cast<int>(i);
    h.ann.side = sides[i];
    h.ann.glove = glove[i] ? GloveStatus::Glove : GloveStatus::NoGlove;
    h.color = glove[i] ? hsv(rng.uniform(cfg.glove_hue_min, cfg.glove_hue_max), rng.uniform(0.75, 0.95), rng.uniform(0.8, 1.0))
                       : hsv(rng.uniform(cfg.skin_hue_min, cfg.skin_hue_max), rng.uniform(0.3, 0.6), rng.uniform(0.55, 0.95));
    draw_hand(cv, h);
  }
  std::array<double, 3> gains{1, 1, 1};
  if (cfg.color_jitter > 0)
    for (auto& g : gains) g = rng.uniform(1 - cfg.color_jitter, 1 + cfg.color_jitter);
  cv.finish(gains, cfg.noise_sigma, rng);
  scene.rgb = std::move(cv.rgb);
  scene.depth = std::move(cv.depth);
  scene.instance_mask = std::move(cv.mask);
}

bool all_instances_visible(const RenderedScene& scene, const Attempt& layout) {
  std::vector<std::size_t> count(layout.objects.size() + layout.hands.size() + 1, 0);
  for (auto v : scene.instance_mask.pixels)
    if (v < count.size()) ++count[v];
  for (std::size_t i = 1; i < count.size(); ++i)
    if (count[i] == 0) return false;
  return true;
}

}  // namespace

void SceneConfig::validate() const {
  auto check = [](bool ok, const char* what) {
    if (!ok) throw validation_error(std::string("invalid scene config: ") + what);
  };
  check(width >= 64 && height >= 64, "width and height must be >= 64");
  check(min_objects >= 0 && min_objects <= max_objects, "object range must be nonempty");
  check(min_hands >= 0 && min_hands <= max_hands && max_hands <= 2, "hand range must be a nonempty subset of [0, 2]");
  check(glove_probability >= 0 && glove_probability <= 1, "glove_probability must be in [0, 1]");
  check(contact_probability >= 0 && contact_probability <= 1, "contact_probability must be in [0, 1]");
  check(num_categories >= 1, "num_categories must be >= 1");
  check(hand_length > 0 && hand_length < 0.6, "hand_length must be in (0, 0.6)");
  check(min_object_size > 0 && min_object_size <= max_object_size && max_object_size < 0.5, "object size range invalid");
  check(color_jitter >= 0 && color_jitter < 1, "color_jitter must be in [0, 1)");
  check(noise_sigma >= 0, "noise_sigma must be >= 0");
}

std::vector<Category> default_categories(int n) {
  static const char* kNames[] = {"toolbox", "socket", "oscilloscope_probe", "power_supply", "screw_reel",
                                 "welding_station", "electric_panel", "pliers", "screwdriver", "multimeter"};
  std::vector<Category> cats;
  for (int i = 0; i < n; ++i) cats.push_back({i, i < 10 ? kNames[i] : "category_" + std::to_string(i)});
  return cats;
}

RenderedScene generate_scene(const SceneConfig& cfg, std::int64_t scene_index) {
  cfg.validate();
  Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(scene_index)));

  int n_objects = rng.uniform_int(cfg.min_objects, cfg.max_objects);
  const int n_hands = rng.uniform_int(cfg.min_hands, cfg.max_hands);
  std::vector<HandSide> sides;
  if (n_hands == 2)
    sides = {HandSide::Left, HandSide::Right};
  else if (n_hands == 1)
    sides = {rng.bernoulli(0.5) ? HandSide::Left : HandSide::Right};
  std::vector<bool> contact(sides.size()), glove(sides.size());
  for (std::size_t i = 0; i < sides.size(); ++i) {
    contact[i] = rng.bernoulli(cfg.contact_probability);
    glove[i] = rng.bernoulli(cfg.glove_probability);
  }

  RenderedScene scene;
  auto& rec = scene.record;
  char name[32];
  std::snprintf(name, sizeof(name), "scene_%06lld", static_cast<long long>(scene_index));
  rec.image_id = name;
  rec.width = cfg.width;
  rec.height = cfg.height;

  Attempt layout;
  for (;;) {
    std::vector<bool> want = contact;
    // Contact needs a distinct object per hand.
    int needed = 0;
    for (std::size_t i = 0; i < want.size(); ++i)
      if (want[i] && ++needed > n_objects) want[i] = false;
    layout = try_layout(cfg, rng, n_objects, sides, want);
    if (layout.ok) {
      render(cfg, layout, sides, glove, rng, scene);
      if (all_instances_visible(scene, layout)) break;
    }
    if (n_objects > 0) {
      --n_objects;
    } else {
      // No room for the hands at all: drop the last one.
      sides.pop_back();
      contact.pop_back();
      glove.pop_back();
    }
  }

  for (auto& o : layout.objects) {
    o.ann.active = false;
    for (const auto& h : layout.hands) o.ann.active |= h.active_index == o.ann.id;
    rec.objects.push_back(o.ann);
  }
  for (auto& h : layout.hands) {
    HandAnnotation& a = h.ann;
    a.bbox = h.geo.bbox.clamped(cfg.width, cfg.height);
    for (int k = 0; k < kNumKeypoints; ++k) {
      const Point2d& p = h.geo.keypoints[k];
      a.keypoints[k] = {p.x(), p.y(), p.x() >= 0 && p.y() >= 0 && p.x() <= cfg.width && p.y() <= cfg.height};
    }
    if (h.active_index >= 0) {
      a.contact = ContactState::Contact;
      a.active_object_id = h.active_index;
      a.offset = derive_offset(a.bbox, layout.objects[h.active_index].ann.bbox, cfg.width, cfg.height);
    }
    rec.hands.push_back(a);
  }

  return scene;
}

GenerateSummary generate_dataset(const SceneConfig& cfg, int n_train, int n_val, int n_test,
                                 const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  cfg.validate();
  if (n_train < 0 || n_val < 0 || n_test < 0) throw validation_error("split sizes must be non-negative");
  std::error_code ec;
  fs::create_directories(out_dir / "images", ec);
  if (ec) throw io_error("cannot create '" + (out_dir / "images").string() + "': " + ec.message());

  GenerateSummary summary;
  const auto categories = default_categories(cfg.num_categories);
  std::int64_t index = 0;
  const std::array<std::pair<const char*, int>, 3> splits{{{"train", n_train}, {"val", n_val}, {"test", n_test}}};
  for (const auto& [name, count] : splits) {
    Split split{name, {}};
    for (int i = 0; i < count; ++i, ++index) {
      RenderedScene scene = generate_scene(cfg, index);
      auto& rec = scene.record;
      const std::string stem = "images/" + rec.image_id;
      rec.rgb_path = stem + "_rgb.png";
      rec.depth_path = stem + "_depth.png";
      rec.mask_path = stem + "_mask.png";
      write_png(scene.rgb, out_dir / rec.rgb_path);
      write_png(scene.depth, out_dir / *rec.depth_path);
      write_png(scene.instance_mask, out_dir / *rec.mask_path);
      summary.files.push_back(out_dir / rec.rgb_path);
      summary.files.push_back(out_dir / *rec.depth_path);
      summary.files.push_back(out_dir / *rec.mask_path);
      split.images.push_back(std::move(rec));
    }
    const fs::path file = out_dir / (std::string(name) + ".json");
    write_split_file(categories, split, file);
    summary.files.push_back(file);
  }
  return summary;
}

double mean_hand_hue(const RenderedScene& scene, GloveStatus which) {
  double sum = 0;
  std::size_t n = 0;
  for (const auto& h : scene.record.hands) {
    if (h.glove != which) continue;
    const auto value = static_cast<std::uint16_t>(h.id + 1);
    for (int y = 0; y < scene.rgb.height; ++y)
      for (int x = 0; x < scene.rgb.width; ++x)
        if (scene.instance_mask.at(x, y) == value) {
          sum += hue_of(scene.rgb.at(x, y));
          ++n;
        }
  }
  return n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace ehoi::synth
