#pragma once

// JSON schemas ("schema": "orp/1") for scenes, candidates, assignments and
// reports, shared between the CLI and the tests.

#include <string>
#include <vector>

#include <json.hpp>

#include "orp/apaa.hpp"
#include "orp/eval.hpp"
#include "orp/toy_learner.hpp"

namespace orp {

inline constexpr const char* kSchemaTag = "orp/1";

// DOTA-15 category vocabulary, used when class names must map to ids.
inline const std::vector<std::string>& dota15_classes() {
  static const std::vector<std::string> names{
      "plane",    "baseball-diamond", "bridge", "ground-track-field", "small-vehicle",
      "large-vehicle", "ship",        "tennis-court", "basketball-court", "storage-tank",
      "soccer-ball-field", "roundabout", "harbor", "swimming-pool", "helicopter"};
  return names;
}

inline nlohmann::json to_json(const Point2& p) { return nlohmann::json::array({p.x, p.y}); }

inline Point2 point_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2) throw InvalidArgument("point must be [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline nlohmann::json to_json(const QuadBox& q) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Point2& p : q) arr.push_back(to_json(p));
  return arr;
}

inline QuadBox quad_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 4) throw InvalidArgument("quad must have 4 corners");
  QuadBox q;
  for (std::size_t i = 0; i < 4; ++i) q[i] = point_from_json(j[i]);
  return q;
}

inline nlohmann::json to_json(const PointSet& ps) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Point2& p : ps) arr.push_back(to_json(p));
  return arr;
}

inline PointSet point_set_from_json(const nlohmann::json& j) {
  PointSet ps;
  for (const auto& e : j) ps.push_back(point_from_json(e));
  return ps;
}

inline void require_schema(const nlohmann::json& j) {
  if (!j.contains("schema") || j["schema"] != kSchemaTag) {
    throw InvalidArgument(std::string("expected \"schema\": \"") + kSchemaTag + "\"");
  }
}

inline nlohmann::json scene_to_json(const SyntheticScene& scene) {
  nlohmann::json j;
  j["schema"] = kSchemaTag;
  j["extent"] = scene.extent;
  j["seed"] = scene.seed;
  j["objects"] = nlohmann::json::array();
  for (const SceneObject& o : scene.objects) {
    j["objects"].push_back(
        {{"class", o.class_id}, {"corners", to_json(o.box)}, {"difficult", o.difficult}});
  }
  return j;
}

inline SyntheticScene scene_from_json(const nlohmann::json& j) {
  require_schema(j);
  SyntheticScene s;
  s.extent = j.at("extent").get<double>();
  s.seed = j.value("seed", 0ULL);
  for (const auto& o : j.at("objects")) {
    SceneObject obj;
    obj.class_id = o.at("class").get<int>();
    obj.box = quad_from_json(o.at("corners"));
    obj.difficult = o.value("difficult", false);
    s.objects.push_back(obj);
  }
  return s;
}

struct CandidateFile {
  std::vector<QuadBox> gts;
  std::vector<int> gt_classes;
  std::vector<Candidate> candidates;
  std::vector<std::size_t> candidate_object;
};

inline CandidateFile candidates_from_json(const nlohmann::json& j) {
  require_schema(j);
  CandidateFile f;
  for (const auto& g : j.at("gts")) {
    f.gts.push_back(quad_from_json(g.at("corners")));
    f.gt_classes.push_back(g.value("class", 0));
  }
  for (const auto& c : j.at("candidates")) {
    Candidate cand;
    cand.point_set = point_set_from_json(c.at("points"));
    if (c.contains("probs")) cand.cls_prob = c["probs"].get<std::vector<double>>();
    if (c.contains("features")) {
      cand.features = c["features"].get<std::vector<std::vector<double>>>();
    }
    const auto obj = c.at("object").get<std::size_t>();
    if (obj >= f.gts.size()) throw InvalidArgument("candidate references unknown object");
    f.candidate_object.push_back(obj);
    f.candidates.push_back(std::move(cand));
  }
  return f;
}

inline nlohmann::json quality_to_json(const QualityScore& q) {
  return {{"q_cls", q.q_cls},
          {"q_loc", q.q_loc},
          {"q_ori", q.q_ori},
          {"q_poc", q.q_poc},
          {"total", q.total}};
}

inline nlohmann::json assignment_to_json(const AssignmentResult& r,
                                         const std::vector<QualityScore>* scores = nullptr) {
  nlohmann::json j;
  j["schema"] = kSchemaTag;
  j["sigma"] = r.sigma;
  j["k"] = r.k_used;
  j["positives"] = r.positives;
  j["owner"] = r.owner;
  if (scores) {
    j["quality"] = nlohmann::json::array();
    for (const QualityScore& q : *scores) j["quality"].push_back(quality_to_json(q));
  }
  return j;
}

inline nlohmann::json breakdown_to_json(const LossBreakdown& b) {
  return {{"cls", b.cls},
          {"loc_init", b.loc_init},
          {"loc_refine", b.loc_refine},
          {"sc_init", b.sc_init},
          {"sc_refine", b.sc_refine},
          {"total", b.total},
          {"empty_positives", b.empty_positives}};
}

inline nlohmann::json toy_report_to_json(const ToyReport& rep) {
  nlohmann::json j;
  j["schema"] = kSchemaTag;
  j["mean_iou"] = rep.mean_iou;
  j["mean_orientation_error_deg"] = rep.mean_orientation_error;
  j["mean_outside_points"] = rep.mean_outside_points;
  j["scenes"] = nlohmann::json::array();
  for (const SceneResult& s : rep.scenes) {
    nlohmann::json sj;
    sj["mean_iou"] = s.mean_iou;
    sj["mean_orientation_error_deg"] = s.mean_orientation_error;
    sj["outside_points"] = s.outside_points;
    sj["final_loss"] = s.history.empty() ? nlohmann::json() : breakdown_to_json(s.history.back());
    j["scenes"].push_back(std::move(sj));
  }
  return j;
}

inline nlohmann::json eval_report_to_json(const EvalReport& rep, const std::string& metric,
                                          double iou_threshold) {
  nlohmann::json j;
  j["schema"] = kSchemaTag;
  j["metric"] = metric;
  j["iou_threshold"] = iou_threshold;
  j["ap_per_class"] = nlohmann::json::object();
  for (const auto& [cls, ap] : rep.ap_per_class) j["ap_per_class"][std::to_string(cls)] = ap;
  j["map"] = rep.map;
  if (rep.maoe_deg) {
    j["maoe_deg"] = *rep.maoe_deg;
  } else {
    j["maoe_deg"] = nullptr;
  }
  // mAOE convention: true positives only at the matching threshold;
  // unmatched predictions are excluded.
  j["maoe_convention"] = "tp-only, modulo-180, modulo-90 for square-like GTs";
  return j;
}

}  // namespace orp
