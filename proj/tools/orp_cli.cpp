// Command-line front end: oriented conversion functions, APAA assignment,
// synthetic scenes, the toy trainer, rotated-detection evaluation, the
// gradient-check suite and DOTA tiling.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "orp/apaa.hpp"
#include "orp/dota.hpp"
#include "orp/eval.hpp"
#include "orp/geometry.hpp"
#include "orp/json_io.hpp"
#include "orp/losses.hpp"
#include "orp/toy_learner.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_output(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

int class_id_from_name(const std::string& name, const std::vector<std::string>& vocab) {
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    if (vocab[i] == name) return static_cast<int>(i);
  }
  throw orp::InvalidArgument("unknown class name '" + name + "'");
}

std::vector<orp::GtRecord> load_gt(const std::string& path, const std::vector<std::string>& vocab) {
  std::vector<orp::GtRecord> gts;
  auto load_one = [&](const fs::path& file) {
    const std::string image_id = file.stem().string();
    for (const orp::DotaRecord& r : orp::parse_dota(read_file(file.string()))) {
      orp::GtRecord g;
      g.image_id = image_id;
      g.class_id = class_id_from_name(r.class_name, vocab);
      g.box = r.box;
      if (orp::polygon_area(g.box) < 0) std::reverse(g.box.begin(), g.box.end());
      g.difficult = r.difficulty != 0;
      gts.push_back(std::move(g));
    }
  };
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(path)) {
      if (e.path().extension() == ".txt") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) load_one(f);
  } else {
    load_one(path);
  }
  return gts;
}

std::vector<orp::Detection> load_predictions(const std::string& path,
                                             const std::vector<std::string>& vocab) {
  const json j = json::parse(read_file(path));
  orp::require_schema(j);
  std::vector<orp::Detection> dets;
  for (const auto& d : j.at("detections")) {
    orp::Detection det;
    det.image_id = d.value("image", "0");
    if (d.at("class").is_string()) {
      det.class_id = class_id_from_name(d["class"].get<std::string>(), vocab);
    } else {
      det.class_id = d["class"].get<int>();
    }
    det.box = orp::quad_from_json(d.at("corners"));
    if (orp::polygon_area(det.box) < 0) std::reverse(det.box.begin(), det.box.end());
    det.confidence = d.at("score").get<double>();
    dets.push_back(std::move(det));
  }
  return dets;
}

int run_gradcheck() {
  std::mt19937_64 rng(20240524);
  auto rand_points = [&](std::size_t n, double lo, double hi) {
    orp::PointSet ps;
    for (std::size_t i = 0; i < n; ++i) {
      ps.push_back({orp::uniform_in(rng, lo, hi), orp::uniform_in(rng, lo, hi)});
    }
    return ps;
  };
  const orp::QuadBox gt = orp::make_oriented_box({5.0, 5.0}, 6.0, 3.0, 20.0);

  struct Row {
    std::string name;
    double max_err;
    double tol;
  };
  std::vector<Row> rows;

  auto run_cases = [&](const std::string& name, auto&& op, double tol) {
    double worst = 0.0;
    int done = 0;
    while (done < 50) {
      const orp::PointSet ps = rand_points(9, 0.0, 10.0);
      try {
        worst = std::max(worst, orp::grad_check(op, ps, 1e-6));
        ++done;
      } catch (const std::runtime_error&) {
        continue;  // degenerate draw, resample
      }
    }
    rows.push_back({name, worst, tol});
  };

  run_cases(
      "giou_loss_convexhull",
      [&](const orp::PointSet& p) { return orp::giou_loss_convexhull(p, gt); }, 1e-4);
  run_cases(
      "giou_loss_nearestcorner",
      [&](const orp::PointSet& p) { return orp::giou_loss_nearestcorner(p, gt); }, 1e-4);
  run_cases(
      "spatial_constraint_loss",
      [&](const orp::PointSet& p) {
        auto [loss, grads] = orp::spatial_constraint_loss({p}, gt);
        return orp::LossWithGrad{loss, grads[0]};
      },
      1e-6);

  // Focal loss: finite differences in the logit.
  {
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
      const double z = orp::uniform_in(rng, -4.0, 4.0);
      const int y = rng() % 2 ? 1 : 0;
      const double h = 1e-6;
      auto at = [&](double zz) { return orp::focal_loss(orp::sigmoid(zz), y).loss; };
      const double fd = (at(z + h) - at(z - h)) / (2.0 * h);
      const double an = orp::focal_loss(orp::sigmoid(z), y).dloss_dlogit;
      worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-12}));
    }
    rows.push_back({"focal_loss", worst, 1e-4});
  }

  bool ok = true;
  std::printf("%-26s %14s %10s  %s\n", "loss", "max rel err", "tol", "status");
  for (const Row& r : rows) {
    const bool pass = r.max_err < r.tol;
    ok = ok && pass;
    std::printf("%-26s %14.3e %10.0e  %s\n", r.name.c_str(), r.max_err, r.tol,
                pass ? "ok" : "FAIL");
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Oriented point-set detection toolkit"};
  app.require_subcommand(1);

  // convert
  auto* convert = app.add_subcommand("convert", "convert point sets to oriented boxes");
  std::string convert_in, convert_out, convert_fn = "minarearect";
  convert->add_option("--in", convert_in, "input point-set JSON")->required();
  convert->add_option("--out", convert_out, "output path (default stdout)");
  convert->add_option("--fn", convert_fn, "conversion function")
      ->check(CLI::IsMember({"minarearect", "convexhull", "nearestgtcorner"}));

  // assign
  auto* assign = app.add_subcommand("assign", "APAA / Max-IoU label assignment");
  std::string assign_in, assign_out, assigner = "apaa";
  double sigma = 0.4, mu1 = 1.0, mu2 = 0.3, mu3 = 0.1, maxiou_thr = 0.5;
  assign->add_option("--in", assign_in, "scene+candidates JSON")->required();
  assign->add_option("--out", assign_out, "output path (default stdout)");
  assign->add_option("--sigma", sigma, "APAA sampling ratio");
  assign->add_option("--mu1", mu1, "localization quality weight");
  assign->add_option("--mu2", mu2, "orientation quality weight");
  assign->add_option("--mu3", mu3, "feature-correlation quality weight");
  assign->add_option("--threshold", maxiou_thr, "Max-IoU positive threshold");
  assign->add_option("--assigner", assigner)->check(CLI::IsMember({"apaa", "maxiou"}));

  // gen-scene
  auto* genscene = app.add_subcommand("gen-scene", "emit a synthetic scene JSON");
  std::uint64_t gs_seed = 1;
  std::size_t gs_objects = 1;
  double gs_extent = 128.0;
  std::string gs_out;
  genscene->add_option("--seed", gs_seed);
  genscene->add_option("--objects", gs_objects);
  genscene->add_option("--extent", gs_extent);
  genscene->add_option("--out", gs_out, "output path (default stdout)");

  // train-toy
  auto* traintoy = app.add_subcommand("train-toy", "run the toy learning benchmark");
  orp::ToyConfig tc;
  bool no_spatial = false;
  std::string toy_assigner = "apaa", toy_out;
  traintoy->add_option("--seed", tc.seed);
  traintoy->add_option("--scenes", tc.scenes);
  traintoy->add_option("--steps", tc.steps);
  traintoy->add_option("--sigma", tc.sigma);
  traintoy->add_flag("--no-spatial-constraint", no_spatial);
  traintoy->add_option("--assigner", toy_assigner)->check(CLI::IsMember({"apaa", "maxiou"}));
  traintoy->add_option("--out", toy_out, "report output path (default stdout)");

  // eval
  auto* evalc = app.add_subcommand("eval", "rotated-detection evaluation");
  std::string gt_path, pred_path, metric = "voc07", eval_out, classes_path;
  double eval_iou = 0.5;
  bool with_maoe = false, eval_json = false;
  evalc->add_option("--gt", gt_path, "GT DOTA file or directory")->required();
  evalc->add_option("--pred", pred_path, "predictions JSON")->required();
  evalc->add_option("--metric", metric)->check(CLI::IsMember({"voc07", "voc12"}));
  evalc->add_option("--iou", eval_iou, "matching IoU threshold");
  evalc->add_flag("--maoe", with_maoe, "also report mean average orientation error");
  evalc->add_flag("--json", eval_json, "JSON output");
  evalc->add_option("--classes", classes_path, "class vocabulary file, one name per line");
  evalc->add_option("--out", eval_out, "output path (default stdout)");

  // gradcheck
  app.add_subcommand("gradcheck", "run the gradient-check suite");

  // tile
  auto* tile = app.add_subcommand("tile", "split DOTA annotations into patches");
  std::string tile_in, tile_outdir;
  double patch = 1024.0, stride = 824.0, keep_frac = 0.3, img_w = 0.0, img_h = 0.0;
  tile->add_option("--in", tile_in, "DOTA annotation file")->required();
  tile->add_option("--out-dir", tile_outdir, "output directory")->required();
  tile->add_option("--width", img_w, "image width")->required();
  tile->add_option("--height", img_h, "image height")->required();
  tile->add_option("--patch", patch, "patch size");
  tile->add_option("--stride", stride, "tiling stride");
  tile->add_option("--keep-fraction", keep_frac, "minimum clipped-area fraction to retain a box");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (convert->parsed()) {
      const json in = json::parse(read_file(convert_in));
      orp::require_schema(in);
      json out;
      out["schema"] = orp::kSchemaTag;
      out["fn"] = convert_fn;
      out["boxes"] = json::array();
      std::vector<orp::QuadBox> gts;
      if (in.contains("gts")) {
        for (const auto& g : in["gts"]) {
          gts.push_back(orp::quad_from_json(g.contains("corners") ? g["corners"] : g));
        }
      }
      std::size_t idx = 0;
      for (const auto& psj : in.at("point_sets")) {
        const orp::PointSet ps = orp::point_set_from_json(psj);
        if (convert_fn == "minarearect") {
          const orp::RotatedRect r = orp::min_area_rect(ps);
          out["boxes"].push_back({{"center", orp::to_json(r.center)},
                                  {"width", r.width},
                                  {"height", r.height},
                                  {"angle_deg", r.angle_deg},
                                  {"corners", orp::to_json(r.corners())}});
        } else if (convert_fn == "convexhull") {
          const orp::ConvexPolygon h = orp::convex_hull(ps);
          json verts = json::array();
          for (const orp::Point2& p : h.vertices) verts.push_back(orp::to_json(p));
          out["boxes"].push_back({{"vertices", verts}});
        } else {
          if (gts.empty()) throw orp::InvalidArgument("nearestgtcorner requires \"gts\"");
          const orp::QuadBox q = orp::nearest_gt_corner(ps, gts[std::min(idx, gts.size() - 1)]);
          out["boxes"].push_back({{"corners", orp::to_json(q)}});
        }
        ++idx;
      }
      write_output(convert_out, out.dump(2) + "\n");
    } else if (assign->parsed()) {
      const orp::CandidateFile f = orp::candidates_from_json(json::parse(read_file(assign_in)));
      orp::QualityWeights qw{mu1, mu2, mu3};
      std::vector<orp::QualityScore> scores(f.candidates.size());
      for (std::size_t i = 0; i < f.candidates.size(); ++i) {
        const std::size_t obj = f.candidate_object[i];
        scores[i] = orp::quality_total(f.candidates[i], f.gts[obj],
                                       static_cast<std::size_t>(f.gt_classes[obj]), qw);
      }
      orp::AssignmentResult res;
      if (assigner == "apaa") {
        std::vector<std::vector<std::size_t>> groups(f.gts.size());
        for (std::size_t i = 0; i < f.candidates.size(); ++i) {
          groups[f.candidate_object[i]].push_back(i);
        }
        res = orp::dynamic_topk_assign(groups, scores, f.candidates.size(), sigma);
      } else {
        res = orp::max_iou_assign(f.candidates, f.gts, maxiou_thr);
      }
      write_output(assign_out, orp::assignment_to_json(res, &scores).dump(2) + "\n");
    } else if (genscene->parsed()) {
      orp::ToyConfig cfg;
      cfg.extent = gs_extent;
      cfg.n_objects = gs_objects;
      write_output(gs_out, orp::scene_to_json(orp::gen_scene(gs_seed, cfg)).dump(2) + "\n");
    } else if (traintoy->parsed()) {
      tc.spatial_constraint = !no_spatial;
      tc.assigner = toy_assigner == "apaa" ? orp::AssignerKind::kApaa : orp::AssignerKind::kMaxIou;
      const orp::ToyReport rep = orp::train(tc);
      write_output(toy_out, orp::toy_report_to_json(rep).dump(2) + "\n");
    } else if (evalc->parsed()) {
      std::vector<std::string> vocab = orp::dota15_classes();
      if (!classes_path.empty()) {
        vocab.clear();
        std::istringstream in(read_file(classes_path));
        std::string line;
        while (std::getline(in, line)) {
          if (!line.empty()) vocab.push_back(line);
        }
      }
      const auto gts = load_gt(gt_path, vocab);
      const auto dets = load_predictions(pred_path, vocab);
      const orp::ApMetric m = metric == "voc07" ? orp::ApMetric::kVoc07 : orp::ApMetric::kVoc12;
      const orp::EvalReport rep = orp::evaluate(dets, gts, m, eval_iou, with_maoe);
      if (eval_json) {
        write_output(eval_out, orp::eval_report_to_json(rep, metric, eval_iou).dump(2) + "\n");
      } else {
        std::ostringstream os;
        os << "# mAOE convention: TP-only at IoU " << eval_iou
           << ", modulo-180, modulo-90 for square-like GTs; unmatched predictions excluded\n";
        os << "class  AP(" << metric << ")\n";
        for (const auto& [cls, ap] : rep.ap_per_class) {
          const std::string name =
              cls >= 0 && static_cast<std::size_t>(cls) < vocab.size() ? vocab[cls] : "?";
          os << cls << " (" << name << "): " << ap << "\n";
        }
        os << "mAP: " << rep.map << "\n";
        if (with_maoe) {
          if (rep.maoe_deg) {
            os << "mAOE: " << *rep.maoe_deg << " deg\n";
          } else {
            os << "mAOE: absent (no true positives)\n";
          }
        }
        write_output(eval_out, os.str());
      }
    } else if (app.get_subcommand("gradcheck")->parsed()) {
      return run_gradcheck();
    } else if (tile->parsed()) {
      const auto records = orp::parse_dota(read_file(tile_in));
      orp::TileSpec spec{patch, stride, keep_frac};
      const auto tiles = orp::tile_annotations(records, img_w, img_h, spec);
      fs::create_directories(tile_outdir);
      for (const orp::Tile& t : tiles) {
        std::ostringstream name;
        name << "tile_" << static_cast<long long>(t.origin.x) << "_"
             << static_cast<long long>(t.origin.y) << ".txt";
        write_output((fs::path(tile_outdir) / name.str()).string(), orp::write_dota(t.records));
      }
      std::cout << "wrote " << tiles.size() << " tiles to " << tile_outdir << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
