// Command-line front end: forward, gradcheck, match, loss, eval, flops,
// dataset-stats, selftest. Exit codes: 0 success, 1 usage error, 2 data or
// validation error, 3 internal invariant violation.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sisnet/analytics.hpp"
#include "sisnet/costs.hpp"
#include "sisnet/eval.hpp"
#include "sisnet/gradcheck_suite.hpp"
#include "sisnet/image_io.hpp"
#include "sisnet/serialize.hpp"
#include "sisnet/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sisnet;

namespace {

std::string fmt(double v) { return format_double(v); }

CostMatrix read_cost_matrix(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw value_error("cannot open '" + path + "'");
  std::string header;
  if (!std::getline(is, header)) throw value_error("cost matrix: missing shape line");
  std::istringstream hs(header);
  int p = -1, g = -1;
  if (!(hs >> p >> g) || p < 0 || g < 0)
    throw value_error("cost matrix: shape line must hold two non-negative sizes");
  CostMatrix cost(p, g);
  for (long long i = 0; i < static_cast<long long>(p) * g; ++i) {
    if (!(is >> cost.values[static_cast<size_t>(i)]))
      throw value_error("cost matrix: expected " + std::to_string(p * g) + " values");
  }
  cost.check_finite();
  return cost;
}

struct PredSet {
  std::vector<Tensor> masks;  // soft or binary, full resolution
  std::vector<double> scores;
};

// {"masks": ["m0.txt" | "m0.pgm", ...], "scores": [...]}; paths are relative
// to the JSON file. PGM masks load as values/255.
PredSet load_predictions(const fs::path& json_path) {
  std::ifstream is(json_path);
  if (!is) throw value_error("cannot open '" + json_path.string() + "'");
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw value_error("predictions '" + json_path.string() + "': " + e.what());
  }
  if (!j.contains("masks") || !j.contains("scores"))
    throw value_error("predictions file needs 'masks' and 'scores' arrays");
  PredSet out;
  const fs::path root = json_path.parent_path();
  for (const auto& m : j["masks"]) {
    const fs::path p = root / m.get<std::string>();
    if (p.extension() == ".pgm") {
      GrayImage img = read_pgm(p.string());
      Tensor t({img.h, img.w});
      for (int i = 0; i < img.h; ++i)
        for (int jx = 0; jx < img.w; ++jx) t(i, jx) = img.at(i, jx) / 255.0;
      out.masks.push_back(std::move(t));
    } else {
      out.masks.push_back(read_tensor_text(p.string()));
    }
  }
  for (const auto& s : j["scores"]) out.scores.push_back(s.get<double>());
  if (out.masks.size() != out.scores.size())
    throw value_error("predictions file: mask and score counts differ");
  return out;
}

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream os(path);
  if (!os) throw value_error("cannot open '" + path.string() + "' for writing");
  os << content;
}

json breakdown_to_json(const LossBreakdown& b) {
  return json{{"cls", b.cls},
              {"mask", b.mask},
              {"objectness", b.objectness},
              {"aux", b.aux},
              {"total", b.total}};
}

// --------------------------- subcommand bodies ------------------------------

int cmd_forward(const std::string& rgb_path, const std::string& depth_path,
                const std::string& out_dir, uint64_t seed, int n_kernels, int channels,
                const std::string& load_dir, const std::string& save_dir) {
  PipelineConfig cfg;
  cfg.n_kernels = n_kernels;
  cfg.channels = channels;
  Pipeline pipe = Pipeline::make(cfg, seed);
  if (!load_dir.empty()) load_params(pipe, load_dir);
  if (!save_dir.empty()) save_params(pipe, save_dir);

  Tensor rgb = rgb_to_tensor(read_ppm(rgb_path));
  Tensor depth = gray_to_tensor(read_pgm(depth_path));
  auto preds = pipe.forward(rgb, depth);

  fs::create_directories(out_dir);
  json scores = json::array();
  json masks = json::array();
  for (size_t i = 0; i < preds.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "mask_%02zu.pgm", i);
    write_pgm((fs::path(out_dir) / name).string(), mask_to_gray(preds[i].soft_mask));
    scores.push_back(preds[i].score);
    masks.push_back(name);
  }
  json out{{"seed", seed},
           {"n_kernels", n_kernels},
           {"channels", channels},
           {"scores", scores},
           {"masks", masks}};
  write_text_file(fs::path(out_dir) / "predictions.json", out.dump(2) + "\n");
  std::cout << "wrote " << preds.size() << " masks to " << out_dir << "\n";
  std::cout << "top score " << fmt(preds.empty() ? 0.0 : preds[0].score) << "\n";
  return 0;
}

int cmd_gradcheck(uint64_t seed, double eps, double tol, bool include_pipeline,
                  const std::string& out_path) {
  GradCheckOptions opt;
  opt.eps = eps;
  opt.tol = tol;
  bool all_pass = true;
  json checks = json::object();
  for (const auto& [name, report] : gradcheck::run_suite(seed, opt)) {
    checks[name] = report.max_rel_err;
    all_pass = all_pass && report.pass;
    std::cout << (report.pass ? "ok   " : "FAIL ") << name << " max_rel_err "
              << fmt(report.max_rel_err) << "\n";
  }
  if (include_pipeline) {
    GradCheckOptions popt;
    popt.eps = 1e-6;
    popt.tol = 1e-3;
    auto report = gradcheck::check_pipeline(seed, popt);
    checks["pipeline"] = report.max_rel_err;
    all_pass = all_pass && report.pass;
    std::cout << (report.pass ? "ok   " : "FAIL ") << "pipeline max_rel_err "
              << fmt(report.max_rel_err) << "\n";
  }
  json out{{"seed", seed}, {"eps", eps}, {"tol", tol}, {"checks", checks}, {"pass", all_pass}};
  if (!out_path.empty()) write_text_file(out_path, out.dump(2) + "\n");
  std::cout << (all_pass ? "gradcheck passed" : "gradcheck FAILED") << "\n";
  return all_pass ? 0 : 2;
}

int cmd_match(const std::string& cost_path, const std::string& out_path) {
  CostMatrix cost = read_cost_matrix(cost_path);
  Assignment a = hungarian(cost);
  json pairs = json::array();
  for (const auto& [p, g] : a.pairs) pairs.push_back(json::array({p, g}));
  json out{{"pairs", pairs}, {"total_cost", a.total_cost}};
  std::cout << out.dump(2) << "\n";
  if (!out_path.empty()) write_text_file(out_path, out.dump(2) + "\n");
  return 0;
}

int cmd_loss(const std::string& preds_path, const std::string& gt_path,
             const std::string& regions_path, const std::string& out_path) {
  PredSet preds = load_predictions(preds_path);
  std::vector<Tensor> gts = instances_from_gray(read_pgm(gt_path));

  LossWeights w;
  Assignment assign = match_predictions(preds.masks, preds.scores, gts, w);
  Tensor iou_targets = matched_iou_targets(preds.masks, gts, assign);

  Tensor scores({static_cast<int>(preds.scores.size())});
  for (size_t i = 0; i < preds.scores.size(); ++i) scores(static_cast<int>(i)) = preds.scores[i];

  Tensor cls_targets({scores.dim(0)});
  for (const auto& [p, g] : assign.pairs) cls_targets(p) = 1.0;

  LossBreakdown b;
  b.cls = focal_loss(scores, cls_targets);
  if (!assign.pairs.empty()) {
    double m = 0.0;
    for (const auto& [p, g] : assign.pairs) {
      m += dice_loss(preds.masks[static_cast<size_t>(p)], gts[static_cast<size_t>(g)]);
      m += bce_mean(preds.masks[static_cast<size_t>(p)], gts[static_cast<size_t>(g)]);
    }
    b.mask = m / static_cast<double>(assign.pairs.size());
  }
  b.objectness = objectness_loss(scores, iou_targets);
  bool have_regions = !regions_path.empty();
  if (have_regions) {
    std::ifstream is(regions_path);
    if (!is) throw value_error("cannot open '" + regions_path + "'");
    json j;
    is >> j;
    const fs::path root = fs::path(regions_path).parent_path();
    auto load = [&root, &j](const char* key) {
      if (!j.contains(key)) throw value_error(std::string("region preds: missing '") + key + "'");
      return read_tensor_text((root / j[key].get<std::string>()).string());
    };
    RegionPreds rp{load("rgb_quarter"), load("rgb_eighth"), load("depth_quarter"),
                   load("depth_eighth")};
    const int H = preds.masks.empty() ? rp.rgb_quarter.dim(0) * 4 : preds.masks[0].dim(0);
    const int W = preds.masks.empty() ? rp.rgb_quarter.dim(1) * 4 : preds.masks[0].dim(1);
    b.aux = aux_binary_loss(rp, region_union(gts, H, W), w.lambda_rgb_aux, w.lambda_depth_aux);
  }
  b.total = w.lambda_cls * b.cls + w.lambda_mask * b.mask + w.lambda_obj * b.objectness +
            w.lambda_bin * b.aux;

  json pairs = json::array();
  for (const auto& [p, g] : assign.pairs) pairs.push_back(json::array({p, g}));
  json out = breakdown_to_json(b);
  out["assignment"] = json{{"pairs", pairs}, {"total_cost", assign.total_cost}};
  out["aux_preds_provided"] = have_regions;
  std::cout << out.dump(2) << "\n";
  if (!out_path.empty()) write_text_file(out_path, out.dump(2) + "\n");
  return 0;
}

int cmd_eval(const std::string& manifest_path, const std::string& pred_dir,
             const std::string& out_dir) {
  DatasetManifest manifest = DatasetManifest::load(manifest_path);
  if (manifest.samples.empty()) throw value_error("eval: manifest lists no samples");

  std::vector<EvalImage> dataset;
  int missing = 0;
  for (const auto& s : manifest.samples) {
    EvalImage img;
    img.gts = instances_from_gray(read_pgm(manifest.resolve(s.instances).string()));
    const fs::path pj = fs::path(pred_dir) / (s.id + ".json");
    if (fs::exists(pj)) {
      PredSet ps = load_predictions(pj);
      for (size_t i = 0; i < ps.masks.size(); ++i) {
        Tensor bin(ps.masks[i].shape());
        for (long long k = 0; k < bin.size(); ++k)
          bin[k] = ps.masks[i][k] >= 0.5 ? 1.0 : 0.0;
        img.preds.push_back({std::move(bin), ps.scores[i]});
      }
    } else {
      ++missing;
    }
    dataset.push_back(std::move(img));
  }

  APReport report = evaluate_ap(dataset);

  fs::create_directories(out_dir);
  json per_tau = json::array();
  for (const auto& [tau, ap] : report.per_threshold)
    per_tau.push_back(json{{"tau", tau}, {"ap", ap}});
  json out{{"ap", report.ap},
           {"ap50", report.ap50},
           {"ap70", report.ap70},
           {"per_threshold", per_tau},
           {"images", dataset.size()},
           {"missing_prediction_files", missing}};
  write_text_file(fs::path(out_dir) / "ap_report.json", out.dump(2) + "\n");

  // Raw PR traces per threshold.
  long long total_gt = 0;
  for (const auto& img : dataset) total_gt += static_cast<long long>(img.gts.size());
  std::vector<std::vector<std::vector<double>>> ious(dataset.size());
  for (size_t im = 0; im < dataset.size(); ++im) {
    ious[im].resize(dataset[im].preds.size());
    for (size_t p = 0; p < dataset[im].preds.size(); ++p) {
      ious[im][p].resize(dataset[im].gts.size());
      for (size_t g = 0; g < dataset[im].gts.size(); ++g)
        ious[im][p][g] = mask_iou(dataset[im].preds[p].mask, dataset[im].gts[g]);
    }
  }
  std::string csv = "tau,rank,recall,precision\n";
  for (double tau : ap_iou_thresholds()) {
    const auto pts = pr_curve(dataset, tau, ious, total_gt);
    for (size_t k = 0; k < pts.size(); ++k) {
      csv += fmt(tau) + "," + std::to_string(k + 1) + "," + fmt(pts[k].recall) + "," +
             fmt(pts[k].precision) + "\n";
    }
  }
  write_text_file(fs::path(out_dir) / "pr_curves.csv", csv);

  std::cout << "ap " << fmt(report.ap) << " ap50 " << fmt(report.ap50) << " ap70 "
            << fmt(report.ap70) << " (" << dataset.size() << " images)\n";
  return 0;
}

int cmd_flops(int height, int width, bool compare_shared, bool pipeline_costs_flag,
              int channels, int n_kernels, const std::string& out_path) {
  json out;
  out["height"] = height;
  out["width"] = width;
  if (compare_shared) {
    CostReport s = shared_affinity_costs(height, width);
    CostReport n = nonlocal_affinity_costs(height, width);
    out["shared"] = json{{"params", s.params}, {"macs", s.macs}};
    out["nonlocal"] = json{{"params", n.params}, {"macs", n.macs}};
    out["shared_below_nonlocal"] = s.macs < n.macs;
  }
  if (pipeline_costs_flag) {
    PipelineConfig cfg;
    cfg.channels = channels;
    cfg.n_kernels = n_kernels;
    Pipeline pipe = Pipeline::make(cfg, 0);
    CostReport r = pipeline_costs(pipe, height, width);
    out["pipeline"] = json{{"params", r.params}, {"macs", r.macs},
                           {"channels", channels}, {"n_kernels", n_kernels}};
  }
  std::cout << out.dump(2) << "\n";
  if (!out_path.empty()) write_text_file(out_path, out.dump(2) + "\n");
  return 0;
}

int cmd_dataset_stats(const std::string& manifest_path, const std::string& out_dir,
                      int grid, int bins) {
  DatasetManifest manifest = DatasetManifest::load(manifest_path);
  fs::create_directories(out_dir);

  auto curve_csv = [](const ConsistencyCurve& c) {
    std::string csv = "tau,fraction\n";
    for (int k = 0; k <= 100; ++k)
      csv += fmt(k / 100.0) + "," + fmt(c.exceed_fraction[static_cast<size_t>(k)]) + "\n";
    return csv;
  };

  ConsistencyCurve depth_curve = depth_saliency_consistency(manifest);
  ConsistencyCurve inst_curve = object_instance_consistency(manifest);
  write_text_file(fs::path(out_dir) / "depth_saliency.csv", curve_csv(depth_curve));
  write_text_file(fs::path(out_dir) / "object_instance.csv", curve_csv(inst_curve));

  Histogram2D bias = center_bias(manifest, grid);
  std::string bias_csv = "row,col,mass\n";
  for (int r = 0; r < grid; ++r)
    for (int c = 0; c < grid; ++c)
      bias_csv += std::to_string(r) + "," + std::to_string(c) + "," + fmt(bias.at(r, c)) + "\n";
  write_text_file(fs::path(out_dir) / "center_bias.csv", bias_csv);
  write_pgm((fs::path(out_dir) / "center_bias.pgm").string(), histogram_to_heatmap(bias));

  auto hist = instance_size_histogram(manifest, bins);
  std::string size_csv = "bin_lo,bin_hi,count\n";
  for (int b = 0; b < bins; ++b) {
    size_csv += fmt(static_cast<double>(b) / bins) + "," +
                fmt(static_cast<double>(b + 1) / bins) + "," +
                std::to_string(hist[static_cast<size_t>(b)]) + "\n";
  }
  write_text_file(fs::path(out_dir) / "instance_sizes.csv", size_csv);

  long long instance_count = 0;
  for (long long v : hist) instance_count += v;
  json summary{{"samples", manifest.samples.size()},
               {"instances", instance_count},
               {"depth_saliency_mean_iou", depth_curve.mean_iou},
               {"depth_saliency_skipped", depth_curve.skipped},
               {"object_instance_mean_iou", inst_curve.mean_iou},
               {"object_instance_skipped", inst_curve.skipped},
               {"depth_near_is_bright", manifest.depth_near_is_bright}};
  write_text_file(fs::path(out_dir) / "summary.json", summary.dump(2) + "\n");

  std::cout << "depth/saliency mean IoU " << fmt(depth_curve.mean_iou)
            << ", object/instance mean IoU " << fmt(inst_curve.mean_iou) << " ("
            << manifest.samples.size() << " samples)\n";
  return 0;
}

#define SELFCHECK(name, cond)                                         \
  do {                                                                \
    if (!(cond)) {                                                    \
      std::cout << "FAIL " << (name) << "\n";                         \
      return 3;                                                       \
    }                                                                 \
    std::cout << "ok " << (name) << "\n";                             \
  } while (0)

int cmd_selftest() {
  // Elementwise basics.
  SELFCHECK("sigmoid(0) = 0.5", sigmoid(Tensor({1}))(0) == 0.5);
  {
    Tensor s = softmax(Tensor({3}), 0);
    SELFCHECK("softmax of zeros is uniform",
              std::fabs(s(0) - 1.0 / 3) < 1e-15 && std::fabs(sum(s) - 1.0) < 1e-12);
  }
  {
    Tensor eye({3, 3});
    for (int i = 0; i < 3; ++i) eye(i, i) = 1.0;
    Rng rng(3);
    Tensor a = rng.uniform_tensor({3, 3}, -1, 1);
    Tensor prod = matmul(eye, a);
    bool same = true;
    for (long long i = 0; i < a.size(); ++i) same = same && prod[i] == a[i];
    SELFCHECK("identity matmul", same);
  }
  {
    Tensor a({2, 2}, {1, 2, 3, 4});
    Tensor b({2, 1}, {1, 1});
    Tensor c = matmul(a, b);
    SELFCHECK("matmul row sums", c(0, 0) == 3.0 && c(1, 0) == 7.0);
  }
  // Conv identity.
  {
    Rng rng(5);
    Conv2d conv("c", 1, 2, 2, rng);
    conv.weight = Tensor({1, 1, 2, 2});
    conv.weight(0, 0, 0, 0) = 1.0;
    conv.weight(0, 0, 1, 1) = 1.0;
    conv.bias = Tensor({2});
    Tensor x = rng.uniform_tensor({3, 4, 2}, -1, 1);
    Tensor y = conv.forward(x);
    bool same = true;
    for (long long i = 0; i < x.size(); ++i) same = same && std::fabs(y[i] - x[i]) < 1e-15;
    SELFCHECK("1x1 identity conv", same);
  }
  // Similarity score fixtures.
  {
    Tensor a({4}, {1, 2, 3, 4});
    SELFCHECK("parallel maps score 1",
              std::fabs(DepthSimilarity::similarity_from_maps(a, a) - 1.0) < 1e-12);
    SELFCHECK("antiparallel maps score 0",
              std::fabs(DepthSimilarity::similarity_from_maps(a, scale(a, -1.0))) < 1e-12);
    Tensor e1({2}, {1, 0});
    Tensor e2({2}, {0, 1});
    SELFCHECK("orthogonal maps score 0.5",
              std::fabs(DepthSimilarity::similarity_from_maps(e1, e2) - 0.5) < 1e-12);
  }
  // Matching.
  {
    CostMatrix cost(3, 3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) cost.at(i, j) = i == j ? 0.0 : 5.0;
    Assignment a = hungarian(cost);
    SELFCHECK("diagonal assignment",
              a.total_cost == 0.0 && a.pairs.size() == 3 && a.pairs[0] == std::make_pair(0, 0));
  }
  // Losses.
  {
    Tensor p({2, 2}, {1, 0, 1, 0});
    SELFCHECK("dice of exact match", dice_loss(p, p) < 1e-2);
    Tensor q({2, 2}, {0, 1, 0, 1});
    SELFCHECK("dice of disjoint masks", dice_loss(p, q) > 0.5);
    RegionPreds half{Tensor::full({4, 4}, 0.5), Tensor::full({2, 2}, 0.5),
                     Tensor::full({4, 4}, 0.5), Tensor::full({2, 2}, 0.5)};
    const double v = aux_binary_loss(half, Tensor({16, 16}));
    SELFCHECK("uniform-0.5 aux loss is 2 ln 2", std::fabs(v - 2.0 * std::log(2.0)) < 1e-12);
  }
  // Evaluation.
  {
    Tensor m({2, 2}, {1, 1, 0, 0});
    SELFCHECK("iou of equal masks", mask_iou(m, m) == 1.0);
    Tensor d({2, 2}, {0, 0, 1, 1});
    SELFCHECK("iou of disjoint masks", mask_iou(m, d) == 0.0);
    std::vector<EvalImage> ds(1);
    ds[0].gts.push_back(m);
    ds[0].preds.push_back({m, 1.0});
    APReport r = evaluate_ap(ds);
    SELFCHECK("perfect predictions score ap 1", r.ap == 1.0 && r.ap50 == 1.0 && r.ap70 == 1.0);
  }
  // OTSU.
  {
    GrayImage img;
    img.h = 2;
    img.w = 2;
    img.px = {0, 0, 255, 255};
    SELFCHECK("two-level otsu picks lowest separating t", otsu_threshold(img) == 0);
    GrayImage flat;
    flat.h = 2;
    flat.w = 2;
    flat.px = {7, 7, 7, 7};
    SELFCHECK("constant otsu returns the value", otsu_threshold(flat) == 7);
  }
  // Coordinates.
  {
    Tensor x({1, 1, 1});
    Tensor y = coord_concat(x);
    SELFCHECK("degenerate coord grid maps to -1", y(0, 0, 1) == -1.0 && y(0, 0, 2) == -1.0);
  }
  // Zero kernel, uniform mask.
  {
    Tensor kernels({1, 3});
    Rng rng(11);
    Tensor feat = rng.uniform_tensor({2, 2, 3}, -1, 1);
    auto masks = dynamic_mask_head_raw(kernels, feat, 8, 8, nullptr);
    bool uniform = true;
    for (long long i = 0; i < masks[0].size(); ++i) uniform = uniform && masks[0][i] == 0.5;
    SELFCHECK("zero kernel gives uniform 0.5 mask", uniform);
  }
  std::cout << "selftest passed\n";
  return 0;
}

#undef SELFCHECK

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RGB-D salient instance segmentation toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config");

  uint64_t seed = 0;
  app.add_option("--seed", seed, "random seed for parameter initialization")
      ->envname("CALIB_SEED");

  // forward
  auto* fwd = app.add_subcommand("forward", "run the pipeline on one RGB-D pair");
  std::string fwd_rgb, fwd_depth, fwd_out = "forward_out", fwd_load, fwd_save;
  int fwd_kernels = 50, fwd_channels = 256;
  fwd->add_option("--rgb", fwd_rgb, "P6 color image")->required();
  fwd->add_option("--depth", fwd_depth, "P5 depth image")->required();
  fwd->add_option("--out", fwd_out, "output directory");
  fwd->add_option("--n-kernels", fwd_kernels, "instance kernel count");
  fwd->add_option("--channels", fwd_channels, "feature channels");
  fwd->add_option("--load-params", fwd_load, "parameter directory to load");
  fwd->add_option("--save-params", fwd_save, "parameter directory to write");

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "finite-difference checks of all backwards");
  double gc_eps = 1e-5, gc_tol = 1e-4;
  bool gc_pipeline = false;
  std::string gc_out;
  gc->add_option("--eps", gc_eps, "central-difference step");
  gc->add_option("--tol", gc_tol, "max relative error");
  gc->add_flag("--pipeline", gc_pipeline, "also check through the assembled pipeline");
  gc->add_option("--out", gc_out, "JSON report path");

  // match
  auto* mt = app.add_subcommand("match", "optimal assignment for a cost matrix");
  std::string mt_cost, mt_out;
  mt->add_option("--cost", mt_cost, "cost matrix in tensor text format")->required();
  mt->add_option("--out", mt_out, "JSON output path");

  // loss
  auto* ls = app.add_subcommand("loss", "loss breakdown for prediction/GT fixtures");
  std::string ls_preds, ls_gt, ls_regions, ls_out;
  ls->add_option("--preds", ls_preds, "predictions JSON (masks + scores)")->required();
  ls->add_option("--gt", ls_gt, "instance-index PGM")->required();
  ls->add_option("--region-preds", ls_regions, "region prediction JSON (optional)");
  ls->add_option("--out", ls_out, "JSON output path");

  // eval
  auto* ev = app.add_subcommand("eval", "mask AP over a dataset manifest");
  std::string ev_manifest, ev_preds, ev_out = "eval_out";
  ev->add_option("--manifest", ev_manifest, "dataset manifest JSON")->required();
  ev->add_option("--pred-dir", ev_preds, "directory of <id>.json prediction sets")->required();
  ev->add_option("--out-dir", ev_out, "output directory");

  // flops
  auto* fl = app.add_subcommand("flops", "parameter and MAC accounting");
  int fl_h = 40, fl_w = 60, fl_channels = 16, fl_kernels = 10;
  bool fl_compare = false, fl_pipeline = false;
  std::string fl_out;
  fl->add_option("--height", fl_h, "feature or input height")->required();
  fl->add_option("--width", fl_w, "feature or input width")->required();
  fl->add_flag("--compare-shared-weight", fl_compare,
               "compare the h x h affinity path against the hw x hw variant");
  fl->add_flag("--pipeline", fl_pipeline, "measure a full pipeline forward at this input size");
  fl->add_option("--channels", fl_channels, "pipeline channels");
  fl->add_option("--n-kernels", fl_kernels, "pipeline kernel count");
  fl->add_option("--out", fl_out, "JSON output path");

  // dataset-stats
  auto* st = app.add_subcommand("dataset-stats", "dataset QA curves and histograms");
  std::string st_manifest, st_out = "stats_out";
  int st_grid = 9, st_bins = 20;
  st->add_option("--manifest", st_manifest, "dataset manifest JSON")->required();
  st->add_option("--out-dir", st_out, "output directory");
  st->add_option("--grid", st_grid, "center-bias grid size");
  st->add_option("--bins", st_bins, "instance-size histogram bins");

  // selftest
  app.add_subcommand("selftest", "run built-in fixtures");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (fwd->parsed())
      return cmd_forward(fwd_rgb, fwd_depth, fwd_out, seed, fwd_kernels, fwd_channels,
                         fwd_load, fwd_save);
    if (gc->parsed()) return cmd_gradcheck(seed, gc_eps, gc_tol, gc_pipeline, gc_out);
    if (mt->parsed()) return cmd_match(mt_cost, mt_out);
    if (ls->parsed()) return cmd_loss(ls_preds, ls_gt, ls_regions, ls_out);
    if (ev->parsed()) return cmd_eval(ev_manifest, ev_preds, ev_out);
    if (fl->parsed())
      return cmd_flops(fl_h, fl_w, fl_compare, fl_pipeline, fl_channels, fl_kernels, fl_out);
    if (st->parsed()) return cmd_dataset_stats(st_manifest, st_out, st_grid, st_bins);
    return cmd_selftest();
  } catch (const value_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const shape_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::logic_error& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
}
