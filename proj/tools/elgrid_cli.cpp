// Command-line front end: detect modules and cell crossings in EL images,
// synthesize test fixtures, evaluate detections against annotations, and
// benchmark the pipeline.

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <glob.h>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "elgrid/elgrid.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitDetectionFailure = 1;
constexpr int kExitUsage = 2;

std::vector<std::string> expand_inputs(const std::string& pattern) {
  std::vector<std::string> out;
  if (pattern.find_first_of("*?[") != std::string::npos) {
    glob_t g{};
    const int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
    if (rc == 0)
      for (size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
    globfree(&g);
  } else {
    out.push_back(pattern);
  }
  std::sort(out.begin(), out.end());
  return out;
}

uint64_t seed_from_env_or(uint64_t fallback) {
  if (const char* env = std::getenv("EL_GRID_SEED")) {
    try {
      return std::stoull(env);
    } catch (...) {
      std::cerr << "warning: ignoring unparsable EL_GRID_SEED\n";
    }
  }
  return fallback;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out)
    elgrid::raise(elgrid::ErrorCode::IoError, "cannot write " + path.string());
  out << text;
}

void add_config_flags(CLI::App* cmd, elgrid::DetectorConfig& cfg) {
  cmd->add_option("--sigma-factor", cfg.sigma_factor,
                  "Smoothing as a fraction of the image extent");
  cmd->add_option("--module-k", cfg.module_threshold_k,
                  "Module extremum threshold in gradient sigmas");
  cmd->add_option("--patch-k", cfg.patch_threshold_k,
                  "Patch extremum threshold in gradient sigmas");
  cmd->add_option("--ransac-cell-fraction", cfg.ransac_inlier_cell_fraction,
                  "Inlier gate as a fraction of the cell size");
  cmd->add_option("--ransac-iterations", cfg.ransac_iterations,
                  "RANSAC iteration budget");
  cmd->add_option("--ransac-min-inlier-fraction",
                  cfg.ransac_min_inlier_fraction,
                  "Minimum consensus fraction before failing");
  cmd->add_option("--patch-px", cfg.patch_px,
                  "Patch resolution in pixels (0 = from cell size)");
  cmd->add_option("--orientation-margin", cfg.orientation_margin,
                  "Relative contrast needed to resolve the module pose");
}

void run_indexed(int n, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  const int workers = std::min(threads, n);
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  for (auto& t : pool) t.join();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------- detect

struct DetectArgs {
  std::string input;
  std::string out_dir = ".";
  int rows = 0;
  int cols = 0;
  bool overlay = false;
  bool print_json = false;
  int cells_px = 0;
  int threads = 1;
  elgrid::DetectorConfig cfg;
};

int run_detect(const DetectArgs& args) {
  const auto inputs = expand_inputs(args.input);
  if (inputs.empty()) {
    std::cerr << "error: no inputs match " << args.input << "\n";
    return kExitDetectionFailure;
  }
  fs::create_directories(args.out_dir);
  const int n = std::max(args.rows, args.cols);
  const int m = std::min(args.rows, args.cols);
  if (args.rows > args.cols)
    std::cerr << "note: mapping the long (rows=" << args.rows
              << ") side to the model N axis\n";

  struct ImageOutcome {
    std::string line;
    bool ok = false;
    double total_ms = 0.0;
  };
  std::vector<ImageOutcome> outcomes(inputs.size());

  run_indexed(static_cast<int>(inputs.size()), args.threads, [&](int idx) {
    const std::string& path = inputs[idx];
    const std::string stem = fs::path(path).stem().string();
    std::ostringstream line;
    try {
      const elgrid::GrayImage img = elgrid::load_image(path);
      const elgrid::DetectionResult result =
          elgrid::detect(img, n, m, args.cfg);
      const json j = elgrid::result_to_json(result, stem);
      write_text(fs::path(args.out_dir) / (stem + ".json"), j.dump(2) + "\n");
      if (args.overlay) {
        const auto rgb = elgrid::render_overlay(img, result);
        elgrid::save_png_rgb8(rgb, img.width(), img.height(),
                              (fs::path(args.out_dir) / (stem + ".overlay.png"))
                                  .string());
      }
      if (args.cells_px > 0) {
        const auto cells =
            elgrid::extract_cells(img, result.h, n, m, args.cells_px);
        const fs::path cell_dir = fs::path(args.out_dir) / (stem + ".cells");
        fs::create_directories(cell_dir);
        for (int cj = 0; cj < m; ++cj)
          for (int ci = 0; ci < n; ++ci)
            elgrid::save_png_gray16(
                cells[cj * n + ci],
                (cell_dir / ("cell_" + std::to_string(ci) + "_" +
                             std::to_string(cj) + ".png"))
                    .string());
      }
      if (args.print_json) line << j.dump(2) << "\n";
      line << "OK   " << stem << "  inliers "
           << result.crossings.consensus_size << "/"
           << result.crossings.entries.size() << "  total "
           << std::fixed << std::setprecision(1) << result.timings.total_ms
           << " ms";
      outcomes[idx] = {line.str(), true, result.timings.total_ms};
    } catch (const elgrid::Error& e) {
      try {
        write_text(fs::path(args.out_dir) / (stem + ".json"),
                   elgrid::failure_to_json(stem, m, n, e).dump(2) + "\n");
      } catch (...) {
      }
      line << "FAIL " << stem << "  " << e.what();
      outcomes[idx] = {line.str(), false, 0.0};
    } catch (const std::exception& e) {
      line << "FAIL " << stem << "  " << e.what();
      outcomes[idx] = {line.str(), false, 0.0};
    }
  });

  int failures = 0;
  double total_ms = 0.0;
  int ok_count = 0;
  for (const auto& o : outcomes) {
    std::cout << o.line << "\n";
    if (o.ok) {
      ++ok_count;
      total_ms += o.total_ms;
    } else {
      ++failures;
    }
  }
  std::cout << "processed " << inputs.size() << " image(s), " << failures
            << " failure(s)";
  if (ok_count > 0)
    std::cout << ", mean " << std::fixed << std::setprecision(1)
              << total_ms / ok_count << " ms/image";
  std::cout << "\n";
  return failures == 0 ? kExitOk : kExitDetectionFailure;
}

// ----------------------------------------------------------------- synth

json truth_to_json(const elgrid::RenderedScene& scene, int cols, int rows) {
  json truth;
  truth["cols"] = cols;
  truth["rows"] = rows;
  truth["h"] = scene.h_true.normalized().h;
  auto corners = json::array();
  for (const auto& p : scene.corners) corners.push_back({p.x, p.y});
  truth["corners"] = corners;
  auto lattice = json::array();
  const int n1 = cols + 1;
  for (size_t t = 0; t < scene.lattice.size(); ++t) {
    const int i = static_cast<int>(t) % n1;
    const int j = static_cast<int>(t) / n1;
    lattice.push_back({{"i", i},
                       {"j", j},
                       {"x", scene.lattice[t].x},
                       {"y", scene.lattice[t].y}});
  }
  truth["lattice"] = lattice;
  if (!scene.neighbor_corners.empty()) {
    auto neigh = json::array();
    for (const auto& q : scene.neighbor_corners) {
      auto quad = json::array();
      for (const auto& p : q) quad.push_back({p.x, p.y});
      neigh.push_back(quad);
    }
    truth["neighbors"] = neigh;
  }
  return truth;
}

void emit_scene(const elgrid::SceneSpec& spec, uint64_t seed,
                const fs::path& out_dir, const std::string& name) {
  const elgrid::RenderedScene scene = elgrid::render(spec, seed);
  elgrid::save_png_gray16(scene.image, (out_dir / (name + ".png")).string());
  write_text(out_dir / (name + ".truth.json"),
             truth_to_json(scene, spec.n_cols, spec.m_rows).dump(2) + "\n");
  json annotation;
  auto poly = json::array();
  for (const auto& p : scene.corners) poly.push_back({p.x, p.y});
  annotation["polygon"] = poly;
  write_text(out_dir / (name + ".annotation.json"), annotation.dump(2) + "\n");
  write_text(out_dir / (name + ".scene.json"), json(spec).dump(2) + "\n");
  std::cout << "wrote " << (out_dir / name).string() << ".{png,truth,annotation}"
            << "\n";
}

int run_synth(const std::string& suite, const std::string& spec_path,
              const std::string& out_dir, uint64_t seed, int count) {
  fs::create_directories(out_dir);
  if (!spec_path.empty()) {
    std::ifstream in(spec_path);
    if (!in)
      elgrid::raise(elgrid::ErrorCode::IoError, "cannot read " + spec_path);
    const json j = json::parse(in);
    const auto spec = j.get<elgrid::SceneSpec>();
    emit_scene(spec, seed, out_dir, fs::path(spec_path).stem().string());
    return kExitOk;
  }
  if (suite == "frontal") {
    for (int k = 0; k < count; ++k) {
      elgrid::SceneSpec spec;
      spec.noise_sigma = 0.01;
      std::ostringstream name;
      name << "frontal_" << std::setw(2) << std::setfill('0') << k;
      emit_scene(spec, seed + k, out_dir, name.str());
    }
  } else if (suite == "tilt-sweep") {
    for (int k = 0; k < 9; ++k) {
      elgrid::SceneSpec spec;
      spec.tilt_deg = 10.0 * k;
      spec.noise_sigma = 0.01;
      std::ostringstream name;
      name << "tilt_" << std::setw(2) << std::setfill('0') << 10 * k;
      emit_scene(spec, seed + k, out_dir, name.str());
    }
  } else if (suite == "multi-module") {
    for (int k = 0; k < count; ++k) {
      elgrid::SceneSpec spec;
      spec.noise_sigma = 0.01;
      spec.fill = 0.55;
      spec.neighbor_offsets.push_back({k % 2 ? 10.8 : -10.8, 0.0});
      if (k % 3 == 0) spec.neighbor_offsets.push_back({0.0, 6.8});
      std::ostringstream name;
      name << "multi_" << std::setw(2) << std::setfill('0') << k;
      emit_scene(spec, seed + k, out_dir, name.str());
    }
  } else {
    std::cerr << "error: unknown suite '" << suite << "'\n";
    return kExitUsage;
  }
  return kExitOk;
}

// ------------------------------------------------------------------ eval

int run_eval(const std::string& pred_dir, const std::string& truth_dir,
             std::string csv_path) {
  std::vector<elgrid::EvalRecord> records;
  std::vector<fs::path> pred_files;
  for (const auto& entry : fs::directory_iterator(pred_dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.path().extension() == ".json" &&
        name.find(".truth.") == std::string::npos &&
        name.find(".annotation.") == std::string::npos &&
        name.find(".scene.") == std::string::npos)
      pred_files.push_back(entry.path());
  }
  std::sort(pred_files.begin(), pred_files.end());
  if (pred_files.empty()) {
    std::cerr << "error: no prediction JSON files in " << pred_dir << "\n";
    return kExitDetectionFailure;
  }

  for (const auto& pred_path : pred_files) {
    const std::string stem = pred_path.stem().string();
    fs::path truth_path = fs::path(truth_dir) / (stem + ".annotation.json");
    if (!fs::exists(truth_path))
      truth_path = fs::path(truth_dir) / (stem + ".json");
    if (!fs::exists(truth_path))
      elgrid::raise(elgrid::ErrorCode::IoError,
                    "no annotation for image id '" + stem + "' in " +
                        truth_dir);
    std::ifstream pin(pred_path), tin(truth_path);
    const json pred = json::parse(pin);
    const json truth = json::parse(tin);

    elgrid::EvalRecord rec;
    rec.id = stem;
    for (const auto& v : truth.at("polygon"))
      rec.truth.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
    if (const auto corners = elgrid::corners_from_result(pred)) {
      rec.detected = elgrid::Polygon(corners->begin(), corners->end());
    }
    elgrid::record_iou(rec);
    records.push_back(std::move(rec));
  }

  const auto curve = elgrid::recall_curve(records);
  std::cout << "image                              IoU  detected\n";
  for (const auto& r : records)
    std::cout << std::left << std::setw(34) << r.id << std::right
              << std::fixed << std::setprecision(4) << r.iou << "  "
              << (r.detected ? "yes" : "no") << "\n";
  std::cout << std::setprecision(4) << "recall@0.50 "
            << elgrid::recall_at(records, 0.50) << "\nrecall@0.70 "
            << elgrid::recall_at(records, 0.70) << "\nrecall@0.90 "
            << elgrid::recall_at(records, 0.90) << "\nAUC[0.5,1.0] "
            << curve.auc << "\n";

  if (csv_path.empty())
    csv_path = (fs::path(pred_dir) / "eval.csv").string();
  std::ostringstream csv;
  csv << "image,iou,detected\n";
  for (const auto& r : records)
    csv << r.id << "," << std::setprecision(17) << r.iou << ","
        << (r.detected ? 1 : 0) << "\n";
  write_text(csv_path, csv.str());
  std::cout << "wrote " << csv_path << "\n";
  return kExitOk;
}

// ----------------------------------------------------------------- bench

int run_bench(const std::string& input, int repeat, bool raw, int rows,
              int cols, const elgrid::DetectorConfig& cfg) {
  const auto inputs = expand_inputs(input);
  if (inputs.empty()) {
    std::cerr << "error: no inputs match " << input << "\n";
    return kExitDetectionFailure;
  }
  const int n = std::max(rows, cols), m = std::min(rows, cols);

  double sum_total = 0.0, sum_module = 0.0, sum_patches = 0.0, sum_ransac = 0.0;
  int ok = 0;
  std::cout << "image                              module  patches  ransac   "
               "total (median of " << repeat << ")\n";
  for (const auto& path : inputs) {
    try {
      std::vector<double> t_total, t_module, t_patches, t_ransac;
      elgrid::GrayImage img = elgrid::load_image(path);
      for (int r = 0; r < repeat; ++r) {
        if (!raw && r > 0) img = elgrid::load_image(path);
        const auto result = elgrid::detect(img, n, m, cfg);
        t_total.push_back(result.timings.total_ms);
        t_module.push_back(result.timings.module_ms);
        t_patches.push_back(result.timings.patches_ms);
        t_ransac.push_back(result.timings.ransac_ms);
      }
      const double med_total = median(t_total);
      sum_total += med_total;
      sum_module += median(t_module);
      sum_patches += median(t_patches);
      sum_ransac += median(t_ransac);
      ++ok;
      std::cout << std::left << std::setw(34)
                << fs::path(path).stem().string() << std::right << std::fixed
                << std::setprecision(1) << std::setw(7) << median(t_module)
                << std::setw(9) << median(t_patches) << std::setw(8)
                << median(t_ransac) << std::setw(8) << med_total << " ms\n";
    } catch (const elgrid::Error& e) {
      std::cout << std::left << std::setw(34)
                << fs::path(path).stem().string() << "FAILED: " << e.what()
                << "\n";
    }
  }
  if (ok > 0) {
    std::cout << std::fixed << std::setprecision(1) << "mean raw per image: "
              << sum_total / ok << " ms (module " << sum_module / ok
              << ", patches " << sum_patches / ok << ", ransac "
              << sum_ransac / ok << ")\n";
  }
  return ok == static_cast<int>(inputs.size()) ? kExitOk
                                               : kExitDetectionFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Solar module and cell-crossing detection in EL images"};
  app.require_subcommand(1);

  DetectArgs det;
  uint64_t seed_flag = 0;
  bool seed_given = false;
  auto* detect_cmd =
      app.add_subcommand("detect", "Detect modules and cell crossings");
  detect_cmd->add_option("--input", det.input, "Image path or glob")
      ->required();
  detect_cmd->add_option("--rows", det.rows, "Cell rows (M)")->required();
  detect_cmd->add_option("--cols", det.cols, "Cell columns (N)")->required();
  detect_cmd->add_option("--out", det.out_dir, "Output directory");
  detect_cmd->add_flag("--overlay", det.overlay,
                       "Write an overlay PNG per image");
  detect_cmd->add_flag("--json", det.print_json,
                       "Also print result JSON to stdout");
  detect_cmd->add_option("--cells", det.cells_px,
                         "Write rectified cell images at this resolution");
  detect_cmd->add_option("--threads", det.threads, "Batch worker threads");
  detect_cmd->add_option("--seed", seed_flag, "Detector PRNG seed")
      ->each([&](const std::string&) { seed_given = true; });
  add_config_flags(detect_cmd, det.cfg);

  std::string synth_suite = "frontal", synth_spec, synth_out = ".";
  int synth_count = 1;
  uint64_t synth_seed = 0;
  auto* synth_cmd =
      app.add_subcommand("synth", "Generate synthetic fixture scenes");
  synth_cmd->add_option("--suite", synth_suite,
                        "frontal | tilt-sweep | multi-module");
  synth_cmd->add_option("--spec", synth_spec, "Scene spec JSON file");
  synth_cmd->add_option("--out", synth_out, "Output directory");
  synth_cmd->add_option("--seed", synth_seed, "Render seed");
  synth_cmd->add_option("--count", synth_count, "Scenes per suite");

  std::string eval_pred, eval_truth, eval_csv;
  auto* eval_cmd =
      app.add_subcommand("eval", "Score detections against annotations");
  eval_cmd->add_option("--pred", eval_pred, "Directory of result JSON")
      ->required();
  eval_cmd->add_option("--truth", eval_truth, "Directory of annotation JSON")
      ->required();
  eval_cmd->add_option("--csv", eval_csv, "CSV output path");

  std::string bench_input;
  int bench_repeat = 5, bench_rows = 6, bench_cols = 10, bench_threads = 1;
  bool bench_raw = false;
  elgrid::DetectorConfig bench_cfg;
  auto* bench_cmd = app.add_subcommand("bench", "Time the pipeline");
  bench_cmd->add_option("--input", bench_input, "Image path or glob")
      ->required();
  bench_cmd->add_option("--repeat", bench_repeat, "Repeats per image");
  bench_cmd->add_flag("--raw", bench_raw,
                      "Exclude image loading from the timed region");
  bench_cmd->add_option("--rows", bench_rows, "Cell rows (M)");
  bench_cmd->add_option("--cols", bench_cols, "Cell columns (N)");
  bench_cmd->add_option("--threads", bench_threads,
                        "Timed region is always single-threaded");
  add_config_flags(bench_cmd, bench_cfg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (detect_cmd->parsed()) {
      det.cfg.seed = seed_given ? seed_flag : seed_from_env_or(det.cfg.seed);
      return run_detect(det);
    }
    if (synth_cmd->parsed())
      return run_synth(synth_suite, synth_spec, synth_out, synth_seed,
                       synth_count);
    if (eval_cmd->parsed()) return run_eval(eval_pred, eval_truth, eval_csv);
    if (bench_cmd->parsed()) {
      if (bench_threads != 1)
        std::cerr << "note: benchmark timings are per-image and "
                     "single-threaded; --threads is ignored\n";
      return run_bench(bench_input, bench_repeat, bench_raw, bench_rows,
                       bench_cols, bench_cfg);
    }
  } catch (const elgrid::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDetectionFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDetectionFailure;
  }
  return kExitUsage;
}
