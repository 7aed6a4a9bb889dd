// Copyright 2026 msrf authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "msrf/metrics.hpp"
#include "msrf/trainer.hpp"

namespace fs = std::filesystem;
using namespace msrf;

namespace {

const char* kAblationNames[] = {"no_multilevel_sup", "no_data_schedule",
                                "no_growing", "no_skip", "no_residual"};

std::string roman(int n) {
  static const char* r[] = {"",  "I",  "II",  "III",  "IV",
                            "V", "VI", "VII", "VIII", "IX"};
  return n > 0 && n < 10 ? r[n] : std::to_string(n);
}

struct RunSettings {
  FieldConfig field;
  TrainConfig train;
  std::string precision = "fp64";
};

// Flat key=value config file; '#' starts a comment.
void apply_config_file(const std::string& path, RunSettings& s) {
  std::ifstream in(path);
  if (!in) throw RuntimeError("cannot open config file " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::string trimmed;
    for (char c : line)
      if (!std::isspace(static_cast<unsigned char>(c))) trimmed += c;
    if (trimmed.empty()) continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string::npos)
      throw InputError(path + ":" + std::to_string(lineno) +
                       ": expected key=value");
    const std::string key = trimmed.substr(0, eq);
    const std::string value = trimmed.substr(eq + 1);
    auto as_int = [&] { return std::stoi(value); };
    auto as_double = [&] { return std::stod(value); };
    auto as_bool = [&] {
      if (value == "true" || value == "1") return true;
      if (value == "false" || value == "0") return false;
      throw InputError(path + ": bad boolean for " + key);
    };
    if (key == "width") s.field.width = as_int();
    else if (key == "d_base") s.field.d_base = as_int();
    else if (key == "d_res") s.field.d_res = as_int();
    else if (key == "m_pos") s.field.encoding.m_pos = as_int();
    else if (key == "m_dir") s.field.encoding.m_dir = as_int();
    else if (key == "t_stage") s.train.t_stage = as_int();
    else if (key == "batch") s.train.batch = as_int();
    else if (key == "samples_per_ray") s.train.samples_per_ray = as_int();
    else if (key == "base_lr") s.train.base_lr = as_double();
    else if (key == "lr_final") s.train.lr_final = as_double();
    else if (key == "seed") s.train.seed = std::stoull(value);
    else if (key == "threads") s.train.threads = as_int();
    else if (key == "log_every") s.train.log_every = as_int();
    else if (key == "deterministic") s.train.deterministic = as_bool();
    else if (key == "white_background") s.train.white_background = as_bool();
    else if (key == "jitter") s.train.jitter = as_bool();
    else if (key == "eval_each_stage") s.train.eval_each_stage = as_bool();
    else if (key == "precision") {
      if (value != "fp64" && value != "fp32")
        throw InputError("precision must be fp64 or fp32");
      s.precision = value;
    } else {
      throw InputError(path + ":" + std::to_string(lineno) +
                       ": unknown key '" + key + "'");
    }
  }
}

void write_resolved_config(const RunSettings& s, const std::string& path) {
  std::ofstream out(path);
  out << "width=" << s.field.width << "\n"
      << "d_base=" << s.field.d_base << "\n"
      << "d_res=" << s.field.d_res << "\n"
      << "m_pos=" << s.field.encoding.m_pos << "\n"
      << "m_dir=" << s.field.encoding.m_dir << "\n"
      << "t_stage=" << s.train.t_stage << "\n"
      << "batch=" << s.train.batch << "\n"
      << "samples_per_ray=" << s.train.samples_per_ray << "\n"
      << "base_lr=" << s.train.base_lr << "\n"
      << "lr_final=" << s.train.lr_final << "\n"
      << "seed=" << s.train.seed << "\n"
      << "threads=" << s.train.threads << "\n"
      << "log_every=" << s.train.log_every << "\n"
      << "deterministic=" << (s.train.deterministic ? "true" : "false") << "\n"
      << "white_background=" << (s.train.white_background ? "true" : "false")
      << "\n"
      << "jitter=" << (s.train.jitter ? "true" : "false") << "\n"
      << "eval_each_stage=" << (s.train.eval_each_stage ? "true" : "false")
      << "\n"
      << "precision=" << s.precision << "\n";
  std::string ablations;
  for (const char* name : kAblationNames) {
    const bool on = (std::string(name) == "no_multilevel_sup" &&
                     s.train.no_multilevel_sup) ||
                    (std::string(name) == "no_data_schedule" &&
                     s.train.no_data_schedule) ||
                    (std::string(name) == "no_growing" && s.train.no_growing) ||
                    (std::string(name) == "no_skip" && s.train.no_skip) ||
                    (std::string(name) == "no_residual" && s.train.no_residual);
    if (on) ablations += ablations.empty() ? name : std::string(",") + name;
  }
  out << "ablate=" << ablations << "\n";
}

void apply_ablations(const std::string& list, TrainConfig& t) {
  std::stringstream ss(list);
  std::string name;
  while (std::getline(ss, name, ',')) {
    if (name.empty()) continue;
    if (name == "no_multilevel_sup") t.no_multilevel_sup = true;
    else if (name == "no_data_schedule") t.no_data_schedule = true;
    else if (name == "no_growing") t.no_growing = true;
    else if (name == "no_skip") t.no_skip = true;
    else if (name == "no_residual") t.no_residual = true;
    else {
      std::string valid;
      for (const char* v : kAblationNames) valid += std::string(" ") + v;
      throw InputError("unknown ablation '" + name + "'; valid names:" + valid);
    }
  }
}

Image to_image(const MatXd& colors, int width, int height) {
  Image img(width, height);
  for (Eigen::Index i = 0; i < colors.cols(); ++i)
    for (int c = 0; c < 3; ++c) img.rgb[3 * i + c] = colors(c, i);
  return img;
}

void write_stage_log(const StageLog& log, const std::string& dir) {
  std::ofstream rec(fs::path(dir) / "stagelog.txt");
  rec << "# iter stage head loss lr\n";
  char buf[160];
  for (const auto& r : log.records) {
    std::snprintf(buf, sizeof(buf), "%lld %d %d %.10e %.10e\n", r.iter,
                  r.stage, r.head, r.loss, r.lr);
    rec << buf;
  }
  std::ofstream sum(fs::path(dir) / "stage_summary.txt");
  sum << "# per-stage metrics; psnr/ssim at the scale-matched head and the "
         "deepest head\n";
  for (const auto& s : log.stages) {
    std::snprintf(buf, sizeof(buf), "stage %d params %lld wall_s %.1f\n",
                  s.stage, s.param_count, s.wall_seconds);
    sum << buf;
    for (const auto& m : s.scales) {
      std::snprintf(buf, sizeof(buf),
                    "  scale %s psnr_match %.4f ssim_match %.4f psnr_final "
                    "%.4f ssim_final %.4f\n",
                    roman(m.scale).c_str(), m.psnr_match, m.ssim_match,
                    m.psnr_final, m.ssim_final);
      sum << buf;
    }
  }
}

// Per-scale and averaged PSNR/SSIM on the test split at the given head.
std::string eval_table(const FieldParams<double>& field,
                       const StagedDataset& ds, int head, int samples) {
  RenderImageOptions ropt;
  ropt.n_samples = samples;
  ropt.jitter = false;
  std::vector<std::vector<double>> ps(ds.l_max + 1), ss(ds.l_max + 1);
  for (const DatasetImage& im : ds.images) {
    if (im.split != "test") continue;
    auto [colors, depth] = render_image(field, im.camera, head, ropt);
    const Image rendered = to_image(colors, im.camera.width, im.camera.height);
    ps[im.stage].push_back(psnr(rendered, im.pixels));
    ss[im.stage].push_back(ssim(rendered, im.pixels));
  }
  auto mean = [](const std::vector<double>& v) {
    double a = 0;
    for (double x : v) a += x;
    return v.empty() ? 0.0 : a / double(v.size());
  };
  std::ostringstream out;
  char buf[64];
  out << "head " << head << "\nmetric";
  for (int l = 1; l <= ds.l_max; ++l) out << " Stage_" << roman(l);
  out << " Avg\npsnr";
  double acc = 0;
  for (int l = 1; l <= ds.l_max; ++l) {
    const double v = mean(ps[l]);
    acc += v;
    std::snprintf(buf, sizeof(buf), " %.4f", v);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), " %.4f", acc / ds.l_max);
  out << buf << "\nssim";
  acc = 0;
  for (int l = 1; l <= ds.l_max; ++l) {
    const double v = mean(ss[l]);
    acc += v;
    std::snprintf(buf, sizeof(buf), " %.4f", v);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), " %.4f", acc / ds.l_max);
  out << buf << "\n";
  return out.str();
}

int run(int argc, char** argv) {
  CLI::App app{"Progressive multi-scale radiance fields"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a synthetic orbit dataset");
  uint64_t gen_seed = 1;
  int gen_lmax = 2, gen_views = 4, gen_bands = 9, gen_boxes = 6;
  int gen_width = 96, gen_height = 96;
  double gen_dmin = 1.2;
  std::string gen_out;
  bool gen_force = false;
  gen->add_option("--seed", gen_seed);
  gen->add_option("--lmax", gen_lmax);
  gen->add_option("--views-per-scale", gen_views);
  gen->add_option("--out", gen_out)->required();
  gen->add_option("--bands", gen_bands);
  gen->add_option("--boxes", gen_boxes);
  gen->add_option("--width", gen_width);
  gen->add_option("--height", gen_height);
  gen->add_option("--dmin", gen_dmin);
  gen->add_flag("--force", gen_force);

  // train
  auto* train = app.add_subcommand("train", "Run the curriculum trainer");
  std::string train_data, train_config, train_out, train_ablate;
  uint64_t train_seed = 0;
  bool train_seed_set = false, train_det = false;
  int train_threads = 0;
  train->add_option("--data", train_data)->required();
  train->add_option("--config", train_config);
  train->add_option("--out", train_out)->required();
  train->add_option("--ablate", train_ablate);
  train->add_option("--seed", train_seed);
  train->add_flag("--deterministic", train_det);
  train->add_option("--threads", train_threads);

  // render
  auto* render = app.add_subcommand("render", "Render dataset views");
  std::string ren_ckpt, ren_data, ren_out, ren_split = "test";
  int ren_head = 0, ren_samples = 64;
  render->add_option("--ckpt", ren_ckpt)->required();
  render->add_option("--data", ren_data)->required();
  render->add_option("--head", ren_head);
  render->add_option("--split", ren_split);
  render->add_option("--out", ren_out)->required();
  render->add_option("--samples", ren_samples);

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate test-split metrics");
  std::string ev_ckpt, ev_data, ev_out;
  int ev_head = 0, ev_samples = 64;
  eval->add_option("--ckpt", ev_ckpt)->required();
  eval->add_option("--data", ev_data)->required();
  eval->add_option("--head", ev_head);
  eval->add_option("--out", ev_out);
  eval->add_option("--samples", ev_samples);

  // diag
  auto* diag = app.add_subcommand("diag", "Frequency-band weight report");
  std::string dg_ckpt;
  diag->add_option("--ckpt", dg_ckpt)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;  // usage error
  }
  train_seed_set = train->count("--seed") > 0;

  if (gen->parsed()) {
    if (gen_lmax < 1) throw InputError("--lmax must be >= 1");
    if (fs::exists(gen_out) && !fs::is_empty(gen_out) && !gen_force)
      throw InputError("output dir " + gen_out +
                       " is not empty (use --force to overwrite)");
    SyntheticScene scene = build_synthetic_scene(gen_seed, gen_bands, gen_boxes);
    OrbitOptions opt;
    opt.width = gen_width;
    opt.height = gen_height;
    opt.d_min = gen_dmin;
    StagedDataset ds =
        generate_orbit_dataset(scene, gen_lmax, gen_views, gen_seed, opt);
    save_dataset(ds, gen_out);
    std::cout << "wrote " << ds.images.size() << " images to " << gen_out
              << "\n";
  } else if (train->parsed()) {
    if (!fs::exists(train_data))
      throw InputError("dataset dir not found: " + train_data);
    RunSettings s;
    if (!train_config.empty()) apply_config_file(train_config, s);
    apply_ablations(train_ablate, s.train);
    if (train_seed_set) s.train.seed = train_seed;
    if (train_det) s.train.deterministic = true;
    if (train_threads > 0) s.train.threads = train_threads;
    if (s.train.deterministic && s.train.threads == 0) s.train.threads = 1;
    StagedDataset ds = load_dataset(train_data);
    fs::create_directories(train_out);
    s.train.diagnostic_path =
        (fs::path(train_out) / "diverged_snapshot.ckpt").string();
    write_resolved_config(s, (fs::path(train_out) / "config_resolved.txt").string());
    auto save_stage = [&](const FieldParams<double>& f, int stage) {
      save_params(f, (fs::path(train_out) /
                      ("ckpt_stage_" + std::to_string(stage) + ".bin"))
                         .string());
      save_params(f, (fs::path(train_out) / "final.ckpt").string());
    };
    StageLog log;
    if (s.precision == "fp32") {
      auto res = run_curriculum<float>(
          ds, s.field, s.train,
          [&](const FieldParams<float>& f, int stage) {
            save_stage(f.cast<double>(), stage);
          });
      log = std::move(res.log);
    } else {
      auto res = run_curriculum<double>(ds, s.field, s.train, save_stage);
      log = std::move(res.log);
    }
    write_stage_log(log, train_out);
    std::cout << "training complete; checkpoints in " << train_out << "\n";
  } else if (render->parsed()) {
    FieldParams<double> field = load_params(ren_ckpt);
    const int head = ren_head == 0 ? field.current_depth : ren_head;
    if (head < 1 || head > field.current_depth)
      throw InputError("--head exceeds checkpoint depth " +
                       std::to_string(field.current_depth));
    StagedDataset ds = load_dataset(ren_data);
    fs::create_directories(ren_out);
    RenderImageOptions ropt;
    ropt.n_samples = ren_samples;
    int count = 0;
    for (const DatasetImage& im : ds.images) {
      if (im.split != ren_split) continue;
      auto [colors, depth] = render_image(field, im.camera, head, ropt);
      const std::string stem =
          fs::path(im.file).stem().string() + "_head" + std::to_string(head);
      write_png(to_image(colors, im.camera.width, im.camera.height),
                (fs::path(ren_out) / (stem + ".png")).string());
      const SceneBounds bounds{field.config.encoding.scene_center,
                               field.config.encoding.scene_radius};
      const Ray probe = generate_ray(im.camera, 0, 0, bounds);
      std::vector<double> d(depth.data(), depth.data() + depth.size());
      write_depth_png(d, im.camera.width, im.camera.height, probe.t_near,
                      probe.t_far,
                      (fs::path(ren_out) / (stem + "_depth.png")).string());
      ++count;
    }
    std::cout << "rendered " << count << " views to " << ren_out << "\n";
  } else if (eval->parsed()) {
    FieldParams<double> field = load_params(ev_ckpt);
    const int head = ev_head == 0 ? field.current_depth : ev_head;
    if (head < 1 || head > field.current_depth)
      throw InputError("--head exceeds checkpoint depth " +
                       std::to_string(field.current_depth));
    StagedDataset ds = load_dataset(ev_data);
    const std::string table = eval_table(field, ds, head, ev_samples);
    std::cout << table;
    if (!ev_out.empty()) {
      std::ofstream out(ev_out);
      if (!out) throw RuntimeError("cannot write " + ev_out);
      out << table;
    }
  } else if (diag->parsed()) {
    FieldParams<double> field = load_params(dg_ckpt);
    const int blocks =
        field.config.skip_connections ? field.current_depth : 1;
    for (int b = 0; b < blocks; ++b) {
      const VecXd mass = freq_channel_weights(field, b);
      std::cout << (b == 0 ? "base block PE input\n"
                           : "residual block " + std::to_string(b + 1) +
                                 " skip input\n");
      for (int j = 0; j < mass.size(); ++j) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "  band 2^%-2d %.4f ", j, mass[j]);
        std::cout << buf;
        const int bars = static_cast<int>(std::lround(mass[j] * 200));
        for (int i = 0; i < bars; ++i) std::cout << '#';
        std::cout << "\n";
      }
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
