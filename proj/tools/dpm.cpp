// dpm: command-line driver for the segmentation pipeline.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>

#include "dpm/agent.hpp"
#include "dpm/config.hpp"
#include "dpm/field.hpp"
#include "dpm/io.hpp"
#include "dpm/metrics.hpp"
#include "dpm/model.hpp"
#include "dpm/patches.hpp"
#include "dpm/synth.hpp"

namespace fs = std::filesystem;
using namespace dpm;

namespace {

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;

  // synth
  std::string spec_path;
  std::size_t n = 0;
  std::string out;

  // field
  std::string mask;

  // dataset
  std::string manifest;
  std::string split = "train";

  // train
  std::string dataset;

  // segment
  std::string image;
  std::string model;
  double seed_x = 0.0;
  double seed_y = 0.0;
  std::optional<double> heading_x;
  std::optional<double> heading_y;
  std::string oracle_field;
  std::string traj;

  // eval
  std::vector<std::string> pred;
  std::vector<std::string> truth;
  double spacing = 1.0;

  // render
  std::string field;
  std::string contour;
};

config::RunConfig run_config(const Options& o) {
  auto cfg = o.config_path.empty() ? config::RunConfig{} : config::load(o.config_path);
  return config::apply_overrides(cfg, o.overrides);
}

void add_config_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config_path, "Run configuration JSON")->check(CLI::ExistingFile);
  cmd->add_option("--set", o.overrides, "Override a config key (key=value), repeatable");
}

int cmd_synth(const Options& o) {
  const auto spec = synth::ShapeSpec::from_json(nlohmann::json::parse(io::read_text(o.spec_path)));
  const auto samples = synth::gen_dataset(o.n, spec);
  fs::create_directories(o.out);
  io::Manifest m;
  m.spec = spec.to_json();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%04zu", i);
    const std::string image = std::string("image_") + name + ".pgm";
    const std::string mask = std::string("mask_") + name + ".pgm";
    io::write_pgm(samples[i].image, (fs::path(o.out) / image).string());
    io::write_pgm(samples[i].mask, (fs::path(o.out) / mask).string());
    m.pairs.push_back({image, mask});
  }
  io::write_manifest(m, (fs::path(o.out) / "manifest.json").string());
  std::cout << "wrote " << samples.size() << " pairs to " << o.out << "\n";
  return 0;
}

int cmd_field(const Options& o) {
  field::save_field(field::build_dynamic(io::read_pgm_mask(o.mask)), o.out);
  return 0;
}

std::vector<patches::ImageMaskPair> load_pairs(const Options& o, const config::RunConfig& cfg) {
  const auto m = io::read_manifest(o.manifest);
  std::vector<patches::ImageMaskPair> pairs;
  for (std::size_t i = 0; i < m.pairs.size(); ++i) {
    if (o.split == "train" && !synth::is_train_index(i)) continue;
    if (o.split == "test" && synth::is_train_index(i)) continue;
    pairs.emplace_back(io::read_pgm_image(m.pairs[i].image, cfg.spacing_mm), io::read_pgm_mask(m.pairs[i].mask));
  }
  return pairs;
}

int cmd_dataset(const Options& o) {
  const auto cfg = run_config(o);
  const auto pairs = load_pairs(o, cfg);
  const auto dcfg = cfg.dataset();
  patches::LazySource src(pairs, patches::plan_dataset(pairs, dcfg), dcfg.patch_size, dcfg.h);
  patches::write_dataset(src, o.out);
  std::cout << "wrote " << src.size() << " samples from " << pairs.size() << " images to " << o.out << "\n";
  return 0;
}

int cmd_train(const Options& o) {
  const auto cfg = run_config(o);
  patches::FileSource src(o.dataset);
  if (src.patch_size() != cfg.patch_size) {
    throw Error(Errc::ShapeMismatch, "dataset patch size " + std::to_string(src.patch_size()) +
                                         " differs from config patch_size " + std::to_string(cfg.patch_size));
  }
  auto tcfg = cfg.train();
  tcfg.on_epoch = [](int epoch, double loss) {
    std::cout << "epoch " << epoch + 1 << " loss " << io::format_double(loss) << std::endl;
  };
  auto result = model::train(src, model::init_model<float>(cfg.arch, cfg.model_seed), tcfg);
  model::save_checkpoint(result.model, o.out);
  return 0;
}

int cmd_segment(const Options& o) {
  const auto cfg = run_config(o);
  const auto img = io::read_pgm_image(o.image, cfg.spacing_mm);
  std::optional<field::FieldBundle> fb;
  std::optional<model::PolicyModel> net;
  agent::Policy policy;
  if (!o.oracle_field.empty()) {
    fb = field::load_field(o.oracle_field);
    if (fb->width() != img.width() || fb->height() != img.height()) {
      throw Error(Errc::DimensionMismatch, "field and image dimensions differ");
    }
    policy = agent::OraclePolicy{&*fb};
  } else if (!o.model.empty()) {
    net = model::load_checkpoint(o.model);
    if (net->arch.input_size != cfg.patch_size) {
      throw Error(Errc::ShapeMismatch, "model input size differs from config patch_size");
    }
    policy = agent::LearnedPolicy{&*net};
  } else {
    throw CLI::ValidationError("segment", "one of --model or --oracle-field is required");
  }
  std::optional<Vec2> heading;
  if (o.heading_x || o.heading_y) heading = Vec2{o.heading_x.value_or(0.0), o.heading_y.value_or(0.0)};
  std::mt19937_64 rng(cfg.rollout_seed);
  const auto init = agent::init_state({o.seed_x, o.seed_y}, heading, rng, img.width(), img.height(), cfg.patch_size);
  try {
    const auto result = agent::rollout(policy, img, init, cfg.step(), cfg.stop());
    io::write_contour_csv(result.contour, o.out);
    if (!o.traj.empty()) io::write_trajectory_csv(result.trajectory, o.traj);
    std::cout << "converged after " << result.trajectory.back().t << " steps\n";
  } catch (const agent::NonConvergence& e) {
    if (!o.traj.empty()) io::write_trajectory_csv(e.partial(), o.traj);
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

int cmd_eval(const Options& o) {
  if (o.pred.size() != o.truth.size()) {
    throw CLI::ValidationError("eval", "--pred and --truth must be given the same number of times");
  }
  std::vector<geometry::Contour> preds;
  std::vector<BinaryMask> truths;
  for (std::size_t i = 0; i < o.pred.size(); ++i) {
    preds.push_back(io::read_contour_csv(o.pred[i]));
    truths.push_back(io::read_pgm_mask(o.truth[i]));
    const auto& m = truths.back();
    for (const Vec2& p : preds.back()) {
      if (p.x < -0.5 || p.y < -0.5 || p.x > m.width() - 0.5 || p.y > m.height() - 0.5) {
        throw Error(Errc::DimensionMismatch, "contour '" + o.pred[i] + "' leaves the " + std::to_string(m.width()) +
                                                 "x" + std::to_string(m.height()) + " grid of '" + o.truth[i] + "'");
      }
    }
  }
  std::vector<metrics::MetricsReport> reports(preds.size());
  for_each_index(Exec::Parallel, static_cast<std::int64_t>(preds.size()), [&](std::int64_t i) {
    const auto k = static_cast<std::size_t>(i);
    reports[k] = metrics::evaluate(preds[k], truths[k], o.spacing);
  });
  io::write_text(metrics::report_json(reports).dump(2) + "\n", o.out);
  return 0;
}

int cmd_render(const Options& o) {
  std::optional<field::FieldBundle> fb;
  std::optional<agent::Trajectory> traj;
  std::optional<geometry::Contour> contour;
  io::SvgLayers layers;
  if (!o.field.empty()) layers.field = &fb.emplace(field::load_field(o.field));
  if (!o.traj.empty()) layers.trajectory = &traj.emplace(io::read_trajectory_csv(o.traj));
  if (!o.contour.empty()) layers.contour = &contour.emplace(io::read_contour_csv(o.contour));
  io::render_svg(layers, o.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Segmentation by learned limit-cycle dynamics"};
  app.require_subcommand(1);
  Options o;

  auto* synth_cmd = app.add_subcommand("synth", "Generate synthetic image/mask pairs and a manifest");
  synth_cmd->add_option("--spec", o.spec_path, "Shape spec JSON")->required()->check(CLI::ExistingFile);
  synth_cmd->add_option("--n", o.n, "Number of pairs")->required()->check(CLI::PositiveNumber);
  synth_cmd->add_option("--out", o.out, "Output directory")->required();

  auto* field_cmd = app.add_subcommand("field", "Build the vector field of a mask");
  field_cmd->add_option("--mask", o.mask, "Binary mask PGM")->required()->check(CLI::ExistingFile);
  field_cmd->add_option("--out", o.out, "Output field file")->required();

  auto* dataset_cmd = app.add_subcommand("dataset", "Extract the patch dataset from a manifest");
  dataset_cmd->add_option("--manifest", o.manifest, "Manifest JSON")->required()->check(CLI::ExistingFile);
  dataset_cmd->add_option("--split", o.split, "Pairs to use: even indices (train), odd (test) or all")
      ->check(CLI::IsMember({"train", "test", "all"}));
  dataset_cmd->add_option("--out", o.out, "Output dataset file")->required();
  add_config_options(dataset_cmd, o);

  auto* train_cmd = app.add_subcommand("train", "Train the displacement regressor");
  train_cmd->add_option("--dataset", o.dataset, "Dataset file")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", o.out, "Output checkpoint")->required();
  add_config_options(train_cmd, o);

  auto* segment_cmd = app.add_subcommand("segment", "Roll out the agent and extract the contour");
  segment_cmd->add_option("--image", o.image, "Grayscale PGM")->required()->check(CLI::ExistingFile);
  segment_cmd->add_option("--model", o.model, "Checkpoint")->check(CLI::ExistingFile);
  segment_cmd->add_option("--seed-x", o.seed_x, "Seed column")->required();
  segment_cmd->add_option("--seed-y", o.seed_y, "Seed row")->required();
  segment_cmd->add_option("--heading-x", o.heading_x, "Initial heading x (random when omitted)");
  segment_cmd->add_option("--heading-y", o.heading_y, "Initial heading y");
  segment_cmd->add_option("--oracle-field", o.oracle_field, "Use this field instead of the model")
      ->check(CLI::ExistingFile);
  segment_cmd->add_option("--out", o.out, "Output contour CSV")->required();
  segment_cmd->add_option("--traj", o.traj, "Output trajectory CSV");
  add_config_options(segment_cmd, o);

  auto* eval_cmd = app.add_subcommand("eval", "Score contours against ground-truth masks");
  eval_cmd->add_option("--pred", o.pred, "Predicted contour CSV, repeatable")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--truth", o.truth, "Ground-truth mask PGM, repeatable")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--spacing", o.spacing, "Pixel spacing in mm")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--out", o.out, "Output report JSON")->required();

  auto* render_cmd = app.add_subcommand("render", "Draw field, trajectory and contour as SVG");
  render_cmd->add_option("--field", o.field, "Field file")->check(CLI::ExistingFile);
  render_cmd->add_option("--traj", o.traj, "Trajectory CSV")->check(CLI::ExistingFile);
  render_cmd->add_option("--contour", o.contour, "Contour CSV")->check(CLI::ExistingFile);
  render_cmd->add_option("--out", o.out, "Output SVG")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth_cmd->parsed()) return cmd_synth(o);
    if (field_cmd->parsed()) return cmd_field(o);
    if (dataset_cmd->parsed()) return cmd_dataset(o);
    if (train_cmd->parsed()) return cmd_train(o);
    if (segment_cmd->parsed()) return cmd_segment(o);
    if (eval_cmd->parsed()) return cmd_eval(o);
    if (render_cmd->parsed()) return cmd_render(o);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
