#include "morphfit_cli.hpp"

#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <vector>

#include <CLI11.hpp>

#include "morphfit/ganmath.hpp"
#include "morphfit/image_io.hpp"
#include "morphfit/json_io.hpp"
#include "morphfit/model_io.hpp"
#include "morphfit/pipeline.hpp"
#include "morphfit/synthkit.hpp"

namespace morphfit::cli {

namespace fs = std::filesystem;

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return kBadArgs;
    case ErrorCode::kMissingInput:
    case ErrorCode::kNotFound:
    case ErrorCode::kIo: return kMissingInput;
    case ErrorCode::kBadMagic:
    case ErrorCode::kVersionMismatch:
    case ErrorCode::kTruncatedPayload:
    case ErrorCode::kMalformed: return kMalformedInput;
    case ErrorCode::kDegenerate:
    case ErrorCode::kNumerical: return kNumericalFailure;
    case ErrorCode::kSizing: return kSizingMismatch;
  }
  return kNumericalFailure;
}

namespace {

// Flags shared by fit and transfer. Unset optionals leave the config file (or default) value.
struct PipelineFlags {
  std::string config;
  std::string model;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> resolution;
  std::optional<long> k;
  std::optional<double> blend_sigma2;
  std::optional<int> max_iterations;
  bool no_depth_refine = false;
  bool landmark_refine = false;

  void add_common(CLI::App* cmd) {
    cmd->add_option("--config", config, "Pipeline config JSON (keys mirror PipelineConfig)");
    cmd->add_option("--model", model, "Bilinear model file (.mfit)");
    cmd->add_option("--out", out, "Output directory");
    cmd->add_option("--seed", seed, "Seed for the conditioning noise channel");
  }

  PipelineConfig resolve() const {
    PipelineConfig c;
    if (!config.empty()) {
      const fs::path path(config);
      c = pipeline_config_from_json(read_json_file(path), path.parent_path());
    }
    if (!model.empty()) c.model_path = model;
    if (!out.empty()) c.out = out;
    if (seed) c.seed = *seed;
    if (resolution) c.resolution = *resolution;
    if (k) c.k = *k;
    if (blend_sigma2) c.blend.sigma2 = *blend_sigma2;
    if (max_iterations) c.fit.max_outer_iterations = *max_iterations;
    if (no_depth_refine) c.depth_refine = false;
    if (landmark_refine) c.landmark_refine = true;
    if (c.resolution < 1) fail(ErrorCode::kInvalidArgument, "--resolution must be >= 1");
    if (c.k < 1) fail(ErrorCode::kInvalidArgument, "--k must be >= 1");
    validate(c.fit);
    validate(c.blend);
    return c;
  }
};

void require(bool condition, const std::string& message) {
  if (!condition) fail(ErrorCode::kInvalidArgument, message);
}

int cmd_fit(const std::string& image_path, const std::string& landmark_path,
            const std::string& depth_path, const PipelineFlags& flags, std::ostream& out) {
  PipelineConfig config = flags.resolve();
  require(!config.model_path.empty(), "fit needs --model (or \"model\" in --config)");
  require(!config.out.empty(), "fit needs --out (or \"out\" in --config)");
  const BilinearModel model = load_model(config.model_path);
  const Image image = read_image(image_path);
  const Eigen::Matrix2Xd landmarks = landmarks_from_json(read_json_file(landmark_path));
  std::optional<DepthFile> depth;
  if (!depth_path.empty()) depth = depth_from_json(read_json_file(depth_path));

  const FitOutput result = run_fit(model, image, landmarks, depth ? &*depth : nullptr, config);
  write_fit_outputs(config.out, result, model, config);
  out << fit_summary_json(result, config).dump(2) << "\n";
  return kOk;
}

fs::path locate_model(const fs::path& recorded, const fs::path& fit_dir) {
  if (recorded.empty() || recorded.is_absolute() || fs::exists(recorded)) return recorded;
  return fit_dir / recorded;
}

int cmd_transfer(const std::string& fit_path, const std::string& expression_path,
                 const std::string& shapenet_dir, const std::string& attention_path,
                 const std::string& color_path, const std::string& orientation,
                 const PipelineFlags& flags, std::ostream& out) {
  PipelineConfig config = flags.resolve();
  require(!expression_path.empty(), "transfer needs --target-expression");
  require(attention_path.empty() == color_path.empty(),
          "--texture-attention and --texture-color must be given together");

  const fs::path fit_json(fit_path);
  if (!fs::exists(fit_json)) fail(ErrorCode::kMissingInput, fit_json.string() + " does not exist");
  if (config.model_path.empty()) {
    fs::path recorded;
    const Json summary = read_json_file(fit_json);
    if (summary.contains("model") && summary.at("model").is_string()) {
      recorded = summary.at("model").get<std::string>();
    }
    config.model_path = locate_model(recorded, fit_json.parent_path());
  }
  require(!config.model_path.empty(), "transfer needs --model");
  if (config.out.empty()) config.out = fit_json.parent_path() / "transfer";
  if (!shapenet_dir.empty()) config.shapenet_params = shapenet_dir;

  const BilinearModel model = load_model(config.model_path);
  FitOutput fit = load_fit_outputs(fit_json, model);
  const Eigen::VectorXd e_tgt = expression_from_json(read_json_file(expression_path));

  if (!attention_path.empty()) {
    const auto mode = orientation == "color" ? AttentionOrientation::kColor : AttentionOrientation::kSource;
    fit.texture.image =
        attention_compose(read_image(attention_path), read_image(color_path), fit.texture.image, mode).image;
  }

  std::optional<ShapeBranch> branch;
  if (!config.shapenet_params.empty()) {
    branch = load_shape_branch(config.shapenet_params, model);
    if (flags.k && branch->basis.k() != config.k) {
      fail(ErrorCode::kSizing, "--k " + std::to_string(config.k) + " differs from the shape branch's k = " +
                                   std::to_string(branch->basis.k()));
    }
  }

  const TransferOutput result = run_transfer(model, fit, e_tgt, branch ? &*branch : nullptr, config);
  write_transfer_outputs(config.out, result, model);
  out << Json{{"out", config.out.string()},
              {"max_displacement_mm", result.max_displacement},
              {"covered_pixels", result.render.coverage.count()},
              {"shape_branch", branch.has_value()}}
             .dump(2)
      << "\n";
  return kOk;
}

SyntheticSpec read_spec(const std::string& path) {
  if (path.empty()) return {};
  return synthetic_spec_from_json(read_json_file(path));
}

struct TrainFlags {
  std::string spec;
  std::string model;
  std::string data;
  std::string config;
  std::string out;
  int n_train = 400;
  long k = 100;
  std::uint64_t seed = 0;
  double scan_noise = 0.5;
  std::optional<int> epochs;
};

std::vector<ShapeSample> read_samples(const fs::path& path, const BilinearModel& model,
                                      const SpectralBasis& basis) {
  const Json j = read_json_file(path);
  std::vector<ShapeSample> samples;
  try {
    for (const auto& row : j.at("samples")) {
      const Eigen::VectorXd a = vector_from_json(row.at("identity"));
      const Eigen::VectorXd e_src = vector_from_json(row.at("e_src"));
      const Eigen::VectorXd e_tgt = vector_from_json(row.at("e_tgt"));
      if (a.size() != model.n_identity() || e_src.size() != model.n_expression() ||
          e_tgt.size() != model.n_expression()) {
        fail(ErrorCode::kSizing, "sample coefficients do not match the model");
      }
      DisplacementField field;
      const auto& d = row.at("displacement");
      field.vectors.resize(3, static_cast<Index>(d.size()));
      for (std::size_t v = 0; v < d.size(); ++v) {
        const auto p = d[v].get<std::vector<double>>();
        if (p.size() != 3) fail(ErrorCode::kMalformed, "displacements are [x, y, z] triples");
        field.vectors.col(static_cast<Index>(v)) = Eigen::Vector3d(p[0], p[1], p[2]);
      }
      samples.push_back({shape_input(a, e_src, e_tgt), encode(basis, field).values});
    }
  } catch (const Json::exception& e) {
    fail(ErrorCode::kMalformed, path.string() + ": " + e.what());
  }
  if (samples.empty()) fail(ErrorCode::kMalformed, path.string() + " holds no samples");
  return samples;
}

int cmd_train_shape(const TrainFlags& f, std::ostream& out) {
  require(!f.out.empty(), "train-shape needs --out");
  require(f.n_train >= 1, "--n-train must be >= 1");
  require(f.k >= 1, "--k must be >= 1");
  require(f.scan_noise >= 0.0, "--scan-noise must be >= 0");
  require(f.data.empty() || !f.model.empty(), "--data needs --model");
  require(f.data.empty() || f.spec.empty(), "--data and --spec are exclusive");

  ShapeTrainConfig train;
  train.standardize_inputs = true;
  if (!f.config.empty()) train = train_config_from_json(read_json_file(f.config), train);
  if (f.epochs) train.epochs = *f.epochs;
  train.seed = f.seed;
  validate(train);

  Json meta{{"k", f.k}, {"train", to_json(train)}};
  SpectralBasis basis;
  std::vector<ShapeSample> samples;
  if (!f.data.empty()) {
    const BilinearModel model = load_model(f.model);
    basis = mesh_eigenbasis(model, f.k);
    samples = read_samples(f.data, model, basis);
    meta["source"] = "data";
  } else {
    const SyntheticSpec spec = read_spec(f.spec);
    const SyntheticKit kit = make_synthetic(spec);
    if (f.k > kit.spectrum.k()) fail(ErrorCode::kInvalidArgument, "--k exceeds N - 1");
    basis = truncate(kit.spectrum, f.k);
    Rng rng(f.seed);
    samples = shape_training_samples(kit, basis, f.n_train, f.scan_noise, rng);
    meta["source"] = "synthetic";
    meta["spec"] = to_json(spec);
    meta["scan_noise_mm"] = f.scan_noise;
  }
  const ShapeTrainResult result = train_shape_branch(samples, train);
  meta["samples"] = samples.size();
  meta["initial_loss"] = result.initial_loss;
  meta["final_loss"] = result.epoch_loss.empty() ? result.initial_loss : result.epoch_loss.back();

  const fs::path dir(f.out);
  save_mlp(dir, result.params, meta);
  save_basis(dir / "basis", basis);
  Json report = meta;
  report["epoch_loss"] = result.epoch_loss;
  write_json_file(dir / "train_report.json", report);
  out << meta.dump(2) << "\n";
  return kOk;
}

struct EvalFlags {
  std::string spec;
  std::string config;
  std::string out;
  std::optional<int> seeds;
  std::optional<int> n_train;
  std::optional<int> n_test;
  std::optional<long> k;
  std::optional<int> epochs;
};

int cmd_eval(const EvalFlags& f, std::ostream& out) {
  BenchmarkConfig config;
  if (!f.config.empty()) config = benchmark_config_from_json(read_json_file(f.config), config);
  if (f.seeds) {
    require(*f.seeds >= 1, "--seeds must be >= 1");
    config.seeds.clear();
    for (int s = 1; s <= *f.seeds; ++s) config.seeds.push_back(static_cast<std::uint64_t>(s));
  }
  if (f.n_train) config.n_train = *f.n_train;
  if (f.n_test) config.n_test = *f.n_test;
  if (f.k) config.k = *f.k;
  if (f.epochs) config.train.epochs = *f.epochs;
  validate(config.train);

  const SyntheticSpec spec = read_spec(f.spec);
  const SyntheticKit kit = make_synthetic(spec);
  require(config.k >= 1 && config.k <= kit.spectrum.k(), "k must lie in [1, N - 1]");
  const BenchmarkReport report = benchmark_shape_branch(kit, truncate(kit.spectrum, config.k), config);

  out << "Vertex RMSE of the transferred target shape (mm), held-out synthetic samples\n";
  out << std::setw(6) << "seed" << std::setw(16) << "without branch" << std::setw(14) << "with branch"
      << "\n";
  out << std::fixed << std::setprecision(4);
  for (const auto& row : report.seeds) {
    out << std::setw(6) << row.seed << std::setw(16) << row.rmse_without << std::setw(14) << row.rmse_with
        << "\n";
  }
  out << std::setw(6) << "mean" << std::setw(16) << report.mean_without << std::setw(14)
      << report.mean_with << "\n";
  out << "improved on " << std::setprecision(0) << report.improved_fraction * 100.0 << "% of seeds\n";
  out.unsetf(std::ios::floatfield);
  out << std::setprecision(6);

  if (!f.out.empty()) {
    Json j = to_json(report);
    j["config"] = to_json(config);
    j["spec"] = to_json(spec);
    write_json_file(f.out, j);
  }
  return kOk;
}

struct SynthFlags {
  std::string spec;
  std::string out;
  int scenes = 1;
  std::uint64_t seed = 1;
  SceneOptions options;
};

int cmd_synth(const SynthFlags& f, std::ostream& out) {
  require(!f.out.empty(), "synth needs --out");
  require(f.scenes >= 0, "--scenes must be >= 0");
  require(f.options.image_size >= 1, "--image-size must be >= 1");
  const SyntheticSpec spec = read_spec(f.spec);
  const SyntheticKit kit = make_synthetic(spec);
  const fs::path dir(f.out);
  fs::create_directories(dir);
  save_model(kit.model, dir / "model.mfit");
  write_json_file(dir / "spec.json", to_json(spec));
  write_json_file(dir / "neutral.e.json", expression_to_json(kit.model.neutral_expression(), "neutral"));

  Json listing = Json::array();
  for (int s = 0; s < f.scenes; ++s) {
    const std::uint64_t seed = f.seed + static_cast<std::uint64_t>(s);
    const Scene scene = sample_scene(kit, seed, f.options);
    std::ostringstream name;
    name << "scene_" << std::setw(3) << std::setfill('0') << s;
    const fs::path sd = dir / name.str();
    fs::create_directories(sd);
    write_png(sd / "image.png", scene.image);
    write_pfm(sd / "image.pfm", scene.image);
    write_json_file(sd / "landmarks.json", landmarks_to_json(scene.landmarks));
    if (f.options.with_depth) write_json_file(sd / "depth.json", depth_to_json({"model", scene.depth.points}));
    write_json_file(sd / "expression.e.json", expression_to_json(scene.coeffs.expression, name.str()));
    Json truth{{"seed", seed},
               {"pose", pose_to_json(scene.pose)},
               {"identity", vector_to_json(scene.coeffs.identity)},
               {"expression", vector_to_json(scene.coeffs.expression)},
               {"shape", vector_to_json(scene.shape.positions)}};
    write_json_file(sd / "truth.json", truth);
    listing.push_back(name.str());
  }
  out << Json{{"out", dir.string()}, {"model", (dir / "model.mfit").string()}, {"scenes", listing}}.dump(2)
      << "\n";
  return kOk;
}

int cmd_losses(const std::string& input, std::optional<double> l1, std::optional<double> perceptual,
               const LossWeights& weights, std::ostream& out) {
  require(l1.has_value() == perceptual.has_value(), "--l1 and --perceptual must be given together");
  const DiscriminatorOutputs d = discriminator_from_json(read_json_file(input));
  Json j{{"loss_real", loss_real(d)},
         {"loss_pair", loss_pair(d)},
         {"loss_iden", loss_iden(d)},
         {"loss_gan", loss_gan(d)}};
  if (l1) {
    j["generator_objective"] = generator_objective(loss_gan(d), *l1, *perceptual, weights);
    j["weights"] = {{"l1", weights.l1}, {"perceptual", weights.perceptual}};
  }
  out << j.dump(2) << "\n";
  return kOk;
}

int cmd_compose(const std::string& attention, const std::string& color, const std::string& source,
                const std::string& orientation, const std::string& output, std::ostream& out) {
  require(!output.empty(), "compose needs --out");
  const auto mode = orientation == "color" ? AttentionOrientation::kColor : AttentionOrientation::kSource;
  const ComposeResult r = attention_compose(read_image(attention), read_image(color), read_image(source), mode);
  const fs::path path(output);
  if (path.extension() == ".pfm") {
    write_pfm(path, r.image);
  } else {
    write_png(path, r.image);
  }
  out << Json{{"out", path.string()}, {"clamped", r.clamped}}.dump(2) << "\n";
  return kOk;
}

}  // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"morphfit: bilinear face fitting, expression transfer and synthetic benchmarks"};
  app.name("morphfit");
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Print help for every subcommand");
  std::function<int()> action;

  // fit
  PipelineFlags fit_flags;
  std::string fit_image, fit_landmarks, fit_depth;
  auto* fit = app.add_subcommand("fit", "Fit the model to an image and extract its texture");
  fit->add_option("image", fit_image, "Input image (PNG or PFM)")->required();
  fit->add_option("landmarks", fit_landmarks, "Landmark JSON")->required();
  fit->add_option("depth", fit_depth, "Optional depth JSON");
  fit_flags.add_common(fit);
  fit->add_option("--resolution", fit_flags.resolution, "Texture resolution (default 256)");
  fit->add_option("--max-iterations", fit_flags.max_iterations, "Outer fitting iterations");
  fit->add_flag("--no-depth-refine", fit_flags.no_depth_refine, "Skip depth refinement");
  fit->add_flag("--landmark-refine", fit_flags.landmark_refine, "Apply landmark-driven deformation");
  fit->callback([&] { action = [&] { return cmd_fit(fit_image, fit_landmarks, fit_depth, fit_flags, out); }; });

  // transfer
  PipelineFlags tr_flags;
  std::string tr_fit, tr_expr, tr_shapenet, tr_attention, tr_color, tr_orientation = "source";
  auto* transfer = app.add_subcommand("transfer", "Re-render a fitted face with a target expression");
  transfer->add_option("fit", tr_fit, "fit.json written by 'fit'")->required();
  transfer->add_option("--target-expression", tr_expr, "Expression preset JSON (e.json)")->required();
  tr_flags.add_common(transfer);
  transfer->add_option("--k", tr_flags.k, "Spectral basis size expected of the shape branch");
  transfer->add_option("--blend-sigma2", tr_flags.blend_sigma2, "Distance falloff sigma^2 in mm^2");
  transfer->add_option("--shapenet", tr_shapenet, "Shape-branch parameter directory");
  transfer->add_option("--texture-attention", tr_attention, "Per-channel attention map in texture space");
  transfer->add_option("--texture-color", tr_color, "Generated color map in texture space");
  transfer->add_option("--attention-orientation", tr_orientation,
                       "Which input the attention map weights: source or color")
      ->check(CLI::IsMember({"source", "color"}));
  transfer->callback([&] {
    action = [&] {
      return cmd_transfer(tr_fit, tr_expr, tr_shapenet, tr_attention, tr_color, tr_orientation, tr_flags, out);
    };
  });

  // train-shape
  TrainFlags tf;
  auto* train = app.add_subcommand("train-shape", "Train the shape-branch regressor");
  train->add_option("--spec", tf.spec, "Synthetic spec JSON (default spec when omitted)");
  train->add_option("--model", tf.model, "Model file, used with --data");
  train->add_option("--data", tf.data, "Training samples JSON");
  train->add_option("--config", tf.config, "Training config JSON");
  train->add_option("--out", tf.out, "Output parameter directory")->required();
  train->add_option("--n-train", tf.n_train, "Synthetic training samples");
  train->add_option("--k", tf.k, "Spectral basis size");
  train->add_option("--seed", tf.seed, "Sampling and initialization seed");
  train->add_option("--scan-noise", tf.scan_noise, "Per-axis noise on synthetic targets, mm");
  train->add_option("--epochs", tf.epochs, "Training epochs");
  train->callback([&] { action = [&] { return cmd_train_shape(tf, out); }; });

  // eval
  EvalFlags ef;
  auto* eval = app.add_subcommand("eval", "Run the with/without shape-branch benchmark");
  eval->add_option("--spec", ef.spec, "Synthetic spec JSON");
  eval->add_option("--config", ef.config, "Benchmark config JSON");
  eval->add_option("--out", ef.out, "Report JSON path");
  eval->add_option("--seeds", ef.seeds, "Use seeds 1..n");
  eval->add_option("--n-train", ef.n_train, "Training samples per seed");
  eval->add_option("--n-test", ef.n_test, "Held-out samples per seed");
  eval->add_option("--k", ef.k, "Spectral basis size");
  eval->add_option("--epochs", ef.epochs, "Training epochs");
  eval->callback([&] { action = [&] { return cmd_eval(ef, out); }; });

  // synth
  SynthFlags sf;
  auto* synth = app.add_subcommand("synth", "Write a synthetic model and scenes");
  synth->add_option("--spec", sf.spec, "Synthetic spec JSON");
  synth->add_option("--out", sf.out, "Output directory")->required();
  synth->add_option("--scenes", sf.scenes, "Number of scenes");
  synth->add_option("--seed", sf.seed, "Seed of the first scene");
  synth->add_option("--image-size", sf.options.image_size, "Square image size in pixels");
  synth->add_option("--landmark-noise", sf.options.landmark_noise_px, "Landmark noise, pixels");
  synth->add_flag("--with-depth", sf.options.with_depth, "Emit a depth cloud");
  synth->add_option("--depth-samples", sf.options.depth_samples, "Depth points per scene");
  synth->add_option("--depth-noise", sf.options.depth_noise_mm, "Depth noise, mm");
  synth->add_flag("--with-nonlinear", sf.options.with_nonlinear, "Add the nonlinear deformation");
  synth->add_option("--max-rotation", sf.options.max_rotation_deg, "Yaw/pitch range, degrees");
  synth->callback([&] { action = [&] { return cmd_synth(sf, out); }; });

  // losses
  std::string loss_input;
  std::optional<double> loss_l1, loss_perceptual;
  LossWeights weights;
  auto* losses = app.add_subcommand("losses", "Evaluate the adversarial loss terms");
  losses->add_option("--input", loss_input, "Discriminator outputs JSON")->required();
  losses->add_option("--l1", loss_l1, "L1 term for the generator objective");
  losses->add_option("--perceptual", loss_perceptual, "Perceptual term for the generator objective");
  losses->add_option("--lambda-l1", weights.l1, "Weight of the L1 term");
  losses->add_option("--lambda-perceptual", weights.perceptual, "Weight of the perceptual term");
  losses->callback([&] {
    action = [&] { return cmd_losses(loss_input, loss_l1, loss_perceptual, weights, out); };
  });

  // compose
  std::string c_att, c_color, c_source, c_orientation = "source", c_out;
  auto* compose = app.add_subcommand("compose", "Per-channel attention composition of two images");
  compose->add_option("--attention", c_att, "Attention map")->required();
  compose->add_option("--color", c_color, "Generated color image")->required();
  compose->add_option("--source", c_source, "Source image")->required();
  compose->add_option("--attention-orientation", c_orientation,
                      "Which input the attention map weights: source or color")
      ->check(CLI::IsMember({"source", "color"}));
  compose->add_option("--out", c_out, "Output image (.png or .pfm)")->required();
  compose->callback([&] {
    action = [&] { return cmd_compose(c_att, c_color, c_source, c_orientation, c_out, out); };
  });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kBadArgs;
  }

  try {
    return action ? action() : kBadArgs;
  } catch (const Error& e) {
    err << "morphfit: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::bad_alloc&) {
    err << "morphfit: out of memory\n";
    return kNumericalFailure;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "morphfit: i/o error: " << e.what() << "\n";
    return kMissingInput;
  }
}

}  // namespace morphfit::cli
