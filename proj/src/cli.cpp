#include <graftkit/cli.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include <graftkit/checkpoint.hpp>
#include <graftkit/config.hpp>
#include <graftkit/digits.hpp>
#include <graftkit/evaluation.hpp>
#include <graftkit/event_voxel.hpp>
#include <graftkit/feature_decoder.hpp>
#include <graftkit/image_io.hpp>
#include <graftkit/paired_data.hpp>
#include <graftkit/trainer.hpp>

namespace graftkit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Flag overrides are staged as JSON with the same keys as the config file,
// merged on top of it, and parsed once through the strict parser.
json merged_options(const std::string& config_path, const json& overrides) {
  json base = config_path.empty() ? json::object() : load_json_file(config_path);
  for (const auto& [key, value] : overrides.items()) base[key] = value;
  return base;
}

void apply_out_dir_env(std::string& out_dir) {
  if (const char* env = std::getenv("GRAFTKIT_OUT")) {
    if (*env != '\0') out_dir = env;
  }
}

void require_out_dir(const std::string& out_dir) {
  if (out_dir.empty()) {
    throw std::invalid_argument("out_dir is required (flag --out_dir or GRAFTKIT_OUT)");
  }
  fs::create_directories(out_dir);
}

void write_echo(const std::string& out_dir, const std::string& command, json options) {
  options["command"] = command;
  write_json_file((fs::path(out_dir) / "config_echo.json").string(), options);
}

std::vector<PairedSample> load_manifest(const std::string& manifest, std::int64_t voxel_slices) {
  if (manifest.empty()) throw std::invalid_argument("data_manifest is required");
  return read_paired_dataset(manifest, voxel_slices);
}

bool has_labels(std::span<const PairedSample> samples) {
  for (const PairedSample& s : samples) {
    if (!s.label) return false;
  }
  return !samples.empty();
}

// ---------------------------------------------------------------------------
// train

void run_train(TrainRunOptions opts) {
  apply_out_dir_env(opts.train.out_dir);
  opts.validate();
  require_out_dir(opts.train.out_dir);
  write_echo(opts.train.out_dir, "train", train_options_to_json(opts));

  const auto samples = load_manifest(opts.data_manifest, opts.voxel_slices);
  DatasetSplit data = split_temporal(samples, opts.train_fraction);

  if (opts.mode == "supervised") {
    const bool use_modality = opts.input == "modality";
    const Tensor& probe = use_modality ? data.train.front().modality : data.train.front().frame;
    BlockChain model = make_lenet5(probe.dim(0), opts.train.seed);
    SupervisedConfig scfg{opts.train.epochs, opts.train.lr, opts.train.batch_size,
                          opts.train.seed};
    const SupervisedReport report = train_supervised(model, data.train, use_modality, scfg);

    const std::string ckpt_path =
        (fs::path(opts.train.out_dir) / "checkpoint_final.gkpt").string();
    save_checkpoint(ckpt_path, checkpoint_from_chain(model, opts.train.split));

    json out{{"epoch_loss", report.epoch_loss}, {"checkpoint", ckpt_path}};
    if (has_labels(data.test)) {
      out["test_top1_error"] =
          top1_error(predict_labels(model, data.test, use_modality),
                     [&] {
                       std::vector<int> labels;
                       for (const auto& s : data.test) labels.push_back(*s.label);
                       return labels;
                     }());
    }
    write_json_file((fs::path(opts.train.out_dir) / "report.json").string(), out);
    std::cout << "supervised training done; checkpoint at " << ckpt_path << "\n";
    return;
  }

  if (opts.pretrained.empty()) {
    throw std::invalid_argument("graft mode requires a pretrained checkpoint path");
  }
  const BlockChain pretrained = assemble_pretrained(load_checkpoint(opts.pretrained));
  auto [model, report] = train_graft(pretrained, opts.train.split, data, opts.train);

  json out = train_report_to_json(report);
  if (has_labels(data.test)) out["test_top1_error"] = evaluate_grafted(model, data.test);
  write_json_file((fs::path(opts.train.out_dir) / "report.json").string(), out);
  std::cout << "graft training done; final checkpoint at " << report.final_checkpoint << "\n";
}

// ---------------------------------------------------------------------------
// eval

struct EvalRunOptions {
  std::string checkpoint;
  std::string data_manifest;
  std::string input = "modality";
  std::int64_t voxel_slices = 3;
  std::string detections;
  std::string ground_truth;
  std::string merge_with;
  double nms_threshold = 0.5;
  std::string out_dir;
};

EvalRunOptions parse_eval_options(const json& j) {
  static const std::set<std::string> known = {
      "checkpoint", "data_manifest", "input",        "voxel_slices", "detections",
      "ground_truth", "merge_with",  "nms_threshold", "out_dir"};
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (known.find(key) == known.end()) {
      throw std::invalid_argument("eval config: unknown key '" + key + "'");
    }
  }
  EvalRunOptions opts;
  if (j.contains("checkpoint")) opts.checkpoint = j.at("checkpoint").get<std::string>();
  if (j.contains("data_manifest")) opts.data_manifest = j.at("data_manifest").get<std::string>();
  if (j.contains("input")) opts.input = j.at("input").get<std::string>();
  if (j.contains("voxel_slices")) opts.voxel_slices = j.at("voxel_slices").get<std::int64_t>();
  if (j.contains("detections")) opts.detections = j.at("detections").get<std::string>();
  if (j.contains("ground_truth")) opts.ground_truth = j.at("ground_truth").get<std::string>();
  if (j.contains("merge_with")) opts.merge_with = j.at("merge_with").get<std::string>();
  if (j.contains("nms_threshold")) opts.nms_threshold = j.at("nms_threshold").get<double>();
  if (j.contains("out_dir")) opts.out_dir = j.at("out_dir").get<std::string>();
  return opts;
}

json eval_options_to_json(const EvalRunOptions& opts) {
  return json{{"checkpoint", opts.checkpoint},
              {"data_manifest", opts.data_manifest},
              {"input", opts.input},
              {"voxel_slices", opts.voxel_slices},
              {"detections", opts.detections},
              {"ground_truth", opts.ground_truth},
              {"merge_with", opts.merge_with},
              {"nms_threshold", opts.nms_threshold},
              {"out_dir", opts.out_dir}};
}

void run_eval(EvalRunOptions opts) {
  apply_out_dir_env(opts.out_dir);
  require_out_dir(opts.out_dir);
  write_echo(opts.out_dir, "eval", eval_options_to_json(opts));

  json metrics;
  if (!opts.detections.empty()) {
    if (opts.ground_truth.empty()) {
      throw std::invalid_argument("detection eval requires --ground_truth");
    }
    std::vector<Detection> dets = read_detections_jsonl(opts.detections);
    if (!opts.merge_with.empty()) {
      const std::vector<Detection> other = read_detections_jsonl(opts.merge_with);
      dets = nms_merge(dets, other, opts.nms_threshold);
      write_detections_jsonl((fs::path(opts.out_dir) / "merged_detections.jsonl").string(),
                             dets);
    }
    const auto gts = read_ground_truth_jsonl(opts.ground_truth);
    metrics["ap50"] = ap50(dets, gts);
    metrics["detections"] = dets.size();
    metrics["ground_truths"] = gts.size();
  } else {
    if (opts.checkpoint.empty()) {
      throw std::invalid_argument("classification eval requires --checkpoint");
    }
    const Checkpoint ckpt = load_checkpoint(opts.checkpoint);
    const auto samples = load_manifest(opts.data_manifest, opts.voxel_slices);
    if (!has_labels(samples)) {
      throw std::invalid_argument("classification eval requires labeled samples");
    }
    std::vector<int> labels;
    for (const auto& s : samples) labels.push_back(*s.label);

    std::vector<int> predictions;
    if (ckpt.has_part("gn_front")) {
      predictions = predict_labels(assemble_grafted(ckpt), samples);
      metrics["model"] = "grafted";
    } else {
      predictions =
          predict_labels(assemble_pretrained(ckpt), samples, opts.input == "modality");
      metrics["model"] = "pretrained";
    }
    metrics["top1_error"] = top1_error(predictions, labels);
    metrics["samples"] = samples.size();
  }
  write_json_file((fs::path(opts.out_dir) / "metrics.json").string(), metrics);
  std::cout << metrics.dump() << "\n";
}

// ---------------------------------------------------------------------------
// decode

void run_decode(DecodeRunOptions opts) {
  apply_out_dir_env(opts.out_dir);
  opts.validate();
  require_out_dir(opts.out_dir);
  write_echo(opts.out_dir, "decode", decode_options_to_json(opts));

  const Checkpoint ckpt = load_checkpoint(opts.checkpoint);
  const BlockChain& front = ckpt.part("front");

  const std::string ext = fs::path(opts.input).extension().string();
  Tensor h_hat;
  if (ext == ".png") {
    const Tensor img = read_png_gray(opts.input);
    h_hat = front.infer(img.reshaped({1, img.dim(0), img.dim(1), img.dim(2)}));
  } else if (ext == ".csv" || ext == ".bin") {
    if (!ckpt.has_part("gn_front")) {
      throw std::invalid_argument("decoding an event stream requires a grafted checkpoint");
    }
    const BlockChain& gn = ckpt.part("gn_front");
    const auto events = load_events(opts.input);
    const InputSpec& spec = gn.input_spec();
    const VoxelGrid grid = voxelize(events, spec.channels, spec.height, spec.width);
    h_hat = gn.infer(
        grid.slices.reshaped({1, spec.channels, spec.height, spec.width}));
  } else {
    throw std::invalid_argument("decode input must be .png, .csv or .bin, got '" + opts.input +
                                "'");
  }

  const DecodeResult result = decode_features(h_hat, front, opts.decode);

  Tensor out_img = result.image.reshaped(
      {result.image.dim(1), result.image.dim(2), result.image.dim(3)});
  write_png_gray((fs::path(opts.out_dir) / "decoded.png").string(), out_img);

  std::ofstream trace((fs::path(opts.out_dir) / "objective_trace.csv").string());
  trace << "iteration,objective,mse\n";
  for (std::size_t i = 0; i < result.objective.size(); ++i) {
    trace << i << ',' << result.objective[i] << ',' << result.mse_term[i] << '\n';
  }
  std::cout << "decoded image written; final objective " << result.objective.back() << "\n";
}

// ---------------------------------------------------------------------------
// voxelize

void run_voxelize(const std::string& in, const std::string& out_dir, std::int64_t slices,
                  std::int64_t height, std::int64_t width) {
  std::string resolved_out = out_dir;
  apply_out_dir_env(resolved_out);
  require_out_dir(resolved_out);

  const auto events = load_events(in);
  if (height <= 0 || width <= 0) {
    for (const EventRecord& e : events) {
      height = std::max<std::int64_t>(height, e.y + 1);
      width = std::max<std::int64_t>(width, e.x + 1);
    }
  }
  if (events.empty() && (height <= 0 || width <= 0)) {
    throw std::invalid_argument("empty event stream needs explicit --height/--width");
  }
  const VoxelGrid grid = voxelize(events, slices, height, width);

  const std::string base = (fs::path(resolved_out) / "voxel_grid").string();
  save_tensor_blob(base + ".gktb", grid.slices);
  write_json_file(base + ".json", json{{"D", grid.depth()},
                                       {"H", grid.height()},
                                       {"W", grid.width()},
                                       {"N", grid.source_events},
                                       {"t_start", grid.t_start},
                                       {"t_end", grid.t_end}});
  write_echo(resolved_out, "voxelize",
             json{{"in", in}, {"slices", slices}, {"height", height}, {"width", width}});
  std::cout << "voxel grid written to " << base << ".gktb (" << grid.source_events
            << " events)\n";
}

// ---------------------------------------------------------------------------
// synth-data

void run_synth_data(const std::string& kind, std::size_t count, std::uint64_t seed,
                    std::string out_dir, const SynthEventConfig& event_cfg,
                    const SynthThermalConfig& thermal_cfg) {
  apply_out_dir_env(out_dir);
  require_out_dir(out_dir);

  const auto images = make_digit_dataset(count, seed);
  json echo{{"kind", kind}, {"count", count}, {"seed", seed}, {"out_dir", out_dir}};
  if (kind == "events") {
    SynthEventConfig cfg = event_cfg;
    cfg.keep_streams = true;
    const SynthEventResult result = synth_event_pairs(images, cfg, seed + 1);
    write_paired_event_dataset(out_dir, result.samples, result.event_streams);
    echo["steps"] = event_cfg.steps;
    echo["threshold"] = event_cfg.threshold;
    echo["slices"] = event_cfg.slices;
    echo["skipped"] = result.skipped;
    std::cout << "wrote " << result.samples.size() << " event pairs (" << result.skipped
              << " skipped) to " << out_dir << "\n";
  } else if (kind == "thermal") {
    const auto samples = synth_thermal_pairs(images, thermal_cfg, seed + 1);
    write_paired_dataset(out_dir, samples);
    echo["noise_sigma"] = thermal_cfg.noise_sigma;
    echo["blur_radius"] = thermal_cfg.blur_radius;
    echo["invert"] = thermal_cfg.invert;
    std::cout << "wrote " << samples.size() << " thermal pairs to " << out_dir << "\n";
  } else {
    throw std::invalid_argument("synth-data kind must be 'events' or 'thermal', got '" + kind +
                                "'");
  }
  write_echo(out_dir, "synth-data", echo);
}

// ---------------------------------------------------------------------------
// ablate / split-sweep

void run_ablate_cmd(TrainRunOptions opts) {
  apply_out_dir_env(opts.train.out_dir);
  opts.validate();
  require_out_dir(opts.train.out_dir);
  write_echo(opts.train.out_dir, "ablate", train_options_to_json(opts));
  if (opts.pretrained.empty()) throw std::invalid_argument("ablate requires --pretrained");

  const BlockChain pretrained = assemble_pretrained(load_checkpoint(opts.pretrained));
  const auto samples = load_manifest(opts.data_manifest, opts.voxel_slices);
  const DatasetSplit data = split_temporal(samples, opts.train_fraction);

  const auto rows = run_ablation(pretrained, data, opts.train, opts.repeats);
  const std::string csv = format_ablation_csv(rows);
  std::ofstream((fs::path(opts.train.out_dir) / "ablation.csv").string()) << csv;
  std::cout << csv;
}

void run_split_sweep_cmd(TrainRunOptions opts, const std::string& specs_arg) {
  apply_out_dir_env(opts.train.out_dir);
  opts.validate();
  require_out_dir(opts.train.out_dir);
  write_echo(opts.train.out_dir, "split-sweep", train_options_to_json(opts));
  if (opts.pretrained.empty()) throw std::invalid_argument("split-sweep requires --pretrained");

  std::vector<SplitSpec> specs;
  if (specs_arg.empty()) {
    specs = reference_split_variants();
  } else {
    std::istringstream in(specs_arg);
    std::string item;
    while (std::getline(in, item, ',')) {
      const auto colon = item.find(':');
      if (colon == std::string::npos) {
        throw std::invalid_argument("bad split spec '" + item + "', expected front:mid");
      }
      specs.push_back(SplitSpec{std::stoul(item.substr(0, colon)),
                                std::stoul(item.substr(colon + 1))});
    }
  }

  const BlockChain pretrained = assemble_pretrained(load_checkpoint(opts.pretrained));
  const auto samples = load_manifest(opts.data_manifest, opts.voxel_slices);
  const DatasetSplit data = split_temporal(samples, opts.train_fraction);

  const auto rows = run_split_sweep(pretrained, specs, data, opts.train);
  const std::string csv = format_split_sweep_csv(rows);
  std::ofstream((fs::path(opts.train.out_dir) / "split_sweep.csv").string()) << csv;
  std::cout << csv;
}

// ---------------------------------------------------------------------------

void add_train_style_flags(CLI::App* cmd, json& overrides) {
  const auto stage_int = [&overrides](const char* key) {
    return [&overrides, key](std::int64_t v) { overrides[key] = v; };
  };
  const auto stage_double = [&overrides](const char* key) {
    return [&overrides, key](double v) { overrides[key] = v; };
  };
  const auto stage_string = [&overrides](const char* key) {
    return [&overrides, key](const std::string& v) { overrides[key] = v; };
  };
  cmd->add_option_function<std::int64_t>("--epochs", stage_int("epochs"));
  cmd->add_option_function<double>("--lr", stage_double("lr"));
  cmd->add_option_function<std::int64_t>("--batch_size", stage_int("batch_size"));
  cmd->add_option_function<std::int64_t>("--crop", stage_int("crop"));
  cmd->add_option_function<double>("--alpha", stage_double("alpha"));
  cmd->add_option_function<double>("--beta", stage_double("beta"));
  cmd->add_option_function<double>("--gamma_h", stage_double("gamma_h"));
  cmd->add_option_function<double>("--gamma_r", stage_double("gamma_r"));
  cmd->add_option_function<std::string>(
      "--loss_terms", [&overrides](const std::string& csv) {
        json terms = json::array();
        std::istringstream in(csv);
        std::string term;
        while (std::getline(in, term, ',')) terms.push_back(term);
        overrides["loss_terms"] = terms;
      },
      "Comma-separated subset of frl,fel,fsl");
  cmd->add_option_function<std::int64_t>("--split_front", stage_int("split_front"));
  cmd->add_option_function<std::int64_t>("--split_mid", stage_int("split_mid"));
  cmd->add_option_function<std::uint64_t>(
      "--seed", [&overrides](std::uint64_t v) { overrides["seed"] = v; });
  cmd->add_option_function<std::string>("--data_manifest", stage_string("data_manifest"));
  cmd->add_option_function<std::string>("--out_dir", stage_string("out_dir"));
  cmd->add_option_function<std::string>("--pretrained", stage_string("pretrained"));
  cmd->add_option_function<std::string>("--mode", stage_string("mode"));
  cmd->add_option_function<std::string>("--input", stage_string("input"));
  cmd->add_option_function<std::int64_t>("--voxel_slices", stage_int("voxel_slices"));
  cmd->add_option_function<double>("--train_fraction", stage_double("train_fraction"));
  cmd->add_option_function<std::int64_t>("--checkpoint_every", stage_int("checkpoint_every"));
  cmd->add_flag_function("--allow_custom_gamma",
                         [&overrides](std::int64_t) { overrides["allow_custom_gamma"] = true; });
  cmd->add_option_function<std::int64_t>("--repeats", stage_int("repeats"));
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"graftkit: cross-modality network grafting toolkit"};
  app.require_subcommand(1);

  json train_ov = json::object(), ablate_ov = json::object(), sweep_ov = json::object();

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a grafted front end (or a supervised "
                                                "reference model with --mode supervised)");
  std::string train_config;
  train_cmd->add_option("--config", train_config, "JSON config file");
  add_train_style_flags(train_cmd, train_ov);
  train_cmd->callback(
      [&] { run_train(parse_train_options(merged_options(train_config, train_ov))); });

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint (top-1) or score "
                                              "detection files (AP50, optional NMS merge)");
  std::string eval_config;
  json eval_ov = json::object();
  eval_cmd->add_option("--config", eval_config, "JSON config file");
  {
    const auto stage = [&eval_ov](const char* key) {
      return [&eval_ov, key](const std::string& v) { eval_ov[key] = v; };
    };
    eval_cmd->add_option_function<std::string>("--checkpoint", stage("checkpoint"));
    eval_cmd->add_option_function<std::string>("--data_manifest", stage("data_manifest"));
    eval_cmd->add_option_function<std::string>("--input", stage("input"));
    eval_cmd->add_option_function<std::string>("--detections", stage("detections"));
    eval_cmd->add_option_function<std::string>("--ground_truth", stage("ground_truth"));
    eval_cmd->add_option_function<std::string>("--merge_with", stage("merge_with"));
    eval_cmd->add_option_function<std::string>("--out_dir", stage("out_dir"));
    eval_cmd->add_option_function<double>(
        "--nms_threshold", [&eval_ov](double v) { eval_ov["nms_threshold"] = v; });
    eval_cmd->add_option_function<std::int64_t>(
        "--voxel_slices", [&eval_ov](std::int64_t v) { eval_ov["voxel_slices"] = v; });
  }
  eval_cmd->callback(
      [&] { run_eval(parse_eval_options(merged_options(eval_config, eval_ov))); });

  // decode
  auto* decode_cmd =
      app.add_subcommand("decode", "Invert features back to an intensity-like image");
  std::string decode_config;
  json decode_ov = json::object();
  decode_cmd->add_option("--config", decode_config, "JSON config file");
  {
    const auto stage = [&decode_ov](const char* key) {
      return [&decode_ov, key](const std::string& v) { decode_ov[key] = v; };
    };
    decode_cmd->add_option_function<std::string>("--checkpoint", stage("checkpoint"));
    decode_cmd->add_option_function<std::string>("--input", stage("input"));
    decode_cmd->add_option_function<std::string>("--out_dir", stage("out_dir"));
    decode_cmd->add_option_function<std::int64_t>(
        "--iterations", [&decode_ov](std::int64_t v) { decode_ov["iterations"] = v; });
    decode_cmd->add_option_function<double>("--lr",
                                            [&decode_ov](double v) { decode_ov["lr"] = v; });
    decode_cmd->add_option_function<double>(
        "--tv_weight", [&decode_ov](double v) { decode_ov["tv_weight"] = v; });
    decode_cmd->add_option_function<std::uint64_t>(
        "--seed", [&decode_ov](std::uint64_t v) { decode_ov["seed"] = v; });
    decode_cmd->add_option_function<std::int64_t>(
        "--voxel_slices", [&decode_ov](std::int64_t v) { decode_ov["voxel_slices"] = v; });
  }
  decode_cmd->callback(
      [&] { run_decode(parse_decode_options(merged_options(decode_config, decode_ov))); });

  // voxelize
  auto* vox_cmd = app.add_subcommand("voxelize", "Convert an event stream to a voxel grid");
  std::string vox_in, vox_out;
  std::int64_t vox_slices = 3, vox_h = 0, vox_w = 0;
  vox_cmd->add_option("--in", vox_in, "Event file (.csv or .bin)")->required();
  vox_cmd->add_option("--D,--slices", vox_slices, "Number of temporal slices");
  vox_cmd->add_option("--height", vox_h, "Sensor height (default: inferred)");
  vox_cmd->add_option("--width", vox_w, "Sensor width (default: inferred)");
  vox_cmd->add_option("--out_dir", vox_out, "Output directory");
  vox_cmd->callback([&] { run_voxelize(vox_in, vox_out, vox_slices, vox_h, vox_w); });

  // synth-data
  auto* synth_cmd =
      app.add_subcommand("synth-data", "Generate a paired digit dataset (events or thermal)");
  std::string synth_kind = "events", synth_out;
  std::size_t synth_count = 1000;
  std::uint64_t synth_seed = 0;
  SynthEventConfig event_cfg;
  SynthThermalConfig thermal_cfg;
  synth_cmd->add_option("--kind", synth_kind, "events | thermal");
  synth_cmd->add_option("--count", synth_count, "Number of samples");
  synth_cmd->add_option("--seed", synth_seed, "RNG seed");
  synth_cmd->add_option("--out_dir", synth_out, "Output directory");
  synth_cmd->add_option("--steps", event_cfg.steps, "Trajectory steps per sample");
  synth_cmd->add_option("--threshold", event_cfg.threshold, "Event contrast threshold");
  synth_cmd->add_option("--slices", event_cfg.slices, "Voxel slices for event modality");
  synth_cmd->add_option("--noise", thermal_cfg.noise_sigma, "Thermal noise sigma");
  synth_cmd->add_option("--blur", thermal_cfg.blur_radius, "Thermal blur radius");
  synth_cmd->callback([&] {
    run_synth_data(synth_kind, synth_count, synth_seed, synth_out, event_cfg, thermal_cfg);
  });

  // ablate
  auto* ablate_cmd =
      app.add_subcommand("ablate", "Train every loss-term subset and tabulate the metric");
  std::string ablate_config;
  ablate_cmd->add_option("--config", ablate_config, "JSON config file");
  add_train_style_flags(ablate_cmd, ablate_ov);
  ablate_cmd->callback(
      [&] { run_ablate_cmd(parse_train_options(merged_options(ablate_config, ablate_ov))); });

  // split-sweep
  auto* sweep_cmd =
      app.add_subcommand("split-sweep", "Train one grafted model per split variant");
  std::string sweep_config, sweep_specs;
  sweep_cmd->add_option("--config", sweep_config, "JSON config file");
  sweep_cmd->add_option("--specs", sweep_specs,
                        "Comma-separated front:mid pairs (default: reference variants)");
  add_train_style_flags(sweep_cmd, sweep_ov);
  sweep_cmd->callback([&] {
    run_split_sweep_cmd(parse_train_options(merged_options(sweep_config, sweep_ov)),
                        sweep_specs);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    std::cerr << app.help();
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::out_of_range& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace graftkit
