#include <graftkit/config.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

namespace graftkit {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& j, const std::set<std::string>& known, const char* what) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (known.find(key) == known.end()) {
      throw std::invalid_argument(std::string(what) + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
void read_into(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void TrainRunOptions::validate() const {
  train.validate();
  if (mode != "graft" && mode != "supervised") {
    throw std::invalid_argument("config: mode must be 'graft' or 'supervised', got '" + mode +
                                "'");
  }
  if (input != "frame" && input != "modality") {
    throw std::invalid_argument("config: input must be 'frame' or 'modality', got '" + input +
                                "'");
  }
  if (voxel_slices < 1) throw std::invalid_argument("config: voxel_slices must be >= 1");
  if (repeats < 1) throw std::invalid_argument("config: repeats must be >= 1");
  if (!allow_custom_gamma) {
    const double gh = train.weights.gamma_h;
    if (gh != 1e5 && gh != 1e6 && gh != 1e7) {
      throw std::invalid_argument(
          "config: gamma_h is restricted to {1e5, 1e6, 1e7}; set allow_custom_gamma to "
          "override");
    }
  }
}

TrainRunOptions parse_train_options(const json& j) {
  static const std::set<std::string> known = {
      "epochs",      "lr",          "batch_size",   "crop",       "alpha",
      "beta",        "gamma_h",     "gamma_r",      "loss_terms", "split_front",
      "split_mid",   "seed",        "data_manifest", "out_dir",    "mode",
      "pretrained",  "input",       "voxel_slices", "train_fraction",
      "allow_custom_gamma", "repeats", "checkpoint_every"};
  reject_unknown_keys(j, known, "train config");

  TrainRunOptions opts;
  read_into(j, "epochs", opts.train.epochs);
  read_into(j, "lr", opts.train.lr);
  read_into(j, "batch_size", opts.train.batch_size);
  read_into(j, "crop", opts.train.crop);
  read_into(j, "alpha", opts.train.weights.alpha);
  read_into(j, "beta", opts.train.weights.beta);
  read_into(j, "gamma_h", opts.train.weights.gamma_h);
  read_into(j, "gamma_r", opts.train.weights.gamma_r);
  read_into(j, "seed", opts.train.seed);
  read_into(j, "checkpoint_every", opts.train.checkpoint_every);
  read_into(j, "out_dir", opts.train.out_dir);
  if (j.contains("split_front")) opts.train.split.front_end = j.at("split_front").get<std::size_t>();
  if (j.contains("split_mid")) opts.train.split.mid_end = j.at("split_mid").get<std::size_t>();
  if (j.contains("loss_terms")) {
    opts.train.use_frl = opts.train.use_fel = opts.train.use_fsl = false;
    for (const json& term : j.at("loss_terms")) {
      const std::string name = term.get<std::string>();
      if (name == "frl") {
        opts.train.use_frl = true;
      } else if (name == "fel") {
        opts.train.use_fel = true;
      } else if (name == "fsl") {
        opts.train.use_fsl = true;
      } else {
        throw std::invalid_argument("train config: unknown loss term '" + name + "'");
      }
    }
  }
  read_into(j, "mode", opts.mode);
  read_into(j, "pretrained", opts.pretrained);
  read_into(j, "data_manifest", opts.data_manifest);
  read_into(j, "input", opts.input);
  read_into(j, "voxel_slices", opts.voxel_slices);
  read_into(j, "train_fraction", opts.train_fraction);
  read_into(j, "allow_custom_gamma", opts.allow_custom_gamma);
  read_into(j, "repeats", opts.repeats);
  return opts;
}

json train_options_to_json(const TrainRunOptions& opts) {
  json terms = json::array();
  if (opts.train.use_frl) terms.push_back("frl");
  if (opts.train.use_fel) terms.push_back("fel");
  if (opts.train.use_fsl) terms.push_back("fsl");
  return json{{"epochs", opts.train.epochs},
              {"lr", opts.train.lr},
              {"batch_size", opts.train.batch_size},
              {"crop", opts.train.crop},
              {"alpha", opts.train.weights.alpha},
              {"beta", opts.train.weights.beta},
              {"gamma_h", opts.train.weights.gamma_h},
              {"gamma_r", opts.train.weights.gamma_r},
              {"loss_terms", terms},
              {"split_front", opts.train.split.front_end},
              {"split_mid", opts.train.split.mid_end},
              {"seed", opts.train.seed},
              {"checkpoint_every", opts.train.checkpoint_every},
              {"out_dir", opts.train.out_dir},
              {"mode", opts.mode},
              {"pretrained", opts.pretrained},
              {"data_manifest", opts.data_manifest},
              {"input", opts.input},
              {"voxel_slices", opts.voxel_slices},
              {"train_fraction", opts.train_fraction},
              {"allow_custom_gamma", opts.allow_custom_gamma},
              {"repeats", opts.repeats}};
}

void DecodeRunOptions::validate() const {
  decode.validate();
  if (checkpoint.empty()) throw std::invalid_argument("decode config: checkpoint is required");
  if (input.empty()) throw std::invalid_argument("decode config: input is required");
  if (voxel_slices < 1) throw std::invalid_argument("decode config: voxel_slices must be >= 1");
}

DecodeRunOptions parse_decode_options(const json& j) {
  static const std::set<std::string> known = {"iterations", "lr",      "tv_weight",
                                              "seed",       "checkpoint", "input",
                                              "out_dir",    "voxel_slices"};
  reject_unknown_keys(j, known, "decode config");
  DecodeRunOptions opts;
  read_into(j, "iterations", opts.decode.iterations);
  read_into(j, "lr", opts.decode.lr);
  read_into(j, "tv_weight", opts.decode.tv_weight);
  read_into(j, "seed", opts.decode.seed);
  read_into(j, "checkpoint", opts.checkpoint);
  read_into(j, "input", opts.input);
  read_into(j, "out_dir", opts.out_dir);
  read_into(j, "voxel_slices", opts.voxel_slices);
  return opts;
}

json decode_options_to_json(const DecodeRunOptions& opts) {
  return json{{"iterations", opts.decode.iterations}, {"lr", opts.decode.lr},
              {"tv_weight", opts.decode.tv_weight},   {"seed", opts.decode.seed},
              {"checkpoint", opts.checkpoint},         {"input", opts.input},
              {"out_dir", opts.out_dir},               {"voxel_slices", opts.voxel_slices}};
}

json train_report_to_json(const TrainReport& report) {
  json curve = json::array();
  for (const LossBreakdown& epoch : report.epoch_curve) {
    curve.push_back(
        {{"frl", epoch.frl}, {"fel", epoch.fel}, {"fsl", epoch.fsl}, {"total", epoch.total}});
  }
  TrainRunOptions echo;
  echo.train = report.config;
  return json{{"epoch_curve", curve},
              {"wall_seconds", report.wall_seconds},
              {"final_checkpoint", report.final_checkpoint},
              {"best_checkpoint", report.best_checkpoint},
              {"config", train_options_to_json(echo)}};
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error("config '" + path + "': " + e.what());
  }
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

}  // namespace graftkit
