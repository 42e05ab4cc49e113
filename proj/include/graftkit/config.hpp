#pragma once

#include <string>

#include <json.hpp>

#include <graftkit/feature_decoder.hpp>
#include <graftkit/trainer.hpp>

namespace graftkit {

/*
 * Operator-facing run options: the training hyperparameters plus the file
 * plumbing around them. Parsed from a flat JSON config; unknown keys are
 * rejected so a typo cannot silently fall back to a default.
 */
struct TrainRunOptions {
  TrainConfig train;
  std::string mode = "graft";  // "graft" | "supervised"
  std::string pretrained;      // checkpoint path (graft mode)
  std::string data_manifest;
  std::string input = "frame";  // supervised mode: "frame" | "modality"
  std::int64_t voxel_slices = 3;
  double train_fraction = 0.75;
  bool allow_custom_gamma = false;
  int repeats = 5;  // ablation repeats

  void validate() const;
};

TrainRunOptions parse_train_options(const nlohmann::json& j);
nlohmann::json train_options_to_json(const TrainRunOptions& opts);

struct DecodeRunOptions {
  DecodeConfig decode;
  std::string checkpoint;
  std::string input;  // .png frame or .csv/.bin event stream
  std::string out_dir;
  std::int64_t voxel_slices = 3;

  void validate() const;
};

DecodeRunOptions parse_decode_options(const nlohmann::json& j);
nlohmann::json decode_options_to_json(const DecodeRunOptions& opts);

nlohmann::json train_report_to_json(const TrainReport& report);

nlohmann::json load_json_file(const std::string& path);
void write_json_file(const std::string& path, const nlohmann::json& j);

}  // namespace graftkit
