#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace graftkit {

struct Box {
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;
};

struct Detection {
  std::int64_t image_id = 0;
  int class_id = 0;
  Box box;
  double confidence = 0.0;
};

struct GroundTruthBox {
  std::int64_t image_id = 0;
  int class_id = 0;
  Box box;
};

// Top-1 classification error in percent.
double top1_error(std::span<const int> predictions, std::span<const int> labels);

double iou(const Box& a, const Box& b);

/*
 * Average precision at IoU >= 0.5. Detections are ranked by descending
 * confidence (ties keep input order), matched greedily one-to-one against
 * ground truth per class and image, and scored with the all-point
 * interpolated precision/recall curve; the result is the mean over classes
 * present in the ground truth.
 */
double ap50(std::span<const Detection> detections, std::span<const GroundTruthBox> ground_truths,
            double iou_threshold = 0.5);

// Union of both prediction sets followed by per-class greedy non-maximum
// suppression keeping the highest-confidence box of each overlapping group.
std::vector<Detection> nms_merge(std::span<const Detection> preds_a,
                                 std::span<const Detection> preds_b, double iou_threshold);

// JSON-lines exchange format: one {image_id, class_id, box, confidence?}
// record per line, box as [x_min, y_min, x_max, y_max].
std::vector<Detection> read_detections_jsonl(const std::string& path);
std::vector<GroundTruthBox> read_ground_truth_jsonl(const std::string& path);
void write_detections_jsonl(const std::string& path, std::span<const Detection> detections);

}  // namespace graftkit
