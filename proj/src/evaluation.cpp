#include <graftkit/evaluation.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace graftkit {

using nlohmann::json;

double top1_error(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) {
    throw std::invalid_argument("top1_error: " + std::to_string(predictions.size()) +
                                " predictions vs " + std::to_string(labels.size()) + " labels");
  }
  if (predictions.empty()) throw std::invalid_argument("top1_error: empty input");
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] != labels[i]) ++wrong;
  }
  return 100.0 * static_cast<double>(wrong) / static_cast<double>(predictions.size());
}

double iou(const Box& a, const Box& b) {
  const double ix = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
  const double iy = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
  const double inter = ix * iy;
  const double area_a = (a.x_max - a.x_min) * (a.y_max - a.y_min);
  const double area_b = (b.x_max - b.x_min) * (b.y_max - b.y_min);
  const double uni = area_a + area_b - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

namespace {

// Rank detections by descending confidence; ties keep input order.
std::vector<std::size_t> ranked_order(std::span<const Detection> detections) {
  std::vector<std::size_t> order(detections.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return detections[a].confidence > detections[b].confidence;
  });
  return order;
}

}  // namespace

double ap50(std::span<const Detection> detections, std::span<const GroundTruthBox> ground_truths,
            double iou_threshold) {
  if (ground_truths.empty()) {
    throw std::invalid_argument("ap50: no ground truth boxes; the score is undefined");
  }
  std::set<int> classes;
  for (const GroundTruthBox& gt : ground_truths) classes.insert(gt.class_id);

  double ap_sum = 0.0;
  for (const int cls : classes) {
    // Ground truth indices of this class, grouped per image.
    std::map<std::int64_t, std::vector<std::size_t>> gt_by_image;
    std::size_t n_gt = 0;
    for (std::size_t g = 0; g < ground_truths.size(); ++g) {
      if (ground_truths[g].class_id != cls) continue;
      gt_by_image[ground_truths[g].image_id].push_back(g);
      ++n_gt;
    }

    std::vector<Detection> dets;
    for (const Detection& d : detections) {
      if (d.class_id == cls) dets.push_back(d);
    }
    const std::vector<std::size_t> order = ranked_order(dets);

    std::vector<bool> gt_matched(ground_truths.size(), false);
    std::vector<double> precision, recall;
    std::size_t tp = 0, fp = 0;
    for (const std::size_t idx : order) {
      const Detection& det = dets[idx];
      double best_iou = 0.0;
      std::size_t best_gt = ground_truths.size();
      const auto it = gt_by_image.find(det.image_id);
      if (it != gt_by_image.end()) {
        for (const std::size_t g : it->second) {
          if (gt_matched[g]) continue;
          const double v = iou(det.box, ground_truths[g].box);
          if (v > best_iou) {
            best_iou = v;
            best_gt = g;
          }
        }
      }
      if (best_gt != ground_truths.size() && best_iou >= iou_threshold) {
        gt_matched[best_gt] = true;
        ++tp;
      } else {
        ++fp;
      }
      precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
      recall.push_back(static_cast<double>(tp) / static_cast<double>(n_gt));
    }

    // All-point interpolation: integrate recall increments against the
    // running maximum of precision to the right.
    double ap = 0.0;
    double max_precision = 0.0;
    for (std::size_t k = precision.size(); k-- > 0;) {
      max_precision = std::max(max_precision, precision[k]);
      const double r_prev = k > 0 ? recall[k - 1] : 0.0;
      if (recall[k] > r_prev) ap += (recall[k] - r_prev) * max_precision;
    }
    ap_sum += ap;
  }
  return ap_sum / static_cast<double>(classes.size());
}

std::vector<Detection> nms_merge(std::span<const Detection> preds_a,
                                 std::span<const Detection> preds_b, double iou_threshold) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
    throw std::invalid_argument("nms_merge: iou threshold must lie in (0, 1]");
  }
  std::vector<Detection> all(preds_a.begin(), preds_a.end());
  all.insert(all.end(), preds_b.begin(), preds_b.end());
  const std::vector<std::size_t> order = ranked_order(all);

  std::vector<Detection> kept;
  for (const std::size_t idx : order) {
    const Detection& cand = all[idx];
    bool suppressed = false;
    for (const Detection& k : kept) {
      if (k.image_id == cand.image_id && k.class_id == cand.class_id &&
          iou(k.box, cand.box) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(cand);
  }
  return kept;
}

// ---------------------------------------------------------------------------
// JSON-lines I/O

namespace {

Box box_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) {
    throw std::runtime_error("box must be [x_min, y_min, x_max, y_max]");
  }
  Box b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  if (!(b.x_min < b.x_max) || !(b.y_min < b.y_max)) {
    throw std::runtime_error("degenerate box [" + std::to_string(b.x_min) + ", " +
                             std::to_string(b.y_min) + ", " + std::to_string(b.x_max) + ", " +
                             std::to_string(b.y_max) + "]");
  }
  return b;
}

template <typename Fn>
void for_each_jsonl(const std::string& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      fn(json::parse(line));
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

}  // namespace

std::vector<Detection> read_detections_jsonl(const std::string& path) {
  std::vector<Detection> out;
  for_each_jsonl(path, [&](const json& rec) {
    Detection d;
    d.image_id = rec.at("image_id").get<std::int64_t>();
    d.class_id = rec.at("class_id").get<int>();
    d.box = box_from_json(rec.at("box"));
    d.confidence = rec.at("confidence").get<double>();
    if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) {
      throw std::runtime_error("confidence must lie in [0, 1]");
    }
    out.push_back(d);
  });
  return out;
}

std::vector<GroundTruthBox> read_ground_truth_jsonl(const std::string& path) {
  std::vector<GroundTruthBox> out;
  for_each_jsonl(path, [&](const json& rec) {
    GroundTruthBox g;
    g.image_id = rec.at("image_id").get<std::int64_t>();
    g.class_id = rec.at("class_id").get<int>();
    g.box = box_from_json(rec.at("box"));
    out.push_back(g);
  });
  return out;
}

void write_detections_jsonl(const std::string& path, std::span<const Detection> detections) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  for (const Detection& d : detections) {
    json rec{{"image_id", d.image_id},
             {"class_id", d.class_id},
             {"box", {d.box.x_min, d.box.y_min, d.box.x_max, d.box.y_max}},
             {"confidence", d.confidence}};
    out << rec.dump() << '\n';
  }
}

}  // namespace graftkit
