#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include <graftkit/evaluation.hpp>
#include <graftkit/random.hpp>

using namespace graftkit;
namespace fs = std::filesystem;

namespace {

/*
 * Exhaustive PR-enumeration oracle. For every prefix of the tie-broken
 * ranking it recomputes the greedy matching from scratch, then integrates
 * the resulting PR points against an explicitly re-scanned precision
 * envelope. Terms are accumulated in the same order as the implementation
 * so the comparison can be exact.
 */
double ap50_oracle(const std::vector<Detection>& detections,
                   const std::vector<GroundTruthBox>& ground_truths, double threshold) {
  std::set<int> classes;
  for (const GroundTruthBox& gt : ground_truths) classes.insert(gt.class_id);

  double ap_sum = 0.0;
  for (const int cls : classes) {
    std::vector<Detection> dets;
    for (const Detection& d : detections) {
      if (d.class_id == cls) dets.push_back(d);
    }
    std::stable_sort(dets.begin(), dets.end(),
                     [](const Detection& a, const Detection& b) {
                       return a.confidence > b.confidence;
                     });
    std::size_t n_gt = 0;
    for (const GroundTruthBox& gt : ground_truths) {
      if (gt.class_id == cls) ++n_gt;
    }

    // One PR point per ranking prefix, each matched from scratch.
    std::vector<double> precision, recall;
    for (std::size_t prefix = 1; prefix <= dets.size(); ++prefix) {
      std::vector<bool> taken(ground_truths.size(), false);
      std::size_t tp = 0;
      for (std::size_t i = 0; i < prefix; ++i) {
        double best_iou = 0.0;
        std::size_t best_g = ground_truths.size();
        for (std::size_t g = 0; g < ground_truths.size(); ++g) {
          if (taken[g] || ground_truths[g].class_id != cls ||
              ground_truths[g].image_id != dets[i].image_id) {
            continue;
          }
          const double v = iou(dets[i].box, ground_truths[g].box);
          if (v > best_iou) {
            best_iou = v;
            best_g = g;
          }
        }
        if (best_g != ground_truths.size() && best_iou >= threshold) {
          taken[best_g] = true;
          ++tp;
        }
      }
      precision.push_back(static_cast<double>(tp) / static_cast<double>(prefix));
      recall.push_back(static_cast<double>(tp) / static_cast<double>(n_gt));
    }

    double ap = 0.0;
    for (std::size_t k = precision.size(); k-- > 0;) {
      const double r_prev = k > 0 ? recall[k - 1] : 0.0;
      if (recall[k] <= r_prev) continue;
      // Envelope re-scanned over all points at recall >= recall[k].
      double env = 0.0;
      for (std::size_t j = 0; j < precision.size(); ++j) {
        if (recall[j] >= recall[k]) env = std::max(env, precision[j]);
      }
      ap += (recall[k] - r_prev) * env;
    }
    ap_sum += ap;
  }
  return ap_sum / static_cast<double>(classes.size());
}

Box random_box(Rng& rng) {
  const double x0 = rng.uniform(0.0, 8.0);
  const double y0 = rng.uniform(0.0, 8.0);
  return Box{x0, y0, x0 + rng.uniform(0.5, 6.0), y0 + rng.uniform(0.5, 6.0)};
}

double random_confidence(Rng& rng) {
  const double c = rng.uniform();
  // Quantize some confidences so ties get exercised.
  return rng.uniform() < 0.3 ? std::round(c * 5.0) / 5.0 : c;
}

std::vector<Detection> random_detections(Rng& rng, std::size_t max_count) {
  std::vector<Detection> dets;
  const std::size_t n = rng.uniform_int(static_cast<std::int64_t>(max_count) + 1);
  for (std::size_t i = 0; i < n; ++i) {
    dets.push_back(Detection{rng.uniform_int(2), static_cast<int>(rng.uniform_int(2)),
                             random_box(rng), random_confidence(rng)});
  }
  return dets;
}

std::vector<GroundTruthBox> random_ground_truths(Rng& rng, std::size_t max_count) {
  std::vector<GroundTruthBox> gts;
  const std::size_t n = 1 + rng.uniform_int(static_cast<std::int64_t>(max_count));
  for (std::size_t i = 0; i < n; ++i) {
    gts.push_back(GroundTruthBox{rng.uniform_int(2), static_cast<int>(rng.uniform_int(2)),
                                 random_box(rng)});
  }
  return gts;
}

}  // namespace

TEST_CASE("top1_error") {
  const std::vector<int> labels = {1, 2, 3, 4};
  CHECK(top1_error(labels, labels) == 0.0);
  const std::vector<int> preds = {1, 2, 3, 0};
  CHECK(top1_error(preds, labels) == doctest::Approx(25.0));
  CHECK_THROWS_AS(top1_error({}, {}), std::invalid_argument);
  CHECK_THROWS_AS(top1_error(preds, std::vector<int>{1}), std::invalid_argument);
}

TEST_CASE("iou") {
  const Box a{0, 0, 2, 2};
  CHECK(iou(a, a) == doctest::Approx(1.0));
  CHECK(iou(a, Box{5, 5, 7, 7}) == 0.0);
  CHECK(iou(a, Box{1, 1, 3, 3}) == doctest::Approx(1.0 / 7.0));
  CHECK(iou(a, Box{2, 0, 4, 2}) == 0.0);  // touching edges do not overlap
}

TEST_CASE("ap50 basics") {
  const GroundTruthBox gt{0, 0, Box{0, 0, 4, 4}};
  const Detection hit{0, 0, Box{0, 0, 4, 4}, 0.9};
  CHECK(ap50({&hit, 1}, {&gt, 1}) == doctest::Approx(1.0));

  // A false positive outranking the true positive halves the score.
  const std::vector<Detection> fp_first = {{0, 0, Box{10, 10, 12, 12}, 0.95},
                                           {0, 0, Box{0, 0, 4, 4}, 0.5}};
  CHECK(ap50(fp_first, {&gt, 1}) == doctest::Approx(0.5));

  CHECK_THROWS_AS(ap50(fp_first, {}), std::invalid_argument);
}

TEST_CASE("ap50 matches the exhaustive enumeration oracle") {
  Rng rng(1234);
  for (int trial = 0; trial < 600; ++trial) {
    const auto dets = random_detections(rng, 5);
    const auto gts = random_ground_truths(rng, 5);
    const double fast = ap50(dets, gts);
    const double slow = ap50_oracle(dets, gts, 0.5);
    CHECK(fast == slow);
    CHECK(fast >= 0.0);
    CHECK(fast <= 1.0);
  }
}

TEST_CASE("ap50 is invariant to monotone confidence rescaling") {
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const auto gts = random_ground_truths(rng, 4);
    auto dets = random_detections(rng, 5);
    const double before = ap50(dets, gts);
    for (Detection& d : dets) {
      d.confidence = 0.1 + 0.8 * d.confidence * d.confidence * d.confidence;
    }
    CHECK(ap50(dets, gts) == before);
  }
}

TEST_CASE("a lowest-ranked detection matching an unmatched gt never hurts") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    auto gts = random_ground_truths(rng, 3);
    auto dets = random_detections(rng, 4);
    // An extra ground truth nothing can reach, then a matching detection
    // ranked below everything.
    gts.push_back(GroundTruthBox{0, 0, Box{100, 100, 104, 104}});
    const double before = ap50(dets, gts);
    double min_conf = 1.0;
    for (const Detection& d : dets) min_conf = std::min(min_conf, d.confidence);
    dets.push_back(Detection{0, 0, Box{100, 100, 104, 104}, min_conf * 0.5});
    CHECK(ap50(dets, gts) >= before);
  }
}

TEST_CASE("nms_merge basics") {
  const std::vector<Detection> a = {{0, 0, Box{0, 0, 2, 2}, 0.9}};
  const std::vector<Detection> b = {{0, 0, Box{10, 10, 12, 12}, 0.8}};
  const auto disjoint = nms_merge(a, b, 0.5);
  CHECK(disjoint.size() == 2);

  const std::vector<Detection> dup = {{0, 0, Box{0, 0, 2, 2}, 0.8}};
  const auto merged = nms_merge(a, dup, 0.5);
  REQUIRE(merged.size() == 1);
  CHECK(merged[0].confidence == 0.9);

  // Same box, different class: both survive.
  const std::vector<Detection> other_class = {{0, 1, Box{0, 0, 2, 2}, 0.8}};
  CHECK(nms_merge(a, other_class, 0.5).size() == 2);

  CHECK_THROWS_AS(nms_merge(a, b, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(nms_merge(a, b, 1.5), std::invalid_argument);
}

TEST_CASE("nms_merge postcondition and idempotence on random merges") {
  Rng rng(31);
  for (int trial = 0; trial < 300; ++trial) {
    const double threshold = rng.uniform(0.2, 0.9);
    const auto merged =
        nms_merge(random_detections(rng, 6), random_detections(rng, 6), threshold);
    for (std::size_t i = 0; i < merged.size(); ++i) {
      for (std::size_t j = i + 1; j < merged.size(); ++j) {
        if (merged[i].class_id == merged[j].class_id &&
            merged[i].image_id == merged[j].image_id) {
          CHECK(iou(merged[i].box, merged[j].box) <= threshold);
        }
      }
    }
    const auto again = nms_merge(merged, {}, threshold);
    REQUIRE(again.size() == merged.size());
    for (std::size_t i = 0; i < merged.size(); ++i) {
      CHECK(again[i].confidence == merged[i].confidence);
      CHECK(again[i].class_id == merged[i].class_id);
      CHECK(again[i].box.x_min == merged[i].box.x_min);
    }
  }
}

TEST_CASE("detections round trip through jsonl") {
  Rng rng(55);
  const fs::path dir = fs::temp_directory_path() / "graftkit_tests";
  fs::create_directories(dir);
  const std::string path = (dir / "dets.jsonl").string();

  const auto dets = random_detections(rng, 8);
  write_detections_jsonl(path, dets);
  const auto loaded = read_detections_jsonl(path);
  REQUIRE(loaded.size() == dets.size());
  for (std::size_t i = 0; i < dets.size(); ++i) {
    CHECK(loaded[i].image_id == dets[i].image_id);
    CHECK(loaded[i].class_id == dets[i].class_id);
    CHECK(loaded[i].confidence == dets[i].confidence);
    CHECK(loaded[i].box.x_max == dets[i].box.x_max);
  }

  std::ofstream(path) << R"({"image_id":0,"class_id":0,"box":[0,0,1,1],"confidence":1.5})"
                      << "\n";
  CHECK_THROWS_AS(read_detections_jsonl(path), std::runtime_error);
  std::ofstream(path) << R"({"image_id":0,"class_id":0,"box":[2,0,1,1],"confidence":0.5})"
                      << "\n";
  CHECK_THROWS_AS(read_detections_jsonl(path), std::runtime_error);
}
