#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numeric>

#include <graftkit/model_graph.hpp>
#include <graftkit/random.hpp>

using namespace graftkit;

namespace {

Tensor random_input(const BlockChain& chain, Rng& rng, std::int64_t batch = 1) {
  const InputSpec& spec = chain.input_spec();
  Tensor x({batch, spec.channels, spec.height, spec.width});
  for (std::int64_t i = 0; i < x.numel(); ++i) x[i] = rng.uniform(-1.0, 1.0);
  return x;
}

// Independent parameter count: product of each parameter tensor's dims.
std::int64_t manual_param_count(BlockChain& chain) {
  std::int64_t total = 0;
  for (Tensor* p : chain.params()) {
    std::int64_t n = 1;
    for (std::int64_t d : p->shape()) n *= d;
    total += n;
  }
  return total;
}

}  // namespace

TEST_CASE("reference backbone has five blocks with the expected parameter budget") {
  BlockChain lenet = make_lenet5(1, 7);
  CHECK(lenet.size() == 5);
  const std::int64_t total = lenet.param_count();
  CHECK(total > 58000);
  CHECK(total < 70000);

  SplitParts parts = split(lenet, kLenetDefaultSplit);
  const std::int64_t front = parts.front.param_count();
  CHECK(front > 4500);
  CHECK(front < 5500);
  const double fraction = count_params(parts.front, total).fraction;
  CHECK(fraction > 0.06);
  CHECK(fraction < 0.10);
}

TEST_CASE("split partitions block counts") {
  const BlockChain lenet = make_lenet5(1, 7);
  const SplitParts parts = split(lenet, SplitSpec{2, 4});
  CHECK(parts.front.size() == 2);
  CHECK(parts.mid.size() == 2);
  CHECK(parts.last.size() == 1);
}

TEST_CASE("split rejects invalid indices") {
  const BlockChain lenet = make_lenet5(1, 7);
  CHECK_THROWS_WITH_AS(split(lenet, SplitSpec{0, 2}), doctest::Contains("front_end=0"),
                       std::out_of_range);
  CHECK_THROWS_WITH_AS(split(lenet, SplitSpec{3, 2}), doctest::Contains("mid_end=2"),
                       std::out_of_range);
  CHECK_THROWS_WITH_AS(split(lenet, SplitSpec{2, 6}), doctest::Contains("mid_end=6"),
                       std::out_of_range);
}

TEST_CASE("split/compose identity holds element-exact on all reference variants") {
  const BlockChain lenet = make_lenet5(1, 21);
  Rng rng(5);
  const auto variants = reference_split_variants();
  CHECK(variants.size() == 6);
  for (const SplitSpec& spec : variants) {
    const SplitParts parts = split(lenet, spec);
    for (int i = 0; i < 10; ++i) {
      const Tensor x = random_input(lenet, rng, 2);
      const Tensor direct = lenet.infer(x);
      const Tensor composed = parts.last.infer(parts.mid.infer(parts.front.infer(x)));
      CHECK(bit_equal(direct, composed));
    }
  }
}

TEST_CASE("parameter accounting sums across parts") {
  const BlockChain lenet = make_lenet5(1, 3);
  const std::int64_t total = lenet.param_count();
  for (const SplitSpec& spec : reference_split_variants()) {
    SplitParts parts = split(lenet, spec);
    CHECK(parts.front.param_count() + parts.mid.param_count() + parts.last.param_count() ==
          total);
  }
  const auto per_block = lenet.block_param_counts();
  CHECK(std::accumulate(per_block.begin(), per_block.end(), std::int64_t{0}) == total);
  for (const std::int64_t count : per_block) CHECK(count >= 0);
}

TEST_CASE("count_params") {
  BlockChain empty;
  CHECK(count_params(empty, 100).count == 0);

  Block conv_block("conv");
  conv_block.add(std::make_unique<Conv2d>(1, 6, 5));
  BlockChain single({std::move(conv_block)}, InputSpec{1, 28, 28});
  CHECK(count_params(single, 0).count == 5 * 5 * 1 * 6 + 6);
  CHECK(count_params(single, 624).fraction == doctest::Approx(0.25));
}

TEST_CASE("grafted front end mirrors the template with new input channels") {
  const BlockChain lenet = make_lenet5(1, 7);
  SplitParts parts = split(lenet, kLenetDefaultSplit);

  BlockChain gn = build_grafted_frontend(parts.front, 3, 42);
  CHECK(gn.input_spec().channels == 3);
  // Only the first conv widens; everything downstream keeps its shape.
  CHECK(gn.out_shape({4, 3, 28, 28}) == parts.front.out_shape({4, 1, 28, 28}));
  CHECK(gn.param_count() == parts.front.param_count() + 2 * 5 * 5 * 6);

  BlockChain gn_again = build_grafted_frontend(parts.front, 3, 42);
  CHECK(manual_param_count(gn) == gn.param_count());
  for (std::size_t b = 0; b < gn.size(); ++b) {
    auto ps_a = gn.params();
    auto ps_b = gn_again.params();
    REQUIRE(ps_a.size() == ps_b.size());
    for (std::size_t i = 0; i < ps_a.size(); ++i) CHECK(bit_equal(*ps_a[i], *ps_b[i]));
  }

  BlockChain different_seed = build_grafted_frontend(parts.front, 3, 43);
  CHECK_FALSE(bit_equal(*different_seed.params()[0], *gn.params()[0]));

  CHECK_THROWS_AS(build_grafted_frontend(BlockChain{}, 3, 0), std::invalid_argument);
  CHECK_THROWS_AS(build_grafted_frontend(parts.front, 0, 0), std::invalid_argument);
}

TEST_CASE("identity graft reproduces the pretrained network") {
  const BlockChain lenet = make_lenet5(1, 9);
  SplitParts parts = split(lenet, kLenetDefaultSplit);
  const GraftedModel model = graft(parts.front, parts.mid, parts.last);

  Rng rng(17);
  for (int i = 0; i < 5; ++i) {
    const Tensor x = random_input(lenet, rng, 3);
    CHECK(max_abs_diff(model.infer(x), lenet.infer(x)) < 1e-6);
  }
  CHECK(model.trainable_param_count() == parts.front.param_count());
}

TEST_CASE("graft rejects shape mismatches with both shapes in the message") {
  const BlockChain lenet = make_lenet5(1, 9);
  SplitParts deep = split(lenet, SplitSpec{2, 3});
  SplitParts shallow = split(lenet, SplitSpec{1, 3});
  // Front of depth 1 produces (6, 12, 12); the deeper middle net expects
  // (32, 4, 4).
  CHECK_THROWS_WITH_AS(graft(shallow.front, deep.mid, deep.last),
                       doctest::Contains("(1, 6, 12, 12)"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(graft(shallow.front, deep.mid, deep.last),
                       doctest::Contains("(1, 32, 4, 4)"), std::invalid_argument);
}

TEST_CASE("empty remainder is a valid split") {
  const BlockChain lenet = make_lenet5(1, 4);
  const SplitParts parts = split(lenet, SplitSpec{3, 5});
  CHECK(parts.last.empty());
  Rng rng(3);
  const Tensor x = random_input(lenet, rng);
  CHECK(bit_equal(parts.last.infer(parts.mid.infer(parts.front.infer(x))), lenet.infer(x)));
}
