#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "catdet/errors.hpp"
#include "catdet/imageformer/imageformer.hpp"
#include "catdet/imageformer/patch.hpp"

using namespace catdet;
using namespace catdet::imageformer;

namespace {

Tensor random_tensor(num::Rng& rng, std::vector<std::size_t> shape, double extent = 1.0) {
  std::uniform_real_distribution<double> u(-extent, extent);
  Tensor t(std::move(shape));
  for (double& v : t.storage()) v = u(rng);
  return t;
}

std::vector<double> affine(const num::LinearParams& p, std::span<const double> x) {
  std::vector<double> y(p.out_dim());
  for (std::size_t o = 0; o < y.size(); ++o) {
    y[o] = p.bias[o];
    for (std::size_t i = 0; i < x.size(); ++i) y[o] += p.weight(o, i) * x[i];
  }
  return y;
}

// Loop-by-loop multi-head attention with residual.
Tensor reference_encoder(const Tensor& tokens, std::size_t heads, const EncoderParams& p) {
  const std::size_t t = tokens.dim(0), d = tokens.dim(1), dh = d / heads;
  std::vector<std::vector<double>> q(t), k(t), v(t);
  for (std::size_t i = 0; i < t; ++i) {
    q[i] = affine(p.query, tokens.row(i));
    k[i] = affine(p.key, tokens.row(i));
    v[i] = affine(p.value, tokens.row(i));
  }
  Tensor out = tokens;
  for (std::size_t i = 0; i < t; ++i) {
    std::vector<double> concat(d, 0.0);
    for (std::size_t h = 0; h < heads; ++h) {
      std::vector<double> s(t);
      double z = 0;
      for (std::size_t j = 0; j < t; ++j) {
        double dot = 0;
        for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) dot += q[i][c] * k[j][c];
        s[j] = std::exp(dot / std::sqrt(static_cast<double>(dh)));
        z += s[j];
      }
      for (std::size_t j = 0; j < t; ++j) {
        for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) concat[c] += s[j] / z * v[j][c];
      }
    }
    const auto projected = affine(p.output, concat);
    for (std::size_t c = 0; c < d; ++c) out(i, c) += projected[c];
  }
  return out;
}

num::LinearParams hand_linear(std::initializer_list<std::initializer_list<double>> w, std::vector<double> b) {
  return num::LinearParams{Tensor::matrix(w), Tensor::vector(std::move(b))};
}

}  // namespace

TEST(Patchify, OrderingAndRoundTrip) {
  // 1 channel 2x4 map, patch 2: two tokens, (dy, dx) order inside each.
  Tensor map({1, 2, 4});
  for (std::size_t i = 0; i < 8; ++i) map[i] = static_cast<double>(i);
  const Tensor tokens = patchify(map, 2);
  EXPECT_EQ(tokens, Tensor::matrix({{0, 1, 4, 5}, {2, 3, 6, 7}}));
  EXPECT_EQ(unpatchify(tokens, 1, 2, 4, 2), map);
}

TEST(Patchify, ChannelMajorWithinToken) {
  Tensor map({2, 2, 2});
  for (std::size_t i = 0; i < 8; ++i) map[i] = static_cast<double>(i);
  EXPECT_EQ(patchify(map, 2), Tensor::matrix({{0, 1, 2, 3, 4, 5, 6, 7}}));
}

TEST(Patchify, PixelTokens) {
  num::Rng rng(1);
  const Tensor map = random_tensor(rng, {3, 4, 5});
  const Tensor tokens = patchify(map, 1);
  ASSERT_EQ(tokens.shape(), (std::vector<std::size_t>{20, 3}));
  EXPECT_EQ(tokens(7, 2), map(2, 1, 2));
}

TEST(Patchify, RoundTripIsBitExact) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    num::Rng rng(seed);
    const std::size_t s = std::size_t{1} << (seed % 4);
    const Tensor map = random_tensor(rng, {1 + seed % 3, 2 * s, 3 * s}, 1e3);
    EXPECT_EQ(unpatchify(patchify(map, s), map.dim(0), map.dim(1), map.dim(2), s), map);
  }
}

TEST(Patchify, TokenCountAtPaperLevelOne) {
  EXPECT_EQ(patchify(Tensor({1, 192, 640}), 32).shape(), (std::vector<std::size_t>{120, 1024}));
}

TEST(Patchify, Errors) {
  EXPECT_THROW(patchify(Tensor({1, 6, 8}), 4), ShapeError);
  EXPECT_THROW(patchify(Tensor({6, 8}), 2), ShapeError);
  EXPECT_THROW(unpatchify(Tensor({3, 4}), 1, 4, 4, 2), ShapeError);
}

TEST(Encoder, HandSetSingleHead) {
  // Identity Q/K/V and output: scores q.k/sqrt(2).
  const Tensor tokens = Tensor::matrix({{1, 0}, {0, 2}});
  EncoderParams p;
  p.query = p.key = p.value = p.output = num::identity_linear(2);
  const double a = std::exp(1 / std::sqrt(2.0)), b = 1.0;  // row 0: scores 1/sqrt2, 0
  const double c = 1.0, d = std::exp(4 / std::sqrt(2.0));  // row 1: scores 0, 4/sqrt2
  const Tensor want = Tensor::matrix({{1 + a / (a + b), 2 * b / (a + b)}, {c / (c + d), 2 + 2 * d / (c + d)}});
  const Tensor got = multihead_encoder(tokens, 1, p);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
}

TEST(Encoder, HandSetWeightsMatchLoopOracle) {
  const Tensor tokens = Tensor::matrix({{0.5, -1}, {2, 0.25}});
  EncoderParams p;
  p.query = hand_linear({{1, 2}, {0, -1}}, {0.1, 0});
  p.key = hand_linear({{0.5, 0}, {1, 1}}, {0, 0.2});
  p.value = hand_linear({{-1, 0.5}, {2, 0}}, {0.3, -0.3});
  p.output = hand_linear({{1, 1}, {0, 2}}, {0, 0.05});
  const Tensor want = reference_encoder(tokens, 1, p);
  const Tensor got = multihead_encoder(tokens, 1, p);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
}

TEST(Encoder, RandomMultiHeadMatchesLoopOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    num::Rng rng(seed);
    const Tensor tokens = random_tensor(rng, {7, 8});
    const EncoderParams p = init_encoder(8, rng);
    const Tensor want = reference_encoder(tokens, 4, p);
    const Tensor got = multihead_encoder(tokens, 4, p);
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
  }
}

TEST(Encoder, SingleTokenIsResidualPlusProjectedValue) {
  num::Rng rng(2);
  const Tensor token = random_tensor(rng, {1, 8});
  const EncoderParams p = init_encoder(8, rng);
  const auto value = affine(p.value, token.row(0));
  const auto projected = affine(p.output, value);
  const Tensor got = multihead_encoder(token, 4, p);
  for (std::size_t c = 0; c < 8; ++c) EXPECT_NEAR(got(0, c), token(0, c) + projected[c], 1e-12);
  const auto w = multihead_attention_weights(token, 4, p);
  for (const Tensor& head : w) EXPECT_EQ(head(0, 0), 1.0);
}

TEST(Encoder, IdenticalTokensGiveIdenticalOutputs) {
  num::Rng rng(3);
  const Tensor one = random_tensor(rng, {1, 8});
  Tensor tokens({5, 8});
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t c = 0; c < 8; ++c) tokens(i, c) = one(0, c);
  }
  const Tensor out = multihead_encoder(tokens, 2, init_encoder(8, rng));
  for (std::size_t i = 1; i < 5; ++i) {
    for (std::size_t c = 0; c < 8; ++c) EXPECT_EQ(out(i, c), out(0, c));
  }
}

TEST(Encoder, AttentionRowsSumToOne) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    num::Rng rng(seed);
    const Tensor tokens = random_tensor(rng, {12, 16}, 4.0);
    const auto weights = multihead_attention_weights(tokens, 4, init_encoder(16, rng));
    ASSERT_EQ(weights.size(), 4u);
    for (const Tensor& w : weights) {
      for (std::size_t i = 0; i < 12; ++i) {
        double s = 0;
        for (std::size_t j = 0; j < 12; ++j) s += w(i, j);
        EXPECT_NEAR(s, 1.0, 1e-9);
      }
    }
  }
}

TEST(Encoder, Errors) {
  num::Rng rng(4);
  const EncoderParams p = init_encoder(6, rng);
  EXPECT_THROW(multihead_encoder(Tensor({3, 6}), 4, p), ShapeError);
  EXPECT_THROW(multihead_encoder(Tensor({3, 5}), 3, p), ShapeError);
}

TEST(Imageformer, PaperConfigurationGeometry) {
  const auto cfg = ImageformerConfig::paper();
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_EQ(cfg.width, 1280u);
  EXPECT_EQ(cfg.height, 384u);
  EXPECT_EQ(cfg.heads, 4u);
  EXPECT_EQ(cfg.embed_dim, 1024u);
  EXPECT_EQ(cfg.channels, (std::array<std::size_t, kLevels>{64, 128, 256, 512}));
  EXPECT_EQ(cfg.patches, (std::array<std::size_t, kLevels>{32, 16, 8, 4}));
  EXPECT_EQ(cfg.up_strides, (std::array<std::size_t, kLevels>{2, 4, 8, 16}));
  const std::array<std::size_t, kLevels> widths{640, 320, 160, 80}, heights{192, 96, 48, 24};
  for (std::size_t l = 0; l < kLevels; ++l) {
    EXPECT_EQ(cfg.map_width(l), widths[l]);
    EXPECT_EQ(cfg.map_height(l), heights[l]);
    EXPECT_EQ(cfg.tokens(l), 120u);
  }
}

TEST(Imageformer, ValidationRejectsUnequalTokenCounts) {
  auto cfg = ImageformerConfig::scaled();
  cfg.patches = {8, 8, 2, 1};
  EXPECT_THROW(cfg.validate(), ArgumentError);
  cfg = ImageformerConfig::scaled();
  cfg.up_strides = {2, 4, 4, 16};
  EXPECT_THROW(cfg.validate(), ArgumentError);
  cfg = ImageformerConfig::scaled();
  cfg.embed_dim = 30;
  EXPECT_THROW(cfg.validate(), ArgumentError);
}

TEST(Itb, HalvesExtentAndHasLevelWidth) {
  const auto cfg = ImageformerConfig::scaled();
  num::Rng rng(5);
  const ItbLevelConfig level{3, 8, 8, 4, 3};
  const ItbParams p = init_itb(level, cfg.embed_dim, rng);
  const Tensor position = random_tensor(rng, {32, cfg.embed_dim});
  const Tensor out = itb_forward(level, p, position, random_tensor(rng, {3, 64, 128}));
  EXPECT_EQ(out.shape(), (std::vector<std::size_t>{8, 32, 64}));
  EXPECT_NO_THROW(out.check_finite("itb"));
}

TEST(Itb, ZeroConvolutionsGiveZeroMap) {
  // Zero conv maps yield zero tokens; with zero position and biases everything after stays zero.
  num::Rng rng(6);
  const ItbLevelConfig level{3, 4, 4, 2, 3};
  ItbParams p = init_itb(level, 8, rng);
  p.conv1_weight = Tensor(p.conv1_weight.shape());
  p.conv1_bias = Tensor(p.conv1_bias.shape());
  p.conv2_weight = Tensor(p.conv2_weight.shape());
  p.conv2_bias = Tensor(p.conv2_bias.shape());
  p.embed.bias = Tensor(p.embed.bias.shape());
  for (auto* l : {&p.encoder.query, &p.encoder.key, &p.encoder.value, &p.encoder.output}) {
    l->bias = Tensor(l->bias.shape());
  }
  p.unembed.bias = Tensor(p.unembed.bias.shape());
  const Tensor out = itb_forward(level, p, Tensor({8, 8}), random_tensor(rng, {3, 16, 32}));
  EXPECT_EQ(out, Tensor({4, 8, 16}));
}

TEST(Itb, WrongChannelCountThrows) {
  num::Rng rng(7);
  const ItbLevelConfig level{3, 4, 4, 2, 3};
  const ItbParams p = init_itb(level, 8, rng);
  EXPECT_THROW(itb_forward(level, p, Tensor({8, 8}), Tensor({2, 16, 32})), ShapeError);
  EXPECT_THROW(itb_forward(level, p, Tensor({7, 8}), Tensor({3, 16, 32})), ShapeError);
}

TEST(Imageformer, ScaledShapeTrace) {
  const auto cfg = ImageformerConfig::scaled();
  num::Rng rng(8);
  const ImageformerParams p = init_imageformer(cfg, rng);
  Tensor image({3, 64, 128});
  std::uniform_real_distribution<double> u(0, 1);
  for (double& v : image.storage()) v = u(rng);
  const auto out = imageformer_forward(cfg, p, image);
  const std::array<std::size_t, kLevels> w{64, 32, 16, 8}, h{32, 16, 8, 4};
  for (std::size_t l = 0; l < kLevels; ++l) {
    EXPECT_EQ(out.levels[l].shape(), (std::vector<std::size_t>{cfg.channels[l], h[l], w[l]}));
    EXPECT_EQ(out.upsampled[l].shape(), (std::vector<std::size_t>{cfg.up_channels, 64, 128}));
  }
  EXPECT_EQ(out.fused.shape(), (std::vector<std::size_t>{cfg.out_channels, 64, 128}));
  EXPECT_NO_THROW(out.fused.check_finite("imageformer"));
}

TEST(Imageformer, ZeroImageWithZeroBiasesGivesZeroMap) {
  const auto cfg = ImageformerConfig::scaled();
  num::Rng rng(9);
  ImageformerParams p = init_imageformer(cfg, rng);
  for (auto& b : p.blocks) {
    b.conv1_bias = Tensor(b.conv1_bias.shape());
    b.conv2_bias = Tensor(b.conv2_bias.shape());
    b.embed.bias = Tensor(b.embed.bias.shape());
    for (auto* l : {&b.encoder.query, &b.encoder.key, &b.encoder.value, &b.encoder.output}) {
      l->bias = Tensor(l->bias.shape());
    }
    b.unembed.bias = Tensor(b.unembed.bias.shape());
  }
  p.position = Tensor(p.position.shape());
  for (auto& b : p.up_bias) b = Tensor(b.shape());
  p.fuse_bias = Tensor(p.fuse_bias.shape());
  const auto out = imageformer_forward(cfg, p, Tensor({3, 64, 128}));
  EXPECT_EQ(out.fused, Tensor({cfg.out_channels, 64, 128}));
}

TEST(Imageformer, WrongResolutionThrows) {
  const auto cfg = ImageformerConfig::scaled();
  num::Rng rng(10);
  const auto p = init_imageformer(cfg, rng);
  EXPECT_THROW(imageformer_forward(cfg, p, Tensor({3, 64, 64})), ShapeError);
}
