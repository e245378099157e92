// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <string>

#include "glsr/checkpoint.hpp"
#include "glsr/config.hpp"
#include "glsr/image.hpp"
#include "glsr/random.hpp"

using namespace glsr;
namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> bytes(const std::string& s) { return {s.begin(), s.end()}; }

ImageU8 random_image(std::size_t w, std::size_t h, std::uint64_t seed) {
  Rng rng(seed);
  ImageU8 img(w, h);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

std::size_t parse_offset(const std::vector<std::uint8_t>& b) {
  try {
    (void)read_ppm(b);
  } catch (const ParseError& e) {
    return e.offset;
  }
  ADD_FAILURE() << "expected ParseError";
  return 0;
}

fs::path temp_path(const std::string& name) { return fs::temp_directory_path() / ("glsr_test_io_" + name); }

}  // namespace

TEST(Ppm, RedPixelIsFourteenBytes) {
  ImageU8 img(1, 1);
  img.at(0, 0, 0) = 255;
  const auto out = write_ppm(img);
  const std::string expect = std::string("P6\n1 1\n255\n") + '\xff' + '\0' + '\0';
  ASSERT_EQ(out.size(), 14u);
  EXPECT_EQ(out, bytes(expect));
  EXPECT_EQ(read_ppm(out), img);
}

TEST(Ppm, RandomRoundTripIsBitwise) {
  const ImageU8 img = random_image(7, 5, 1);
  const auto enc = write_ppm(img);
  EXPECT_EQ(read_ppm(enc), img);
  EXPECT_EQ(write_ppm(read_ppm(enc)), enc);
}

TEST(Ppm, CommentsAndFlexibleWhitespace) {
  const auto img = read_ppm(bytes(std::string("P6\n#x\n2 1\n255\n") + "abcdef"));
  EXPECT_EQ(img.width, 2u);
  EXPECT_EQ(img.height, 1u);
  EXPECT_EQ(img.at(1, 0, 2), 'f');
  const auto img2 = read_ppm(bytes(std::string("P6 # comment\r\n 1\t# more\n1  255 ") + "xyz"));
  EXPECT_EQ(img2.pixels, bytes("xyz"));
}

TEST(Ppm, MalformedInputsReportOffsets) {
  EXPECT_EQ(parse_offset(bytes("P3\n1 1\n255\n...")), 0u);
  EXPECT_EQ(parse_offset(bytes("P6\n1 1\n65535\n......")), 6u);  // start of maxval token
  EXPECT_EQ(parse_offset(bytes("P6\n1 1\n255\nab")), 13u);  // end of truncated payload
  EXPECT_GT(parse_offset(bytes("P6\n1 x\n255\nabc")), 0u);
  EXPECT_THROW(read_ppm(bytes("P6\n1 1")), ParseError);
  EXPECT_THROW(read_ppm(bytes("P6\n0 1\n255\n")), ParseError);
}

TEST(Ppm, FileRoundTrip) {
  const auto path = temp_path("img.ppm");
  const ImageU8 img = random_image(9, 4, 2);
  save_ppm(path.string(), img);
  EXPECT_EQ(load_ppm(path.string()), img);
  fs::remove(path);
}

TEST(Image, TensorConversionRoundTrips) {
  const ImageU8 img = random_image(6, 3, 3);
  const auto t = to_tensor<float>(img);
  EXPECT_EQ(t.shape(), (Shape{1, 3, 3, 6}));
  EXPECT_EQ(t(0, 2, 1, 4), img.at(4, 1, 2) / 255.0f);
  EXPECT_EQ(to_image(t), img);
  Tensor<float> over({1, 3, 1, 1}, 2.0f);
  over[1] = -1.0f;
  const auto clamped = to_image(over);
  EXPECT_EQ(clamped.pixels, (std::vector<std::uint8_t>{255, 0, 255}));
}

// checkpoints

TEST(Checkpoint, RoundTripIsBitwise) {
  const ModelConfig cfg{8, 2, 3, true, false, true};
  const auto w = init_weights<float>(cfg, 4);
  const auto enc = encode_checkpoint(cfg, w);
  const auto ck = decode_checkpoint<float>(enc);
  EXPECT_EQ(ck.config, cfg);
  EXPECT_EQ(ck.weights, w);
  EXPECT_EQ(encode_checkpoint(ck.config, ck.weights), enc);

  const auto path = temp_path("w.ckpt");
  save_weights(path.string(), cfg, w);
  EXPECT_EQ(read_file(path.string()), enc);
  EXPECT_EQ(load_weights(path.string()).weights, w);
  fs::remove(path);
}

TEST(Checkpoint, HeaderLayoutIsLittleEndian) {
  const ModelConfig cfg{8, 1, 2};
  const auto enc = encode_checkpoint(cfg, init_weights<float>(cfg, 0));
  ASSERT_GT(enc.size(), 28u);
  EXPECT_EQ(std::string(enc.begin(), enc.begin() + 4), "GLSR");
  const std::vector<std::uint8_t> head(enc.begin() + 4, enc.begin() + 28);
  EXPECT_EQ(head, (std::vector<std::uint8_t>{1, 0, 0, 0, 8, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 7, 0, 0, 0, 26, 0, 0, 0}));
  // first record: u16 length 6, "head.w", rank 4, dims 8,3,3,3
  EXPECT_EQ(enc[28], 6);
  EXPECT_EQ(enc[29], 0);
  EXPECT_EQ(std::string(enc.begin() + 30, enc.begin() + 36), "head.w");
  EXPECT_EQ(enc[36], 4);
}

TEST(Checkpoint, RejectsCorruption) {
  const ModelConfig cfg{8, 1, 2};
  auto enc = encode_checkpoint(cfg, init_weights<float>(cfg, 0));
  auto bad_magic = enc;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint<float>(bad_magic), ParseError);
  auto bad_version = enc;
  bad_version[4] = 2;
  EXPECT_THROW(decode_checkpoint<float>(bad_version), ParseError);
  auto truncated = enc;
  truncated.resize(enc.size() - 3);
  EXPECT_THROW(decode_checkpoint<float>(truncated), ParseError);
  auto trailing = enc;
  trailing.push_back(0);
  EXPECT_THROW(decode_checkpoint<float>(trailing), ParseError);
}

TEST(Checkpoint, WrongWidthNamesTheParameter) {
  const ModelConfig small{8, 1, 2}, big{16, 1, 2};
  const auto enc = encode_checkpoint(small, init_weights<float>(small, 0));
  try {
    (void)decode_checkpoint<float>(enc, &big);
    FAIL() << "expected StructuralError";
  } catch (const StructuralError& e) {
    EXPECT_NE(std::string(e.what()).find("head.w"), std::string::npos) << e.what();
  }
}

TEST(Checkpoint, MissingTensorRejected) {
  const ModelConfig cfg{8, 1, 2};
  const auto full = encode_checkpoint(cfg, init_weights<float>(cfg, 0));
  // Claim one tensor fewer and drop the final record (tail.b: 2 + 6 + 1 + 4 + 12*4 bytes).
  auto cut = full;
  cut[24] = 25;
  cut.resize(full.size() - (2 + 6 + 1 + 4 + 48));
  EXPECT_THROW(decode_checkpoint<float>(cut), StructuralError);
}

// configuration

TEST(RunConfig, ParsesKnownKeys) {
  const auto rc = parse_run_config(
      "# comment\n"
      "channels = 16  # width\nblocks=2\nscale=3\nglie=false\n\n"
      "steps=10\nbatch=4\nlr_patch=16\nlr_start=2e-3\nlr_end=1e-6\ngamma=0.1\nseed=9\n"
      "schedule=step\nstep_interval=5\nstep_decay=0.25\naugment=off\nsynth_count=12\n");
  EXPECT_EQ(rc.model, (ModelConfig{16, 2, 3, true, true, false}));
  EXPECT_EQ(rc.train.total_steps, 10u);
  EXPECT_EQ(rc.train.batch, 4u);
  EXPECT_EQ(rc.train.lr_patch, 16u);
  EXPECT_EQ(rc.train.lr_start, 2e-3);
  EXPECT_EQ(rc.train.lr_end, 1e-6);
  EXPECT_EQ(rc.train.gamma, 0.1);
  EXPECT_EQ(rc.train.seed, 9u);
  EXPECT_EQ(rc.train.schedule, Schedule::step);
  EXPECT_EQ(rc.train.step_interval, 5u);
  EXPECT_EQ(rc.train.step_decay, 0.25);
  EXPECT_FALSE(rc.train.augment);
  EXPECT_EQ(rc.synth_count, 12u);
}

TEST(RunConfig, DefaultsMatchTrainingRecipe) {
  const auto rc = parse_run_config(std::string());
  EXPECT_EQ(rc.model, (ModelConfig{16, 2, 2}));
  EXPECT_EQ(rc.train.total_steps, 1500u);
  EXPECT_EQ(rc.train.batch, 8u);
  EXPECT_EQ(rc.train.lr_patch, 32u);
  EXPECT_EQ(rc.train.lr_start, 1e-3);
  EXPECT_EQ(rc.train.lr_end, 1e-5);
  EXPECT_EQ(rc.train.gamma, 0.05);
}

TEST(RunConfig, RejectsBadInput) {
  try {
    parse_run_config("channels=8\nwidth=3\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("width"), std::string::npos);
  }
  EXPECT_THROW(parse_run_config("channels\n"), ConfigError);
  EXPECT_THROW(parse_run_config("channels=eight\n"), ConfigError);
  EXPECT_THROW(parse_run_config("channels=-8\n"), ConfigError);
  EXPECT_THROW(parse_run_config("gamma=0.1x\n"), ConfigError);
  EXPECT_THROW(parse_run_config("glie=maybe\n"), ConfigError);
  EXPECT_THROW(parse_run_config("channels=6\n"), ConfigError);
  EXPECT_THROW(parse_run_config("lr_patch=12\n"), ConfigError);
  EXPECT_THROW(parse_run_config("schedule=linear\n"), ConfigError);
}
