#include <fstream>

#include <gtest/gtest.h>

#include "support.hpp"
#include "tsalign/checkpoint.hpp"

using namespace tsalign;

namespace {

TensorCheckpoint sample() {
  TensorCheckpoint c;
  c.metadata["kind"] = "test";
  Matrix a = fixtures::random_matrix(3, 4, 1);
  round_to_float(a);
  c.add("a", a);
  Matrix b = fixtures::random_matrix(1, 5, 2);
  round_to_float(b);
  c.add("b", b, {5});
  return c;
}

std::string expect_validation(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ValidationError& e) {
    return e.what();
  }
  ADD_FAILURE() << "expected ValidationError";
  return {};
}

}  // namespace

TEST(Checkpoint, RoundTripIsExactForFloatValues) {
  const auto dir = fixtures::temp_dir("ckpt_rt");
  const TensorCheckpoint c = sample();
  save_checkpoint(c, dir / "x.ckpt");
  const TensorCheckpoint back = read_checkpoint(dir / "x.ckpt");
  EXPECT_EQ(back.metadata.at("kind"), "test");
  ASSERT_EQ(back.tensors.size(), 2u);
  EXPECT_EQ(back.at("a").value, c.at("a").value);
  EXPECT_EQ(back.at("b").shape, (std::vector<std::int64_t>{5}));
  EXPECT_EQ(back.at("b").value.rows(), 1);
  EXPECT_EQ(back.at("b").value, c.at("b").value);
}

TEST(Checkpoint, FormatShape) { EXPECT_EQ(format_shape({3, 4}), "[3 x 4]"); }

TEST(Checkpoint, ManifestNamesMissingTensor) {
  const TensorCheckpoint c = sample();
  const std::string msg = expect_validation([&] { check_manifest(c, {{"a", {3, 4}}, {"wpe", {8, 4}}}); });
  EXPECT_NE(msg.find("'wpe'"), std::string::npos) << msg;
}

TEST(Checkpoint, ManifestNamesMisshapedTensor) {
  const TensorCheckpoint c = sample();
  const std::string msg = expect_validation([&] { check_manifest(c, {{"a", {4, 3}}}); });
  EXPECT_NE(msg.find("'a'"), std::string::npos) << msg;
  EXPECT_NO_THROW(check_manifest(c, {{"a", {3, 4}}, {"b", {5}}}));
}

TEST(Checkpoint, RejectsCorruptFiles) {
  const auto dir = fixtures::temp_dir("ckpt_bad");
  std::ofstream(dir / "hdr.ckpt") << "NOT A CHECKPOINT\n";
  expect_validation([&] { read_checkpoint(dir / "hdr.ckpt"); });
  expect_validation([&] { read_checkpoint(dir / "missing.ckpt"); });

  save_checkpoint(sample(), dir / "ok.ckpt");
  const auto size = std::filesystem::file_size(dir / "ok.ckpt");
  std::filesystem::copy_file(dir / "ok.ckpt", dir / "short.ckpt");
  std::filesystem::resize_file(dir / "short.ckpt", size - 4);
  const std::string truncated = expect_validation([&] { read_checkpoint(dir / "short.ckpt"); });
  EXPECT_NE(truncated.find("'b'"), std::string::npos) << truncated;

  std::filesystem::copy_file(dir / "ok.ckpt", dir / "long.ckpt");
  std::ofstream(dir / "long.ckpt", std::ios::app | std::ios::binary) << "xx";
  expect_validation([&] { read_checkpoint(dir / "long.ckpt"); });
}

TEST(Checkpoint, RejectsDuplicateAndBadShapes) {
  const auto dir = fixtures::temp_dir("ckpt_dup");
  TensorCheckpoint c = sample();
  c.tensors.push_back(c.tensors.front());
  expect_validation([&] { save_checkpoint(c, dir / "d.ckpt"); });
  TensorCheckpoint s;
  expect_validation([&] { s.add("x", Matrix::Zero(2, 2), {5}); });
}
