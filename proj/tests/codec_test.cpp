#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "scalepoison/codec.hpp"
#include "test_support.hpp"

namespace sp = scalepoison;
using sp::testing::TempDir;

namespace {

void write_bytes(const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

// Encoded by an independent PNG writer (Pillow).
const std::vector<std::uint8_t> kPillowPixel = {
    0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48, 0x44, 0x52, 0x00, 0x00,
    0x00, 0x01, 0x00, 0x00, 0x00, 0x01, 0x08, 0x02, 0x00, 0x00, 0x00, 0x90, 0x77, 0x53, 0xde, 0x00, 0x00, 0x00,
    0x0c, 0x49, 0x44, 0x41, 0x54, 0x78, 0x9c, 0x63, 0xe0, 0x51, 0xb2, 0x00, 0x00, 0x00, 0xa4, 0x00, 0x67, 0x98,
    0xd0, 0xe0, 0x98, 0x00, 0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82};
const std::vector<std::uint8_t> kPillowBlack2x2 = {
    0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48, 0x44, 0x52, 0x00, 0x00,
    0x00, 0x02, 0x00, 0x00, 0x00, 0x02, 0x08, 0x02, 0x00, 0x00, 0x00, 0xfd, 0xd4, 0x9a, 0x73, 0x00, 0x00, 0x00,
    0x0b, 0x49, 0x44, 0x41, 0x54, 0x78, 0x9c, 0x63, 0x60, 0x40, 0x06, 0x00, 0x00, 0x0e, 0x00, 0x01, 0xa9, 0x91,
    0x73, 0xb1, 0x00, 0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82};

sp::Errc error_code_of(const std::filesystem::path& p) {
  try {
    sp::load_image(p);
  } catch (const sp::Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error for " << p;
  return sp::Errc::invalid_argument;
}

}  // namespace

TEST(Codec, ReadsReferencePngs) {
  TempDir dir("codec");
  write_bytes(dir / "pixel.png", kPillowPixel);
  write_bytes(dir / "black.png", kPillowBlack2x2);
  EXPECT_EQ(sp::load_image(dir / "pixel.png"), sp::Image(1, 1, 3, {12, 34, 56}));
  EXPECT_EQ(sp::load_image(dir / "black.png"), sp::Image(2, 2, 3, 0));
}

TEST(Codec, ReadsHandWrittenPpm) {
  TempDir dir("codec");
  std::vector<std::uint8_t> bytes = {'P', '6', '\n', '#', ' ', 'c', '\n', '1', ' ', '1', '\n', '2', '5', '5', '\n', 12, 34, 56};
  write_bytes(dir / "pixel.ppm", bytes);
  EXPECT_EQ(sp::load_image(dir / "pixel.ppm"), sp::Image(1, 1, 3, {12, 34, 56}));
}

TEST(Codec, RoundTripIsIdentity) {
  TempDir dir("codec");
  std::mt19937_64 rng(5);
  for (const char* ext : {".png", ".pnm"}) {
    for (int c : {1, 3}) {
      const auto img = sp::testing::random_image(rng, 7, 11, c);
      const auto path = dir / (std::string("img") + std::to_string(c) + ext);
      sp::save_image(img, path);
      EXPECT_EQ(sp::load_image(path), img) << path;
    }
  }
}

TEST(Codec, DistinctErrors) {
  TempDir dir("codec");
  EXPECT_EQ(error_code_of(dir / "missing.png"), sp::Errc::unreadable_file);

  write_bytes(dir / "photo.jpg", {0xff, 0xd8, 0xff, 0xe0, 0, 0x10});
  EXPECT_EQ(error_code_of(dir / "photo.jpg"), sp::Errc::unsupported_format);

  auto truncated = kPillowPixel;
  truncated.resize(40);
  write_bytes(dir / "broken.png", truncated);
  EXPECT_EQ(error_code_of(dir / "broken.png"), sp::Errc::corrupt_stream);

  write_bytes(dir / "short.ppm", {'P', '6', ' ', '2', ' ', '2', ' ', '2', '5', '5', '\n', 1, 2, 3});
  EXPECT_EQ(error_code_of(dir / "short.ppm"), sp::Errc::corrupt_stream);
}

TEST(Codec, SaveRejectsUnknownExtension) {
  TempDir dir("codec");
  EXPECT_THROW(sp::save_image(sp::Image(1, 1, 1), dir / "x.jpg"), sp::Error);
}
