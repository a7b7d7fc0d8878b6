#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>

#include <jpeglib.h>

#include "abstractnet/image_io.hpp"
#include "abstractnet/raster.hpp"
#include "support/oracles.hpp"

using namespace abstractnet;
using namespace std::string_literals;

namespace {

void write_bytes(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out << bytes;
}

// Baseline JPEG written straight through libjpeg, quality 95.
void write_jpeg(const Raster& img, const std::filesystem::path& path) {
  FILE* f = std::fopen(path.c_str(), "wb");
  ASSERT_NE(f, nullptr);
  jpeg_compress_struct cinfo{};
  jpeg_error_mgr jerr{};
  cinfo.err = jpeg_std_error(&jerr);
  jpeg_create_compress(&cinfo);
  jpeg_stdio_dest(&cinfo, f);
  cinfo.image_width = JDIMENSION(img.width());
  cinfo.image_height = JDIMENSION(img.height());
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, 95, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  while (cinfo.next_scanline < cinfo.image_height) {
    JSAMPROW row = const_cast<JSAMPROW>(img.pixel(0, int(cinfo.next_scanline)));
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  std::fclose(f);
}

}  // namespace

TEST(Raster, ConstructionAndAccess) {
  Raster r(3, 2, Color{1, 2, 3, 255});
  EXPECT_EQ(r.pixel_count(), 6);
  EXPECT_EQ(r.bytes().size(), 18u);
  EXPECT_EQ(r.color_at(2, 1), (Color{1, 2, 3, 255}));
  r.set(1, 1, {9, 8, 7, 255});
  EXPECT_EQ(r.pixel(1, 1)[0], 9);
  EXPECT_EQ(r.bytes()[(1 * 3 + 1) * 3 + 2], 7);
}

TEST(Raster, RejectsBadDimensions) {
  EXPECT_THROW(Raster(0, 4), std::invalid_argument);
  EXPECT_THROW(Raster(4, -1), std::invalid_argument);
  EXPECT_THROW(Raster(2, 2, std::vector<std::uint8_t>(5)), std::invalid_argument);
}

TEST(Resize, NearestIdentityAndUpscale) {
  const Raster src = oracle::synthetic_image(7, 5, 1);
  EXPECT_EQ(resize_nearest(src, 7, 5), src);
  const Raster up = resize_nearest(src, 14, 10);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 14; ++x) ASSERT_EQ(up.color_at(x, y), src.color_at(x / 2, y / 2));
}

TEST(Resize, BilinearPreservesUniform) {
  const Raster src(9, 13, Color{40, 80, 120, 255});
  EXPECT_EQ(resize_bilinear(src, 31, 4), Raster(31, 4, Color{40, 80, 120, 255}));
}

TEST(Resize, CenterCropIsSquare) {
  const Raster wide = oracle::synthetic_image(120, 60, 2);
  const Raster out = resize_and_center_crop(wide, 64);
  EXPECT_EQ(out.width(), 64);
  EXPECT_EQ(out.height(), 64);
  // Already square at the requested edge: untouched.
  const Raster sq = oracle::synthetic_image(64, 64, 3);
  EXPECT_EQ(resize_and_center_crop(sq, 64), sq);
  // Crop without scaling takes the middle columns.
  const Raster tall = oracle::synthetic_image(64, 100, 4);
  const Raster mid = resize_and_center_crop(tall, 64);
  for (int x = 0; x < 64; ++x) ASSERT_EQ(mid.color_at(x, 0), tall.color_at(x, 18));
}

TEST(ImageIo, PngRoundTrip) {
  oracle::TempDir dir("png");
  const Raster img = oracle::synthetic_image(33, 17, 5);
  save_png(img, dir / "a.png");
  EXPECT_EQ(detect_format(dir / "a.png"), ImageFormat::kPng);
  EXPECT_EQ(load_image(dir / "a.png"), img);
}

TEST(ImageIo, PpmRoundTrip) {
  oracle::TempDir dir("ppm");
  const Raster img = oracle::synthetic_image(10, 21, 6);
  save_image(img, dir / "a.ppm");
  EXPECT_EQ(detect_format(dir / "a.ppm"), ImageFormat::kPpm);
  EXPECT_EQ(load_image(dir / "a.ppm"), img);
  EXPECT_EQ(decode_ppm(encode_ppm(img)), img);
}

TEST(ImageIo, PpmHeaderWithComment) {
  const std::string bytes = std::string("P6\n# comment\n2 1\n255\n") + "\x01\x02\x03\x04\x05\x06";
  const Raster img = decode_ppm(bytes);
  EXPECT_EQ(img.width(), 2);
  EXPECT_EQ(img.color_at(1, 0), (Color{4, 5, 6, 255}));
}

TEST(ImageIo, JpegDecodes) {
  oracle::TempDir dir("jpeg");
  const Raster img(16, 16, Color{200, 100, 50, 255});
  write_jpeg(img, dir / "a.jpg");
  EXPECT_EQ(detect_format(dir / "a.jpg"), ImageFormat::kJpeg);
  const Raster back = load_image(dir / "a.jpg");
  ASSERT_EQ(back.width(), 16);
  ASSERT_EQ(back.height(), 16);
  for (int ch = 0; ch < 3; ++ch) EXPECT_NEAR(back.pixel(8, 8)[ch], img.pixel(8, 8)[ch], 3);
}

TEST(ImageIo, CorruptInputsThrow) {
  oracle::TempDir dir("corrupt");
  write_bytes(dir / "junk.png", "definitely not an image");
  EXPECT_THROW(load_image(dir / "junk.png"), ImageError);
  write_bytes(dir / "trunc.png", "\x89PNG\r\n\x1a\n\0\0\0\rIHDR"s);
  EXPECT_THROW(load_image(dir / "trunc.png"), ImageError);
  write_bytes(dir / "trunc.jpg", "\xff\xd8\xff\xe0\0\x10JFIF"s);
  EXPECT_THROW(load_image(dir / "trunc.jpg"), ImageError);
  EXPECT_THROW(decode_ppm("P6\n2 2\n255\n\x01\x02"), ImageError);
  EXPECT_THROW(decode_ppm("P3\n1 1\n255\n1 2 3"), ImageError);
  EXPECT_THROW(load_image(dir / "missing.png"), ImageError);
}
