#include "abstractnet/image_io.hpp"

#include <png.h>

#include <cctype>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>
#include <sstream>

// jpeglib.h expects size_t and FILE to be declared first.
#include <jpeglib.h>

namespace abstractnet {
namespace fs = std::filesystem;

namespace {

std::string read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Raster load_png(const fs::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw ImageError("png decode failed for " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  if (image.width == 0 || image.height == 0 || image.width > 1u << 15 || image.height > 1u << 15) {
    png_image_free(&image);
    throw ImageError("png has unsupported dimensions: " + path.string());
  }
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
  const png_color black{0, 0, 0};
  if (!png_image_finish_read(&image, &black, pixels.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw ImageError("png decode failed for " + path.string() + ": " + msg);
  }
  return Raster(static_cast<int>(image.width), static_cast<int>(image.height), std::move(pixels));
}

struct JpegErrorManager {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

Raster load_jpeg(const fs::path& path) {
  const std::string bytes = read_all(path);
  jpeg_decompress_struct cinfo;
  JpegErrorManager jerr;
  cinfo.err = jpeg_std_error(&jerr.pub);
  jerr.pub.error_exit = jpeg_error_exit;
  std::vector<std::uint8_t> pixels;
  int width = 0;
  int height = 0;
  if (setjmp(jerr.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw ImageError("jpeg decode failed for " + path.string() + ": " + jerr.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, reinterpret_cast<const unsigned char*>(bytes.data()),
               static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  width = static_cast<int>(cinfo.output_width);
  height = static_cast<int>(cinfo.output_height);
  pixels.resize(static_cast<std::size_t>(width) * height * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = pixels.data() + static_cast<std::size_t>(cinfo.output_scanline) * width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return Raster(width, height, std::move(pixels));
}

}  // namespace

ImageFormat detect_format(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageError("cannot open " + path.string());
  unsigned char sig[8] = {};
  in.read(reinterpret_cast<char*>(sig), sizeof(sig));
  const auto n = in.gcount();
  if (n >= 8 && png_sig_cmp(sig, 0, 8) == 0) return ImageFormat::kPng;
  if (n >= 3 && sig[0] == 0xFF && sig[1] == 0xD8 && sig[2] == 0xFF) return ImageFormat::kJpeg;
  if (n >= 2 && sig[0] == 'P' && sig[1] == '6') return ImageFormat::kPpm;
  return ImageFormat::kUnknown;
}

Raster load_image(const fs::path& path) {
  switch (detect_format(path)) {
    case ImageFormat::kPng: return load_png(path);
    case ImageFormat::kJpeg: return load_jpeg(path);
    case ImageFormat::kPpm: return decode_ppm(read_all(path));
    case ImageFormat::kUnknown: break;
  }
  throw ImageError("unrecognized image format: " + path.string());
}

void save_png(const Raster& img, const fs::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, img.bytes().data(), 0, nullptr)) {
    throw ImageError("png encode failed for " + path.string() + ": " + image.message);
  }
}

std::string encode_ppm(const Raster& img) {
  std::string out = "P6\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.bytes().data()), img.bytes().size());
  return out;
}

void save_ppm(const Raster& img, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageError("cannot write " + path.string());
  const std::string data = encode_ppm(img);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw ImageError("write failed: " + path.string());
}

void save_image(const Raster& img, const fs::path& path) {
  if (path.extension() == ".ppm") {
    save_ppm(img, path);
  } else {
    save_png(img, path);
  }
}

Raster decode_ppm(const std::string& bytes) {
  std::size_t pos = 0;
  auto skip_space_and_comments = [&] {
    while (pos < bytes.size()) {
      if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
  };
  auto read_uint = [&]() -> long {
    skip_space_and_comments();
    long v = 0;
    std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + (bytes[pos] - '0');
      if (v > 1'000'000) throw ImageError("ppm header value out of range");
      ++pos;
    }
    if (pos == start) throw ImageError("malformed ppm header");
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') throw ImageError("not a P6 ppm");
  pos = 2;
  const long width = read_uint();
  const long height = read_uint();
  const long maxval = read_uint();
  if (width < 1 || height < 1 || width > 1 << 15 || height > 1 << 15) {
    throw ImageError("ppm has unsupported dimensions");
  }
  if (maxval < 1 || maxval > 255) throw ImageError("ppm maxval must be in [1,255]");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw ImageError("malformed ppm header");
  }
  ++pos;
  const std::size_t need = static_cast<std::size_t>(width) * height * 3;
  if (bytes.size() - pos < need) throw ImageError("truncated ppm pixel data");
  std::vector<std::uint8_t> pixels(need);
  for (std::size_t i = 0; i < need; ++i) {
    const auto v = static_cast<unsigned char>(bytes[pos + i]);
    if (v > maxval) throw ImageError("ppm sample exceeds maxval");
    pixels[i] = static_cast<std::uint8_t>(maxval == 255 ? v : (v * 255 + maxval / 2) / maxval);
  }
  return Raster(static_cast<int>(width), static_cast<int>(height), std::move(pixels));
}

}  // namespace abstractnet
