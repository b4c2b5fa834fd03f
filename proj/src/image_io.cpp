#include "dbdh/io/image_io.hpp"

#include <jpeglib.h>
#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>

#include "dbdh/core/error.hpp"

namespace dbdh {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

float u8_to_f(unsigned v) { return static_cast<float>(v) / 255.0f; }
float u16_to_f(unsigned v) { return static_cast<float>(v) / 65535.0f; }

unsigned f_to_u(float v, unsigned maxval) {
  const float c = std::min(1.0f, std::max(0.0f, v));
  return static_cast<unsigned>(std::lround(c * static_cast<float>(maxval)));
}

bool has_magic(const unsigned char* buf, std::size_t len) {
  return len >= 8 && png_sig_cmp(buf, 0, 8) == 0;
}

Tensor<float> load_png_file(std::FILE* fp, const std::string& path) {
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("load_image: png init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("load_image: png info init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("load_image: failed to decode PNG " + path);
  }
  png_init_io(png, fp);
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);

  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  if (depth == 16) png_set_swap(png);  // little-endian rows below
  png_read_update_info(png, info);

  const int out_depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  std::vector<unsigned char> data(rowbytes * h);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = data.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  Tensor<float> img(1, 3, static_cast<int>(h), static_cast<int>(w));
  if (out_depth == 16) {
    for (png_uint_32 y = 0; y < h; ++y) {
      const auto* row = reinterpret_cast<const std::uint16_t*>(data.data() + y * rowbytes);
      for (png_uint_32 x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c)
          img(0, c, y, x) = u16_to_f(row[3 * x + c]);
    }
  } else {
    for (png_uint_32 y = 0; y < h; ++y) {
      const unsigned char* row = data.data() + y * rowbytes;
      for (png_uint_32 x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c)
          img(0, c, y, x) = u8_to_f(row[3 * x + c]);
    }
  }
  return img;
}

struct JpegErrorMgr {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
  std::longjmp(err->jump, 1);
}

Tensor<float> decode_jpeg(const unsigned char* buf, unsigned long len,
                          const std::string& what) {
  jpeg_decompress_struct cinfo;
  JpegErrorMgr jerr;
  cinfo.err = jpeg_std_error(&jerr.mgr);
  jerr.mgr.error_exit = jpeg_error_exit;
  if (setjmp(jerr.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw IoError("jpeg decode failed: " + what);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, buf, len);
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  const int w = static_cast<int>(cinfo.output_width);
  const int h = static_cast<int>(cinfo.output_height);
  Tensor<float> img(1, 3, h, w);
  std::vector<unsigned char> row(static_cast<std::size_t>(w) * 3);
  unsigned char* rowp = row.data();
  while (cinfo.output_scanline < cinfo.output_height) {
    const int y = static_cast<int>(cinfo.output_scanline);
    jpeg_read_scanlines(&cinfo, &rowp, 1);
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) img(0, c, y, x) = u8_to_f(row[3 * x + c]);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return img;
}

}  // namespace

Tensor<float> load_image(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("load_image: cannot open " + path);
  unsigned char magic[8] = {0};
  const std::size_t got = std::fread(magic, 1, 8, fp.get());
  std::rewind(fp.get());
  if (has_magic(magic, got)) return load_png_file(fp.get(), path);

  // Assume JPEG otherwise; slurp and decode from memory.
  std::fseek(fp.get(), 0, SEEK_END);
  const long size = std::ftell(fp.get());
  std::rewind(fp.get());
  if (size <= 0) throw IoError("load_image: empty file " + path);
  std::vector<unsigned char> buf(static_cast<std::size_t>(size));
  if (std::fread(buf.data(), 1, buf.size(), fp.get()) != buf.size())
    throw IoError("load_image: short read on " + path);
  return decode_jpeg(buf.data(), static_cast<unsigned long>(buf.size()), path);
}

void save_png(const std::string& path, const Tensor<float>& image,
              int bit_depth) {
  if (image.c() != 3) throw ShapeError("save_png: expected 3 channels");
  if (bit_depth != 8 && bit_depth != 16)
    throw ConfigError("save_png: bit depth must be 8 or 16");
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("save_png: cannot open " + path);
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("save_png: png init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("save_png: png info init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("save_png: failed to write " + path);
  }
  png_init_io(png, fp.get());
  const int h = image.h(), w = image.w();
  png_set_IHDR(png, info, w, h, bit_depth, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (bit_depth == 16) {
    png_set_swap(png);
    std::vector<std::uint16_t> row(static_cast<std::size_t>(w) * 3);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c)
          row[3 * x + c] =
              static_cast<std::uint16_t>(f_to_u(image(0, c, y, x), 65535));
      png_write_row(png, reinterpret_cast<png_bytep>(row.data()));
    }
  } else {
    std::vector<unsigned char> row(static_cast<std::size_t>(w) * 3);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c)
          row[3 * x + c] = static_cast<unsigned char>(f_to_u(image(0, c, y, x), 255));
      png_write_row(png, row.data());
    }
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Tensor<float> jpeg_roundtrip(const Tensor<float>& image, int quality) {
  if (image.c() != 3) throw ShapeError("jpeg_roundtrip: expected 3 channels");
  if (quality < 1 || quality > 100)
    throw ConfigError("jpeg_roundtrip: quality must be in [1, 100]");
  jpeg_compress_struct cinfo;
  JpegErrorMgr jerr;
  cinfo.err = jpeg_std_error(&jerr.mgr);
  jerr.mgr.error_exit = jpeg_error_exit;
  unsigned char* buf = nullptr;
  unsigned long len = 0;
  if (setjmp(jerr.jump)) {
    jpeg_destroy_compress(&cinfo);
    if (buf) free(buf);
    throw IoError("jpeg_roundtrip: encode failed");
  }
  jpeg_create_compress(&cinfo);
  jpeg_mem_dest(&cinfo, &buf, &len);
  const int h = image.h(), w = image.w();
  cinfo.image_width = static_cast<JDIMENSION>(w);
  cinfo.image_height = static_cast<JDIMENSION>(h);
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  std::vector<unsigned char> row(static_cast<std::size_t>(w) * 3);
  unsigned char* rowp = row.data();
  while (cinfo.next_scanline < cinfo.image_height) {
    const int y = static_cast<int>(cinfo.next_scanline);
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        row[3 * x + c] = static_cast<unsigned char>(f_to_u(image(0, c, y, x), 255));
    jpeg_write_scanlines(&cinfo, &rowp, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);

  Tensor<float> out = decode_jpeg(buf, len, "roundtrip buffer");
  free(buf);
  return out;
}

std::string jpeg_codec_version() {
#ifdef LIBJPEG_TURBO_VERSION
#define DBDH_STR2(x) #x
#define DBDH_STR(x) DBDH_STR2(x)
  return std::string("libjpeg-turbo ") + DBDH_STR(LIBJPEG_TURBO_VERSION) +
         " (API " + std::to_string(JPEG_LIB_VERSION) + ")";
#undef DBDH_STR
#undef DBDH_STR2
#else
  return "libjpeg API " + std::to_string(JPEG_LIB_VERSION);
#endif
}

std::string png_codec_version() { return std::string("libpng ") + PNG_LIBPNG_VER_STRING; }

}  // namespace dbdh
