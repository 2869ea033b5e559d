#include "morphfit/image_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include <png.h>

#include "morphfit/error.hpp"

namespace morphfit {
namespace {

std::string slurp(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorCode::kMissingInput, path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void dump(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::kIo, "write failed for " + path.string());
}

int color_type_for(int channels) {
  switch (channels) {
    case 1: return PNG_COLOR_TYPE_GRAY;
    case 2: return PNG_COLOR_TYPE_GRAY_ALPHA;
    case 3: return PNG_COLOR_TYPE_RGB;
    case 4: return PNG_COLOR_TYPE_RGBA;
    default: fail(ErrorCode::kInvalidArgument, "PNG supports 1-4 channels");
  }
}

struct ReadCursor {
  const std::string* bytes;
  std::size_t pos;
};

void png_error_handler(png_structp, png_const_charp message) {
  throw Error(ErrorCode::kMalformed, std::string("png: ") + message);
}
void png_warning_handler(png_structp, png_const_charp) {}

}  // namespace

std::string encode_png(const Image& image) {
  const int channels = image.channels();
  const int color_type = color_type_for(channels);
  std::string bytes;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler,
                                            png_warning_handler);
  png_infop info = png_create_info_struct(png);
  try {
    png_set_write_fn(
        png, &bytes,
        [](png_structp p, png_bytep data, png_size_t len) {
          static_cast<std::string*>(png_get_io_ptr(p))->append(reinterpret_cast<const char*>(data), len);
        },
        [](png_structp) {});
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width()),
                 static_cast<png_uint_32>(image.height()), 8, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(png, 6);
    png_write_info(png, info);
    std::vector<png_byte> row(static_cast<std::size_t>(image.width()) * channels);
    for (int y = 0; y < image.height(); ++y) {
      for (int x = 0; x < image.width(); ++x) {
        for (int c = 0; c < channels; ++c) {
          const double v = std::clamp(image.at(x, y, c), 0.0, 1.0);
          row[static_cast<std::size_t>(x) * channels + c] = static_cast<png_byte>(std::lround(v * 255.0));
        }
      }
      png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
  return bytes;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  dump(path, encode_png(image));
}

Image decode_png(const std::string& bytes) {
  if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0) {
    fail(ErrorCode::kMalformed, "not a PNG stream");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler,
                                           png_warning_handler);
  png_infop info = png_create_info_struct(png);
  ReadCursor cursor{&bytes, 0};
  Image image;
  try {
    png_set_read_fn(png, &cursor, [](png_structp p, png_bytep out, png_size_t len) {
      auto* c = static_cast<ReadCursor*>(png_get_io_ptr(p));
      if (c->pos + len > c->bytes->size()) png_error(p, "truncated stream");
      std::memcpy(out, c->bytes->data() + c->pos, len);
      c->pos += len;
    });
    png_read_info(png, info);
    png_set_strip_16(png);
    png_set_packing(png);
    if (png_get_color_type(png, info) == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) {
      png_set_expand_gray_1_2_4_to_8(png);
    }
    png_read_update_info(png, info);
    const int width = static_cast<int>(png_get_image_width(png, info));
    const int height = static_cast<int>(png_get_image_height(png, info));
    const int channels = png_get_channels(png, info);
    image = Image(width, height, channels);
    std::vector<png_byte> row(png_get_rowbytes(png, info));
    for (int y = 0; y < height; ++y) {
      png_read_row(png, row.data(), nullptr);
      for (int x = 0; x < width; ++x) {
        for (int c = 0; c < channels; ++c) {
          image.at(x, y, c) = row[static_cast<std::size_t>(x) * channels + c] / 255.0;
        }
      }
    }
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

Image read_png(const std::filesystem::path& path) { return decode_png(slurp(path)); }

void write_pfm(const std::filesystem::path& path, const Image& image) {
  if (image.channels() != 1 && image.channels() != 3) {
    fail(ErrorCode::kInvalidArgument, "PFM supports 1 or 3 channels");
  }
  std::string bytes = (image.channels() == 3 ? "PF\n" : "Pf\n") + std::to_string(image.width()) +
                      " " + std::to_string(image.height()) + "\n-1.0\n";
  bytes.reserve(bytes.size() + image.data().size() * 4);
  for (int y = image.height() - 1; y >= 0; --y) {
    for (int x = 0; x < image.width(); ++x) {
      for (int c = 0; c < image.channels(); ++c) {
        const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(image.at(x, y, c)));
        for (int k = 0; k < 4; ++k) bytes.push_back(static_cast<char>((bits >> (8 * k)) & 0xffU));
      }
    }
  }
  dump(path, bytes);
}

Image read_pfm(const std::filesystem::path& path) {
  const std::string bytes = slurp(path);
  std::istringstream header(bytes);
  std::string tag;
  int width = 0;
  int height = 0;
  double scale = 0.0;
  if (!(header >> tag >> width >> height >> scale) || (tag != "PF" && tag != "Pf") || width < 0 ||
      height < 0 || scale == 0.0) {
    fail(ErrorCode::kMalformed, path.string() + ": bad PFM header");
  }
  header.get();  // single whitespace byte after the scale
  const auto offset = static_cast<std::size_t>(header.tellg());
  const int channels = tag == "PF" ? 3 : 1;
  const std::size_t count = static_cast<std::size_t>(width) * height * channels;
  if (bytes.size() < offset + count * 4) fail(ErrorCode::kTruncatedPayload, path.string());
  const bool little = scale < 0.0;
  Image image(width, height, channels);
  std::size_t pos = offset;
  for (int y = height - 1; y >= 0; --y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < channels; ++c) {
        std::uint32_t bits = 0;
        for (int k = 0; k < 4; ++k) {
          const auto byte = static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes[pos + k]));
          bits |= little ? byte << (8 * k) : byte << (8 * (3 - k));
        }
        pos += 4;
        image.at(x, y, c) = std::bit_cast<float>(bits);
      }
    }
  }
  return image;
}

Image read_image(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".pfm" || ext == ".PFM") return read_pfm(path);
  return read_png(path);
}

}  // namespace morphfit
