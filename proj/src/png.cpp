#include "eegprompt/png.hpp"

#include "eegprompt/error.hpp"

#include <png.h>

#include <cstring>

namespace eegprompt {

std::vector<std::uint8_t> encode_png(const Image& image) {
  if (image.width == 0 || image.height == 0 || image.rgb.size() != 3 * image.width * image.height)
    throw ParameterError("cannot encode an empty or inconsistent image");
  png_image desc;
  std::memset(&desc, 0, sizeof desc);
  desc.version = PNG_IMAGE_VERSION;
  desc.width = static_cast<png_uint_32>(image.width);
  desc.height = static_cast<png_uint_32>(image.height);
  desc.format = PNG_FORMAT_RGB;

  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&desc, nullptr, &size, 0, image.rgb.data(), 0, nullptr))
    throw Error(std::string("png: ") + desc.message);
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&desc, out.data(), &size, 0, image.rgb.data(), 0, nullptr))
    throw Error(std::string("png: ") + desc.message);
  out.resize(size);
  return out;
}

Image decode_png(std::span<const std::uint8_t> bytes) {
  png_image desc;
  std::memset(&desc, 0, sizeof desc);
  desc.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&desc, bytes.data(), bytes.size()))
    throw ParseError(std::string("png: ") + desc.message);
  desc.format = PNG_FORMAT_RGB;
  Image image;
  image.width = desc.width;
  image.height = desc.height;
  image.rgb.resize(PNG_IMAGE_SIZE(desc));
  if (!png_image_finish_read(&desc, nullptr, image.rgb.data(), 0, nullptr)) {
    png_image_free(&desc);
    throw ParseError(std::string("png: ") + desc.message);
  }
  return image;
}

}  // namespace eegprompt
