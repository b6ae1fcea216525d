#include "vdst/image.hpp"

#include <png.h>

#include <cstring>
#include <stdexcept>

namespace vdst {

ImageU8 read_png(const std::string& path) {
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&png, path.c_str()))
        throw std::runtime_error("read_png: cannot open '" + path + "': " + png.message);

    ImageU8 img;
    img.width = static_cast<int>(png.width);
    img.height = static_cast<int>(png.height);
    img.channels = (png.format & PNG_FORMAT_FLAG_COLOR) ? 3 : 1;
    png.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    img.pixels.resize(static_cast<size_t>(img.width) * img.height * img.channels);
    if (!png_image_finish_read(&png, nullptr, img.pixels.data(), 0, nullptr)) {
        png_image_free(&png);
        throw std::runtime_error("read_png: failed to decode '" + path + "': " + png.message);
    }
    return img;
}

void write_png(const std::string& path, const ImageU8& img) {
    if (img.channels != 1 && img.channels != 3)
        throw std::invalid_argument("write_png: only 1- or 3-channel images supported");
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(img.width);
    png.height = static_cast<png_uint_32>(img.height);
    png.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&png, path.c_str(), 0, img.pixels.data(), 0, nullptr))
        throw std::runtime_error("write_png: failed to write '" + path + "': " + png.message);
}

} // namespace vdst
