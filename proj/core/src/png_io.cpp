#include <cstdio>
#include <csetjmp>
#include <cstring>
#include <memory>

#include <png.h>

#include "hemisym/raster.hpp"

namespace hemisym {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const { if (f) std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void throw_io(const std::filesystem::path& path, const char* what) {
    throw IoError(std::string(what) + ": " + path.string());
}

} // namespace

GrayImage load_gray(const std::filesystem::path& path) {
    FilePtr fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) throw_io(path, "cannot open image");

    png_byte header[8];
    if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8) != 0)
        throw_io(path, "not a PNG file");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw_io(path, "png reader allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw_io(path, "png reader allocation failed");
    }

    std::vector<png_byte> data;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw_io(path, "undecodable PNG");
    }

    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const int color = png_get_color_type(png, info);
    int depth = png_get_bit_depth(png, info);

    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA ||
        color == PNG_COLOR_TYPE_PALETTE) {
        // BT.709 luminance conversion (libpng defaults).
        png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    }
    png_read_update_info(png, info);
    depth = png_get_bit_depth(png, info);

    const size_t stride = png_get_rowbytes(png, info);
    data.resize(stride * h);
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = data.data() + y * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    GrayImage img(static_cast<int>(w), static_cast<int>(h));
    if (depth == 16) {
        for (png_uint_32 y = 0; y < h; ++y) {
            const png_byte* row = data.data() + y * stride;
            for (png_uint_32 x = 0; x < w; ++x) {
                const unsigned v = (static_cast<unsigned>(row[2 * x]) << 8) | row[2 * x + 1];
                img.at(static_cast<int>(x), static_cast<int>(y)) = v / 65535.0;
            }
        }
    } else {
        for (png_uint_32 y = 0; y < h; ++y) {
            const png_byte* row = data.data() + y * stride;
            for (png_uint_32 x = 0; x < w; ++x)
                img.at(static_cast<int>(x), static_cast<int>(y)) = row[x] / 255.0;
        }
    }
    return img;
}

namespace {

void write_gray8(const std::vector<png_byte>& data, int width, int height,
                 const std::filesystem::path& path) {
    FilePtr fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) throw_io(path, "cannot open output");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw_io(path, "png writer allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw_io(path, "png writer allocation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw_io(path, "png write failed");
    }

    png_init_io(png, fp.get());
    png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < height; ++y)
        png_write_row(png, const_cast<png_bytep>(data.data() + static_cast<size_t>(y) * width));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

} // namespace

void save_gray(const GrayImage& img, const std::filesystem::path& path) {
    std::vector<png_byte> data(img.size());
    for (size_t i = 0; i < img.size(); ++i) {
        double v = img.pixels[i];
        v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        data[i] = static_cast<png_byte>(v * 255.0 + 0.5);
    }
    write_gray8(data, img.width, img.height, path);
}

void save_mask(const BinaryMask& mask, const std::filesystem::path& path) {
    std::vector<png_byte> data(mask.bits.size());
    for (size_t i = 0; i < mask.bits.size(); ++i) data[i] = mask.bits[i] ? 255 : 0;
    write_gray8(data, mask.width, mask.height, path);
}

BinaryMask load_mask(const std::filesystem::path& path, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0))
        throw InputError("mask threshold must lie in (0,1)");
    return mask_from_image(load_gray(path), threshold);
}

} // namespace hemisym
