#include "gsedit/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>
#include <string>

namespace gsedit {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f != nullptr) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr file(std::fopen(path.c_str(), mode));
    if (!file) fail(ErrorKind::Input, "cannot open '" + path.string() + "'");
    return file;
}

[[noreturn]] void png_error_handler(png_structp, png_const_charp message) {
    throw Error(ErrorKind::Format, std::string("png: ") + message);
}

void png_warning_handler(png_structp, png_const_charp) {}

std::uint8_t to_byte(double v) {
    const double clamped = std::clamp(v, 0.0, 1.0);
    return static_cast<std::uint8_t>(std::lround(clamped * 255.0));
}

// Writes rows with libpng; `fill_row` fills one packed row buffer.
template <typename FillRow>
void write_png_rows(const std::filesystem::path& path, int width, int height, int bit_depth,
                    int color_type, std::size_t row_bytes, FillRow fill_row) {
    FilePtr file = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler,
                                              png_warning_handler);
    png_infop info = png_create_info_struct(png);
    struct Guard {
        png_structp* p;
        png_infop* i;
        ~Guard() { png_destroy_write_struct(p, i); }
    } guard{&png, &info};

    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
                 bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_byte> row(row_bytes);
    for (int y = 0; y < height; ++y) {
        std::fill(row.begin(), row.end(), png_byte{0});
        fill_row(y, row);
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
}

// Decodes any PNG into 8-bit gray or RGB rows.
struct DecodedPng {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<png_byte> pixels;
};

DecodedPng decode_png(const std::filesystem::path& path, bool force_rgb) {
    FilePtr file = open_file(path, "rb");
    png_byte signature[8];
    if (std::fread(signature, 1, 8, file.get()) != 8 || png_sig_cmp(signature, 0, 8) != 0)
        fail(ErrorKind::Format, "'" + path.string() + "' is not a PNG file");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_handler,
                                             png_warning_handler);
    png_infop info = png_create_info_struct(png);
    struct Guard {
        png_structp* p;
        png_infop* i;
        ~Guard() { png_destroy_read_struct(p, i, nullptr); }
    } guard{&png, &info};

    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const int color_type = png_get_color_type(png, info);
    const int bit_depth = png_get_bit_depth(png, info);
    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    const bool is_gray = color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA;
    if (force_rgb && is_gray) png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    DecodedPng out;
    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.channels = png_get_channels(png, info);
    const std::size_t row_bytes = png_get_rowbytes(png, info);
    out.pixels.resize(row_bytes * out.height);
    std::vector<png_bytep> rows(out.height);
    for (int y = 0; y < out.height; ++y) rows[y] = out.pixels.data() + row_bytes * y;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    return out;
}

template <int Channels, typename Image>
void write_pfm_impl(const std::filesystem::path& path, const Image& image) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::Input, "cannot open '" + path.string() + "' for writing");
    out << (Channels == 3 ? "PF" : "Pf") << "\n" << image.width() << " " << image.height() << "\n-1.0\n";
    std::vector<float> row(static_cast<std::size_t>(image.width()) * Channels);
    for (int y = image.height() - 1; y >= 0; --y) {
        for (int x = 0; x < image.width(); ++x) {
            if constexpr (Channels == 3) {
                const Rgb& c = image.at(x, y);
                for (int k = 0; k < 3; ++k) row[x * 3 + k] = static_cast<float>(c[k]);
            } else {
                row[x] = static_cast<float>(image.at(x, y));
            }
        }
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!out) fail(ErrorKind::Input, "failed writing '" + path.string() + "'");
}

struct PfmData {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<float> values;  // top-to-bottom, row-major
};

PfmData read_pfm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Input, "cannot open '" + path.string() + "'");
    std::string magic;
    double scale = 0.0;
    PfmData data;
    in >> magic >> data.width >> data.height >> scale;
    if (!in || (magic != "PF" && magic != "Pf") || data.width < 0 || data.height < 0)
        fail(ErrorKind::Format, "'" + path.string() + "' is not a PFM file");
    in.get();  // single whitespace after the scale line
    data.channels = magic == "PF" ? 3 : 1;
    const bool big_endian = scale > 0.0;
    const std::size_t row_len = static_cast<std::size_t>(data.width) * data.channels;
    data.values.resize(row_len * data.height);
    std::vector<float> row(row_len);
    for (int y = data.height - 1; y >= 0; --y) {
        in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row_len * sizeof(float)));
        if (!in) fail(ErrorKind::Format, "'" + path.string() + "' is truncated");
        if (big_endian) {
            for (float& v : row) {
                std::uint32_t bits;
                std::memcpy(&bits, &v, sizeof bits);
                bits = __builtin_bswap32(bits);
                std::memcpy(&v, &bits, sizeof bits);
            }
        }
        std::copy(row.begin(), row.end(), data.values.begin() + row_len * y);
    }
    return data;
}

}  // namespace

void write_png(const std::filesystem::path& path, const RgbImage& image) {
    write_png_rows(path, image.width(), image.height(), 8, PNG_COLOR_TYPE_RGB,
                   static_cast<std::size_t>(image.width()) * 3, [&](int y, std::vector<png_byte>& row) {
                       for (int x = 0; x < image.width(); ++x) {
                           const Rgb& c = image.at(x, y);
                           for (int k = 0; k < 3; ++k) row[x * 3 + k] = to_byte(c[k]);
                       }
                   });
}

RgbImage read_png(const std::filesystem::path& path) {
    const DecodedPng png = decode_png(path, true);
    RgbImage image(png.width, png.height);
    for (std::size_t i = 0; i < image.size(); ++i) {
        for (int k = 0; k < 3; ++k) image[i][k] = png.pixels[i * 3 + k] / 255.0;
    }
    return image;
}

void write_mask_png(const std::filesystem::path& path, const BinaryMask& mask) {
    write_png_rows(path, mask.width(), mask.height(), 1, PNG_COLOR_TYPE_GRAY,
                   (static_cast<std::size_t>(mask.width()) + 7) / 8, [&](int y, std::vector<png_byte>& row) {
                       for (int x = 0; x < mask.width(); ++x) {
                           if (mask.at(x, y) != 0) row[x / 8] |= static_cast<png_byte>(0x80u >> (x % 8));
                       }
                   });
}

BinaryMask read_mask_png(const std::filesystem::path& path) {
    const DecodedPng png = decode_png(path, false);
    BinaryMask mask(png.width, png.height);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        mask[i] = png.pixels[i * png.channels] >= 128 ? 1 : 0;
    }
    return mask;
}

void write_pfm(const std::filesystem::path& path, const ScalarImage& image) {
    write_pfm_impl<1>(path, image);
}

void write_pfm(const std::filesystem::path& path, const RgbImage& image) {
    write_pfm_impl<3>(path, image);
}

ScalarImage read_pfm_scalar(const std::filesystem::path& path) {
    const PfmData data = read_pfm(path);
    if (data.channels != 1) fail(ErrorKind::Format, "'" + path.string() + "' is not a single-channel PFM");
    ScalarImage image(data.width, data.height);
    for (std::size_t i = 0; i < image.size(); ++i) image[i] = data.values[i];
    return image;
}

RgbImage read_pfm_rgb(const std::filesystem::path& path) {
    const PfmData data = read_pfm(path);
    if (data.channels != 3) fail(ErrorKind::Format, "'" + path.string() + "' is not a color PFM");
    RgbImage image(data.width, data.height);
    for (std::size_t i = 0; i < image.size(); ++i) {
        image[i] = Rgb(data.values[i * 3], data.values[i * 3 + 1], data.values[i * 3 + 2]);
    }
    return image;
}

RgbImage quantize_8bit(const RgbImage& image) {
    RgbImage out = image;
    for (std::size_t i = 0; i < out.size(); ++i) {
        for (int k = 0; k < 3; ++k) out[i][k] = to_byte(image[i][k]) / 255.0;
    }
    return out;
}

namespace {

template <typename PerPixel>
void for_region(const RgbImage& a, const RgbImage& b, const BinaryMask& region, PerPixel fn) {
    require(a.same_shape(b), "image size mismatch");
    require(region.empty() || region.same_shape(a), "region size mismatch");
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!region.empty() && region[i] == 0) continue;
        fn(a[i], b[i]);
    }
}

}  // namespace

double mean_squared_error(const RgbImage& a, const RgbImage& b, const BinaryMask& region) {
    double sum = 0.0;
    std::size_t count = 0;
    for_region(a, b, region, [&](const Rgb& p, const Rgb& q) {
        sum += (p - q).squaredNorm();
        count += 3;
    });
    return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

double psnr(const RgbImage& a, const RgbImage& b, const BinaryMask& region) {
    const double mse = mean_squared_error(a, b, region);
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return -10.0 * std::log10(mse);
}

double max_abs_difference(const RgbImage& a, const RgbImage& b, const BinaryMask& region) {
    double worst = 0.0;
    for_region(a, b, region, [&](const Rgb& p, const Rgb& q) {
        worst = std::max(worst, (p - q).cwiseAbs().maxCoeff());
    });
    return worst;
}

}  // namespace gsedit
