#include "tracs/heatmap.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <vector>

#include "tracs/errors.hpp"

namespace tracs {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};

}  // namespace

void write_confusion_heatmap(const std::filesystem::path& path, const ConfusionMatrix& matrix,
                             int cell_pixels) {
    const auto k = static_cast<int>(matrix.counts.size());
    if (k == 0) throw ConfigError("heatmap: empty confusion matrix");
    if (cell_pixels < 2) throw ConfigError("heatmap: cell size must be at least 2 pixels");
    const int side = k * cell_pixels + 1;

    std::vector<png_byte> pixels(static_cast<std::size_t>(side) * side * 3, 160);
    for (int g = 0; g < k; ++g) {
        std::size_t row_total = 0;
        for (auto c : matrix.counts[g]) row_total += c;
        for (int p = 0; p < k; ++p) {
            const double share =
                row_total ? static_cast<double>(matrix.counts[g][p]) / static_cast<double>(row_total) : 0.0;
            const auto r = static_cast<png_byte>(255 - 247 * share);
            const auto gr = static_cast<png_byte>(255 - 207 * share);
            const auto b = static_cast<png_byte>(255 - 148 * share);
            for (int y = 1; y < cell_pixels; ++y) {
                for (int x = 1; x < cell_pixels; ++x) {
                    const std::size_t idx =
                        (static_cast<std::size_t>(g * cell_pixels + y) * side + p * cell_pixels + x) * 3;
                    pixels[idx] = r;
                    pixels[idx + 1] = gr;
                    pixels[idx + 2] = b;
                }
            }
        }
    }

    std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot write " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("libpng: cannot allocate writer");
    png_infop info = png_create_info_struct(png);
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng: failed writing " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(side), static_cast<png_uint_32>(side), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < side; ++y) {
        png_write_row(png, &pixels[static_cast<std::size_t>(y) * side * 3]);
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace tracs
