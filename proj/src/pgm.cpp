#include "bmmp/pgm.hpp"

#include <cctype>
#include <fstream>
#include <stdexcept>

namespace bmmp {

namespace {

// Next whitespace-delimited token, skipping '#' comment lines.
int read_header_int(std::istream& in, const std::string& path) {
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n')
                c = in.get();
        } else if (std::isspace(c)) {
            c = in.get();
        } else {
            break;
        }
    }
    if (c == EOF || !std::isdigit(c))
        throw std::runtime_error("read_pgm: malformed header in " + path);
    int value = 0;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        c = in.get();
    }
    return value;
}

}  // namespace

GrayImage read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("read_pgm: cannot open " + path);
    char magic[2] = {0, 0};
    in.read(magic, 2);
    if (magic[0] != 'P' || magic[1] != '5')
        throw std::runtime_error("read_pgm: not a binary PGM (P5) file: " + path);
    GrayImage image;
    image.width = read_header_int(in, path);
    image.height = read_header_int(in, path);
    const int maxval = read_header_int(in, path);
    if (image.width < 1 || image.height < 1 || maxval != 255)
        throw std::runtime_error("read_pgm: unsupported dimensions or maxval in " + path);
    // the header reader already consumed the single whitespace after maxval
    image.pixels.resize(static_cast<std::size_t>(image.width) * image.height);
    in.read(reinterpret_cast<char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(image.pixels.size()))
        throw std::runtime_error("read_pgm: truncated pixel data in " + path);
    return image;
}

void write_pgm(const std::string& path, const GrayImage& image) {
    if (image.width < 1 || image.height < 1 ||
        image.pixels.size() != static_cast<std::size_t>(image.width) * image.height)
        throw std::invalid_argument("write_pgm: inconsistent image");
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("write_pgm: cannot open " + path);
    out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.pixels.data()),
              static_cast<std::streamsize>(image.pixels.size()));
    if (!out)
        throw std::runtime_error("write_pgm: write failed for " + path);
}

}  // namespace bmmp
