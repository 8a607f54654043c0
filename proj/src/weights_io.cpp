#include "fpedit/weights_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "fpedit/errors.hpp"

namespace fpedit {

namespace {

constexpr char kMagic[4] = {'F', 'P', 'E', 'D'};
constexpr std::uint8_t kVersion = 1;

void put_u32_le(std::ostream& out, std::uint32_t v) {
    const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                       static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(b, 4);
}

std::uint32_t get_u32_le(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64_le(std::ostream& out, double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((u >> (8 * i)) & 0xff);
    out.write(b, 8);
}

double get_f64_le(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &u, 8);
    return v;
}

} // namespace

void save_matrix(const std::string& path, const Matrix& m) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(kMagic, 4);
    out.put(static_cast<char>(kVersion));
    put_u32_le(out, static_cast<std::uint32_t>(m.rows()));
    put_u32_le(out, static_cast<std::uint32_t>(m.cols()));
    for (double v : m.data()) put_f64_le(out, v);
    if (!out) throw IoError("short write to '" + path + "'");
}

Matrix load_matrix(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");

    char magic[4] = {};
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError("'" + path + "': bad magic at offset 0 (expected \"FPED\")");
    const int version = in.get();
    if (version != kVersion)
        throw IoError("'" + path + "': unsupported version " + std::to_string(version) +
                      " at offset 4");
    const std::uint32_t rows = get_u32_le(in);
    const std::uint32_t cols = get_u32_le(in);
    if (!in) throw IoError("'" + path + "': truncated header at offset 5");

    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.data().size(); ++i) {
        m.data()[i] = get_f64_le(in);
        if (!in)
            throw IoError("'" + path + "': truncated payload at offset " +
                          std::to_string(13 + 8 * i));
    }
    return m;
}

} // namespace fpedit
