#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace lll {

/// 17 significant digits: round-trip exact for IEEE doubles.
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

class CsvWriter {
  public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
        : out_(path) {
        if (!out_) throw std::runtime_error("CsvWriter: cannot open " + path.string());
        for (std::size_t i = 0; i < header.size(); ++i)
            out_ << (i ? "," : "") << header[i];
        out_ << "\n";
    }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
        out_ << "\n";
    }

    void row(const std::vector<double>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << fmt17(cells[i]);
        out_ << "\n";
    }

  private:
    std::ofstream out_;
};

// ---------------------------------------------------------------------------
// SHA-256 (FIPS 180-4), enough for manifest content hashes
// ---------------------------------------------------------------------------

namespace detail {

struct Sha256 {
    std::array<std::uint32_t, 8> h{0x6a09e667u, 0xbb67ae85u, 0x3c6ef372u, 0xa54ff53au,
                                   0x510e527fu, 0x9b05688cu, 0x1f83d9abu, 0x5be0cd19u};
    std::array<std::uint8_t, 64> block{};
    std::size_t block_len = 0;
    std::uint64_t total = 0;

    static std::uint32_t rotr(std::uint32_t x, int n) { return (x >> n) | (x << (32 - n)); }

    void compress(const std::uint8_t* p) {
        static constexpr std::uint32_t k[64] = {
            0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4,
            0xab1c5ed5, 0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe,
            0x9bdc06a7, 0xc19bf174, 0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc, 0x2de92c6f,
            0x4a7484aa, 0x5cb0a9dc, 0x76f988da, 0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7,
            0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc,
            0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85, 0xa2bfe8a1, 0xa81a664b,
            0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070, 0x19a4c116,
            0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f, 0x682e6ff3,
            0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7,
            0xc67178f2};
        std::uint32_t w[64];
        for (int i = 0; i < 16; ++i)
            w[i] = (std::uint32_t(p[4 * i]) << 24) | (std::uint32_t(p[4 * i + 1]) << 16) |
                   (std::uint32_t(p[4 * i + 2]) << 8) | std::uint32_t(p[4 * i + 3]);
        for (int i = 16; i < 64; ++i) {
            const std::uint32_t s0 = rotr(w[i - 15], 7) ^ rotr(w[i - 15], 18) ^ (w[i - 15] >> 3);
            const std::uint32_t s1 = rotr(w[i - 2], 17) ^ rotr(w[i - 2], 19) ^ (w[i - 2] >> 10);
            w[i] = w[i - 16] + s0 + w[i - 7] + s1;
        }
        auto a = h;
        for (int i = 0; i < 64; ++i) {
            const std::uint32_t s1 = rotr(a[4], 6) ^ rotr(a[4], 11) ^ rotr(a[4], 25);
            const std::uint32_t ch = (a[4] & a[5]) ^ (~a[4] & a[6]);
            const std::uint32_t t1 = a[7] + s1 + ch + k[i] + w[i];
            const std::uint32_t s0 = rotr(a[0], 2) ^ rotr(a[0], 13) ^ rotr(a[0], 22);
            const std::uint32_t maj = (a[0] & a[1]) ^ (a[0] & a[2]) ^ (a[1] & a[2]);
            const std::uint32_t t2 = s0 + maj;
            a[7] = a[6]; a[6] = a[5]; a[5] = a[4]; a[4] = a[3] + t1;
            a[3] = a[2]; a[2] = a[1]; a[1] = a[0]; a[0] = t1 + t2;
        }
        for (int i = 0; i < 8; ++i) h[i] += a[i];
    }

    void update(const void* data, std::size_t len) {
        auto p = static_cast<const std::uint8_t*>(data);
        total += len;
        while (len > 0) {
            const std::size_t take = std::min(len, block.size() - block_len);
            std::memcpy(block.data() + block_len, p, take);
            block_len += take;
            p += take;
            len -= take;
            if (block_len == block.size()) {
                compress(block.data());
                block_len = 0;
            }
        }
    }

    std::string hex_digest() {
        const std::uint64_t bits = total * 8;
        const std::uint8_t one = 0x80;
        update(&one, 1);
        const std::uint8_t zero = 0;
        while (block_len != 56) update(&zero, 1);
        std::uint8_t len_be[8];
        for (int i = 0; i < 8; ++i) len_be[i] = std::uint8_t(bits >> (56 - 8 * i));
        update(len_be, 8);
        char out[65];
        for (int i = 0; i < 8; ++i) std::snprintf(out + 8 * i, 9, "%08x", h[i]);
        return std::string(out, 64);
    }
};

} // namespace detail

inline std::string sha256_hex(const std::string& data) {
    detail::Sha256 s;
    s.update(data.data(), data.size());
    return s.hex_digest();
}

inline std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("sha256_file: cannot open " + path.string());
    detail::Sha256 s;
    char buf[65536];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
        s.update(buf, static_cast<std::size_t>(in.gcount()));
    return s.hex_digest();
}

/// MANIFEST: one "sha256  bytes  name" line per output. Timestamps live here
/// and only here, so payload files stay byte-identical across reruns.
inline void write_manifest(const std::filesystem::path& dir,
                           const std::vector<std::string>& files) {
    std::ofstream out(dir / "MANIFEST");
    if (!out) throw std::runtime_error("write_manifest: cannot open MANIFEST");
    const auto now = std::chrono::system_clock::now();
    out << "# generated " << std::chrono::duration_cast<std::chrono::seconds>(
                                 now.time_since_epoch())
                                 .count()
        << "\n";
    for (const auto& f : files) {
        const auto p = dir / f;
        out << sha256_file(p) << "  " << std::filesystem::file_size(p) << "  " << f << "\n";
    }
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_text: cannot open " + path.string());
    out << text;
}

} // namespace lll
