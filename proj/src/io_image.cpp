#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

#include "sketchfit/io.hpp"

// Self-contained 8-bit grayscale PNG codec. The writer emits uncompressed
// (stored) deflate blocks; the reader handles the full RFC 1951 stream
// (stored, fixed and dynamic Huffman) plus PNG scanline filters 0-4.

namespace sketchfit {
namespace {

std::vector<uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open file: " + path);
    return std::vector<uint8_t>(std::istreambuf_iterator<char>(in),
                                std::istreambuf_iterator<char>());
}

uint32_t crc32(const uint8_t* data, size_t n, uint32_t crc = 0xffffffffu) {
    static const auto table = [] {
        std::array<uint32_t, 256> t{};
        for (uint32_t i = 0; i < 256; ++i) {
            uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    for (size_t i = 0; i < n; ++i) crc = table[(crc ^ data[i]) & 0xff] ^ (crc >> 8);
    return crc;
}

uint32_t adler32(const uint8_t* data, size_t n) {
    uint32_t a = 1, b = 0;
    for (size_t i = 0; i < n; ++i) {
        a = (a + data[i]) % 65521u;
        b = (b + a) % 65521u;
    }
    return (b << 16) | a;
}

// ---------------------------------------------------------------- inflate

class BitReader {
  public:
    BitReader(const uint8_t* data, size_t size) : data_(data), size_(size) {}

    uint32_t bits(int n) {
        uint32_t out = 0;
        for (int i = 0; i < n; ++i) {
            if (bit_ == 0) {
                if (pos_ >= size_) throw format_error("deflate stream truncated");
                cur_ = data_[pos_++];
            }
            out |= uint32_t((cur_ >> bit_) & 1) << i;
            bit_ = (bit_ + 1) & 7;
        }
        return out;
    }
    int bit() { return int(bits(1)); }
    void align() { bit_ = 0; }
    const uint8_t* raw(size_t n) {
        if (pos_ + n > size_) throw format_error("deflate stream truncated");
        const uint8_t* p = data_ + pos_;
        pos_ += n;
        return p;
    }

  private:
    const uint8_t* data_;
    size_t size_;
    size_t pos_ = 0;
    int bit_ = 0;
    uint8_t cur_ = 0;
};

// Canonical Huffman decoder over code lengths (puff-style).
struct Huffman {
    std::array<int, 16> count{};
    std::vector<int> symbol;

    explicit Huffman(const std::vector<int>& lengths) {
        symbol.resize(lengths.size());
        for (int len : lengths) ++count[len];
        count[0] = 0;
        std::array<int, 16> offs{};
        for (int len = 1; len < 16; ++len) offs[len] = offs[len - 1] + count[len - 1];
        for (size_t s = 0; s < lengths.size(); ++s)
            if (lengths[s] != 0) symbol[offs[lengths[s]]++] = int(s);
    }

    int decode(BitReader& br) const {
        int code = 0, first = 0, index = 0;
        for (int len = 1; len < 16; ++len) {
            code |= br.bit();
            const int n = count[len];
            if (code - first < n) return symbol[index + (code - first)];
            index += n;
            first += n;
            first <<= 1;
            code <<= 1;
        }
        throw format_error("invalid Huffman code");
    }
};

constexpr int kLenBase[29] = {3,  4,  5,  6,  7,  8,  9,  10, 11,  13,
                              15, 17, 19, 23, 27, 31, 35, 43, 51,  59,
                              67, 83, 99, 115, 131, 163, 195, 227, 258};
constexpr int kLenExtra[29] = {0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2,
                               2, 3, 3, 3, 3, 4, 4, 4, 4, 5, 5, 5, 5, 0};
constexpr int kDistBase[30] = {1,    2,    3,    4,    5,    7,     9,    13,
                               17,   25,   33,   49,   65,   97,    129,  193,
                               257,  385,  513,  769,  1025, 1537,  2049, 3073,
                               4097, 6145, 8193, 12289, 16385, 24577};
constexpr int kDistExtra[30] = {0, 0, 0, 0, 1, 1, 2,  2,  3,  3,  4,  4,  5, 5, 6,
                                6, 7, 7, 8, 8, 9, 9, 10, 10, 11, 11, 12, 12, 13, 13};

void inflate_block(BitReader& br, const Huffman& lit, const Huffman& dist,
                   std::vector<uint8_t>& out) {
    for (;;) {
        const int sym = lit.decode(br);
        if (sym < 256) {
            out.push_back(uint8_t(sym));
        } else if (sym == 256) {
            return;
        } else {
            if (sym > 285) throw format_error("invalid length symbol");
            const int li = sym - 257;
            const int length = kLenBase[li] + int(br.bits(kLenExtra[li]));
            const int ds = dist.decode(br);
            if (ds > 29) throw format_error("invalid distance symbol");
            const size_t distance = size_t(kDistBase[ds]) + br.bits(kDistExtra[ds]);
            if (distance > out.size()) throw format_error("distance beyond output");
            for (int i = 0; i < length; ++i) out.push_back(out[out.size() - distance]);
        }
    }
}

std::vector<uint8_t> inflate_zlib(const std::vector<uint8_t>& in) {
    if (in.size() < 6) throw format_error("zlib stream too short");
    const uint8_t cmf = in[0], flg = in[1];
    if ((cmf & 0x0f) != 8) throw format_error("unsupported zlib compression method");
    if (((cmf << 8) | flg) % 31 != 0) throw format_error("zlib header check failed");
    if (flg & 0x20) throw format_error("zlib preset dictionaries unsupported");

    BitReader br(in.data() + 2, in.size() - 2 - 4);
    std::vector<uint8_t> out;
    for (;;) {
        const int final = br.bit();
        const int type = int(br.bits(2));
        if (type == 0) {
            br.align();
            const uint8_t* p = br.raw(4);
            const unsigned len = unsigned(p[0]) | (unsigned(p[1]) << 8);
            const unsigned nlen = unsigned(p[2]) | (unsigned(p[3]) << 8);
            if ((len ^ 0xffffu) != nlen) throw format_error("stored block length mismatch");
            const uint8_t* data = br.raw(len);
            out.insert(out.end(), data, data + len);
        } else if (type == 1) {
            std::vector<int> litlen(288);
            for (int i = 0; i < 144; ++i) litlen[i] = 8;
            for (int i = 144; i < 256; ++i) litlen[i] = 9;
            for (int i = 256; i < 280; ++i) litlen[i] = 7;
            for (int i = 280; i < 288; ++i) litlen[i] = 8;
            inflate_block(br, Huffman(litlen), Huffman(std::vector<int>(30, 5)), out);
        } else if (type == 2) {
            const int hlit = int(br.bits(5)) + 257;
            const int hdist = int(br.bits(5)) + 1;
            const int hclen = int(br.bits(4)) + 4;
            static const int order[19] = {16, 17, 18, 0, 8,  7, 9,  6, 10, 5,
                                          11, 4,  12, 3, 13, 2, 14, 1, 15};
            std::vector<int> cl_lengths(19, 0);
            for (int i = 0; i < hclen; ++i) cl_lengths[order[i]] = int(br.bits(3));
            const Huffman cl(cl_lengths);
            std::vector<int> lengths;
            lengths.reserve(hlit + hdist);
            while (int(lengths.size()) < hlit + hdist) {
                const int sym = cl.decode(br);
                if (sym < 16) {
                    lengths.push_back(sym);
                } else if (sym == 16) {
                    if (lengths.empty()) throw format_error("repeat with no prior length");
                    const int n = 3 + int(br.bits(2));
                    lengths.insert(lengths.end(), n, lengths.back());
                } else if (sym == 17) {
                    lengths.insert(lengths.end(), 3 + br.bits(3), 0);
                } else {
                    lengths.insert(lengths.end(), 11 + br.bits(7), 0);
                }
            }
            if (int(lengths.size()) != hlit + hdist)
                throw format_error("code length overrun");
            inflate_block(br,
                          Huffman(std::vector<int>(lengths.begin(), lengths.begin() + hlit)),
                          Huffman(std::vector<int>(lengths.begin() + hlit, lengths.end())),
                          out);
        } else {
            throw format_error("invalid deflate block type");
        }
        if (final) break;
    }
    const size_t tail = in.size() - 4;
    const uint32_t expect = (uint32_t(in[tail]) << 24) | (uint32_t(in[tail + 1]) << 16) |
                            (uint32_t(in[tail + 2]) << 8) | uint32_t(in[tail + 3]);
    if (adler32(out.data(), out.size()) != expect)
        throw format_error("zlib checksum mismatch");
    return out;
}

// ------------------------------------------------------------------- PNG

constexpr uint8_t kPngSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

uint32_t be32(const uint8_t* p) {
    return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) |
           uint32_t(p[3]);
}

void put_be32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(uint8_t(v >> 24));
    out.push_back(uint8_t(v >> 16));
    out.push_back(uint8_t(v >> 8));
    out.push_back(uint8_t(v));
}

GrayImage load_png(const std::vector<uint8_t>& bytes, const std::string& path) {
    if (bytes.size() < 8 + 25 || std::memcmp(bytes.data(), kPngSig, 8) != 0)
        throw format_error("not a PNG file: " + path);

    GrayImage img;
    std::vector<uint8_t> idat;
    size_t pos = 8;
    bool seen_ihdr = false, seen_iend = false;
    while (pos + 8 <= bytes.size() && !seen_iend) {
        const uint32_t len = be32(&bytes[pos]);
        if (pos + 12 + len > bytes.size()) throw format_error("truncated PNG chunk");
        const char* type = reinterpret_cast<const char*>(&bytes[pos + 4]);
        const uint8_t* data = &bytes[pos + 8];
        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13) throw format_error("bad IHDR length");
            img.width = int(be32(data));
            img.height = int(be32(data + 4));
            const int bit_depth = data[8], color_type = data[9];
            if (bit_depth != 8)
                throw format_error("only 8-bit PNGs are supported (got depth " +
                                   std::to_string(bit_depth) + ")");
            if (color_type != 0)
                throw format_error("only grayscale PNGs are supported");
            if (data[12] != 0) throw format_error("interlaced PNGs are unsupported");
            if (img.width <= 0 || img.height <= 0) throw format_error("bad PNG size");
            seen_ihdr = true;
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), data, data + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            seen_iend = true;
        }
        pos += 12 + len;
    }
    if (!seen_ihdr) throw format_error("PNG missing IHDR");

    const std::vector<uint8_t> raw = inflate_zlib(idat);
    const size_t stride = size_t(img.width) + 1;
    if (raw.size() != stride * img.height)
        throw format_error("PNG pixel data has wrong size");

    img.pixels.resize(size_t(img.width) * img.height);
    std::vector<uint8_t> prev(img.width, 0);
    for (int y = 0; y < img.height; ++y) {
        const uint8_t filter = raw[size_t(y) * stride];
        const uint8_t* src = &raw[size_t(y) * stride + 1];
        uint8_t* dst = &img.pixels[size_t(y) * img.width];
        for (int x = 0; x < img.width; ++x) {
            const int a = x > 0 ? dst[x - 1] : 0;
            const int b = prev[x];
            const int c = x > 0 ? prev[x - 1] : 0;
            int v = src[x];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: {
                    const int p = a + b - c;
                    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
                    v += (pa <= pb && pa <= pc) ? a : (pb <= pc ? b : c);
                    break;
                }
                default: throw format_error("unknown PNG filter type");
            }
            dst[x] = uint8_t(v & 0xff);
        }
        std::copy(dst, dst + img.width, prev.begin());
    }
    return img;
}

GrayImage load_pgm(const std::vector<uint8_t>& bytes, const std::string& path) {
    std::string text(bytes.begin(), bytes.end());
    std::istringstream in(text);
    std::string magic;
    in >> magic;
    if (magic != "P5" && magic != "P2") throw format_error("not a PGM file: " + path);

    auto next_token = [&]() {
        std::string tok;
        for (;;) {
            if (!(in >> tok)) throw format_error("truncated PGM header");
            if (tok[0] == '#') {
                std::string rest;
                std::getline(in, rest);
                continue;
            }
            return tok;
        }
    };
    GrayImage img;
    img.width = std::stoi(next_token());
    img.height = std::stoi(next_token());
    const int maxval = std::stoi(next_token());
    if (img.width <= 0 || img.height <= 0) throw format_error("bad PGM size");
    if (maxval > 255) throw format_error("16-bit PGM is unsupported");
    if (maxval <= 0) throw format_error("bad PGM maxval");

    const size_t count = size_t(img.width) * img.height;
    img.pixels.resize(count);
    if (magic == "P5") {
        const std::streampos data_at = in.tellg();
        if (data_at < 0) throw format_error("truncated PGM");
        size_t offset = size_t(data_at) + 1;  // single whitespace after maxval
        if (offset + count > bytes.size()) throw format_error("truncated PGM raster");
        std::copy(bytes.begin() + offset, bytes.begin() + offset + count,
                  img.pixels.begin());
    } else {
        for (size_t i = 0; i < count; ++i) {
            int v;
            if (!(in >> v)) throw format_error("truncated PGM raster");
            img.pixels[i] = uint8_t(std::clamp(v, 0, 255));
        }
    }
    if (maxval != 255)
        for (auto& p : img.pixels) p = uint8_t(int(p) * 255 / maxval);
    return img;
}

}  // namespace

GrayImage load_image(const std::string& path) {
    const std::vector<uint8_t> bytes = read_file(path);
    if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSig, 8) == 0)
        return load_png(bytes, path);
    if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '2'))
        return load_pgm(bytes, path);
    throw format_error("unrecognized image format: " + path);
}

void save_png(const GrayImage& img, const std::string& path) {
    if (img.width <= 0 || img.height <= 0 ||
        img.pixels.size() != size_t(img.width) * img.height)
        throw validation_error("image dimensions are inconsistent");

    // filter byte 0 per scanline
    std::vector<uint8_t> raw;
    raw.reserve((size_t(img.width) + 1) * img.height);
    for (int y = 0; y < img.height; ++y) {
        raw.push_back(0);
        const uint8_t* row = &img.pixels[size_t(y) * img.width];
        raw.insert(raw.end(), row, row + img.width);
    }

    // zlib stream of stored deflate blocks
    std::vector<uint8_t> z;
    z.push_back(0x78);
    z.push_back(0x01);
    size_t off = 0;
    do {
        const size_t chunk = std::min<size_t>(raw.size() - off, 65535);
        const bool final = off + chunk == raw.size();
        z.push_back(final ? 1 : 0);
        z.push_back(uint8_t(chunk & 0xff));
        z.push_back(uint8_t(chunk >> 8));
        z.push_back(uint8_t(~chunk & 0xff));
        z.push_back(uint8_t((~chunk >> 8) & 0xff));
        z.insert(z.end(), raw.begin() + off, raw.begin() + off + chunk);
        off += chunk;
    } while (off < raw.size());
    put_be32(z, adler32(raw.data(), raw.size()));

    std::vector<uint8_t> out(kPngSig, kPngSig + 8);
    auto chunk = [&](const char* type, const std::vector<uint8_t>& payload) {
        put_be32(out, uint32_t(payload.size()));
        const size_t start = out.size();
        out.insert(out.end(), type, type + 4);
        out.insert(out.end(), payload.begin(), payload.end());
        put_be32(out, crc32(out.data() + start, out.size() - start) ^ 0xffffffffu);
    };
    std::vector<uint8_t> ihdr;
    put_be32(ihdr, uint32_t(img.width));
    put_be32(ihdr, uint32_t(img.height));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(0);  // grayscale
    ihdr.push_back(0);  // compression
    ihdr.push_back(0);  // filter
    ihdr.push_back(0);  // no interlace
    chunk("IHDR", ihdr);
    chunk("IDAT", z);
    chunk("IEND", {});

    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open image for writing: " + path);
    f.write(reinterpret_cast<const char*>(out.data()), std::streamsize(out.size()));
    if (!f) throw io_error("failed writing image: " + path);
}

void save_pgm(const GrayImage& img, const std::string& path) {
    if (img.width <= 0 || img.height <= 0 ||
        img.pixels.size() != size_t(img.width) * img.height)
        throw validation_error("image dimensions are inconsistent");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open image for writing: " + path);
    f << "P5\n" << img.width << ' ' << img.height << "\n255\n";
    f.write(reinterpret_cast<const char*>(img.pixels.data()),
            std::streamsize(img.pixels.size()));
    if (!f) throw io_error("failed writing image: " + path);
}

void save_image(const GrayImage& img, const std::string& path) {
    const size_t dot = path.rfind('.');
    const std::string ext = dot == std::string::npos ? "" : path.substr(dot);
    if (ext == ".pgm") {
        save_pgm(img, path);
    } else if (ext == ".png") {
        save_png(img, path);
    } else {
        throw validation_error("unsupported image extension (use .png or .pgm): " + path);
    }
}

}  // namespace sketchfit
