// Copyright 2026 the revgen authors
// SPDX-License-Identifier: Apache-2.0

#include "revgen/image.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "revgen/common.hpp"

namespace revgen {

namespace {

uint32_t crc_table[256];
bool crc_ready = false;

void init_crc() {
  if (crc_ready) return;
  for (uint32_t n = 0; n < 256; ++n) {
    uint32_t c = n;
    for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
    crc_table[n] = c;
  }
  crc_ready = true;
}

uint32_t crc32(const uint8_t* buf, size_t len, uint32_t crc = 0) {
  init_crc();
  uint32_t c = crc ^ 0xffffffffu;
  for (size_t i = 0; i < len; ++i) c = crc_table[(c ^ buf[i]) & 0xff] ^ (c >> 8);
  return c ^ 0xffffffffu;
}

uint32_t adler32(const uint8_t* buf, size_t len) {
  uint32_t a = 1, b = 0;
  for (size_t i = 0; i < len; ++i) {
    a = (a + buf[i]) % 65521u;
    b = (b + a) % 65521u;
  }
  return (b << 16) | a;
}

void put_u32be(std::vector<uint8_t>& v, uint32_t x) {
  v.push_back((x >> 24) & 0xff);
  v.push_back((x >> 16) & 0xff);
  v.push_back((x >> 8) & 0xff);
  v.push_back(x & 0xff);
}

void write_chunk(std::ofstream& f, const char type[4], const std::vector<uint8_t>& payload) {
  std::vector<uint8_t> head;
  put_u32be(head, static_cast<uint32_t>(payload.size()));
  f.write(reinterpret_cast<const char*>(head.data()), 4);
  std::vector<uint8_t> body(type, type + 4);
  body.insert(body.end(), payload.begin(), payload.end());
  f.write(reinterpret_cast<const char*>(body.data()), static_cast<std::streamsize>(body.size()));
  std::vector<uint8_t> tail;
  put_u32be(tail, crc32(body.data(), body.size()));
  f.write(reinterpret_cast<const char*>(tail.data()), 4);
}

uint32_t read_u32be(const uint8_t* p) {
  return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

int paeth(int a, int b, int c) {
  int p = a + b - c;
  int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

}  // namespace

ImageBuffer ImageBuffer::make(int height, int width, int channels, double fill) {
  REVGEN_CHECK(height > 0 && width > 0, "ImageBuffer: non-positive size");
  REVGEN_CHECK(channels == 3 || channels == 4, "ImageBuffer: channels must be 3 or 4");
  ImageBuffer img;
  img.height = height;
  img.width = width;
  img.channels = channels;
  img.values.assign((size_t)height * width * channels, fill);
  return img;
}

std::vector<double> ImageBuffer::to_gray() const {
  std::vector<double> g((size_t)height * width);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      g[(size_t)y * width + x] = 0.299 * at(y, x, 0) + 0.587 * at(y, x, 1) + 0.114 * at(y, x, 2);
  return g;
}

void ImageBuffer::validate() const {
  REVGEN_CHECK(channels == 3 || channels == 4, "ImageBuffer: channels must be 3 or 4");
  REVGEN_CHECK(values.size() == (size_t)height * width * channels, "ImageBuffer: bad buffer size");
  for (double v : values)
    REVGEN_CHECK(v >= 0.0 && v <= 1.0, "ImageBuffer: value outside [0,1]");
}

void save_png(const std::string& path, const ImageBuffer& img) {
  REVGEN_CHECK(img.height > 0 && img.width > 0, "save_png: empty image");
  REVGEN_CHECK(img.channels == 3 || img.channels == 4, "save_png: channels must be 3 or 4");

  std::ofstream f(path, std::ios::binary);
  REVGEN_CHECK(f.good(), "save_png: cannot open '" + path + "'");
  static const uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  f.write(reinterpret_cast<const char*>(sig), 8);

  std::vector<uint8_t> ihdr;
  put_u32be(ihdr, static_cast<uint32_t>(img.width));
  put_u32be(ihdr, static_cast<uint32_t>(img.height));
  ihdr.push_back(8);                                   // bit depth
  ihdr.push_back(img.channels == 3 ? 2 : 6);           // color type
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  write_chunk(f, "IHDR", ihdr);

  // Raw scanlines, filter byte 0 per row.
  const size_t stride = (size_t)img.width * img.channels;
  std::vector<uint8_t> raw;
  raw.reserve((stride + 1) * img.height);
  for (int y = 0; y < img.height; ++y) {
    raw.push_back(0);
    for (size_t i = 0; i < stride; ++i) {
      double v = img.values[(size_t)y * stride + i];
      v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
      raw.push_back(static_cast<uint8_t>(std::lround(v * 255.0)));
    }
  }

  // zlib stream with stored deflate blocks.
  std::vector<uint8_t> z;
  z.push_back(0x78);
  z.push_back(0x01);
  size_t off = 0;
  while (off < raw.size() || raw.empty()) {
    size_t len = std::min<size_t>(65535, raw.size() - off);
    bool final = (off + len == raw.size());
    z.push_back(final ? 1 : 0);
    z.push_back(len & 0xff);
    z.push_back((len >> 8) & 0xff);
    z.push_back(~len & 0xff);
    z.push_back((~len >> 8) & 0xff);
    z.insert(z.end(), raw.begin() + off, raw.begin() + off + len);
    off += len;
    if (final) break;
  }
  put_u32be(z, adler32(raw.data(), raw.size()));
  write_chunk(f, "IDAT", z);
  write_chunk(f, "IEND", {});
  REVGEN_CHECK(f.good(), "save_png: write failed for '" + path + "'");
}

ImageBuffer load_png(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REVGEN_CHECK(f.good(), "load_png: cannot open '" + path + "'");
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  REVGEN_CHECK(bytes.size() > 8, "load_png: truncated file '" + path + "'");
  static const uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  REVGEN_CHECK(std::memcmp(bytes.data(), sig, 8) == 0, "load_png: bad signature in '" + path + "'");

  size_t pos = 8;
  int width = 0, height = 0, channels = 0;
  std::vector<uint8_t> idat;
  while (pos + 8 <= bytes.size()) {
    uint32_t len = read_u32be(&bytes[pos]);
    REVGEN_CHECK(pos + 12 + len <= bytes.size(), "load_png: truncated chunk in '" + path + "'");
    std::string type(reinterpret_cast<const char*>(&bytes[pos + 4]), 4);
    const uint8_t* payload = &bytes[pos + 8];
    uint32_t want_crc = read_u32be(&bytes[pos + 8 + len]);
    REVGEN_CHECK(crc32(&bytes[pos + 4], len + 4) == want_crc,
                 "load_png: chunk crc mismatch in '" + path + "'");
    if (type == "IHDR") {
      REVGEN_CHECK(len == 13, "load_png: bad IHDR in '" + path + "'");
      width = static_cast<int>(read_u32be(payload));
      height = static_cast<int>(read_u32be(payload + 4));
      REVGEN_CHECK(payload[8] == 8, "load_png: only 8-bit depth supported");
      if (payload[9] == 2)
        channels = 3;
      else if (payload[9] == 6)
        channels = 4;
      else
        REVGEN_FAIL("load_png: only RGB/RGBA color types supported");
      REVGEN_CHECK(payload[12] == 0, "load_png: interlaced PNG not supported");
    } else if (type == "IDAT") {
      idat.insert(idat.end(), payload, payload + len);
    } else if (type == "IEND") {
      break;
    }
    pos += 12 + len;
  }
  REVGEN_CHECK(width > 0 && height > 0 && channels > 0, "load_png: missing IHDR in '" + path + "'");
  REVGEN_CHECK(idat.size() >= 6, "load_png: missing IDAT in '" + path + "'");

  // Inflate, stored blocks only.
  std::vector<uint8_t> raw;
  size_t zp = 2;  // skip zlib header
  for (;;) {
    REVGEN_CHECK(zp + 5 <= idat.size(), "load_png: truncated deflate stream in '" + path + "'");
    uint8_t hdr = idat[zp];
    REVGEN_CHECK((hdr & 0x06) == 0, "load_png: compressed deflate blocks not supported");
    uint16_t len = idat[zp + 1] | (idat[zp + 2] << 8);
    uint16_t nlen = idat[zp + 3] | (idat[zp + 4] << 8);
    REVGEN_CHECK(static_cast<uint16_t>(~len) == nlen, "load_png: stored block length mismatch");
    REVGEN_CHECK(zp + 5 + len <= idat.size(), "load_png: stored block overruns stream");
    raw.insert(raw.end(), idat.begin() + zp + 5, idat.begin() + zp + 5 + len);
    zp += 5 + len;
    if (hdr & 1) break;
  }
  const size_t stride = (size_t)width * channels;
  REVGEN_CHECK(raw.size() == (stride + 1) * height, "load_png: scanline size mismatch in '" + path + "'");

  // Undo row filters in place.
  std::vector<uint8_t> px((size_t)height * stride);
  for (int y = 0; y < height; ++y) {
    uint8_t filt = raw[(stride + 1) * y];
    const uint8_t* src = &raw[(stride + 1) * y + 1];
    uint8_t* dst = &px[stride * y];
    const uint8_t* up = y > 0 ? &px[stride * (y - 1)] : nullptr;
    for (size_t i = 0; i < stride; ++i) {
      int a = i >= (size_t)channels ? dst[i - channels] : 0;
      int b = up ? up[i] : 0;
      int c = (up && i >= (size_t)channels) ? up[i - channels] : 0;
      int v = src[i];
      switch (filt) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += paeth(a, b, c); break;
        default: REVGEN_FAIL("load_png: unknown row filter");
      }
      dst[i] = static_cast<uint8_t>(v & 0xff);
    }
  }

  ImageBuffer img = ImageBuffer::make(height, width, channels);
  for (size_t i = 0; i < px.size(); ++i) img.values[i] = px[i] / 255.0;
  return img;
}

}  // namespace revgen
