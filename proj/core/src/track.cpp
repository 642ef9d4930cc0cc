#include "mgn/track.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

#include "mgn/errors.hpp"

namespace mgn {

namespace {

constexpr char kMagic[4] = {'M', 'G', 'F', '1'};
constexpr uint32_t kMaxNameLen = 4096;

void put_u32(std::string& out, uint32_t x) {
  out.push_back(static_cast<char>(x & 0xFF));
  out.push_back(static_cast<char>((x >> 8) & 0xFF));
  out.push_back(static_cast<char>((x >> 16) & 0xFF));
  out.push_back(static_cast<char>((x >> 24) & 0xFF));
}

uint32_t get_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) |
         (static_cast<uint32_t>(p[3]) << 24);
}

}  // namespace

void validate_track(const FeatureTrack& track) {
  if (track.values.rows < 1 || track.values.cols < 1)
    throw InvariantError("track '" + track.modality +
                         "': T and dim must be >= 1");
  if (track.rate.num == 0 || track.rate.den == 0)
    throw InvariantError("track '" + track.modality +
                         "': rate must be a positive rational");
  if (track.modality.empty() || track.modality.size() > kMaxNameLen)
    throw InvariantError("track: modality name empty or too long");
  for (float x : track.values.v)
    if (!std::isfinite(x))
      throw InvariantError("track '" + track.modality +
                           "': NaN or Inf value");
  if (track.modality == "labels") {
    if (track.values.cols != kNumExpressions)
      throw InvariantError("labels track must have dim 15");
    for (float x : track.values.v)
      if (x < 0.0f || x > 1.0f)
        throw InvariantError("labels track value outside [0, 1]");
  }
}

void write_track(const FeatureTrack& track,
                 const std::filesystem::path& path) {
  validate_track(track);

  std::string buf;
  buf.reserve(24 + track.modality.size() + track.values.size() * 4);
  buf.append(kMagic, 4);
  put_u32(buf, static_cast<uint32_t>(track.modality.size()));
  buf.append(track.modality);
  put_u32(buf, static_cast<uint32_t>(track.values.rows));
  put_u32(buf, static_cast<uint32_t>(track.values.cols));
  put_u32(buf, track.rate.num);
  put_u32(buf, track.rate.den);
  for (float x : track.values.v) put_u32(buf, std::bit_cast<uint32_t>(x));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("short write: " + path.string());
}

FeatureTrack read_track(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  std::vector<unsigned char> buf{std::istreambuf_iterator<char>(in),
                                 std::istreambuf_iterator<char>()};

  const std::string name = path.string();
  if (buf.size() < 4 || std::memcmp(buf.data(), kMagic, 4) != 0)
    throw FormatError(FormatError::Kind::BadMagic, name + ": bad magic");

  size_t pos = 4;
  auto need = [&](size_t n, const char* what) {
    if (buf.size() - pos < n)
      throw FormatError(FormatError::Kind::Truncated,
                        name + ": truncated " + what);
  };

  need(4, "name length");
  uint32_t name_len = get_u32(buf.data() + pos);
  pos += 4;
  if (name_len == 0 || name_len > kMaxNameLen)
    throw FormatError(FormatError::Kind::BadHeader,
                      name + ": bad modality name length");
  need(name_len, "modality name");
  std::string modality(reinterpret_cast<const char*>(buf.data() + pos),
                       name_len);
  pos += name_len;

  need(16, "header");
  uint32_t t = get_u32(buf.data() + pos);
  uint32_t dim = get_u32(buf.data() + pos + 4);
  uint32_t rate_num = get_u32(buf.data() + pos + 8);
  uint32_t rate_den = get_u32(buf.data() + pos + 12);
  pos += 16;
  if (t == 0 || dim == 0)
    throw FormatError(FormatError::Kind::BadHeader,
                      name + ": zero T or dim");
  if (rate_num == 0 || rate_den == 0)
    throw FormatError(FormatError::Kind::BadHeader, name + ": zero rate");

  uint64_t count = static_cast<uint64_t>(t) * dim;
  if (count > (1ull << 31))
    throw FormatError(FormatError::Kind::BadHeader,
                      name + ": implausible element count");
  if (buf.size() - pos < count * 4)
    throw FormatError(FormatError::Kind::Truncated,
                      name + ": truncated payload");
  if (buf.size() - pos > count * 4)
    throw FormatError(FormatError::Kind::TrailingBytes,
                      name + ": trailing bytes after payload");

  FeatureTrack track;
  track.modality = std::move(modality);
  track.rate = Rate{rate_num, rate_den};
  track.values = nn::Mat<float>(static_cast<int>(t), static_cast<int>(dim));
  for (uint64_t i = 0; i < count; ++i)
    track.values.v[i] = std::bit_cast<float>(get_u32(buf.data() + pos + i * 4));

  for (float x : track.values.v)
    if (!std::isfinite(x))
      throw FormatError(FormatError::Kind::NonFinite,
                        name + ": NaN or Inf value");
  if (track.modality == "labels") {
    if (track.values.cols != kNumExpressions)
      throw FormatError(FormatError::Kind::LabelRange,
                        name + ": labels track must have dim 15");
    for (float x : track.values.v)
      if (x < 0.0f || x > 1.0f)
        throw FormatError(FormatError::Kind::LabelRange,
                          name + ": labels value outside [0, 1]");
  }
  return track;
}

}  // namespace mgn
