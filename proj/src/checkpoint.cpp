#include "fedlsm/checkpoint.hpp"

#include "fedlsm/errors.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace fedlsm {
namespace {

constexpr char kMagic[8] = {'F', 'L', 'S', 'M', 'C', 'K', 'P', 'T'};

template <class T> void put(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(std::begin(bytes), std::end(bytes));
  out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

class Reader {
public:
  explicit Reader(const std::string& s) : s_(s) {}

  template <class T> T get() {
    if (pos_ + sizeof(T) > s_.size())
      throw ParseError("checkpoint truncated at byte " + std::to_string(pos_));
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, s_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big)
      std::reverse(std::begin(bytes), std::end(bytes));
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
  }

  void expect_magic() {
    if (s_.size() < sizeof(kMagic) || std::memcmp(s_.data(), kMagic, sizeof(kMagic)) != 0)
      throw ParseError("not a checkpoint (bad magic)");
    pos_ = sizeof(kMagic);
  }

  bool at_end() const { return pos_ == s_.size(); }

private:
  const std::string& s_;
  std::size_t pos_ = 0;
};

} // namespace

std::string encode_checkpoint(const ModelParams& params) {
  validate(params);
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  const auto dims = params.layer_dims();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(dims.size()));
  for (auto d : dims)
    put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.num_classes()));
  for_each_tensor(params, [&](std::size_t, std::span<const double> t) {
    for (double v : t)
      put<double>(out, v);
  });
  return out;
}

ModelParams decode_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  r.expect_magic();
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw ParseError("unsupported checkpoint version " + std::to_string(version));
  const auto n_dims = r.get<std::uint32_t>();
  if (n_dims < 2 || n_dims > 64)
    throw ParseError("implausible layer count in checkpoint");
  std::vector<std::size_t> dims(n_dims);
  for (auto& d : dims)
    d = r.get<std::uint32_t>();
  const auto m = r.get<std::uint32_t>();
  ModelParams p = init_params(dims, m, 0);
  for_each_tensor(p, [&](std::size_t, std::span<double> t) {
    for (double& v : t)
      v = r.get<double>();
  });
  if (!r.at_end())
    throw ParseError("trailing bytes after checkpoint parameters");
  return p;
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f)
    throw Error("cannot open " + path.string() + " for writing");
  const std::string bytes = encode_checkpoint(params);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f)
    throw Error("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

} // namespace fedlsm
