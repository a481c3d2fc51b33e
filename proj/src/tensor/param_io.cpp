#include "cxr/param_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "cxr/error.hpp"

namespace cxr {
namespace {

constexpr char kMagic[8] = {'C', 'X', 'R', 'P', 'A', 'R', 'A', 'M'};

template <typename U>
void put(std::string& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i)
    out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename U>
  U get(const char* what) {
    need(sizeof(U), what);
    U value = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
      value |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(U);
    return value;
  }

  std::string take(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n)
      throw DataError(std::string("parameter container truncated while reading ") + what +
                      " at byte " + std::to_string(pos_));
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_parameters(const std::vector<NamedTensor>& params) {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kParamFormatVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.tensor.rank()));
    for (std::size_t extent : p.tensor.shape()) put<std::uint64_t>(out, extent);
    for (double v : p.tensor.data()) put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

std::vector<NamedTensor> decode_parameters(const std::string& bytes) {
  Reader in(bytes);
  if (in.take(sizeof(kMagic), "magic") != std::string(kMagic, sizeof(kMagic)))
    throw DataError("not a parameter container (bad magic)");
  const auto version = in.get<std::uint32_t>("version");
  if (version != kParamFormatVersion)
    throw DataError("unsupported parameter container version " + std::to_string(version));
  const auto count = in.get<std::uint32_t>("record count");
  std::vector<NamedTensor> params;
  params.reserve(count);
  for (std::uint32_t r = 0; r < count; ++r) {
    const auto name_len = in.get<std::uint32_t>("name length");
    NamedTensor p;
    p.name = in.take(name_len, "name");
    const auto rank = in.get<std::uint32_t>("rank");
    Shape shape(rank);
    for (auto& extent : shape) extent = static_cast<std::size_t>(in.get<std::uint64_t>("extent"));
    std::vector<double> values(element_count(shape));
    for (double& v : values) v = std::bit_cast<double>(in.get<std::uint64_t>("values"));
    p.tensor = Tensor::from_data(std::move(shape), std::move(values));
    params.push_back(std::move(p));
  }
  if (!in.done()) throw DataError("trailing bytes after parameter records");
  return params;
}

void save_parameters(const std::filesystem::path& path, const std::vector<NamedTensor>& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  const std::string bytes = encode_parameters(params);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

std::vector<NamedTensor> load_parameters(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_parameters(bytes);
}

}  // namespace cxr
