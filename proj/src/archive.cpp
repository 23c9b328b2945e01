#include "gatas/archive.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "gatas/error.hpp"

namespace gatas::nn {

namespace {

constexpr std::array<char, 8> kMagic{'G', 'A', 'T', 'A', 'S', 'C', 'K', '\0'};
constexpr std::uint32_t kVersion = 1;

enum class DType : std::uint8_t { kFloat32 = 0, kFloat64 = 1 };

template <typename T>
void put(std::ostream& out, T value) {
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T get(std::istream& in) {
  std::array<char, sizeof(T)> bytes;
  if (!in.read(bytes.data(), bytes.size())) throw DataError("truncated checkpoint");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  const auto size = get<std::uint32_t>(in);
  if (size > (1u << 28)) throw DataError("corrupt string length in checkpoint");
  std::string s(size, '\0');
  if (!in.read(s.data(), size)) throw DataError("truncated checkpoint");
  return s;
}

}  // namespace

template <typename T>
void save_parameters(const ParameterStore<T>& params, const std::filesystem::path& path,
                     const std::string& metadata) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kVersion);
  put_string(out, metadata);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  constexpr DType dtype = std::is_same_v<T, float> ? DType::kFloat32 : DType::kFloat64;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Parameter<T>& p = params[k];
    put_string(out, p.name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.rows()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.cols()));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(dtype));
    for (Index e = 0; e < p.value.size(); ++e) put<T>(out, p.value.data()[e]);
  }
  if (!out) throw DataError("failed writing " + path.string());
}

template <typename T>
std::string load_parameters(ParameterStore<T>& params, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw DataError(path.string() + " is not a checkpoint");
  }
  if (const auto version = get<std::uint32_t>(in); version != kVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  std::string metadata = get_string(in);
  const auto count = get<std::uint32_t>(in);

  std::map<std::string, Matrix<T>> loaded;
  for (std::uint32_t k = 0; k < count; ++k) {
    std::string name = get_string(in);
    const auto rows = get<std::uint32_t>(in);
    const auto cols = get<std::uint32_t>(in);
    const auto dtype = static_cast<DType>(get<std::uint8_t>(in));
    Matrix<T> value(rows, cols);
    for (Index e = 0; e < value.size(); ++e) {
      if (dtype == DType::kFloat32) {
        value.data()[e] = static_cast<T>(get<float>(in));
      } else if (dtype == DType::kFloat64) {
        value.data()[e] = static_cast<T>(get<double>(in));
      } else {
        throw DataError("unknown dtype in checkpoint");
      }
    }
    loaded.emplace(std::move(name), std::move(value));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw DataError("trailing bytes in checkpoint");

  for (std::size_t k = 0; k < params.size(); ++k) {
    auto it = loaded.find(params[k].name);
    if (it == loaded.end()) {
      throw DimensionMismatch("checkpoint lacks parameter " + params[k].name);
    }
    if (it->second.rows() != params[k].value.rows() ||
        it->second.cols() != params[k].value.cols()) {
      throw DimensionMismatch("parameter " + params[k].name + " has shape [" +
                              std::to_string(it->second.rows()) + " x " +
                              std::to_string(it->second.cols()) + "] in checkpoint, model expects [" +
                              std::to_string(params[k].value.rows()) + " x " +
                              std::to_string(params[k].value.cols()) + "]");
    }
  }
  if (loaded.size() != params.size()) {
    throw DimensionMismatch("checkpoint holds " + std::to_string(loaded.size()) +
                            " parameters, model has " + std::to_string(params.size()));
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    params[k].value = std::move(loaded[params[k].name]);
    params[k].zero_grad();
  }
  return metadata;
}

template void save_parameters(const ParameterStore<float>&, const std::filesystem::path&,
                              const std::string&);
template void save_parameters(const ParameterStore<double>&, const std::filesystem::path&,
                              const std::string&);
template std::string load_parameters(ParameterStore<float>&, const std::filesystem::path&);
template std::string load_parameters(ParameterStore<double>&, const std::filesystem::path&);

}  // namespace gatas::nn
