#pragma once

#include <filesystem>
#include <string>

#include "gatas/tensor.hpp"

namespace gatas::nn {

/// Writes every parameter as (name, shape, dtype, raw little-endian values),
/// preceded by a free-form metadata string.
template <typename T>
void save_parameters(const ParameterStore<T>& params, const std::filesystem::path& path,
                     const std::string& metadata = {});

/// Loads values into an already-shaped store. Missing, extra, or reshaped
/// tensors raise DimensionMismatch; unreadable files raise DataError.
/// Returns the stored metadata string.
template <typename T>
std::string load_parameters(ParameterStore<T>& params, const std::filesystem::path& path);

}  // namespace gatas::nn
