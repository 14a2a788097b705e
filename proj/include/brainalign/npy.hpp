#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "brainalign/core.hpp"

namespace brainalign {

enum class NpyDtype { F4, F8 };

const char* to_descr(NpyDtype dtype) noexcept;  // "<f4" / "<f8"
NpyDtype dtype_from_descr(std::string_view descr);

/// A dense C-order tensor as stored in an NPY v1.0 file. Values are widened
/// to double on load; float32 payloads widen exactly, so a reload/save cycle
/// at the original dtype reproduces the file bytes.
struct NpyArray {
  std::vector<std::size_t> shape;
  NpyDtype dtype = NpyDtype::F8;
  std::vector<double> values;

  std::size_t size() const noexcept;
  std::size_t ndim() const noexcept { return shape.size(); }
};

/// Parses an in-memory NPY image. Throws Error with codes
///   BAD_MAGIC, BAD_HEADER (Format), UNSUPPORTED_VERSION, UNSUPPORTED_DTYPE,
///   FORTRAN_ORDER (Unsupported), TRUNCATED (Truncation).
NpyArray parse_npy(std::span<const char> bytes);
NpyArray load_npy(const std::filesystem::path& path);

/// Serialises to an NPY v1.0 image. Rejects non-finite values (NONFINITE),
/// including float32 overflow after narrowing.
std::string encode_npy(std::span<const double> values, std::span<const std::size_t> shape,
                       NpyDtype dtype);
void save_npy(const NpyArray& array, const std::filesystem::path& path);
void save_npy(const NpyArray& array, const std::filesystem::path& path, NpyDtype dtype);

/// Convenience for 2-D Eigen data (written row-major). With F4 the values are
/// rounded to float32 so the array matches what a file would hold.
NpyArray to_npy(const Eigen::Ref<const Matrix>& m, NpyDtype dtype = NpyDtype::F8);
Matrix matrix_from_npy(const NpyArray& array);

}  // namespace brainalign
