#pragma once

#include <filesystem>
#include <string>
#include <variant>

#include "csk/conv.hpp"
#include "csk/kernel.hpp"

namespace csk {

// Binary blob layout, all integers little-endian uint32:
//   magic "CSKB" | version | kind (1 kernel, 2 field) | p | q | c_in | c_out | ndim | sizes[ndim]
// followed by the float64 little-endian payload in row-major order:
//   kernel: (c_out*2^d, c_in*2^d, X_1..X_d)    field: (c, Y_1..Y_d, 2^d), c stored in c_in, c_out = 0
inline constexpr std::uint32_t kBlobVersion = 1;
enum class BlobKind : std::uint32_t { kernel = 1, field = 2 };

void write_blob(const std::filesystem::path& path, const SteerableKernel& k);
void write_blob(const std::filesystem::path& path, const MultivectorField& f);
std::variant<SteerableKernel, MultivectorField> read_blob(const std::filesystem::path& path);
SteerableKernel read_kernel_blob(const std::filesystem::path& path);
MultivectorField read_field_blob(const std::filesystem::path& path);

// NumPy .npy v1.0, '<f8', C order.
void write_npy(const std::filesystem::path& path, const SteerableKernel& k);
void write_npy(const std::filesystem::path& path, const MultivectorField& f);

// One 8-bit binary PGM per (output blade row, input blade column) block: c_in*c_out*4^d files.
// Gray 128 is zero, the scale is symmetric with the largest |value| of the kernel at 0/255.
// Grids with more than two axes are laid out as X_1 rows by X_2*...*X_d columns.
// Returns the number of images written.
std::size_t write_pgm_blocks(const std::filesystem::path& dir, const SteerableKernel& k);

// Columns: row, col, i_1..i_d, value (one line per entry, %.17g).
void write_csv(const std::filesystem::path& path, const SteerableKernel& k);

}  // namespace csk
