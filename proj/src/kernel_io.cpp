#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "csk/io.hpp"

namespace csk {

namespace {

static_assert(std::endian::native == std::endian::little, "blob IO assumes a little-endian host");

void put_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }

std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), 4)) throw Error("truncated blob header");
  return v;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  return out;
}

void write_header(std::ostream& out, BlobKind kind, const Signature& sig, int c_in, int c_out,
                  const std::vector<int>& sizes) {
  out.write("CSKB", 4);
  put_u32(out, kBlobVersion);
  put_u32(out, static_cast<std::uint32_t>(kind));
  put_u32(out, sig.p);
  put_u32(out, sig.q);
  put_u32(out, c_in);
  put_u32(out, c_out);
  put_u32(out, static_cast<std::uint32_t>(sizes.size()));
  for (int s : sizes) put_u32(out, s);
}

void write_payload(std::ostream& out, const std::vector<double>& data) {
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
}

void write_npy_array(const std::filesystem::path& path, const std::vector<std::size_t>& shape,
                     const std::vector<double>& data) {
  std::string dims;
  for (std::size_t s : shape) dims += std::to_string(s) + ", ";
  dims.resize(dims.size() - (shape.size() > 1 ? 2 : 1));
  std::string header = "{'descr': '<f8', 'fortran_order': False, 'shape': (" + dims + "), }";
  const std::size_t total = 10 + header.size() + 1;
  header.append((64 - total % 64) % 64, ' ');
  header += '\n';

  auto out = open_out(path);
  out.write("\x93NUMPY\x01\x00", 8);
  const auto len = static_cast<std::uint16_t>(header.size());
  out.write(reinterpret_cast<const char*>(&len), 2);
  out << header;
  write_payload(out, data);
}

}  // namespace

void write_blob(const std::filesystem::path& path, const SteerableKernel& k) {
  auto out = open_out(path);
  write_header(out, BlobKind::kernel, k.sig, k.c_in, k.c_out, k.sizes);
  write_payload(out, k.data);
}

void write_blob(const std::filesystem::path& path, const MultivectorField& f) {
  auto out = open_out(path);
  write_header(out, BlobKind::field, f.sig, f.channels, 0, f.sizes);
  write_payload(out, f.data);
}

std::variant<SteerableKernel, MultivectorField> read_blob(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "CSKB", 4) != 0) throw Error("not a CSKB blob");
  if (get_u32(in) != kBlobVersion) throw Error("unsupported blob version");
  const auto kind = static_cast<BlobKind>(get_u32(in));
  const int p = static_cast<int>(get_u32(in));
  const int q = static_cast<int>(get_u32(in));
  const int c_in = static_cast<int>(get_u32(in));
  const int c_out = static_cast<int>(get_u32(in));
  const std::uint32_t ndim = get_u32(in);
  const Signature sig(p, q);
  if (ndim != static_cast<std::uint32_t>(sig.dim())) throw Error("blob rank does not match p+q");
  std::vector<int> sizes(ndim);
  for (auto& s : sizes) s = static_cast<int>(get_u32(in));

  auto read_data = [&](std::vector<double>& data) {
    if (!in.read(reinterpret_cast<char*>(data.data()),
                 static_cast<std::streamsize>(data.size() * sizeof(double)))) {
      throw Error("truncated blob payload");
    }
    if (in.peek() != std::char_traits<char>::eof()) throw Error("trailing bytes after blob payload");
  };

  if (kind == BlobKind::kernel) {
    SteerableKernel k = make_zero_kernel(sig, c_in, c_out, sizes);
    read_data(k.data);
    return k;
  }
  if (kind == BlobKind::field) {
    MultivectorField f = make_field(sig, c_in, sizes);
    read_data(f.data);
    return f;
  }
  throw Error("unknown blob kind");
}

SteerableKernel read_kernel_blob(const std::filesystem::path& path) {
  auto blob = read_blob(path);
  if (auto* k = std::get_if<SteerableKernel>(&blob)) return std::move(*k);
  throw Error("'" + path.string() + "' holds a field, not a kernel");
}

MultivectorField read_field_blob(const std::filesystem::path& path) {
  auto blob = read_blob(path);
  if (auto* f = std::get_if<MultivectorField>(&blob)) return std::move(*f);
  throw Error("'" + path.string() + "' holds a kernel, not a field");
}

void write_npy(const std::filesystem::path& path, const SteerableKernel& k) {
  std::vector<std::size_t> shape{k.rows(), k.cols()};
  for (int s : k.sizes) shape.push_back(s);
  write_npy_array(path, shape, k.data);
}

void write_npy(const std::filesystem::path& path, const MultivectorField& f) {
  std::vector<std::size_t> shape{static_cast<std::size_t>(f.channels)};
  for (int s : f.sizes) shape.push_back(s);
  shape.push_back(f.blades());
  write_npy_array(path, shape, f.data);
}

std::size_t write_pgm_blocks(const std::filesystem::path& dir, const SteerableKernel& k) {
  std::filesystem::create_directories(dir);
  double scale = 0.0;
  for (double v : k.data) scale = std::max(scale, std::abs(v));
  const int height = k.sizes.empty() ? 1 : k.sizes[0];
  const int width = static_cast<int>(k.points()) / height;
  const std::size_t n = k.sig.algebra_dim();

  std::size_t count = 0;
  for (std::size_t r = 0; r < k.rows(); ++r) {
    for (std::size_t c = 0; c < k.cols(); ++c) {
      const std::string name = "o" + std::to_string(r / n) + "_" + blade_name(r % n) + "__i" +
                               std::to_string(c / n) + "_" + blade_name(c % n) + ".pgm";
      auto out = open_out(dir / name);
      out << "P5\n" << width << " " << height << "\n255\n";
      for (std::size_t p = 0; p < k.points(); ++p) {
        const double v = scale > 0.0 ? k.at(r, c, p) / scale : 0.0;
        const long level = std::lround(127.5 + 127.5 * v);
        out.put(static_cast<char>(static_cast<unsigned char>(std::clamp(level, 0L, 255L))));
      }
      ++count;
    }
  }
  return count;
}

void write_csv(const std::filesystem::path& path, const SteerableKernel& k) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << "row,col";
  for (std::size_t a = 0; a < k.sizes.size(); ++a) out << ",i" << a + 1;
  out << ",value\n";
  char buf[32];
  for (std::size_t r = 0; r < k.rows(); ++r) {
    for (std::size_t c = 0; c < k.cols(); ++c) {
      std::vector<int> idx(k.sizes.size(), 0);
      for (std::size_t p = 0; p < k.points(); ++p) {
        out << r << "," << c;
        for (int i : idx) out << "," << i;
        std::snprintf(buf, sizeof buf, "%.17g", k.at(r, c, p));
        out << "," << buf << "\n";
        for (std::ptrdiff_t a = static_cast<std::ptrdiff_t>(idx.size()) - 1; a >= 0; --a) {
          if (++idx[a] < k.sizes[a]) break;
          idx[a] = 0;
        }
      }
    }
  }
}

}  // namespace csk
