#include "csk/conv.hpp"

#include <cmath>

namespace csk {

Padding parse_padding(const std::string& text) {
  if (text == "zero") return Padding::zero;
  if (text == "circular") return Padding::circular;
  throw Error("unsupported padding '" + text + "'");
}

std::string to_string(Padding padding) {
  return padding == Padding::zero ? "zero" : "circular";
}

std::size_t MultivectorField::points() const {
  std::size_t n = 1;
  for (int y : sizes) n *= y;
  return n;
}

MultivectorField make_field(const Signature& sig, int channels, std::vector<int> sizes) {
  if (static_cast<int>(sizes.size()) != sig.dim()) throw Error("field rank must equal p+q");
  if (channels < 1) throw Error("field needs at least one channel");
  MultivectorField f{sig, channels, std::move(sizes), {}};
  for (int y : f.sizes) {
    if (y < 1) throw Error("field sizes must be positive");
  }
  f.data.assign(channels * f.points() * f.blades(), 0.0);
  return f;
}

double l2_norm(const MultivectorField& f) {
  double s = 0.0;
  for (double v : f.data) s += v * v;
  return std::sqrt(s);
}

static void check_compatible(const MultivectorField& a, const MultivectorField& b) {
  if (!(a.sig == b.sig) || a.channels != b.channels || a.sizes != b.sizes) {
    throw Error("field shapes differ");
  }
}

MultivectorField operator+(const MultivectorField& a, const MultivectorField& b) {
  check_compatible(a, b);
  MultivectorField out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
  return out;
}

MultivectorField operator-(const MultivectorField& a, const MultivectorField& b) {
  check_compatible(a, b);
  MultivectorField out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b.data[i];
  return out;
}

MultivectorField operator*(double s, const MultivectorField& a) {
  MultivectorField out = a;
  for (double& v : out.data) v *= s;
  return out;
}

std::vector<std::ptrdiff_t> correlation_taps(std::span<const int> field, std::span<const int> kernel,
                                             Padding padding) {
  const std::size_t d = field.size();
  if (kernel.size() != d) throw Error("kernel and field rank differ");
  std::size_t points = 1, taps = 1;
  for (std::size_t a = 0; a < d; ++a) {
    if (kernel[a] % 2 == 0) throw Error("kernel sizes must be odd");
    if (padding == Padding::circular && kernel[a] > field[a]) {
      throw Error("circular padding needs the kernel to fit inside the field");
    }
    points *= field[a];
    taps *= kernel[a];
  }

  std::vector<std::ptrdiff_t> table(points * taps);
  std::vector<int> u(d, 0);
  for (std::size_t p = 0; p < points; ++p) {
    std::vector<int> t(d, 0);
    for (std::size_t k = 0; k < taps; ++k) {
      std::ptrdiff_t src = 0;
      bool inside = true;
      for (std::size_t a = 0; a < d; ++a) {
        int s = u[a] + t[a] - (kernel[a] - 1) / 2;
        if (s < 0 || s >= field[a]) {
          if (padding == Padding::zero) {
            inside = false;
            break;
          }
          s = ((s % field[a]) + field[a]) % field[a];
        }
        src = src * field[a] + s;
      }
      table[p * taps + k] = inside ? src : -1;
      for (std::ptrdiff_t a = static_cast<std::ptrdiff_t>(d) - 1; a >= 0; --a) {
        if (++t[a] < kernel[a]) break;
        t[a] = 0;
      }
    }
    for (std::ptrdiff_t a = static_cast<std::ptrdiff_t>(d) - 1; a >= 0; --a) {
      if (++u[a] < field[a]) break;
      u[a] = 0;
    }
  }
  return table;
}

namespace {

inline double correlate_point(std::span<const double> in, std::span<const double> w, int c_in,
                              int o, std::span<const std::ptrdiff_t> taps, std::size_t points,
                              std::size_t p) {
  const std::size_t n_taps = taps.size() / points;
  const std::ptrdiff_t* row = taps.data() + p * n_taps;
  double acc = 0.0;
  for (int i = 0; i < c_in; ++i) {
    const double* wi = w.data() + (static_cast<std::size_t>(o) * c_in + i) * n_taps;
    const double* xi = in.data() + static_cast<std::size_t>(i) * points;
    for (std::size_t t = 0; t < n_taps; ++t) {
      if (row[t] >= 0) acc += wi[t] * xi[row[t]];
    }
  }
  return acc;
}

void check_correlation(std::span<const double> in, std::span<const double> w,
                       std::span<double> out, int c_in, int c_out,
                       std::span<const std::ptrdiff_t> taps, std::size_t points) {
  if (points == 0 || taps.size() % points != 0) throw Error("bad correlation tap table");
  const std::size_t n_taps = taps.size() / points;
  if (in.size() != c_in * points || out.size() != c_out * points ||
      w.size() != static_cast<std::size_t>(c_out) * c_in * n_taps) {
    throw Error("correlation operand shapes do not match");
  }
}

}  // namespace

void correlate(std::span<const double> in, std::span<const double> w, std::span<double> out,
               int c_in, int c_out, std::span<const std::ptrdiff_t> taps, std::size_t points) {
  check_correlation(in, w, out, c_in, c_out, taps, points);
  const auto total = static_cast<std::ptrdiff_t>(c_out * points);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t job = 0; job < total; ++job) {
    const int o = static_cast<int>(job / points);
    const std::size_t p = job % points;
    out[job] = correlate_point(in, w, c_in, o, taps, points, p);
  }
}

void correlate_serial(std::span<const double> in, std::span<const double> w,
                      std::span<double> out, int c_in, int c_out,
                      std::span<const std::ptrdiff_t> taps, std::size_t points) {
  check_correlation(in, w, out, c_in, c_out, taps, points);
  for (int o = 0; o < c_out; ++o) {
    for (std::size_t p = 0; p < points; ++p) {
      out[o * points + p] = correlate_point(in, w, c_in, o, taps, points, p);
    }
  }
}

SteerableKernel flip(const SteerableKernel& k) {
  SteerableKernel out = k;
  const std::size_t n = k.points();
  const std::size_t d = k.sizes.size();
  std::vector<int> idx(d, 0);
  for (std::size_t p = 0; p < n; ++p) {
    std::size_t mirrored = 0;
    for (std::size_t a = 0; a < d; ++a) mirrored = mirrored * k.sizes[a] + (k.sizes[a] - 1 - idx[a]);
    for (std::size_t r = 0; r < k.rows(); ++r) {
      for (std::size_t c = 0; c < k.cols(); ++c) out.at(r, c, mirrored) = k.at(r, c, p);
    }
    for (std::ptrdiff_t a = static_cast<std::ptrdiff_t>(d) - 1; a >= 0; --a) {
      if (++idx[a] < k.sizes[a]) break;
      idx[a] = 0;
    }
  }
  return out;
}

std::vector<double> to_channel_major(const MultivectorField& f) {
  const std::size_t n = f.points(), b = f.blades();
  std::vector<double> out(f.data.size());
  for (int c = 0; c < f.channels; ++c) {
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t a = 0; a < b; ++a) out[(c * b + a) * n + p] = f.data[(c * n + p) * b + a];
    }
  }
  return out;
}

MultivectorField from_channel_major(const Signature& sig, int channels,
                                    const std::vector<int>& sizes, std::span<const double> data) {
  MultivectorField f = make_field(sig, channels, sizes);
  if (data.size() != f.data.size()) throw Error("channel-major data has wrong size");
  const std::size_t n = f.points(), b = f.blades();
  for (int c = 0; c < channels; ++c) {
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t a = 0; a < b; ++a) f.data[(c * n + p) * b + a] = data[(c * b + a) * n + p];
    }
  }
  return f;
}

namespace {

MultivectorField conv_impl(const MultivectorField& f, const SteerableKernel& k, Padding padding,
                           bool parallel) {
  if (!(f.sig == k.sig)) throw Error("field and kernel signatures differ");
  if (f.channels != k.c_in) {
    throw Error("kernel expects " + std::to_string(k.c_in) + " input channels, field has " +
                std::to_string(f.channels));
  }
  const auto taps = correlation_taps(f.sizes, k.sizes, padding);
  const SteerableKernel flipped = flip(k);
  const auto in = to_channel_major(f);
  std::vector<double> out(k.rows() * f.points());
  const int c_in = static_cast<int>(k.cols()), c_out = static_cast<int>(k.rows());
  if (parallel) {
    correlate(in, flipped.data, out, c_in, c_out, taps, f.points());
  } else {
    correlate_serial(in, flipped.data, out, c_in, c_out, taps, f.points());
  }
  return from_channel_major(f.sig, k.c_out, f.sizes, out);
}

}  // namespace

MultivectorField conv_forward(const MultivectorField& f, const SteerableKernel& k,
                              Padding padding) {
  return conv_impl(f, k, padding, true);
}

MultivectorField conv_forward_serial(const MultivectorField& f, const SteerableKernel& k,
                                     Padding padding) {
  return conv_impl(f, k, padding, false);
}

MultivectorField apply_activation(const MultivectorField& f) {
  MultivectorField out = f;
  const std::size_t n = f.points(), b = f.blades();
  for (int c = 0; c < f.channels; ++c) {
    for (std::size_t p = 0; p < n; ++p) {
      double* x = out.data.data() + (c * n + p) * b;
      const double gate = normal_cdf(x[0]);
      for (std::size_t a = 0; a < b; ++a) x[a] *= gate;
    }
  }
  return out;
}

MultivectorField model_forward(std::span<const Layer> layers, const MultivectorField& f) {
  MultivectorField h = f;
  for (const Layer& layer : layers) {
    if (const auto* conv = std::get_if<ConvLayer>(&layer.op)) {
      h = conv_forward(h, conv->kernel, conv->padding);
      if (!conv->bias.empty()) {
        if (conv->bias.size() != static_cast<std::size_t>(h.channels)) {
          throw Error("bias length must equal output channels");
        }
        for (int c = 0; c < h.channels; ++c) {
          for (std::size_t p = 0; p < h.points(); ++p) h.at(c, p, 0) += conv->bias[c];
        }
      }
    } else if (std::holds_alternative<ActivationLayer>(layer.op)) {
      h = apply_activation(h);
    } else {
      const auto& block = std::get<ResidualBlock>(layer.op);
      MultivectorField inner = model_forward(block.body, h);
      if (inner.channels != h.channels) throw Error("channel mismatch at residual join");
      h = inner + h;
    }
  }
  return h;
}

}  // namespace csk
