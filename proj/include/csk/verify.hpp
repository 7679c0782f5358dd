#pragma once

#include <functional>
#include <string>
#include <vector>

#include "csk/conv.hpp"
#include "csk/group.hpp"
#include "csk/kernel.hpp"
#include "csk/train.hpp"

namespace csk {

// Affine grid isometry x -> g x + t with g a signed permutation that only
// mixes axes of equal metric sign and equal grid size.
struct IsometryAction {
  std::vector<int> t;
  GroupElement g;
};

bool is_grid_preserving(const GroupElement& g);
// Every signed permutation of axes within the same metric sign block (the
// linear parts of the grid-preserving group); identity first.
std::vector<GroupElement> grid_linear_parts(const Signature& sig);

// [(t,g) f](x) = rho_cl(g) f(g^-1 (x - t)), indices taken modulo the grid,
// origin at index 0.
MultivectorField transform_field(const IsometryAction& act, const MultivectorField& f);

using FieldMap = std::function<MultivectorField(const MultivectorField&)>;

// |model(act f) - act model(f)| / |model(act f) + act model(f)|; NaN with a
// warning on stderr if the denominator vanishes.
double relative_equivariance_error(const FieldMap& model, const IsometryAction& act,
                                   const MultivectorField& f);

// max over points of |K(gv) - rho_Hom(g) K(v)|_F / max(|K(gv)|_F, |rho_Hom(g) K(v)|_F)
using KernelFn = std::function<Eigen::MatrixXd(std::span<const double>)>;
double steerability_error(const KernelFn& kernel, const GroupElement& g, int c_in, int c_out,
                          const std::vector<std::vector<double>>& points);

// Energy per angular frequency m = 0..128 (+m and -m combined) of the
// (grade_in -> grade_out) entries of a (2,0) kernel, summed over channel
// pairs and over 8 rings at radius R j/8, R = half the support, 256 bilinear
// samples per ring.
std::vector<double> angular_spectrum(const SteerableKernel& k, int grade_in, int grade_out);
double energy_fraction(const std::vector<double>& spectrum, int frequency);
int dominant_frequency(const std::vector<double>& spectrum);

// K2 * K1 with support X1 + X2 - 1, so conv(K2, conv(K1, f)) = conv(K2 * K1, f)
// away from the boundary.
SteerableKernel compose_kernels(const SteerableKernel& k1, const SteerableKernel& k2);

struct CheckReport {
  std::string check;
  Signature sig{2, 0};
  int n_samples = 0;
  double max_err = 0.0;
  double mean_err = 0.0;
  double min_err = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  // Lower-bound checks (negative controls, spectrum dominance) pass when
  // min_err exceeds the threshold instead.
  bool lower_bound = false;
};

nlohmann::json to_json(const CheckReport& r);

// Aggregates errors into a report; non-finite errors fail.
CheckReport make_report(std::string check, const Signature& sig, const std::vector<double>& errs,
                        double tolerance, bool lower_bound = false);

// Suites. Each appends its reports; thresholds are the documented ones.
std::vector<CheckReport> check_algebra(const Signature& sig, int samples, std::uint64_t seed);
std::vector<CheckReport> check_representation(const Signature& sig, int samples,
                                              std::uint64_t seed);
std::vector<CheckReport> check_head(const Signature& sig, int samples, std::uint64_t seed);
std::vector<CheckReport> check_steerability(const Signature& sig, int samples, std::uint64_t seed);
// Two-conv CS-CNN on a periodic grid (16^2 for d = 2, 8^3 for d = 3), every
// linear part paired with a random translation, plus the unstructured-head
// negative control.
std::vector<CheckReport> check_grid_equivariance(const Signature& sig, std::uint64_t seed);
std::vector<CheckReport> check_spectrum(std::uint64_t seed);

// Reverse-mode gradients of loss_value against central differences of the
// given order (2, 4 or 6) and step h. An entry counts as small when
// max(|analytic|, |numeric|) < abs_floor and is then compared absolutely; all
// others relatively.
struct FiniteDifference {
  int order = 6;
  double h = 4e-3;
  double abs_floor = 1e-8;
};
struct GradientCheck {
  std::string tensor;
  std::size_t entries = 0;
  double max_rel = 0.0;  // over large entries
  double max_abs = 0.0;  // over small entries
};
std::vector<GradientCheck> gradient_check(CsCnn& model, std::span<const Sample> batch,
                                          const FiniteDifference& fd = {});
double central_difference(const std::function<double(double)>& f, double h, int order);

// Hand-built frequency-1 kernels on (2,0) for the composition experiment.
SteerableKernel frequency_one_kernel(int from_grade, int to_grade, int size);

inline const std::vector<std::string> kSuites = {"algebra",     "representation", "head",
                                                 "steerability", "equivariance",   "spectrum"};
std::vector<CheckReport> run_suite(const std::string& suite, const Signature& sig,
                                   std::uint64_t seed);

}  // namespace csk
