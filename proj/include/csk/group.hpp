#pragma once

#include <random>

#include <Eigen/Dense>

#include "csk/algebra.hpp"

namespace csk {

inline constexpr double kGroupTolerance = 1e-10;

// Element of O(p,q) stored as an explicit d x d matrix.
struct GroupElement {
  Signature sig;
  Eigen::MatrixXd matrix;
};

// Frobenius norm of g^T Delta g - Delta.
double metric_defect(const Signature& sig, const Eigen::MatrixXd& m);
// Throws unless m preserves the metric and |det m| = 1 within tol.
GroupElement make_group_element(const Signature& sig, Eigen::MatrixXd m,
                                double tol = kGroupTolerance);
void validate(const GroupElement& g, double tol = kGroupTolerance);

GroupElement identity_element(const Signature& sig);
GroupElement compose(const GroupElement& g2, const GroupElement& g1);  // g2 * g1
// Delta g^T Delta
GroupElement inverse(const GroupElement& g);
Eigen::VectorXd act(const GroupElement& g, std::span<const double> v);

// Rotation by `angle` in the (i, j) plane; both axes must share a metric sign.
GroupElement givens(const Signature& sig, int i, int j, double angle);
GroupElement reflection(const Signature& sig, int axis);
// exp(rapidity * (E_ij + E_ji)) for a +axis i and a -axis j.
GroupElement boost(const Signature& sig, int i, int j, double rapidity);

// Scaling-and-squaring Taylor exponential, converged to ~1e-14 relative.
Eigen::MatrixXd matrix_exp(const Eigen::MatrixXd& a);

using Rng = std::mt19937_64;

// Product of Givens rotations with uniform angles inside the +block and the
// -block, optionally followed by random axis reflections.
GroupElement sample_rotation(const Signature& sig, Rng& rng, bool reflections = true);
// Boost with rapidity uniform in [-max_rapidity, max_rapidity] between a random
// +axis and a random -axis.
GroupElement sample_boost(const Signature& sig, double max_rapidity, Rng& rng);
// rotation * boost * rotation for mixed signatures, plain rotation otherwise.
GroupElement sample_group_element(const Signature& sig, Rng& rng, double max_rapidity = 2.0);

// rho_cl(g) in the ascending-mask blade basis; column A is the product of g e_i, i in A.
struct CliffordRep {
  Signature sig;
  Eigen::MatrixXd matrix;
};

CliffordRep rho_cl_matrix(const GroupElement& g);
Multivector apply(const CliffordRep& rep, const Multivector& x);
// rho_cl applied independently to each of `channels` multivectors
Eigen::MatrixXd rho_cl_channels(const CliffordRep& rep, int channels);

// rho_cl^{c_out}(g) K rho_cl^{c_in}(g)^{-1}
Eigen::MatrixXd rho_hom_apply(const GroupElement& g, const Eigen::MatrixXd& op, int c_in,
                              int c_out);

nlohmann::json to_json(const GroupElement& g);
GroupElement group_element_from_json(const nlohmann::json& j);

}  // namespace csk
