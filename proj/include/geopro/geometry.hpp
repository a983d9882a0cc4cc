/**
 * Rigid-body geometry on C-alpha traces: spherical placement, random
 * isometries, Kabsch superposition, RMSD and TM-score.
 */
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "geopro/rng.hpp"
#include "geopro/tensor.hpp"

namespace geopro {

using Point3 = Eigen::Vector3d;
using PointList = std::vector<Point3>;

/// p -> R p + t with R orthogonal (det +1 or -1).
struct RigidTransform {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Point3 translation = Point3::Zero();

    static RigidTransform identity() { return {}; }
    Point3 apply(const Point3& p) const { return rotation * p + translation; }
    RigidTransform inverse() const;
    bool is_reflection() const { return rotation.determinant() < 0; }
};

/// center + r (sin w1 cos w2, sin w1 sin w2, cos w1).
Point3 sample_sphere_point(const Point3& center, double radius, double polar, double azimuth);

/// Uniform proper rotation (random unit quaternion), translation uniform in [-10, 10]^3.
/// With `reflect` the rotation is composed with a mirror so det(R) = -1.
RigidTransform random_rigid(Rng& rng, bool reflect = false);

/// Rotation by `angle` radians about a unit `axis`.
Eigen::Matrix3d axis_angle(const Point3& axis, double angle);

PointList apply_rigid(const RigidTransform& transform, std::span<const Point3> points);

struct Superposition {
    RigidTransform transform;  // maps the mobile set onto the target set
    double rmsd = 0.0;
};

/// Optimal proper rotation + translation taking `mobile` onto `target`.
/// Throws ContractError on length mismatch or < 3 points and DegeneracyError
/// when either set has rank < 2 after centering.
Superposition kabsch(std::span<const Point3> mobile, std::span<const Point3> target);

/// Plain RMSD in the given frame, no superposition.
double rmsd_in_place(std::span<const Point3> a, std::span<const Point3> b);

/// d0 = max(0.5, 1.24 (L - 15)^(1/3) - 1.8).
double tm_d0(std::size_t target_length);

struct TmOptions {
    /// Re-superpose on pairs with d < 2 d0 until the pair set stops changing; keep best.
    bool iterative = false;
    int max_iterations = 20;
};

double tm_score(std::span<const Point3> model, std::span<const Point3> target,
                std::size_t target_length, const TmOptions& options = {});

ad::Tensor points_to_tensor(std::span<const Point3> points, bool requires_grad = false);
PointList tensor_to_points(const ad::Tensor& coords);

}  // namespace geopro
