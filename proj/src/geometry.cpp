#include "geopro/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "geopro/errors.hpp"

namespace geopro {

RigidTransform RigidTransform::inverse() const {
    RigidTransform inv;
    inv.rotation = rotation.transpose();
    inv.translation = -(inv.rotation * translation);
    return inv;
}

Point3 sample_sphere_point(const Point3& center, double radius, double polar, double azimuth) {
    if (!(radius > 0)) throw DomainError("sphere radius must be positive");
    return center + radius * Point3(std::sin(polar) * std::cos(azimuth),
                                    std::sin(polar) * std::sin(azimuth), std::cos(polar));
}

RigidTransform random_rigid(Rng& rng, bool reflect) {
    Eigen::Quaterniond q(normal(rng), normal(rng), normal(rng), normal(rng));
    q.normalize();
    RigidTransform t;
    t.rotation = q.toRotationMatrix();
    if (reflect) t.rotation = t.rotation * Eigen::Vector3d(1, 1, -1).asDiagonal();
    t.translation = Point3(uniform(rng, -10, 10), uniform(rng, -10, 10), uniform(rng, -10, 10));
    return t;
}

Eigen::Matrix3d axis_angle(const Point3& axis, double angle) {
    return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

PointList apply_rigid(const RigidTransform& transform, std::span<const Point3> points) {
    PointList out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back(transform.apply(p));
    return out;
}

namespace {

Point3 centroid(std::span<const Point3> pts) {
    Point3 c = Point3::Zero();
    for (const auto& p : pts) c += p;
    return c / static_cast<double>(pts.size());
}

int centered_rank(std::span<const Point3> pts, const Point3& c) {
    Eigen::MatrixXd m(pts.size(), 3);
    for (std::size_t i = 0; i < pts.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = pts[i] - c;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& s = svd.singularValues();
    const double tol = 1e-9 * std::max(1.0, s(0));
    int rank = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) rank += s(i) > tol ? 1 : 0;
    return rank;
}

}  // namespace

Superposition kabsch(std::span<const Point3> mobile, std::span<const Point3> target) {
    if (mobile.size() != target.size()) {
        throw ContractError("kabsch: " + std::to_string(mobile.size()) + " mobile points vs " +
                            std::to_string(target.size()) + " target points");
    }
    if (mobile.size() < 3) throw ContractError("kabsch: need at least 3 points");

    const Point3 cm = centroid(mobile);
    const Point3 ct = centroid(target);
    for (auto [pts, c, label] : {std::tuple{mobile, cm, "mobile"}, std::tuple{target, ct, "target"}}) {
        const int rank = centered_rank(pts, c);
        if (rank < 2) {
            throw DegeneracyError(std::string("kabsch: ") + label + " points have rank " +
                                      std::to_string(rank) + " (collinear or coincident)",
                                  rank);
        }
    }

    Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
    for (std::size_t i = 0; i < mobile.size(); ++i) h += (mobile[i] - cm) * (target[i] - ct).transpose();
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Matrix3d u = svd.matrixU();
    const Eigen::Matrix3d v = svd.matrixV();
    const double d = (v * u.transpose()).determinant() < 0 ? -1.0 : 1.0;

    Superposition out;
    out.transform.rotation = v * Eigen::Vector3d(1, 1, d).asDiagonal() * u.transpose();
    out.transform.translation = ct - out.transform.rotation * cm;
    double ss = 0.0;
    for (std::size_t i = 0; i < mobile.size(); ++i)
        ss += (out.transform.apply(mobile[i]) - target[i]).squaredNorm();
    out.rmsd = std::sqrt(ss / static_cast<double>(mobile.size()));
    return out;
}

double rmsd_in_place(std::span<const Point3> a, std::span<const Point3> b) {
    if (a.size() != b.size()) throw ContractError("rmsd: length mismatch");
    if (a.empty()) return 0.0;
    double ss = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) ss += (a[i] - b[i]).squaredNorm();
    return std::sqrt(ss / static_cast<double>(a.size()));
}

double tm_d0(std::size_t target_length) {
    const double l = static_cast<double>(target_length);
    const double d0 = 1.24 * std::cbrt(l - 15.0) - 1.8;
    return std::max(0.5, d0);
}

namespace {

double score_under(const RigidTransform& t, std::span<const Point3> model,
                   std::span<const Point3> target, double d0, std::size_t norm_len,
                   std::vector<double>* distances) {
    double s = 0.0;
    if (distances) distances->resize(model.size());
    for (std::size_t i = 0; i < model.size(); ++i) {
        const double di = (t.apply(model[i]) - target[i]).norm();
        if (distances) (*distances)[i] = di;
        s += 1.0 / (1.0 + (di / d0) * (di / d0));
    }
    return s / static_cast<double>(norm_len);
}

}  // namespace

double tm_score(std::span<const Point3> model, std::span<const Point3> target,
                std::size_t target_length, const TmOptions& options) {
    if (model.size() != target.size() || model.size() != target_length) {
        throw ContractError("tm_score: lengths must all equal the target length");
    }
    const double d0 = tm_d0(target_length);
    const Superposition sup = kabsch(model, target);
    std::vector<double> dist;
    double best = score_under(sup.transform, model, target, d0, target_length, &dist);
    if (!options.iterative) return best;

    std::vector<std::size_t> selected;
    for (int it = 0; it < options.max_iterations; ++it) {
        std::vector<std::size_t> next;
        for (std::size_t i = 0; i < dist.size(); ++i)
            if (dist[i] < 2.0 * d0) next.push_back(i);
        if (next.size() < 3 || next == selected) break;
        selected = std::move(next);
        PointList sub_m, sub_t;
        for (auto i : selected) {
            sub_m.push_back(model[i]);
            sub_t.push_back(target[i]);
        }
        Superposition local;
        try {
            local = kabsch(sub_m, sub_t);
        } catch (const DegeneracyError&) {
            break;
        }
        best = std::max(best, score_under(local.transform, model, target, d0, target_length, &dist));
    }
    return best;
}

ad::Tensor points_to_tensor(std::span<const Point3> points, bool requires_grad) {
    std::vector<double> data;
    data.reserve(points.size() * 3);
    for (const auto& p : points) data.insert(data.end(), {p.x(), p.y(), p.z()});
    return ad::Tensor({points.size(), 3}, std::move(data), requires_grad);
}

PointList tensor_to_points(const ad::Tensor& coords) {
    if (coords.rank() != 2 || coords.dim(1) != 3) {
        throw DimensionError("expected an [N,3] coordinate tensor, got " +
                             ad::shape_str(coords.shape()));
    }
    PointList out(coords.dim(0));
    auto d = coords.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = Point3(d[3 * i], d[3 * i + 1], d[3 * i + 2]);
    return out;
}

}  // namespace geopro
