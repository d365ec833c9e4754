#include "pier/relpose.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <unordered_map>

namespace pier {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

// Uniform-grid nearest neighbor for small planar clouds.
class PointIndex {
public:
    explicit PointIndex(const std::vector<Vec2>& pts, double cell = 0.5)
        : points_(pts), cell_(cell) {
        buckets_.reserve(pts.size() * 2);
        for (std::size_t i = 0; i < pts.size(); ++i)
            buckets_[key(pts[i])].push_back(static_cast<int>(i));
    }

    int nearest(const Vec2& q) const {
        const int qx = static_cast<int>(std::floor(q.x() / cell_));
        const int qy = static_cast<int>(std::floor(q.y() / cell_));
        int best = -1;
        double best_d2 = kInf;
        // Local bucket rings handle the common near-aligned case; anything
        // farther falls through to one linear pass over the cloud.
        for (int ring = 0; ring <= 4; ++ring) {
            if (best >= 0 && std::sqrt(best_d2) <= (ring - 1) * cell_) return best;
            for (int dy = -ring; dy <= ring; ++dy) {
                for (int dx = -ring; dx <= ring; ++dx) {
                    if (std::max(std::abs(dx), std::abs(dy)) != ring) continue;
                    const auto it = buckets_.find(pack(qx + dx, qy + dy));
                    if (it == buckets_.end()) continue;
                    for (int i : it->second) {
                        const double d2 = (points_[i] - q).squaredNorm();
                        if (d2 < best_d2) {
                            best_d2 = d2;
                            best = i;
                        }
                    }
                }
            }
        }
        if (best >= 0 && std::sqrt(best_d2) <= 4.0 * cell_) return best;
        for (std::size_t i = 0; i < points_.size(); ++i) {
            const double d2 = (points_[i] - q).squaredNorm();
            if (d2 < best_d2) {
                best_d2 = d2;
                best = static_cast<int>(i);
            }
        }
        return best;
    }

private:
    static std::int64_t pack(int x, int y) {
        return (static_cast<std::int64_t>(x) << 32) ^ static_cast<std::uint32_t>(y);
    }
    std::int64_t key(const Vec2& p) const {
        return pack(static_cast<int>(std::floor(p.x() / cell_)),
                    static_cast<int>(std::floor(p.y() / cell_)));
    }

    const std::vector<Vec2>& points_;
    double cell_;
    std::unordered_map<std::int64_t, std::vector<int>> buckets_;
};

struct RigidFit {
    double theta = 0.0;
    Vec2 t{0.0, 0.0};
};

// Closed-form least-squares rigid transform from paired points.
RigidFit fit_rigid(const std::vector<Vec2>& from, const std::vector<Vec2>& to) {
    Vec2 cf{0, 0}, ct{0, 0};
    const double n = static_cast<double>(from.size());
    for (std::size_t i = 0; i < from.size(); ++i) {
        cf += from[i];
        ct += to[i];
    }
    cf /= n;
    ct /= n;
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < from.size(); ++i) {
        const Vec2 p = from[i] - cf;
        const Vec2 q = to[i] - ct;
        a += p.x() * q.y() - p.y() * q.x();
        b += p.x() * q.x() + p.y() * q.y();
    }
    RigidFit fit;
    fit.theta = std::atan2(a, b);
    const double c = std::cos(fit.theta), s = std::sin(fit.theta);
    fit.t = ct - Vec2{c * cf.x() - s * cf.y(), s * cf.x() + c * cf.y()};
    return fit;
}

}  // namespace

std::vector<Vec2> scan_points(const Scan& scan) {
    std::vector<Vec2> pts;
    pts.reserve(kScanBeams);
    for (int i = 0; i < kScanBeams; ++i) {
        const float r = scan.ranges[i];
        if (r >= scan.max_range - 1e-3f) continue;
        const double angle = i * (M_PI / 180.0);
        pts.emplace_back(r * std::cos(angle), r * std::sin(angle));
    }
    return pts;
}

IcpResult icp_align_points(const std::vector<Vec2>& query, const std::vector<Vec2>& target,
                           const IcpParams& params) {
    IcpResult best;
    best.status = IcpStatus::PoorFit;
    best.fitness = kInf;
    if (static_cast<int>(query.size()) < params.min_points ||
        static_cast<int>(target.size()) < params.min_points) {
        best.status = IcpStatus::TooFewPoints;
        best.fitness = kInf;
        return best;
    }

    const PointIndex index(target);

    // Local surface direction at each target point (its two nearest
    // neighbors): correspondences pull point-to-line, which avoids the
    // tangential-slide stalls of plain point-to-point on sampled walls.
    std::vector<Vec2> normals(target.size(), Vec2{0, 0});
    for (std::size_t j = 0; j < target.size(); ++j) {
        double d1 = kInf, d2 = kInf;
        Vec2 n1{0, 0}, n2{0, 0};
        for (std::size_t k = 0; k < target.size(); ++k) {
            if (k == j) continue;
            const double d = (target[k] - target[j]).squaredNorm();
            if (d < d1) {
                d2 = d1;
                n2 = n1;
                d1 = d;
                n1 = target[k];
            } else if (d < d2) {
                d2 = d;
                n2 = target[k];
            }
        }
        const Vec2 dir = n2 - n1;
        if (dir.norm() > 1e-9 && std::sqrt(d1) < 1.0)
            normals[j] = Vec2{-dir.y(), dir.x()}.normalized();
    }

    Vec2 cq{0, 0}, ct{0, 0};
    for (const auto& p : query) cq += p;
    for (const auto& p : target) ct += p;
    cq /= static_cast<double>(query.size());
    ct /= static_cast<double>(target.size());

    std::vector<Vec2> moved(query.size());
    std::vector<int> match(query.size());
    std::vector<double> residuals(query.size());

    for (int k = 0; k < params.rotation_starts; ++k) {
        const double theta0 = k * (2.0 * M_PI / params.rotation_starts);
        // Initial guess: rotate, then align cloud centroids.
        const double c0 = std::cos(theta0), s0 = std::sin(theta0);
        Pose2 T{ct.x() - (c0 * cq.x() - s0 * cq.y()), ct.y() - (s0 * cq.x() + c0 * cq.y()),
                theta0};

        double fitness = kInf;
        for (int iter = 0; iter < params.max_iterations; ++iter) {
            for (std::size_t i = 0; i < query.size(); ++i) {
                moved[i] = T.apply(query[i]);
                match[i] = index.nearest(moved[i]);
                residuals[i] = (moved[i] - target[static_cast<std::size_t>(match[i])]).norm();
            }
            // Trim outliers (partial overlap, wall ends) at 3x the median.
            std::vector<double> sorted = residuals;
            std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
            const double cutoff = std::max(3.0 * sorted[sorted.size() / 2], 0.05);

            // One Gauss-Newton step of the point-to-line objective.
            Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
            Eigen::Vector3d g = Eigen::Vector3d::Zero();
            int used = 0;
            const double c = std::cos(T.theta), s = std::sin(T.theta);
            for (std::size_t i = 0; i < query.size(); ++i) {
                if (residuals[i] > cutoff) continue;
                const std::size_t j = static_cast<std::size_t>(match[i]);
                Vec2 n = normals[j];
                const Vec2 r_vec = moved[i] - target[j];
                if (n.squaredNorm() < 0.5) {
                    const double len = r_vec.norm();
                    if (len < 1e-12) continue;
                    n = r_vec / len;  // isolated target point: point-to-point pull
                }
                const double b = n.dot(r_vec);
                // d(moved)/dtheta = R'(theta) * q
                const Vec2 dq{-s * query[i].x() - c * query[i].y(),
                              c * query[i].x() - s * query[i].y()};
                const Eigen::Vector3d jrow{n.dot(dq), n.x(), n.y()};
                h += jrow * jrow.transpose();
                g += jrow * b;
                ++used;
            }
            if (used < 3) break;
            h.diagonal().array() += 1e-12;
            const Eigen::Vector3d delta = h.ldlt().solve(-g);
            T = Pose2{T.x + delta[1], T.y + delta[2], T.theta + delta[0]};

            double sum = 0.0;
            for (std::size_t i = 0; i < query.size(); ++i)
                sum += (T.apply(query[i]) - target[static_cast<std::size_t>(match[i])]).norm();
            const double new_fitness = sum / static_cast<double>(query.size());
            if (std::abs(fitness - new_fitness) < params.convergence_tol &&
                delta.norm() < 1e-10)
                iter = params.max_iterations;  // converged
            fitness = new_fitness;
        }

        // Final fitness for the gate: mean fresh nearest-neighbor residual.
        double sum = 0.0;
        for (std::size_t i = 0; i < query.size(); ++i) {
            const Vec2 p = T.apply(query[i]);
            sum += (p - target[static_cast<std::size_t>(index.nearest(p))]).norm();
        }
        const double final_fitness = sum / static_cast<double>(query.size());
        if (final_fitness < best.fitness) {
            best.fitness = final_fitness;
            best.transform = T;
        }
    }

    if (best.fitness > params.reject_fitness) {
        best.status = IcpStatus::PoorFit;
        return best;
    }

    // Constraint conditioning of the matched surface: both translation
    // directions must be pinned by normals, otherwise the solution slid.
    Eigen::Matrix2d constraint = Eigen::Matrix2d::Zero();
    for (std::size_t i = 0; i < query.size(); ++i) {
        const Vec2 p = best.transform.apply(query[i]);
        const std::size_t j = static_cast<std::size_t>(index.nearest(p));
        if ((p - target[j]).norm() > 3.0 * best.fitness + 0.05) continue;
        const Vec2 n = normals[j];
        if (n.squaredNorm() < 0.5) continue;
        constraint += n * n.transpose();
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(constraint);
    const double lo = eig.eigenvalues()[0], hi = eig.eigenvalues()[1];
    best.status = (hi <= 0.0 || lo / hi < params.min_constraint_ratio) ? IcpStatus::Degenerate
                                                                       : IcpStatus::Ok;
    return best;
}

IcpResult icp_align(const Scan& query, const Scan& target, const IcpParams& params) {
    return icp_align_points(scan_points(query), scan_points(target), params);
}

std::vector<std::vector<int>> connected_components(const RpGraph& graph) {
    std::vector<int> parent(graph.robot_count);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (const auto& m : graph.measurements) {
        const int a = find(m.from_robot), b = find(m.to_robot);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
    std::vector<std::vector<int>> components;
    std::unordered_map<int, std::size_t> slot;
    for (int r = 0; r < graph.robot_count; ++r) {
        const int root = find(r);
        const auto it = slot.find(root);
        if (it == slot.end()) {
            slot[root] = components.size();
            components.push_back({r});
        } else {
            components[it->second].push_back(r);
        }
    }
    return components;
}

std::vector<RpMeasurement> single_rp_estimation(
    const FhtMap& own_map, int robot, const Vec2& position, const Descriptor& phi, const Scan& psi,
    const std::vector<const FhtMap*>& neighbor_maps, double theta_match,
    const std::function<bool(int, int)>& skip, SingleRpStats* stats, const IcpParams& icp) {
    std::vector<RpMeasurement> out;

    // Own node the estimate hangs off during map merging: containing
    // rectangle preferred, else nearest.
    int observer = -1;
    double observer_d = kInf;
    for (const auto& n : own_map.nodes()) {
        const double d = (n.p - position).norm() - (n.rect.contains(position) ? 1e6 : 0.0);
        if (d < observer_d) {
            observer_d = d;
            observer = n.id;
        }
    }

    for (const FhtMap* neighbor : neighbor_maps) {
        if (!neighbor || neighbor->owner() == robot) continue;
        for (const auto& node : neighbor->nodes()) {
            if (!node.is_main() || !node.features) continue;
            if (skip && skip(neighbor->owner(), node.id)) continue;
            const double r_match = match_descriptors(phi, node.features->phi);
            if (r_match <= theta_match) continue;
            if (stats) ++stats->attempts;
            const IcpResult aligned = icp_align(psi, node.features->psi, icp);
            if (aligned.status != IcpStatus::Ok) {
                if (stats) ++stats->rejected;
                continue;
            }
            // Sensor frames sit at heading zero in their owners' map frames:
            // query at `position` in ours, target at the node position in
            // theirs. Compose out to map-frame-to-map-frame.
            const Pose2 sensor_own{position.x(), position.y(), 0.0};
            const Pose2 sensor_node{node.p.x(), node.p.y(), 0.0};
            RpMeasurement m;
            m.from_robot = robot;
            m.to_robot = neighbor->owner();
            m.transform = sensor_own * aligned.transform.inverse() * sensor_node.inverse();
            m.fitness = aligned.fitness;
            m.source_robot = neighbor->owner();
            m.source_node = node.id;
            m.observer_node = observer;
            out.push_back(m);
        }
    }
    return out;
}

Pose2 PgoResult::pose_of(const PgoProblem& problem, int robot) const {
    for (std::size_t i = 0; i < problem.robots.size(); ++i)
        if (problem.robots[i] == robot) return poses[i];
    throw std::out_of_range("pgo: robot not in component");
}

namespace {

struct Residual {
    Eigen::Vector3d value;                  // [dtheta, dx, dy]
    Eigen::Matrix<double, 3, 3> jac_m;      // wrt (theta_m, x_m, y_m)
    Eigen::Matrix<double, 3, 3> jac_n;      // wrt (theta_n, x_n, y_n)
};

Eigen::Matrix2d rot(double theta) {
    Eigen::Matrix2d r;
    r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
    return r;
}

Eigen::Matrix2d rot_deriv(double theta) {
    Eigen::Matrix2d r;
    r << -std::sin(theta), -std::cos(theta), std::cos(theta), -std::sin(theta);
    return r;
}

// Residual of measurement Z (pose of n's frame in m's frame) against current
// estimates: E = Z^-1 * (T_m^-1 * T_n).
Residual evaluate(const Pose2& tm, const Pose2& tn, const Pose2& z) {
    Residual r;
    const Eigen::Vector2d dm{tn.x - tm.x, tn.y - tm.y};
    const Eigen::Matrix2d rm_inv = rot(-tm.theta);
    const Eigen::Vector2d t_pred = rm_inv * dm;
    const Eigen::Matrix2d rz_inv = rot(-z.theta);
    const Eigen::Vector2d t_err = rz_inv * (t_pred - Eigen::Vector2d{z.x, z.y});

    r.value[0] = normalize_angle(tn.theta - tm.theta - z.theta);
    r.value[1] = t_err.x();
    r.value[2] = t_err.y();

    r.jac_m.setZero();
    r.jac_n.setZero();
    r.jac_m(0, 0) = -1.0;
    r.jac_n(0, 0) = 1.0;
    const Eigen::Matrix2d dt_dtm = -rz_inv * rm_inv;        // wrt (x_m, y_m)
    const Eigen::Matrix2d dt_dtn = rz_inv * rm_inv;         // wrt (x_n, y_n)
    const Eigen::Vector2d dt_dthm = rz_inv * (-rot_deriv(-tm.theta) * dm);
    r.jac_m.block<2, 1>(1, 0) = dt_dthm;
    r.jac_m.block<2, 2>(1, 1) = dt_dtm;
    r.jac_n.block<2, 2>(1, 1) = dt_dtn;
    return r;
}

}  // namespace

PgoResult pgo_solve(const PgoProblem& input, const PgoOptions& options) {
    // Canonical measurement order makes the solve invariant to how the
    // caller assembled the list.
    PgoProblem problem = input;
    std::sort(problem.measurements.begin(), problem.measurements.end(),
              [](const RpMeasurement& a, const RpMeasurement& b) {
                  return std::tie(a.from_robot, a.to_robot, a.source_robot, a.source_node,
                                  a.tick, a.transform.x, a.transform.y, a.transform.theta) <
                         std::tie(b.from_robot, b.to_robot, b.source_robot, b.source_node,
                                  b.tick, b.transform.x, b.transform.y, b.transform.theta);
              });

    const std::size_t n = problem.robots.size();
    if (n == 0) throw std::invalid_argument("pgo: empty component");

    std::unordered_map<int, std::size_t> index;
    for (std::size_t i = 0; i < n; ++i) index[problem.robots[i]] = i;
    for (const auto& m : problem.measurements)
        if (!index.count(m.from_robot) || !index.count(m.to_robot))
            throw std::invalid_argument("pgo: measurement endpoint outside component");

    // Initialize by composing measurements over a BFS tree from the anchor.
    std::vector<Pose2> poses(n);
    std::vector<bool> known(n, false);
    known[0] = true;
    std::queue<std::size_t> frontier;
    frontier.push(0);
    while (!frontier.empty()) {
        const std::size_t u = frontier.front();
        frontier.pop();
        for (const auto& m : problem.measurements) {
            const std::size_t a = index.at(m.from_robot);
            const std::size_t b = index.at(m.to_robot);
            if (a == u && !known[b]) {
                poses[b] = poses[a] * m.transform;  // T_n = T_m * Z
                known[b] = true;
                frontier.push(b);
            } else if (b == u && !known[a]) {
                poses[a] = poses[b] * m.transform.inverse();
                known[a] = true;
                frontier.push(a);
            }
        }
    }
    for (bool k : known)
        if (!k) throw std::invalid_argument("pgo: component not connected by measurements");

    PgoResult result;
    if (n == 1 || problem.measurements.empty()) {
        result.poses = poses;
        result.converged = true;
        result.objective_history.push_back(0.0);
        return result;
    }

    // Positive scaling of the information matrix must not move the argmin;
    // normalizing makes the iterations themselves scale-free.
    const Eigen::Matrix3d omega = problem.omega / problem.omega.norm();
    const Eigen::Matrix3d omega_sqrt = Eigen::LLT<Eigen::Matrix3d>(omega).matrixL().transpose();

    auto objective = [&](const std::vector<Pose2>& ps) {
        double total = 0.0;
        for (const auto& m : problem.measurements) {
            const Residual r =
                evaluate(ps[index.at(m.from_robot)], ps[index.at(m.to_robot)], m.transform);
            const double nrm = (omega_sqrt * r.value).norm();
            total += options.robust_l1 ? nrm : nrm * nrm;
        }
        return total;
    };

    const std::size_t dof = 3 * (n - 1);  // anchor stays at identity
    double current = objective(poses);
    result.objective_history.push_back(current);

    for (int iter = 0; iter < options.max_iterations; ++iter) {
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dof, dof);
        Eigen::VectorXd g = Eigen::VectorXd::Zero(dof);

        for (const auto& m : problem.measurements) {
            const std::size_t a = index.at(m.from_robot);
            const std::size_t b = index.at(m.to_robot);
            const Residual r = evaluate(poses[a], poses[b], m.transform);
            double w = 1.0;
            if (options.robust_l1) {
                const double nrm = (omega_sqrt * r.value).norm();
                w = 1.0 / std::max(nrm, 1e-6);
            }
            const Eigen::Matrix3d info = w * omega;

            auto add_block = [&](std::size_t i, const Eigen::Matrix3d& ji, std::size_t j,
                                 const Eigen::Matrix3d& jj) {
                if (i == 0 || j == 0) return;
                h.block<3, 3>(3 * (i - 1), 3 * (j - 1)) += ji.transpose() * info * jj;
            };
            add_block(a, r.jac_m, a, r.jac_m);
            add_block(a, r.jac_m, b, r.jac_n);
            add_block(b, r.jac_n, a, r.jac_m);
            add_block(b, r.jac_n, b, r.jac_n);
            if (a != 0) g.segment<3>(3 * (a - 1)) += r.jac_m.transpose() * info * r.value;
            if (b != 0) g.segment<3>(3 * (b - 1)) += r.jac_n.transpose() * info * r.value;
        }

        // Tiny Levenberg damping keeps the normal equations well posed.
        h.diagonal().array() += 1e-9;
        const Eigen::VectorXd delta = h.ldlt().solve(-g);
        if (!delta.allFinite()) throw std::runtime_error("pgo: singular normal equations");

        double scale = 1.0;
        std::vector<Pose2> trial(n);
        double trial_obj = 0.0;
        for (int halving = 0; halving < 24; ++halving) {
            trial = poses;
            for (std::size_t i = 1; i < n; ++i) {
                trial[i].theta = normalize_angle(trial[i].theta + scale * delta[3 * (i - 1)]);
                trial[i].x += scale * delta[3 * (i - 1) + 1];
                trial[i].y += scale * delta[3 * (i - 1) + 2];
            }
            trial_obj = objective(trial);
            if (trial_obj <= current + 1e-15) break;
            scale *= 0.5;
        }
        if (trial_obj > current) {  // no descent direction left
            result.converged = true;
            break;
        }
        poses = trial;
        current = trial_obj;
        result.objective_history.push_back(current);
        if (scale * delta.norm() < options.tol) {
            result.converged = true;
            break;
        }
    }

    result.poses = poses;
    return result;
}

}  // namespace pier
