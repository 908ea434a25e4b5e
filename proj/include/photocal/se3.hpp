#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "photocal/errors.hpp"

namespace photocal {

using Vector6d = Eigen::Matrix<double, 6, 1>;

// Rigid transform. Tangent increments are ordered (translation, rotation)
// and applied by left multiplication: T' = exp(xi) * T.
class PoseSE3 {
public:
    PoseSE3() : R_(Eigen::Matrix3d::Identity()), t_(Eigen::Vector3d::Zero()) {}
    PoseSE3(const Eigen::Matrix3d& R, const Eigen::Vector3d& t) : R_(R), t_(t) {
        if ((R * R.transpose() - Eigen::Matrix3d::Identity()).norm() > 1e-9 ||
            R.determinant() < 0.0)
            throw DomainError("PoseSE3: rotation not orthonormal");
    }

    const Eigen::Matrix3d& rotation() const { return R_; }
    const Eigen::Vector3d& translation() const { return t_; }

    Eigen::Vector3d operator*(const Eigen::Vector3d& p) const { return R_ * p + t_; }

    PoseSE3 operator*(const PoseSE3& other) const {
        return PoseSE3(reorthonormalize(R_ * other.R_), R_ * other.t_ + t_);
    }

    PoseSE3 inverse() const { return PoseSE3(R_.transpose().eval(), -(R_.transpose() * t_)); }

    static Eigen::Matrix3d hat(const Eigen::Vector3d& w) {
        Eigen::Matrix3d m;
        m << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
        return m;
    }

    static PoseSE3 exp(const Vector6d& xi) {
        const Eigen::Vector3d rho = xi.head<3>();
        const Eigen::Vector3d omega = xi.tail<3>();
        const double theta = omega.norm();
        const Eigen::Matrix3d W = hat(omega);
        Eigen::Matrix3d R, V;
        if (theta < 1e-10) {
            R = Eigen::Matrix3d::Identity() + W + 0.5 * W * W;
            V = Eigen::Matrix3d::Identity() + 0.5 * W;
        } else {
            const double s = std::sin(theta), c = std::cos(theta);
            R = Eigen::Matrix3d::Identity() + (s / theta) * W +
                ((1 - c) / (theta * theta)) * W * W;
            V = Eigen::Matrix3d::Identity() + ((1 - c) / (theta * theta)) * W +
                ((theta - s) / (theta * theta * theta)) * W * W;
        }
        return PoseSE3(reorthonormalize(R), V * rho);
    }

    Vector6d log() const {
        Vector6d xi;
        const double cos_theta = std::clamp((R_.trace() - 1.0) / 2.0, -1.0, 1.0);
        const double theta = std::acos(cos_theta);
        Eigen::Vector3d omega;
        if (theta < 1e-10) {
            omega = Eigen::Vector3d(R_(2, 1) - R_(1, 2), R_(0, 2) - R_(2, 0),
                                    R_(1, 0) - R_(0, 1)) / 2.0;
        } else if (theta > M_PI - 1e-6) {
            // Near pi: extract the axis from R + I.
            const Eigen::Matrix3d A = R_ + Eigen::Matrix3d::Identity();
            int col = 0;
            A.colwise().norm().maxCoeff(&col);
            const Eigen::Vector3d axis = A.col(col).normalized();
            omega = theta * axis;
            const Eigen::Matrix3d Rp = Eigen::AngleAxisd(theta, axis).toRotationMatrix();
            const Eigen::Matrix3d Rm = Eigen::AngleAxisd(theta, (-axis).eval()).toRotationMatrix();
            if ((Rp - R_).norm() > (Rm - R_).norm()) omega = -omega;
        } else {
            omega = theta / (2.0 * std::sin(theta)) *
                    Eigen::Vector3d(R_(2, 1) - R_(1, 2), R_(0, 2) - R_(2, 0),
                                    R_(1, 0) - R_(0, 1));
        }
        const Eigen::Matrix3d W = hat(omega);
        Eigen::Matrix3d V_inv;
        if (theta < 1e-10) {
            V_inv = Eigen::Matrix3d::Identity() - 0.5 * W + (1.0 / 12.0) * W * W;
        } else {
            const double half = theta / 2.0;
            const double cot = half / std::tan(half);
            V_inv = Eigen::Matrix3d::Identity() - 0.5 * W +
                    (1.0 - cot) / (theta * theta) * W * W;
        }
        xi.head<3>() = V_inv * t_;
        xi.tail<3>() = omega;
        return xi;
    }

    double rotation_angle() const {
        return std::acos(std::clamp((R_.trace() - 1.0) / 2.0, -1.0, 1.0));
    }

private:
    static Eigen::Matrix3d reorthonormalize(const Eigen::Matrix3d& R) {
        const Eigen::JacobiSVD<Eigen::Matrix3d> svd(R,
                                                    Eigen::ComputeFullU | Eigen::ComputeFullV);
        Eigen::Matrix3d out = svd.matrixU() * svd.matrixV().transpose();
        if (out.determinant() < 0) {
            Eigen::Matrix3d fix = Eigen::Matrix3d::Identity();
            fix(2, 2) = -1;
            out = svd.matrixU() * fix * svd.matrixV().transpose();
        }
        return out;
    }

    Eigen::Matrix3d R_;
    Eigen::Vector3d t_;
};

}  // namespace photocal
