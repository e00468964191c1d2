#pragma once

#include <Eigen/Core>

namespace kinedeep {

/// Pose parameter vector, laid out in the skeleton's DOF order.
/// Translations are in millimeters, rotations in radians.
using PoseParams = Eigen::VectorXd;

/// J x 3 joint positions in millimeters, one row per joint.
using JointSet = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

/// (3J) x D derivative of the stacked joint coordinates (joint-major, x/y/z
/// per joint) with respect to the pose parameters.
using KinematicsJacobian = Eigen::MatrixXd;

/// Homogeneous 4x4 transform acting on column vectors [x, y, z, 1]^T.
using Transform4 = Eigen::Matrix4d;

}  // namespace kinedeep
