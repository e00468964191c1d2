#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "kinedeep/dataset.h"
#include "kinedeep/error.h"
#include "kinedeep/kinematics.h"
#include "support/fd_oracle.h"
#include "support/naive_fk.h"
#include "support/test_skeletons.h"

namespace kinedeep {
namespace {

constexpr double kPi = std::numbers::pi;

Eigen::Vector3d apply(const Transform4& m, const Eigen::Vector3d& p) {
  return (m * p.homogeneous()).head<3>();
}

TEST(Rot, ZeroIsIdentity) {
  EXPECT_TRUE(rot(Axis::Z, 0.0).isIdentity(0.0));
}

TEST(Rot, QuarterTurnAboutZ) {
  const Eigen::Vector3d p = apply(rot(Axis::Z, kPi / 2), Eigen::Vector3d::UnitX());
  EXPECT_NEAR(p.x(), 0.0, 1e-15);
  EXPECT_NEAR(p.y(), 1.0, 1e-15);
  EXPECT_NEAR(p.z(), 0.0, 1e-15);
}

TEST(Rot, InverseAngleCancels) {
  EXPECT_TRUE((rot(Axis::X, 0.3) * rot(Axis::X, -0.3)).isIdentity(1e-15));
}

TEST(Rot, MatchesAngleAxis) {
  for (Axis axis : {Axis::X, Axis::Y, Axis::Z}) {
    Eigen::Vector3d unit = Eigen::Vector3d::Zero();
    unit[static_cast<int>(axis)] = 1.0;
    const Eigen::Matrix3d expected = Eigen::AngleAxisd(0.7, unit).toRotationMatrix();
    const Eigen::Matrix3d actual = rot(axis, 0.7).topLeftCorner(3, 3);
    EXPECT_TRUE(actual.isApprox(expected, 1e-15));
  }
}

TEST(Trans, Examples) {
  EXPECT_TRUE(trans(Axis::X, 0.0).isIdentity(0.0));
  EXPECT_EQ(apply(trans(Axis::X, 5.0), Eigen::Vector3d::Zero()), Eigen::Vector3d(5.0, 0.0, 0.0));
  EXPECT_TRUE((trans(Axis::X, 2.0) * trans(Axis::X, 3.5)).isApprox(trans(Axis::X, 5.5), 0.0));
}

TEST(Drot, AtZeroAboutZ) {
  Transform4 expected = Transform4::Zero();
  expected(0, 1) = -1.0;
  expected(1, 0) = 1.0;
  EXPECT_LT((drot(Axis::Z, 0.0) - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Drot, MatchesFiniteDifferences) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> angle(-kPi, kPi);
  const double h = 1e-6;
  for (Axis axis : {Axis::X, Axis::Y, Axis::Z}) {
    for (int trial = 0; trial < 20; ++trial) {
      const double a = angle(rng);
      const Transform4 fd = (rot(axis, a + h) - rot(axis, a - h)) / (2.0 * h);
      EXPECT_LT((drot(axis, a) - fd).cwiseAbs().maxCoeff(), 1e-8);
    }
  }
}

TEST(Drot, XLeavesFirstRowAndColumnZero) {
  const Transform4 d = drot(Axis::X, 0.4);
  const Eigen::Matrix3d r = d.topLeftCorner(3, 3);
  EXPECT_EQ(r.row(0).norm(), 0.0);
  EXPECT_EQ(r.col(0).norm(), 0.0);
}

TEST(ForwardKinematics, StraightChain) {
  const Skeleton chain = testing::planarChain({10.0, 20.0, 30.0});
  const JointSet joints = forwardKinematics(chain, restPose(chain));
  EXPECT_TRUE(joints.row(3).isApprox(Eigen::RowVector3d(60.0, 0.0, 0.0)));
}

TEST(ForwardKinematics, BentChain) {
  const Skeleton chain = testing::planarChain({10.0, 20.0, 30.0});
  PoseParams theta = restPose(chain);
  theta[0] = kPi / 2;
  const JointSet joints = forwardKinematics(chain, theta);
  EXPECT_NEAR(joints(3, 0), 10.0, 1e-12);
  EXPECT_NEAR(joints(3, 1), 50.0, 1e-12);
  EXPECT_NEAR(joints(3, 2), 0.0, 1e-12);
}

TEST(ForwardKinematics, RestPoseMatchesFixture) {
  std::ifstream in(KINEDEEP_SOURCE_DIR "/tests/fixtures/hand23_rest.csv");
  ASSERT_TRUE(in) << "missing rest-pose fixture";
  const Skeleton& hand = defaultHand();
  const JointSet joints = forwardKinematics(hand, restPose(hand));
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') {
      continue;
    }
    std::stringstream fields(line);
    std::string name;
    std::getline(fields, name, ',');
    const auto u = hand.findJoint(name);
    ASSERT_TRUE(u.has_value()) << name;
    for (int c = 0; c < 3; ++c) {
      std::string value;
      std::getline(fields, value, ',');
      EXPECT_NEAR(joints(*u, c), std::stod(value), 1e-9) << name << " axis " << c;
    }
    ++rows;
  }
  EXPECT_EQ(rows, 23);
}

TEST(ForwardKinematics, MatchesNaiveOracleOnRandomPoses) {
  const Skeleton& hand = defaultHand();
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const PoseParams theta = samplePose(hand, seed);
    const JointSet fast = forwardKinematics(hand, theta);
    const JointSet naive = testing::naiveForwardKinematics(hand, theta);
    EXPECT_LT((fast - naive).cwiseAbs().maxCoeff(), 1e-9) << "seed " << seed;
  }
}

TEST(ForwardKinematics, BoneLengthsAreRigid) {
  const Skeleton& hand = defaultHand();
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const JointSet joints = forwardKinematics(hand, samplePose(hand, seed));
    for (int u = 1; u < hand.jointCount(); ++u) {
      const double length = (joints.row(u) - joints.row(hand.joint(u).parent)).norm();
      EXPECT_NEAR(length, hand.joint(u).bone_length, 1e-9) << hand.joint(u).name;
    }
  }
}

TEST(ForwardKinematics, RootTranslationShiftsEveryJoint) {
  const Skeleton& hand = defaultHand();
  PoseParams theta = samplePose(hand, 11);
  const JointSet before = forwardKinematics(hand, theta);
  theta.head<3>() += Eigen::Vector3d(4.0, -7.0, 2.5);
  const JointSet after = forwardKinematics(hand, theta);
  for (int u = 0; u < hand.jointCount(); ++u) {
    EXPECT_TRUE((after.row(u) - before.row(u)).isApprox(Eigen::RowVector3d(4.0, -7.0, 2.5), 1e-12));
  }
}

TEST(ForwardKinematics, RejectsBadPoses) {
  const Skeleton& hand = defaultHand();
  EXPECT_THROW(forwardKinematics(hand, PoseParams::Zero(25)), ValidationError);
  PoseParams theta = restPose(hand);
  theta[7] = std::nan("");
  EXPECT_THROW(forwardKinematics(hand, theta), ValidationError);
}

TEST(FkJacobian, MatchesFiniteDifferences) {
  const Skeleton& hand = defaultHand();
  const auto fk = [&](const Eigen::VectorXd& theta) -> Eigen::VectorXd {
    const JointSet joints = forwardKinematics(hand, theta);
    return Eigen::Map<const Eigen::VectorXd>(joints.data(), joints.size());
  };
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const PoseParams theta = samplePose(hand, 1000 + seed);
    const FkResult result = fkJacobian(hand, theta);
    const Eigen::MatrixXd fd = testing::centralJacobian(fk, theta, 1e-5);
    EXPECT_LT(testing::maxRelativeError(result.jacobian, fd), 1e-6) << "seed " << seed;
    EXPECT_TRUE(result.joints.isApprox(forwardKinematics(hand, theta), 0.0));
  }
}

TEST(FkJacobian, RootTranslationColumnsAreUnitDirections) {
  const Skeleton& hand = defaultHand();
  const FkResult result = fkJacobian(hand, samplePose(hand, 5));
  for (int u = 0; u < hand.jointCount(); ++u) {
    const Eigen::Matrix3d block = result.jacobian.block(3 * u, 0, 3, 3);
    EXPECT_TRUE(block.isIdentity(1e-15)) << hand.joint(u).name;
  }
}

TEST(FkJacobian, FingertipsIgnoreOtherFingers) {
  const Skeleton& hand = defaultHand();
  const FkResult result = fkJacobian(hand, samplePose(hand, 9));
  const std::vector<std::string> fingers = {"thumb", "index", "middle", "ring", "pinky"};
  for (const std::string& finger : fingers) {
    const int tip = *hand.findJoint(finger + "_tip");
    for (int d = 6; d < hand.dofCount(); ++d) {
      const std::string& owner = hand.joint(hand.dofIndex()[static_cast<std::size_t>(d)].joint).name;
      if (!owner.starts_with(finger + "_")) {
        EXPECT_EQ(result.jacobian.middleRows<3>(3 * tip).col(d).norm(), 0.0) << finger << " vs " << owner;
      }
    }
  }
}

TEST(FkJacobian, GradientsAreBounded) {
  // |dp/dtheta| of a rotation DOF is bounded by the distance from its axis,
  // which never exceeds the hand's span plus the root offset.
  const Skeleton& hand = defaultHand();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const FkResult result = fkJacobian(hand, samplePose(hand, seed));
    EXPECT_TRUE(result.jacobian.allFinite());
    EXPECT_LT(result.jacobian.rightCols(hand.dofCount() - 3).cwiseAbs().maxCoeff(), 600.0);
  }
}

TEST(KinematicsWorkspace, AgreesWithFreeFunctions) {
  const Skeleton& hand = defaultHand();
  KinematicsWorkspace workspace(hand);
  JointSet joints;
  KinematicsJacobian jacobian;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const PoseParams theta = samplePose(hand, seed);
    workspace.forwardWithJacobian(theta, joints, jacobian);
    const FkResult expected = fkJacobian(hand, theta);
    EXPECT_EQ(joints, expected.joints);
    EXPECT_EQ(jacobian, expected.jacobian);
    workspace.forward(theta, joints);
    EXPECT_EQ(joints, expected.joints);
  }
}

}  // namespace
}  // namespace kinedeep
