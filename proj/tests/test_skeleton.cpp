#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <gtest/gtest.h>

#include "kinedeep/dataset.h"
#include "kinedeep/error.h"
#include "kinedeep/skeleton.h"
#include "support/test_skeletons.h"

namespace kinedeep {
namespace {

std::string minimalConfig(const std::string& joints) {
  return R"({"name": "t", "joints": [)" + joints + "]}";
}

const char* kRoot = R"({"name": "root", "parent": null, "bone_length_mm": 0, "dofs": []})";

void expectValidationError(const std::string& text, const std::string& fragment) {
  try {
    parseSkeleton(text);
    FAIL() << "expected a validation error mentioning '" << fragment << "'";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
  }
}

TEST(Skeleton, DefaultHandDimensions) {
  const Skeleton& hand = defaultHand();
  EXPECT_EQ(hand.jointCount(), 23);
  EXPECT_EQ(hand.dofCount(), 26);
  EXPECT_EQ(static_cast<int>(hand.dofIndex().size()), 26);
  EXPECT_EQ(hand.evalCount(), 14);
}

TEST(Skeleton, DefaultHandHasTwentyJointRotationsBeyondRoot) {
  const Skeleton& hand = defaultHand();
  EXPECT_EQ(hand.joint(0).dofs.size(), 6u);
  int rotations = 0;
  for (int u = 1; u < hand.jointCount(); ++u) {
    for (const DofSpec& dof : hand.joint(u).dofs) {
      EXPECT_EQ(dof.kind, DofKind::Rotation);
      ++rotations;
    }
  }
  EXPECT_EQ(rotations, 20);
}

TEST(Skeleton, FingertipsCarryNoDofs) {
  const Skeleton& hand = defaultHand();
  int tips = 0;
  for (const JointSpec& joint : hand.joints()) {
    if (joint.name.ends_with("_tip")) {
      EXPECT_TRUE(joint.dofs.empty()) << joint.name;
      ++tips;
    }
  }
  EXPECT_EQ(tips, 5);
}

TEST(Skeleton, ShippedConfigMatchesEmbeddedHand) {
  const Skeleton fromFile = loadSkeleton(KINEDEEP_SOURCE_DIR "/configs/hand23.json");
  EXPECT_TRUE(structurallyEqual(fromFile, defaultHand()));
}

TEST(Skeleton, RootOnlyConfig) {
  const Skeleton skeleton = parseSkeleton(minimalConfig(R"({"name": "root", "parent": null, "bone_length_mm": 0,
      "dofs": [{"kind": "translation", "axis": "X", "lower_mm": -1, "upper_mm": 1},
               {"kind": "translation", "axis": "Y", "lower_mm": -1, "upper_mm": 1},
               {"kind": "translation", "axis": "Z", "lower_mm": -1, "upper_mm": 1},
               {"kind": "rotation", "axis": "X", "lower_deg": -180, "upper_deg": 180},
               {"kind": "rotation", "axis": "Y", "lower_deg": -180, "upper_deg": 180},
               {"kind": "rotation", "axis": "Z", "lower_deg": -180, "upper_deg": 180}]})"));
  EXPECT_EQ(skeleton.jointCount(), 1);
  EXPECT_EQ(skeleton.dofCount(), 6);
  EXPECT_EQ(skeleton.evalCount(), 1);
}

TEST(Skeleton, SelfParentIsACycle) {
  expectValidationError(
      minimalConfig(std::string(kRoot) + R"(, {"name": "a", "parent": "a", "bone_length_mm": 1, "dofs": []})"), "cycle");
  expectValidationError(
      minimalConfig(std::string(kRoot) + R"(, {"name": "a", "parent": 1, "bone_length_mm": 1, "dofs": []})"), "cycle");
}

TEST(Skeleton, ParentCycleIsReported) {
  expectValidationError(
      minimalConfig(std::string(kRoot) + R"(, {"name": "a", "parent": "b", "bone_length_mm": 1, "dofs": []},
                                              {"name": "b", "parent": "a", "bone_length_mm": 1, "dofs": []})"),
      "cycle");
}

TEST(Skeleton, ChildBeforeParentIsRejected) {
  expectValidationError(
      minimalConfig(std::string(kRoot) + R"(, {"name": "a", "parent": "b", "bone_length_mm": 1, "dofs": []},
                                              {"name": "b", "parent": "root", "bone_length_mm": 1, "dofs": []})"),
      "'a'");
}

TEST(Skeleton, InvertedBoundsNameTheDof) {
  expectValidationError(
      minimalConfig(std::string(kRoot) + R"(, {"name": "knuckle", "parent": "root", "bone_length_mm": 1,
          "dofs": [{"kind": "rotation", "axis": "Z", "lower_deg": 10, "upper_deg": -10}]})"),
      "knuckle");
}

TEST(Skeleton, DuplicateNamesAreRejected) {
  expectValidationError(
      minimalConfig(std::string(kRoot) + R"(, {"name": "root", "parent": "root", "bone_length_mm": 1, "dofs": []})"),
      "duplicate joint name 'root'");
}

TEST(Skeleton, OtherStructuralErrors) {
  expectValidationError(minimalConfig(""), "no joints");
  expectValidationError(
      minimalConfig(std::string(kRoot) + R"(, {"name": "a", "parent": null, "bone_length_mm": 0, "dofs": []})"),
      "root joint 'a'");
  expectValidationError(
      minimalConfig(R"({"name": "root", "parent": null, "bone_length_mm": 5, "dofs": []})"), "bone length 0");
  expectValidationError(
      minimalConfig(std::string(kRoot) + R"(, {"name": "a", "parent": "root", "bone_length_mm": 1,
          "dofs": [{"kind": "translation", "axis": "X", "lower_mm": 0, "upper_mm": 1}]})"),
      "translation on a non-root joint");
  expectValidationError(
      minimalConfig(std::string(kRoot) + R"(, {"name": "a", "parent": "root", "bone_length_mm": 1,
          "dofs": [{"kind": "rotation", "axis": "W", "lower_deg": 0, "upper_deg": 1}]})"),
      "unknown axis");
  expectValidationError(
      minimalConfig(std::string(kRoot) + R"(, {"name": "a", "parent": "ghost", "bone_length_mm": 1, "dofs": []})"),
      "unknown parent 'ghost'");
  expectValidationError("{not json", "parse failure");
  expectValidationError(R"({"name": "t", "joints": [)" + std::string(kRoot) + R"(], "eval_subset": ["nope"]})",
                        "unknown joint 'nope'");
}

TEST(Skeleton, SubtreeAndAncestry) {
  const Skeleton& hand = defaultHand();
  const int index = *hand.findJoint("index_base");
  const int tip = *hand.findJoint("index_tip");
  const std::vector<int>& subtree = hand.subtree(index);
  EXPECT_EQ(subtree.size(), 4u);
  EXPECT_EQ(subtree.front(), index);
  EXPECT_TRUE(hand.isAncestorOrSelf(index, tip));
  EXPECT_FALSE(hand.isAncestorOrSelf(tip, index));
  EXPECT_EQ(hand.subtree(0).size(), 23u);
}

TEST(Skeleton, JsonRoundTrip) {
  const Skeleton again = parseSkeleton(skeletonToJson(defaultHand()));
  EXPECT_TRUE(structurallyEqual(again, defaultHand()));
  EXPECT_EQ(again.name(), "hand23");

  const auto path = std::filesystem::temp_directory_path() / "kinedeep_skeleton_roundtrip.json";
  saveSkeleton(defaultHand(), path);
  EXPECT_TRUE(structurallyEqual(loadSkeleton(path), defaultHand()));
  std::filesystem::remove(path);
}

TEST(Skeleton, ResolveHonorsEnvironment) {
  const auto path = std::filesystem::temp_directory_path() / "kinedeep_env_chain.json";
  {
    std::ofstream out(path);
    out << skeletonToJson(testing::planarChain({10.0, 20.0, 30.0}));
  }
  ::setenv("KINEDEEP_SKELETON", path.c_str(), 1);
  EXPECT_EQ(resolveSkeleton(std::nullopt).jointCount(), 4);
  ::unsetenv("KINEDEEP_SKELETON");
  EXPECT_EQ(resolveSkeleton(std::nullopt).jointCount(), 23);
  std::filesystem::remove(path);
}

TEST(ClampPose, ZeroPoseIsAFixpoint) {
  const PoseParams zero = restPose(defaultHand());
  EXPECT_EQ(clampPose(defaultHand(), zero), zero);
}

TEST(ClampPose, ClampsToTheViolatedBound) {
  const Skeleton& hand = defaultHand();
  PoseParams theta = restPose(hand);
  const int d = hand.firstDof(*hand.findJoint("middle_mid"));
  theta[d] = hand.upperBounds()[d] + 0.5;
  const PoseParams clamped = clampPose(hand, theta);
  EXPECT_EQ(clamped[d], hand.upperBounds()[d]);
  theta[d] = hand.upperBounds()[d];
  EXPECT_EQ(clamped, theta);
}

TEST(ClampPose, SampledPosesAreFixpoints) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const PoseParams theta = samplePose(defaultHand(), seed);
    EXPECT_EQ(clampPose(defaultHand(), theta), theta);
  }
}

TEST(ClampPose, WrongSizeIsRejected) {
  EXPECT_THROW(clampPose(defaultHand(), PoseParams::Zero(5)), ValidationError);
}

}  // namespace
}  // namespace kinedeep
