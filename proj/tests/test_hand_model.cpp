#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "biohand/hand_model.hpp"
#include "biohand/ik.hpp"

using namespace biohand;

namespace {

HandModel planar_two_link(double l0 = 1.0, double l1 = 1.0) {
  JointSpec a, b;
  a.name = "a";
  b.name = "b";
  b.parent = 0;
  b.origin = Vec3(l0, 0.0, 0.0);
  LinkSpec la, lb;
  la.length = l0;
  lb.length = l1;
  lb.fingertip_radius = 0.01;
  lb.tip_name = "tip";
  return HandModel({a, b}, {la, lb}, Vec3::Zero(), {});
}

}  // namespace

TEST(Kinematics, PlanarTwoLinkRotatedQuarterTurn) {
  const HandModel m = planar_two_link();
  Vec q(2);
  q << std::numbers::pi / 2.0, 0.0;
  const Vec3 tip = fingertip_position(m, q, 0);
  // rotation about +y by pi/2 takes +x to -z
  EXPECT_NEAR(tip.x(), 0.0, 1e-15);
  EXPECT_NEAR(tip.z(), -2.0, 1e-15);
  EXPECT_NEAR(tip.norm(), 2.0, 1e-15);
}

TEST(Kinematics, PlanarTwoLinkElbowOracle) {
  const HandModel m = planar_two_link(0.7, 0.4);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int k = 0; k < 100; ++k) {
    Vec q(2);
    q << u(rng), u(rng);
    // in the x-z plane, angle measured from +x towards -z
    const double x = 0.7 * std::cos(q[0]) + 0.4 * std::cos(q[0] + q[1]);
    const double z = -(0.7 * std::sin(q[0]) + 0.4 * std::sin(q[0] + q[1]));
    const Vec3 tip = fingertip_position(m, q, 0);
    ASSERT_NEAR(tip.x(), x, 1e-14);
    ASSERT_NEAR(tip.y(), 0.0, 1e-14);
    ASSERT_NEAR(tip.z(), z, 1e-14);
  }
}

TEST(Kinematics, RestPoseTipsAtSumOfLinkLengths) {
  const HandModel m = planar_two_link(0.3, 0.2);
  EXPECT_NEAR(fingertip_position(m, Vec::Zero(2), 0).x(), 0.5, 1e-15);
}

TEST(Kinematics, LimitsAgnostic) {
  const HandModel m = default_hand24();
  const Vec beyond = m.limit_hi() + Vec::Constant(m.dofs(), 0.5);
  const Mat3X a = fingertip_positions(m, m.clamp(beyond));
  const Mat3X b = fingertip_positions(m, m.limit_hi());
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(fingertip_positions(m, beyond) == b);
}

TEST(Kinematics, RejectsWrongLength) {
  EXPECT_THROW(forward_kinematics(default_hand24(), Vec::Zero(3)), InvalidArgument);
}

TEST(Jacobian, SingleRevoluteColumnNormIsRadius) {
  const HandModel m = single_joint_model(5e-3, 0.02, 5.0, 0.37);
  for (double q0 : {0.0, 0.4, -1.3}) {
    const Mat j = fingertip_jacobian(m, Vec::Constant(1, q0), 0);
    EXPECT_NEAR(j.col(0).norm(), 0.37, 1e-9);
  }
}

TEST(Jacobian, ZeroLengthChainIsZero) {
  const HandModel m = single_joint_model(5e-3, 0.02, 5.0, 0.0);
  EXPECT_EQ(fingertip_jacobian(m, Vec::Constant(1, 0.3), 0).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Jacobian, OffChainColumnsAreZeroAndMatchesFiniteDifference) {
  const HandModel m = default_hand24();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    Vec q = m.limit_lo() + (m.limit_hi() - m.limit_lo()).cwiseProduct(Vec::NullaryExpr(m.dofs(), [&] { return u(rng); }));
    for (int tip = 0; tip < static_cast<int>(m.fingertips().size()); ++tip) {
      const Mat j = fingertip_jacobian(m, q, tip);
      const auto& chain = m.chain(m.fingertips()[tip].joint);
      for (int c = 0; c < m.dofs(); ++c)
        if (std::find(chain.begin(), chain.end(), c) == chain.end()) ASSERT_EQ(j.col(c).norm(), 0.0);
      // first-order prediction of a small motion
      const Vec dq = 1e-5 * Vec::NullaryExpr(m.dofs(), [&] { return u(rng) - 0.5; });
      const Vec3 moved = fingertip_position(m, q + dq, tip) - fingertip_position(m, q, tip);
      ASSERT_LE((j * dq - moved).norm(), 1e-4 * dq.norm() + 1e-12);
    }
  }
}

TEST(Jacobian, UnknownFingertip) {
  EXPECT_THROW(fingertip_jacobian(default_hand24(), Vec::Zero(24), 99), InvalidArgument);
}

TEST(HandModel, DefaultLayout) {
  const HandModel m = default_hand24();
  EXPECT_EQ(m.dofs(), 24);
  EXPECT_EQ(m.fingertips().size(), 5u);
  auto chain_len = [&](const char* tip) {
    int n = 0;
    for (int j : m.chain(m.fingertips()[m.fingertip_index(tip)].joint))
      if (m.joints()[j].name.rfind("WR", 0) != 0) ++n;
    return n;
  };
  EXPECT_EQ(chain_len("th"), 5);
  EXPECT_EQ(chain_len("ff"), 4);
  EXPECT_EQ(chain_len("mf"), 4);
  EXPECT_EQ(chain_len("rf"), 4);
  EXPECT_EQ(chain_len("lf"), 5);
  EXPECT_NO_THROW(m.joint_index("WRJ1"));
  EXPECT_NO_THROW(m.joint_index("WRJ2"));
  for (int i = 0; i < m.dofs(); ++i) {
    EXPECT_LT(m.limit_lo()[i], m.limit_hi()[i]);
    EXPECT_GT(m.inertia()[i], 0.0);
    EXPECT_GT(m.tau_max()[i], 0.0);
  }
}

TEST(HandModel, ShippedFileMatchesBuiltIn) {
  const HandModel shipped = load_model(std::string(BIOHAND_SOURCE_DIR) + "/models/hand24.model");
  EXPECT_EQ(model_to_json(shipped), model_to_json(default_hand24()));
}

TEST(HandModel, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "biohand_roundtrip.model";
  save_model(default_hand24(), path.string());
  const HandModel back = load_model(path.string());
  EXPECT_EQ(model_to_json(back), model_to_json(default_hand24()));
  const Vec q = Vec::LinSpaced(24, -0.1, 0.4);
  EXPECT_TRUE(fingertip_positions(back, q) == fingertip_positions(default_hand24(), q));
  std::filesystem::remove(path);
}

TEST(HandModel, RejectsMalformedFiles) {
  nlohmann::json j = model_to_json(default_hand24());
  j["format"] = "something-else";
  EXPECT_THROW(model_from_json(j), FormatError);
  j = model_to_json(default_hand24());
  j["joints"][0]["limit_lo"] = 1.0;
  j["joints"][0]["limit_hi"] = -1.0;
  EXPECT_THROW(model_from_json(j), FormatError);
  j = model_to_json(default_hand24());
  j["joints"][3]["inertia"] = 0.0;
  EXPECT_THROW(model_from_json(j), FormatError);
  EXPECT_THROW(load_model("/nonexistent/hand.model"), FormatError);
}

TEST(Ik, ReachesReachableTarget) {
  const HandModel m = default_hand24();
  const int tip = m.fingertip_index("ff");
  Vec q_goal = Vec::Zero(24);
  for (int j : finger_joints(m, tip, {})) q_goal[j] = 0.3;
  q_goal = m.clamp(q_goal);
  const Vec3 target = fingertip_position(m, q_goal, tip);
  const IkResult r = solve_fingertip_ik(m, Vec::Zero(24), tip, target, finger_joints(m, tip, {}));
  EXPECT_LT(r.residual, 1e-5);
  EXPECT_TRUE((r.q.array() >= m.limit_lo().array()).all() && (r.q.array() <= m.limit_hi().array()).all());
}
