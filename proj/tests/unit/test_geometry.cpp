#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "mcvo/geometry/camera.hpp"
#include "mcvo/geometry/pose.hpp"
#include "support/fixtures.hpp"

namespace mcvo {
namespace {

using testing::max_abs_diff;
using testing::random_pose;
using testing::random_rotation;

constexpr double kPi = std::numbers::pi;

Eigen::Quaterniond rz(double a) { return Eigen::Quaterniond(Eigen::AngleAxisd(a, Eigen::Vector3d::UnitZ())); }
Eigen::Quaterniond rx(double a) { return Eigen::Quaterniond(Eigen::AngleAxisd(a, Eigen::Vector3d::UnitX())); }

TEST(Pose, ComposeIdentity) {
  std::mt19937_64 rng(1);
  const Pose p = random_pose(rng);
  EXPECT_LT(max_abs_diff((Pose::Identity() * p).matrix(), p.matrix()), 1e-15);
}

TEST(Pose, ComposeQuarterTurns) {
  const Pose a(rz(kPi / 2), Eigen::Vector3d::Zero());
  const Pose c = a * a;
  EXPECT_NEAR(rotation_angle(c.rotation.conjugate() * rz(kPi)), 0.0, 1e-12);
  EXPECT_LT(c.translation.norm(), 1e-15);
}

TEST(Pose, ComposeWithInverseIsIdentity) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 100; ++i) {
    const Pose p = random_pose(rng);
    EXPECT_LT(max_abs_diff((p * inverse(p)).matrix(), Eigen::Matrix4d::Identity()), 1e-12);
  }
}

TEST(Pose, InverseExamples) {
  EXPECT_LT(max_abs_diff(inverse(Pose::Identity()).matrix(), Eigen::Matrix4d::Identity()), 0.0 + 1e-300);
  const Pose p(Eigen::Quaterniond::Identity(), Eigen::Vector3d(1, 2, 3));
  EXPECT_EQ(inverse(p).translation, Eigen::Vector3d(-1, -2, -3));
  std::mt19937_64 rng(3);
  const Pose q = random_pose(rng);
  EXPECT_LT(max_abs_diff(inverse(inverse(q)).matrix(), q.matrix()), 1e-12);
}

TEST(Pose, MatchesDenseMatrixProduct) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 200; ++i) {
    const Pose a = random_pose(rng);
    const Pose b = random_pose(rng);
    EXPECT_LT(max_abs_diff((a * b).matrix(), a.matrix() * b.matrix()), 1e-12);
    EXPECT_LT(max_abs_diff(inverse(a).matrix(), a.matrix().inverse()), 1e-12);
  }
}

TEST(Pose, Properties) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 500; ++i) {
    const Pose a = random_pose(rng), b = random_pose(rng), c = random_pose(rng);
    EXPECT_LT(max_abs_diff(((a * b) * c).matrix(), (a * (b * c)).matrix()), 1e-10);
    EXPECT_LT(max_abs_diff(inverse(a * b).matrix(), (inverse(b) * inverse(a)).matrix()), 1e-10);
    EXPECT_NEAR((a * b).rotation.norm(), 1.0, 1e-9);
    EXPECT_NEAR(inverse(a).rotation.norm(), 1.0, 1e-9);
  }
}

TEST(So3, LogIdentity) {
  EXPECT_EQ(so3_log(Eigen::Quaterniond::Identity()), Eigen::Vector3d::Zero());
}

TEST(So3, ExpQuarterTurn) {
  const Eigen::Quaterniond q = so3_exp(Eigen::Vector3d(0, 0, kPi / 2));
  EXPECT_LT((q.toRotationMatrix() - rz(kPi / 2).toRotationMatrix()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(So3, RoundTrip) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, kPi - 1e-6);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Eigen::Vector3d v = Eigen::Vector3d(n(rng), n(rng), n(rng)).normalized() * u(rng);
    worst = std::max(worst, (so3_log(so3_exp(v)) - v).norm());
    const Eigen::Quaterniond q = random_rotation(rng, kPi - 1e-6);
    const Eigen::Matrix3d R = q.toRotationMatrix();
    worst = std::max(worst, (so3_exp(so3_log(R)).toRotationMatrix() - R).cwiseAbs().maxCoeff());
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(So3, SmallAngles) {
  const Eigen::Vector3d v(1e-10, -2e-10, 3e-11);
  EXPECT_LT((so3_log(so3_exp(v)) - v).norm(), 1e-20);
}

TEST(So3, HalfTurnSignConvention) {
  for (const Eigen::Vector3d axis : {Eigen::Vector3d(0, 0, 1), Eigen::Vector3d(0, 0, -1),
                                     Eigen::Vector3d(-1, 2, 0).normalized()}) {
    const Eigen::Quaterniond q(Eigen::AngleAxisd(kPi, axis));
    const Eigen::Vector3d w = so3_log(q);
    EXPECT_NEAR(w.norm(), kPi, 1e-12);
    Eigen::Index k;
    w.cwiseAbs().maxCoeff(&k);
    EXPECT_GT(w(k), 0.0);
    EXPECT_EQ(so3_log(Eigen::Quaterniond(-q.coeffs())), w);
  }
}

TEST(Pose, BoxPlusIsRightPerturbation) {
  std::mt19937_64 rng(7);
  const Pose p = random_pose(rng);
  Eigen::Matrix<double, 6, 1> d;
  d << 0.1, -0.2, 0.05, 0.3, 0.4, -0.5;
  const Pose q = box_plus(p, d);
  const Pose expected = p * Pose(so3_exp(d.head<3>()), Eigen::Vector3d::Zero());
  EXPECT_LT(testing::rotation_distance(q, expected), 1e-12);
  EXPECT_LT((q.translation - (p.translation + p.R() * d.tail<3>())).norm(), 1e-12);
}

CameraIntrinsic pinhole100() {
  CameraIntrinsic c;
  c.model = CameraModel::kPinhole;
  c.fx = c.fy = 100;
  c.cx = c.cy = 50;
  c.fov_limit = 1.2;
  c.width = c.height = 100;
  return c;
}

CameraIntrinsic fisheye100() {
  CameraIntrinsic c;
  c.model = CameraModel::kEquidistant;
  c.fx = c.fy = 100;
  c.cx = c.cy = 0;
  c.fov_limit = kPi / 2;
  c.width = c.height = 400;
  return c;
}

TEST(Camera, PinholeExamples) {
  const auto intr = pinhole100();
  EXPECT_EQ(*project({0, 0, 1}, intr), Eigen::Vector2d(50, 50));
  EXPECT_EQ(*project({1, 0, 2}, intr), Eigen::Vector2d(100, 50));
  const Eigen::Vector3d axis = *unproject({50, 50}, intr);
  EXPECT_EQ(axis, Eigen::Vector3d(0, 0, 1));
}

TEST(Camera, ProjectionFailures) {
  EXPECT_FALSE(project({0, 0, -1}, pinhole100()).has_value());
  EXPECT_FALSE(project({1, 0, 0}, pinhole100()).has_value());
  auto fe = fisheye100();
  fe.fov_limit = 1.0;
  EXPECT_FALSE(project({1, 0, 0.1}, fe).has_value());
  EXPECT_FALSE(unproject({110, 0}, fe).has_value());
}

TEST(Camera, EquidistantExamples) {
  const auto intr = fisheye100();
  const Eigen::Vector2d px = *project({1, 0, 1}, intr);
  EXPECT_NEAR(px.x(), 78.5398, 1e-4);
  EXPECT_NEAR(px.y(), 0.0, 1e-12);
  const Eigen::Vector3d ray = *unproject({100 * kPi / 4, 0}, intr);
  EXPECT_NEAR(std::acos(ray.z()), kPi / 4, 1e-12);
  EXPECT_NEAR(ray.y(), 0.0, 1e-12);
}

class RoundTrip : public ::testing::TestWithParam<CameraModel> {};

TEST_P(RoundTrip, PixelsSurviveUnprojectProject) {
  CameraIntrinsic intr;
  intr.model = GetParam();
  if (intr.model == CameraModel::kPinhole) {
    intr.fx = 320; intr.fy = 310; intr.cx = 320; intr.cy = 240; intr.width = 640; intr.height = 480;
    intr.fov_limit = 1.3;
  } else {
    intr.fx = 200; intr.fy = 200; intr.cx = 320; intr.cy = 320; intr.width = 640; intr.height = 640;
    intr.fov_limit = kPi / 2;
  }
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> ux(0, intr.width), uy(0, intr.height), ud(0.1, 50);
  double worst = 0.0;
  int tested = 0;
  while (tested < 10000) {
    const Eigen::Vector2d px(ux(rng), uy(rng));
    const auto ray = unproject(px, intr);
    if (!ray) continue;
    ++tested;
    const auto back = project(*ray * ud(rng), intr);
    ASSERT_TRUE(back.has_value());
    worst = std::max(worst, (*back - px).norm());
  }
  EXPECT_LT(worst, 1e-6);
}

INSTANTIATE_TEST_SUITE_P(Models, RoundTrip,
                         ::testing::Values(CameraModel::kPinhole, CameraModel::kEquidistant));

TEST(Camera, IntrinsicValidation) {
  auto intr = pinhole100();
  EXPECT_NO_THROW(intr.validate());
  intr.fov_limit = kPi / 2;
  EXPECT_THROW(intr.validate(), std::invalid_argument);
  intr = pinhole100();
  intr.fx = 0;
  EXPECT_THROW(intr.validate(), std::invalid_argument);
  auto fe = fisheye100();
  fe.fov_limit = kPi;
  EXPECT_NO_THROW(fe.validate());
  fe.fov_limit = kPi + 0.1;
  EXPECT_THROW(fe.validate(), std::invalid_argument);
}

TEST(BodyPose, IdentityExtrinsicUnitScale) {
  std::mt19937_64 rng(9);
  const Pose cam = random_pose(rng);
  const Pose body = body_pose_from_camera(cam, CameraExtrinsic{}, 1.0);
  EXPECT_LT(max_abs_diff(body.matrix(), cam.matrix()), 1e-15);
}

TEST(BodyPose, ScaleOnlyTouchesTranslationTerm) {
  std::mt19937_64 rng(10);
  const Pose cam = random_pose(rng);
  CameraExtrinsic ext{random_pose(rng, 1.0)};
  const Pose a = body_pose_from_camera(cam, ext, 1.0);
  const Pose b = body_pose_from_camera(cam, ext, 2.0);
  EXPECT_LT((b.translation - a.translation - cam.translation).norm(), 1e-12);
  const Pose r01 = body_pose_from_camera(cam, ext, 0.1);
  const Pose r10 = body_pose_from_camera(cam, ext, 10.0);
  EXPECT_EQ(r01.rotation.coeffs(), a.rotation.coeffs());
  EXPECT_EQ(r10.rotation.coeffs(), a.rotation.coeffs());
}

TEST(BodyPose, MatchesDenseOracle) {
  CameraExtrinsic ext{Pose(rz(kPi / 2), Eigen::Vector3d(1, 0, 0))};
  const Pose cam(rx(kPi / 6), Eigen::Vector3d(0, 1, 0));
  const double s = 2.0;
  Eigen::Matrix4d scaled = cam.matrix();
  scaled.block<3, 1>(0, 3) *= s;
  const Eigen::Matrix4d oracle = scaled * ext.cam_in_body.matrix().inverse();
  EXPECT_LT(max_abs_diff(body_pose_from_camera(cam, ext, s).matrix(), oracle), 1e-12);
  // closed form of the block product
  const Eigen::Matrix3d Rb = cam.R() * ext.cam_in_body.R().transpose();
  const Eigen::Vector3d tb = -Rb * ext.cam_in_body.translation + s * cam.translation;
  EXPECT_LT((body_pose_from_camera(cam, ext, s).translation - tb).norm(), 1e-12);
}

TEST(BodyPose, NonPositiveScaleThrows) {
  EXPECT_THROW(body_pose_from_camera(Pose{}, CameraExtrinsic{}, 0.0), std::domain_error);
  EXPECT_THROW(body_pose_from_camera(Pose{}, CameraExtrinsic{}, -1.0), std::domain_error);
}

TEST(Rig, NeedsTwoCameras) {
  RigConfig rig;
  rig.cameras.push_back(Camera{pinhole100(), {}});
  EXPECT_THROW(rig.validate(), std::invalid_argument);
  rig.cameras.push_back(Camera{fisheye100(), {}});
  EXPECT_NO_THROW(rig.validate());
}

}  // namespace
}  // namespace mcvo
