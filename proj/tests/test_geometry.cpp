#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cstdio>
#include <fstream>

#include "sitetrack/errors.hpp"
#include "sitetrack/geometry.hpp"
#include "sitetrack/rng.hpp"

using namespace sitetrack;
using namespace sitetrack::geometry;
using Eigen::Matrix3d;
using Eigen::Vector2d;

namespace {

std::vector<Correspondence> square_to(const std::vector<Vector2d>& targets) {
  const std::vector<Vector2d> square = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  std::vector<Correspondence> cs;
  for (std::size_t i = 0; i < 4; ++i) cs.push_back({square[i], targets[i]});
  return cs;
}

// Independent scalar evaluation of H*(p,1); no Eigen products involved.
Vector2d project_by_hand(const Matrix3d& h, const Vector2d& p) {
  const double w = h(2, 0) * p.x() + h(2, 1) * p.y() + h(2, 2);
  const double u = h(0, 0) * p.x() + h(0, 1) * p.y() + h(0, 2);
  const double v = h(1, 0) * p.x() + h(1, 1) * p.y() + h(1, 2);
  return {u / w, v / w};
}

std::vector<Correspondence> generate_from(const Matrix3d& h, std::size_t n, Rng& rng) {
  std::vector<Correspondence> cs;
  for (std::size_t i = 0; i < n; ++i) {
    const Vector2d p(rng.uniform(-3.0, 8.0), rng.uniform(-2.0, 6.0));
    cs.push_back({p, project_by_hand(h, p)});
  }
  return cs;
}

Matrix3d sample_homography() {
  Matrix3d h;
  h << 1.2, -0.1, 4.0, 0.3, 0.9, -2.0, 0.01, -0.02, 1.0;
  return h;
}

}  // namespace

TEST_CASE("unit square fixed points give identity") {
  const auto h = dlt_homography(square_to({{0, 0}, {1, 0}, {1, 1}, {0, 1}}));
  CHECK((h.h - Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("shifted square gives pure translation") {
  const auto h = dlt_homography(square_to({{2, 3}, {3, 3}, {3, 4}, {2, 4}}));
  Matrix3d expect;
  expect << 1, 0, 2, 0, 1, 3, 0, 0, 1;
  CHECK((h.h - expect).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("recovers a known homography from 8 noiseless correspondences") {
  Rng rng(7);
  const Matrix3d truth = sample_homography();
  const auto cs = generate_from(truth, 8, rng);
  const auto h = dlt_homography(cs);
  CHECK((h.h - truth).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(reprojection_error(h, cs) < 1e-12);
}

TEST_CASE("project_point identity and translation") {
  const Homography id = make_homography(Matrix3d::Identity());
  CHECK(project_point(id, {3.5, -2.0}).isApprox(Vector2d(3.5, -2.0)));
  Matrix3d t = Matrix3d::Identity();
  t(0, 2) = 2;
  t(1, 2) = 3;
  CHECK(project_point(make_homography(t), {0, 0}).isApprox(Vector2d(2, 3)));
}

TEST_CASE("project_point matches hand evaluation on random inputs") {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    Matrix3d m = sample_homography();
    m(0, 1) += rng.uniform(-0.3, 0.3);
    m(1, 0) += rng.uniform(-0.3, 0.3);
    const Homography h = make_homography(m);
    const Vector2d p(rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0));
    CHECK((project_point(h, p) - project_by_hand(h.h, p)).norm() < 1e-12);
  }
}

TEST_CASE("reprojection error is the sum of squared offsets") {
  const Homography id = make_homography(Matrix3d::Identity());
  std::vector<Correspondence> exact = {{{1, 2}, {1, 2}}, {{-3, 0.5}, {-3, 0.5}}};
  CHECK(reprojection_error(id, exact) == doctest::Approx(0.0));
  std::vector<Correspondence> off = {{{1, 1}, {1.3, 1.4}}};
  CHECK(reprojection_error(id, off) == doctest::Approx(0.25));
  std::vector<Correspondence> two = {{{0, 0}, {1, 0}}, {{5, 5}, {5, 7}}};
  CHECK(reprojection_error(id, two) == doctest::Approx(5.0));
}

TEST_CASE("inverse projection round-trips") {
  Rng rng(13);
  const Homography h = make_homography(sample_homography());
  const Homography hinv = inverse(h);
  for (int i = 0; i < 50; ++i) {
    const Vector2d p(rng.uniform(-4.0, 4.0), rng.uniform(-4.0, 4.0));
    CHECK((project_point(hinv, project_point(h, p)) - p).norm() < 1e-9);
  }
}

TEST_CASE("scaling world points scales projections consistently") {
  Rng rng(17);
  const Matrix3d truth = sample_homography();
  const auto cs = generate_from(truth, 10, rng);
  const double s = 2.5;
  auto scaled = cs;
  for (auto& c : scaled) c.world_point *= s;
  const auto h = dlt_homography(scaled);
  for (const auto& c : cs)
    CHECK((project_point(h, c.image_point) - s * c.world_point).norm() < 1e-7);
}

TEST_CASE("degenerate inputs are rejected") {
  std::vector<Correspondence> three = {{{0, 0}, {0, 0}}, {{1, 0}, {1, 0}}, {{0, 1}, {0, 1}}};
  CHECK_THROWS_AS(dlt_homography(three), TooFewPoints);

  std::vector<Correspondence> collinear = {
      {{0, 0}, {0, 0}}, {{1, 1}, {1, 0}}, {{2, 2}, {1, 1}}, {{3, 3}, {0, 1}}};
  CHECK_THROWS_AS(dlt_homography(collinear), DegenerateConfiguration);

  std::vector<Correspondence> duplicated = {
      {{0, 0}, {0, 0}}, {{0, 0}, {1, 0}}, {{0, 0}, {1, 1}}, {{1, 1}, {0, 1}}};
  CHECK_THROWS_AS(dlt_homography(duplicated), DegenerateConfiguration);
}

TEST_CASE("points mapping to infinity are flagged") {
  Matrix3d m = Matrix3d::Zero();
  m(0, 0) = 1;
  m(1, 1) = 1;
  m(2, 0) = 1;  // w = x
  const Homography h{m};
  CHECK_THROWS_AS(project_point(h, {0.0, 2.0}), PointAtInfinity);
}

TEST_CASE("correspondence files load and reject malformed lines") {
  const char* path = "tmp_corr_test.txt";
  {
    std::ofstream out(path);
    out << "# comment line\n";
    out << "10 20 1.5 2.5\n";
    out << "\n";
    out << "30 40 -1.0 0.25\n";
  }
  const auto cs = load_correspondences(path);
  REQUIRE(cs.size() == 2);
  CHECK(cs[0].image_point == Vector2d(10, 20));
  CHECK(cs[1].world_point == Vector2d(-1.0, 0.25));

  {
    std::ofstream out(path);
    out << "1 2 3\n";
  }
  CHECK_THROWS_AS(load_correspondences(path), IoError);
  std::remove(path);
}

TEST_CASE("refinement keeps the exact solution on redundant noiseless data") {
  Rng rng(23);
  const Matrix3d truth = sample_homography();
  const auto cs = generate_from(truth, 20, rng);
  const auto h = dlt_homography(cs);
  CHECK(reprojection_error(h, cs) < 1e-12);
}
