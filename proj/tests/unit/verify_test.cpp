#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "worldmesh/render.hpp"
#include "worldmesh/structmesh.hpp"
#include "worldmesh/transport.hpp"
#include "worldmesh/verify.hpp"

using namespace worldmesh;

namespace {

EdgeMap vline(int w, int h, int col, int y0, int len) {
  EdgeMap e(w, h);
  for (int y = y0; y < y0 + len; ++y) e.at(col, y) = 1;
  return e;
}

EdgeMap random_edges(int w, int h, double p, std::mt19937& rng) {
  std::bernoulli_distribution b(p);
  EdgeMap e(w, h);
  for (auto& v : e.bits) v = b(rng);
  return e;
}

// Brute force: scan the (2d+1)^2 window of every mesh pixel.
double brute_recall(const EdgeMap& mesh, const EdgeMap& est, int d) {
  std::size_t n = 0, hit = 0;
  for (int y = 0; y < mesh.height; ++y)
    for (int x = 0; x < mesh.width; ++x) {
      if (!mesh.at(x, y)) continue;
      ++n;
      bool found = false;
      for (int v = std::max(0, y - d); v <= std::min(mesh.height - 1, y + d) && !found; ++v)
        for (int u = std::max(0, x - d); u <= std::min(mesh.width - 1, x + d) && !found; ++u) found = est.at(u, v);
      hit += found;
    }
  return n == 0 ? 1.0 : static_cast<double>(hit) / static_cast<double>(n);
}

DepthMap step_depth(int w, int h, int boundary) {
  DepthMap d(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) d.at(x, y) = x < boundary ? 1.0 : 3.0;
  return d;
}

DepthMap scene_depth() {
  FloorPlan p = load_layout(std::string(WORLDMESH_FIXTURE_DIR) + "/layouts/two_room.json");
  TriMesh m = assemble_struct_mesh(p);
  Camera c;
  set_intrinsics(c, 172, 96, 60.0);
  c.position = Vec3(1.0, 1.0, 1.6);
  c.orientation = look_rotation(Vec3(1, 0.6, -0.15).normalized());
  return render_depth(m, c);
}

}  // namespace

TEST(Canny, ConstantDepthHasNoEdges) {
  EXPECT_EQ(depth_edges(DepthMap(40, 30, 2.5)).count(), 0u);
  EXPECT_EQ(depth_edges(DepthMap(40, 30)).count(), 0u);
}

TEST(Canny, VerticalStepGivesThinEdgeAtBoundary) {
  const int w = 64, h = 48, b = 32;
  EdgeMap e = depth_edges(step_depth(w, h, b));
  for (int y = 0; y < h; ++y) {
    int n = 0;
    for (int x = 0; x < w; ++x)
      if (e.at(x, y)) {
        ++n;
        EXPECT_LE(std::abs(x - b), 1);
      }
    EXPECT_EQ(n, 1) << "row " << y;
  }
}

TEST(Canny, GentleRampBelowLowThreshold) {
  // Sobel response of the normalized ramp is 8/(w-1), below the 0.05 low threshold.
  const int w = 200, h = 32;
  DepthMap d(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) d.at(x, y) = 1.0 + 0.1 * x;
  ASSERT_LT(8.0 / (w - 1), CannyThresholds{}.low);
  EXPECT_EQ(depth_edges(d).count(), 0u);
}

TEST(Canny, NoHitPixelsActAsFarPlane) {
  DepthMap d(48, 32, 2.0);
  for (int y = 0; y < 32; ++y)
    for (int x = 30; x < 48; ++x) d.at(x, y) = DepthMap::kNoHit;
  d.at(0, 0) = 4.0;
  EdgeMap e = depth_edges(d);
  EXPECT_GT(e.count(), 20u);
}

TEST(Canny, TranslationEquivariantInInterior) {
  DepthMap base = scene_depth();
  const int k = 3;
  DepthMap shifted(base.width, base.height);
  for (int y = 0; y < base.height; ++y)
    for (int x = 0; x < base.width; ++x) shifted.at(x, y) = base.at(std::max(0, x - k), y);
  // Same normalization range keeps gradients comparable.
  EdgeMap a = depth_edges(base), b = depth_edges(shifted);
  for (int y = 8; y < base.height - 8; ++y)
    for (int x = 8; x < base.width - 8 - k; ++x) EXPECT_EQ(a.at(x, y), b.at(x + k, y)) << x << "," << y;
}

TEST(Dilate, SinglePixelBecomesSquare) {
  EdgeMap e(50, 50);
  e.at(25, 25) = 1;
  EdgeMap d = dilate(e, 10);
  EXPECT_EQ(d.count(), 21u * 21u);
  EXPECT_TRUE(d.at(15, 15) && d.at(35, 35) && !d.at(14, 25) && !d.at(25, 36));
  EdgeMap corner(50, 50);
  corner.at(2, 3) = 1;
  EXPECT_EQ(dilate(corner, 10).count(), 13u * 14u);
}

TEST(Dilate, ZeroIsIdentityAndMonotone) {
  std::mt19937 rng(3);
  EdgeMap a = random_edges(40, 30, 0.02, rng), b = random_edges(40, 30, 0.02, rng);
  EXPECT_EQ(dilate(a, 0), a);
  EdgeMap u = a;
  for (std::size_t i = 0; i < u.bits.size(); ++i) u.bits[i] |= b.bits[i];
  EdgeMap da = dilate(a, 4), du = dilate(u, 4);
  for (std::size_t i = 0; i < da.bits.size(); ++i)
    if (da.bits[i]) EXPECT_TRUE(du.bits[i]);
}

TEST(Recall, BasicCases) {
  EdgeMap mesh = vline(128, 128, 50, 10, 100);
  EXPECT_DOUBLE_EQ(edge_recall(mesh, mesh, 10), 1.0);
  EXPECT_DOUBLE_EQ(edge_recall(mesh, EdgeMap(128, 128), 10), 0.0);
  EXPECT_DOUBLE_EQ(edge_recall(EdgeMap(128, 128), EdgeMap(128, 128), 10), 1.0);
  EXPECT_DOUBLE_EQ(edge_recall(mesh, vline(128, 128, 58, 10, 100), 10), 1.0);
  EXPECT_DOUBLE_EQ(edge_recall(mesh, vline(128, 128, 61, 10, 100), 10), 0.0);
  try {
    edge_recall(mesh, EdgeMap(64, 64), 10);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
  }
}

TEST(Recall, MatchesBruteForceAndIsMonotone) {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int w = 16 + trial * 5, h = 128 - trial * 4;
    EdgeMap mesh = random_edges(w, h, 0.03, rng), est = random_edges(w, h, 0.01, rng);
    double prev = -1;
    for (int d : {0, 1, 3, 10}) {
      const double r = edge_recall(mesh, est, d);
      EXPECT_DOUBLE_EQ(r, brute_recall(mesh, est, d));
      EXPECT_GE(r, prev);
      prev = r;
    }
    EdgeMap more = est;
    EdgeMap extra = random_edges(w, h, 0.01, rng);
    for (std::size_t i = 0; i < more.bits.size(); ++i) more.bits[i] |= extra.bits[i];
    EXPECT_GE(edge_recall(mesh, more, 3), edge_recall(mesh, est, 3));
  }
}

TEST(VerifyImage, EchoPassesConstantFails) {
  DepthMap scaffold = scene_depth();
  ASSERT_GT(depth_edges(scaffold).count(), 0u);
  Image8 img(scaffold.width, scaffold.height, 3, 90);
  auto dir = std::filesystem::temp_directory_path() / "worldmesh_depth_store";
  std::filesystem::remove_all(dir);
  StoredDepthAdapter echo(dir);
  echo.put(img, scaffold);
  VerificationResult ok = verify_image(img, scaffold, echo);
  EXPECT_DOUBLE_EQ(ok.recall, 1.0);
  EXPECT_TRUE(ok.pass);
  ConstantDepthAdapter flat(2.0);
  VerificationResult bad = verify_image(img, scaffold, flat);
  EXPECT_DOUBLE_EQ(bad.recall, 0.0);
  EXPECT_FALSE(bad.pass);
  EXPECT_EQ(bad.mesh_edge_pixels, ok.mesh_edge_pixels);
  try {
    verify_image(Image8(scaffold.width, scaffold.height, 3, 1), scaffold, echo);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kAdapterFailure);
  }
  std::filesystem::remove_all(dir);
}

TEST(VerifyImage, ExtraFurnitureEdgesAreIgnored) {
  DepthMap scaffold = scene_depth();
  DepthMap est = scaffold;
  // A box-shaped blob nearer than anything else in the frame.
  for (int y = 40; y < 70; ++y)
    for (int x = 60; x < 100; ++x) est.at(x, y) = 0.8;
  EdgeMap mesh = depth_edges(scaffold), extra = depth_edges(est);
  VerificationResult r = verify_depths(scaffold, est);
  EXPECT_DOUBLE_EQ(r.recall, edge_recall(mesh, extra, 10));
  // Pixel-count oracle on the union of scaffold and furniture edges.
  EdgeMap uni = mesh;
  for (std::size_t i = 0; i < uni.bits.size(); ++i) uni.bits[i] |= extra.bits[i];
  EXPECT_DOUBLE_EQ(edge_recall(mesh, uni, 10), 1.0);
  EXPECT_DOUBLE_EQ(brute_recall(mesh, uni, 10), 1.0);
}

TEST(VerifyImage, ThresholdIsStrict) {
  DepthMap scaffold = scene_depth();
  VerifyOptions o;
  o.threshold = 1.0;
  VerificationResult r = verify_depths(scaffold, scaffold, o);
  EXPECT_DOUBLE_EQ(r.recall, 1.0);
  EXPECT_FALSE(r.pass);
}

TEST(VerifyImage, CommandAdapterRoundTrip) {
  DepthMap scaffold = scene_depth();
  auto file = std::filesystem::temp_directory_path() / "worldmesh_cmd_depth.pfm";
  write_pfm(file, scaffold);
  CommandDepthAdapter cmd("cat > /dev/null; cat '" + file.string() + "'");
  VerificationResult r = verify_image(Image8(scaffold.width, scaffold.height, 3), scaffold, cmd);
  EXPECT_TRUE(r.pass);
  CommandDepthAdapter broken("cat > /dev/null; echo nope");
  EXPECT_THROW(broken.estimate(Image8(4, 4, 3)), Error);
  std::filesystem::remove(file);
}

TEST(Base64, RoundTrip) {
  for (std::string s : {"", "a", "ab", "abc", "abcd", "hello world!"}) {
    std::vector<std::uint8_t> b(s.begin(), s.end());
    EXPECT_EQ(base64_decode(base64_encode(b)), b);
  }
  EXPECT_EQ(base64_encode(std::vector<std::uint8_t>{'M', 'a', 'n'}), "TWFu");
}
